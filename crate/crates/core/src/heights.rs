//! Height distribution of Ewens fragmentation trees.
//!
//! `q_n(h) = P(H_n ≤ h)` is computed row by row in `h` from the Poissonized
//! recursion `F_h(z) = exp(θ Σ_j q_j(h-1) z^j / j)` with
//! `q_{m+1}(h) = m!/θ^{(m)} [z^m] F_h(z)`. The module also holds the
//! negative-binomial mixing law used to de-Poissonize and statistics of
//! sampled trees.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fragmentation::MassTree;
use crate::series::{series_exp, series_exp_rational, Series};
use crate::special::{ln_factorial, ln_rising};

/// Largest table size accepted in rational mode.
pub const MAX_RATIONAL_N: usize = 64;
/// Adaptive row selection stops once `1 - q_N(h)` drops below this.
pub const ADAPTIVE_TAIL: f64 = 1e-12;

/// Limits on the size of an exact height table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeightBudget {
    pub max_n: usize,
    pub max_h: usize,
}

impl Default for HeightBudget {
    fn default() -> Self {
        HeightBudget { max_n: 4000, max_h: 64 }
    }
}

/// `q[n][h] = P(H_n ≤ h)` for `1 ≤ n ≤ N`, `0 ≤ h ≤ H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightCdfTable {
    theta: f64,
    n_max: usize,
    h_max: usize,
    // row-major in n, index (n - 1) * (h_max + 1) + h
    q: Vec<f64>,
}

impl HeightCdfTable {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    /// `P(H_n ≤ h)`; heights beyond the table are treated as certain once
    /// `h ≥ n - 1`.
    pub fn q(&self, n: usize, h: usize) -> f64 {
        assert!(n >= 1 && n <= self.n_max, "n = {n} outside table 1..={}", self.n_max);
        if h + 1 >= n {
            return 1.0;
        }
        assert!(h <= self.h_max, "h = {h} beyond table height {}", self.h_max);
        self.q[(n - 1) * (self.h_max + 1) + h]
    }

    pub fn p(&self, n: usize, h: usize) -> f64 {
        1.0 - self.q(n, h)
    }

    /// `P(H_n = h)`.
    pub fn pmf(&self, n: usize, h: usize) -> f64 {
        if h == 0 {
            self.q(n, 0)
        } else {
            self.q(n, h) - self.q(n, h - 1)
        }
    }

    pub fn row(&self, n: usize) -> Vec<f64> {
        (0..=self.h_max).map(|h| self.q(n, h)).collect()
    }

    /// `E[H_n] = Σ_{h ≥ 0} (1 - q_n(h))`, truncated at the table height.
    pub fn mean(&self, n: usize) -> f64 {
        (0..=self.h_max.min(n.saturating_sub(1))).map(|h| self.p(n, h)).sum()
    }

    /// Smallest `h` with `q_n(h) ≥ 1/2`.
    pub fn median(&self, n: usize) -> Option<usize> {
        (0..=self.h_max).find(|&h| self.q(n, h) >= 0.5)
    }

    /// `(n, h, q, p)` rows for CSV output.
    pub fn records(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (1..=self.n_max).flat_map(move |n| (0..=self.h_max).map(move |h| (n, h, self.q(n, h), self.p(n, h))))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "h", "q", "p"])?;
        for (n, h, q, p) in self.records() {
            out.write_record([n.to_string(), h.to_string(), format!("{q:.17e}"), format!("{p:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("theta must be a positive finite real, got {theta}")))
    }
}

fn check_budget(n_max: usize, h_max: usize, budget: HeightBudget) -> Result<()> {
    if n_max == 0 {
        return Err(domain("n_max must be at least 1"));
    }
    if n_max > budget.max_n {
        return Err(Error::Budget(format!("n_max = {n_max} exceeds the limit {}", budget.max_n)));
    }
    if h_max > budget.max_h {
        return Err(Error::Budget(format!("h_max = {h_max} exceeds the limit {}", budget.max_h)));
    }
    Ok(())
}

/// Next row `q_·(h)` from the previous row `q_·(h-1)`, for `n = 1..=N`.
fn next_row(prev: &[f64], theta: f64) -> Result<Vec<f64>> {
    let n_max = prev.len();
    let mut g = vec![0.0; n_max];
    for j in 1..n_max {
        g[j] = theta * prev[j - 1] / j as f64;
    }
    let e = series_exp(&Series::new(g)?)?;
    let mut row = Vec::with_capacity(n_max);
    // c = m!/θ^{(m)}
    let mut c = 1.0;
    for m in 0..n_max {
        if m > 0 {
            c *= m as f64 / (theta + (m - 1) as f64);
        }
        row.push((c * e.coeff(m)).clamp(0.0, 1.0));
    }
    Ok(row)
}

fn initial_row(n_max: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_max];
    row[0] = 1.0;
    row
}

fn assemble(theta: f64, rows: Vec<Vec<f64>>) -> HeightCdfTable {
    let n_max = rows[0].len();
    let h_max = rows.len() - 1;
    let mut q = vec![0.0; n_max * (h_max + 1)];
    for (h, row) in rows.iter().enumerate() {
        for (i, &x) in row.iter().enumerate() {
            q[i * (h_max + 1) + h] = x;
        }
    }
    HeightCdfTable { theta, n_max, h_max, q }
}

/// Exact height table in floating point with the default budget.
pub fn exact_height_cdf(n_max: usize, h_max: usize, theta: f64) -> Result<HeightCdfTable> {
    exact_height_cdf_budgeted(n_max, Some(h_max), theta, HeightBudget::default())
}

/// Exact height table whose height is the first `h` with
/// `1 - q_N(h) < 1e-12`.
pub fn exact_height_cdf_adaptive(n_max: usize, theta: f64) -> Result<HeightCdfTable> {
    exact_height_cdf_budgeted(n_max, None, theta, HeightBudget::default())
}

pub fn exact_height_cdf_budgeted(
    n_max: usize,
    h_max: Option<usize>,
    theta: f64,
    budget: HeightBudget,
) -> Result<HeightCdfTable> {
    check_theta(theta)?;
    check_budget(n_max, h_max.unwrap_or(0), budget)?;
    let mut rows = vec![initial_row(n_max)];
    loop {
        let h = rows.len() - 1;
        match h_max {
            Some(hm) if h >= hm => break,
            None if 1.0 - rows[h][n_max - 1] < ADAPTIVE_TAIL => break,
            None if h >= budget.max_h => {
                return Err(Error::Budget(format!(
                    "1 - q_N(h) still above {ADAPTIVE_TAIL} at h = {h}"
                )))
            }
            _ => {}
        }
        let next = next_row(&rows[h], theta)?;
        rows.push(next);
    }
    Ok(assemble(theta, rows))
}

/// The height table in exact rational arithmetic for `θ = num/den`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalHeightTable {
    pub n_max: usize,
    pub h_max: usize,
    /// `q[h][n - 1]`.
    pub q: Vec<Vec<BigRational>>,
}

impl RationalHeightTable {
    pub fn q(&self, n: usize, h: usize) -> &BigRational {
        &self.q[h][n - 1]
    }
}

pub fn exact_height_cdf_rational(
    n_max: usize,
    h_max: usize,
    theta_num: u64,
    theta_den: u64,
) -> Result<RationalHeightTable> {
    if theta_num == 0 || theta_den == 0 {
        return Err(domain("exact theta must be a positive rational num/den"));
    }
    if n_max == 0 || n_max > MAX_RATIONAL_N {
        return Err(Error::Budget(format!("rational tables are limited to n_max <= {MAX_RATIONAL_N}")));
    }
    let theta = BigRational::new(BigInt::from(theta_num), BigInt::from(theta_den));
    let mut row = vec![BigRational::zero(); n_max];
    row[0] = BigRational::one();
    let mut q = vec![row];
    for h in 1..=h_max {
        let prev = &q[h - 1];
        let mut g = vec![BigRational::zero(); n_max];
        for j in 1..n_max {
            g[j] = &theta * &prev[j - 1] / BigRational::from_integer(BigInt::from(j));
        }
        let e = series_exp_rational(&g)?;
        let mut next = Vec::with_capacity(n_max);
        let mut c = BigRational::one();
        for m in 0..n_max {
            if m > 0 {
                c = c * BigRational::from_integer(BigInt::from(m))
                    / (&theta + BigRational::from_integer(BigInt::from(m - 1)));
            }
            next.push(&c * &e[m]);
        }
        q.push(next);
    }
    Ok(RationalHeightTable { n_max, h_max, q })
}

/// Largest coefficient difference between `(1-z)^θ F_h(z)` and
/// `exp(-θ Φ_{h-1}(z))` up to `degree`, both built from `table`.
pub fn key_identity_residual_from(table: &HeightCdfTable, h: usize, degree: usize) -> Result<f64> {
    if h == 0 || h > table.h_max() {
        return Err(domain(format!("h must lie in 1..={}", table.h_max())));
    }
    if table.n_max() < degree + 1 {
        return Err(Error::Coverage(format!(
            "degree {degree} needs q_n for n <= {}, table has {}",
            degree + 1,
            table.n_max()
        )));
    }
    let theta = table.theta();
    let mut f = vec![0.0; degree + 1];
    let mut rising_over_fact = 1.0;
    for (m, fm) in f.iter_mut().enumerate() {
        if m > 0 {
            rising_over_fact *= (theta + (m - 1) as f64) / m as f64;
        }
        *fm = rising_over_fact * table.q(m + 1, h);
    }
    let lhs = Series::one_minus_z_pow(theta, degree).mul(&Series::new(f)?);
    let mut g = vec![0.0; degree + 1];
    for (j, gj) in g.iter_mut().enumerate().skip(1) {
        *gj = -theta * table.p(j, h - 1) / j as f64;
    }
    let rhs = series_exp(&Series::new(g)?)?;
    Ok(lhs.max_abs_diff(&rhs))
}

pub fn key_identity_residual(h: usize, theta: f64, degree: usize) -> Result<f64> {
    let table = exact_height_cdf(degree + 1, h, theta)?;
    key_identity_residual_from(&table, h, degree)
}

/// `r_n = (n - 1)/(n - 1 + θ)`, which centres `M_{r_n}` at `n - 1`.
pub fn r_n(n: u64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if n == 0 {
        return Err(domain("r_n needs n >= 1"));
    }
    Ok((n - 1) as f64 / ((n - 1) as f64 + theta))
}

fn check_r(r: f64) -> Result<()> {
    if (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(domain(format!("r must lie in [0, 1), got {r}")))
    }
}

/// `P(M_r = m) = (1-r)^θ θ^{(m)}/m! r^m`.
pub fn neg_binomial(m: u64, r: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    if r == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let ln = theta * (-r).ln_1p() + ln_rising(theta, m) - ln_factorial(m) + m as f64 * r.ln();
    Ok(ln.exp())
}

pub fn neg_binomial_mean(r: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok(theta * r / (1.0 - r))
}

pub fn neg_binomial_var(r: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_r(r)?;
    Ok(theta * r / ((1.0 - r) * (1.0 - r)))
}

/// Draws `M_r` as a Poisson variable with a Gamma(θ, r/(1-r)) mean.
pub fn sample_neg_binomial<R: Rng + ?Sized>(r: f64, theta: f64, rng: &mut R) -> Result<u64> {
    check_theta(theta)?;
    check_r(r)?;
    if r == 0.0 {
        return Ok(0);
    }
    let gamma = Gamma::new(theta, r / (1.0 - r)).map_err(|e| domain(e.to_string()))?;
    let lambda: f64 = gamma.sample(rng);
    if lambda <= 0.0 {
        return Ok(0);
    }
    let pois = Poisson::new(lambda).map_err(|e| domain(e.to_string()))?;
    Ok(pois.sample(rng) as u64)
}

/// Finite-`n` view of the threshold phenomenon for one `(n, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDiagnostic {
    pub n: usize,
    pub h: usize,
    pub r: f64,
    /// Number of terms `J` kept in `Φ_{h-1}(r)`.
    pub terms: usize,
    /// `Σ_{j ≤ J} p_j(h-1) r^j / j`.
    pub phi: f64,
    /// Bound on the omitted terms, `r^{J+1}/((J+1)(1-r))`.
    pub tail_bound: f64,
    /// `exp(-θ Φ_{h-1}(r))`.
    pub bridge: f64,
    /// `Σ_{m < J} P(M_r = m) q_{m+1}(h)`, the mixture computed directly.
    pub mixture: f64,
    /// `P(M_r ≥ J)`, the mass the direct mixture leaves out.
    pub mixture_tail: f64,
    pub q_n: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Minimum ratio `J / n` of table size to `n`.
pub const THRESHOLD_COVERAGE: usize = 20;

/// `Φ_{h-1}(r_n)` from `table`, the bridge value and the fixed-`n` bounds
/// `(E - P(M ≤ n-2))/P(M ≥ n-1) ≤ q_n(h) ≤ E/P(M ≤ n-1)`.
pub fn threshold_diagnostic(n: usize, h: usize, table: &HeightCdfTable, tail_tol: f64) -> Result<ThresholdDiagnostic> {
    let theta = table.theta();
    if n < 2 {
        return Err(domain("threshold diagnostic needs n >= 2"));
    }
    if h == 0 || h > table.h_max() {
        return Err(domain(format!("h must lie in 1..={}", table.h_max())));
    }
    let j_max = table.n_max();
    if j_max < THRESHOLD_COVERAGE * n {
        return Err(Error::Coverage(format!(
            "table covers j <= {j_max}, need at least {}",
            THRESHOLD_COVERAGE * n
        )));
    }
    let r = r_n(n as u64, theta)?;
    let tail_bound = r.powi(j_max as i32 + 1) / ((j_max + 1) as f64 * (1.0 - r));
    if tail_bound > tail_tol {
        return Err(Error::Coverage(format!("tail bound {tail_bound:e} exceeds tolerance {tail_tol:e}")));
    }
    let mut phi = 0.0;
    let mut rj = 1.0;
    for j in 1..=j_max {
        rj *= r;
        phi += table.p(j, h - 1) * rj / j as f64;
    }
    let bridge = (-theta * phi).exp();
    let mut mixture = 0.0;
    let mut mass = 0.0;
    let mut below_n1 = 0.0; // P(M ≤ n-1)
    let mut below_n2 = 0.0; // P(M ≤ n-2)
    for m in 0..j_max {
        let w = neg_binomial(m as u64, r, theta)?;
        mixture += w * table.q(m + 1, h);
        mass += w;
        if m + 1 <= n {
            below_n1 += w;
        }
        if m + 2 <= n {
            below_n2 += w;
        }
    }
    let mixture_tail = (1.0 - mass).max(0.0);
    let q_n = table.q(n, h);
    let upper = (bridge / below_n1).min(1.0);
    let lower = ((bridge - below_n2) / (1.0 - below_n2)).max(0.0);
    Ok(ThresholdDiagnostic {
        n,
        h,
        r,
        terms: j_max,
        phi,
        tail_bound,
        bridge,
        mixture,
        mixture_tail,
        q_n,
        lower,
        upper,
    })
}

/// `H_n`, the largest depth.
pub fn height(t: &MassTree) -> u32 {
    t.height()
}

/// Level `s`-masses `V_ℓ^{(s)} = Σ_{|u|=ℓ} (K(u) - 1)_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SMassProfile {
    pub s: u32,
    /// One value per level `0..=height`.
    pub values: Vec<f64>,
    /// Exact integer values when every mass is at most 10^6 and `s ≤ 8`.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_big")]
    pub exact: Option<Vec<BigUint>>,
}

fn ser_big<S: serde::Serializer>(v: &Option<Vec<BigUint>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let strings: Option<Vec<String>> = v.as_ref().map(|xs| xs.iter().map(|x| x.to_string()).collect());
    serde::Serialize::serialize(&strings, s)
}

pub const EXACT_FALLING_MAX_K: u64 = 1_000_000;
pub const EXACT_FALLING_MAX_S: u32 = 8;

/// `(k)_s = k (k-1) … (k-s+1)` as a float.
pub fn falling_factorial(k: u64, s: u32) -> f64 {
    if (s as u64) > k {
        return 0.0;
    }
    if s <= 20 {
        return (0..s as u64).map(|i| (k - i) as f64).product();
    }
    (ln_factorial(k) - ln_factorial(k - s as u64)).exp()
}

fn falling_factorial_exact(k: u64, s: u32) -> BigUint {
    if (s as u64) > k {
        return BigUint::zero();
    }
    (0..s as u64).fold(BigUint::one(), |acc, i| acc * (k - i))
}

/// `V_ℓ^{(s)}` for every level of `t`.
pub fn s_mass_profile(t: &MassTree, s: u32) -> Result<SMassProfile> {
    if s < 1 {
        return Err(domain("s must be at least 1"));
    }
    let levels = t.height() as usize + 1;
    let mut values = vec![0.0; levels];
    let exact_ok = s <= EXACT_FALLING_MAX_S && t.root_mass() <= EXACT_FALLING_MAX_K;
    let mut exact = exact_ok.then(|| vec![BigUint::zero(); levels]);
    for (_, k, d) in t.iter() {
        values[d as usize] += falling_factorial(k - 1, s);
        if let Some(ex) = exact.as_mut() {
            ex[d as usize] += falling_factorial_exact(k - 1, s);
        }
    }
    if let Some(ex) = &exact {
        for (v, e) in values.iter_mut().zip(ex) {
            *v = e.to_f64().unwrap_or(f64::INFINITY);
        }
    }
    Ok(SMassProfile { s, values, exact })
}

/// `V_ℓ^{(s)}` from per-level mass lists as produced by the streaming
/// sampler.
pub fn s_mass_from_levels(levels: &[Vec<u64>], s: u32) -> Vec<f64> {
    levels
        .iter()
        .map(|ks| ks.iter().map(|&k| falling_factorial(k - 1, s)).sum())
        .collect()
}

/// `⌈(n-1)^{1-δ}⌉`, the macroscopic mass threshold.
pub fn macroscopic_threshold(n: u64, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if n <= 1 {
        return Ok(1);
    }
    Ok(((n - 1) as f64).powf(1.0 - delta).ceil() as u64)
}

/// `N_0`: root children of mass at least `⌈(n-1)^{1-δ}⌉`.
pub fn macroscopic_count(t: &MassTree, delta: f64) -> Result<u64> {
    let thr = macroscopic_threshold(t.root_mass(), delta)?;
    Ok(t.children(t.root()).filter(|&c| t.mass(c) >= thr).count() as u64)
}

/// Machine-readable summary of one tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeStats {
    pub n: u64,
    pub height: u32,
    pub height_over_log_n: Option<f64>,
    pub delta: f64,
    pub n0: u64,
    pub s_mass: Vec<SMassProfile>,
}

pub fn tree_stats(t: &MassTree, s_values: &[u32], delta: f64) -> Result<TreeStats> {
    let n = t.root_mass();
    let h = t.height();
    Ok(TreeStats {
        n,
        height: h,
        height_over_log_n: (n > 1).then(|| h as f64 / (n as f64).ln()),
        delta,
        n0: macroscopic_count(t, delta)?,
        s_mass: s_values.iter().map(|&s| s_mass_profile(t, s)).collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragmentation::{sample_fragmentation, sample_height};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_rows() {
        let t = exact_height_cdf(10, 8, 2.0).unwrap();
        assert_eq!(t.q(1, 0), 1.0);
        assert_eq!(t.q(2, 0), 0.0);
        assert_eq!(t.q(2, 1), 1.0);
        assert!((t.q(3, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.q(3, 2), 1.0);
    }

    #[test]
    fn rational_table() {
        let t = exact_height_cdf_rational(12, 11, 2, 1).unwrap();
        assert_eq!(t.q(3, 1), &BigRational::new(2.into(), 3.into()));
        for h in 0..=11 {
            for n in 1..=12 {
                if h + 1 >= n {
                    assert!(t.q(n, h).is_one(), "n={n} h={h}");
                }
                if n > 1 {
                    assert!(t.q(n, h) <= t.q(n - 1, h));
                }
                if h > 0 {
                    assert!(t.q(n, h) >= t.q(n, h - 1));
                }
            }
        }
        assert!(exact_height_cdf_rational(65, 3, 1, 1).is_err());
    }

    #[test]
    fn float_matches_rational() {
        for (num, den) in [(1u64, 2u64), (1, 1), (2, 1), (7, 3)] {
            let theta = num as f64 / den as f64;
            let f = exact_height_cdf(30, 12, theta).unwrap();
            let e = exact_height_cdf_rational(30, 12, num, den).unwrap();
            for n in 1..=30 {
                for h in 0..=12 {
                    let x = e.q(n, h).to_f64().unwrap();
                    assert!((f.q(n, h) - x).abs() < 1e-13, "theta={theta} n={n} h={h}");
                }
            }
        }
    }

    #[test]
    fn table_monotone() {
        let t = exact_height_cdf(500, 30, 2.0).unwrap();
        for n in 1..=500 {
            for h in 0..=30 {
                let q = t.q(n, h);
                assert!((0.0..=1.0).contains(&q));
                if h > 0 {
                    assert!(q >= t.q(n, h - 1) - 1e-14);
                }
                if n > 1 {
                    assert!(q <= t.q(n - 1, h) + 1e-14);
                }
            }
        }
    }

    #[test]
    fn adaptive_height_and_budget() {
        let t = exact_height_cdf_adaptive(300, 2.0).unwrap();
        assert!(1.0 - t.q(300, t.h_max()) < ADAPTIVE_TAIL);
        assert!(1.0 - t.q(300, t.h_max() - 1) >= ADAPTIVE_TAIL);
        assert!(matches!(exact_height_cdf(4001, 5, 2.0), Err(Error::Budget(_))));
        assert!(matches!(exact_height_cdf(10, 65, 2.0), Err(Error::Budget(_))));
    }

    #[test]
    fn key_identity() {
        assert!(key_identity_residual(1, 2.0, 100).unwrap() < 1e-10);
        assert!(key_identity_residual(10, 2.0, 200).unwrap() < 1e-9);
        assert!(key_identity_residual(1, 1.0, 50).unwrap() < 1e-10);
        assert!(key_identity_residual(4, 0.5, 150).unwrap() < 1e-9);
    }

    #[test]
    fn neg_binomial_basics() {
        let theta = 2.0;
        assert!((neg_binomial(0, 0.3, theta).unwrap() - 0.7_f64.powf(theta)).abs() < 1e-15);
        assert_eq!(neg_binomial(0, 0.0, theta).unwrap(), 1.0);
        assert!(neg_binomial(0, 1e-9, theta).unwrap() > 1.0 - 1e-8);
        for n in [2u64, 10, 1_000] {
            let r = r_n(n, theta).unwrap();
            assert!((neg_binomial_mean(r, theta).unwrap() - (n - 1) as f64).abs() < 1e-9 * n as f64);
        }
        let r = 0.6;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for m in 0..2_000u64 {
            let p = neg_binomial(m, r, 1.7).unwrap();
            s0 += p;
            s1 += p * m as f64;
            s2 += p * (m * m) as f64;
        }
        assert!((s0 - 1.0).abs() < 1e-12);
        assert!((s1 - neg_binomial_mean(r, 1.7).unwrap()).abs() < 1e-10);
        assert!((s2 - s1 * s1 - neg_binomial_var(r, 1.7).unwrap()).abs() < 1e-9);
        assert!(neg_binomial(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn neg_binomial_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (r, theta) = (0.8, 1.5);
        let reps = 200_000;
        let xs: Vec<f64> = (0..reps).map(|_| sample_neg_binomial(r, theta, &mut rng).unwrap() as f64).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = neg_binomial_var(r, theta).unwrap();
        assert!((mean - neg_binomial_mean(r, theta).unwrap()).abs() < 4.0 * (var / reps as f64).sqrt());
    }

    #[test]
    fn mixture_identity_at_half() {
        let t = exact_height_cdf(200, 6, 2.0).unwrap();
        let r: f64 = 0.5;
        for h in 1..=5 {
            let direct: f64 = (0..199).map(|m| neg_binomial(m, r, 2.0).unwrap() * t.q(m as usize + 1, h)).sum();
            let mut phi = 0.0;
            for j in 1..=200 {
                phi += t.p(j, h - 1) * r.powi(j as i32) / j as f64;
            }
            assert!((direct - (-2.0 * phi).exp()).abs() < 1e-10, "h={h}");
        }
    }

    #[test]
    fn threshold_bounds_bracket_q() {
        let t = exact_height_cdf(1_000, 12, 2.0).unwrap();
        let d = threshold_diagnostic(50, 3, &t, 1e-12).unwrap();
        assert!((d.bridge - d.mixture).abs() < 1e-6 + d.mixture_tail);
        assert!(d.lower <= d.q_n + 1e-12 && d.q_n <= d.upper + 1e-12, "{d:?}");
        let mut prev = f64::INFINITY;
        for h in 1..=12 {
            let d = threshold_diagnostic(50, h, &t, 1e-12).unwrap();
            assert!(d.phi <= prev + 1e-15);
            prev = d.phi;
        }
        assert!(prev < 1e-6);
        assert!(matches!(threshold_diagnostic(60, 3, &t, 1e-12), Err(Error::Coverage(_))));
    }

    #[test]
    fn tree_statistics() {
        let one = MassTree::from_parts(&[None], &[1]).unwrap();
        assert_eq!(height(&one), 0);
        assert_eq!(s_mass_profile(&one, 2).unwrap().values, vec![0.0]);
        assert_eq!(macroscopic_count(&one, 0.3).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [5u64, 80, 3_000] {
            let t = sample_fragmentation(n, 2.0, &mut rng).unwrap();
            for s in [2, 3, 5] {
                let prof = s_mass_profile(&t, s).unwrap();
                assert_eq!(prof.values[0], falling_factorial(n - 1, s));
                assert_eq!(prof.exact.as_ref().unwrap()[0], falling_factorial_exact(n - 1, s));
                assert_eq!(prof.values.len(), t.height() as usize + 1);
            }
        }
        assert_eq!(macroscopic_threshold(1_001, 0.3).unwrap(), 126);
        let star = MassTree::from_parts(&[None, Some(0), Some(0), Some(0)], &[4, 1, 1, 1]).unwrap();
        assert_eq!(macroscopic_count(&star, 0.5).unwrap(), 0);
        assert_eq!(macroscopic_count(&star, 0.99).unwrap(), 0);
        let path = MassTree::from_parts(&[None, Some(0), Some(1)], &[3, 2, 1]).unwrap();
        assert_eq!(macroscopic_count(&path, 0.99).unwrap(), 1);
    }

    #[test]
    fn exact_table_against_simulation() {
        let t = exact_height_cdf(120, 20, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 50_000;
        let mut counts = vec![0u64; 121];
        for _ in 0..reps {
            counts[sample_height(120, 2.0, &mut rng).unwrap() as usize] += 1;
        }
        let mut cum = 0;
        for h in 0..=20 {
            cum += counts[h];
            let qhat = cum as f64 / reps as f64;
            let q = t.q(120, h);
            assert!((qhat - q).abs() <= 4.0 * (q * (1.0 - q) / reps as f64).sqrt() + 1e-3, "h={h}");
        }
    }
}
