//! The Ewens(m, θ) distribution on integer partitions: exact pmf, the
//! Chinese restaurant sampler, mixed factorial moments, and GEM(θ)
//! stick-breaking weights for the Poisson–Dirichlet limit.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{ln_factorial, ln_rising};

/// Count-vector form `(c_1, …, c_m)` of a partition of `m`, stored sparsely as
/// `(j, c_j)` pairs with `c_j > 0`, sorted by `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountVector {
    m: u64,
    counts: Vec<(u64, u64)>,
}

impl CountVector {
    /// The empty partition of 0.
    pub fn empty() -> Self {
        CountVector { m: 0, counts: Vec::new() }
    }

    /// Builds from a dense slice where `dense[j - 1] = c_j`.
    pub fn from_dense(m: u64, dense: &[u64]) -> Result<Self> {
        let pairs = dense
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u64 + 1, c));
        Self::from_pairs(m, pairs)
    }

    /// Builds from `(j, c_j)` pairs in any order; zero counts are dropped and
    /// repeated `j` are summed.
    pub fn from_pairs(m: u64, pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut counts: Vec<(u64, u64)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        counts.sort_unstable();
        counts.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        if counts.iter().any(|&(j, _)| j == 0) {
            return Err(domain("block size 0 in count vector"));
        }
        let sum: u64 = counts.iter().map(|&(j, c)| j * c).sum();
        if sum != m {
            return Err(Error::Infeasible { sum, m });
        }
        Ok(CountVector { m, counts })
    }

    pub fn from_block_sizes(sizes: &[u64]) -> Result<Self> {
        let m = sizes.iter().sum();
        Self::from_pairs(m, sizes.iter().map(|&a| (a, 1)))
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `c_j`, zero when no block has size `j`.
    pub fn count(&self, j: u64) -> u64 {
        self.counts
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    /// Nonzero `(j, c_j)` pairs in increasing `j`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().copied()
    }

    pub fn num_blocks(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    /// Dense `(c_1, …, c_m)`.
    pub fn to_dense(&self) -> Vec<u64> {
        let mut out = vec![0; self.m as usize];
        for &(j, c) in &self.counts {
            out[j as usize - 1] = c;
        }
        out
    }

    pub fn block_sizes(&self) -> BlockSizes {
        let mut sizes = Vec::with_capacity(self.num_blocks() as usize);
        for &(j, c) in self.counts.iter().rev() {
            sizes.extend(std::iter::repeat(j).take(c as usize));
        }
        BlockSizes(sizes)
    }
}

/// Nonincreasing block sizes `A_1 ≥ A_2 ≥ …`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSizes(Vec<u64>);

impl BlockSizes {
    /// Sorts into nonincreasing order; equal sizes keep their input order.
    pub fn new(mut sizes: Vec<u64>) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(domain("block sizes must be positive"));
        }
        sizes.sort_by(|a, b| b.cmp(a));
        Ok(BlockSizes(sizes))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_vector(&self) -> CountVector {
        CountVector::from_block_sizes(&self.0).expect("block sizes always form a feasible count vector")
    }
}

/// Truncated GEM(θ) stick-breaking weights, in draw order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickWeights {
    pub weights: Vec<f64>,
    /// Log of the unbroken remainder `Π (1 - V_k)`; always finite.
    pub ln_residual: f64,
}

impl StickWeights {
    pub fn residual(&self) -> f64 {
        self.ln_residual.exp()
    }

    pub fn power_sum(&self, t: f64) -> f64 {
        self.weights.iter().map(|p| p.powf(t)).sum()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("theta must be a positive finite real, got {theta}")))
    }
}

/// `ln P(C = cv)` under Ewens(m, θ).
pub fn ewens_ln_pmf(cv: &CountVector, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let ln_theta = theta.ln();
    let mut acc = ln_factorial(cv.m) - ln_rising(theta, cv.m);
    for (j, c) in cv.iter() {
        acc += c as f64 * (ln_theta - (j as f64).ln()) - ln_factorial(c);
    }
    Ok(acc)
}

/// `P(C = cv) = m!/θ^{(m)} Π_j θ^{c_j} / (j^{c_j} c_j!)`.
pub fn ewens_pmf(cv: &CountVector, theta: f64) -> Result<f64> {
    ewens_ln_pmf(cv, theta).map(f64::exp)
}

/// Exact Ewens probability for rational `θ = num/den`.
pub fn ewens_pmf_exact(cv: &CountVector, theta_num: u64, theta_den: u64) -> Result<BigRational> {
    if theta_num == 0 || theta_den == 0 {
        return Err(domain("exact theta must be a positive rational num/den"));
    }
    let theta = BigRational::new(BigInt::from(theta_num), BigInt::from(theta_den));
    let mut num = BigRational::one();
    // m! / θ^{(m)}
    let mut rising = BigRational::one();
    for i in 0..cv.m {
        num *= BigRational::from_integer(BigInt::from(i + 1));
        rising *= &theta + BigRational::from_integer(BigInt::from(i));
    }
    let mut acc = num / rising;
    for (j, c) in cv.iter() {
        let mut fact = BigInt::one();
        for k in 2..=c {
            fact *= k;
        }
        let term_num = num_traits::pow(theta.clone(), c as usize);
        let term_den = BigRational::from_integer(num_traits::pow(BigInt::from(j), c as usize) * fact);
        acc = acc * term_num / term_den;
    }
    Ok(acc)
}

const LINEAR_SCAN_TABLES: usize = 64;

/// Table sizes of a running Chinese restaurant.
///
/// Existing tables are picked by a linear scan over the sizes while there are
/// at most 64 tables, and by a binary-indexed tree beyond that.
#[derive(Debug, Clone)]
pub(crate) struct Restaurant {
    sizes: Vec<u64>,
    customers: u64,
    fenwick: Option<Fenwick>,
}

impl Restaurant {
    pub(crate) fn new() -> Self {
        Restaurant { sizes: Vec::new(), customers: 0, fenwick: None }
    }

    pub(crate) fn into_sizes(self) -> Vec<u64> {
        self.sizes
    }

    /// Seats the next customer; returns the index of the chosen table.
    pub(crate) fn seat<R: Rng + ?Sized>(&mut self, theta: f64, rng: &mut R) -> usize {
        let n = self.customers;
        self.customers += 1;
        let new_table = n == 0 || rng.random::<f64>() * (theta + n as f64) < theta;
        if new_table {
            self.sizes.push(1);
            let idx = self.sizes.len() - 1;
            match &mut self.fenwick {
                Some(f) => f.push(1),
                None if self.sizes.len() > LINEAR_SCAN_TABLES => {
                    self.fenwick = Some(Fenwick::from_weights(&self.sizes));
                }
                None => {}
            }
            return idx;
        }
        // Join the table of a uniformly chosen earlier customer.
        let r = rng.random_range(0..n);
        let idx = match &self.fenwick {
            Some(f) => f.find(r),
            None => {
                let mut acc = 0;
                let mut found = self.sizes.len() - 1;
                for (i, &s) in self.sizes.iter().enumerate() {
                    acc += s;
                    if r < acc {
                        found = i;
                        break;
                    }
                }
                found
            }
        };
        self.sizes[idx] += 1;
        if let Some(f) = &mut self.fenwick {
            f.add(idx, 1);
        }
        idx
    }
}

/// Binary-indexed tree over table sizes with amortised growth.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
    len: usize,
}

impl Fenwick {
    fn from_weights(w: &[u64]) -> Self {
        let cap = (w.len() * 2).next_power_of_two();
        let mut tree = vec![0; cap + 1];
        for i in 1..=cap {
            tree[i] += w.get(i - 1).copied().unwrap_or(0);
            let parent = i + (i & i.wrapping_neg());
            if parent <= cap {
                tree[parent] += tree[i];
            }
        }
        Fenwick { tree, len: w.len() }
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, idx: usize, delta: u64) {
        let mut i = idx + 1;
        while i <= self.capacity() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn push(&mut self, w: u64) {
        if self.len == self.capacity() {
            let weights: Vec<u64> = (0..self.len).map(|i| self.point(i)).collect();
            *self = Fenwick::from_weights(&weights);
        }
        self.len += 1;
        self.add(self.len - 1, w);
    }

    fn prefix(&self, count: usize) -> u64 {
        let mut i = count;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    fn point(&self, idx: usize) -> u64 {
        self.prefix(idx + 1) - self.prefix(idx)
    }

    /// Smallest index whose inclusive prefix sum exceeds `r`.
    fn find(&self, mut r: u64) -> usize {
        let mut pos = 0;
        let mut step = self.capacity();
        while step > 0 {
            let next = pos + step;
            if next <= self.capacity() && self.tree[next] <= r {
                pos = next;
                r -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Block sizes of a CRP(θ) run with `m` customers, in table-creation order.
pub fn crp_block_sizes<R: Rng + ?Sized>(m: u64, theta: f64, rng: &mut R) -> Vec<u64> {
    let mut rest = Restaurant::new();
    for _ in 0..m {
        rest.seat(theta, rng);
    }
    rest.into_sizes()
}

/// Block sizes of an Ewens(m, θ) partition in order of least element,
/// drawn one block at a time: with `r` elements left, the block of the
/// smallest one has size `1 + Binomial(r - 1, V)`, `V ~ Beta(1, θ)`, and the
/// rest is Ewens(r - size, θ). Same law as [`crp_block_sizes`] in
/// `O(#blocks)` time.
pub fn sequential_block_sizes<R: Rng + ?Sized>(m: u64, theta: f64, rng: &mut R) -> Vec<u64> {
    let mut sizes = Vec::new();
    let mut r = m;
    while r > 0 {
        let a = if r == 1 {
            1
        } else {
            let u: f64 = rng.sample(Open01);
            // 1 - U^{1/θ}
            let v = -(u.ln() / theta).exp_m1();
            1 + Binomial::new(r - 1, v.clamp(0.0, 1.0)).expect("probability in [0,1]").sample(rng)
        };
        sizes.push(a);
        r -= a;
    }
    sizes
}

/// Draws an Ewens(m, θ) partition by seating `m` customers in a Chinese
/// restaurant: customer `k` opens a table with probability `θ/(θ+k-1)`,
/// otherwise joins a table with probability proportional to its size.
pub fn sample_ewens_crp<R: Rng + ?Sized>(m: u64, theta: f64, rng: &mut R) -> Result<CountVector> {
    check_theta(theta)?;
    let sizes = crp_block_sizes(m, theta, rng);
    CountVector::from_block_sizes(&sizes)
}

/// `E[Π_ℓ (C_{j_ℓ})_{a_ℓ}]` under Ewens(m, θ) for distinct `j_ℓ`, zero when
/// `Σ a_ℓ j_ℓ > m`.
pub fn mixed_factorial_moment(m: u64, theta: f64, spec: &[(u64, u64)]) -> Result<f64> {
    check_theta(theta)?;
    let mut seen: Vec<u64> = spec.iter().map(|&(j, _)| j).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(domain("mixed factorial moment requires distinct block sizes"));
    }
    if seen.first() == Some(&0) {
        return Err(domain("block size 0 in moment specification"));
    }
    let mut load: u64 = 0;
    let mut ln_acc = 0.0;
    for &(j, a) in spec {
        load = match j.checked_mul(a).and_then(|x| x.checked_add(load)) {
            Some(l) => l,
            None => return Ok(0.0),
        };
        ln_acc += a as f64 * (theta / j as f64).ln();
    }
    if load > m {
        return Ok(0.0);
    }
    ln_acc += ln_factorial(m) - ln_factorial(m - load) + ln_rising(theta, m - load) - ln_rising(theta, m);
    Ok(ln_acc.exp())
}

/// Truncated GEM(θ) weights `P_k = V_k Π_{i<k} (1 - V_i)` with
/// `V_k ~ Beta(1, θ)` drawn as `1 - U^{1/θ}`.
pub fn sample_gem<R: Rng + ?Sized>(theta: f64, trunc: usize, rng: &mut R) -> Result<StickWeights> {
    check_theta(theta)?;
    if trunc == 0 {
        return Err(domain("GEM truncation must be at least 1"));
    }
    let mut weights = Vec::with_capacity(trunc);
    let mut ln_residual = 0.0_f64;
    for _ in 0..trunc {
        let u: f64 = rng.sample(Open01);
        // ln(1 - V) = ln(U) / θ
        let ln_keep = u.ln() / theta;
        let v = -ln_keep.exp_m1();
        weights.push(ln_residual.exp() * v);
        ln_residual += ln_keep;
    }
    Ok(StickWeights { weights, ln_residual })
}

/// All partitions of `m` as count vectors, in reverse-lexicographic order of
/// their block sizes.
pub fn partitions(m: u64) -> Vec<CountVector> {
    fn rec(rem: u64, max: u64, cur: &mut Vec<u64>, out: &mut Vec<CountVector>) {
        if rem == 0 {
            out.push(CountVector::from_block_sizes(cur).expect("feasible by construction"));
            return;
        }
        for part in (1..=rem.min(max)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, &mut Vec::new(), &mut out);
    out
}

/// Total-variation distance between an empirical histogram and a pmf over
/// the same finite support.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let total = total.max(1) as f64;
    0.5 * counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / total - p).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn sequential_blocks_match_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let parts = partitions(7);
        for theta in [0.3, 1.0, 3.0] {
            let mut counts = vec![0u64; parts.len()];
            for _ in 0..200_000 {
                let cv = CountVector::from_block_sizes(&sequential_block_sizes(7, theta, &mut rng)).unwrap();
                counts[parts.iter().position(|p| *p == cv).unwrap()] += 1;
            }
            let probs: Vec<f64> = parts.iter().map(|p| ewens_pmf(p, theta).unwrap()).collect();
            assert!(total_variation(&counts, &probs) < 0.006, "theta={theta}");
        }
    }

    #[test]
    fn sequential_first_block_law() {
        // P(A_1 = j) = θ (m-1)!/(m-j)! Γ(m-j+θ)/Γ(m+θ)
        let (m, theta) = (12u64, 1.7_f64);
        let exact: Vec<f64> = (1..=m)
            .map(|j| {
                (theta.ln() + ln_factorial(m - 1) - ln_factorial(m - j) + ln_rising(theta, m - j)
                    - ln_rising(theta, m))
                .exp()
            })
            .collect();
        assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let reps = 200_000;
        let mut seq = vec![0u64; m as usize];
        let mut crp = vec![0u64; m as usize];
        for _ in 0..reps {
            seq[sequential_block_sizes(m, theta, &mut rng)[0] as usize - 1] += 1;
            crp[crp_block_sizes(m, theta, &mut rng)[0] as usize - 1] += 1;
        }
        for j in 0..m as usize {
            let se = (exact[j] * (1.0 - exact[j]) / reps as f64).sqrt();
            assert!((seq[j] as f64 / reps as f64 - exact[j]).abs() < 4.0 * se + 1e-4);
            assert!((crp[j] as f64 / reps as f64 - exact[j]).abs() < 4.0 * se + 1e-4);
        }
        assert_eq!(sequential_block_sizes(1_000_000_000, 2.0, &mut rng).iter().sum::<u64>(), 1_000_000_000);
        assert!(sequential_block_sizes(0, 2.0, &mut rng).is_empty());
    }
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cv(m: u64, dense: &[u64]) -> CountVector {
        CountVector::from_dense(m, dense).unwrap()
    }

    #[test]
    fn feasibility() {
        assert!(CountVector::from_dense(3, &[1, 1, 0]).is_ok());
        assert!(matches!(
            CountVector::from_dense(3, &[1, 0, 1]),
            Err(Error::Infeasible { sum: 4, m: 3 })
        ));
        let e = CountVector::empty();
        assert_eq!(e.m(), 0);
        assert_eq!(e.num_blocks(), 0);
    }

    #[test]
    fn pmf_small_cases() {
        assert!((ewens_pmf(&cv(2, &[0, 1]), 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((ewens_pmf(&cv(2, &[2, 0]), 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!((ewens_pmf(&cv(3, &[3, 0, 0]), 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-14);
        let exact = ewens_pmf_exact(&cv(2, &[0, 1]), 2, 1).unwrap();
        assert_eq!(exact, BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn exact_pmf_sums_to_one() {
        for (num, den) in [(1, 2), (1, 1), (2, 1)] {
            for m in 0..=12 {
                let total: BigRational = partitions(m)
                    .iter()
                    .map(|c| ewens_pmf_exact(c, num, den).unwrap())
                    .fold(BigRational::zero(), |a, b| a + b);
                assert!(total.is_one(), "m={m} theta={num}/{den}");
            }
        }
    }

    #[test]
    fn float_pmf_agrees_with_exact() {
        for c in partitions(9) {
            let f = ewens_pmf(&c, 0.5).unwrap();
            let e = ewens_pmf_exact(&c, 1, 2).unwrap();
            let e = num_traits::ToPrimitive::to_f64(&e).unwrap();
            assert!((f - e).abs() < 1e-13 * e.max(1e-300).max(1.0));
        }
    }

    #[test]
    fn partition_counts() {
        let p: Vec<usize> = (0..=10).map(|m| partitions(m).len()).collect();
        assert_eq!(p, vec![1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
    }

    #[test]
    fn crp_trivial_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_ewens_crp(0, 2.0, &mut rng).unwrap(), CountVector::empty());
        for _ in 0..100 {
            let c = sample_ewens_crp(1, 0.3, &mut rng).unwrap();
            assert_eq!(c.to_dense(), vec![1]);
        }
    }

    #[test]
    fn crp_many_tables_use_fenwick_consistently() {
        // Large θ forces hundreds of tables and exercises the tree path.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let sizes = crp_block_sizes(5_000, 200.0, &mut rng);
            assert!(sizes.len() > LINEAR_SCAN_TABLES);
            assert_eq!(sizes.iter().sum::<u64>(), 5_000);
        }
    }

    #[test]
    fn fenwick_find_and_growth() {
        let mut f = Fenwick::from_weights(&[3, 1, 4]);
        f.push(1);
        f.push(5);
        f.push(9);
        let w = [3u64, 1, 4, 1, 5, 9];
        let mut r = 0;
        for (i, &x) in w.iter().enumerate() {
            for _ in 0..x {
                assert_eq!(f.find(r), i);
                r += 1;
            }
        }
        f.add(1, 2);
        assert_eq!(f.point(1), 3);
    }

    #[test]
    fn crp_same_block_probability() {
        // P(all 3 customers at one table) = 2!/((θ+1)(θ+2)) = 1/6 at θ=2.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 200_000;
        let hits = (0..reps)
            .filter(|_| crp_block_sizes(3, 2.0, &mut rng).len() == 1)
            .count();
        let p = hits as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((p - 1.0 / 6.0).abs() < 4.0 * se);
    }

    #[test]
    fn mixed_moments() {
        let e = mixed_factorial_moment(5, 2.0, &[(2, 1)]).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-12);
        let e = mixed_factorial_moment(2, 2.0, &[(1, 2)]).unwrap();
        assert!((e - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(mixed_factorial_moment(5, 2.0, &[(3, 2)]).unwrap(), 0.0);
        assert!(mixed_factorial_moment(5, 2.0, &[(1, 1), (1, 2)]).is_err());
    }

    #[test]
    fn mixed_moments_match_enumeration() {
        let theta = 0.8;
        let m = 9;
        let parts = partitions(m);
        for spec in [vec![(1u64, 1u64)], vec![(2, 2)], vec![(1, 1), (3, 1)], vec![(1, 2), (2, 1)]] {
            let brute: f64 = parts
                .iter()
                .map(|c| {
                    let p = ewens_pmf(c, theta).unwrap();
                    let prod: f64 = spec
                        .iter()
                        .map(|&(j, a)| {
                            let cj = c.count(j);
                            (0..a).map(|i| cj.saturating_sub(i) as f64).product::<f64>()
                        })
                        .product();
                    p * prod
                })
                .sum();
            let formula = mixed_factorial_moment(m, theta, &spec).unwrap();
            assert!((brute - formula).abs() < 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn mass_identity() {
        for theta in [0.5, 2.0] {
            for m in 1..=50 {
                let total: f64 = (1..=m)
                    .map(|j| j as f64 * mixed_factorial_moment(m, theta, &[(j, 1)]).unwrap())
                    .sum();
                assert!((total - m as f64).abs() < 1e-10, "m={m}");
            }
        }
    }

    #[test]
    fn gem_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 100_000;
        let mut first = 0.0;
        for _ in 0..reps {
            let w = sample_gem(2.0, 5, &mut rng).unwrap();
            let s: f64 = w.weights.iter().sum();
            assert!(s < 1.0);
            assert!(w.residual() > 0.0);
            assert!((s + w.residual() - 1.0).abs() < 1e-12);
            first += w.weights[0];
        }
        let mean = first / reps as f64;
        // Beta(1,2): mean 1/3, variance 1/18
        let se = (1.0 / 18.0 / reps as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn gem_power_sum_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reps = 100_000;
        let mean: f64 = (0..reps)
            .map(|_| sample_gem(2.0, 200, &mut rng).unwrap().power_sum(2.0))
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 1.0 / 3.0).abs() < 1e-2);
    }
}
