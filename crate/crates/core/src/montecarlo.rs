//! Reproducible Monte Carlo experiments.
//!
//! Every replica owns a ChaCha8 stream selected by `(n index, replica)`
//! under the master seed, so results do not depend on thread count or
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::brw_exponents;
use crate::error::{Error, Result};
use crate::fragmentation::{
    additive_martingale, kappa_table, mean_se, sample_fragmentation, sample_height, sample_level_masses,
    sample_root_split, sample_spine_masses, spine_step_pmf, SpineStep,
};
use crate::heights::{macroscopic_threshold, r_n, s_mass_from_levels, sample_neg_binomial};

/// Default cap on the estimated number of tree nodes an experiment visits.
pub const DEFAULT_NODE_CAP: f64 = 2e11;
/// Barrier slack: root masses are chosen so that `a h ≤ 0.7 ln n`.
pub const BARRIER_SLACK: f64 = 0.7;
/// Configurations with `a h > 0.9 ln n` are rejected.
pub const BARRIER_SLACK_LIMIT: f64 = 0.9;
/// Smallest root mass used by the barrier diagnostic.
pub const BARRIER_MIN_N: u64 = 1_000;
const BARRIER_MAX_N: u64 = 1 << 62;
const EXACT_WINDOW_MAX_N: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HeightRatio,
    Smass,
    Macroscopic,
    ManyToOne,
    SpineBetaLimit,
    Barrier,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::HeightRatio => "height_ratio",
            ExperimentKind::Smass => "smass",
            ExperimentKind::Macroscopic => "macroscopic",
            ExperimentKind::ManyToOne => "many_to_one",
            ExperimentKind::SpineBetaLimit => "spine_beta_limit",
            ExperimentKind::Barrier => "barrier",
        }
    }
}

/// Kind-specific settings. Missing values fall back to the defaults noted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// s-mass order (smass; default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
    /// Deepest level recorded (smass; default 6).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Macroscopic exponent (macroscopic; default 0.3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Tilt (many_to_one, spine_beta_limit, barrier).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Generation (many_to_one, barrier).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    /// Terminal window offset (barrier; default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub theta: f64,
    pub ns: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return cfg(format!("theta must be positive, got {}", self.theta));
        }
        if self.ns.is_empty() {
            return cfg("ns must be nonempty".into());
        }
        if self.ns.contains(&0) {
            return cfg("every n must be at least 1".into());
        }
        if self.reps == 0 {
            return cfg("reps must be at least 1".into());
        }
        let p = &self.params;
        match self.kind {
            ExperimentKind::Smass => {
                if p.s.unwrap_or(2) < 2 {
                    return cfg("s must be at least 2".into());
                }
            }
            ExperimentKind::Macroscopic => {
                let d = p.delta.unwrap_or(0.3);
                if !(d > 0.0 && d < 1.0) {
                    return cfg(format!("delta must lie in (0,1), got {d}"));
                }
            }
            ExperimentKind::ManyToOne | ExperimentKind::SpineBetaLimit | ExperimentKind::Barrier => {
                let Some(t) = p.t else {
                    return cfg(format!("{} needs params.t", self.kind.name()));
                };
                if !(t >= 1.0 && t.is_finite()) {
                    return cfg(format!("t must be >= 1, got {t}"));
                }
                if self.kind != ExperimentKind::SpineBetaLimit && p.h.is_none() {
                    return cfg(format!("{} needs params.h", self.kind.name()));
                }
                if self.kind == ExperimentKind::SpineBetaLimit && self.ns.iter().any(|&n| n < 2) {
                    return cfg("spine_beta_limit needs n >= 2".into());
                }
                if self.kind == ExperimentKind::Barrier {
                    if t <= 1.0 {
                        return cfg("barrier needs t > 1".into());
                    }
                    let a = -brw_exponents(t, self.theta)?.kappa_prime;
                    let h = p.h.unwrap_or(0) as f64;
                    for &n in &self.ns {
                        if a * h > BARRIER_SLACK_LIMIT * (n as f64).ln() {
                            return cfg(format!(
                                "a*h = {:.3} exceeds {BARRIER_SLACK_LIMIT}*ln n = {:.3} at n = {n}",
                                a * h,
                                BARRIER_SLACK_LIMIT * (n as f64).ln()
                            ));
                        }
                    }
                }
            }
            ExperimentKind::HeightRatio => {}
        }
        let work = self.estimated_nodes();
        let cap = p.node_cap.unwrap_or(DEFAULT_NODE_CAP);
        if work > cap {
            return Err(Error::Budget(format!("estimated {work:.3e} nodes exceeds the cap {cap:.3e}")));
        }
        Ok(())
    }

    /// Rough count of nodes visited, used against the node cap.
    pub fn estimated_nodes(&self) -> f64 {
        let per_rep: f64 = match self.kind {
            ExperimentKind::SpineBetaLimit => self.ns.len() as f64,
            ExperimentKind::Barrier => (self.ns.len() * self.params.h.unwrap_or(1)) as f64,
            _ => self.ns.iter().map(|&n| n as f64).sum(),
        };
        per_rep * self.reps as f64
    }
}

/// Metrics of one replica, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub kind: ExperimentKind,
    pub theta: f64,
    pub n: u64,
    pub replica: u64,
    pub stream: u64,
    pub metrics: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: u64,
    pub metric: String,
    pub count: u64,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicaRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "theta", "n", "replica", "metric", "value"])?;
        for r in &self.records {
            for (name, v) in &r.metrics {
                out.write_record([
                    r.kind.name().to_string(),
                    r.theta.to_string(),
                    r.n.to_string(),
                    r.replica.to_string(),
                    name.clone(),
                    v.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_for(&self, n: u64, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.n == n && r.metric == metric)
    }

    /// Values of one metric at one `n`, in replica order.
    pub fn values(&self, n: u64, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.metrics.iter().find(|(m, _)| m == metric).map(|&(_, v)| v))
            .collect()
    }
}

/// Stream id of replica `replica` at position `n_index` of `ns`.
pub fn stream_id(n_index: usize, replica: u64) -> u64 {
    ((n_index as u64) << 40) | replica
}

/// Independent generator for one replica.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(n: u64, metric: &str, values: &[f64]) -> SummaryRow {
    let (mean, se) = mean_se(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    SummaryRow {
        n,
        metric: metric.to_string(),
        count: values.len() as u64,
        mean,
        se,
        median: quantile_sorted(&sorted, 0.5),
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
    }
}

struct Prepared {
    kappa: Vec<f64>,
    step: Option<SpineStep>,
    a: f64,
}

fn prepare(cfg: &ExperimentConfig, n: u64) -> Result<Prepared> {
    let p = &cfg.params;
    let mut prep = Prepared { kappa: Vec::new(), step: None, a: 0.0 };
    match cfg.kind {
        ExperimentKind::ManyToOne => prep.kappa = kappa_table(n, p.t.unwrap_or(1.0), cfg.theta),
        ExperimentKind::SpineBetaLimit => prep.step = Some(SpineStep::new(p.t.unwrap_or(1.0), cfg.theta)?),
        ExperimentKind::Barrier => prep.a = -brw_exponents(p.t.unwrap_or(2.0), cfg.theta)?.kappa_prime,
        _ => {}
    }
    Ok(prep)
}

fn run_replica(cfg: &ExperimentConfig, n: u64, prep: &Prepared, rng: &mut ChaCha8Rng) -> Result<Vec<(String, f64)>> {
    let theta = cfg.theta;
    let p = &cfg.params;
    let mut m = Vec::new();
    match cfg.kind {
        ExperimentKind::HeightRatio => {
            let h = sample_height(n, theta, rng)? as f64;
            m.push(("height".into(), h));
            if n > 1 {
                m.push(("height_over_log_n".into(), h / (n as f64).ln()));
            }
        }
        ExperimentKind::Smass => {
            let s = p.s.unwrap_or(2);
            let levels = p.levels.unwrap_or(6);
            let masses = sample_level_masses(n, theta, levels, s as u64 + 1, rng)?;
            for (l, v) in s_mass_from_levels(&masses, s).into_iter().enumerate() {
                m.push((format!("V_{l}"), v));
            }
        }
        ExperimentKind::Macroscopic => {
            let thr = macroscopic_threshold(n, p.delta.unwrap_or(0.3))?;
            let split = sample_root_split(n, theta, rng)?;
            m.push(("N0".into(), split.as_slice().iter().filter(|&&a| a >= thr).count() as f64));
        }
        ExperimentKind::ManyToOne => {
            let tree = sample_fragmentation(n, theta, rng)?;
            let z = additive_martingale(&tree, p.t.unwrap_or(1.0), p.h.unwrap_or(0), &prep.kappa, &|_| 1.0);
            m.push(("Z_tilde".into(), z));
        }
        ExperimentKind::SpineBetaLimit => {
            let j = prep.step.as_ref().expect("prepared").sample(n - 1, rng);
            m.push(("ratio".into(), j as f64 / (n - 1) as f64));
        }
        ExperimentKind::Barrier => {
            let h = p.h.unwrap_or(0);
            let omega = p.omega.unwrap_or(0.0);
            let (hit, wide, y) = barrier_path(n, theta, p.t.unwrap_or(2.0), h, prep.a, omega, rng)?;
            m.push(("barrier_hit".into(), hit as u8 as f64));
            m.push(("barrier_hit_wide".into(), wide as u8 as f64));
            m.push(("Y_h".into(), y));
        }
    }
    Ok(m)
}

/// Runs every replica and aggregates per `(n, metric)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.ns.len() * cfg.reps as usize);
    for (idx, &n) in cfg.ns.iter().enumerate() {
        let prep = prepare(cfg, n)?;
        let batch: Vec<ReplicaRecord> = (0..cfg.reps)
            .into_par_iter()
            .map(|i| {
                let stream = stream_id(idx, i);
                let mut rng = replica_rng(cfg.seed, stream);
                Ok(ReplicaRecord {
                    kind: cfg.kind,
                    theta: cfg.theta,
                    n,
                    replica: i,
                    stream,
                    metrics: run_replica(cfg, n, &prep, &mut rng)?,
                })
            })
            .collect::<Result<_>>()?;
        records.extend(batch);
    }
    let mut summary = Vec::new();
    for &n in &cfg.ns {
        let Some(first) = records.iter().find(|r| r.n == n) else { continue };
        let names: Vec<String> = first.metrics.iter().map(|(k, _)| k.clone()).collect();
        for name in names {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.metrics.iter().find(|(k, _)| *k == name).map(|&(_, v)| v))
                .collect();
            summary.push(summarize(n, &name, &vals));
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), records, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendRow {
    pub n: u64,
    pub median_height: f64,
    pub median_ratio: f64,
    /// Interquartile range of `H_n / ln n`.
    pub iqr: f64,
    pub mean_ratio: f64,
    pub mean_ratio_se: f64,
}

/// Median and mean of `H_n / ln n` per `n`. Rows with `n = 1` are omitted.
///
/// Medians of the integer-valued height move in whole steps, so the median
/// ratio need not be monotone in `n` at moderate sizes; the mean is
/// smoother.
pub fn height_ratio_trend(theta: f64, ns: &[u64], reps: u64, seed: u64) -> Result<Vec<TrendRow>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("ns must be strictly increasing".into()));
    }
    let ns: Vec<u64> = ns.iter().copied().filter(|&n| n > 1).collect();
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    let cfg = ExperimentConfig {
        kind: ExperimentKind::HeightRatio,
        theta,
        ns: ns.clone(),
        reps,
        seed,
        params: Params::default(),
    };
    let out = run_experiment(&cfg)?;
    Ok(ns
        .iter()
        .map(|&n| {
            let h = out.summary_for(n, "height").expect("summarized");
            let r = out.summary_for(n, "height_over_log_n").expect("summarized");
            TrendRow {
                n,
                median_height: h.median,
                median_ratio: r.median,
                iqr: r.q75 - r.q25,
                mean_ratio: r.mean,
                mean_ratio_se: r.se,
            }
        })
        .collect())
}

/// Moments of `M_{r_n}/(n-1)` against the finite-`n` law and the Gamma
/// limit `Γ_θ/θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaMixtureCheck {
    pub theta: f64,
    pub n: u64,
    pub reps: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    /// Always 1.
    pub exact_mean: f64,
    /// `(n-1+θ)/(θ(n-1))`.
    pub exact_var: f64,
    /// `1/θ`.
    pub limit_var: f64,
}

pub fn gamma_mixture_check(theta: f64, n: u64, reps: u64, seed: u64) -> Result<GammaMixtureCheck> {
    if n < 10 {
        return Err(Error::Domain(format!("gamma_mixture_check needs n >= 10, got {n}")));
    }
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let r = r_n(n, theta)?;
    let scale = (n - 1) as f64;
    let xs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            sample_neg_binomial(r, theta, &mut rng).map(|m| m as f64 / scale)
        })
        .collect::<Result<_>>()?;
    let (mean, mean_se) = mean_se(&xs);
    let k = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
    let var = m2 * k / (k - 1.0);
    let var_se = ((m4 - m2 * m2).max(0.0) / k).sqrt();
    Ok(GammaMixtureCheck {
        theta,
        n,
        reps,
        mean,
        mean_se,
        var,
        var_se,
        exact_mean: 1.0,
        exact_var: (scale + theta) / (theta * scale),
        limit_var: 1.0 / theta,
    })
}

/// One spine path of `h` steps. Returns whether `Y_r ≤ 0` for all `r ≤ h`
/// with `Y_h ∈ [-ω-1, -ω]`, the same with the window widened to
/// `[-ω-1, 0]`, and `Y_h`.
fn barrier_path(
    n: u64,
    theta: f64,
    t: f64,
    h: usize,
    a: f64,
    omega: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, bool, f64)> {
    let masses = sample_spine_masses(n, theta, t, h, rng)?;
    let mut y = 0.0;
    let mut below = true;
    for r in 1..=h {
        let (prev, k) = (masses[r - 1], masses[r]);
        let x = if prev == 1 { 0.0 } else { -((k as f64) / (prev - 1) as f64).ln() };
        y += x - a;
        if y > 0.0 {
            below = false;
        }
    }
    let wide = below && y >= -omega - 1.0;
    Ok((wide && y <= -omega, wide, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierRow {
    pub h: usize,
    pub n: u64,
    pub estimate: f64,
    pub se: f64,
    /// Terminal window widened to `[-ω-1, 0]`.
    pub wide_estimate: f64,
    pub wide_se: f64,
    /// Exact value from the one-step law when `h = 1` and `n` is small
    /// enough to tabulate it.
    pub exact: Option<f64>,
}

/// Root mass for generation `h`: the smallest `n ≥ 1000` with
/// `a h ≤ 0.7 ln n`.
pub fn barrier_root_mass(a: f64, h: usize) -> Result<u64> {
    let ln_n = a * h as f64 / BARRIER_SLACK;
    if ln_n >= (BARRIER_MAX_N as f64).ln() {
        return Err(Error::Budget(format!("a*h = {:.3} needs a root mass beyond 2^62", a * h as f64)));
    }
    Ok((ln_n.exp().ceil() as u64).max(BARRIER_MIN_N))
}

/// Estimates of `Q_t(E_h(ω))` along the spine for each `h`. A diagnostic
/// only: finite-`h` values carry no rate claim.
pub fn barrier_diagnostic(
    theta: f64,
    t: f64,
    hs: &[usize],
    omega: f64,
    reps: u64,
    seed: u64,
) -> Result<Vec<BarrierRow>> {
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("barrier diagnostic needs t > 1, got {t}")));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("omega must be nonnegative, got {omega}")));
    }
    if hs.is_empty() || hs.contains(&0) || hs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("hs must be positive and strictly increasing".into()));
    }
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let a = -brw_exponents(t, theta)?.kappa_prime;
    let mut rows = Vec::with_capacity(hs.len());
    for (idx, &h) in hs.iter().enumerate() {
        let n = barrier_root_mass(a, h)?;
        let hits: Vec<(bool, bool)> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_rng(seed, stream_id(idx, i));
                barrier_path(n, theta, t, h, a, omega, &mut rng).map(|(x, w, _)| (x, w))
            })
            .collect::<Result<_>>()?;
        let narrow: Vec<f64> = hits.iter().map(|&(x, _)| x as u8 as f64).collect();
        let wide: Vec<f64> = hits.iter().map(|&(_, w)| w as u8 as f64).collect();
        let (estimate, se) = mean_se(&narrow);
        let (wide_estimate, wide_se) = mean_se(&wide);
        let exact = if h == 1 && n <= EXACT_WINDOW_MAX_N {
            Some(one_step_window(n, theta, t, a, omega)?)
        } else {
            None
        };
        rows.push(BarrierRow { h, n, estimate, se, wide_estimate, wide_se, exact });
    }
    Ok(rows)
}

/// `Q_t(Y_1 ≤ 0, Y_1 ∈ [-ω-1, -ω])` by summing the one-step law.
pub fn one_step_window(n: u64, theta: f64, t: f64, a: f64, omega: f64) -> Result<f64> {
    let pmf = spine_step_pmf(n, t, theta)?;
    let m = (n - 1) as f64;
    Ok(pmf
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let y = -(((i + 1) as f64) / m).ln() - a;
            y <= 0.0 && y >= -omega - 1.0 && y <= -omega
        })
        .map(|(_, p)| p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heights::exact_height_cdf;

    fn cfg(kind: ExperimentKind, ns: Vec<u64>, reps: u64, params: Params) -> ExperimentConfig {
        ExperimentConfig { kind, theta: 2.0, ns, reps, seed: 42, params }
    }

    #[test]
    fn deterministic_csv() {
        let c = cfg(ExperimentKind::HeightRatio, vec![50, 200], 300, Params::default());
        let mut a = Vec::new();
        run_experiment(&c).unwrap().write_csv(&mut a).unwrap();
        let mut b = Vec::new();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| run_experiment(&c).unwrap().write_csv(&mut b).unwrap());
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("kind,theta,n,replica,metric,value\n"));
        assert!(text.contains("height_ratio,2,50,0,height,"));
    }

    #[test]
    fn config_validation() {
        let bad = |c: ExperimentConfig| matches!(run_experiment(&c), Err(Error::Config(_)));
        assert!(bad(cfg(ExperimentKind::HeightRatio, vec![], 1, Params::default())));
        assert!(bad(cfg(ExperimentKind::HeightRatio, vec![10], 0, Params::default())));
        assert!(bad(cfg(ExperimentKind::ManyToOne, vec![10], 1, Params::default())));
        let p = Params { t: Some(2.0), h: Some(30), ..Params::default() };
        assert!(bad(cfg(ExperimentKind::Barrier, vec![1_000], 1, p)));
        let big = cfg(ExperimentKind::HeightRatio, vec![1_000_000], 1_000_000, Params::default());
        assert!(matches!(run_experiment(&big), Err(Error::Budget(_))));
        assert!(ExperimentConfig::from_json(r#"{"kind":"smass","theta":2,"ns":[5],"reps":1,"seed":1,"params":{"bogus":1}}"#).is_err());
        let ok = ExperimentConfig::from_json(r#"{"kind":"smass","theta":2,"ns":[5],"reps":1,"seed":1,"params":{"s":3}}"#).unwrap();
        assert_eq!(ok.params.s, Some(3));
    }

    #[test]
    fn height_ratio_against_exact() {
        let c = cfg(ExperimentKind::HeightRatio, vec![300], 20_000, Params::default());
        let out = run_experiment(&c).unwrap();
        let hs = out.values(300, "height");
        let table = exact_height_cdf(300, 20, 2.0).unwrap();
        for h in 5..=12 {
            let p = table.pmf(300, h);
            let phat = hs.iter().filter(|&&x| x == h as f64).count() as f64 / hs.len() as f64;
            assert!((phat - p).abs() < 4.0 * (p * (1.0 - p) / hs.len() as f64).sqrt() + 1e-3, "h={h}");
        }
    }

    #[test]
    fn many_to_one_mean() {
        let p = Params { t: Some(2.0), h: Some(3), ..Params::default() };
        let out = run_experiment(&cfg(ExperimentKind::ManyToOne, vec![30], 20_000, p)).unwrap();
        let s = out.summary_for(30, "Z_tilde").unwrap();
        assert!((s.mean - 1.0).abs() < 4.0 * s.se, "{s:?}");
    }

    #[test]
    fn spine_ratio_mean() {
        let p = Params { t: Some(2.0), ..Params::default() };
        let out = run_experiment(&cfg(ExperimentKind::SpineBetaLimit, vec![10_000], 50_000, p)).unwrap();
        let s = out.summary_for(10_000, "ratio").unwrap();
        assert!((s.mean - 0.5).abs() < 4.0 * s.se + 1e-3, "{s:?}");
    }

    #[test]
    fn smass_first_level() {
        let p = Params { s: Some(2), levels: Some(3), ..Params::default() };
        let out = run_experiment(&cfg(ExperimentKind::Smass, vec![2_000], 400, p)).unwrap();
        assert_eq!(out.summary_for(2_000, "V_0").unwrap().mean, 1999.0 * 1998.0);
        let v0 = out.summary_for(2_000, "V_0").unwrap().mean;
        let v1 = out.summary_for(2_000, "V_1").unwrap().mean;
        assert!(v1 / v0 < 1.0 / 3.0 * 1.1);
    }

    #[test]
    fn gamma_mixture_small_n() {
        let g = gamma_mixture_check(2.0, 10, 100_000, 9).unwrap();
        assert!((g.mean - 1.0).abs() < 4.0 * g.mean_se);
        assert!((g.var - 11.0 / 18.0).abs() < 4.0 * g.var_se);
        assert!(gamma_mixture_check(2.0, 5, 10, 1).is_err());
    }

    #[test]
    fn barrier_one_step_exact() {
        let rows = barrier_diagnostic(2.0, 2.0, &[1, 4, 16], 0.0, 40_000, 5).unwrap();
        let r1 = rows[0];
        let exact = r1.exact.unwrap();
        assert!((r1.estimate - exact).abs() < 4.0 * r1.se.max(1e-4), "{r1:?}");
        for w in rows.windows(2) {
            assert!(w[1].estimate <= w[0].estimate + 2.0 * (w[0].se + w[1].se));
        }
        for r in &rows {
            assert!(r.wide_estimate >= r.estimate);
        }
        // [-1, 0] sits inside the widened window [-6, 0] of omega = 5
        let far = barrier_diagnostic(2.0, 2.0, &[1, 4, 16], 5.0, 40_000, 5).unwrap();
        for (near, far) in rows.iter().zip(&far) {
            assert!(far.wide_estimate >= near.estimate);
            assert!(far.wide_estimate >= far.estimate);
        }
        assert!(barrier_diagnostic(2.0, 1.0, &[1], 0.0, 10, 1).is_err());
    }

    #[test]
    fn trend_skips_n_one() {
        let rows = height_ratio_trend(2.0, &[1, 100, 1_000], 200, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].n, 100);
        assert!(height_ratio_trend(2.0, &[100, 10], 5, 3).is_err());
    }

    #[test]
    fn neighbouring_streams_uncorrelated() {
        let c = cfg(ExperimentKind::HeightRatio, vec![200], 20_000, Params::default());
        let xs = run_experiment(&c).unwrap().values(200, "height");
        let (mean, _) = mean_se(&xs);
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        // lag-1 autocorrelation has standard deviation about 1/sqrt(R)
        assert!((cov / var).abs() < 4.0 / (xs.len() as f64).sqrt());
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }
}
