//! Branching-random-walk exponents of the Ewens fragmentation and the
//! height constants derived from them.
//!
//! The contraction coefficient is `β_t(θ) = Γ(t)Γ(θ+1)/Γ(θ+t)`, the mean of
//! `Σ P_i^t` for Poisson–Dirichlet(θ) weights. Its logarithm `κ(t)` is convex
//! and decreasing on `(1, ∞)`; the height constant is
//! `c⋆(θ) = inf_{t>1} t / (-κ(t))`, attained at the root `t⋆` of
//! `κ(t) = t κ'(t)`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};

pub use crate::special::{digamma, log_gamma};

/// Largest integer tilt examined for the integer-moment bound `c₊(θ)`.
pub const C_PLUS_MAX_S: u32 = 200;

const ROOT_TOL: f64 = 1e-12;
const BRACKET_LO: f64 = 1.000_001;
const BRACKET_HI: f64 = 4.0;
const BRACKET_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrwExponents {
    pub t: f64,
    pub theta: f64,
    pub beta: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeightConstants {
    pub theta: f64,
    pub t_star: f64,
    pub v_star: f64,
    pub c_star: f64,
    pub c_plus: f64,
    pub s_plus: u32,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("theta must be a positive finite real, got {theta}")))
    }
}

/// `κ(t) = ln β_t(θ)` without argument checks.
pub(crate) fn kappa(t: f64, theta: f64) -> f64 {
    ln_gamma_unchecked(t) + ln_gamma_unchecked(theta + 1.0) - ln_gamma_unchecked(theta + t)
}

pub(crate) fn kappa_prime(t: f64, theta: f64) -> f64 {
    digamma_unchecked(t) - digamma_unchecked(theta + t)
}

/// Exponents `β_t(θ)`, `κ(t)` and `κ'(t)` for `t ≥ 1`.
pub fn brw_exponents(t: f64, theta: f64) -> Result<BrwExponents> {
    check_theta(theta)?;
    if !(t >= 1.0) || !t.is_finite() {
        return Err(domain(format!("tilt t must be >= 1, got {t}")));
    }
    let k = kappa(t, theta);
    Ok(BrwExponents {
        t,
        theta,
        beta: k.exp(),
        kappa: k,
        kappa_prime: kappa_prime(t, theta),
    })
}

/// `R_{m,j}(θ) = Γ(m+1)Γ(m-j+θ) / (Γ(m-j+1)Γ(m+θ))` in log form.
///
/// `θ R_{m,j} / j` is the mean number of blocks of size `j` in Ewens(m, θ).
pub(crate) fn ln_block_ratio(m: u64, j: u64, theta: f64, ln_gamma_m: (f64, f64)) -> f64 {
    let r = (m - j) as f64;
    ln_gamma_m.0 + ln_gamma_unchecked(r + theta) - ln_gamma_unchecked(r + 1.0) - ln_gamma_m.1
}

pub(crate) fn ln_gamma_pair(m: u64, theta: f64) -> (f64, f64) {
    let m = m as f64;
    (ln_gamma_unchecked(m + 1.0), ln_gamma_unchecked(m + theta))
}

/// `β_{m,t}(θ) = E[Σ_i (A_i/m)^t]` for block sizes `A_i` of an Ewens(m, θ)
/// partition. This is `exp(κ_{m+1}(t))`, the one-step exponent at a node of
/// mass `m + 1`.
pub fn finite_mass_exponent(m: u64, t: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if m == 0 {
        return Err(domain("finite_mass_exponent requires m >= 1"));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(domain(format!("tilt t must be finite and nonnegative, got {t}")));
    }
    Ok(finite_mass_exponent_unchecked(m, t, theta))
}

pub(crate) fn finite_mass_exponent_unchecked(m: u64, t: f64, theta: f64) -> f64 {
    let lg = ln_gamma_pair(m, theta);
    let ln_m = (m as f64).ln();
    let mut sum = 0.0;
    for j in 1..=m {
        let lj = (j as f64).ln();
        sum += ((t - 1.0) * lj - t * ln_m + ln_block_ratio(m, j, theta, lg)).exp();
    }
    theta * sum
}

/// Height constants `t⋆`, `v⋆`, `c⋆` and the integer-tilt bound `c₊`.
pub fn height_constants(theta: f64) -> Result<HeightConstants> {
    check_theta(theta)?;
    let g = |t: f64| kappa(t, theta) - t * kappa_prime(t, theta);

    // g > 0 near t = 1 and g → -∞; expand the upper end until it changes sign.
    let mut lo = BRACKET_LO;
    let mut hi = BRACKET_HI;
    if g(lo) <= 0.0 {
        return Err(Error::Convergence(format!(
            "g(t) is not positive at t = {lo} for theta = {theta}"
        )));
    }
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::Convergence(format!(
                "no sign change of g(t) below t = {BRACKET_CAP} for theta = {theta}"
            )));
        }
    }
    while hi - lo > ROOT_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    let v_star = -kappa(t_star, theta) / t_star;

    let (s_plus, c_plus) = (2..=C_PLUS_MAX_S)
        .map(|s| (s, s as f64 / -kappa(s as f64, theta)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });

    Ok(HeightConstants {
        theta,
        t_star,
        v_star,
        c_star: 1.0 / v_star,
        c_plus,
        s_plus,
    })
}
