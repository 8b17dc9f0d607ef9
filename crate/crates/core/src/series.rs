//! Truncated power series with real coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    coeffs: Vec<f64>,
}

impl Series {
    /// Series `a_0 + a_1 z + … + a_N z^N`; entries must be finite.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Precondition("a series needs at least one coefficient".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Precondition(format!("coefficient {i} is not finite")));
        }
        Ok(Series { coeffs })
    }

    pub fn zeros(degree: usize) -> Self {
        Series { coeffs: vec![0.0; degree + 1] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Product truncated to the smaller of the two degrees.
    pub fn mul(&self, other: &Series) -> Series {
        let d = self.degree().min(other.degree());
        let mut out = vec![0.0; d + 1];
        for (i, &a) in self.coeffs.iter().take(d + 1).enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().take(d + 1 - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Series { coeffs: out }
    }

    pub fn scale(&self, c: f64) -> Series {
        Series { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// `(1 - z)^a` to the given degree.
    pub fn one_minus_z_pow(a: f64, degree: usize) -> Series {
        let mut c = vec![1.0; degree + 1];
        for k in 1..=degree {
            c[k] = c[k - 1] * (k as f64 - 1.0 - a) / k as f64;
        }
        Series { coeffs: c }
    }

    /// Value at `z` by Horner's rule.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * z + a)
    }

    pub fn max_abs_diff(&self, other: &Series) -> f64 {
        let d = self.degree().max(other.degree());
        (0..=d).map(|k| (self.coeff(k) - other.coeff(k)).abs()).fold(0.0, f64::max)
    }
}

/// `exp(g)` to the degree of `g` via `k e_k = Σ_{i=1}^{k} i g_i e_{k-i}`.
pub fn series_exp(g: &Series) -> Result<Series> {
    if g.coeffs[0] != 0.0 {
        return Err(Error::Precondition(format!(
            "series_exp needs a zero constant term, got {}",
            g.coeffs[0]
        )));
    }
    let n = g.degree();
    // Pre-scale i g_i once.
    let ig: Vec<f64> = g.coeffs.iter().enumerate().map(|(i, &x)| i as f64 * x).collect();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for i in 1..=k {
            acc += ig[i] * e[k - i];
        }
        e[k] = acc / k as f64;
    }
    Ok(Series { coeffs: e })
}

/// Exact counterpart of [`series_exp`] over the rationals.
pub fn series_exp_rational(g: &[BigRational]) -> Result<Vec<BigRational>> {
    if g.is_empty() || !g[0].is_zero() {
        return Err(Error::Precondition("series_exp needs a zero constant term".into()));
    }
    let n = g.len() - 1;
    let ig: Vec<BigRational> = g
        .iter()
        .enumerate()
        .map(|(i, x)| x * BigRational::from_integer(BigInt::from(i)))
        .collect();
    let mut e = vec![BigRational::zero(); n + 1];
    e[0] = BigRational::one();
    for k in 1..=n {
        let mut acc = BigRational::zero();
        for i in 1..=k {
            if !ig[i].is_zero() {
                acc += &ig[i] * &e[k - i];
            }
        }
        e[k] = acc / BigRational::from_integer(BigInt::from(k));
    }
    Ok(e)
}
