//! Functionals appearing in the inequalities. All measure averages use the
//! renormalized cell masses `μ̂_i = μ_i / Σμ`.

use std::ops::Deref;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{ensure_len, invalid, Error, Result};
use crate::quad::DiscreteForm;

/// Node values of a test function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    positive: bool,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function value {} at node {i}", values[i])));
        }
        let positive = values.iter().all(|&v| v > 0.0);
        Ok(Self { values, positive })
    }

    /// Like [`GridFunction::new`] but requires `min f > 0`.
    pub fn positive(values: Vec<f64>) -> Result<Self> {
        let f = Self::new(values)?;
        if !f.positive {
            return Err(invalid("f", "expected strictly positive values"));
        }
        Ok(f)
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for GridFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluates `row(i)` for every row and sums in index order, so the result
/// does not depend on how rows were scheduled.
pub(crate) fn row_sum(n: usize, row: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = (0..n).into_par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = (0..n).map(row).collect();
    parts.iter().sum()
}

/// `Σ_{i<j} W_ij (f_i - f_j)(g_i - g_j)`.
pub fn dirichlet_bilinear(form: &DiscreteForm, f: &[f64], g: &[f64]) -> Result<f64> {
    let n = form.len();
    ensure_len(n, f.len())?;
    ensure_len(n, g.len())?;
    Ok(row_sum(n, |i| {
        let w = &form.row(i)[i + 1..];
        let (fi, gi) = (f[i], g[i]);
        w.iter()
            .zip(&f[i + 1..])
            .zip(&g[i + 1..])
            .map(|((w, fj), gj)| w * (fi - fj) * (gi - gj))
            .sum()
    }))
}

/// `D(f, f)`.
pub fn dirichlet_energy(form: &DiscreteForm, f: &[f64]) -> Result<f64> {
    dirichlet_bilinear(form, f, f)
}

/// `Σ_{i<j} W_ij |f_i - f_j|^p`; with the folded weights this is the full
/// double integral `∬ |f(x)-f(y)|^p ρ dy μ_V(dx)`.
pub fn lp_energy(form: &DiscreteForm, f: &[f64], p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("must be > 1, got {p}")));
    }
    let n = form.len();
    ensure_len(n, f.len())?;
    Ok(row_sum(n, |i| {
        form.row(i)[i + 1..]
            .iter()
            .zip(&f[i + 1..])
            .map(|(w, fj)| w * (f[i] - fj).abs().powf(p))
            .sum()
    }))
}

/// `μ̂(f)`.
pub fn mean(form: &DiscreteForm, f: &[f64]) -> Result<f64> {
    ensure_len(form.len(), f.len())?;
    Ok(weighted_mean(form.mass_hat(), f))
}

pub(crate) fn weighted_mean(mass_hat: &[f64], f: &[f64]) -> f64 {
    mass_hat.iter().zip(f).map(|(m, f)| m * f).sum()
}

/// `μ̂((f - μ̂f)²)`, two-pass.
pub fn variance(form: &DiscreteForm, f: &[f64]) -> Result<f64> {
    let m = mean(form, f)?;
    Ok(form
        .mass_hat()
        .iter()
        .zip(f)
        .map(|(w, f)| w * (f - m) * (f - m))
        .sum())
}

/// `μ̂(|f - μ̂f|^p)`.
pub fn central_abs_moment(form: &DiscreteForm, f: &[f64], p: f64) -> Result<f64> {
    let m = mean(form, f)?;
    Ok(form
        .mass_hat()
        .iter()
        .zip(f)
        .map(|(w, f)| w * (f - m).abs().powf(p))
        .sum())
}

/// `Ent(f) = μ̂(f log f) - μ̂(f) log μ̂(f)`, evaluated as
/// `m Σ μ̂ [(1+q) log(1+q) - q]` with `q = f/m - 1`, which has no cancellation.
pub fn entropy(form: &DiscreteForm, f: &[f64]) -> Result<f64> {
    ensure_len(form.len(), f.len())?;
    if let Some(i) = f.iter().position(|&v| !(v > 0.0)) {
        return Err(invalid("f", format!("entropy requires positive f (f[{i}] = {})", f[i])));
    }
    let m = mean(form, f)?;
    let s: f64 = form
        .mass_hat()
        .iter()
        .zip(f)
        .map(|(w, &v)| {
            let q = (v - m) / m;
            w * ((1.0 + q) * q.ln_1p() - q)
        })
        .sum();
    Ok(m * s.max(0.0))
}

/// `μ̂(f^p) - μ̂(f)^p` for `p ∈ (1, 2]`, evaluated as
/// `m^p Σ μ̂ [(1+q)^p - 1 - p q]`.
pub fn beckner_deficit(form: &DiscreteForm, f: &[f64], p: f64) -> Result<f64> {
    check_beckner_exponent(p)?;
    ensure_len(form.len(), f.len())?;
    if let Some(i) = f.iter().position(|&v| v < 0.0) {
        return Err(invalid("f", format!("Beckner deficit requires f >= 0 (f[{i}] = {})", f[i])));
    }
    let m = mean(form, f)?;
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = form
        .mass_hat()
        .iter()
        .zip(f)
        .map(|(w, &v)| {
            let q = (v - m) / m;
            w * ((p * q.ln_1p()).exp_m1() - p * q)
        })
        .sum();
    Ok(m.powf(p) * s.max(0.0))
}

pub(crate) fn check_beckner_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("p out of (1,2]: {p}")))
    }
}

/// `f^{p-1}` componentwise; exact at `p = 2`.
pub fn power_minus_one(f: &[f64], p: f64) -> Vec<f64> {
    if p == 2.0 {
        f.to_vec()
    } else {
        f.iter().map(|v| v.powf(p - 1.0)).collect()
    }
}

/// `½ ΣΣ (f_i - f_j)(g_i - g_j) μ̂_i μ̂_j` as a direct double sum. With
/// `g = f` this is the variance; with `g = log f` and `g = f^{p-1}` it bounds
/// the entropy and the Beckner deficit.
pub fn pair_covariance(mass_hat: &[f64], f: &[f64], g: &[f64]) -> Result<f64> {
    let n = mass_hat.len();
    ensure_len(n, f.len())?;
    ensure_len(n, g.len())?;
    Ok(row_sum(n, |i| {
        let mut s = 0.0;
        for j in 0..n {
            s += (f[i] - f[j]) * (g[i] - g[j]) * mass_hat[j];
        }
        0.5 * mass_hat[i] * s
    }))
}
