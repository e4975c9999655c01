use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{condition_infimum, Domain};
use crate::error::{Error, Result};
use crate::model::{KernelSpec, MeasureFamily, MeasureSpec};
use crate::quad::Grid;

/// `w(x) = scale · (1+|x|)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialWeight {
    pub scale: f64,
    pub exponent: f64,
}

impl RadialWeight {
    pub fn new(scale: f64, exponent: f64) -> Self {
        Self { scale, exponent }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * (1.0 + x.abs()).powf(self.exponent)
    }

    /// `w(x) → ∞` as `|x| → ∞`.
    pub fn is_coercive(&self) -> bool {
        self.scale > 0.0 && self.exponent > 0.0
    }

    /// `inf_{|x| >= t} w`; equals `w(t)` for coercive weights.
    pub fn inf_outside(&self, t: f64) -> f64 {
        if self.exponent >= 0.0 {
            self.eval(t)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub holds: bool,
    /// `min_{i≠j} (e^{V_i} + e^{V_j}) ρ_ij / (w_i + w_j)`.
    pub min_ratio: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub worst_points: Option<(f64, f64)>,
    pub coercive: bool,
    pub note: Option<String>,
}

/// Checks `e^{V(x)} + e^{V(y)} >= (w(x) + w(y)) / ρ(|x-y|)` at every node
/// pair of `grid`.
pub fn lyapunov_weight_check(
    kernel: &KernelSpec,
    weight: &RadialWeight,
    grid: &Grid,
) -> Result<LyapunovReport> {
    let w = grid.sample(|x| weight.eval(x));
    let (min_ratio, pair) = pair_ratio_min(kernel, &w, grid)?;
    let coercive = weight.is_coercive();
    Ok(LyapunovReport {
        holds: min_ratio >= 1.0,
        min_ratio,
        worst_pair: pair,
        worst_points: pair.map(|(i, j)| (grid.nodes()[i], grid.nodes()[j])),
        coercive,
        note: (!coercive).then(|| "w not coercive".to_string()),
    })
}

/// Largest `scale` for which `scale · (1+|x|)^exponent` passes the check on
/// `grid`.
pub fn calibrate_lyapunov_scale(kernel: &KernelSpec, exponent: f64, grid: &Grid) -> Result<f64> {
    let w = grid.sample(|x| (1.0 + x.abs()).powf(exponent));
    Ok(pair_ratio_min(kernel, &w, grid)?.0)
}

fn pair_ratio_min(kernel: &KernelSpec, w: &[f64], grid: &Grid) -> Result<(f64, Option<(usize, usize)>)> {
    let n = grid.len();
    let x = grid.nodes();
    let exp_v: Vec<f64> = grid.density().iter().map(|d| 1.0 / d).collect();
    let row = |i: usize| -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, 0);
        for j in (i + 1)..n {
            let denom = w[i] + w[j];
            if denom <= 0.0 {
                continue;
            }
            let r = (exp_v[i] + exp_v[j]) * kernel.pair_value(x[i], x[j])? / denom;
            if r < best.0 {
                best = (r, j);
            }
        }
        Ok(best)
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<_> = (0..n).into_par_iter().map(row).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..n).map(row).collect::<Result<_>>()?;
    let mut best = (f64::INFINITY, None);
    for (i, (r, j)) in rows.into_iter().enumerate() {
        if r < best.0 {
            best = (r, Some((i, j)));
        }
    }
    Ok(best)
}

/// Certified weight for a polynomial tail `ε > α` against a stable kernel:
/// exponent `ε - α` and scale `c/2`, where `c = 2^{1-(d+α)}/C_{d,ε}` is the
/// condition constant. Follows from the `C_r` bound on `(1+|x|)^{d+α}` and
/// Chebyshev's sum inequality for the similarly ordered pairs
/// `((1+|x|)^{d+α}, (1+|x|)^{ε-α})`.
pub fn example_weight(measure: &MeasureSpec, kernel: &KernelSpec) -> Result<RadialWeight> {
    match (measure.family(), kernel) {
        (MeasureFamily::PolynomialTail { eps, .. }, KernelSpec::Stable { alpha_stab, .. })
            if eps > alpha_stab =>
        {
            let c = condition_infimum(measure, kernel, Domain::Analytic)?.value;
            Ok(RadialWeight::new(0.5 * c, eps - alpha_stab))
        }
        _ => Err(Error::Unsupported(format!(
            "no closed-form Lyapunov weight for {} x {}; calibrate on a grid",
            measure.label(),
            kernel.label()
        ))),
    }
}
