//! Inequality checks over suites of test functions, spectral-gap estimation
//! and the cutoff family used to probe the regime without a spectral gap.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::criteria::{loglog_slope, RateFunction};
use crate::error::{invalid, Error, Result};
use crate::forms::{
    self, beckner_deficit, central_abs_moment, dirichlet_bilinear, dirichlet_energy, entropy,
    lp_energy, power_minus_one, variance,
};
use crate::linalg::{dot, matvec, Cholesky};
use crate::quad::DiscreteForm;
use crate::suite::TestFunction;

pub const DEFAULT_TOL: f64 = 0.1;
pub const MAX_DENSE_NODES: usize = 5000;
pub const MAX_ITERATIONS: usize = 10_000;
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionRatio {
    pub id: String,
    /// Rate argument for the weak and super Poincaré checks.
    pub r: Option<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub radius: f64,
    pub n: usize,
    pub subdiv: usize,
    pub tail_mass: f64,
    pub measure: String,
    pub kernel: String,
}

impl GridInfo {
    pub fn of(form: &DiscreteForm) -> Self {
        let g = form.grid();
        Self {
            radius: g.radius(),
            n: g.len(),
            subdiv: form.subdiv(),
            tail_mass: g.tail_mass(),
            measure: g.measure_tag().to_string(),
            kernel: form.kernel_tag().to_string(),
        }
    }
}

/// Outcome of one inequality check. `worst_ratio` is left side over right
/// side; the check passes iff `worst_ratio <= 1 + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub inequality: String,
    pub grid: GridInfo,
    pub constants: BTreeMap<String, f64>,
    pub functions: usize,
    pub worst_ratio: f64,
    pub witness: Option<String>,
    pub pass: bool,
    pub tolerance: f64,
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
    pub ratios: Vec<FunctionRatio>,
}

impl VerificationReport {
    fn new(inequality: &str, form: &DiscreteForm, tolerance: f64) -> Self {
        let mut notes: Vec<String> = form.grid().warnings().to_vec();
        notes.sort();
        Self {
            inequality: inequality.into(),
            grid: GridInfo::of(form),
            constants: BTreeMap::new(),
            functions: 0,
            worst_ratio: 0.0,
            witness: None,
            pass: true,
            tolerance,
            skipped: Vec::new(),
            notes,
            ratios: Vec::new(),
        }
    }

    fn record(&mut self, id: &str, r: Option<f64>, ratio: f64) -> Result<()> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(Error::Internal(format!("ratio {ratio} for {id}")));
        }
        if ratio > self.worst_ratio || self.witness.is_none() {
            self.worst_ratio = ratio;
            self.witness = Some(match r {
                Some(r) => format!("{id}@r={r:.6e}"),
                None => id.to_string(),
            });
        }
        self.ratios.push(FunctionRatio {
            id: id.into(),
            r,
            ratio,
        });
        Ok(())
    }

    fn finish(mut self) -> Self {
        self.pass = self.pass && self.worst_ratio <= 1.0 + self.tolerance;
        self
    }

    /// Per-function ratios as CSV with header `id,r,ratio`.
    pub fn ratios_csv(&self) -> String {
        let mut out = String::from("id,r,ratio\n");
        for fr in &self.ratios {
            let r = fr.r.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", fr.id, r, fr.ratio));
        }
        out
    }
}

/// Smallest nonzero eigenvalue of `D(f,f)/Var(f)` and its minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGap {
    pub gap: f64,
    /// Mean-zero minimizer with unit variance.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Inverse power iteration for the pencil `(K, M)` with `K` the graph
/// Laplacian of `W` and `M = diag(μ̂)`, in the symmetric form
/// `A = M^{-1/2} K M^{-1/2}`. The null vector `q = √μ̂` is shifted up by
/// `σ q qᵀ` with `σ` above the mean nonzero eigenvalue, so the shifted
/// matrix is positive definite and its smallest eigenvalue is the gap;
/// iterates are also projected off `q`.
pub fn estimate_spectral_gap(form: &DiscreteForm) -> Result<SpectralGap> {
    let n = form.len();
    if n > MAX_DENSE_NODES {
        return Err(invalid("n", format!("dense eigen-solver supports n <= {MAX_DENSE_NODES}, got {n}")));
    }
    let mu = form.mass_hat();
    if let Some(i) = mu.iter().position(|&m| !(m > 0.0)) {
        return Err(invalid("mass", format!("zero cell mass at node {i}")));
    }
    let q: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let mut a = vec![0.0; n * n];
    let mut trace = 0.0;
    for i in 0..n {
        let row = form.row(i);
        let degree: f64 = row.iter().sum();
        for j in 0..n {
            a[i * n + j] = -row[j] / (q[i] * q[j]);
        }
        a[i * n + i] = degree / mu[i];
        trace += a[i * n + i];
    }
    let sigma = 2.0 * trace / (n - 1) as f64;
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += sigma * q[i] * q[j];
        }
    }
    let chol = Cholesky::factor(a.clone(), n)?;

    let deflate = |v: &mut [f64]| {
        let c = dot(&q, v);
        for (vi, qi) in v.iter_mut().zip(&q) {
            *vi -= c * qi;
        }
        let norm = dot(v, v).sqrt();
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    };
    // deterministic start with both parities present
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64 - 0.5;
            q[i] * (t + 0.3 * (7.0 * t).cos())
        })
        .collect();
    deflate(&mut v);
    let mut lambda = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        chol.solve_in_place(&mut v);
        deflate(&mut v);
        let av = matvec(&a, &v);
        let next = dot(&v, &av);
        residual = av
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - next * y).powi(2))
            .sum::<f64>()
            .sqrt();
        let converged = (next - lambda).abs() < EIGEN_TOL * next.abs();
        lambda = next;
        if converged {
            let eigenvector = minimizer(&v, &q, mu);
            return Ok(SpectralGap {
                gap: lambda,
                eigenvector,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn minimizer(v: &[f64], q: &[f64], mu: &[f64]) -> Vec<f64> {
    let mut f: Vec<f64> = v.iter().zip(q).map(|(v, q)| v / q).collect();
    let m = forms::weighted_mean(mu, &f);
    for x in &mut f {
        *x -= m;
    }
    let var: f64 = f.iter().zip(mu).map(|(x, w)| w * x * x).sum();
    let sign = if f[f.len() - 1] < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / var.sqrt();
    for x in &mut f {
        *x *= scale;
    }
    f
}

const CONSTANT_VARIANCE: f64 = 1e-24;

fn is_constant_pair(energy: f64, lhs: f64, scale: f64) -> bool {
    energy == 0.0 && lhs <= CONSTANT_VARIANCE * (1.0 + scale)
}

/// `c · Var(f) / D(f,f)` over the suite plus the spectral minimizer.
pub fn check_poincare(
    form: &DiscreteForm,
    c: f64,
    suite: &[TestFunction],
    minimizer: Option<&[f64]>,
    tol: f64,
) -> Result<VerificationReport> {
    check_constant(c)?;
    let mut report = VerificationReport::new("poincare", form, tol);
    report.constants.insert("c".into(), c);
    let extra = minimizer.map(|v| TestFunction {
        id: "spectral_minimizer".into(),
        values: v.to_vec(),
    });
    for f in suite.iter().chain(extra.iter()) {
        let var = variance(form, &f.values)?;
        let energy = dirichlet_energy(form, &f.values)?;
        if is_constant_pair(energy, var, mean_sq(form, &f.values)) {
            report.skipped.push(format!("{}: constant", f.id));
            continue;
        }
        if energy == 0.0 {
            return Err(Error::Internal(format!("{}: D(f,f) = 0 with Var(f) = {var:e}", f.id)));
        }
        report.record(&f.id, None, c * var / energy)?;
        report.functions += 1;
    }
    Ok(report.finish())
}

fn mean_sq(form: &DiscreteForm, f: &[f64]) -> f64 {
    forms::weighted_mean(form.mass_hat(), f).powi(2)
}

fn check_constant(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(invalid("c", format!("must be positive, got {c}")))
    }
}

/// `c · Ent(f) / D(f, log f)` over a positive suite.
pub fn check_entropy(form: &DiscreteForm, c: f64, suite: &[TestFunction], tol: f64) -> Result<VerificationReport> {
    check_constant(c)?;
    let mut report = VerificationReport::new("entropy", form, tol);
    report.constants.insert("c".into(), c);
    for f in suite {
        if let Some(v) = f.values.iter().find(|&&v| !(v > 0.0)) {
            return Err(invalid("suite", format!("{}: non-positive value {v}", f.id)));
        }
        let ent = entropy(form, &f.values)?;
        let logs: Vec<f64> = f.values.iter().map(|v| v.ln()).collect();
        let energy = dirichlet_bilinear(form, &f.values, &logs)?;
        if is_constant_pair(energy, ent, 1.0) {
            report.skipped.push(format!("{}: constant", f.id));
            continue;
        }
        report.record(&f.id, None, c * ent / energy)?;
        report.functions += 1;
    }
    Ok(report.finish())
}

/// `c · (μ(f^p) - μ(f)^p) / D(f, f^{p-1})` over a nonnegative suite.
pub fn check_beckner(
    form: &DiscreteForm,
    c: f64,
    p: f64,
    suite: &[TestFunction],
    tol: f64,
) -> Result<VerificationReport> {
    check_constant(c)?;
    forms::check_beckner_exponent(p)?;
    let mut report = VerificationReport::new("beckner", form, tol);
    report.constants.insert("c".into(), c);
    report.constants.insert("p".into(), p);
    for f in suite {
        let deficit = beckner_deficit(form, &f.values, p)?;
        let energy = dirichlet_bilinear(form, &f.values, &power_minus_one(&f.values, p))?;
        if is_constant_pair(energy, deficit, mean_sq(form, &f.values)) {
            report.skipped.push(format!("{}: constant", f.id));
            continue;
        }
        report.record(&f.id, None, c * deficit / energy)?;
        report.functions += 1;
    }
    Ok(report.finish())
}

/// `c · μ(|f - μf|^p) / (2 D_p(f))` with `D_p` from [`lp_energy`].
pub fn check_lp_poincare(
    form: &DiscreteForm,
    c: f64,
    p: f64,
    suite: &[TestFunction],
    tol: f64,
) -> Result<VerificationReport> {
    check_constant(c)?;
    if !(p > 1.0) {
        return Err(invalid("p", format!("must be > 1, got {p}")));
    }
    let mut report = VerificationReport::new("lp_poincare", form, tol);
    report.constants.insert("c".into(), c);
    report.constants.insert("p".into(), p);
    for f in suite {
        let moment = central_abs_moment(form, &f.values, p)?;
        let energy = lp_energy(form, &f.values, p)?;
        if is_constant_pair(energy, moment, mean_sq(form, &f.values)) {
            report.skipped.push(format!("{}: constant", f.id));
            continue;
        }
        report.record(&f.id, None, c * moment / (2.0 * energy))?;
        report.functions += 1;
    }
    Ok(report.finish())
}

fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Var(f) / (α(r) D(f,f) + r ‖f‖²_∞)` for every `r` in `r_grid`.
pub fn check_weak_poincare(
    form: &DiscreteForm,
    rate: &RateFunction,
    suite: &[TestFunction],
    r_grid: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("weak_poincare", form, tol);
    let stats: Vec<(f64, f64, f64)> = suite
        .iter()
        .map(|f| Ok((variance(form, &f.values)?, dirichlet_energy(form, &f.values)?, sup_norm(&f.values))))
        .collect::<Result<_>>()?;
    for &r in r_grid {
        let alpha = rate.eval(r)?;
        report.constants.insert(format!("alpha({r:.6e})"), alpha);
        for (f, &(var, energy, sup)) in suite.iter().zip(&stats) {
            let rhs = alpha * energy + r * sup * sup;
            if rhs == 0.0 {
                report.skipped.push(format!("{}@r={r:e}: zero function", f.id));
                continue;
            }
            report.record(&f.id, Some(r), var / rhs)?;
        }
    }
    report.functions = suite.len();
    Ok(report.finish())
}

/// `μ(f²) / (r D(f,f) + β(r) μ(|f|)²)` for every feasible `r` in `r_grid`;
/// also requires `β(r) >= 1` (take `f ≡ 1`).
pub fn check_super_poincare(
    form: &DiscreteForm,
    beta: &RateFunction,
    suite: &[TestFunction],
    r_grid: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("super_poincare", form, tol);
    let mu = form.mass_hat();
    let stats: Vec<(f64, f64, f64)> = suite
        .iter()
        .map(|f| {
            let sq = f.values.iter().zip(mu).map(|(v, w)| w * v * v).sum();
            let abs: f64 = f.values.iter().zip(mu).map(|(v, w)| w * v.abs()).sum();
            Ok((sq, dirichlet_energy(form, &f.values)?, abs * abs))
        })
        .collect::<Result<_>>()?;
    for &r in r_grid {
        let b = match beta.eval(r) {
            Ok(b) => b,
            Err(Error::Infeasible(msg)) => {
                report.skipped.push(format!("r={r:e}: {msg}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        report.constants.insert(format!("beta({r:.6e})"), b);
        if b < 1.0 {
            report.pass = false;
            report.notes.push(format!("beta({r:e}) = {b} < 1 fails for f = 1"));
        }
        for (f, &(sq, energy, abs2)) in suite.iter().zip(&stats) {
            let rhs = r * energy + b * abs2;
            if rhs == 0.0 {
                report.skipped.push(format!("{}@r={r:e}: zero function", f.id));
                continue;
            }
            report.record(&f.id, Some(r), sq / rhs)?;
        }
    }
    report.functions = suite.len();
    Ok(report.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffReport {
    /// `(s, D(f_s,f_s)/Var(f_s))`.
    pub points: Vec<(f64, f64)>,
    pub loglog_slope: f64,
    pub strictly_decreasing: bool,
}

/// Rayleigh quotients of the cutoffs `f_s(x) = min(|x|/s, 1)`.
pub fn cutoff_family_ratio(form: &DiscreteForm, scales: &[f64]) -> Result<CutoffReport> {
    let radius = form.grid().radius();
    let mut points = Vec::with_capacity(scales.len());
    for &s in scales {
        if !(s > 0.0) || s > 0.25 * radius {
            return Err(invalid("scale", format!("{s} must lie in (0, R/4] = (0, {}]", 0.25 * radius)));
        }
        let f = form.grid().sample(|x| (x.abs() / s).min(1.0));
        points.push((s, dirichlet_energy(form, &f)? / variance(form, &f)?));
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let loglog_slope = if points.len() >= 2 { loglog_slope(&points) } else { f64::NAN };
    Ok(CutoffReport {
        points,
        loglog_slope,
        strictly_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Grid;
    use approx::assert_relative_eq;

    fn toy(w: f64) -> DiscreteForm {
        let g = Grid::from_density(vec![0.0, 1.0], 1.0, vec![1.0, 1.0]).unwrap();
        DiscreteForm::from_weights(g, vec![0.0, w, w, 0.0]).unwrap()
    }

    #[test]
    fn two_point_gap() {
        let gap = estimate_spectral_gap(&toy(0.25)).unwrap();
        // D = w (f0 - f1)², Var = ¼ (f0 - f1)²
        assert_relative_eq!(gap.gap, 1.0, max_relative = 1e-12);
        assert!((gap.eigenvector[0] + gap.eigenvector[1]).abs() < 1e-12);
    }

    #[test]
    fn gap_dominates_form_condition() {
        use crate::criteria::form_condition;
        use crate::model::{KernelSpec, MeasureSpec};
        use crate::quad::{assemble_form_matrix, build_grid};
        // heavy tail, so the renormalization matters
        let m = MeasureSpec::polynomial_tail(0.3).unwrap().normalize(1e-10).unwrap();
        let g = build_grid(&m, 20.0, 200).unwrap();
        let form = assemble_form_matrix(&g, &KernelSpec::stable(0.5).unwrap(), 4).unwrap();
        let (c, _) = form_condition(&form);
        let gap = estimate_spectral_gap(&form).unwrap().gap;
        assert!(c > 0.0 && gap >= c, "gap {gap} < c {c}");
    }

    #[test]
    fn constants_are_skipped() {
        let f = toy(0.25);
        let suite = vec![
            TestFunction {
                id: "one".into(),
                values: vec![1.0, 1.0],
            },
            TestFunction {
                id: "step".into(),
                values: vec![1.0, 2.0],
            },
        ];
        let r = check_poincare(&f, 1.0, &suite, None, 0.1).unwrap();
        assert_eq!(r.functions, 1);
        assert_eq!(r.skipped.len(), 1);
        assert_relative_eq!(r.worst_ratio, 1.0, max_relative = 1e-14);
        assert!(r.pass);
        let r = check_poincare(&f, 2.0, &suite, None, 0.1).unwrap();
        assert!(!r.pass);
        assert!(check_entropy(&f, 1.0, &suite, 0.1).unwrap().pass);
        assert!(check_beckner(&f, 1.0, 3.0, &suite, 0.1).is_err());
        assert!(check_lp_poincare(&f, 1.0, 1.0, &suite, 0.1).is_err());
    }
}
