//! Nonlocal porous-medium flow `∂_t u = L(u^m)` and its algebraic L² decay.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{ensure_len, invalid, Error, Result};
use crate::forms::{dirichlet_bilinear, weighted_mean};
use crate::quad::DiscreteForm;
use crate::verify::{GridInfo, VerificationReport};

pub const MIN_STEP: f64 = 1e-12;
/// Steps with `μ̂(u²)` below this are excluded from the differential check.
pub const ENERGY_FLOOR: f64 = 1e-14;
const DUALITY_PAIRS: usize = 10;
const DUALITY_TOL: f64 = 1e-10;

/// `(Lf)_i = Σ_j (W_ij/μ̂_i)(f_j - f_i)`, the generator whose Dirichlet form
/// is `D`: `-μ̂(g Lf) = D(f, g)`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    form: DiscreteForm,
    /// `W_ij / μ̂_i`, row-major.
    rates: Vec<f64>,
    max_diag: f64,
}

impl GeneratorMatrix {
    pub fn new(form: &DiscreteForm) -> Result<Self> {
        let n = form.len();
        let mu = form.mass_hat();
        if let Some(i) = mu.iter().position(|&m| !(m > 0.0)) {
            return Err(invalid("mass", format!("zero cell mass at node {i}")));
        }
        let mut rates = form.weights().to_vec();
        let mut max_diag: f64 = 0.0;
        for i in 0..n {
            let row = &mut rates[i * n..(i + 1) * n];
            let mut diag = 0.0;
            for r in row.iter_mut() {
                *r /= mu[i];
                diag += *r;
            }
            max_diag = max_diag.max(diag);
        }
        let gen = Self {
            form: form.clone(),
            rates,
            max_diag,
        };
        gen.check_duality()?;
        Ok(gen)
    }

    fn check_duality(&self) -> Result<()> {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e6c);
        for _ in 0..DUALITY_PAIRS {
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lf = self.apply(&f)?;
            let lhs = -weighted_mean(self.form.mass_hat(), &g.iter().zip(&lf).map(|(g, l)| g * l).collect::<Vec<_>>());
            let rhs = dirichlet_bilinear(&self.form, &f, &g)?;
            let scale = (self.max_diag * n as f64).max(1.0) * f64::EPSILON * 1e3;
            if (lhs - rhs).abs() > DUALITY_TOL * rhs.abs().max(1.0) + scale {
                return Err(Error::Internal(format!("generator duality off: {lhs} vs {rhs}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.form.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn form(&self) -> &DiscreteForm {
        &self.form
    }

    /// `max_i |L_ii|`.
    pub fn max_diag(&self) -> f64 {
        self.max_diag
    }

    /// `Lf`, in difference form so constants map to exactly zero.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        ensure_len(n, f.len())?;
        let row = |i: usize| {
            let fi = f[i];
            self.rates[i * n..(i + 1) * n]
                .iter()
                .zip(f)
                .map(|(r, fj)| r * (fj - fi))
                .sum::<f64>()
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok((0..n).into_par_iter().map(row).collect())
        }
        #[cfg(not(feature = "parallel"))]
        Ok((0..n).map(row).collect())
    }
}

/// `sign(x)|x|^m`.
pub fn signed_power(x: f64, m: f64) -> f64 {
    x.signum() * x.abs().powf(m)
}

/// Subtracts `μ̂(f)`.
pub fn center(f: &mut [f64], mass_hat: &[f64]) {
    let m = weighted_mean(mass_hat, f);
    for v in f.iter_mut() {
        *v -= m;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub m: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<Vec<f64>>,
    /// `μ̂(u²)`.
    pub l2: Vec<f64>,
    /// `μ̂(u)`.
    pub mass: Vec<f64>,
    /// Accepted step sizes; `dts[k] = times[k+1] - times[k]`.
    pub dts: Vec<f64>,
    /// `μ̂(|u|^{m+1})` at each recorded time.
    pub moment: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// [`decay_bound`] along the recorded times.
    pub fn bounds(&self, c: f64) -> Result<Vec<f64>> {
        self.times.iter().map(|&t| decay_bound(t, self.m, c, self.l2[0])).collect()
    }

    /// CSV with header `t,l2,bound,dt`; `dt` is the step that reached `t`
    /// (0 on the first row).
    pub fn to_csv(&self, c: f64) -> Result<String> {
        let bounds = self.bounds(c)?;
        let mut out = String::from("t,l2,bound,dt\n");
        let dts = std::iter::once(0.0).chain(self.dts.iter().copied());
        for (((t, l2), b), dt) in self.times.iter().zip(&self.l2).zip(&bounds).zip(dts) {
            out.push_str(&format!("{t},{l2},{b},{dt}\n"));
        }
        Ok(out)
    }
}

fn stats(u: &[f64], mass_hat: &[f64], m: f64) -> (f64, f64, f64) {
    let mut l2 = 0.0;
    let mut mass = 0.0;
    let mut moment = 0.0;
    for (v, w) in u.iter().zip(mass_hat) {
        l2 += w * v * v;
        mass += w * v;
        moment += w * v.abs().powf(m + 1.0);
    }
    (l2, mass, moment)
}

/// Explicit Euler for `∂_t u = L(u^m)` up to `t_end`. The step is
/// `min(dt0, 1/(m max|L_ii| max|u|^{m-1}))`; a step that is non-finite or
/// raises `μ̂(u²)` is retried at half size, and halving below
/// [`MIN_STEP`] fails with [`Error::StepUnderflow`].
pub fn evolve(gen: &GeneratorMatrix, f0: &[f64], m: f64, t_end: f64, dt0: f64) -> Result<Trajectory> {
    ensure_len(gen.len(), f0.len())?;
    if !(m > 1.0) {
        return Err(invalid("m", format!("must be > 1, got {m}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must be finite and >= 0, got {t_end}")));
    }
    if !(dt0 > 0.0) {
        return Err(invalid("dt0", format!("must be positive, got {dt0}")));
    }
    if let Some(v) = f0.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("initial datum value {v}")));
    }
    let mu = gen.form.mass_hat();
    let cap = |u: &[f64]| {
        let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let s = m * gen.max_diag * sup.powf(m - 1.0);
        if s > 0.0 {
            1.0 / s
        } else {
            f64::INFINITY
        }
    };
    let mut u = f0.to_vec();
    let (l2, mass, moment) = stats(&u, mu, m);
    let mut traj = Trajectory {
        m,
        times: vec![0.0],
        states: vec![u.clone()],
        l2: vec![l2],
        mass: vec![mass],
        dts: Vec::new(),
        moment: vec![moment],
    };
    let mut t = 0.0;
    let mut dt = dt0.min(cap(&u));
    while t_end - t > 1e-14 * t_end.max(1.0) {
        let step = dt.min(t_end - t);
        let um: Vec<f64> = u.iter().map(|&v| signed_power(v, m)).collect();
        let lu = gen.apply(&um)?;
        let next: Vec<f64> = u.iter().zip(&lu).map(|(v, l)| v + step * l).collect();
        let (l2, mass, moment) = stats(&next, mu, m);
        let energy = *traj.l2.last().unwrap();
        if !l2.is_finite() || l2 > energy {
            dt = 0.5 * step;
            if dt < MIN_STEP {
                return Err(Error::StepUnderflow { t, dt });
            }
            continue;
        }
        t += step;
        u = next;
        traj.times.push(t);
        traj.l2.push(l2);
        traj.mass.push(mass);
        traj.moment.push(moment);
        traj.dts.push(step);
        traj.states.push(u.clone());
        dt = (2.0 * step).min(dt0).min(cap(&u));
    }
    Ok(traj)
}

/// `[E0^{-(m-1)/2} + c⁻¹(m-1)t]^{-2/(m-1)}` with `E0 = μ̂(f0²)`.
pub fn decay_bound(t: f64, m: f64, c: f64, e0: f64) -> Result<f64> {
    if !(m > 1.0) {
        return Err(invalid("m", format!("must be > 1, got {m}")));
    }
    if !(c > 0.0) {
        return Err(invalid("c", format!("must be positive, got {c}")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    if !(e0 >= 0.0) {
        return Err(invalid("E0", format!("must be >= 0, got {e0}")));
    }
    if e0 == 0.0 {
        return Ok(0.0);
    }
    let k = m - 1.0;
    Ok((e0.powf(-0.5 * k) + k * t / c).powf(-2.0 / k))
}

/// Fraction of recorded steps that must satisfy the differential inequality.
pub const DIFFERENTIAL_FRACTION: f64 = 0.99;

/// Checks the trajectory against [`decay_bound`] pointwise and the
/// differential inequality `-ΔE/Δt >= 2c μ̂(|u|^{m+1})` per step.
pub fn check_decay(traj: &Trajectory, form: &DiscreteForm, m: f64, c: f64, tol: f64, tol_d: f64) -> Result<VerificationReport> {
    if m != traj.m {
        return Err(invalid("m", format!("trajectory was computed with m = {}, not {m}", traj.m)));
    }
    if !(c > 0.0) {
        return Err(invalid("c", format!("must be positive, got {c}")));
    }
    let bounds = traj.bounds(c)?;
    let mut report = VerificationReport {
        inequality: "pme_decay".into(),
        grid: GridInfo::of(form),
        constants: BTreeMap::from([("c".to_string(), c), ("m".to_string(), m)]),
        functions: 1,
        worst_ratio: 0.0,
        witness: None,
        pass: true,
        tolerance: tol,
        skipped: Vec::new(),
        notes: Vec::new(),
        ratios: Vec::new(),
    };
    for (k, (&e, &b)) in traj.l2.iter().zip(&bounds).enumerate() {
        let ratio = if b > 0.0 { e / b } else if e == 0.0 { 0.0 } else { f64::INFINITY };
        if ratio > report.worst_ratio || report.witness.is_none() {
            report.worst_ratio = ratio;
            report.witness = Some(format!("t={}", traj.times[k]));
        }
    }
    report.pass = report.worst_ratio <= 1.0 + tol;

    let mut checked = 0usize;
    let mut ok = 0usize;
    let mut literal_ok = 0usize;
    let mut floor = 0usize;
    for k in 0..traj.dts.len() {
        if traj.l2[k] < ENERGY_FLOOR {
            floor += 1;
            continue;
        }
        let slope = -(traj.l2[k + 1] - traj.l2[k]) / traj.dts[k];
        checked += 1;
        if slope >= 2.0 * c * traj.moment[k] * (1.0 - tol_d) {
            ok += 1;
        }
        if slope >= 2.0 / c * traj.moment[k] * (1.0 - tol_d) {
            literal_ok += 1;
        }
    }
    if floor > 0 {
        report.skipped.push(format!("{floor} steps below energy floor {ENERGY_FLOOR:e}"));
    }
    let frac = |x: usize| if checked == 0 { 1.0 } else { x as f64 / checked as f64 };
    report.constants.insert("differential_fraction".into(), frac(ok));
    report.constants.insert("differential_fraction_inverse_c".into(), frac(literal_ok));
    if frac(ok) < DIFFERENTIAL_FRACTION {
        report.pass = false;
        report.notes.push(format!(
            "differential inequality held on {ok}/{checked} steps, below {DIFFERENTIAL_FRACTION}"
        ));
    }
    Ok(report)
}

/// The smaller of an analytic constant and the constant of the assembled
/// form (see [`crate::criteria::form_condition`]), with its source.
pub fn decay_constant(analytic: Option<f64>, form: f64) -> (f64, &'static str) {
    match analytic {
        Some(a) if a > 0.0 && a <= form => (a, "analytic"),
        _ => (form, "form"),
    }
}

/// `D(u, u^m)`, the dissipation of `μ̂(u²)/2`.
pub fn dissipation(form: &DiscreteForm, u: &[f64], m: f64) -> Result<f64> {
    let um: Vec<f64> = u.iter().map(|&v| signed_power(v, m)).collect();
    dirichlet_bilinear(form, u, &um)
}
