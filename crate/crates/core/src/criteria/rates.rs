use serde::Serialize;

use super::{tail_double_mass_continuum, Domain, PairTables, RadialWeight};
use crate::error::{invalid, Error, Result};
use crate::model::{KernelSpec, MeasureFamily, MeasureSpec};

/// Lattice density for infima over continuous parameters.
pub const POINTS_PER_DECADE: usize = 400;
/// Sample count for sup/inf of `e^V` over balls when no monotonicity is known.
const BALL_SAMPLES: usize = 10_000;
/// Split points per pair length for non-convex radial potentials.
const SPLIT_SAMPLES: usize = 64;
/// Bounds of the `t` lattice in the super Poincaré rate.
const T_LATTICE: (f64, f64) = (1e-3, 1e12);

fn log_lattice(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * POINTS_PER_DECADE as f64).ceil().max(1.0) as usize;
    let ratio = (hi / lo).ln() / steps as f64;
    (0..=steps).map(move |k| lo * (ratio * k as f64).exp())
}

/// `inf_{0<|x-y|=h} (e^{V(x)} + e^{V(y)})` in the continuum.
fn pair_potential_min(measure: &MeasureSpec, h: f64) -> Result<f64> {
    if measure.has_convex_radial_potential() {
        return Ok(2.0 * measure.exp_potential(0.5 * h)?);
    }
    match measure.family() {
        MeasureFamily::LogPerturbedTail { .. } => {
            let mut best = f64::INFINITY;
            for k in 0..=SPLIT_SAMPLES {
                let a = 0.5 * h * k as f64 / SPLIT_SAMPLES as f64;
                best = best.min(measure.exp_potential(a)? + measure.exp_potential(h - a)?);
            }
            Ok(best)
        }
        _ => Err(Error::Unsupported(format!(
            "continuum pair infimum not available for {}; use grid mode",
            measure.label()
        ))),
    }
}

/// `inf_{0<|x-y|<=s} (e^{V(x)} + e^{V(y)}) ρ(|x-y|)` on a log lattice of
/// `|x-y|` down to `s·10^{-9}`.
fn restricted_condition(measure: &MeasureSpec, kernel: &KernelSpec, s: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for h in log_lattice(s * 1e-9, s) {
        let h = h.min(s);
        best = best.min(pair_potential_min(measure, h)? * kernel.kernel_value(h)?);
    }
    Ok(best)
}

/// Weak Poincaré rate
/// `α(r) = inf{ 1 / inf_{0<|x-y|<=s} (e^{V(x)}+e^{V(y)})ρ(|x-y|) : μ⊗μ(|x-y|>s) <= r/2 }`.
///
/// Both the tail double mass and the restricted infimum are non-increasing
/// in `s`, so the infimum sits at the smallest feasible `s`, found by
/// bisection in `log s`.
pub fn wp_rate(measure: &MeasureSpec, kernel: &KernelSpec, r: f64, domain: Domain<'_>) -> Result<f64> {
    match domain {
        Domain::Analytic => wp_rate_continuum(measure, kernel, r),
        Domain::Grid(grid) => wp_rate_tables(&PairTables::new(grid, kernel)?, r),
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(invalid("r", format!("must be positive, got {r}")))
    }
}

fn wp_rate_continuum(measure: &MeasureSpec, kernel: &KernelSpec, r: f64) -> Result<f64> {
    check_r(r)?;
    if r >= 2.0 {
        // every s is feasible; the restricted infimum blows up as s → 0
        return Ok(0.0);
    }
    let target = 0.5 * r;
    let tail = |ls: f64| tail_double_mass_continuum(measure, ls.exp());
    let mut lo = (1e-12f64).ln();
    if tail(lo)? <= target {
        return Ok(1.0 / restricted_condition(measure, kernel, lo.exp())?);
    }
    let mut hi = 0.0;
    let mut t_hi = tail(hi)?;
    while t_hi > target {
        lo = hi;
        hi += 2.0;
        if hi > 460.0 {
            return Err(Error::Infeasible(format!(
                "tail double mass stays above r/2 = {target:e}; smallest value {t_hi:e} at s = {:e}",
                hi.exp()
            )));
        }
        t_hi = tail(hi)?;
    }
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if tail(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(1.0 / restricted_condition(measure, kernel, hi.exp())?)
}

fn wp_rate_tables(tables: &PairTables, r: f64) -> Result<f64> {
    check_r(r)?;
    let target = 0.5 * r;
    let diameter = tables.diameter();
    if tables.tail_double_mass(diameter) > target {
        return Err(Error::Infeasible(format!(
            "no s within the grid diameter; smallest tail double mass {:e}",
            tables.tail_double_mass(diameter)
        )));
    }
    let (mut lo, mut hi) = (0.0, diameter);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tables.tail_double_mass(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (c, _) = tables.restricted_min(hi);
    Ok(if c.is_finite() { 1.0 / c } else { 0.0 })
}

/// `(sup_{|z|<=2r} e^V, inf_{|z|<=r} e^V)`.
fn ball_potential_extrema(measure: &MeasureSpec, r: f64) -> Result<(f64, f64)> {
    if measure.has_convex_radial_potential() {
        return Ok((measure.exp_potential(2.0 * r)?, measure.exp_potential(0.0)?));
    }
    let mut sup = 0.0f64;
    let mut inf = f64::INFINITY;
    for k in 0..BALL_SAMPLES {
        let u = -1.0 + 2.0 * k as f64 / (BALL_SAMPLES - 1) as f64;
        sup = sup.max(measure.exp_potential(2.0 * r * u)?);
        inf = inf.min(measure.exp_potential(r * u)?);
    }
    Ok((sup, inf))
}

/// Local super Poincaré rate on the ball of radius `r` (d = 1, `|B(0,t)| = 2t`):
/// `β_r(s) = inf{ 2 S² / (2t I) : 2 σ(t) S / (2t I) <= s }` with
/// `S = sup_{|z|<=2r} e^V`, `I = inf_{|z|<=r} e^V`, `σ(t) = sup_{0<ε<=t} 1/ρ(ε)`.
///
/// The objective decreases in `t`, so the infimum is at the largest feasible
/// `t`: bisection for stable and tempered kernels, where `σ(t)/t` is
/// increasing, and a log lattice otherwise.
pub fn local_sp_beta(measure: &MeasureSpec, kernel: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    if !kernel.is_radial() {
        return Err(Error::Unsupported("local super Poincaré rate needs a radial kernel".into()));
    }
    let (sup, inf) = ball_potential_extrema(measure, r)?;
    if !sup.is_finite() {
        return Err(Error::Infeasible(format!(
            "e^V is unbounded on the ball of radius {}",
            2.0 * r
        )));
    }
    let lhs = |t: f64| -> Result<f64> { Ok(kernel.inverse_sup(t)? * sup / (t * inf)) };
    let t_star = match kernel {
        KernelSpec::Stable { .. } | KernelSpec::Tempered { .. } => {
            let (mut lo, mut hi) = (1e-300f64.ln(), 0.0f64);
            if lhs(lo.exp())? > s {
                return Err(Error::Infeasible(format!("constraint infeasible at s = {s:e}")));
            }
            while lhs(hi.exp())? <= s {
                lo = hi;
                hi += 8.0;
                if hi > 700.0 {
                    return Err(Error::Infeasible(format!("constraint never binds at s = {s:e}")));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if lhs(mid.exp())? <= s {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo.exp()
        }
        _ => {
            // σ is a running maximum of 1/ρ along the lattice
            let mut sigma = 0.0f64;
            let mut best = None;
            for t in log_lattice(1e-12, 1e12) {
                sigma = sigma.max(kernel.inverse_sup(t)?);
                if sigma * sup / (t * inf) <= s {
                    best = Some(t);
                }
            }
            best.ok_or_else(|| Error::Infeasible(format!("constraint infeasible at s = {s:e}")))?
        }
    };
    Ok(sup * sup / (t_star * inf))
}

/// Super Poincaré rate
/// `β(r) = inf{ 2μ_V(w)/inf_{|x|>=t} w + β_t(t ∧ s) : 2/inf_{|x|>=t} w + s <= r }`,
/// with `β_t` from [`local_sp_beta`]. For each `t` on a log lattice the
/// largest admissible `s` is used, since `β_t` is non-increasing in `s`.
pub fn sp_beta(
    measure: &MeasureSpec,
    kernel: &KernelSpec,
    weight: &RadialWeight,
    weight_mean: f64,
    r: f64,
) -> Result<f64> {
    check_r(r)?;
    if !weight.is_coercive() {
        return Err(invalid("w", "weight must be coercive"));
    }
    let mut best = f64::INFINITY;
    for t in log_lattice(T_LATTICE.0, T_LATTICE.1) {
        let wt = weight.inf_outside(t);
        let s_max = r - 2.0 / wt;
        if s_max <= 0.0 {
            continue;
        }
        let value = 2.0 * weight_mean / wt + local_sp_beta(measure, kernel, t, t.min(s_max))?;
        best = best.min(value);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Infeasible(format!(
            "r = {r:e} is below 2 / sup_t inf_(|x|>=t) w on the t lattice"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    WeakPoincare,
    SuperPoincare,
    LocalSuperPoincare { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMetadata {
    pub kind: RateKind,
    pub statement: String,
    pub measure: String,
    pub kernel: String,
    pub d: u32,
    pub alpha_stab: Option<f64>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub domain: String,
    pub points_per_decade: usize,
    pub weight: Option<RadialWeight>,
    pub weight_mean: Option<f64>,
    pub notes: Vec<String>,
}

/// A rate function together with what it was computed from.
#[derive(Debug, Clone)]
pub struct RateFunction {
    measure: MeasureSpec,
    kernel: KernelSpec,
    weight: Option<RadialWeight>,
    weight_mean: f64,
    tables: Option<PairTables>,
    metadata: RateMetadata,
}

impl RateFunction {
    fn base(measure: &MeasureSpec, kernel: &KernelSpec, kind: RateKind, statement: &str) -> RateMetadata {
        let (mut eps, mut lambda) = (None, None);
        match measure.family() {
            MeasureFamily::PolynomialTail { eps: e, .. } | MeasureFamily::LogPerturbedTail { eps: e, .. } => {
                eps = Some(*e)
            }
            MeasureFamily::Exponential { lambda: l, .. } => lambda = Some(*l),
            MeasureFamily::Custom { .. } => {}
        }
        let delta = match kernel {
            KernelSpec::Tempered { delta, .. } => Some(*delta),
            _ => None,
        };
        RateMetadata {
            kind,
            statement: statement.into(),
            measure: measure.label(),
            kernel: kernel.label(),
            d: measure.dimension(),
            alpha_stab: kernel.alpha_stab(),
            eps,
            lambda,
            delta,
            domain: "continuum".into(),
            points_per_decade: POINTS_PER_DECADE,
            weight: None,
            weight_mean: None,
            notes: Vec::new(),
        }
    }

    /// `α(r)`, in the continuum or on a grid.
    pub fn weak_poincare(measure: &MeasureSpec, kernel: &KernelSpec, domain: Domain<'_>) -> Result<Self> {
        let mut metadata = Self::base(
            measure,
            kernel,
            RateKind::WeakPoincare,
            "Var(f) <= alpha(r) D(f,f) + r |f|_inf^2",
        );
        let tables = match domain {
            Domain::Analytic => None,
            Domain::Grid(g) => {
                metadata.domain = format!("grid(R={}, n={})", g.radius(), g.len());
                Some(PairTables::new(g, kernel)?)
            }
        };
        Ok(Self {
            measure: measure.clone(),
            kernel: kernel.clone(),
            weight: None,
            weight_mean: 0.0,
            tables,
            metadata,
        })
    }

    /// `β(r)` for a coercive weight; `μ_V(w)` is computed by quadrature.
    pub fn super_poincare(measure: &MeasureSpec, kernel: &KernelSpec, weight: RadialWeight) -> Result<Self> {
        if !weight.is_coercive() {
            return Err(invalid("w", "weight must be coercive"));
        }
        let weight_mean = measure.expectation(|x| weight.eval(x))?;
        let mut metadata = Self::base(
            measure,
            kernel,
            RateKind::SuperPoincare,
            "mu(f^2) <= r D(f,f) + beta(r) mu(|f|)^2",
        );
        metadata.weight = Some(weight);
        metadata.weight_mean = Some(weight_mean);
        metadata.notes.push(
            "beta_t is the local rate on balls with |B(0,t)| = 2t, i.e. c0 := 2/|B(0,1)| = 1 in d = 1".into(),
        );
        Ok(Self {
            measure: measure.clone(),
            kernel: kernel.clone(),
            weight: Some(weight),
            weight_mean,
            tables: None,
            metadata,
        })
    }

    /// `s ↦ β_r(s)` at a fixed ball radius.
    pub fn local_super_poincare(measure: &MeasureSpec, kernel: &KernelSpec, radius: f64) -> Result<Self> {
        check_r(radius)?;
        let mut metadata = Self::base(
            measure,
            kernel,
            RateKind::LocalSuperPoincare { radius },
            "int_B f^2 dmu <= s D(f,f) + beta_r(s) (int |f| dmu)^2 on B(0,r)",
        );
        metadata.notes.push("|B(0,t)| = 2t (d = 1)".into());
        Ok(Self {
            measure: measure.clone(),
            kernel: kernel.clone(),
            weight: None,
            weight_mean: 0.0,
            tables: None,
            metadata,
        })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        match self.metadata.kind {
            RateKind::WeakPoincare => match &self.tables {
                Some(t) => wp_rate_tables(t, r),
                None => wp_rate_continuum(&self.measure, &self.kernel, r),
            },
            RateKind::SuperPoincare => {
                let w = self.weight.as_ref().ok_or_else(|| Error::Internal("missing weight".into()))?;
                sp_beta(&self.measure, &self.kernel, w, self.weight_mean, r)
            }
            RateKind::LocalSuperPoincare { radius } => local_sp_beta(&self.measure, &self.kernel, radius, r),
        }
    }

    pub fn metadata(&self) -> &RateMetadata {
        &self.metadata
    }

    pub fn kind(&self) -> RateKind {
        self.metadata.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{loglog_slope, example_weight};
    use crate::quad::build_grid;
    use approx::assert_relative_eq;

    fn poly(eps: f64) -> MeasureSpec {
        MeasureSpec::polynomial_tail(eps).unwrap().normalize(1e-10).unwrap()
    }

    #[test]
    fn local_rate_matches_stable_closed_form() {
        let m = poly(1.0);
        let k = KernelSpec::stable(0.5).unwrap();
        let (r, a) = (1.0, 0.5);
        // S = e^{V(2r)} = (1+2r)^2 / C, I = e^{V(0)} = 1/C
        let (sup, inf) = ((1.0f64 + 2.0 * r).powi(2) / 0.5, 1.0 / 0.5);
        for s in [1e-3, 0.1, 1.0, 30.0] {
            let t = (s * inf / sup).powf(1.0 / a);
            let expected = sup * sup / (t * inf);
            assert_relative_eq!(local_sp_beta(&m, &k, r, s).unwrap(), expected, max_relative = 1e-9);
        }
        let pts: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&s| (s, local_sp_beta(&m, &k, r, s).unwrap()))
            .collect();
        assert_relative_eq!(loglog_slope(&pts), -2.0, max_relative = 1e-9);
    }

    #[test]
    fn local_rate_custom_kernel_agrees_with_bisection() {
        let m = poly(1.0);
        let stable = KernelSpec::stable(0.5).unwrap();
        let custom = KernelSpec::custom_radial("r^-1.5", |r: f64| r.powf(-1.5));
        for s in [1e-2, 1.0] {
            let a = local_sp_beta(&m, &stable, 1.0, s).unwrap();
            let b = local_sp_beta(&m, &custom, 1.0, s).unwrap();
            // lattice spacing is 10^{1/400}
            assert!(b >= a && b <= a * 1.006, "{a} {b}");
        }
        let bounded = KernelSpec::custom_radial("1/(1+r)^3", |r: f64| (1.0 + r).powi(-3));
        assert!(matches!(local_sp_beta(&m, &bounded, 1.0, 1e-3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn weak_rate_grid_mode_is_monotone() {
        let m = poly(0.3);
        let k = KernelSpec::stable(0.5).unwrap();
        let g = build_grid(&m, 50.0, 400).unwrap();
        let rate = RateFunction::weak_poincare(&m, &k, Domain::Grid(&g)).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let r = 1e-3 * 1.2f64.powi(i);
            let v = rate.eval(r).unwrap();
            assert!(v <= prev && v.is_finite());
            prev = v;
        }
    }

    #[test]
    fn weak_rate_large_r() {
        let m = poly(0.3);
        let k = KernelSpec::stable(0.5).unwrap();
        assert_eq!(wp_rate(&m, &k, 2.5, Domain::Analytic).unwrap(), 0.0);
        assert!(wp_rate(&m, &k, 0.0, Domain::Analytic).is_err());
        let v = wp_rate(&m, &k, 1.5, Domain::Analytic).unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    #[test]
    fn super_rate_is_monotone_and_bounded_below() {
        let m = poly(1.5);
        let k = KernelSpec::stable(0.5).unwrap();
        let w = example_weight(&m, &k).unwrap();
        let rate = RateFunction::super_poincare(&m, &k, w).unwrap();
        // μ_V(w) = scale · 2C/α in closed form
        assert_relative_eq!(rate.metadata().weight_mean.unwrap(), w.scale * 2.0 * 0.75 / 0.5, max_relative = 1e-8);
        let mut prev = f64::INFINITY;
        for r in [0.05, 0.1, 1.0, 10.0, 1e3] {
            let v = rate.eval(r).unwrap();
            assert!(v <= prev && v >= 1.0);
            prev = v;
        }
        assert!(matches!(rate.eval(1e-13), Err(Error::Infeasible(_))));
    }
}
