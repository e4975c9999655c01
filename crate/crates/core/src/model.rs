//! Probability measures `μ_V(dx) = e^{-V(x)} dx` and jump kernels `ρ`, `j`.
//!
//! Numeric paths (normalization, grids) only accept dimension 1; the
//! dimension is still carried so that closed-form rate exponents can be
//! evaluated for general `d`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::quad::adaptive::{integrate, integrate_to_infinity, Tolerance};

pub type Potential = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Tail bound targeted when a quadrature interval has to be truncated.
const TAIL_BOUND: f64 = 1e-9;

#[derive(Clone)]
pub enum MeasureFamily {
    /// `C (1+|x|)^{-(d+ε)}`
    PolynomialTail { d: u32, eps: f64 },
    /// `C (1+|x|)^{-(d+α)} log^ε(e+|x|)`
    LogPerturbedTail { d: u32, alpha_stab: f64, eps: f64 },
    /// `C e^{-λ|x|}`
    Exponential { d: u32, lambda: f64 },
    /// `C e^{-V(x)}` on `|x| <= half_width` (which may be infinite).
    Custom {
        d: u32,
        label: String,
        half_width: f64,
        potential: Potential,
    },
}

impl fmt::Debug for MeasureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PolynomialTail { d, eps } => write!(f, "PolynomialTail(d={d}, eps={eps})"),
            Self::LogPerturbedTail { d, alpha_stab, eps } => {
                write!(f, "LogPerturbedTail(d={d}, alpha={alpha_stab}, eps={eps})")
            }
            Self::Exponential { d, lambda } => write!(f, "Exponential(d={d}, lambda={lambda})"),
            Self::Custom {
                d,
                label,
                half_width,
                ..
            } => write!(f, "Custom({label}, d={d}, half_width={half_width})"),
        }
    }
}

/// A probability measure `e^{-V(x)} dx`, with its normalization constant
/// cached once computed.
#[derive(Clone, Debug)]
pub struct MeasureSpec {
    family: MeasureFamily,
    normalization: Option<f64>,
}

impl MeasureSpec {
    pub fn new(family: MeasureFamily) -> Result<Self> {
        let spec = Self {
            family,
            normalization: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial_tail(eps: f64) -> Result<Self> {
        Self::new(MeasureFamily::PolynomialTail { d: 1, eps })
    }

    pub fn log_perturbed_tail(alpha_stab: f64, eps: f64) -> Result<Self> {
        Self::new(MeasureFamily::LogPerturbedTail {
            d: 1,
            alpha_stab,
            eps,
        })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        Self::new(MeasureFamily::Exponential { d: 1, lambda })
    }

    pub fn custom(
        label: impl Into<String>,
        half_width: f64,
        potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(MeasureFamily::Custom {
            d: 1,
            label: label.into(),
            half_width,
            potential: Arc::new(potential),
        })
    }

    /// Normalizes in one step with the default tolerance.
    pub fn normalized(family: MeasureFamily) -> Result<Self> {
        Self::new(family)?.normalize(1e-10)
    }

    fn validate(&self) -> Result<()> {
        match &self.family {
            MeasureFamily::PolynomialTail { eps, .. } => {
                if !(eps.is_finite() && *eps > 0.0) {
                    return Err(Error::NonIntegrable(format!(
                        "polynomial tail needs eps > 0, got {eps}"
                    )));
                }
            }
            MeasureFamily::LogPerturbedTail {
                alpha_stab, eps, ..
            } => {
                if !(*alpha_stab > 0.0 && *alpha_stab < 2.0) {
                    return Err(invalid("alpha", format!("alpha out of (0,2): {alpha_stab}")));
                }
                if !eps.is_finite() {
                    return Err(invalid("eps", "must be finite"));
                }
            }
            MeasureFamily::Exponential { lambda, .. } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
                }
            }
            MeasureFamily::Custom { half_width, .. } => {
                if !(*half_width > 0.0) {
                    return Err(invalid("half_width", "must be > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.family
    }

    pub fn dimension(&self) -> u32 {
        match &self.family {
            MeasureFamily::PolynomialTail { d, .. }
            | MeasureFamily::LogPerturbedTail { d, .. }
            | MeasureFamily::Exponential { d, .. }
            | MeasureFamily::Custom { d, .. } => *d,
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            MeasureFamily::PolynomialTail { eps, .. } => format!("polynomial_tail(eps={eps})"),
            MeasureFamily::LogPerturbedTail {
                alpha_stab, eps, ..
            } => format!("log_perturbed_tail(alpha={alpha_stab},eps={eps})"),
            MeasureFamily::Exponential { lambda, .. } => format!("exponential(lambda={lambda})"),
            MeasureFamily::Custom { label, .. } => format!("custom({label})"),
        }
    }

    /// Finite support half-width, if any.
    pub fn support_half_width(&self) -> Option<f64> {
        match &self.family {
            MeasureFamily::Custom { half_width, .. } if half_width.is_finite() => Some(*half_width),
            _ => None,
        }
    }

    /// `e^{-V}` and its radial profile are non-increasing in `|x|` and `e^{V}`
    /// is convex, so extrema over balls sit at the center or the boundary
    /// and `e^{V(x)} + e^{V(y)}` at fixed `|x-y|` is smallest at `x = -y`.
    pub fn has_convex_radial_potential(&self) -> bool {
        matches!(
            self.family,
            MeasureFamily::PolynomialTail { .. } | MeasureFamily::Exponential { .. }
        )
    }

    pub fn unnormalized_density(&self, x: f64) -> f64 {
        let r = x.abs();
        match &self.family {
            MeasureFamily::PolynomialTail { d, eps } => (1.0 + r).powf(-(*d as f64 + eps)),
            MeasureFamily::LogPerturbedTail { d, alpha_stab, eps } => {
                (1.0 + r).powf(-(*d as f64 + alpha_stab)) * (std::f64::consts::E + r).ln().powf(*eps)
            }
            MeasureFamily::Exponential { lambda, .. } => (-lambda * r).exp(),
            MeasureFamily::Custom {
                half_width,
                potential,
                ..
            } => {
                if r <= *half_width {
                    (-potential(x)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn require_numeric_dimension(&self) -> Result<()> {
        if self.dimension() == 1 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "numeric paths support d = 1 only (got d = {})",
                self.dimension()
            )))
        }
    }

    /// The constant `C` with `∫ C e^{-V} = 1`.
    pub fn normalization_constant(&self, tol: f64) -> Result<f64> {
        self.require_numeric_dimension()?;
        let quad_tol = Tolerance::new(0.1 * tol.min(TAIL_BOUND), 1e-12);
        let mass = match &self.family {
            MeasureFamily::PolynomialTail { eps, .. } => return Ok(eps / 2.0),
            MeasureFamily::Exponential { lambda, .. } => return Ok(lambda / 2.0),
            MeasureFamily::LogPerturbedTail {
                alpha_stab, eps, ..
            } => 2.0 * log_perturbed_half_mass(*alpha_stab, *eps, quad_tol)?,
            MeasureFamily::Custom { half_width, .. } => {
                let f = |x: f64| self.unnormalized_density(x);
                if half_width.is_finite() {
                    integrate(f, -half_width, *half_width, quad_tol)?.value
                } else {
                    integrate_to_infinity(f, 0.0, quad_tol)?.value
                        + integrate_to_infinity(|x| f(-x), 0.0, quad_tol)?.value
                }
            }
        };
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NonIntegrable(format!(
                "unnormalized mass of {} is {mass}",
                self.label()
            )));
        }
        Ok(1.0 / mass)
    }

    pub fn normalize(mut self, tol: f64) -> Result<Self> {
        let c = self.normalization_constant(tol)?;
        self.normalization = Some(c);
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn require_normalized(&self) -> Result<()> {
        self.normalization().map(|_| ())
    }

    pub fn normalization(&self) -> Result<f64> {
        self.normalization.ok_or(Error::NotNormalized)
    }

    /// `e^{-V(x)}` of the normalized measure.
    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.normalization()? * self.unnormalized_density(x))
    }

    /// `e^{V(x)}`; infinite outside a finite support.
    pub fn exp_potential(&self, x: f64) -> Result<f64> {
        let d = self.density(x)?;
        Ok(if d > 0.0 { 1.0 / d } else { f64::INFINITY })
    }

    /// `P(X > y)`.
    pub fn survival(&self, y: f64) -> Result<f64> {
        let c = self.normalization()?;
        let tol = Tolerance::new(1e-15, 1e-11);
        match &self.family {
            MeasureFamily::PolynomialTail { eps, .. } => Ok(if y >= 0.0 {
                0.5 * (1.0 + y).powf(-eps)
            } else {
                1.0 - 0.5 * (1.0 - y).powf(-eps)
            }),
            MeasureFamily::Exponential { lambda, .. } => Ok(if y >= 0.0 {
                0.5 * (-lambda * y).exp()
            } else {
                1.0 - 0.5 * (lambda * y).exp()
            }),
            MeasureFamily::LogPerturbedTail { .. } => {
                let upper = |t: f64| -> Result<f64> {
                    Ok(c * integrate_to_infinity(|x| self.unnormalized_density(x), t, tol)?.value)
                };
                if y >= 0.0 {
                    upper(y)
                } else {
                    Ok(1.0 - upper(-y)?)
                }
            }
            MeasureFamily::Custom { half_width, .. } => {
                let f = |x: f64| self.unnormalized_density(x);
                if half_width.is_finite() {
                    if y >= *half_width {
                        return Ok(0.0);
                    }
                    let lo = y.max(-half_width);
                    Ok(c * integrate(f, lo, *half_width, tol)?.value)
                } else if y >= 0.0 {
                    Ok(c * integrate_to_infinity(f, y, tol)?.value)
                } else {
                    let head = integrate(f, y, 0.0, tol)?.value;
                    Ok(c * (head + integrate_to_infinity(f, 0.0, tol)?.value))
                }
            }
        }
    }

    /// Mass outside `[-radius, radius]`.
    pub fn tail_mass(&self, radius: f64) -> Result<f64> {
        let c = self.normalization()?;
        match &self.family {
            MeasureFamily::PolynomialTail { eps, .. } => Ok((1.0 + radius).powf(-eps)),
            MeasureFamily::Exponential { lambda, .. } => Ok((-lambda * radius).exp()),
            MeasureFamily::LogPerturbedTail { .. } => Ok(2.0 * self.survival(radius)?),
            MeasureFamily::Custom { .. } => {
                let inside = integrate(
                    |x| self.unnormalized_density(x),
                    -radius,
                    radius,
                    Tolerance::new(1e-15, 1e-12),
                )?
                .value;
                Ok((1.0 - c * inside).max(0.0))
            }
        }
    }

    /// `∫ g dμ_V` over the whole line.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let c = self.normalization()?;
        let tol = Tolerance::new(1e-14, 1e-11);
        let f = |x: f64| {
            let d = self.unnormalized_density(x);
            if d == 0.0 {
                0.0
            } else {
                g(x) * d
            }
        };
        let total = match self.support_half_width() {
            Some(h) => integrate(f, -h, h, tol)?.value,
            None => {
                integrate_to_infinity(f, 0.0, tol)?.value
                    + integrate_to_infinity(|x| f(-x), 0.0, tol)?.value
            }
        };
        Ok(c * total)
    }
}

/// `∫_0^∞ (1+x)^{-(1+α)} log^ε(e+x) dx` via `x = e^u - 1`, truncated at the
/// first `U` whose analytic tail bound falls below the quadrature tolerance.
fn log_perturbed_half_mass(alpha: f64, eps: f64, tol: Tolerance) -> Result<f64> {
    // In u the integrand is e^{-αu} log^ε(e + e^u - 1), and 1 <= log(e+e^u-1) <= u+1.
    let g = |u: f64| (-alpha * u).exp() * (std::f64::consts::E + u.exp_m1()).ln().powf(eps);
    let tail_bound = |u_max: f64| {
        if eps <= 0.0 {
            (-alpha * u_max).exp() / alpha
        } else {
            let rate = alpha - eps / (u_max + 1.0);
            if rate <= 0.0 {
                f64::INFINITY
            } else {
                (u_max + 1.0).powf(eps) * (-alpha * u_max).exp() / rate
            }
        }
    };
    let target = tol.abs.min(TAIL_BOUND);
    let mut u_max = 8.0;
    while tail_bound(u_max) > target {
        u_max *= 1.5;
        if u_max > 1e5 {
            return Err(Error::NonIntegrable(
                "log-perturbed tail bound does not close".into(),
            ));
        }
    }
    Ok(integrate(g, 0.0, u_max, tol)?.value)
}

#[derive(Clone)]
pub enum KernelSpec {
    /// `ρ(r) = r^{-(d+α)}`
    Stable { d: u32, alpha_stab: f64 },
    /// `ρ(r) = e^{-δr} r^{-(d+α)}`
    Tempered { d: u32, alpha_stab: f64, delta: f64 },
    /// Radial, strictly positive and non-increasing on `(0, ∞)`.
    CustomRadial { label: String, rho: RadialFn },
    /// `j(x, y) = j(y, x) > 0` for `x != y`.
    GeneralSymmetric { label: String, j: PairFn },
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integrability {
    pub finite: bool,
    pub diagnostic: String,
}

impl KernelSpec {
    pub fn stable(alpha_stab: f64) -> Result<Self> {
        let k = Self::Stable { d: 1, alpha_stab };
        k.validate()?;
        Ok(k)
    }

    pub fn tempered(alpha_stab: f64, delta: f64) -> Result<Self> {
        let k = Self::Tempered {
            d: 1,
            alpha_stab,
            delta,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn custom_radial(
        label: impl Into<String>,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::CustomRadial {
            label: label.into(),
            rho: Arc::new(rho),
        }
    }

    pub fn general_symmetric(
        label: impl Into<String>,
        j: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::GeneralSymmetric {
            label: label.into(),
            j: Arc::new(j),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Stable { alpha_stab, .. } | Self::Tempered { alpha_stab, .. }
                if !(alpha_stab.is_finite() && *alpha_stab > 0.0) => {
                    return Err(invalid("alpha", format!("must be > 0, got {alpha_stab}")));
                }
            _ => {}
        }
        if let Self::Tempered { delta, .. } = self {
            if !(delta.is_finite() && *delta >= 0.0) {
                return Err(invalid("delta", format!("must be >= 0, got {delta}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Self::Stable { alpha_stab, .. } => format!("stable(alpha={alpha_stab})"),
            Self::Tempered {
                alpha_stab, delta, ..
            } => format!("tempered(alpha={alpha_stab},delta={delta})"),
            Self::CustomRadial { label, .. } => format!("custom_radial({label})"),
            Self::GeneralSymmetric { label, .. } => format!("general_symmetric({label})"),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, Self::GeneralSymmetric { .. })
    }

    /// Stable exponent `α`, when the kernel has one.
    pub fn alpha_stab(&self) -> Option<f64> {
        match self {
            Self::Stable { alpha_stab, .. } | Self::Tempered { alpha_stab, .. } => {
                Some(*alpha_stab)
            }
            _ => None,
        }
    }

    /// `ρ(r)` for radial kernels.
    pub fn kernel_value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("r", format!("kernel is singular or undefined at r = {r}")));
        }
        self.radial_unchecked(r)
    }

    fn radial_unchecked(&self, r: f64) -> Result<f64> {
        match self {
            Self::Stable { d, alpha_stab } => Ok(r.powf(-(*d as f64 + alpha_stab))),
            Self::Tempered {
                d,
                alpha_stab,
                delta,
            } => Ok((-delta * r).exp() * r.powf(-(*d as f64 + alpha_stab))),
            Self::CustomRadial { rho, .. } => Ok(rho(r)),
            Self::GeneralSymmetric { .. } => Err(Error::Unsupported(
                "kernel_value requires a radial kernel".into(),
            )),
        }
    }

    /// `ρ(|x-y|)` or `j(x, y)`.
    pub fn pair_value(&self, x: f64, y: f64) -> Result<f64> {
        if x == y {
            return Err(invalid("pair", format!("kernel undefined on the diagonal x = y = {x}")));
        }
        match self {
            Self::GeneralSymmetric { j, .. } => Ok(j(x, y)),
            _ => self.radial_unchecked((x - y).abs()),
        }
    }

    /// `sup_{0<r<=t} ρ(r)^{-1}`; equals `1/ρ(t)` for the non-increasing
    /// radial kernels accepted here.
    pub fn inverse_sup(&self, t: f64) -> Result<f64> {
        Ok(1.0 / self.kernel_value(t)?)
    }

    /// Whether `∫_0^∞ ρ(r)(1∧r²) r^{d-1} dr < ∞`.
    pub fn integrability_check(&self) -> Result<Integrability> {
        match self {
            Self::Stable { alpha_stab, .. } => {
                let finite = *alpha_stab > 0.0 && *alpha_stab < 2.0;
                Ok(Integrability {
                    finite,
                    diagnostic: format!(
                        "stable kernel: near-zero part finite iff alpha < 2, far part iff alpha > 0 (alpha = {alpha_stab})"
                    ),
                })
            }
            Self::Tempered {
                alpha_stab, delta, ..
            } => {
                let finite = *alpha_stab < 2.0 && (*delta > 0.0 || *alpha_stab > 0.0);
                Ok(Integrability {
                    finite,
                    diagnostic: format!(
                        "tempered kernel: near-zero part finite iff alpha < 2 (alpha = {alpha_stab}, delta = {delta})"
                    ),
                })
            }
            Self::CustomRadial { rho, .. } => Ok(numeric_integrability(|r| rho(r))),
            Self::GeneralSymmetric { .. } => Err(Error::Unsupported("radial check only".into())),
        }
    }

    /// Samples `pairs` random pairs in `[-range, range]^2` and checks
    /// `j(x,y) = j(y,x) > 0` exactly.
    pub fn check_symmetry(&self, pairs: usize, range: f64, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let x = rng.random_range(-range..range);
            let y = rng.random_range(-range..range);
            if x == y {
                continue;
            }
            let a = self.pair_value(x, y)?;
            let b = self.pair_value(y, x)?;
            if a != b {
                return Err(Error::InvalidParameter {
                    name: "kernel",
                    reason: format!("not symmetric at ({x}, {y}): {a} vs {b}"),
                });
            }
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "kernel",
                    reason: format!("not strictly positive and finite at ({x}, {y}): {a}"),
                });
            }
        }
        Ok(())
    }
}

/// Dyadic-shell test for `∫_0^1 ρ r² dr` and `∫_1^∞ ρ dr` (d = 1): the
/// integral is declared finite iff the ratio of consecutive shell integrals
/// settles strictly below one on both ends.
fn numeric_integrability(rho: impl Fn(f64) -> f64) -> Integrability {
    const SHELLS: i32 = 60;
    const WINDOW: usize = 10;
    let tol = Tolerance::new(0.0, 1e-10);
    let shell = |lo: f64, hi: f64, near: bool| {
        integrate(
            |r| {
                let w = if near { r * r } else { 1.0 };
                rho(r) * w
            },
            lo,
            hi,
            tol,
        )
        .map(|i| i.value)
    };
    let mut near = Vec::with_capacity(SHELLS as usize);
    let mut far = Vec::with_capacity(SHELLS as usize);
    for k in 0..SHELLS {
        let hi = 2f64.powi(-k);
        let lo = 2f64.powi(-k - 1);
        let a = 2f64.powi(k);
        match (shell(lo, hi, true), shell(a, 2.0 * a, false)) {
            (Ok(n), Ok(f)) => {
                near.push(n);
                far.push(f);
            }
            (Err(e), _) | (_, Err(e)) => {
                return Integrability {
                    finite: false,
                    diagnostic: format!("shell {k} not evaluable: {e}"),
                }
            }
        }
    }
    let worst_ratio = |shells: &[f64]| {
        shells[shells.len() - WINDOW - 1..]
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0f64, f64::max)
    };
    let near_ratio = worst_ratio(&near);
    let far_ratio = worst_ratio(&far);
    let finite = near_ratio < 0.999 && far_ratio < 0.999;
    Integrability {
        finite,
        diagnostic: format!(
            "dyadic shell ratios: near zero {near_ratio:.4}, at infinity {far_ratio:.4} (finite iff both < 1); partial sums {:.6e} / {:.6e}",
            near.iter().sum::<f64>(),
            far.iter().sum::<f64>()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_constants() {
        let m = MeasureSpec::polynomial_tail(1.0).unwrap().normalize(1e-10).unwrap();
        assert_eq!(m.normalization().unwrap(), 0.5);
        assert_eq!(m.density(0.0).unwrap(), 0.5);
        let m = MeasureSpec::exponential(2.0).unwrap().normalize(1e-10).unwrap();
        assert_eq!(m.density(0.0).unwrap(), 1.0);
    }

    #[test]
    fn density_needs_normalization() {
        let m = MeasureSpec::polynomial_tail(1.0).unwrap();
        assert_eq!(m.density(0.0), Err(Error::NotNormalized));
    }

    #[test]
    fn non_integrable_polynomial_tail() {
        assert!(matches!(
            MeasureSpec::polynomial_tail(0.0),
            Err(Error::NonIntegrable(_))
        ));
        assert!(MeasureSpec::polynomial_tail(-1.0).is_err());
    }

    #[test]
    fn uniform_custom_measure() {
        let m = MeasureSpec::custom("uniform", 1.0, |_| 2f64.ln())
            .unwrap()
            .normalize(1e-10)
            .unwrap();
        assert_relative_eq!(m.normalization().unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(m.density(0.3).unwrap(), 0.5, max_relative = 1e-10);
        assert_eq!(m.density(1.5).unwrap(), 0.0);
        assert_eq!(m.exp_potential(1.5).unwrap(), f64::INFINITY);
    }

    #[test]
    fn symmetric_families_are_even() {
        for m in [
            MeasureSpec::polynomial_tail(0.7).unwrap(),
            MeasureSpec::exponential(1.3).unwrap(),
            MeasureSpec::log_perturbed_tail(0.5, -1.0).unwrap(),
        ] {
            let m = m.normalize(1e-10).unwrap();
            for x in [0.1, 1.0, 7.5, 123.0] {
                assert_eq!(m.density(x).unwrap(), m.density(-x).unwrap());
            }
        }
    }

    #[test]
    fn survival_matches_tail_mass() {
        for m in [
            MeasureSpec::polynomial_tail(1.0).unwrap(),
            MeasureSpec::exponential(2.0).unwrap(),
            MeasureSpec::log_perturbed_tail(0.5, 1.0).unwrap(),
        ] {
            let m = m.normalize(1e-10).unwrap();
            assert_relative_eq!(m.survival(0.0).unwrap(), 0.5, max_relative = 1e-8);
            let tail = m.tail_mass(3.0).unwrap();
            assert_relative_eq!(
                m.survival(3.0).unwrap() + 1.0 - m.survival(-3.0).unwrap(),
                tail,
                max_relative = 1e-8
            );
        }
        let m = MeasureSpec::polynomial_tail(1.0).unwrap().normalize(1e-10).unwrap();
        assert_relative_eq!(m.tail_mass(10.0).unwrap(), 1.0 / 11.0, max_relative = 1e-14);
    }

    #[test]
    fn kernel_values() {
        let k = KernelSpec::stable(0.5).unwrap();
        assert_eq!(k.kernel_value(1.0).unwrap(), 1.0);
        assert_relative_eq!(k.kernel_value(2.0).unwrap(), 0.353_553_390_593_273_8, max_relative = 1e-14);
        let t = KernelSpec::tempered(0.5, 1.0).unwrap();
        assert_relative_eq!(t.kernel_value(1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert!(k.kernel_value(0.0).is_err());
        assert!(k.kernel_value(-1.0).is_err());
    }

    #[test]
    fn kernel_is_non_increasing() {
        for k in [
            KernelSpec::stable(0.25).unwrap(),
            KernelSpec::stable(1.9).unwrap(),
            KernelSpec::tempered(0.5, 2.0).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for i in 1..2000 {
                let r = 1e-4 * 1.01f64.powi(i);
                let v = k.kernel_value(r).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn integrability() {
        assert!(KernelSpec::stable(0.5).unwrap().integrability_check().unwrap().finite);
        assert!(KernelSpec::tempered(1.9, 0.0).unwrap().integrability_check().unwrap().finite);
        assert!(!KernelSpec::stable(2.5).unwrap().integrability_check().unwrap().finite);
        let bad = KernelSpec::custom_radial("r^-3.5", |r: f64| r.powf(-3.5));
        let report = bad.integrability_check().unwrap();
        assert!(!report.finite, "{}", report.diagnostic);
        let good = KernelSpec::custom_radial("r^-2.9", |r: f64| r.powf(-2.9));
        let report = good.integrability_check().unwrap();
        assert!(report.finite, "{}", report.diagnostic);
        let heavy = KernelSpec::custom_radial("1/(r^1.5 (1 + ...))", |r: f64| 1.0 / (1.0 + r));
        assert!(!heavy.integrability_check().unwrap().finite);
        let general = KernelSpec::general_symmetric("j", |x, y| 1.0 + (x * y).abs());
        assert!(matches!(
            general.integrability_check(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn general_symmetric_kernels() {
        let j = KernelSpec::general_symmetric("cosh", |x: f64, y: f64| {
            (x - y).abs().powf(-1.5) * (1.0 + (x + y).cosh())
        });
        j.check_symmetry(10_000, 10.0, 7).unwrap();
        let skew = KernelSpec::general_symmetric("skew", |x: f64, y: f64| 1.0 + (x - y).max(0.0));
        assert!(skew.check_symmetry(100, 1.0, 1).is_err());
        assert!(j.kernel_value(1.0).is_err());
    }
}
