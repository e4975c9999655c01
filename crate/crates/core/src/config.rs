//! Plain-text run configuration: `[section]` headers, one `key = value` per
//! line, `#` comments. Serializing and re-parsing reproduces a config
//! exactly because floats are written in shortest round-trip form.

use std::fmt::{self, Write};

use thiserror::Error;

use crate::error::Result as CoreResult;
use crate::model::{KernelSpec, MeasureSpec};
use crate::quad::radius_for_tail_mass;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the error is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

pub const DEFAULT_TAIL_TARGET: f64 = 1e-3;
/// Upper limit on the automatically chosen radius; heavy tails would
/// otherwise push it past anything a dense grid can hold.
pub const DEFAULT_RADIUS_CAP: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureConfig {
    PolynomialTail { eps: f64 },
    LogPerturbedTail { alpha: f64, eps: f64 },
    Exponential { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelConfig {
    Stable { alpha: f64 },
    Tempered { alpha: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    Poincare,
    Entropy,
    Beckner,
    WeakPoincare,
    SuperPoincare,
    Lp,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Self::Poincare,
        Self::Entropy,
        Self::Beckner,
        Self::WeakPoincare,
        Self::SuperPoincare,
        Self::Lp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Poincare => "poincare",
            Self::Entropy => "entropy",
            Self::Beckner => "beckner",
            Self::WeakPoincare => "wp",
            Self::SuperPoincare => "sp",
            Self::Lp => "lp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Bump,
    Sine,
    /// One value per line, or `x,value` rows.
    CustomCsv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub measure: MeasureConfig,
    pub kernel: KernelConfig,
    /// `None` picks the smallest radius with tail mass below
    /// [`DEFAULT_TAIL_TARGET`], capped at [`DEFAULT_RADIUS_CAP`].
    pub radius: Option<f64>,
    pub n: usize,
    pub subdiv: usize,
    pub suite_size: usize,
    pub seed: u64,
    pub tol: f64,
    pub tol_d: f64,
    pub ineq: Inequality,
    pub p: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_points: usize,
    pub local_radius: f64,
    pub m: f64,
    pub t_end: f64,
    pub dt0: f64,
    pub f0: InitialDatum,
    pub scales: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            measure: MeasureConfig::PolynomialTail { eps: 1.0 },
            kernel: KernelConfig::Stable { alpha: 0.5 },
            radius: Some(50.0),
            n: 2000,
            subdiv: 8,
            suite_size: 200,
            seed: 1,
            tol: 0.1,
            tol_d: 0.1,
            ineq: Inequality::Poincare,
            p: None,
            r_min: None,
            r_max: None,
            r_points: 9,
            local_radius: 1.0,
            m: 2.0,
            t_end: 2.0,
            dt0: 1e-3,
            f0: InitialDatum::Bump,
            scales: vec![2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 2.0
}

impl RunConfig {
    pub fn measure_spec(&self) -> CoreResult<MeasureSpec> {
        match self.measure {
            MeasureConfig::PolynomialTail { eps } => MeasureSpec::polynomial_tail(eps),
            MeasureConfig::LogPerturbedTail { alpha, eps } => MeasureSpec::log_perturbed_tail(alpha, eps),
            MeasureConfig::Exponential { lambda } => MeasureSpec::exponential(lambda),
        }
    }

    pub fn kernel_spec(&self) -> CoreResult<KernelSpec> {
        match self.kernel {
            KernelConfig::Stable { alpha } => KernelSpec::stable(alpha),
            KernelConfig::Tempered { alpha, delta } => KernelSpec::tempered(alpha, delta),
        }
    }

    /// Configured radius, or the tail-mass default for a normalized measure.
    pub fn resolve_radius(&self, measure: &MeasureSpec) -> CoreResult<f64> {
        match self.radius {
            Some(r) => Ok(r),
            None => radius_for_tail_mass(measure, DEFAULT_TAIL_TARGET, DEFAULT_RADIUS_CAP),
        }
    }

    /// Range checks shared by the parser and flag overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(err(0, m));
        match self.measure {
            MeasureConfig::PolynomialTail { eps } if !(eps > 0.0 && eps.is_finite()) => {
                return bad(format!("eps must be > 0, got {eps}"))
            }
            MeasureConfig::LogPerturbedTail { alpha, .. } if !open_unit(alpha) => {
                return bad(format!("alpha out of (0,2): {alpha}"))
            }
            MeasureConfig::LogPerturbedTail { eps, .. } if !eps.is_finite() => {
                return bad(format!("eps must be finite, got {eps}"))
            }
            MeasureConfig::Exponential { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                return bad(format!("lambda must be > 0, got {lambda}"))
            }
            _ => {}
        }
        match self.kernel {
            KernelConfig::Stable { alpha } | KernelConfig::Tempered { alpha, .. } if !open_unit(alpha) => {
                return bad(format!("alpha out of (0,2): {alpha}"))
            }
            KernelConfig::Tempered { delta, .. } if !(delta >= 0.0 && delta.is_finite()) => {
                return bad(format!("delta must be >= 0, got {delta}"))
            }
            _ => {}
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("R must be > 0, got {r}"));
            }
        }
        if self.n < 16 || !self.n.is_multiple_of(2) {
            return bad(format!("n must be even and >= 16, got {}", self.n));
        }
        if self.subdiv < 4 {
            return bad(format!("subdiv must be >= 4, got {}", self.subdiv));
        }
        if self.suite_size == 0 {
            return bad("suite size must be >= 1".into());
        }
        for (name, v) in [("tol", self.tol), ("tol_d", self.tol_d)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} out of [0,1): {v}"));
            }
        }
        if let Some(p) = self.p {
            let ok = match self.ineq {
                Inequality::Beckner => p > 1.0 && p <= 2.0,
                _ => p > 1.0 && p.is_finite(),
            };
            if !ok {
                return bad(match self.ineq {
                    Inequality::Beckner => format!("p out of (1,2]: {p}"),
                    _ => format!("p must be > 1, got {p}"),
                });
            }
        }
        for (name, v) in [("r_min", self.r_min), ("r_max", self.r_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be > 0, got {v}"));
                }
            }
        }
        if let (Some(a), Some(b)) = (self.r_min, self.r_max) {
            if a > b {
                return bad(format!("r_min {a} exceeds r_max {b}"));
            }
        }
        if self.r_points < 2 {
            return bad(format!("r_points must be >= 2, got {}", self.r_points));
        }
        if !(self.local_radius > 0.0 && self.local_radius.is_finite()) {
            return bad(format!("local_radius must be > 0, got {}", self.local_radius));
        }
        if !(self.m > 1.0 && self.m.is_finite()) {
            return bad(format!("m must be > 1, got {}", self.m));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return bad(format!("dt0 must be > 0, got {}", self.dt0));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("scales must be a non-empty list of positive numbers".into());
        }
        Ok(())
    }

    /// Applies one `key = value` assignment; used by the parser and by
    /// command-line overrides.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(0, format!("{section}.{key}: expected a number, got '{v}'")))
        };
        let int = |v: &str| -> Result<u64, ConfigError> {
            v.parse::<u64>()
                .map_err(|_| err(0, format!("{section}.{key}: expected a non-negative integer, got '{v}'")))
        };
        let unknown = || err(0, format!("unknown key '{key}' in [{section}]"));
        match section {
            "measure" => match key {
                "family" => {
                    self.measure = match value {
                        "polynomial_tail" => MeasureConfig::PolynomialTail { eps: 1.0 },
                        "log_perturbed_tail" => MeasureConfig::LogPerturbedTail { alpha: 0.5, eps: 1.0 },
                        "exponential" => MeasureConfig::Exponential { lambda: 1.0 },
                        other => return Err(err(0, format!("unknown measure family '{other}'"))),
                    }
                }
                "d" => {
                    if int(value)? != 1 {
                        return Err(err(0, "only d = 1 is supported"));
                    }
                }
                "eps" => match &mut self.measure {
                    MeasureConfig::PolynomialTail { eps } | MeasureConfig::LogPerturbedTail { eps, .. } => {
                        *eps = num(value)?
                    }
                    MeasureConfig::Exponential { .. } => return Err(err(0, "eps does not apply to exponential")),
                },
                "alpha" => match &mut self.measure {
                    MeasureConfig::LogPerturbedTail { alpha, .. } => *alpha = num(value)?,
                    _ => return Err(err(0, "measure alpha applies to log_perturbed_tail only")),
                },
                "lambda" => match &mut self.measure {
                    MeasureConfig::Exponential { lambda } => *lambda = num(value)?,
                    _ => return Err(err(0, "lambda applies to exponential only")),
                },
                _ => return Err(unknown()),
            },
            "kernel" => match key {
                "family" => {
                    let alpha = match self.kernel {
                        KernelConfig::Stable { alpha } | KernelConfig::Tempered { alpha, .. } => alpha,
                    };
                    self.kernel = match value {
                        "stable" => KernelConfig::Stable { alpha },
                        "tempered" => KernelConfig::Tempered { alpha, delta: 1.0 },
                        other => return Err(err(0, format!("unknown kernel family '{other}'"))),
                    }
                }
                "alpha" => match &mut self.kernel {
                    KernelConfig::Stable { alpha } | KernelConfig::Tempered { alpha, .. } => *alpha = num(value)?,
                },
                "delta" => match &mut self.kernel {
                    KernelConfig::Tempered { delta, .. } => *delta = num(value)?,
                    _ => return Err(err(0, "delta applies to tempered only")),
                },
                _ => return Err(unknown()),
            },
            "grid" => match key {
                "R" => self.radius = if value == "auto" { None } else { Some(num(value)?) },
                "n" => self.n = int(value)? as usize,
                "subdiv" => self.subdiv = int(value)? as usize,
                _ => return Err(unknown()),
            },
            "suite" => match key {
                "size" => self.suite_size = int(value)? as usize,
                "seed" => self.seed = int(value)?,
                _ => return Err(unknown()),
            },
            "tolerance" => match key {
                "tol" => self.tol = num(value)?,
                "tol_d" => self.tol_d = num(value)?,
                _ => return Err(unknown()),
            },
            "verify" => match key {
                "ineq" => {
                    self.ineq = Inequality::parse(value)
                        .ok_or_else(|| err(0, format!("unknown inequality '{value}'")))?
                }
                "p" => self.p = Some(num(value)?),
                _ => return Err(unknown()),
            },
            "rates" => match key {
                "r_min" => self.r_min = Some(num(value)?),
                "r_max" => self.r_max = Some(num(value)?),
                "r_points" => self.r_points = int(value)? as usize,
                "local_radius" => self.local_radius = num(value)?,
                _ => return Err(unknown()),
            },
            "evolve" => match key {
                "m" => self.m = num(value)?,
                "t_end" => self.t_end = num(value)?,
                "dt0" => self.dt0 = num(value)?,
                "f0" => {
                    self.f0 = match value {
                        "bump" => InitialDatum::Bump,
                        "sine" => InitialDatum::Sine,
                        other => match other.strip_prefix("csv:") {
                            Some(path) if !path.is_empty() => InitialDatum::CustomCsv(path.to_string()),
                            _ => return Err(err(0, format!("f0 must be bump, sine or csv:<path>, got '{other}'"))),
                        },
                    }
                }
                _ => return Err(unknown()),
            },
            "sharpness" => match key {
                "scales" => {
                    self.scales = value.split(',').map(|s| num(s.trim())).collect::<Result<_, _>>()?;
                }
                _ => return Err(unknown()),
            },
            _ => return Err(err(0, format!("unknown section [{section}]"))),
        }
        Ok(())
    }
}

/// Parses and validates a config; keys absent from the text keep their
/// defaults, except `[measure] family` and `[kernel] family`, which are
/// required.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<String> = None;
    let mut seen_measure = false;
    let mut seen_kernel = false;
    let mut seen_keys: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header '{line}'")))?
                .trim();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| err(line_no, format!("key '{key}' before any section header")))?;
        let id = (sec.to_string(), key.to_string());
        if seen_keys.contains(&id) {
            return Err(err(line_no, format!("duplicate key '{key}' in [{sec}]")));
        }
        seen_keys.push(id);
        if key == "family" {
            match sec {
                "measure" => seen_measure = true,
                "kernel" => seen_kernel = true,
                _ => {}
            }
        }
        cfg.set(sec, key, value).map_err(|e| err(line_no, e.message))?;
        cfg.validate_partial().map_err(|e| err(line_no, e.message))?;
    }
    if !seen_measure {
        return Err(err(0, "missing required key [measure] family"));
    }
    if !seen_kernel {
        return Err(err(0, "missing required key [kernel] family"));
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks that can fail on a single assignment, so errors point at the
    /// offending line. Cross-key checks wait for [`RunConfig::validate`].
    fn validate_partial(&self) -> Result<(), ConfigError> {
        match self.validate() {
            Err(e) if e.message.starts_with("p out of") || e.message.starts_with("r_min ") => Ok(()),
            other => other,
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        s.push_str("[measure]\n");
        match self.measure {
            MeasureConfig::PolynomialTail { eps } => {
                writeln!(s, "family = polynomial_tail\neps = {}", fmt_f(eps))?;
            }
            MeasureConfig::LogPerturbedTail { alpha, eps } => {
                writeln!(s, "family = log_perturbed_tail\nalpha = {}\neps = {}", fmt_f(alpha), fmt_f(eps))?;
            }
            MeasureConfig::Exponential { lambda } => {
                writeln!(s, "family = exponential\nlambda = {}", fmt_f(lambda))?;
            }
        }
        s.push_str("\n[kernel]\n");
        match self.kernel {
            KernelConfig::Stable { alpha } => writeln!(s, "family = stable\nalpha = {}", fmt_f(alpha))?,
            KernelConfig::Tempered { alpha, delta } => {
                writeln!(s, "family = tempered\nalpha = {}\ndelta = {}", fmt_f(alpha), fmt_f(delta))?
            }
        }
        let radius = self.radius.map(fmt_f).unwrap_or_else(|| "auto".into());
        writeln!(s, "\n[grid]\nR = {radius}\nn = {}\nsubdiv = {}", self.n, self.subdiv)?;
        writeln!(s, "\n[suite]\nsize = {}\nseed = {}", self.suite_size, self.seed)?;
        writeln!(s, "\n[tolerance]\ntol = {}\ntol_d = {}", fmt_f(self.tol), fmt_f(self.tol_d))?;
        writeln!(s, "\n[verify]\nineq = {}", self.ineq.name())?;
        if let Some(p) = self.p {
            writeln!(s, "p = {}", fmt_f(p))?;
        }
        s.push_str("\n[rates]\n");
        if let Some(r) = self.r_min {
            writeln!(s, "r_min = {}", fmt_f(r))?;
        }
        if let Some(r) = self.r_max {
            writeln!(s, "r_max = {}", fmt_f(r))?;
        }
        writeln!(s, "r_points = {}\nlocal_radius = {}", self.r_points, fmt_f(self.local_radius))?;
        let f0 = match &self.f0 {
            InitialDatum::Bump => "bump".to_string(),
            InitialDatum::Sine => "sine".to_string(),
            InitialDatum::CustomCsv(p) => format!("csv:{p}"),
        };
        writeln!(
            s,
            "\n[evolve]\nm = {}\nt_end = {}\ndt0 = {}\nf0 = {f0}",
            fmt_f(self.m),
            fmt_f(self.t_end),
            fmt_f(self.dt0)
        )?;
        let scales: Vec<String> = self.scales.iter().map(|x| fmt_f(*x)).collect();
        writeln!(s, "\n[sharpness]\nscales = {}", scales.join(", "))?;
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[measure]
family = polynomial_tail
eps = 1
[kernel]
family = stable
alpha = 0.5
[grid]
R = 50
n = 2000
";

    #[test]
    fn minimal_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.measure, MeasureConfig::PolynomialTail { eps: 1.0 });
        assert_eq!(cfg.kernel, KernelConfig::Stable { alpha: 0.5 });
        assert_eq!(cfg.radius, Some(50.0));
        assert_eq!(cfg.n, 2000);
        assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_config(&MINIMAL.replace("alpha = 0.5", "alpha = 2.5")).unwrap_err();
        assert_eq!(e.line, 6);
        assert!(e.message.contains("alpha out of (0,2)"), "{e}");
        let e = parse_config(&format!("{MINIMAL}colour = red\n")).unwrap_err();
        assert_eq!(e.line, 10);
        assert!(e.message.contains("unknown key"));
        let e = parse_config("[kernel]\nfamily = stable\n").unwrap_err();
        assert!(e.message.contains("missing required key [measure]"));
        let e = parse_config(&format!("{MINIMAL}[verify]\nineq = beckner\np = 3\n")).unwrap_err();
        assert!(e.message.contains("p out of (1,2]"), "{e}");
        assert!(parse_config(&format!("{MINIMAL}n = 10\n")).is_err());
    }

    #[test]
    fn comments_and_auto_radius() {
        let text = MINIMAL.replace("R = 50", "R = auto   # pick from tail mass") + "# trailing\n";
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.radius, None);
        assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }
}
