//! Subcommand bodies. Each returns a JSON report, an optional CSV side file
//! and whether every check passed.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde_json::{json, Value};

use nonlocal_ineq::config::{InitialDatum, Inequality, MeasureConfig, RunConfig};
use nonlocal_ineq::criteria::{
    calibrate_lyapunov_scale, condition_infimum, example_weight, form_condition, local_sp_exponent, loglog_slope,
    lyapunov_weight_check, sp_exponent_polynomial, wp_exponent_polynomial, Domain, RateFunction,
};
use nonlocal_ineq::pme::{center, check_decay, decay_constant, evolve, GeneratorMatrix};
use nonlocal_ineq::suite::{band_limited, smoothed_bumps, TestFunction};
use nonlocal_ineq::verify::{
    check_beckner, check_entropy, check_lp_poincare, check_poincare, check_super_poincare,
    check_weak_poincare, cutoff_family_ratio, estimate_spectral_gap, VerificationReport,
};
use nonlocal_ineq::{assemble_form_matrix, build_grid, DiscreteForm, Error, Grid, KernelSpec, MeasureSpec, Result};

pub const SCHEMA: u32 = 1;
const NORMALIZATION_TOL: f64 = 1e-12;

pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    pub pass: bool,
}

struct Setup {
    measure: MeasureSpec,
    kernel: KernelSpec,
    grid: Grid,
}

impl Setup {
    fn new(cfg: &RunConfig, radius_floor: Option<f64>) -> Result<(Self, Vec<String>)> {
        let measure = cfg.measure_spec()?.normalize(NORMALIZATION_TOL)?;
        let kernel = cfg.kernel_spec()?;
        let mut notes = Vec::new();
        let mut radius = cfg.resolve_radius(&measure)?;
        if let Some(floor) = radius_floor {
            if radius < floor {
                notes.push(format!("R raised from {radius} to {floor} so that every scale is at most R/4"));
                radius = floor;
            }
        }
        let grid = build_grid(&measure, radius, cfg.n)?;
        Ok((Self { measure, kernel, grid }, notes))
    }

    fn form(&self, cfg: &RunConfig, dump: Option<&Path>) -> Result<DiscreteForm> {
        let form = assemble_form_matrix(&self.grid, &self.kernel, cfg.subdiv)?;
        if let Some(path) = dump {
            let file = File::create(path).map_err(|e| Error::Internal(format!("{}: {e}", path.display())))?;
            form.write_csv(BufWriter::new(file))
                .map_err(|e| Error::Internal(format!("{}: {e}", path.display())))?;
        }
        Ok(form)
    }

    fn grid_json(&self, notes: &[String]) -> Value {
        let mut warnings: Vec<String> = self.grid.warnings().to_vec();
        warnings.extend_from_slice(notes);
        json!({
            "R": self.grid.radius(),
            "n": self.grid.len(),
            "spacing": self.grid.spacing(),
            "tail_mass": self.grid.tail_mass(),
            "measure": self.measure.label(),
            "kernel": self.kernel.label(),
            "warnings": warnings,
        })
    }

    fn analytic(&self) -> Result<Option<f64>> {
        match condition_infimum(&self.measure, &self.kernel, Domain::Analytic) {
            Ok(c) => Ok(Some(c.value)),
            Err(Error::Unsupported(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Closed-form condition constant when available and positive, else the
    /// constant of the assembled form.
    fn constant(&self, form: &DiscreteForm) -> Result<(f64, &'static str, Value)> {
        let analytic = self.analytic()?;
        let nodes = condition_infimum(&self.measure, &self.kernel, Domain::Grid(&self.grid))?.value;
        let (discrete, _) = form_condition(form);
        let (value, source) = match analytic {
            Some(a) if a > 0.0 => (a, "analytic"),
            _ => (discrete, "form"),
        };
        let detail = json!({
            "value": value,
            "source": source,
            "analytic": analytic,
            "grid_nodes": nodes,
            "form": discrete,
        });
        Ok((value, source, detail))
    }
}

fn envelope(command: &str, cfg: &RunConfig, setup: Option<(&Setup, &[String])>, pass: bool, body: Value) -> Value {
    let mut report = json!({
        "schema": SCHEMA,
        "command": command,
        "config": cfg.to_string(),
        "pass": pass,
    });
    if let Some((s, notes)) = setup {
        report["grid"] = s.grid_json(notes);
    }
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    report
}

pub fn run(command: &str, cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    match command {
        "check-conditions" => check_conditions(cfg, dump),
        "gap" => gap(cfg, dump),
        "verify" => verify(cfg, dump),
        "rates" => rates(cfg, dump),
        "evolve" => evolve_cmd(cfg, dump),
        "sharpness" => sharpness(cfg, dump),
        other => Err(Error::Unsupported(format!("unknown command {other}"))),
    }
}

fn check_conditions(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let (setup, notes) = Setup::new(cfg, None)?;
    if dump.is_some() {
        setup.form(cfg, dump)?;
    }
    let analytic = match condition_infimum(&setup.measure, &setup.kernel, Domain::Analytic) {
        Ok(c) => Some(c),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let grid = condition_infimum(&setup.measure, &setup.kernel, Domain::Grid(&setup.grid))?;
    let witness_points = grid
        .witness
        .map(|(i, j)| (setup.grid.nodes()[i], setup.grid.nodes()[j]));
    // the closed form is a lower bound, so it may not exceed the grid minimum
    let mut pass = analytic.as_ref().is_none_or(|a| a.value <= grid.value * (1.0 + 1e-12));
    let lyapunov = match example_weight(&setup.measure, &setup.kernel) {
        Ok(w) => {
            let report = lyapunov_weight_check(&setup.kernel, &w, &setup.grid)?;
            let calibrated = calibrate_lyapunov_scale(&setup.kernel, w.exponent, &setup.grid)?;
            pass &= report.holds;
            json!({ "weight": w, "report": report, "calibrated_scale": calibrated })
        }
        Err(Error::Unsupported(msg)) => json!({ "skipped": msg }),
        Err(e) => return Err(e),
    };
    let body = json!({
        "condition": {
            "analytic": analytic,
            "grid": grid,
            "grid_witness_points": witness_points,
        },
        "lyapunov": lyapunov,
    });
    Ok(Outcome {
        report: envelope("check-conditions", cfg, Some((&setup, &notes)), pass, body),
        csv: None,
        pass,
    })
}

fn gap(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let (setup, notes) = Setup::new(cfg, None)?;
    let form = setup.form(cfg, dump)?;
    let gap = estimate_spectral_gap(&form)?;
    let (c, source, constant) = setup.constant(&form)?;
    let threshold = (1.0 - cfg.tol) * c;
    let pass = gap.gap >= threshold;
    let mut csv = String::from("x,f\n");
    for (x, f) in setup.grid.nodes().iter().zip(&gap.eigenvector) {
        csv.push_str(&format!("{x},{f}\n"));
    }
    let body = json!({
        "gap": gap.gap,
        "iterations": gap.iterations,
        "residual": gap.residual,
        "constant": constant,
        "threshold": threshold,
        "note": format!("pass iff gap >= (1 - tol) * c with c from {source}"),
    });
    Ok(Outcome {
        report: envelope("gap", cfg, Some((&setup, &notes)), pass, body),
        csv: Some(csv),
        pass,
    })
}

fn log_points(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..k)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (k - 1) as f64).exp())
        .collect()
}

fn verify(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let (setup, notes) = Setup::new(cfg, None)?;
    let form = setup.form(cfg, dump)?;
    let positive = matches!(cfg.ineq, Inequality::Entropy | Inequality::Beckner);
    let mut suite: Vec<TestFunction> = band_limited(&setup.grid, cfg.suite_size, cfg.seed, positive);
    if !positive {
        suite.extend(smoothed_bumps(&setup.grid));
    }
    let (c, _, constant) = setup.constant(&form)?;
    let report: VerificationReport = match cfg.ineq {
        Inequality::Poincare => {
            let gap = estimate_spectral_gap(&form)?;
            check_poincare(&form, c, &suite, Some(&gap.eigenvector), cfg.tol)?
        }
        Inequality::Entropy => check_entropy(&form, c, &suite, cfg.tol)?,
        Inequality::Beckner => check_beckner(&form, c, cfg.p.unwrap_or(1.5), &suite, cfg.tol)?,
        Inequality::Lp => check_lp_poincare(&form, c, cfg.p.unwrap_or(3.0), &suite, cfg.tol)?,
        Inequality::WeakPoincare => {
            let rate = RateFunction::weak_poincare(&setup.measure, &setup.kernel, Domain::Analytic)?;
            let rs = log_points(cfg.r_min.unwrap_or(1e-3), cfg.r_max.unwrap_or(1e-1), cfg.r_points);
            check_weak_poincare(&form, &rate, &suite, &rs, cfg.tol)?
        }
        Inequality::SuperPoincare => {
            let w = example_weight(&setup.measure, &setup.kernel)?;
            let beta = RateFunction::super_poincare(&setup.measure, &setup.kernel, w)?;
            let rs = log_points(cfg.r_min.unwrap_or(1e-2), cfg.r_max.unwrap_or(1.0), cfg.r_points);
            check_super_poincare(&form, &beta, &suite, &rs, cfg.tol)?
        }
    };
    let pass = report.pass;
    let csv = report.ratios_csv();
    let mut value = serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.remove("ratios");
        map.remove("grid");
        map.remove("pass");
    }
    let uses_constant = !matches!(cfg.ineq, Inequality::WeakPoincare | Inequality::SuperPoincare);
    let body = json!({
        "ineq": cfg.ineq.name(),
        "constant": if uses_constant { constant } else { Value::Null },
        "report": value,
    });
    Ok(Outcome {
        report: envelope("verify", cfg, Some((&setup, &notes)), pass, body),
        csv: Some(csv),
        pass,
    })
}

fn cell(v: &Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn slope_of(rs: &[f64], values: &[Option<f64>]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rs
        .iter()
        .zip(values)
        .filter_map(|(r, v)| v.filter(|v| *v > 0.0).map(|v| (*r, v)))
        .collect();
    (pts.len() >= 2).then(|| loglog_slope(&pts))
}

fn rates(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let measure = cfg.measure_spec()?.normalize(NORMALIZATION_TOL)?;
    let kernel = cfg.kernel_spec()?;
    if dump.is_some() {
        Setup::new(cfg, None)?.0.form(cfg, dump)?;
    }
    let rs = log_points(cfg.r_min.unwrap_or(1e-3), cfg.r_max.unwrap_or(1.0), cfg.r_points);
    let mut skipped = Vec::new();
    let mut eval_all = |rate: &RateFunction, name: &str| -> Result<Vec<Option<f64>>> {
        rs.iter()
            .map(|&r| match rate.eval(r) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Infeasible(msg)) => {
                    skipped.push(format!("{name}@r={r}: {msg}"));
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect()
    };
    let unavailable = |e: Error| -> Result<Value> {
        match e {
            Error::Unsupported(msg) | Error::InvalidParameter { reason: msg, .. } => Ok(json!({ "unavailable": msg })),
            e => Err(e),
        }
    };

    let (wp, wp_meta) = match RateFunction::weak_poincare(&measure, &kernel, Domain::Analytic) {
        Ok(rate) => match eval_all(&rate, "wp_rate") {
            Ok(v) => (v, serde_json::to_value(rate.metadata()).unwrap_or(Value::Null)),
            Err(e) => (vec![None; rs.len()], unavailable(e)?),
        },
        Err(e) => (vec![None; rs.len()], unavailable(e)?),
    };
    let (sp, sp_meta) = match example_weight(&measure, &kernel).and_then(|w| RateFunction::super_poincare(&measure, &kernel, w)) {
        Ok(rate) => match eval_all(&rate, "sp_beta") {
            Ok(v) => (v, serde_json::to_value(rate.metadata()).unwrap_or(Value::Null)),
            Err(e) => (vec![None; rs.len()], unavailable(e)?),
        },
        Err(e) => (vec![None; rs.len()], unavailable(e)?),
    };
    let (local, local_meta) = match RateFunction::local_super_poincare(&measure, &kernel, cfg.local_radius) {
        Ok(rate) => match eval_all(&rate, "local_sp_beta") {
            Ok(v) => (v, serde_json::to_value(rate.metadata()).unwrap_or(Value::Null)),
            Err(e) => (vec![None; rs.len()], unavailable(e)?),
        },
        Err(e) => (vec![None; rs.len()], unavailable(e)?),
    };

    let mut expected = json!({});
    if let (MeasureConfig::PolynomialTail { eps }, Some(alpha)) = (cfg.measure, kernel.alpha_stab()) {
        if eps < alpha {
            expected["wp_rate"] = json!(wp_exponent_polynomial(alpha, eps));
        }
        if eps > alpha {
            expected["sp_beta"] = json!(sp_exponent_polynomial(1.0, alpha, eps));
        }
        expected["local_sp_beta"] = json!(local_sp_exponent(1.0, alpha));
    }

    let mut csv = String::new();
    csv.push_str(&format!("# measure: {}\n# kernel: {}\n", measure.label(), kernel.label()));
    csv.push_str(&format!("# local_sp_beta radius: {}\n", cfg.local_radius));
    csv.push_str("# wp_rate: Var(f) <= alpha(r) D(f,f) + r |f|_inf^2\n");
    csv.push_str("# sp_beta: mu(f^2) <= r D(f,f) + beta(r) mu(|f|)^2\n");
    csv.push_str("# local_sp_beta: int_B f^2 dmu <= s D(f,f) + beta_r(s) (int_B |f| dmu)^2 with s = r\n");
    csv.push_str("r,wp_rate,sp_beta,local_sp_beta\n");
    for k in 0..rs.len() {
        csv.push_str(&format!("{},{},{},{}\n", rs[k], cell(&wp[k]), cell(&sp[k]), cell(&local[k])));
    }
    let body = json!({
        "r": rs,
        "wp_rate": { "values": wp, "slope": slope_of(&rs, &wp), "metadata": wp_meta },
        "sp_beta": { "values": sp, "slope": slope_of(&rs, &sp), "metadata": sp_meta },
        "local_sp_beta": { "values": local, "slope": slope_of(&rs, &local), "metadata": local_meta },
        "expected_slopes": expected,
        "skipped": skipped,
    });
    Ok(Outcome {
        report: envelope("rates", cfg, None, true, body),
        csv: Some(csv),
        pass: true,
    })
}

fn read_initial_csv(path: &str, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Internal(format!("{path}: {e}")))?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if k == 0 => continue, // header
            Err(_) => {
                return Err(Error::InvalidParameter {
                    name: "f0",
                    reason: format!("{path}:{}: not a number: '{field}'", k + 1),
                })
            }
        }
    }
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: values.len() });
    }
    Ok(values)
}

fn evolve_cmd(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let (setup, notes) = Setup::new(cfg, None)?;
    let form = setup.form(cfg, dump)?;
    let radius = setup.grid.radius();
    let mut u0 = match &cfg.f0 {
        InitialDatum::Bump => setup.grid.sample(|x| (-x * x).exp()),
        InitialDatum::Sine => setup.grid.sample(|x| (std::f64::consts::PI * x / radius).sin()),
        InitialDatum::CustomCsv(path) => read_initial_csv(path, setup.grid.len())?,
    };
    center(&mut u0, form.mass_hat());
    let analytic = setup.analytic()?;
    let (form_c, _) = form_condition(&form);
    let (c, source) = decay_constant(analytic, form_c);
    let gen = GeneratorMatrix::new(&form)?;
    let traj = evolve(&gen, &u0, cfg.m, cfg.t_end, cfg.dt0)?;
    let report = check_decay(&traj, &form, cfg.m, c, cfg.tol, cfg.tol_d)?;
    let max_mass = traj.mass.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let pass = report.pass;
    let mut value = serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.remove("ratios");
        map.remove("grid");
        map.remove("pass");
    }
    let body = json!({
        "constant": { "value": c, "source": source, "analytic": analytic, "form": form_c },
        "steps": traj.dts.len(),
        "initial_l2": traj.l2[0],
        "final_l2": traj.l2[traj.l2.len() - 1],
        "max_abs_mass": max_mass,
        "report": value,
    });
    Ok(Outcome {
        report: envelope("evolve", cfg, Some((&setup, &notes)), pass, body),
        csv: Some(traj.to_csv(c)?),
        pass,
    })
}

fn sharpness(cfg: &RunConfig, dump: Option<&Path>) -> Result<Outcome> {
    let largest = cfg.scales.iter().copied().fold(0.0, f64::max);
    let (setup, notes) = Setup::new(cfg, Some(4.0 * largest))?;
    let form = setup.form(cfg, dump)?;
    let report = cutoff_family_ratio(&form, &cfg.scales)?;
    let pass = report.strictly_decreasing;
    let mut csv = String::from("s,ratio\n");
    for (s, r) in &report.points {
        csv.push_str(&format!("{s},{r}\n"));
    }
    let first = report.points[0].1;
    let last = report.points[report.points.len() - 1].1;
    let continuum = match (cfg.measure, setup.kernel.alpha_stab()) {
        (MeasureConfig::PolynomialTail { eps }, Some(alpha)) => Some(eps - alpha),
        _ => None,
    };
    let body = json!({
        "points": report.points,
        "strictly_decreasing": report.strictly_decreasing,
        "final_over_initial": last / first,
        "loglog_slope": report.loglog_slope,
        "continuum_slope": continuum,
    });
    Ok(Outcome {
        report: envelope("sharpness", cfg, Some((&setup, &notes)), pass, body),
        csv: Some(csv),
        pass,
    })
}
