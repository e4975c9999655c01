use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonlocal_ineq::config::{parse_config, ConfigError, RunConfig};

mod commands;

/// Numerical checks of Poincaré-type, entropy and Beckner inequalities for
/// non-local Dirichlet forms.
///
/// Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error.
#[derive(Debug, Parser)]
#[command(name = "nonlocal-ineq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (`[section]` + `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set grid.n=1000`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Measure as `family[:key=value,...]`, e.g. `polynomial_tail:eps=0.3`.
    #[arg(long, global = true)]
    measure: Option<String>,
    /// Kernel as `family[:key=value,...]`, e.g. `stable:alpha=0.5`.
    #[arg(long, global = true)]
    kernel: Option<String>,
    /// Truncation radius, or `auto`.
    #[arg(long = "R", global = true)]
    radius: Option<String>,
    /// Number of grid nodes (even).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Sub-cell points per axis for near-diagonal quadrature.
    #[arg(long, global = true)]
    subdiv: Option<usize>,
    /// Number of random test functions.
    #[arg(long = "suite-size", global = true)]
    suite_size: Option<usize>,
    /// Seed of the test-function suite.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative tolerance of the inequality checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative tolerance of the differential decay check.
    #[arg(long = "tol-d", global = true)]
    tol_d: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the subcommand's CSV side file here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Write the assembled weight matrix as CSV.
    #[arg(long = "dump-form", global = true)]
    dump_form: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair-condition infimum (closed form and grid) and the Lyapunov weight check.
    CheckConditions,
    /// Spectral gap of the discretized form.
    Gap,
    /// Check one inequality over a seeded suite of test functions.
    Verify {
        /// poincare, entropy, beckner, wp, sp or lp.
        #[arg(long)]
        ineq: Option<String>,
        /// Exponent for beckner (1 < p <= 2) or lp (p > 1).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long = "r-min")]
        r_min: Option<f64>,
        #[arg(long = "r-max")]
        r_max: Option<f64>,
        #[arg(long = "r-points")]
        r_points: Option<usize>,
    },
    /// Tabulate the weak, super and local super Poincaré rates.
    Rates {
        #[arg(long = "r-min")]
        r_min: Option<f64>,
        #[arg(long = "r-max")]
        r_max: Option<f64>,
        #[arg(long = "r-points")]
        r_points: Option<usize>,
        /// Ball radius of the local super Poincaré rate.
        #[arg(long = "local-radius")]
        local_radius: Option<f64>,
    },
    /// Porous-medium flow and its decay bound.
    Evolve {
        /// Porous-medium exponent, m > 1.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Initial and largest time step.
        #[arg(long)]
        dt0: Option<f64>,
        /// bump, sine or csv:<path>.
        #[arg(long)]
        f0: Option<String>,
    },
    /// Rayleigh quotients of the cutoff family `min(|x|/s, 1)`.
    Sharpness {
        /// Comma-separated scales.
        #[arg(long)]
        scales: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckConditions => "check-conditions",
            Command::Gap => "gap",
            Command::Verify { .. } => "verify",
            Command::Rates { .. } => "rates",
            Command::Evolve { .. } => "evolve",
            Command::Sharpness { .. } => "sharpness",
        }
    }
}

fn apply_spec(cfg: &mut RunConfig, section: &str, spec: &str) -> Result<(), ConfigError> {
    let (family, params) = spec.split_once(':').unwrap_or((spec, ""));
    cfg.set(section, "family", family.trim())?;
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError { line: 0, message: format!("--{section}: expected key=value, got '{kv}'") })?;
        cfg.set(section, k.trim(), v.trim())?;
    }
    Ok(())
}

fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let mut sets: Vec<(&str, &str, String)> = Vec::new();
    let flag = |v: Option<String>, section: &'static str, key: &'static str, sets: &mut Vec<(&str, &str, String)>| {
        if let Some(v) = v {
            sets.push((section, key, v));
        }
    };
    flag(c.radius.clone(), "grid", "R", &mut sets);
    flag(c.n.map(|v| v.to_string()), "grid", "n", &mut sets);
    flag(c.subdiv.map(|v| v.to_string()), "grid", "subdiv", &mut sets);
    flag(c.suite_size.map(|v| v.to_string()), "suite", "size", &mut sets);
    flag(c.seed.map(|v| v.to_string()), "suite", "seed", &mut sets);
    flag(c.tol.map(|v| v.to_string()), "tolerance", "tol", &mut sets);
    flag(c.tol_d.map(|v| v.to_string()), "tolerance", "tol_d", &mut sets);
    match &cli.command {
        Command::Verify {
            ineq,
            p,
            r_min,
            r_max,
            r_points,
        } => {
            flag(ineq.clone(), "verify", "ineq", &mut sets);
            flag(p.map(|v| v.to_string()), "verify", "p", &mut sets);
            flag(r_min.map(|v| v.to_string()), "rates", "r_min", &mut sets);
            flag(r_max.map(|v| v.to_string()), "rates", "r_max", &mut sets);
            flag(r_points.map(|v| v.to_string()), "rates", "r_points", &mut sets);
        }
        Command::Rates {
            r_min,
            r_max,
            r_points,
            local_radius,
        } => {
            flag(r_min.map(|v| v.to_string()), "rates", "r_min", &mut sets);
            flag(r_max.map(|v| v.to_string()), "rates", "r_max", &mut sets);
            flag(r_points.map(|v| v.to_string()), "rates", "r_points", &mut sets);
            flag(local_radius.map(|v| v.to_string()), "rates", "local_radius", &mut sets);
        }
        Command::Evolve { m, t_end, dt0, f0 } => {
            flag(m.map(|v| v.to_string()), "evolve", "m", &mut sets);
            flag(t_end.map(|v| v.to_string()), "evolve", "t_end", &mut sets);
            flag(dt0.map(|v| v.to_string()), "evolve", "dt0", &mut sets);
            flag(f0.clone(), "evolve", "f0", &mut sets);
        }
        Command::Sharpness { scales } => flag(scales.clone(), "sharpness", "scales", &mut sets),
        Command::CheckConditions | Command::Gap => {}
    }

    // specs first so that `--set measure.eps=...` refines a `--measure` family
    if let Some(spec) = &c.measure {
        apply_spec(&mut cfg, "measure", spec).map_err(|e| e.message)?;
    }
    if let Some(spec) = &c.kernel {
        apply_spec(&mut cfg, "kernel", spec).map_err(|e| e.message)?;
    }
    for raw in &c.overrides {
        let (path, value) = raw.split_once('=').ok_or_else(|| format!("--set expects SECTION.KEY=VALUE, got '{raw}'"))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| format!("--set expects SECTION.KEY=VALUE, got '{raw}'"))?;
        cfg.set(section.trim(), key.trim(), value.trim()).map_err(|e| e.message)?;
    }
    for (section, key, value) in sets {
        cfg.set(section, key, &value).map_err(|e| e.message)?;
    }
    cfg.validate().map_err(|e| e.message)?;
    Ok(cfg)
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("NONLOCAL_INEQ_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("NONLOCAL_INEQ_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn write_artifact(path: Option<&PathBuf>, text: &str, to_stdout: bool) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None if to_stdout => {
            print!("{text}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<bool, String> {
    init_threads()?;
    let cfg = build_config(cli)?;
    let outcome = commands::run(cli.command.name(), &cfg, cli.common.dump_form.as_deref()).map_err(|e| e.to_string())?;
    let mut json = serde_json::to_string_pretty(&outcome.report).map_err(|e| e.to_string())?;
    json.push('\n');
    write_artifact(cli.common.out.as_ref(), &json, true)?;
    if let Some(csv) = &outcome.csv {
        write_artifact(cli.common.csv.as_ref(), csv, false)?;
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
