//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `[PASS]`/`[FAIL]` line; exits non-zero if any fail.

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use nonlocal_ineq::criteria::{
    condition_infimum, example_weight, form_condition, loglog_slope, sp_exponent_polynomial,
    wp_exponent_polynomial, Domain, RateFunction,
};
use nonlocal_ineq::forms::{
    beckner_deficit, dirichlet_bilinear, dirichlet_energy, entropy, pair_covariance, power_minus_one,
    variance,
};
use nonlocal_ineq::pme::{center, check_decay, decay_constant, evolve, GeneratorMatrix};
use nonlocal_ineq::suite::{band_limited, smoothed_bumps, TestFunction};
use nonlocal_ineq::verify::{
    check_beckner, check_entropy, check_lp_poincare, check_poincare, check_super_poincare,
    check_weak_poincare, cutoff_family_ratio, estimate_spectral_gap,
};
use nonlocal_ineq::{assemble_form_matrix, build_grid, DiscreteForm, KernelSpec, MeasureSpec};

const SUBDIV: usize = 8;
const SEED: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome, Box<dyn std::error::Error>>;

fn polynomial(eps: f64) -> MeasureSpec {
    MeasureSpec::polynomial_tail(eps).unwrap().normalize(1e-12).unwrap()
}

fn stable() -> KernelSpec {
    KernelSpec::stable(0.5).unwrap()
}

fn form(eps: f64, radius: f64, n: usize) -> DiscreteForm {
    let m = polynomial(eps);
    let g = build_grid(&m, radius, n).unwrap();
    assemble_form_matrix(&g, &stable(), SUBDIV).unwrap()
}

fn log_points(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (k - 1) as f64).exp())
        .collect()
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn timed(limit: Duration, start: Instant, pass: bool, detail: String) -> Outcome {
    let took = start.elapsed();
    Outcome {
        pass: pass && took < limit,
        detail: format!("{detail}; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()),
    }
}

/// Normalization constants against closed forms and against quadrature.
fn normalization() -> Result<Outcome, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let poly = MeasureSpec::polynomial_tail(1.0)?.normalization_constant(1e-12)?;
    let expo = MeasureSpec::exponential(2.0)?.normalization_constant(1e-12)?;
    let custom = MeasureSpec::custom("two_log", f64::INFINITY, |x: f64| 2.0 * x.abs().ln_1p())?
        .normalization_constant(1e-10)?;
    let pass = (poly - 0.5).abs() < 1e-9 && (expo - 1.0).abs() < 1e-9 && (custom - 0.5).abs() < 1e-6;
    Ok(timed(
        Duration::from_secs(1),
        start,
        pass,
        format!("C_poly={poly:.12}, C_exp={expo:.12}, C_custom={custom:.9}"),
    ))
}

/// Closed-form condition constant and the grid infimum.
fn condition_constant() -> Result<Outcome, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let m = polynomial(1.0);
    let analytic = condition_infimum(&m, &stable(), Domain::Analytic)?.value;
    let grid = build_grid(&m, 50.0, 2000)?;
    let on_grid = condition_infimum(&m, &stable(), Domain::Grid(&grid))?.value;
    let pass = (analytic - SQRT_2).abs() < 1e-12 && on_grid >= SQRT_2;
    Ok(timed(
        Duration::from_secs(10),
        start,
        pass,
        format!("analytic c={analytic:.12}, grid min={on_grid:.6}"),
    ))
}

/// Spectral gap against the constant and under refinement.
fn poincare_gap() -> Result<Outcome, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let coarse = estimate_spectral_gap(&form(1.0, 50.0, 2000))?.gap;
    let coarse_time = start.elapsed();
    let fine = estimate_spectral_gap(&form(1.0, 50.0, 4000))?.gap;
    let drift = (fine - coarse).abs() / coarse;
    let pass = coarse >= 0.9 * SQRT_2 && fine >= 0.9 * SQRT_2 && drift < 0.05;
    // the time limit applies to the n = 2000 solve
    Ok(Outcome {
        pass: pass && coarse_time < Duration::from_secs(120),
        detail: format!(
            "gap(n=2000)={coarse:.5}, gap(n=4000)={fine:.5}, drift={:.2}%, 0.9c={:.5}; n=2000 took {:.2}s (limit 120s)",
            100.0 * drift,
            0.9 * SQRT_2,
            coarse_time.as_secs_f64()
        ),
    })
}

/// Entropy and Beckner suites, the p = 2 reduction and both limits.
fn entropy_beckner() -> Result<Outcome, Box<dyn std::error::Error>> {
    let f = form(1.0, 50.0, 2000);
    let positive = band_limited(f.grid(), 200, SEED, true);
    let mut pass = true;
    let mut detail = Vec::new();

    let ent = check_entropy(&f, SQRT_2, &positive, 0.1)?;
    pass &= ent.pass;
    detail.push(format!("entropy worst={:.4}", ent.worst_ratio));
    for p in [1.25, 1.5, 1.75, 2.0] {
        let r = check_beckner(&f, SQRT_2, p, &positive, 0.1)?;
        pass &= r.pass;
        detail.push(format!("beckner(p={p}) worst={:.4}", r.worst_ratio));
    }

    let p2 = check_beckner(&f, SQRT_2, 2.0, &positive, 0.1)?;
    let poincare = check_poincare(&f, SQRT_2, &positive, None, 0.1)?;
    let gap = p2
        .ratios
        .iter()
        .zip(&poincare.ratios)
        .map(|(a, b)| (a.ratio - b.ratio).abs() / b.ratio)
        .fold(0.0, f64::max);
    pass &= gap <= 1e-10 && p2.ratios.len() == poincare.ratios.len();
    detail.push(format!("max|beckner(2)-poincare|/poincare={gap:.1e}"));

    // f = 1 + εg: Ent ≈ ε²Var(g)/2 and D(f, log f) ≈ ε²D(g,g), so twice the
    // entropy ratio tends to the Poincaré ratio
    let eps = 1e-3;
    let signed = band_limited(f.grid(), 20, SEED + 1, false);
    let mut lin = 0.0f64;
    for g in &signed {
        let one_plus: Vec<f64> = g.values.iter().map(|v| 1.0 + eps * v).collect();
        let logs: Vec<f64> = one_plus.iter().map(|v| v.ln()).collect();
        let ent_ratio = entropy(&f, &one_plus)? / dirichlet_bilinear(&f, &one_plus, &logs)?;
        let poi_ratio = variance(&f, &g.values)? / dirichlet_energy(&f, &g.values)?;
        lin = lin.max((2.0 * ent_ratio - poi_ratio).abs() / poi_ratio);
    }
    pass &= lin < 0.01;
    detail.push(format!("linearization err={:.2e}", lin));

    // p → 1: Beckner ratio tends to the entropy ratio
    let p = 1.0 + 1e-4;
    let mut lim = 0.0f64;
    for g in positive.iter().take(20) {
        let logs: Vec<f64> = g.values.iter().map(|v| v.ln()).collect();
        let ent_ratio = entropy(&f, &g.values)? / dirichlet_bilinear(&f, &g.values, &logs)?;
        let bk_ratio = beckner_deficit(&f, &g.values, p)?
            / dirichlet_bilinear(&f, &g.values, &power_minus_one(&g.values, p))?;
        lim = lim.max((bk_ratio - ent_ratio).abs() / ent_ratio);
    }
    pass &= lim < 0.01;
    detail.push(format!("p->1 err={:.2e}", lim));
    Ok(Outcome {
        pass,
        detail: detail.join(", "),
    })
}

fn weak_suite(f: &DiscreteForm) -> Vec<TestFunction> {
    let mut suite = band_limited(f.grid(), 200, SEED, false);
    suite.extend(smoothed_bumps(f.grid()));
    suite
}

/// Weak Poincaré inequality and the rate exponent.
fn weak_poincare() -> Result<Outcome, Box<dyn std::error::Error>> {
    let (eps, alpha) = (0.3, 0.5);
    let m = polynomial(eps);
    let f = form(eps, 50.0, 2000);
    let rate = RateFunction::weak_poincare(&m, &stable(), Domain::Analytic)?;
    let rs = log_points(1e-3, 1e-1, 9);
    let report = check_weak_poincare(&f, &rate, &weak_suite(&f), &rs, 0.1)?;
    let points: Vec<(f64, f64)> = rs.iter().map(|&r| Ok((r, rate.eval(r)?))).collect::<Result<_, nonlocal_ineq::Error>>()?;
    let slope = loglog_slope(&points);
    let target = wp_exponent_polynomial(alpha, eps);
    let pass = report.pass && within(slope, target, 0.2);
    Ok(Outcome {
        pass,
        detail: format!(
            "worst ratio={:.4} ({}), slope={slope:.4} vs {target:.4}",
            report.worst_ratio,
            report.witness.unwrap_or_default()
        ),
    })
}

/// Super Poincaré inequality and the rate exponent.
fn super_poincare() -> Result<Outcome, Box<dyn std::error::Error>> {
    let (eps, alpha) = (1.5, 0.5);
    let m = polynomial(eps);
    let f = form(eps, 50.0, 2000);
    let w = example_weight(&m, &stable())?;
    let beta = RateFunction::super_poincare(&m, &stable(), w)?;
    let rs = log_points(1e-2, 1.0, 9);
    let report = check_super_poincare(&f, &beta, &weak_suite(&f), &rs, 0.15)?;
    let points: Vec<(f64, f64)> = rs.iter().map(|&r| Ok((r, beta.eval(r)?))).collect::<Result<_, nonlocal_ineq::Error>>()?;
    let slope = loglog_slope(&points);
    let target = sp_exponent_polynomial(1.0, alpha, eps);
    let pass = report.pass && report.skipped.is_empty() && within(slope, target, 0.25);
    Ok(Outcome {
        pass,
        detail: format!(
            "worst ratio={:.4} ({}), slope={slope:.3} vs {target:.3}, skipped={}",
            report.worst_ratio,
            report.witness.unwrap_or_default(),
            report.skipped.len()
        ),
    })
}

/// Cutoff Rayleigh quotients without a spectral gap.
fn sharpness() -> Result<Outcome, Box<dyn std::error::Error>> {
    let f = form(0.3, 200.0, 2000);
    let report = cutoff_family_ratio(&f, &[2.0, 4.0, 8.0, 16.0, 32.0])?;
    let first = report.points[0].1;
    let last = report.points[report.points.len() - 1].1;
    let drop = last / first;
    let ratios: Vec<String> = report.points.iter().map(|(_, r)| format!("{r:.4}")).collect();
    Ok(Outcome {
        pass: report.strictly_decreasing && drop < 0.3,
        detail: format!(
            "ratios=[{}], strictly decreasing={}, final/initial={drop:.3} (needs < 0.3), slope={:.3}",
            ratios.join(", "),
            report.strictly_decreasing,
            report.loglog_slope
        ),
    })
}

/// `L^p` Poincaré at p = 3.
fn lp_poincare() -> Result<Outcome, Box<dyn std::error::Error>> {
    let f = form(1.0, 50.0, 2000);
    let suite = band_limited(f.grid(), 200, SEED, false);
    let report = check_lp_poincare(&f, SQRT_2, 3.0, &suite, 0.1)?;
    Ok(Outcome {
        pass: report.pass,
        detail: format!("worst ratio={:.4} ({})", report.worst_ratio, report.witness.unwrap_or_default()),
    })
}

/// Porous-medium decay against the bound and the differential inequality.
fn pme_decay() -> Result<Outcome, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let m = polynomial(1.0);
    let f = form(1.0, 50.0, 1000);
    let analytic = condition_infimum(&m, &stable(), Domain::Analytic)?.value;
    let (c, source) = decay_constant(Some(analytic), form_condition(&f).0);
    let gen = GeneratorMatrix::new(&f)?;
    let mut u0 = f.grid().sample(|x| (-x * x).exp());
    center(&mut u0, f.mass_hat());
    let traj = evolve(&gen, &u0, 2.0, 2.0, 1e-3)?;
    let report = check_decay(&traj, &f, 2.0, c, 0.1, 0.1)?;
    let mass = traj.mass.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let frac = report.constants["differential_fraction"];
    let literal = report.constants["differential_fraction_inverse_c"];
    let pass = report.pass && literal >= 0.99 && mass <= 1e-8;
    Ok(timed(
        Duration::from_secs(60),
        start,
        pass,
        format!(
            "c={c:.5} ({source}), steps={}, max E/bound={:.4}, differential 2c: {:.4}, 2/c: {:.4}, max|mass|={mass:.1e}",
            traj.dts.len(),
            report.worst_ratio,
            frac,
            literal
        ),
    ))
}

/// Matrix quadratic form against the double sum, and the pairwise identities.
fn oracles() -> Result<Outcome, Box<dyn std::error::Error>> {
    let f = form(1.0, 50.0, 400);
    let n = f.len();
    let funcs = band_limited(f.grid(), 100, SEED + 2, true);
    let mut quad_err = 0.0f64;
    let mut var_err = 0.0f64;
    let mut ent_err = 0.0f64;
    let mut bk_err = 0.0f64;
    let mut ordered = true;
    let mu = f.mass_hat();
    let mean = |g: &[f64]| -> f64 { g.iter().zip(mu).map(|(a, b)| a * b).sum() };
    for g in &funcs {
        let v = &g.values;
        // vᵀ (diag(W1) - W) v
        let mut quad = 0.0;
        for i in 0..n {
            let row = f.row(i);
            let degree: f64 = row.iter().sum();
            let wv: f64 = row.iter().zip(v).map(|(w, x)| w * x).sum();
            quad += v[i] * (degree * v[i] - wv);
        }
        let d = dirichlet_energy(&f, v)?;
        quad_err = quad_err.max((quad - d).abs() / d);

        let var = variance(&f, v)?;
        var_err = var_err.max((var - pair_covariance(mu, v, v)?).abs() / var);

        let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let fl: Vec<f64> = v.iter().zip(&logs).map(|(a, b)| a * b).collect();
        let pc = pair_covariance(mu, v, &logs)?;
        ent_err = ent_err.max((mean(&fl) - mean(v) * mean(&logs) - pc).abs() / pc);
        ordered &= entropy(&f, v)? <= pc * (1.0 + 1e-12);

        let p = 1.5;
        let pm = power_minus_one(v, p);
        let fp: Vec<f64> = v.iter().map(|x| x.powf(p)).collect();
        let pc = pair_covariance(mu, v, &pm)?;
        bk_err = bk_err.max((mean(&fp) - mean(v) * mean(&pm) - pc).abs() / pc);
        ordered &= beckner_deficit(&f, v, p)? <= pc * (1.0 + 1e-12);
    }
    let pass = quad_err < 1e-10 && var_err < 1e-10 && ent_err < 1e-10 && bk_err < 1e-10 && ordered;
    Ok(Outcome {
        pass,
        detail: format!(
            "quadratic form {quad_err:.1e}, variance {var_err:.1e}, entropy {ent_err:.1e}, beckner {bk_err:.1e}, inequalities ordered={ordered}"
        ),
    })
}

/// Same seed, same bytes.
fn determinism() -> Result<Outcome, Box<dyn std::error::Error>> {
    let run = || -> Result<String, Box<dyn std::error::Error>> {
        let f = form(1.0, 30.0, 400);
        let suite = band_limited(f.grid(), 50, SEED, true);
        let gap = estimate_spectral_gap(&f)?;
        let mut out = serde_json::to_string(&check_poincare(&f, SQRT_2, &suite, Some(&gap.eigenvector), 0.1)?)?;
        out += &serde_json::to_string(&check_entropy(&f, SQRT_2, &suite, 0.1)?)?;
        let gen = GeneratorMatrix::new(&f)?;
        let mut u0 = suite[0].values.clone();
        center(&mut u0, f.mass_hat());
        out += &evolve(&gen, &u0, 2.0, 0.5, 1e-3)?.to_csv(SQRT_2)?;
        Ok(out)
    };
    let a = run()?;
    let b = run()?;
    Ok(Outcome {
        pass: a == b,
        detail: format!("{} bytes, identical={}", a.len(), a == b),
    })
}

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("normalization constants", normalization),
        ("condition constant", condition_constant),
        ("poincare spectral gap", poincare_gap),
        ("entropy and beckner", entropy_beckner),
        ("weak poincare", weak_poincare),
        ("super poincare", super_poincare),
        ("sharpness regime", sharpness),
        ("lp poincare", lp_poincare),
        ("porous medium decay", pme_decay),
        ("oracle equivalence", oracles),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
