//! wasm-bindgen entry points for the browser demo in `www/`. Every function
//! returns a JSON string; errors become JS exceptions carrying the message.

use serde_json::json;
use wasm_bindgen::prelude::*;

use nonlocal_ineq::criteria::{condition_infimum, example_weight, form_condition, Domain, RateFunction};
use nonlocal_ineq::pme::{center, decay_constant, evolve, GeneratorMatrix};
use nonlocal_ineq::verify::estimate_spectral_gap;
use nonlocal_ineq::{assemble_form_matrix, build_grid, DiscreteForm, Error, KernelSpec, MeasureSpec};

/// Demo grids stay small enough for a dense solve in the browser.
pub const MAX_NODES: usize = 1200;
const SUBDIV: usize = 8;

fn js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn setup(eps: f64, alpha: f64, radius: f64, n: usize) -> Result<(MeasureSpec, KernelSpec, DiscreteForm), Error> {
    if n > MAX_NODES {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("demo supports n <= {MAX_NODES}"),
        });
    }
    let measure = MeasureSpec::polynomial_tail(eps)?.normalize(1e-12)?;
    let kernel = KernelSpec::stable(alpha)?;
    let grid = build_grid(&measure, radius, n)?;
    let form = assemble_form_matrix(&grid, &kernel, SUBDIV)?;
    Ok((measure, kernel, form))
}

/// Closed-form constant when positive and not above the form's own.
fn constant(measure: &MeasureSpec, kernel: &KernelSpec, form: &DiscreteForm) -> Result<(f64, &'static str), Error> {
    let analytic = condition_infimum(measure, kernel, Domain::Analytic)?.value;
    Ok(decay_constant(Some(analytic), form_condition(form).0))
}

pub fn spectral_gap_json(eps: f64, alpha: f64, radius: f64, n: usize) -> Result<String, Error> {
    let (measure, kernel, form) = setup(eps, alpha, radius, n)?;
    let gap = estimate_spectral_gap(&form)?;
    let analytic = condition_infimum(&measure, &kernel, Domain::Analytic)?.value;
    Ok(json!({
        "gap": gap.gap,
        "iterations": gap.iterations,
        "analytic_constant": analytic,
        "x": form.grid().nodes(),
        "eigenvector": gap.eigenvector,
        "tail_mass": form.grid().tail_mass(),
    })
    .to_string())
}

pub fn rate_curves_json(eps: f64, alpha: f64, r_min: f64, r_max: f64, points: usize) -> Result<String, Error> {
    if !(r_min > 0.0 && r_max > r_min && points >= 2) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "need 0 < r_min < r_max and at least 2 points".into(),
        });
    }
    let measure = MeasureSpec::polynomial_tail(eps)?.normalize(1e-12)?;
    let kernel = KernelSpec::stable(alpha)?;
    let rs: Vec<f64> = (0..points)
        .map(|i| (r_min.ln() + (r_max / r_min).ln() * i as f64 / (points - 1) as f64).exp())
        .collect();
    let eval = |rate: &RateFunction| -> Vec<Option<f64>> { rs.iter().map(|&r| rate.eval(r).ok()).collect() };
    let wp = eval(&RateFunction::weak_poincare(&measure, &kernel, Domain::Analytic)?);
    let sp = match example_weight(&measure, &kernel) {
        Ok(w) => eval(&RateFunction::super_poincare(&measure, &kernel, w)?),
        Err(_) => vec![None; rs.len()],
    };
    let local = eval(&RateFunction::local_super_poincare(&measure, &kernel, 1.0)?);
    Ok(json!({ "r": rs, "wp_rate": wp, "sp_beta": sp, "local_sp_beta": local }).to_string())
}

pub fn pme_decay_json(eps: f64, alpha: f64, radius: f64, n: usize, m: f64, t_end: f64) -> Result<String, Error> {
    let (measure, kernel, form) = setup(eps, alpha, radius, n)?;
    let (c, source) = constant(&measure, &kernel, &form)?;
    let gen = GeneratorMatrix::new(&form)?;
    let mut u0 = form.grid().sample(|x| (-x * x).exp());
    center(&mut u0, form.mass_hat());
    let traj = evolve(&gen, &u0, m, t_end, 1e-3)?;
    Ok(json!({
        "t": traj.times,
        "l2": traj.l2,
        "bound": traj.bounds(c)?,
        "c": c,
        "constant_source": source,
    })
    .to_string())
}

/// Spectral gap and its minimizer for a polynomial tail against a stable kernel.
#[wasm_bindgen]
pub fn spectral_gap(eps: f64, alpha: f64, radius: f64, n: usize) -> Result<String, JsValue> {
    spectral_gap_json(eps, alpha, radius, n).map_err(js)
}

/// Weak, super and local super Poincaré rates on a log grid of `r`.
#[wasm_bindgen]
pub fn rate_curves(eps: f64, alpha: f64, r_min: f64, r_max: f64, points: usize) -> Result<String, JsValue> {
    rate_curves_json(eps, alpha, r_min, r_max, points).map_err(js)
}

/// `μ(u_t²)` of the porous-medium flow from a centered bump, with its bound.
#[wasm_bindgen]
pub fn pme_decay(eps: f64, alpha: f64, radius: f64, n: usize, m: f64, t_end: f64) -> Result<String, JsValue> {
    pme_decay_json(eps, alpha, radius, n, m, t_end).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn gap_payload() {
        let v: Value = serde_json::from_str(&spectral_gap_json(1.0, 0.5, 30.0, 200).unwrap()).unwrap();
        assert!(v["gap"].as_f64().unwrap() > 0.9 * std::f64::consts::SQRT_2);
        assert_eq!(v["x"].as_array().unwrap().len(), 200);
        assert!(spectral_gap_json(1.0, 0.5, 30.0, MAX_NODES + 2).is_err());
    }

    #[test]
    fn curves_and_decay() {
        let v: Value = serde_json::from_str(&rate_curves_json(0.3, 0.5, 1e-3, 1e-1, 5).unwrap()).unwrap();
        assert!(v["wp_rate"][0].as_f64().unwrap() > v["wp_rate"][4].as_f64().unwrap());
        assert!(v["sp_beta"][0].is_null());
        let v: Value = serde_json::from_str(&pme_decay_json(1.0, 0.5, 20.0, 100, 2.0, 0.2).unwrap()).unwrap();
        let l2 = v["l2"].as_array().unwrap();
        let bound = v["bound"].as_array().unwrap();
        assert!(l2.last().unwrap().as_f64().unwrap() <= bound.last().unwrap().as_f64().unwrap() * 1.1);
    }
}
