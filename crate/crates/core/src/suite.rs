//! Seeded families of smooth test functions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quad::Grid;

pub const MAX_MODES: usize = 10;
pub const MAX_FREQUENCY: u32 = 16;
/// Floor of the positive variants.
pub const POSITIVE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub values: Vec<f64>,
}

/// `size` functions `Σ a_k trig(π j_k x / R)` with at most [`MAX_MODES`]
/// modes, integer frequencies `j_k <= MAX_FREQUENCY` and amplitudes in
/// `[-1, 1]`. With `positive`, each is shifted so that its minimum is
/// [`POSITIVE_FLOOR`].
pub fn band_limited(grid: &Grid, size: usize, seed: u64, positive: bool) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = PI / grid.radius();
    (0..size)
        .map(|k| {
            let modes = rng.random_range(1..=MAX_MODES);
            let terms: Vec<(f64, f64, bool)> = (0..modes)
                .map(|_| {
                    let freq = rng.random_range(1..=MAX_FREQUENCY) as f64 * scale;
                    let amp = rng.random_range(-1.0..=1.0);
                    (amp, freq, rng.random_bool(0.5))
                })
                .collect();
            let mut values = grid.sample(|x| {
                terms
                    .iter()
                    .map(|&(a, w, cosine)| a * if cosine { (w * x).cos() } else { (w * x).sin() })
                    .sum()
            });
            if positive {
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                for v in &mut values {
                    *v += POSITIVE_FLOOR - min;
                }
            }
            TestFunction {
                id: format!("band{k}"),
                values,
            }
        })
        .collect()
}

/// Smoothed indicators `1/(1 + e^{(|x| - a)/w})` of centered intervals with
/// half-widths `a = 2^k`, `w = a/8`, for `2^k <= R/2`.
pub fn smoothed_bumps(grid: &Grid) -> Vec<TestFunction> {
    let mut out = Vec::new();
    let mut a = 0.5;
    while a <= 0.5 * grid.radius() {
        let w = a / 8.0;
        out.push(TestFunction {
            id: format!("bump{a}"),
            values: grid.sample(|x| 1.0 / (1.0 + ((x.abs() - a) / w).exp())),
        });
        a *= 2.0;
    }
    out
}
