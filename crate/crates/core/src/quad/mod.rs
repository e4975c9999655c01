//! Truncated grids and assembly of the discrete Dirichlet form.
//!
//! The pair weight is `W_ij = ρ_ij (e^{-V(x_i)} + e^{-V(x_j)}) Δ²`, so that
//! `Σ_{i<j} W_ij (f_i - f_j)²` approximates the full double integral
//! `∬ (f(x)-f(y))² ρ(|x-y|) dy μ_V(dx)` (both orderings of each pair folded in).

pub mod adaptive;

use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{KernelSpec, MeasureSpec};

/// Tail mass above which a grid carries a warning.
pub const TAIL_WARNING: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct Grid {
    radius: f64,
    spacing: f64,
    nodes: Vec<f64>,
    density: Vec<f64>,
    mass: Vec<f64>,
    tail_mass: f64,
    measure_tag: String,
    warnings: Vec<String>,
}

/// Builds the uniform grid `x_i = -R + (i+½)Δ`, `Δ = 2R/n`, with cell masses
/// `μ_i = e^{-V(x_i)} Δ`.
pub fn build_grid(measure: &MeasureSpec, radius: f64, n: usize) -> Result<Grid> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("R", format!("must be positive, got {radius}")));
    }
    if n < 16 || !n.is_multiple_of(2) {
        return Err(invalid("n", format!("must be even and at least 16, got {n}")));
    }
    measure.require_normalized()?;
    let spacing = 2.0 * radius / n as f64;
    // (i + ½ - n/2) is an exact half-integer, so the layout is exactly symmetric
    let half = (n / 2) as f64;
    let nodes: Vec<f64> = (0..n)
        .map(|i| (i as f64 + 0.5 - half) * spacing)
        .collect();
    let density = nodes
        .iter()
        .map(|&x| measure.density(x))
        .collect::<Result<Vec<_>>>()?;
    let tail_mass = measure.tail_mass(radius)?;
    let mut grid = Grid::from_density(nodes, spacing, density)?;
    grid.radius = radius;
    grid.tail_mass = tail_mass;
    grid.measure_tag = measure.label();
    if tail_mass > TAIL_WARNING {
        grid.warnings.push(format!(
            "truncated tail mass {tail_mass:.4} exceeds {TAIL_WARNING}; increase R"
        ));
    }
    Ok(grid)
}

/// Smallest radius (to 1%) with tail mass below `target`, capped at `cap`.
pub fn radius_for_tail_mass(measure: &MeasureSpec, target: f64, cap: f64) -> Result<f64> {
    let mut r = 1.0;
    while measure.tail_mass(r)? > target {
        r *= 1.01;
        if r >= cap {
            return Ok(cap);
        }
    }
    Ok(r)
}

impl Grid {
    /// A grid from explicit nodes and densities `e^{-V(x_i)}`; masses are
    /// `density · spacing`. Intended for small hand-built examples.
    pub fn from_density(nodes: Vec<f64>, spacing: f64, density: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("nodes", "need at least two nodes"));
        }
        crate::error::ensure_len(nodes.len(), density.len())?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("nodes", "must be strictly increasing"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid("density", "must be finite and strictly positive"));
        }
        let mass = density.iter().map(|d| d * spacing).collect();
        let radius = 0.5 * (nodes[nodes.len() - 1] - nodes[0] + spacing);
        Ok(Self {
            radius,
            spacing,
            nodes,
            density,
            mass,
            tail_mass: 0.0,
            measure_tag: "explicit".into(),
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `e^{-V(x_i)}`.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `μ_i / Σμ`.
    pub fn mass_hat(&self) -> Vec<f64> {
        let total = self.total_mass();
        self.mass.iter().map(|m| m / total).collect()
    }

    /// Measure of the truncated tails, `μ_V(|x| > R)`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn measure_tag(&self) -> &str {
        &self.measure_tag
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `Σ f_i μ_i` (unnormalized cell masses).
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        crate::error::ensure_len(self.len(), f.len())?;
        Ok(f.iter().zip(&self.mass).map(|(f, m)| f * m).sum())
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Dense symmetric pair weights over a grid.
#[derive(Clone, Debug)]
pub struct DiscreteForm {
    grid: Grid,
    weights: Vec<f64>,
    mass_hat: Vec<f64>,
    kernel_tag: String,
    subdiv: usize,
}

impl DiscreteForm {
    /// Wraps explicit weights (row-major, `n × n`). The matrix must be exactly
    /// symmetric, finite and nonnegative with a zero diagonal.
    pub fn from_weights(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        crate::error::ensure_len(n * n, weights.len())?;
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(invalid("weights", format!("diagonal entry {i} is nonzero")));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(invalid("weights", format!("entry ({i},{j}) = {w}")));
                }
                if w != weights[j * n + i] {
                    return Err(invalid("weights", format!("not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            mass_hat: grid.mass_hat(),
            grid,
            weights,
            kernel_tag: "explicit".into(),
            subdiv: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.weights[i * n..(i + 1) * n]
    }

    pub fn mass_hat(&self) -> &[f64] {
        &self.mass_hat
    }

    pub fn kernel_tag(&self) -> &str {
        &self.kernel_tag
    }

    pub fn subdiv(&self) -> usize {
        self.subdiv
    }

    /// Writes the weights as CSV: a header row `n,R,kernel,measure`, its
    /// values, then `n` rows of `n` weights.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,R,kernel,measure")?;
        writeln!(
            out,
            "{},{},\"{}\",\"{}\"",
            self.len(),
            self.grid.radius,
            self.kernel_tag,
            self.grid.measure_tag
        )?;
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|w| w.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Assembles `W` on `grid`. Pairs at distance `>= 2Δ` use the kernel at the
/// node pair; neighbouring cells are split into `subdiv × subdiv` sub-cells
/// whose midpoints never coincide, and each sub-pair is weighted by
/// `((x_a - y_b)/Δ)²` so that linear functions see the exact cell-pair energy.
/// Self-pairs are dropped.
pub fn assemble_form_matrix(grid: &Grid, kernel: &KernelSpec, subdiv: usize) -> Result<DiscreteForm> {
    if subdiv < 4 {
        return Err(invalid("subdiv", format!("must be at least 4, got {subdiv}")));
    }
    if kernel.is_radial() {
        let report = kernel.integrability_check()?;
        if !report.finite {
            return Err(Error::NonIntegrable(format!(
                "kernel {} fails the integrability condition: {}",
                kernel.label(),
                report.diagnostic
            )));
        }
    }
    let n = grid.len();
    let mut weights = vec![0.0; n * n];
    let fill_row = |(i, row): (usize, &mut [f64])| -> Result<()> {
        for (j, w) in row.iter_mut().enumerate() {
            if j != i {
                *w = pair_weight(grid, kernel, subdiv, i.min(j), i.max(j))?;
            }
        }
        Ok(())
    };
    #[cfg(feature = "parallel")]
    weights.par_chunks_mut(n).enumerate().try_for_each(fill_row)?;
    #[cfg(not(feature = "parallel"))]
    weights.chunks_mut(n).enumerate().try_for_each(fill_row)?;

    Ok(DiscreteForm {
        mass_hat: grid.mass_hat(),
        grid: grid.clone(),
        weights,
        kernel_tag: kernel.label(),
        subdiv,
    })
}

/// Plain nodal rule `W_ij = j(x_i, x_j)(e^{-V(x_i)} + e^{-V(x_j)})Δ²` on every
/// pair, without the neighbouring-cell correction or the integrability
/// check. Meant for small explicit grids.
pub fn assemble_nodal(grid: &Grid, kernel: &KernelSpec) -> Result<DiscreteForm> {
    let n = grid.len();
    let h = grid.spacing;
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = checked_kernel(kernel, grid.nodes[i], grid.nodes[j], i, j)?;
            let w = k * (grid.density[i] + grid.density[j]) * h * h;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    Ok(DiscreteForm {
        mass_hat: grid.mass_hat(),
        grid: grid.clone(),
        weights,
        kernel_tag: kernel.label(),
        subdiv: 0,
    })
}

// Always called with lo < hi so that both triangles get bit-identical values.
fn pair_weight(grid: &Grid, kernel: &KernelSpec, subdiv: usize, lo: usize, hi: usize) -> Result<f64> {
    let (x, y) = (grid.nodes[lo], grid.nodes[hi]);
    let h = grid.spacing;
    let factor = if hi - lo == 1 {
        let step = h / subdiv as f64;
        let mut sum = 0.0;
        for a in 0..subdiv {
            let xa = x - 0.5 * h + (a as f64 + 0.5) * step;
            for b in 0..subdiv {
                let yb = y - 0.5 * h + (b as f64 + 0.5) * step;
                let u = (yb - xa) / h;
                sum += checked_kernel(kernel, xa, yb, lo, hi)? * u * u;
            }
        }
        sum / (subdiv * subdiv) as f64
    } else {
        checked_kernel(kernel, x, y, lo, hi)?
    };
    Ok(factor * (grid.density[lo] + grid.density[hi]) * h * h)
}

fn checked_kernel(kernel: &KernelSpec, x: f64, y: f64, i: usize, j: usize) -> Result<f64> {
    let v = kernel.pair_value(x, y)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!(
            "kernel value {v} for cell pair ({i}, {j}) at ({x}, {y})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly(eps: f64) -> MeasureSpec {
        MeasureSpec::polynomial_tail(eps).unwrap().normalize(1e-10).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = build_grid(&poly(1.0), 10.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_relative_eq!(g.spacing(), 0.2, max_relative = 1e-15);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        for i in 0..50 {
            assert_eq!(g.nodes()[i], -g.nodes()[99 - i]);
        }
        assert_relative_eq!(g.tail_mass(), 1.0 / 11.0, max_relative = 1e-14);
        assert!(g.warnings().len() == 1);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        let m = poly(1.0);
        assert!(build_grid(&m, 10.0, 15).is_err());
        assert!(build_grid(&m, 10.0, 14).is_err());
        assert!(build_grid(&m, 0.0, 100).is_err());
        assert!(build_grid(&m, -1.0, 100).is_err());
        let raw = MeasureSpec::polynomial_tail(1.0).unwrap();
        assert_eq!(build_grid(&raw, 10.0, 100).unwrap_err(), Error::NotNormalized);
    }

    #[test]
    fn grid_integration() {
        let m = poly(1.0);
        let g = build_grid(&m, 200.0, 4000).unwrap();
        let ones = vec![1.0; g.len()];
        // midpoint rule error on the peak is O(Δ²)
        assert_relative_eq!(g.integrate(&ones).unwrap(), 1.0 - g.tail_mass(), max_relative = 1e-3);
        let odd = g.sample(|x| x.powi(3) - x);
        assert!(g.integrate(&odd).unwrap().abs() < 1e-12 * g.integrate(&g.sample(|x| x.abs().powi(3))).unwrap());
        assert!(g.integrate(&[1.0]).is_err());

        let e = MeasureSpec::exponential(2.0).unwrap().normalize(1e-10).unwrap();
        let g = build_grid(&e, 20.0, 4000).unwrap();
        let second = g.integrate(&g.sample(|x| x * x)).unwrap();
        assert_relative_eq!(second, 0.5, max_relative = 1e-4);
    }

    #[test]
    fn two_cell_toy_with_constant_kernel() {
        let v: f64 = 0.7;
        let g = Grid::from_density(vec![-0.5, 0.5], 1.0, vec![(-v).exp(); 2]).unwrap();
        let k = KernelSpec::custom_radial("one", |_| 1.0);
        // constant kernel fails the far-field integrability test, so build directly
        assert!(assemble_form_matrix(&g, &k, 4).is_err());
        let w = pair_weight(&g, &k, 4, 0, 1).unwrap();
        // the moment-matched factor of a constant kernel is E[(y-x)²]/Δ² over two unit cells = 1 + 1/6
        assert_relative_eq!(w, 2.0 * (-v).exp() * (1.0 + 1.0 / 6.0 - 1.0 / 96.0), max_relative = 1e-12);
        let nodal = assemble_nodal(&g, &k).unwrap();
        assert_relative_eq!(nodal.weight(0, 1), 2.0 * (-v).exp(), max_relative = 1e-15);
    }

    #[test]
    fn assembled_weights_are_symmetric_and_finite() {
        let m = poly(1.0);
        let g = build_grid(&m, 5.0, 64).unwrap();
        for alpha in [0.25, 0.5, 1.0, 1.5, 1.9] {
            let k = KernelSpec::stable(alpha).unwrap();
            let f = assemble_form_matrix(&g, &k, 8).unwrap();
            let n = f.len();
            for i in 0..n {
                assert_eq!(f.weight(i, i), 0.0);
                for j in 0..n {
                    assert_eq!(f.weight(i, j), f.weight(j, i));
                    assert!(f.weight(i, j).is_finite() && f.weight(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn subdiv_lower_bound() {
        let g = build_grid(&poly(1.0), 5.0, 16).unwrap();
        let k = KernelSpec::stable(0.5).unwrap();
        assert!(assemble_form_matrix(&g, &k, 3).is_err());
    }

    #[test]
    fn csv_dump_header() {
        let g = build_grid(&poly(1.0), 5.0, 16).unwrap();
        let f = assemble_form_matrix(&g, &KernelSpec::stable(0.5).unwrap(), 4).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,R,kernel,measure");
        assert_eq!(lines[1], "16,5,\"stable(alpha=0.5)\",\"polynomial_tail(eps=1)\"");
        assert_eq!(lines.len(), 18);
        let parsed: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, f.row(0));
    }
}
