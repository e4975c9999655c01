//! Discretized non-local Dirichlet forms `D(f,f) = ∬ (f(x)-f(y))² ρ(|x-y|) dy μ_V(dx)`
//! on truncated one-dimensional grids, with numerical checks of the
//! Poincaré, weak/super Poincaré, entropy, Beckner and `L^p` inequalities
//! and of the porous-media decay bound.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod criteria;
pub mod error;
pub mod forms;
pub mod linalg;
pub mod model;
pub mod pme;
pub mod quad;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
pub use forms::GridFunction;
pub use model::{KernelSpec, MeasureFamily, MeasureSpec};
pub use quad::{assemble_form_matrix, build_grid, DiscreteForm, Grid};
