//! Optimal transport on the flat 2-torus by continuation from the
//! Knothe–Rosenblatt rearrangement to the Brenier map.
//!
//! The cost `c_t(x, y) = ½ (x − y)ᵀ A_t (x − y)` with `A_t = diag(1, λ_t)`
//! interpolates between the anisotropic limit `t → 0`, whose optimal map is
//! the Knothe rearrangement, and the quadratic cost at `t = 1`. The
//! potential `ψ_t` solving the Monge–Ampère equation for `A_t` is followed
//! along `t` by a predictor–corrector scheme.

pub mod commands;
pub mod config;
pub mod continuation;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod knothe;
pub mod linearized;
pub mod monge_ampere;
pub mod transport1d;
pub mod trig;

pub use continuation::{
    decompose, init_from_knothe, newton_correct, run, velocity, ContinuationOptions, Grading,
    Predictor, Steps, Trajectory,
};
pub use config::{load_config, parse_config, Overrides, RunConfig};
pub use error::{Error, Result};
pub use grid::{PeriodicGrid, ScalarField, VectorField};
pub use knothe::{knothe_potentials, knothe_rearrangement, l2_map_distance, KnotheMap, KnothePotentials};
pub use linearized::{apply_duf, rhs_daf, solve_duf, solve_smallt, solve_t0};
pub use monge_ampere::{
    c_concavity_margin, pushforward_residual, residual_f, residual_g, transport_map, CostMatrix,
    CostSchedule, DensityPair,
};
pub use trig::{CosineMode, TrigPoly2};
