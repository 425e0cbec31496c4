//! Crime/SIR compartmental model toolkit.
//!
//! - [`model`]: parameters, vector fields, Hamiltonian and co-state field
//! - [`dynamics`]: fixed-step RK4 forward/backward integration and invariance monitoring
//! - [`equilibria`]: closed-form crime-free and endemic equilibria
//! - [`stability`]: Jacobians, 3×3 eigenvalues, Routh–Hurwitz, next-generation R₀
//! - [`control`]: three-control optimal policy via forward–backward sweep
//! - [`sensitivity`]: local parameter elasticities and rankings
//! - [`config`], [`output`], [`cli`]: scenario files, CSV/report/SVG emission, subcommands

pub mod cli;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod equilibria;
pub mod model;
pub mod output;
pub mod sensitivity;
pub mod stability;

pub use control::{
    forward_backward_sweep, ControlBounds, ControlSchedule, OptimizationResult, SweepOptions,
    U3Rule,
};
pub use dynamics::{integrate_backward, integrate_forward, TimeGrid, Trajectory};
pub use model::{AdjointState, Controls, CostWeights, ModelParams, State};
