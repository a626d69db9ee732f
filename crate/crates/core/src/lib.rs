//! Risk-aware dispatch for power networks driven by Brownian disturbances.
//!
//! Given supply ceilings and a demand forecast, the library computes the supply
//! vector that minimizes the worst line of `|m_k| + r_ε·σ_k`, where `m_k` is the
//! synchronous angle difference of line `k` and `σ_k` its invariant standard
//! deviation under the linearized stochastic swing dynamics.

pub mod equilibrium;
pub mod error;
pub mod feasible_set;
pub mod fixtures;
pub mod linearization;
pub mod lyapunov;
pub mod montecarlo;
pub mod network;
pub mod optimizer;
pub mod report;
pub mod risk;

pub use error::{Error, Result};
pub use network::{load_network, parse_network, DispatchProblem, PowerNetwork};
pub use optimizer::{
    grid_minimize, minimize, minimize_multi, proportional_dispatch, Evaluator, MinimizeOptions,
    ObjectiveEvaluation, OptimizationResult,
};
