//! Empirical-likelihood estimation from CCF residuals.

pub mod covariance;
pub mod dual;
pub mod estimate;
pub mod grid;
pub mod objective;

pub use covariance::asymptotic_covariance;
pub use dual::{local_el_ratio, q1n, solve_lambda, LambdaSolve};
pub use estimate::{estimate_el, minimize_el, minimize_el_with, ElOptions, EstimateResult};
pub use grid::{build_grid, build_test_grid, FrequencyGrid, GridSummary, Support};
pub use objective::{integrated_el_ratio, ElProblem, IntegratedEl, ResidualPanel};
