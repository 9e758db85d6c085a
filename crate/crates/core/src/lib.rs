//! Estimation and specification testing of continuous-time Markov models
//! through their conditional characteristic functions (CCFs), using
//! empirical likelihood.
//!
//! The pipeline: [`simulate`] or [`io`] provides a [`SamplePath`]; [`el`]
//! builds a frequency grid, solves the per-frequency empirical-likelihood
//! duals and minimizes the integrated ratio; [`spectest`] runs the
//! kernel-smoothed, bootstrap-calibrated specification test; [`baselines`]
//! gives likelihood-based comparison estimators.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod el;
pub mod error;
pub mod init;
pub mod io;
pub mod model;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod spectest;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
pub use model::{
    ccf, instrument_weight, residual, vskmj_gamma, AffineCcf, CcfValue, FrequencyPoint, InstrumentMode, ModelKind,
    ModelSpec,
};
pub use simulate::{simulate_path, simulate_seeded, stationary_init, SamplePath};
