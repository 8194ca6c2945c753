//! Task-driven automatic denoising of multichannel time-series.
//!
//! The pipeline decomposes each trial into rank-1 spatial-temporal components,
//! scores every component with a learned selector, and reconstructs a denoised
//! signal as the probability-weighted component sum. The selector is trained
//! collaboratively with a proxy classifier from task labels alone; no clean
//! reference signals are needed.
//!
//! The numerical core is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the aliases at the crate root pin the default `f64`
//! instantiation used by training and the experiment harness.

pub mod decomp;
pub mod error;
pub mod mat;
pub mod metrics;
pub mod nnet;
pub mod num;
pub mod signal;
pub mod spectrum;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use num::Real;
pub use signal::RngSeed;

/// Default-precision matrix.
pub type Mat64 = mat::Mat<f64>;
/// Default-precision trial.
pub type Trial64 = signal::Trial<f64>;
/// Default-precision trial set.
pub type TrialSet64 = signal::TrialSet<f64>;
/// Default-precision component set.
pub type ComponentSet64 = decomp::ComponentSet<f64>;

/// Default-precision model parameters.
pub type ModelParams64 = nnet::ModelParams<f64>;
