//! Selective prediction by joint predictor/rejector training.
//!
//! Two networks are trained together against a single convex meta-loss:
//! a predictor `h(x)` producing the task score and a rejector `r(x)` whose
//! sign decides whether the prediction is kept. The crate covers the full
//! experiment loop: synthetic and CSV datasets, feature standardization and
//! random Fourier features, minibatch subgradient training, metrics and
//! risk-coverage curves, cross-validation harnesses, and the experiment
//! presets behind the `lwr` command-line tool.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod features;
pub mod losses;
pub mod nn;
pub mod numerics;
pub mod protocols;
pub mod trainer;

pub use error::{Error, Result};
