//! Portable GPU kernel cost modeling.
//!
//! Kernel execution time and power are predicted from hardware-independent
//! code features: PTX instruction groups weighted by basic-block execution
//! counts, memory traffic per state space, and the launch configuration.
//! The pipeline runs PTX parsing ([`ptx`]), feature construction
//! ([`features`]), measurement ingestion ([`dataset`]), Extremely
//! Randomized Trees regression ([`extra_trees`]) and model validation
//! ([`evaluation`]). The [`cli`] module ties the steps to files.
//!
//! The learning code is generic over [`Scalar`]; the aliases below fix it
//! to `f64` (used by the command line) or `f32`.

pub mod cli;
pub mod dataset;
mod error;
pub mod evaluation;
pub mod extra_trees;
pub mod features;
pub mod ptx;
pub mod scalar;
pub mod seed;
pub mod tabular;

pub use error::Error;
pub use scalar::Scalar;

pub type Forest64 = extra_trees::Forest<f64>;
pub type Forest32 = extra_trees::Forest<f32>;
pub type TrainingSet64 = extra_trees::TrainingSet<f64>;
pub type TrainingSet32 = extra_trees::TrainingSet<f32>;
