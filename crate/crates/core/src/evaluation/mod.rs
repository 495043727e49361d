//! Model validation: MAPE, duration-stratified folds, nested
//! cross-validation over a hyperparameter grid, leave-one-out analysis and
//! prediction latency.
//!
//! All scores are computed in raw units; time predictions are
//! exponentiated before comparison.

mod folds;
mod latency;
mod loo;
mod metrics;
mod nested;
mod report;

pub use folds::{custom_split, folds_for, plain_kfold, DurationClass, FoldSpec, MEDIUM_LIMIT_US, PINNED_LONGEST, SHORT_LIMIT_US};
pub use latency::{measure_latency, LatencyStats, MIN_REPETITIONS, WARMUP_CALLS};
pub use loo::{leave_one_out, LooRecord, LooReport};
pub use metrics::{mape, quantile_sorted, relative_errors, BoxStats, ErrorBuckets, BUCKET_EDGES};
pub use nested::{
    default_grid, nested_cv, select_grid_point, CvReport, FoldScore, IterationRecord, NestedCvConfig, PredictionPair,
};
pub use report::{cv_report_files, loo_report_files, HISTOGRAM_BIN_PERCENT};

use thiserror::Error;

use crate::extra_trees::TreeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{truths} truths but {preds} predictions")]
    LengthMismatch { truths: usize, preds: usize },
    #[error("nothing to score")]
    Empty,
    #[error("true value {0} is not positive")]
    NonPositiveTruth(f64),
    #[error("{n} samples, need at least {needed}")]
    TooFewSamples { n: usize, needed: usize },
    #[error("fold count {0} must be at least 2")]
    InvalidFolds(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{found} repetitions, need at least {min}")]
    TooFewRepetitions { found: usize, min: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}
