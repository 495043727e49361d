//! Extremely Randomized Trees regression.
//!
//! Every tree sees the whole training set. At each node a handful of
//! features is drawn, one cut-point is drawn uniformly between each
//! feature's node-local minimum and maximum, and the best of those random
//! candidates is kept. Leaves predict the mean of the targets reaching them;
//! the forest predicts the mean over its trees.

mod criterion;
mod forest;
mod format;
mod split;
mod tree;

pub use criterion::{impurity, Criterion};
pub use forest::{FeatureImportance, Forest};
pub use format::FOREST_FORMAT_VERSION;
pub use split::{best_random_split, SplitCandidate, SplitSearch};
pub use tree::{Tree, TreeNode};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::TargetKind;
use crate::scalar::Scalar;

/// Mean of the first `n` per-tree predictions, clamped to their range.
/// Equals the prediction of an `n`-tree forest fitted with the same seed.
pub fn prefix_mean<T: Scalar>(tree_predictions: &[T], n: usize) -> T {
    criterion::bounded_mean(&tree_predictions[..n.min(tree_predictions.len())])
}

/// Largest estimator count accepted in a search grid.
pub const MAX_ESTIMATORS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("features and targets must be finite")]
    NonFiniteInput,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("expected {expected} features, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("feature matrix has {values} values, not a multiple of {arity} per row for {rows} targets")]
    ShapeMismatch { values: usize, arity: usize, rows: usize },
    #[error("model format version {found} is newer than supported version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
}

/// How many features are tried per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    /// Candidate count for `arity` features: all, ceil(sqrt), or ceil(log2),
    /// never below one.
    pub fn resolve(self, arity: usize) -> usize {
        let p = arity as f64;
        let n = match self {
            MaxFeatures::All => arity,
            MaxFeatures::Sqrt => p.sqrt().ceil() as usize,
            MaxFeatures::Log2 => p.log2().ceil() as usize,
        };
        n.clamp(1, arity.max(1))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaxFeatures::All => "all",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "max" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            other => Err(TreeError::InvalidHyperParams(format!("unknown max_features `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_estimators: 128,
            max_features: MaxFeatures::All,
            criterion: Criterion::Mse,
            min_samples_split: 2,
            max_depth: None,
            seed: crate::seed::DEFAULT_SEED,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.n_estimators == 0 {
            return Err(TreeError::InvalidHyperParams("n_estimators must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(TreeError::InvalidHyperParams("min_samples_split must be at least 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(TreeError::InvalidHyperParams("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, max_features={}, {} estimators",
            self.criterion.as_str().to_uppercase(),
            self.max_features.as_str(),
            self.n_estimators
        )
    }
}

/// Row-major feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    features: Vec<T>,
    targets: Vec<T>,
    feature_names: Vec<String>,
    target_kind: TargetKind,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(
        features: Vec<T>,
        targets: Vec<T>,
        feature_names: Vec<String>,
        target_kind: TargetKind,
    ) -> Result<Self, TreeError> {
        let arity = feature_names.len();
        if arity == 0 || features.len() != targets.len() * arity {
            return Err(TreeError::ShapeMismatch { values: features.len(), arity, rows: targets.len() });
        }
        Ok(TrainingSet { features, targets, feature_names, target_kind })
    }

    /// Builds a set from rows, naming features `f0`, `f1`, ...
    pub fn from_rows(rows: &[Vec<T>], targets: Vec<T>, target_kind: TargetKind) -> Result<Self, TreeError> {
        let arity = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != arity) {
            return Err(TreeError::ArityMismatch { expected: arity, found: bad.len() });
        }
        let names = (0..arity).map(|i| format!("f{i}")).collect();
        TrainingSet::new(rows.concat(), targets, names, target_kind)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let a = self.arity();
        &self.features[i * a..(i + 1) * a]
    }

    pub fn value(&self, i: usize, feature: usize) -> T {
        self.features[i * self.arity() + feature]
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    /// Targets mapped back to raw units (exp for time).
    pub fn raw_targets(&self) -> Vec<T> {
        self.targets.iter().map(|&t| self.target_kind.invert(t)).collect()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.arity());
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        TrainingSet {
            features,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_kind: self.target_kind,
        }
    }

    fn all_finite(&self) -> bool {
        self.features.iter().chain(&self.targets).all(|v| v.is_finite())
    }
}
