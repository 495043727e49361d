use thiserror::Error;

use crate::dataset::DatasetError;
use crate::evaluation::EvalError;
use crate::extra_trees::TreeError;
use crate::features::FeatureError;
use crate::ptx::PtxError;
use crate::tabular::FormatError;

/// Any failure surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ptx(#[from] PtxError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Stable identifier for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ptx(PtxError::Syntax { .. }) => "SyntaxError",
            Error::Ptx(PtxError::UnsupportedFeature(_)) => "UnsupportedFeature",
            Error::Feature(FeatureError::KeyMismatch { .. }) => "KeyMismatch",
            Error::Feature(_) => "FeatureError",
            Error::Dataset(DatasetError::DuplicateKey(_)) => "DuplicateKey",
            Error::Dataset(DatasetError::EmptyGroup) => "EmptyGroup",
            Error::Dataset(DatasetError::EmptySeries) => "EmptySeries",
            Error::Dataset(DatasetError::NonPositiveTarget(_)) => "NonPositiveTarget",
            Error::Dataset(_) => "DatasetError",
            Error::Tree(TreeError::EmptyDataset) => "EmptyDataset",
            Error::Tree(TreeError::NonFiniteInput) => "NonFiniteInput",
            Error::Tree(TreeError::ArityMismatch { .. }) => "ArityMismatch",
            Error::Tree(TreeError::VersionMismatch { .. }) => "VersionMismatch",
            Error::Tree(TreeError::CorruptModel(_)) => "CorruptModel",
            Error::Tree(_) => "TreeError",
            Error::Eval(EvalError::TooFewSamples { .. }) => "TooFewSamples",
            Error::Eval(EvalError::LengthMismatch { .. }) => "LengthMismatch",
            Error::Eval(EvalError::NonPositiveTruth(_)) => "NonPositiveTruth",
            Error::Eval(_) => "EvalError",
            Error::Format(FormatError::VersionMismatch { .. }) => "VersionMismatch",
            Error::Format(_) => "FormatError",
            Error::Io { .. } => "IoError",
            Error::Usage(_) => "UsageError",
        }
    }
}
