use super::metrics::{relative_errors, ErrorBuckets};
use super::EvalError;
use crate::extra_trees::{Forest, HyperParams, TrainingSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LooRecord {
    pub index: usize,
    /// Raw-unit truth and prediction.
    pub truth: f64,
    pub pred: f64,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub hyper: HyperParams,
    pub records: Vec<LooRecord>,
    pub buckets: ErrorBuckets,
}

impl LooReport {
    pub fn relative_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| 100.0 * (r.truth - r.pred).abs() / r.truth).collect()
    }
}

/// Trains one forest per sample on all other samples and predicts the
/// held-out one.
///
/// Every fit uses `hp.seed`, so a prediction depends only on the set of
/// remaining samples, not on their order.
pub fn leave_one_out<T: Scalar>(data: &TrainingSet<T>, hp: &HyperParams) -> Result<LooReport, EvalError> {
    let n = data.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples { n, needed: 2 });
    }
    let raw = data.raw_targets();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let forest = Forest::fit(&data.subset(&train), hp)?;
        let pred = forest.predict_raw(data.row(i))?;
        records.push(LooRecord { index: i, truth: raw[i].to_f64_lossy(), pred: pred.to_f64_lossy(), train_size: train.len() });
    }
    let truths: Vec<f64> = records.iter().map(|r| r.truth).collect();
    let preds: Vec<f64> = records.iter().map(|r| r.pred).collect();
    let buckets = ErrorBuckets::from_errors(&relative_errors(&truths, &preds)?);
    Ok(LooReport { hyper: *hp, records, buckets })
}
