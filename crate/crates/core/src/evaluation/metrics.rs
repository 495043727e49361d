use super::EvalError;
use crate::scalar::Scalar;

/// Upper edges, in percent, of the relative-error buckets. A final open
/// bucket collects everything at or above the last edge.
pub const BUCKET_EDGES: [f64; 4] = [10.0, 25.0, 50.0, 100.0];

fn check_pairs<T: Scalar>(truths: &[T], preds: &[T]) -> Result<(), EvalError> {
    if truths.len() != preds.len() {
        return Err(EvalError::LengthMismatch { truths: truths.len(), preds: preds.len() });
    }
    if truths.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(bad) = truths.iter().find(|t| !(t.to_f64_lossy() > 0.0)) {
        return Err(EvalError::NonPositiveTruth(bad.to_f64_lossy()));
    }
    Ok(())
}

/// Mean absolute percentage error, `100/n * sum(|y - p| / y)`.
///
/// Both slices must be in raw units; time predictions are exponentiated
/// before they get here.
pub fn mape<T: Scalar>(truths: &[T], preds: &[T]) -> Result<f64, EvalError> {
    check_pairs(truths, preds)?;
    let sum: f64 = truths
        .iter()
        .zip(preds)
        .map(|(&y, &p)| {
            let (y, p) = (y.to_f64_lossy(), p.to_f64_lossy());
            (y - p).abs() / y
        })
        .sum();
    Ok(100.0 * sum / truths.len() as f64)
}

/// `|y - p| / y` in percent for each pair.
pub fn relative_errors<T: Scalar>(truths: &[T], preds: &[T]) -> Result<Vec<f64>, EvalError> {
    check_pairs(truths, preds)?;
    Ok(truths
        .iter()
        .zip(preds)
        .map(|(&y, &p)| 100.0 * (y.to_f64_lossy() - p.to_f64_lossy()).abs() / y.to_f64_lossy())
        .collect())
}

/// Histogram of relative errors over [`BUCKET_EDGES`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBuckets {
    pub counts: [usize; BUCKET_EDGES.len() + 1],
}

impl ErrorBuckets {
    pub fn bucket_of(err_percent: f64) -> usize {
        BUCKET_EDGES.iter().position(|&e| err_percent < e).unwrap_or(BUCKET_EDGES.len())
    }

    pub fn from_errors(errors: &[f64]) -> Self {
        let mut counts = [0; BUCKET_EDGES.len() + 1];
        for &e in errors {
            counts[Self::bucket_of(e)] += 1;
        }
        ErrorBuckets { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// `(lower, upper)` percent bounds per bucket; the last upper is infinite.
    pub fn bounds() -> Vec<(f64, f64)> {
        let mut lo = 0.0;
        let mut out = Vec::new();
        for &e in &BUCKET_EDGES {
            out.push((lo, e));
            lo = e;
        }
        out.push((lo, f64::INFINITY));
        out
    }
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Boxplot statistics of a score sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        BoxStats {
            min: sorted.first().copied().unwrap_or(f64::NAN),
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            mean: sorted.iter().sum::<f64>() / sorted.len().max(1) as f64,
            count: sorted.len(),
        }
    }
}
