use std::str::FromStr;

use super::TreeError;
use crate::scalar::Scalar;

/// Split quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    /// Variance about the mean.
    Mse,
    /// Mean absolute deviation about the median.
    Mae,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Mse => "mse",
            Criterion::Mae => "mae",
        }
    }
}

impl FromStr for Criterion {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Criterion::Mse),
            "mae" => Ok(Criterion::Mae),
            other => Err(TreeError::InvalidHyperParams(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Arithmetic mean, clamped into `[min, max]` of the inputs so rounding can
/// never leave the observed range. Equal inputs return that value exactly.
pub(crate) fn bounded_mean<T: Scalar>(values: &[T]) -> T {
    let (lo, hi) = values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return lo;
    }
    let sum: T = values.iter().copied().sum();
    (sum / T::from_usize_lossy(values.len())).max(lo).min(hi)
}

/// Impurity of a set of targets under `criterion`. Reorders `values`.
pub fn impurity<T: Scalar>(criterion: Criterion, values: &mut [T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let n = T::from_usize_lossy(values.len());
    match criterion {
        Criterion::Mse => {
            let mean = values.iter().copied().sum::<T>() / n;
            values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n
        }
        Criterion::Mae => {
            let mid = (values.len() - 1) / 2;
            let (_, &mut median, _) = values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite targets"));
            values.iter().map(|&v| (v - median).abs()).sum::<T>() / n
        }
    }
}
