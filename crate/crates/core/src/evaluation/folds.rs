use rand::seq::SliceRandom;

use super::EvalError;
use crate::dataset::TargetKind;
use crate::seed::rng_for;

/// Samples with the longest execution times that never enter a test fold.
pub const PINNED_LONGEST: usize = 5;

/// Upper bound (exclusive) of short-running kernels, microseconds.
pub const SHORT_LIMIT_US: f64 = 1_000.0;
/// Upper bound (exclusive) of medium-running kernels, microseconds.
pub const MEDIUM_LIMIT_US: f64 = 100_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DurationClass {
    Short,
    Medium,
    Long,
}

impl DurationClass {
    pub fn of(duration_us: f64) -> Self {
        if duration_us < SHORT_LIMIT_US {
            DurationClass::Short
        } else if duration_us < MEDIUM_LIMIT_US {
            DurationClass::Medium
        } else {
            DurationClass::Long
        }
    }
}

/// Assignment of sample indices to `k` test folds. Pinned samples have no
/// fold and are part of every training split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub k: usize,
    pub assignments: Vec<Option<usize>>,
    pub pinned: Vec<usize>,
}

impl FoldSpec {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == Some(fold)).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != Some(fold)).collect()
    }
}

fn check_folds(k: usize) -> Result<(), EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    Ok(())
}

/// Deals `indices` round-robin onto folds, continuing at `start`.
fn deal(indices: &[usize], assignments: &mut [Option<usize>], k: usize, start: usize) -> usize {
    for (pos, &i) in indices.iter().enumerate() {
        assignments[i] = Some((start + pos) % k);
    }
    start + indices.len()
}

/// Duration-stratified K-fold for time datasets.
///
/// The [`PINNED_LONGEST`] samples with the largest raw times are kept out of
/// every test fold (ties broken by lower index). The remaining samples are
/// shuffled within their short / medium / long class and dealt round-robin,
/// so each fold's count per class differs by at most one.
pub fn custom_split(raw_times_us: &[f64], k: usize, seed: u64) -> Result<FoldSpec, EvalError> {
    check_folds(k)?;
    let n = raw_times_us.len();
    if n <= k + PINNED_LONGEST {
        return Err(EvalError::TooFewSamples { n, needed: k + PINNED_LONGEST + 1 });
    }
    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by(|&a, &b| raw_times_us[b].total_cmp(&raw_times_us[a]).then(a.cmp(&b)));
    let mut pinned = by_time[..PINNED_LONGEST].to_vec();
    pinned.sort_unstable();

    let mut strata: [Vec<usize>; 3] = Default::default();
    for i in 0..n {
        if pinned.binary_search(&i).is_err() {
            strata[DurationClass::of(raw_times_us[i]) as usize].push(i);
        }
    }
    let mut rng = rng_for(seed, &[0x5717]);
    let mut assignments = vec![None; n];
    let mut next = 0;
    for stratum in &mut strata {
        stratum.shuffle(&mut rng);
        next = deal(stratum, &mut assignments, k, next);
    }
    Ok(FoldSpec { k, assignments, pinned })
}

/// Shuffled K-fold without pinning or stratification.
pub fn plain_kfold(n: usize, k: usize, seed: u64) -> Result<FoldSpec, EvalError> {
    check_folds(k)?;
    if n < k {
        return Err(EvalError::TooFewSamples { n, needed: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[0x9F01]));
    let mut assignments = vec![None; n];
    deal(&order, &mut assignments, k, 0);
    Ok(FoldSpec { k, assignments, pinned: Vec::new() })
}

/// Custom split for time targets, plain K-fold for power.
pub fn folds_for(kind: TargetKind, raw_targets: &[f64], k: usize, seed: u64) -> Result<FoldSpec, EvalError> {
    match kind {
        TargetKind::Time => custom_split(raw_targets, k, seed),
        TargetKind::Power => plain_kfold(raw_targets.len(), k, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes() {
        assert_eq!(DurationClass::of(999.9), DurationClass::Short);
        assert_eq!(DurationClass::of(1_000.0), DurationClass::Medium);
        assert_eq!(DurationClass::of(99_999.0), DurationClass::Medium);
        assert_eq!(DurationClass::of(100_000.0), DurationClass::Long);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(custom_split(&[1.0; 6], 5, 0), Err(EvalError::TooFewSamples { n: 6, needed: 11 }));
        assert!(custom_split(&[1.0; 11], 5, 0).is_ok());
        assert_eq!(custom_split(&[1.0; 20], 1, 0), Err(EvalError::InvalidFolds(1)));
    }

    // 30 short + 30 medium + 30 long + 5 pinned (the five longest), k = 5:
    // each fold tests exactly 6 samples of each class.
    #[test]
    fn balanced_fixture() {
        let mut times = Vec::new();
        times.extend((0..30).map(|i| 10.0 + i as f64));
        times.extend((0..30).map(|i| 5_000.0 + i as f64));
        times.extend((0..30).map(|i| 200_000.0 + i as f64));
        times.extend((0..5).map(|i| 9e6 + i as f64));
        let spec = custom_split(&times, 5, 42).unwrap();
        assert_eq!(spec.pinned, vec![90, 91, 92, 93, 94]);
        for f in 0..5 {
            let test = spec.test_indices(f);
            for class in [DurationClass::Short, DurationClass::Medium, DurationClass::Long] {
                assert_eq!(test.iter().filter(|&&i| DurationClass::of(times[i]) == class).count(), 6);
            }
            assert!(spec.pinned.iter().all(|p| !test.contains(p)));
            assert_eq!(spec.train_indices(f).len(), 95 - 18);
        }
    }

    #[test]
    fn single_stratum_is_plain_kfold_with_pins() {
        let times: Vec<f64> = (0..23).map(|i| 1.0 + i as f64).collect();
        let spec = custom_split(&times, 4, 1).unwrap();
        assert_eq!(spec.pinned, vec![18, 19, 20, 21, 22]);
        let sizes: Vec<usize> = (0..4).map(|f| spec.test_indices(f).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 18);
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
    }

    #[test]
    fn deterministic_per_seed() {
        let times: Vec<f64> = (0..40).map(|i| (i * 997 % 300_000) as f64 + 1.0).collect();
        assert_eq!(custom_split(&times, 5, 3).unwrap(), custom_split(&times, 5, 3).unwrap());
        assert_ne!(custom_split(&times, 5, 3).unwrap(), custom_split(&times, 5, 4).unwrap());
    }

    #[test]
    fn plain_kfold_partitions() {
        let spec = plain_kfold(12, 5, 0).unwrap();
        assert!(spec.pinned.is_empty());
        let mut all: Vec<usize> = (0..5).flat_map(|f| spec.test_indices(f)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert!(plain_kfold(3, 5, 0).is_err());
    }
}
