use rand::Rng;

use super::criterion::{impurity, Criterion};
use super::TrainingSet;
use crate::scalar::Scalar;

/// One drawn cut-point and its weighted child impurity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSearch<T> {
    /// Lowest score; ties go to the lowest feature index.
    pub best: Option<SplitCandidate<T>>,
    /// Every candidate that was drawn, in draw order.
    pub candidates: Vec<SplitCandidate<T>>,
}

/// Draws random cut-points for up to `max_candidates` features and keeps
/// the best one.
///
/// Features are visited in random order. Features that are constant over
/// `samples` are skipped without using up a candidate slot, so the search
/// only comes back empty when every feature is constant at this node. Each
/// visited feature gets one threshold drawn uniformly in `[min, max)`;
/// samples with `x <= threshold` go left.
pub fn best_random_split<T: Scalar, R: Rng + ?Sized>(
    data: &TrainingSet<T>,
    samples: &[usize],
    max_candidates: usize,
    criterion: Criterion,
    rng: &mut R,
) -> SplitSearch<T> {
    let arity = data.arity();
    let mut order: Vec<usize> = (0..arity).collect();
    let mut candidates = Vec::with_capacity(max_candidates.min(arity));
    let mut left = Vec::with_capacity(samples.len());
    let mut right = Vec::with_capacity(samples.len());

    for i in 0..arity {
        if candidates.len() >= max_candidates {
            break;
        }
        let j = rng.gen_range(i..arity);
        order.swap(i, j);
        let feature = order[i];

        let (lo, hi) = samples.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &s| {
            let v = data.value(s, feature);
            (lo.min(v), hi.max(v))
        });
        if !(lo < hi) {
            continue;
        }
        let u: f64 = rng.gen();
        let mut threshold = lo + (hi - lo) * T::from_f64_lossy(u);
        if threshold >= hi {
            threshold = lo;
        }
        let score = split_score(data, samples, feature, threshold, criterion, &mut left, &mut right);
        candidates.push(SplitCandidate { feature, threshold, score });
    }

    let best = candidates.iter().copied().fold(None, |best: Option<SplitCandidate<T>>, c| match best {
        Some(b) if b.score < c.score || (b.score == c.score && b.feature < c.feature) => Some(b),
        _ => Some(c),
    });
    SplitSearch { best, candidates }
}

fn split_score<T: Scalar>(
    data: &TrainingSet<T>,
    samples: &[usize],
    feature: usize,
    threshold: T,
    criterion: Criterion,
    left: &mut Vec<T>,
    right: &mut Vec<T>,
) -> T {
    left.clear();
    right.clear();
    let targets = data.targets();
    for &s in samples {
        if data.value(s, feature) <= threshold {
            left.push(targets[s]);
        } else {
            right.push(targets[s]);
        }
    }
    let n = T::from_usize_lossy(samples.len());
    let wl = T::from_usize_lossy(left.len()) / n;
    let wr = T::from_usize_lossy(right.len()) / n;
    wl * impurity(criterion, left) + wr * impurity(criterion, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TargetKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_features_yield_no_split() {
        let ts = TrainingSet::from_rows(&[vec![1.0f64, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]], vec![1.0, 2.0, 3.0], TargetKind::Power).unwrap();
        let s = best_random_split(&ts, &[0, 1, 2], 2, Criterion::Mse, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(s.best.is_none());
        assert!(s.candidates.is_empty());
    }

    #[test]
    fn two_point_split_isolates_each_sample() {
        let ts = TrainingSet::from_rows(&[vec![0.0f64], vec![10.0]], vec![3.0, 7.0], TargetKind::Power).unwrap();
        for seed in 0..20 {
            for criterion in [Criterion::Mse, Criterion::Mae] {
                let s = best_random_split(&ts, &[0, 1], 1, criterion, &mut ChaCha8Rng::seed_from_u64(seed));
                let best = s.best.unwrap();
                assert!(best.threshold >= 0.0 && best.threshold < 10.0);
                assert_eq!(best.score, 0.0);
            }
        }
    }

    #[test]
    fn skips_constant_features_until_candidates_found() {
        // Only feature 2 varies; with one candidate slot it must still be found.
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, 1.0, i as f64, 1.0]).collect();
        let ts = TrainingSet::from_rows(&rows, (0..5).map(|i| i as f64).collect(), TargetKind::Power).unwrap();
        for seed in 0..10 {
            let s = best_random_split(&ts, &[0, 1, 2, 3, 4], 1, Criterion::Mse, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(s.best.unwrap().feature, 2);
            assert_eq!(s.candidates.len(), 1);
        }
    }

    #[test]
    fn ties_go_to_lowest_feature() {
        // Two identical features: any threshold gives the same partition.
        let rows: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let ts = TrainingSet::from_rows(&rows, vec![0.0, 1.0], TargetKind::Power).unwrap();
        let s = best_random_split(&ts, &[0, 1], 2, Criterion::Mae, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(s.candidates.len(), 2);
        assert_eq!(s.best.unwrap().feature, 0);
    }
}
