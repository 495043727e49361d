use std::collections::BTreeMap;
use std::time::Instant;

use super::folds::{folds_for, FoldSpec};
use super::latency::LatencyStats;
use super::metrics::{mape, relative_errors, BoxStats, ErrorBuckets};
use super::EvalError;
use crate::extra_trees::{Criterion, Forest, HyperParams, MaxFeatures, TrainingSet, MAX_ESTIMATORS};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, DEFAULT_SEED};

const OUTER_REFIT: u64 = u64::MAX;

/// The 24-point search grid: every combination of
/// {all, sqrt, log2} x {MSE, MAE} x {128, 256, 512, 1024} estimators.
pub fn default_grid() -> Vec<HyperParams> {
    let mut grid = Vec::with_capacity(24);
    for max_features in [MaxFeatures::All, MaxFeatures::Sqrt, MaxFeatures::Log2] {
        for criterion in [Criterion::Mse, Criterion::Mae] {
            for n_estimators in [128, 256, 512, 1024] {
                grid.push(HyperParams { n_estimators, max_features, criterion, ..Default::default() });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedCvConfig {
    pub k_outer: usize,
    pub k_inner: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for NestedCvConfig {
    fn default() -> Self {
        NestedCvConfig { k_outer: 5, k_inner: 5, iterations: 5, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldScore {
    pub iteration: usize,
    pub fold: usize,
    pub test_size: usize,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `inner_scores[g][o]`: mean inner-fold MAPE of grid point `g` on the
    /// training part of outer fold `o`. Empty rows for a one-point grid.
    pub inner_scores: Vec<Vec<f64>>,
    pub selected: usize,
}

/// Raw-unit truth and prediction of one outer test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPair {
    pub iteration: usize,
    pub fold: usize,
    pub index: usize,
    pub truth: f64,
    pub pred: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub config: NestedCvConfig,
    pub grid: Vec<HyperParams>,
    pub iterations: Vec<IterationRecord>,
    pub fold_scores: Vec<FoldScore>,
    /// Grid point selected in most iterations.
    pub best: usize,
    pub stats: BoxStats,
    pub buckets: ErrorBuckets,
    pub pairs: Vec<PredictionPair>,
    /// Mean of the outer-fold forests' average depths.
    pub avg_depth: f64,
    /// Single-sample prediction times of the outer-fold forests.
    pub latency: LatencyStats,
}

impl CvReport {
    pub fn best_hyper(&self) -> HyperParams {
        HyperParams { seed: self.config.seed, ..self.grid[self.best] }
    }
}

fn check_grid(grid: &[HyperParams]) -> Result<(), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::InvalidGrid("empty grid".into()));
    }
    for hp in grid {
        hp.validate()?;
        if hp.n_estimators > MAX_ESTIMATORS {
            return Err(EvalError::InvalidGrid(format!("{} estimators exceeds {MAX_ESTIMATORS}", hp.n_estimators)));
        }
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index of the grid point with the lowest mean inner score. Ties go to
/// fewer estimators, then MSE, then the earlier grid point.
pub fn select_grid_point(grid: &[HyperParams], inner_scores: &[Vec<f64>]) -> usize {
    if grid.len() == 1 {
        return 0;
    }
    let means: Vec<f64> = inner_scores.iter().map(|row| mean(row)).collect();
    (0..grid.len())
        .min_by(|&a, &b| {
            means[a]
                .total_cmp(&means[b])
                .then(grid[a].n_estimators.cmp(&grid[b].n_estimators))
                .then(grid[a].criterion.cmp(&grid[b].criterion))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

/// Grid points that differ only in `n_estimators` share one fit: with the
/// same seed, the first `n` trees of a larger forest are exactly the
/// `n`-tree forest.
fn shared_fit_groups(grid: &[HyperParams]) -> Vec<(HyperParams, Vec<usize>)> {
    let mut groups: Vec<(HyperParams, Vec<usize>)> = Vec::new();
    for (g, hp) in grid.iter().enumerate() {
        let key = HyperParams { n_estimators: 1, seed: 0, ..*hp };
        match groups.iter_mut().find(|(k, _)| HyperParams { n_estimators: 1, ..*k } == key) {
            Some((k, members)) => {
                k.n_estimators = k.n_estimators.max(hp.n_estimators);
                members.push(g);
            }
            None => groups.push((HyperParams { n_estimators: hp.n_estimators, ..key }, vec![g])),
        }
    }
    groups
}

/// Mean inner MAPE of each grid point on `data`, over the folds of `inner`.
fn inner_scores<T: Scalar>(data: &TrainingSet<T>, inner: &FoldSpec, grid: &[HyperParams], seed: u64) -> Result<Vec<f64>, EvalError> {
    let raw = data.raw_targets();
    let kind = data.target_kind();
    let mut per_fold = vec![Vec::with_capacity(inner.k); grid.len()];
    for f in 0..inner.k {
        let train = data.subset(&inner.train_indices(f));
        let test = inner.test_indices(f);
        let truths: Vec<T> = test.iter().map(|&i| raw[i]).collect();
        for (group_hp, members) in shared_fit_groups(grid) {
            let hp = HyperParams { seed: derive_seed(seed, &[f as u64]), ..group_hp };
            let forest = Forest::fit(&train, &hp)?;
            let tree_preds: Vec<Vec<T>> = test.iter().map(|&i| forest.tree_predictions(data.row(i))).collect::<Result<_, _>>()?;
            for g in members {
                let n = grid[g].n_estimators;
                let preds: Vec<T> = tree_preds.iter().map(|tp| kind.invert(crate::extra_trees::prefix_mean(tp, n))).collect();
                per_fold[g].push(mape(&truths, &preds)?);
            }
        }
    }
    Ok(per_fold.iter().map(|s| mean(s)).collect())
}

/// Repeated nested cross-validation.
///
/// Each iteration draws fresh outer folds (the duration-stratified split
/// for time data, plain K-fold for power). On every outer training part an
/// inner K-fold scores each grid point; the point with the lowest mean
/// inner score over all outer folds is then refit on each outer training
/// part and scored on its test fold. The report aggregates the individual
/// fold scores of all iterations.
pub fn nested_cv<T: Scalar>(data: &TrainingSet<T>, grid: &[HyperParams], cfg: &NestedCvConfig) -> Result<CvReport, EvalError> {
    check_grid(grid)?;
    if cfg.iterations == 0 {
        return Err(EvalError::InvalidGrid("iterations must be at least 1".into()));
    }
    let kind = data.target_kind();
    let raw = data.raw_targets();
    let raw_f64: Vec<f64> = raw.iter().map(|v| v.to_f64_lossy()).collect();

    let mut iterations = Vec::with_capacity(cfg.iterations);
    let mut fold_scores = Vec::new();
    let mut pairs = Vec::new();
    let mut depths = Vec::new();
    let mut latencies = Vec::new();

    for it in 0..cfg.iterations {
        let it_seed = derive_seed(cfg.seed, &[it as u64]);
        let outer = folds_for(kind, &raw_f64, cfg.k_outer, it_seed)?;

        let mut scores = vec![Vec::with_capacity(cfg.k_outer); grid.len()];
        if grid.len() > 1 {
            for o in 0..cfg.k_outer {
                let train_idx = outer.train_indices(o);
                let train = data.subset(&train_idx);
                let train_raw: Vec<f64> = train_idx.iter().map(|&i| raw_f64[i]).collect();
                let fold_seed = derive_seed(it_seed, &[o as u64]);
                let inner = folds_for(kind, &train_raw, cfg.k_inner, fold_seed)?;
                for (g, s) in inner_scores(&train, &inner, grid, fold_seed)?.into_iter().enumerate() {
                    scores[g].push(s);
                }
            }
        }
        let selected = select_grid_point(grid, &scores);

        for o in 0..cfg.k_outer {
            let test = outer.test_indices(o);
            let hp = HyperParams { seed: derive_seed(it_seed, &[o as u64, OUTER_REFIT]), ..grid[selected] };
            let forest = Forest::fit(&data.subset(&outer.train_indices(o)), &hp)?;
            depths.push(forest.avg_depth());
            let mut truths = Vec::with_capacity(test.len());
            let mut preds = Vec::with_capacity(test.len());
            for &i in &test {
                let start = Instant::now();
                let pred = forest.predict_raw(data.row(i))?;
                latencies.push(start.elapsed().as_secs_f64() * 1e3);
                truths.push(raw[i]);
                preds.push(pred);
                pairs.push(PredictionPair { iteration: it, fold: o, index: i, truth: raw_f64[i], pred: pred.to_f64_lossy() });
            }
            fold_scores.push(FoldScore { iteration: it, fold: o, test_size: test.len(), mape: mape(&truths, &preds)? });
        }
        iterations.push(IterationRecord { iteration: it, inner_scores: scores, selected });
    }

    let best = most_selected(&iterations);
    let truths: Vec<f64> = pairs.iter().map(|p| p.truth).collect();
    let preds: Vec<f64> = pairs.iter().map(|p| p.pred).collect();
    let fold_mapes: Vec<f64> = fold_scores.iter().map(|f| f.mape).collect();
    Ok(CvReport {
        config: *cfg,
        grid: grid.to_vec(),
        best,
        stats: BoxStats::from_values(&fold_mapes),
        buckets: ErrorBuckets::from_errors(&relative_errors(&truths, &preds)?),
        avg_depth: mean(&depths),
        latency: LatencyStats::from_samples(&latencies),
        iterations,
        fold_scores,
        pairs,
    })
}

/// Most frequently selected grid point; ties go to the lower mean inner
/// score at selection time, then the earlier grid point.
fn most_selected(iterations: &[IterationRecord]) -> usize {
    let mut tally: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();
    for rec in iterations {
        let entry = tally.entry(rec.selected).or_default();
        entry.0 += 1;
        if let Some(row) = rec.inner_scores.get(rec.selected).filter(|r| !r.is_empty()) {
            entry.1.push(mean(row));
        }
    }
    let score = |s: &[f64]| if s.is_empty() { 0.0 } else { mean(s) };
    tally
        .iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(score(&a.1 .1).total_cmp(&score(&b.1 .1))).then(a.0.cmp(b.0)))
        .map_or(0, |(&g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TargetKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, kind: TargetKind) -> TrainingSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let y = rows.iter().map(|r| kind.transform(50.0 + 30.0 * r[0] + 5.0 * r[1] * r[1])).collect();
        TrainingSet::from_rows(&rows, y, kind).unwrap()
    }

    fn small_grid() -> Vec<HyperParams> {
        vec![
            HyperParams { n_estimators: 8, ..Default::default() },
            HyperParams { n_estimators: 4, criterion: Criterion::Mae, max_features: MaxFeatures::Sqrt, ..Default::default() },
            HyperParams { n_estimators: 4, ..Default::default() },
        ]
    }

    #[test]
    fn grid_shape() {
        let grid = default_grid();
        assert_eq!(grid.len(), 24);
        assert!(grid.iter().all(|hp| hp.n_estimators <= MAX_ESTIMATORS));
        assert_eq!(shared_fit_groups(&grid).len(), 6);
        assert!(shared_fit_groups(&grid).iter().all(|(hp, m)| hp.n_estimators == 1024 && m.len() == 4));
    }

    #[test]
    fn grid_validation() {
        let cfg = NestedCvConfig { iterations: 1, ..Default::default() };
        let d = synthetic(40, TargetKind::Power);
        assert!(matches!(nested_cv(&d, &[], &cfg), Err(EvalError::InvalidGrid(_))));
        let big = [HyperParams { n_estimators: 2048, ..Default::default() }];
        assert!(matches!(nested_cv(&d, &big, &cfg), Err(EvalError::InvalidGrid(_))));
    }

    #[test]
    fn prefix_forest_equals_smaller_fit() {
        let d = synthetic(30, TargetKind::Power);
        let big = Forest::fit(&d, &HyperParams { n_estimators: 12, seed: 5, ..Default::default() }).unwrap();
        let small = Forest::fit(&d, &HyperParams { n_estimators: 5, seed: 5, ..Default::default() }).unwrap();
        for i in 0..d.len() {
            let tp = big.tree_predictions(d.row(i)).unwrap();
            assert_eq!(crate::extra_trees::prefix_mean(&tp, 5), small.predict(d.row(i)).unwrap());
        }
    }

    #[test]
    fn selection_ties() {
        let grid = small_grid();
        assert_eq!(select_grid_point(&grid, &[vec![1.0, 3.0], vec![2.0, 2.0], vec![2.0, 2.0]]), 2);
        assert_eq!(select_grid_point(&grid, &[vec![1.0, 3.0], vec![2.0, 2.0], vec![2.5, 2.0]]), 1);
        assert_eq!(select_grid_point(&grid, &[vec![1.0], vec![0.5], vec![2.0]]), 1);
    }

    #[test]
    fn cardinality_and_selection() {
        let d = synthetic(60, TargetKind::Time);
        let cfg = NestedCvConfig { k_outer: 3, k_inner: 3, iterations: 2, seed: 1 };
        let r = nested_cv(&d, &small_grid(), &cfg).unwrap();
        assert_eq!(r.fold_scores.len(), 6);
        assert_eq!(r.pairs.len(), 2 * (60 - 5));
        for rec in &r.iterations {
            assert_eq!(rec.inner_scores.len(), 3);
            assert!(rec.inner_scores.iter().all(|row| row.len() == 3));
            assert_eq!(rec.selected, select_grid_point(&r.grid, &rec.inner_scores));
        }
        assert!((r.buckets.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.fold_scores.iter().all(|f| f.mape >= 0.0));
        assert_eq!(r, nested_cv(&d, &small_grid(), &cfg).unwrap_or_else(|_| unreachable!()).with_latency(r.latency));
    }

    #[test]
    fn single_point_grid_is_plain_kfold() {
        let d = synthetic(40, TargetKind::Power);
        let hp = HyperParams { n_estimators: 6, ..Default::default() };
        let cfg = NestedCvConfig { k_outer: 4, k_inner: 3, iterations: 1, seed: 2 };
        let r = nested_cv(&d, &[hp], &cfg).unwrap();
        let outer = folds_for(TargetKind::Power, &d.raw_targets(), 4, derive_seed(2, &[0])).unwrap();
        for (o, fs) in r.fold_scores.iter().enumerate() {
            let seed = derive_seed(derive_seed(2, &[0]), &[o as u64, OUTER_REFIT]);
            let forest = Forest::fit(&d.subset(&outer.train_indices(o)), &HyperParams { seed, ..hp }).unwrap();
            let test = outer.test_indices(o);
            let truths: Vec<f64> = test.iter().map(|&i| d.raw_targets()[i]).collect();
            let preds: Vec<f64> = test.iter().map(|&i| forest.predict_raw(d.row(i)).unwrap()).collect();
            assert_eq!(fs.mape, mape(&truths, &preds).unwrap());
        }
        assert!(r.iterations[0].inner_scores.iter().all(Vec::is_empty));
    }
}

#[cfg(test)]
impl CvReport {
    fn with_latency(mut self, latency: LatencyStats) -> Self {
        self.latency = latency;
        self
    }
}
