//! Tabular report files and plot data.
//!
//! Latency is left out on purpose: it is the one nondeterministic quantity,
//! and keeping it out lets reports be compared byte for byte.

use super::loo::LooReport;
use super::metrics::{ErrorBuckets, BUCKET_EDGES};
use super::nested::CvReport;
use crate::tabular::{write_table, Header};

/// Bin width of the relative-error histograms.
pub const HISTOGRAM_BIN_PERCENT: f64 = 5.0;
const HISTOGRAM_BINS: usize = 20;
const VERSION: u32 = 1;

fn rel_error(truth: f64, pred: f64) -> f64 {
    100.0 * (truth - pred).abs() / truth
}

fn buckets_table(format: &str, buckets: &ErrorBuckets) -> String {
    let header = Header::new(format, VERSION, &["lower_percent", "upper_percent", "count", "fraction"]);
    let rows = ErrorBuckets::bounds()
        .into_iter()
        .zip(buckets.counts.iter().zip(buckets.fractions()))
        .map(|((lo, hi), (count, frac))| {
            let hi = if hi.is_finite() { hi.to_string() } else { "inf".into() };
            vec![lo.to_string(), hi, count.to_string(), frac.to_string()]
        });
    write_table(&header, rows)
}

/// 5%-wide bins from 0 to 100%, plus one open bin for larger errors.
fn histogram_table(errors: &[f64]) -> String {
    let mut counts = [0usize; HISTOGRAM_BINS + 1];
    for &e in errors {
        counts[((e / HISTOGRAM_BIN_PERCENT) as usize).min(HISTOGRAM_BINS)] += 1;
    }
    let header = Header::new("gpucost-error-histogram", VERSION, &["lower_percent", "upper_percent", "count"]);
    let rows = counts.iter().enumerate().map(|(b, c)| {
        let lo = b as f64 * HISTOGRAM_BIN_PERCENT;
        let hi = if b == HISTOGRAM_BINS { "inf".to_string() } else { (lo + HISTOGRAM_BIN_PERCENT).to_string() };
        vec![lo.to_string(), hi, c.to_string()]
    });
    write_table(&header, rows)
}

fn scatter_table(pairs: impl Iterator<Item = (f64, f64)>) -> String {
    let header = Header::new("gpucost-scatter", VERSION, &["truth", "pred"]);
    write_table(&header, pairs.map(|(t, p)| [t.to_string(), p.to_string()]))
}

/// `(relative path, contents)` for every nested-CV output file.
pub fn cv_report_files(report: &CvReport) -> Vec<(String, String)> {
    let folds = write_table(
        &Header::new("gpucost-cv-folds", VERSION, &["iteration", "fold", "test_size", "mape"]),
        report
            .fold_scores
            .iter()
            .map(|f| [f.iteration.to_string(), f.fold.to_string(), f.test_size.to_string(), f.mape.to_string()]),
    );

    let mut inner_rows = Vec::new();
    for rec in &report.iterations {
        for (g, row) in rec.inner_scores.iter().enumerate() {
            let hp = &report.grid[g];
            for (o, score) in row.iter().enumerate() {
                inner_rows.push([
                    rec.iteration.to_string(),
                    g.to_string(),
                    hp.max_features.as_str().to_string(),
                    hp.criterion.as_str().to_string(),
                    hp.n_estimators.to_string(),
                    o.to_string(),
                    score.to_string(),
                    u8::from(g == rec.selected).to_string(),
                ]);
            }
        }
    }
    let inner = write_table(
        &Header::new(
            "gpucost-cv-inner",
            VERSION,
            &["iteration", "grid", "max_features", "criterion", "n_estimators", "outer_fold", "inner_mape", "selected"],
        ),
        inner_rows,
    );

    let best = report.best_hyper();
    let s = &report.stats;
    let mut summary_rows: Vec<[String; 2]> = vec![
        ["best_grid".into(), report.best.to_string()],
        ["best_max_features".into(), best.max_features.as_str().into()],
        ["best_criterion".into(), best.criterion.as_str().into()],
        ["best_n_estimators".into(), best.n_estimators.to_string()],
        ["iterations".into(), report.config.iterations.to_string()],
        ["k_outer".into(), report.config.k_outer.to_string()],
        ["k_inner".into(), report.config.k_inner.to_string()],
        ["seed".into(), report.config.seed.to_string()],
        ["fold_count".into(), s.count.to_string()],
        ["mape_min".into(), s.min.to_string()],
        ["mape_q1".into(), s.q1.to_string()],
        ["mape_median".into(), s.median.to_string()],
        ["mape_q3".into(), s.q3.to_string()],
        ["mape_max".into(), s.max.to_string()],
        ["mape_mean".into(), s.mean.to_string()],
        ["avg_depth".into(), report.avg_depth.to_string()],
    ];
    for (i, frac) in report.buckets.fractions().iter().enumerate() {
        let name = match BUCKET_EDGES.get(i) {
            Some(e) => format!("bucket_lt_{e}"),
            None => format!("bucket_ge_{}", BUCKET_EDGES[BUCKET_EDGES.len() - 1]),
        };
        summary_rows.push([name, frac.to_string()]);
    }
    let summary = write_table(&Header::new("gpucost-cv-summary", VERSION, &["metric", "value"]), summary_rows);

    let predictions = write_table(
        &Header::new("gpucost-cv-predictions", VERSION, &["iteration", "fold", "index", "truth", "pred", "rel_error_percent"]),
        report.pairs.iter().map(|p| {
            [
                p.iteration.to_string(),
                p.fold.to_string(),
                p.index.to_string(),
                p.truth.to_string(),
                p.pred.to_string(),
                rel_error(p.truth, p.pred).to_string(),
            ]
        }),
    );

    let errors: Vec<f64> = report.pairs.iter().map(|p| rel_error(p.truth, p.pred)).collect();
    vec![
        ("cv_folds.csv".into(), folds),
        ("cv_inner_scores.csv".into(), inner),
        ("cv_summary.csv".into(), summary),
        ("cv_predictions.csv".into(), predictions),
        ("plots/cv_buckets.csv".into(), buckets_table("gpucost-buckets", &report.buckets)),
        ("plots/cv_error_histogram.csv".into(), histogram_table(&errors)),
        ("plots/cv_scatter.csv".into(), scatter_table(report.pairs.iter().map(|p| (p.truth, p.pred)))),
    ]
}

/// `(relative path, contents)` for every leave-one-out output file.
pub fn loo_report_files(report: &LooReport) -> Vec<(String, String)> {
    let hp = &report.hyper;
    let header = Header::new("gpucost-loo", VERSION, &["index", "truth", "pred", "train_size", "rel_error_percent"])
        .with_meta("max_features", hp.max_features.as_str())
        .with_meta("criterion", hp.criterion.as_str())
        .with_meta("n_estimators", hp.n_estimators.to_string())
        .with_meta("seed", hp.seed.to_string());
    let predictions = write_table(
        &header,
        report.records.iter().map(|r| {
            [
                r.index.to_string(),
                r.truth.to_string(),
                r.pred.to_string(),
                r.train_size.to_string(),
                rel_error(r.truth, r.pred).to_string(),
            ]
        }),
    );
    vec![
        ("loo_predictions.csv".into(), predictions),
        ("loo_buckets.csv".into(), buckets_table("gpucost-buckets", &report.buckets)),
        ("plots/loo_error_histogram.csv".into(), histogram_table(&report.relative_errors())),
        ("plots/loo_scatter.csv".into(), scatter_table(report.records.iter().map(|r| (r.truth, r.pred)))),
    ]
}
