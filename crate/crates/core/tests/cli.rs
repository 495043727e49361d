mod common;

#[path = "../examples/make_corpus.rs"]
#[allow(dead_code)]
mod make_corpus;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpucost::dataset::{read_dataset_file, TargetKind};
use gpucost::extra_trees::{Forest, HyperParams, TrainingSet};
use gpucost::features::FEATURE_NAMES;
use gpucost::tabular::Table;
use sha2::{Digest, Sha256};

fn corpus(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(file).display().to_string()
}

fn gpucost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpucost")).args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error record on stderr");
    serde_json::from_str(last).expect("error record is JSON")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "command failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Features and a time dataset built from the corpus in `dir`.
fn corpus_dataset(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let blocks = dir.join("blocks.csv");
    let features = dir.join("features.csv");
    let dataset = dir.join("dataset.csv");
    ok(gpucost(&["extract", &corpus("kernels.ptx"), "-o", blocks.to_str().unwrap()]));
    ok(gpucost(&[
        "features",
        "--blocks",
        blocks.to_str().unwrap(),
        "--trace",
        &corpus("trace.csv"),
        "-o",
        features.to_str().unwrap(),
    ]));
    let time = corpus("time.csv");
    let mut args = vec![
        "build",
        "--features",
        features.to_str().unwrap(),
        "--measurements",
        &time,
        "--kind",
        "time",
        "-o",
        dataset.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ok(gpucost(&args));
    (features, dataset)
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = gpucost(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_json(&out);
    assert_eq!(rec["error"], "UsageError");
    assert!(rec["message"].as_str().unwrap().contains("--no-such-flag"));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = gpucost(&["extract", "/nonexistent/kernels.ptx", "-o", "/tmp/unused.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_json(&out);
    assert_eq!(rec["command"], "extract");
    assert_eq!(rec["error"], "IoError");
}

#[test]
fn unsupported_ptx_is_reported_by_kind() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("tex.ptx");
    std::fs::write(
        &src,
        ".version 7.0\n.target sm_70\n.address_size 64\n.visible .entry k()\n{\n  tex.2d.v4.f32.f32 {%f1, %f2, %f3, %f4}, [t, {%f5, %f6}];\n  ret;\n}\n",
    )
    .unwrap();
    let out = gpucost(&["extract", src.to_str().unwrap(), "-o", dir.path().join("b.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "UnsupportedFeature");
}

#[test]
fn corrupt_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("bad.model");
    std::fs::write(&model, "not a model\n").unwrap();
    let out = gpucost(&["importance", "--model", model.to_str().unwrap(), "-o", dir.path().join("i.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let kind = error_json(&out)["error"].as_str().unwrap().to_string();
    assert!(kind == "CorruptModel" || kind == "FormatError", "{kind}");
}

#[test]
fn threshold_one_keeps_a_single_sample_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = corpus_dataset(dir.path(), &["--threshold", "1"]);
    let ds = read_dataset_file(&std::fs::read_to_string(dataset).unwrap()).unwrap();
    let mut groups: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for s in &ds.samples {
        let k = &s.launch_key;
        *groups.entry((k.benchmark.clone(), k.dataset.clone(), k.kernel.clone())).or_default() += 1;
    }
    // 3 kernels on 4 datasets.
    assert_eq!(groups.len(), 12);
    assert!(groups.values().all(|&n| n == 1), "{groups:?}");
}

#[test]
fn single_leaf_model_predicts_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (features, _) = corpus_dataset(dir.path(), &[]);
    let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..FEATURE_NAMES.len()).map(|f| (i * f) as f64).collect()).collect();
    let y = vec![7.5f64.ln(); 6];
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let data = TrainingSet::new(rows.concat(), y, names, TargetKind::Time).unwrap();
    let forest = Forest::fit(&data, &HyperParams { n_estimators: 4, ..Default::default() }).unwrap();
    assert!(forest.trees().iter().all(|t| t.depth() == 0));
    let model = dir.path().join("leaf.model");
    std::fs::write(&model, forest.serialize()).unwrap();

    let preds = dir.path().join("preds.csv");
    ok(gpucost(&["predict", "--model", model.to_str().unwrap(), "--features", features.to_str().unwrap(), "-o", preds.to_str().unwrap()]));
    let text = std::fs::read_to_string(preds).unwrap();
    let table = Table::read(&text, "gpucost-predictions", 1, &["benchmark", "dataset", "kernel", "launch_seq", "prediction"]).unwrap();
    assert_eq!(table.len(), 120);
    for rec in table.records() {
        let p: f64 = rec.parse("prediction").unwrap();
        assert!((p - 7.5).abs() < 1e-12, "{p}");
    }
}

#[test]
fn corpus_generator_reproduces_the_bundled_files() {
    for (name, contents) in make_corpus::generate() {
        let on_disk = std::fs::read_to_string(corpus(name)).unwrap();
        assert!(on_disk == contents, "corpus/{name} differs from the generator output");
    }
}

/// Tuning, training and prediction compose: the tuned model interpolates
/// repeated launches to their geometric mean and never leaves the range of
/// the training targets.
#[test]
fn evaluate_train_predict_compose() {
    let dir = tempfile::tempdir().unwrap();
    let (features, dataset) = corpus_dataset(dir.path(), &[]);
    let cv = dir.path().join("cv");
    ok(gpucost(&[
        "evaluate",
        "--dataset",
        dataset.to_str().unwrap(),
        "--grid-estimators",
        "16,32",
        "--iterations",
        "1",
        "--out-dir",
        cv.to_str().unwrap(),
    ]));
    let summary = std::fs::read_to_string(cv.join("cv_summary.csv")).unwrap();
    let summary = Table::read(&summary, "gpucost-cv-summary", 1, &["metric", "value"]).unwrap();
    let metric = |name: &str| summary.records().find(|r| r.get("metric") == name).unwrap().get("value").to_string();

    let model = dir.path().join("best.model");
    ok(gpucost(&[
        "train",
        "--dataset",
        dataset.to_str().unwrap(),
        "--max-features",
        &metric("best_max_features"),
        "--criterion",
        &metric("best_criterion"),
        "--n-estimators",
        &metric("best_n_estimators"),
        "-o",
        model.to_str().unwrap(),
    ]));
    let preds = dir.path().join("preds.csv");
    ok(gpucost(&["predict", "--model", model.to_str().unwrap(), "--features", features.to_str().unwrap(), "-o", preds.to_str().unwrap()]));

    let ds = read_dataset_file(&std::fs::read_to_string(&dataset).unwrap()).unwrap();
    let text = std::fs::read_to_string(preds).unwrap();
    let table = Table::read(&text, "gpucost-predictions", 1, &["benchmark", "dataset", "kernel", "launch_seq", "prediction"]).unwrap();
    let predicted: BTreeMap<String, f64> = table
        .records()
        .map(|r| {
            let key = format!("{}/{}/{}/{}", r.get("benchmark"), r.get("dataset"), r.get("kernel"), r.get("launch_seq"));
            (key, r.parse("prediction").unwrap())
        })
        .collect();

    let lo = ds.samples.iter().map(|s| s.raw_target).fold(f64::INFINITY, f64::min);
    let hi = ds.samples.iter().map(|s| s.raw_target).fold(f64::NEG_INFINITY, f64::max);
    let mut by_row: BTreeMap<Vec<u64>, Vec<(f64, f64)>> = BTreeMap::new();
    for s in &ds.samples {
        let k = &s.launch_key;
        let p = predicted[&format!("{}/{}/{}/{}", k.benchmark, k.dataset, k.kernel, k.launch_seq)];
        assert!(lo * (1.0 - 1e-12) <= p && p <= hi * (1.0 + 1e-12), "{p} outside [{lo}, {hi}]");
        let row = s.features.to_array::<f64>().iter().map(|v| v.to_bits()).collect();
        by_row.entry(row).or_default().push((s.target, p));
    }
    let repeated = by_row.values().filter(|g| g.len() > 1).count();
    assert!(repeated > 0, "the corpus repeats launches");
    for group in by_row.values() {
        let mean_log = group.iter().map(|(t, _)| t).sum::<f64>() / group.len() as f64;
        for &(_, p) in group {
            assert!((p.ln() - mean_log).abs() < 1e-9, "prediction {p} vs group mean {}", mean_log.exp());
        }
    }
}

/// SHA-256 digests of every pipeline output, checked against
/// `tests/golden/pipeline.sha256`. Set `GPUCOST_BLESS=1` to rewrite it.
#[test]
fn pipeline_outputs_match_golden_digests() {
    let dir = tempfile::tempdir().unwrap();
    common::run_pipeline(dir.path()).unwrap();
    let mut files = BTreeMap::new();
    common::collect_files(dir.path(), dir.path(), &mut files);
    let listing: String =
        files.iter().map(|(name, bytes)| format!("{}  {name}\n", hex::encode(Sha256::digest(bytes)))).collect();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pipeline.sha256");
    if std::env::var_os("GPUCOST_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &listing).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&golden).expect("golden digests exist");
    for (want, got) in expected.lines().zip(listing.lines()) {
        assert_eq!(want, got);
    }
    assert_eq!(expected.lines().count(), listing.lines().count());
}
