//! Command-line front end.
//!
//! Every subcommand reads files, runs one pipeline step and writes files.
//! Output files are pure functions of the inputs and flags; timing numbers
//! go to stdout only. Failures print a JSON record to stderr and exit
//! nonzero.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::dataset::{self, BuildOptions, TargetKind, DEFAULT_CAP};
use crate::evaluation::{self, NestedCvConfig};
use crate::extra_trees::{Criterion, Forest, HyperParams, MaxFeatures};
use crate::features::{self, FEATURE_LABELS, FEATURE_NAMES};
use crate::ptx;
use crate::seed::DEFAULT_SEED;
use crate::tabular::{write_table, Header};
use crate::Error;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "GPUCOST_THREADS";
pub const PREDICTIONS_FORMAT: &str = "gpucost-predictions";
pub const IMPORTANCE_FORMAT: &str = "gpucost-importance";

#[derive(Debug, Parser)]
#[command(name = "gpucost", version, about = "Portable GPU kernel time and power models")]
pub struct Cli {
    /// Worker threads for training (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse PTX files into a basic-block summary.
    Extract {
        #[arg(required = true)]
        ptx: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Combine a block summary with block-frequency traces.
    Features {
        #[arg(long)]
        blocks: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Join features with measurements into a training dataset.
    Build {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        kind: TargetKind,
        /// Maximum samples kept per (benchmark, dataset, kernel).
        #[arg(long, default_value_t = DEFAULT_CAP)]
        threshold: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Power only: ignore readings in the first milliseconds of a run.
        #[arg(long, default_value_t = 0.0)]
        trim_ms: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a forest on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Repeated nested cross-validation over a hyperparameter grid.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        inner_folds: usize,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Leave-one-out predictions for every sample.
    Loo {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Predict raw-unit targets for a features file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Feature importance of a model, in percent.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Single-sample prediction latency of a model.
    Latency {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 128)]
    pub n_estimators: usize,
    /// all, sqrt or log2.
    #[arg(long, default_value = "all")]
    pub max_features: MaxFeatures,
    /// mse or mae.
    #[arg(long, default_value = "mse")]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl HyperArgs {
    pub fn to_hyper(&self) -> HyperParams {
        HyperParams {
            n_estimators: self.n_estimators,
            max_features: self.max_features,
            criterion: self.criterion,
            min_samples_split: self.min_samples_split,
            max_depth: self.max_depth,
            seed: self.seed,
        }
    }
}

/// Grid override; each list defaults to the full default grid axis.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long = "grid-max-features", value_delimiter = ',', default_value = "all,sqrt,log2")]
    pub max_features: Vec<MaxFeatures>,
    #[arg(long = "grid-criteria", value_delimiter = ',', default_value = "mse,mae")]
    pub criteria: Vec<Criterion>,
    #[arg(long = "grid-estimators", value_delimiter = ',', default_value = "128,256,512,1024")]
    pub estimators: Vec<usize>,
}

impl GridArgs {
    pub fn to_grid(&self) -> Vec<HyperParams> {
        let mut grid = Vec::new();
        for &max_features in &self.max_features {
            for &criterion in &self.criteria {
                for &n_estimators in &self.estimators {
                    grid.push(HyperParams { n_estimators, max_features, criterion, ..Default::default() });
                }
            }
        }
        grid
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), Error> {
    files.iter().try_for_each(|(name, contents)| write(&dir.join(name), contents))
}

fn load_model(path: &Path) -> Result<Forest<f64>, Error> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let forest = Forest::<f64>::deserialize(&bytes)?;
    if forest.feature_names() != FEATURE_NAMES {
        return Err(Error::Usage(format!("{}: model was not trained on kernel features", path.display())));
    }
    Ok(forest)
}

fn load_features(path: &Path) -> Result<Vec<features::FeatureRecord>, Error> {
    Ok(features::read_features_file(&read(path)?)?)
}

fn cmd_extract(paths: &[PathBuf], out: &Path) -> Result<(), Error> {
    let mut modules = Vec::with_capacity(paths.len());
    for path in paths {
        let source_id = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let module = ptx::parse_ptx(&source_id, &read(path)?)?;
        let r = &module.report;
        if r.skipped_functions + r.unclassified_instructions > 0 {
            eprintln!(
                "{source_id}: {} kernels, {} device functions skipped, {} unclassified instructions",
                module.kernels.len(),
                r.skipped_functions,
                r.unclassified_instructions
            );
        }
        modules.push(module);
    }
    write(out, &ptx::write_block_summary(&modules))
}

fn cmd_features(blocks: &Path, trace: &Path, out: &Path) -> Result<(), Error> {
    let kernels = ptx::read_block_summary(&read(blocks)?)?;
    let launches = features::read_trace_file(&read(trace)?)?;
    let records = features::extract_features(&kernels, &launches)?;
    write(out, &features::write_features_file(&records))
}

fn cmd_build(features_path: &Path, measurements: &Path, kind: TargetKind, opts: &BuildOptions, out: &Path) -> Result<(), Error> {
    let features_text = read(features_path)?;
    let measurements_text = read(measurements)?;
    let records = features::read_features_file(&features_text)?;
    let provenance = vec![dataset::digest(features_text.as_bytes()), dataset::digest(measurements_text.as_bytes())];
    let (ds, report) = match kind {
        TargetKind::Time => {
            dataset::build_time_dataset(&records, &dataset::read_time_file(&measurements_text)?, provenance, opts)?
        }
        TargetKind::Power => {
            dataset::build_power_dataset(&records, &dataset::read_power_file(&measurements_text)?, provenance, opts)?
        }
    };
    eprintln!(
        "{} samples ({} launches, {} dropped by cap, {} high-CV, {} unmatched features, {} unmatched measurements)",
        ds.len(),
        report.grouped,
        report.dropped_by_cap,
        report.high_cv.len(),
        report.unmatched_features.len(),
        report.unmatched_measurements.len()
    );
    write(out, &dataset::write_dataset_file(&ds))
}

fn load_dataset(path: &Path) -> Result<dataset::Dataset, Error> {
    dataset::read_dataset_file(&read(path)?)
}

fn cmd_train(dataset_path: &Path, hp: &HyperParams, out: &Path) -> Result<(), Error> {
    let ds = load_dataset(dataset_path)?;
    let forest = Forest::fit(&ds.training_set::<f64>(), hp)?;
    eprintln!("trained {} trees, average depth {:.2}", forest.trees().len(), forest.avg_depth());
    write(out, &forest.serialize())
}

fn cmd_evaluate(dataset_path: &Path, grid: &[HyperParams], cfg: &NestedCvConfig, out_dir: &Path) -> Result<(), Error> {
    let ds = load_dataset(dataset_path)?;
    let report = evaluation::nested_cv(&ds.training_set::<f64>(), grid, cfg)?;
    write_all(out_dir, &evaluation::cv_report_files(&report))?;
    let s = &report.stats;
    println!("best: {}", report.best_hyper());
    println!("fold MAPE: median {:.3}% (Q1 {:.3}%, Q3 {:.3}%)", s.median, s.q1, s.q3);
    println!("average tree depth: {:.2}", report.avg_depth);
    println!("prediction latency: mean {:.4} ms, p95 {:.4} ms", report.latency.mean_ms, report.latency.p95_ms);
    Ok(())
}

fn cmd_loo(dataset_path: &Path, hp: &HyperParams, out_dir: &Path) -> Result<(), Error> {
    let ds = load_dataset(dataset_path)?;
    let report = evaluation::leave_one_out(&ds.training_set::<f64>(), hp)?;
    write_all(out_dir, &evaluation::loo_report_files(&report))?;
    let fractions = report.buckets.fractions();
    println!("{} predictions, {:.1}% within 10%", report.records.len(), 100.0 * fractions[0]);
    Ok(())
}

fn cmd_predict(model: &Path, features_path: &Path, out: &Path) -> Result<(), Error> {
    let forest = load_model(model)?;
    let records = load_features(features_path)?;
    let mut columns: Vec<&str> = vec!["benchmark", "dataset", "kernel", "launch_seq"];
    columns.push("prediction");
    let header = Header::new(PREDICTIONS_FORMAT, 1, &columns).with_meta("kind", forest.target_kind().as_str());
    let mut rows = Vec::with_capacity(records.len());
    let mut times = Vec::with_capacity(records.len());
    for r in &records {
        let start = std::time::Instant::now();
        let pred = forest.predict_raw(&r.features.to_array::<f64>())?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        let k = &r.key;
        rows.push([k.benchmark.clone(), k.dataset.clone(), k.kernel.clone(), k.launch_seq.to_string(), pred.to_string()]);
    }
    write(out, &write_table(&header, rows))?;
    if !times.is_empty() {
        let stats = evaluation::LatencyStats::from_samples(&times);
        println!("{} predictions, mean {:.4} ms per call, p95 {:.4} ms", stats.count, stats.mean_ms, stats.p95_ms);
    }
    Ok(())
}

/// Importance rows ordered from most to least important.
pub fn importance_table(forest: &Forest<f64>) -> String {
    let imp = forest.feature_importance();
    let header = Header::new(IMPORTANCE_FORMAT, 1, &["rank", "feature", "label", "percent"])
        .with_meta("all_leaves", imp.all_leaves.to_string());
    let rows = imp.ranking().into_iter().enumerate().map(|(rank, f)| {
        [(rank + 1).to_string(), FEATURE_NAMES[f].to_string(), FEATURE_LABELS[f].to_string(), (100.0 * imp.values[f]).to_string()]
    });
    write_table(&header, rows)
}

fn cmd_importance(model: &Path, out: &Path) -> Result<(), Error> {
    write(out, &importance_table(&load_model(model)?))
}

fn cmd_latency(model: &Path, features_path: &Path, repetitions: usize) -> Result<(), Error> {
    let forest = load_model(model)?;
    let probes: Vec<Vec<f64>> = load_features(features_path)?.iter().map(|r| r.features.to_array::<f64>().to_vec()).collect();
    let s = evaluation::measure_latency(&forest, &probes, repetitions)?;
    println!(
        "{} trees, average depth {:.2}: mean {:.4} ms, median {:.4} ms, p95 {:.4} ms over {} calls",
        forest.trees().len(),
        forest.avg_depth(),
        s.mean_ms,
        s.median_ms,
        s.p95_ms,
        s.count
    );
    Ok(())
}

impl Cli {
    pub fn execute(&self) -> Result<(), Error> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Usage("thread count must be at least 1".into()));
            }
            // Fails only if a pool already exists, e.g. in tests.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        match &self.command {
            Command::Extract { ptx, out } => cmd_extract(ptx, out),
            Command::Features { blocks, trace, out } => cmd_features(blocks, trace, out),
            Command::Build { features, measurements, kind, threshold, seed, trim_ms, out } => {
                let opts = BuildOptions { threshold: *threshold, seed: *seed, trim_ms: *trim_ms };
                cmd_build(features, measurements, *kind, &opts, out)
            }
            Command::Train { dataset, hyper, out } => cmd_train(dataset, &hyper.to_hyper(), out),
            Command::Evaluate { dataset, grid, folds, inner_folds, iterations, seed, out_dir } => {
                let cfg = NestedCvConfig { k_outer: *folds, k_inner: *inner_folds, iterations: *iterations, seed: *seed };
                cmd_evaluate(dataset, &grid.to_grid(), &cfg, out_dir)
            }
            Command::Loo { dataset, hyper, out_dir } => cmd_loo(dataset, &hyper.to_hyper(), out_dir),
            Command::Predict { model, features, out } => cmd_predict(model, features, out),
            Command::Importance { model, out } => cmd_importance(model, out),
            Command::Latency { model, features, repetitions } => cmd_latency(model, features, *repetitions),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Extract { .. } => "extract",
            Command::Features { .. } => "features",
            Command::Build { .. } => "build",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Loo { .. } => "loo",
            Command::Predict { .. } => "predict",
            Command::Importance { .. } => "importance",
            Command::Latency { .. } => "latency",
        }
    }
}

/// Machine-readable error record.
pub fn error_record(command: &str, err: &Error) -> String {
    json!({ "command": command, "error": err.kind(), "message": err.to_string() }).to_string()
}

/// Parses `args` and runs the command; the process entry point.
pub fn run<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", error_record("gpucost", &err));
            return ExitCode::from(2);
        }
    };
    match cli.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_record(cli.name(), &err));
            ExitCode::FAILURE
        }
    }
}
