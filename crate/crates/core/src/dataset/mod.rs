//! Measurement ingestion and training-set construction.
//!
//! Time and power measurements are joined with feature records by launch
//! key, repeated runs are collapsed to one sample, over-represented kernels
//! are capped, and targets are transformed for training.

mod io;
mod measure;

pub use io::{
    digest, read_dataset_file, read_power_file, read_time_file, write_dataset_file, write_power_file,
    write_time_file, DATASET_FORMAT, POWER_FORMAT, TIME_FORMAT,
};
pub use measure::{aggregate_power, group_identical_launches, transform_target};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use thiserror::Error;

use crate::extra_trees::TrainingSet;
use crate::features::{FeatureRecord, FeatureVector, LaunchKey, FEATURE_COUNT, FEATURE_NAMES};
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// Repeats with a coefficient of variation above this are flagged.
pub const HIGH_CV: f64 = 1.0;

/// Samples kept per (benchmark, dataset, kernel) combination by default.
pub const DEFAULT_CAP: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("duplicate record for {0}")]
    DuplicateKey(String),
    #[error("cannot aggregate an empty group of measurements")]
    EmptyGroup,
    #[error("cannot aggregate an empty power series")]
    EmptySeries,
    #[error("target must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("invalid measurement for {key}: {reason}")]
    InvalidMeasurement { key: String, reason: String },
    #[error("cap threshold must be at least 1")]
    ZeroThreshold,
    #[error("unknown target kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    /// Execution time; trained on the natural log of microseconds.
    Time,
    /// Average power in watts; trained untransformed.
    Power,
}

impl TargetKind {
    /// Maps a raw measurement into training space.
    pub fn transform<T: Scalar>(self, raw: T) -> T {
        match self {
            TargetKind::Time => raw.ln(),
            TargetKind::Power => raw,
        }
    }

    /// Maps a model output back into raw units.
    pub fn invert<T: Scalar>(self, value: T) -> T {
        match self {
            TargetKind::Time => value.exp(),
            TargetKind::Power => value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Time => "time",
            TargetKind::Power => "power",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(TargetKind::Time),
            "power" => Ok(TargetKind::Power),
            other => Err(DatasetError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMeasurement {
    pub launch_key: LaunchKey,
    pub run_index: u32,
    pub duration_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSampleSeries {
    pub launch_key: LaunchKey,
    pub run_index: u32,
    /// `(timestamp_ms, watts)`, timestamps strictly increasing.
    pub samples: Vec<(f64, f64)>,
}

impl PowerSampleSeries {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: &str| DatasetError::InvalidMeasurement {
            key: format!("{} run {}", self.launch_key, self.run_index),
            reason: reason.to_string(),
        };
        if self.samples.iter().any(|&(t, w)| !t.is_finite() || !w.is_finite() || w <= 0.0) {
            return Err(bad("power readings must be finite and positive"));
        }
        if self.samples.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(bad("timestamps must be strictly increasing"));
        }
        Ok(())
    }
}

/// A keyed measurement that belongs to one run of one launch.
pub trait Measurement {
    fn launch_key(&self) -> &LaunchKey;
    fn run_index(&self) -> u32;
}

impl Measurement for TimeMeasurement {
    fn launch_key(&self) -> &LaunchKey {
        &self.launch_key
    }
    fn run_index(&self) -> u32 {
        self.run_index
    }
}

impl Measurement for PowerSampleSeries {
    fn launch_key(&self) -> &LaunchKey {
        &self.launch_key
    }
    fn run_index(&self) -> u32 {
        self.run_index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joined<M> {
    pub launch_key: LaunchKey,
    pub features: FeatureVector,
    pub values: Vec<M>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome<M> {
    /// Sorted by launch key.
    pub joined: Vec<Joined<M>>,
    pub unmatched_features: Vec<LaunchKey>,
    pub unmatched_measurements: Vec<LaunchKey>,
}

/// Inner join of feature records and measurements on the launch key.
///
/// A key may appear once among the features and once per run index among
/// the measurements; anything else is a [`DatasetError::DuplicateKey`].
pub fn join_measurements<M: Measurement + Clone>(
    features: &[FeatureRecord],
    measurements: &[M],
) -> Result<JoinOutcome<M>, DatasetError> {
    let mut by_key: BTreeMap<&LaunchKey, &FeatureVector> = BTreeMap::new();
    for r in features {
        if by_key.insert(&r.key, &r.features).is_some() {
            return Err(DatasetError::DuplicateKey(r.key.to_string()));
        }
    }
    let mut groups: BTreeMap<&LaunchKey, Vec<M>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for m in measurements {
        if !seen.insert((m.launch_key(), m.run_index())) {
            return Err(DatasetError::DuplicateKey(format!("{} run {}", m.launch_key(), m.run_index())));
        }
        groups.entry(m.launch_key()).or_default().push(m.clone());
    }
    let mut joined = Vec::new();
    let mut unmatched_measurements = Vec::new();
    for (key, values) in groups {
        match by_key.get(key) {
            Some(fv) => joined.push(Joined { launch_key: key.clone(), features: **fv, values }),
            None => unmatched_measurements.push(key.clone()),
        }
    }
    let matched: BTreeSet<&LaunchKey> = joined.iter().map(|j| &j.launch_key).collect();
    let unmatched_features = by_key.keys().filter(|k| !matched.contains(*k)).map(|k| (*k).clone()).collect();
    Ok(JoinOutcome { joined, unmatched_features, unmatched_measurements })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub launch_key: LaunchKey,
    pub features: FeatureVector,
    /// Training-space target (log-microseconds or watts).
    pub target: f64,
    pub raw_target: f64,
    /// Coefficient of variation of the underlying repeats.
    pub cv: f64,
}

impl Sample {
    pub fn new(launch_key: LaunchKey, features: FeatureVector, raw_target: f64, cv: f64, kind: TargetKind) -> Result<Self, DatasetError> {
        Ok(Sample { launch_key, features, target: transform_target(raw_target, kind)?, raw_target, cv })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub target_kind: TargetKind,
    /// Digests of the files the samples were built from.
    pub provenance: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, target_kind: TargetKind, provenance: Vec<String>) -> Result<Self, DatasetError> {
        let mut keys = BTreeSet::new();
        for s in &samples {
            if !keys.insert(&s.launch_key) {
                return Err(DatasetError::DuplicateKey(s.launch_key.to_string()));
            }
        }
        Ok(Dataset { samples, target_kind, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn raw_targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.raw_target).collect()
    }

    /// Feature matrix and transformed targets in scalar type `T`.
    pub fn training_set<T: Scalar>(&self) -> TrainingSet<T> {
        let mut features = Vec::with_capacity(self.len() * FEATURE_COUNT);
        for s in &self.samples {
            features.extend(s.features.to_array::<T>());
        }
        TrainingSet::new(
            features,
            self.samples.iter().map(|s| T::from_f64_lossy(s.target)).collect(),
            FEATURE_NAMES.iter().map(|n| n.to_string()).collect(),
            self.target_kind,
        )
        .expect("dataset rows have uniform arity")
    }
}

/// Keeps at most `threshold` samples per (benchmark, dataset, kernel),
/// drawn uniformly without replacement. The result is sorted by launch key.
pub fn cap_overrepresented(
    groups: BTreeMap<(String, String, String), Vec<Sample>>,
    threshold: usize,
    seed: u64,
) -> Result<Vec<Sample>, DatasetError> {
    if threshold == 0 {
        return Err(DatasetError::ZeroThreshold);
    }
    let mut rng = rng_for(seed, &[0xCA9]);
    let mut out = Vec::new();
    for (_, group) in groups {
        if group.len() <= threshold {
            out.extend(group);
            continue;
        }
        let mut picked = index::sample(&mut rng, group.len(), threshold).into_vec();
        picked.sort_unstable();
        let mut picked = picked.into_iter().peekable();
        for (i, s) in group.into_iter().enumerate() {
            if picked.peek() == Some(&i) {
                picked.next();
                out.push(s);
            }
        }
    }
    out.sort_by(|a, b| a.launch_key.cmp(&b.launch_key));
    Ok(out)
}

pub fn group_samples(samples: Vec<Sample>) -> BTreeMap<(String, String, String), Vec<Sample>> {
    let mut groups: BTreeMap<_, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.launch_key.group()).or_default().push(s);
    }
    groups
}

/// What happened while building a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub unmatched_features: Vec<LaunchKey>,
    pub unmatched_measurements: Vec<LaunchKey>,
    /// Samples kept despite a coefficient of variation above [`HIGH_CV`].
    pub high_cv: Vec<LaunchKey>,
    pub grouped: usize,
    pub dropped_by_cap: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub threshold: usize,
    pub seed: u64,
    /// Power only: readings in the first `trim_ms` of each run are ignored.
    pub trim_ms: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { threshold: DEFAULT_CAP, seed: crate::seed::DEFAULT_SEED, trim_ms: 0.0 }
    }
}

fn finish(
    samples: Vec<Sample>,
    kind: TargetKind,
    provenance: Vec<String>,
    opts: &BuildOptions,
    mut report: BuildReport,
) -> Result<(Dataset, BuildReport), DatasetError> {
    report.grouped = samples.len();
    report.high_cv = samples.iter().filter(|s| s.cv > HIGH_CV).map(|s| s.launch_key.clone()).collect();
    let capped = cap_overrepresented(group_samples(samples), opts.threshold, opts.seed)?;
    report.dropped_by_cap = report.grouped - capped.len();
    Ok((Dataset::new(capped, kind, provenance)?, report))
}

pub fn build_time_dataset(
    features: &[FeatureRecord],
    measurements: &[TimeMeasurement],
    provenance: Vec<String>,
    opts: &BuildOptions,
) -> Result<(Dataset, BuildReport), DatasetError> {
    let outcome = join_measurements(features, measurements)?;
    let samples = outcome
        .joined
        .into_iter()
        .map(|j| {
            let durations: Vec<f64> = j.values.iter().map(|m| m.duration_us).collect();
            let (median, cv) = group_identical_launches(&durations)?;
            Sample::new(j.launch_key, j.features, median, cv, TargetKind::Time)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = BuildReport {
        unmatched_features: outcome.unmatched_features,
        unmatched_measurements: outcome.unmatched_measurements,
        ..Default::default()
    };
    finish(samples, TargetKind::Time, provenance, opts, report)
}

pub fn build_power_dataset(
    features: &[FeatureRecord],
    series: &[PowerSampleSeries],
    provenance: Vec<String>,
    opts: &BuildOptions,
) -> Result<(Dataset, BuildReport), DatasetError> {
    let outcome = join_measurements(features, series)?;
    let samples = outcome
        .joined
        .into_iter()
        .map(|j| {
            let (mean, cv) = aggregate_power(&j.values, opts.trim_ms)?;
            Sample::new(j.launch_key, j.features, mean, cv, TargetKind::Power)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = BuildReport {
        unmatched_features: outcome.unmatched_features,
        unmatched_measurements: outcome.unmatched_measurements,
        ..Default::default()
    };
    finish(samples, TargetKind::Power, provenance, opts, report)
}
