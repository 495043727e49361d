//! Turns static block statistics, block execution frequencies and the launch
//! configuration into the 12-component feature vector of a kernel launch.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ptx::KernelCode;
use crate::scalar::Scalar;
use crate::tabular::{write_table, FormatError, Header, Table};

pub const FEATURE_COUNT: usize = 12;

/// Column names, in model input order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "threads_per_cta",
    "ctas",
    "total_instr",
    "special_ops",
    "logic_ops",
    "control_ops",
    "arithm_ops",
    "sync_ops",
    "global_mem_vol",
    "param_mem_vol",
    "shared_mem_vol",
    "arithm_intensity",
];

/// Human-readable labels, same order as [`FEATURE_NAMES`].
pub const FEATURE_LABELS: [&str; FEATURE_COUNT] = [
    "threads per CTA",
    "CTAs",
    "total instr.",
    "special ops",
    "logic ops",
    "control ops",
    "arithm. ops",
    "sync ops",
    "global mem vol.",
    "param mem vol.",
    "shared mem vol.",
    "arithm. intensity",
];

/// Largest CTA the hardware generations in scope accept.
pub const MAX_THREADS_PER_CTA: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("trace for `{kernel}` references unknown block {block}")]
    KeyMismatch { kernel: String, block: usize },
    #[error("trace is for kernel `{trace}`, not `{kernel}`")]
    KernelMismatch { kernel: String, trace: String },
    #[error("no kernel named `{0}` in the block summary")]
    UnknownKernel(String),
    #[error("kernel `{0}` appears in more than one source")]
    DuplicateKernel(String),
    #[error("invalid launch configuration: {0}")]
    InvalidLaunch(String),
    #[error("feature sum overflows 64 bits for kernel `{0}`")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dim3 {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Dim3 {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        Dim3 { x, y, z }
    }

    pub fn product(&self) -> u64 {
        self.x as u64 * self.y as u64 * self.z as u64
    }
}

/// Identifies one kernel launch within a profiled run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaunchKey {
    pub benchmark: String,
    pub dataset: String,
    pub kernel: String,
    pub launch_seq: u64,
}

impl LaunchKey {
    pub fn new(benchmark: &str, dataset: &str, kernel: &str, launch_seq: u64) -> Self {
        LaunchKey {
            benchmark: benchmark.to_string(),
            dataset: dataset.to_string(),
            kernel: kernel.to_string(),
            launch_seq,
        }
    }

    /// The (benchmark, dataset, kernel) combination used for capping.
    pub fn group(&self) -> (String, String, String) {
        (self.benchmark.clone(), self.dataset.clone(), self.kernel.clone())
    }
}

impl fmt::Display for LaunchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}#{}", self.benchmark, self.dataset, self.kernel, self.launch_seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    pub grid_dim: Dim3,
    pub block_dim: Dim3,
    pub shared_mem_bytes: u64,
    pub launch_seq: u64,
}

impl LaunchConfig {
    pub fn threads_per_cta(&self) -> u64 {
        self.block_dim.product()
    }

    pub fn ctas(&self) -> u64 {
        self.grid_dim.product()
    }

    /// Rejects zero dimensions. Oversized CTAs are allowed; see
    /// [`LaunchConfig::exceeds_cta_limit`].
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.ctas() == 0 || self.threads_per_cta() == 0 {
            return Err(FeatureError::InvalidLaunch(format!(
                "grid {:?} / block {:?} has a zero dimension",
                self.grid_dim, self.block_dim
            )));
        }
        Ok(())
    }

    pub fn exceeds_cta_limit(&self) -> bool {
        self.threads_per_cta() > MAX_THREADS_PER_CTA
    }
}

/// Per-launch block execution counts, summed over all threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockFrequencyTrace {
    pub launch_key: LaunchKey,
    pub freqs: BTreeMap<usize, u64>,
}

impl BlockFrequencyTrace {
    pub fn kernel(&self) -> &str {
        &self.launch_key.kernel
    }

    /// A copy with every frequency multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        BlockFrequencyTrace {
            launch_key: self.launch_key.clone(),
            freqs: self.freqs.iter().map(|(&b, &f)| (b, f * factor)).collect(),
        }
    }
}

/// The 12 hardware-independent model inputs of one kernel launch.
///
/// Every field is derived from PTX code and the launch configuration; no
/// device property or hardware counter enters here.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureVector {
    pub threads_per_cta: u64,
    pub ctas: u64,
    pub total_instr: u64,
    pub special_ops: u64,
    pub logic_ops: u64,
    pub control_ops: u64,
    pub arithm_ops: u64,
    pub sync_ops: u64,
    pub global_mem_vol: u64,
    pub param_mem_vol: u64,
    pub shared_mem_vol: u64,
    pub arithm_intensity: f64,
}

impl FeatureVector {
    pub fn to_array<T: Scalar>(&self) -> [T; FEATURE_COUNT] {
        let c = |v: u64| T::from_f64_lossy(v as f64);
        [
            c(self.threads_per_cta),
            c(self.ctas),
            c(self.total_instr),
            c(self.special_ops),
            c(self.logic_ops),
            c(self.control_ops),
            c(self.arithm_ops),
            c(self.sync_ops),
            c(self.global_mem_vol),
            c(self.param_mem_vol),
            c(self.shared_mem_vol),
            T::from_f64_lossy(self.arithm_intensity),
        ]
    }

    /// Field values as strings, in [`FEATURE_NAMES`] order.
    pub fn to_fields(&self) -> [String; FEATURE_COUNT] {
        [
            self.threads_per_cta.to_string(),
            self.ctas.to_string(),
            self.total_instr.to_string(),
            self.special_ops.to_string(),
            self.logic_ops.to_string(),
            self.control_ops.to_string(),
            self.arithm_ops.to_string(),
            self.sync_ops.to_string(),
            self.global_mem_vol.to_string(),
            self.param_mem_vol.to_string(),
            self.shared_mem_vol.to_string(),
            self.arithm_intensity.to_string(),
        ]
    }

    pub(crate) fn from_record(rec: &crate::tabular::Record<'_>) -> Result<Self, FormatError> {
        let fv = FeatureVector {
            threads_per_cta: rec.parse("threads_per_cta")?,
            ctas: rec.parse("ctas")?,
            total_instr: rec.parse("total_instr")?,
            special_ops: rec.parse("special_ops")?,
            logic_ops: rec.parse("logic_ops")?,
            control_ops: rec.parse("control_ops")?,
            arithm_ops: rec.parse("arithm_ops")?,
            sync_ops: rec.parse("sync_ops")?,
            global_mem_vol: rec.parse("global_mem_vol")?,
            param_mem_vol: rec.parse("param_mem_vol")?,
            shared_mem_vol: rec.parse("shared_mem_vol")?,
            arithm_intensity: rec.parse("arithm_intensity")?,
        };
        if !fv.arithm_intensity.is_finite() || fv.arithm_intensity < 0.0 {
            return Err(rec.bad("arithm_intensity"));
        }
        Ok(fv)
    }
}

#[derive(Default)]
struct Weighted {
    total: u64,
    arithmetic: u64,
    special: u64,
    logic: u64,
    control: u64,
    sync: u64,
    global: u64,
    shared: u64,
    param: u64,
    local: u64,
}

fn weighted_sums(kernel: &KernelCode, trace: &BlockFrequencyTrace) -> Result<Weighted, FeatureError> {
    let overflow = || FeatureError::Overflow(kernel.name.clone());
    let mut w = Weighted::default();
    for (&block, &freq) in &trace.freqs {
        let b = kernel.blocks.get(block).ok_or_else(|| FeatureError::KeyMismatch {
            kernel: kernel.name.clone(),
            block,
        })?;
        let acc = |slot: &mut u64, per_exec: u64| -> Result<(), FeatureError> {
            *slot = freq.checked_mul(per_exec).and_then(|v| slot.checked_add(v)).ok_or_else(overflow)?;
            Ok(())
        };
        acc(&mut w.total, b.counts.total)?;
        acc(&mut w.arithmetic, b.counts.arithmetic)?;
        acc(&mut w.special, b.counts.special)?;
        acc(&mut w.logic, b.counts.logic)?;
        acc(&mut w.control, b.counts.control)?;
        acc(&mut w.sync, b.counts.sync)?;
        acc(&mut w.global, b.mem.global_bytes)?;
        acc(&mut w.shared, b.mem.shared_bytes)?;
        acc(&mut w.param, b.mem.param_bytes)?;
        acc(&mut w.local, b.mem.local_bytes)?;
    }
    Ok(w)
}

/// Arithmetic instructions per byte of global plus local traffic. A launch
/// without such traffic divides by one byte instead of zero.
pub fn arithmetic_intensity(arithm_ops: u64, global_bytes: u64, local_bytes: u64) -> f64 {
    let denom = global_bytes.saturating_add(local_bytes);
    arithm_ops as f64 / denom.max(1) as f64
}

pub fn build_feature_vector(
    kernel: &KernelCode,
    trace: &BlockFrequencyTrace,
    cfg: &LaunchConfig,
) -> Result<FeatureVector, FeatureError> {
    if trace.kernel() != kernel.name {
        return Err(FeatureError::KernelMismatch {
            kernel: kernel.name.clone(),
            trace: trace.kernel().to_string(),
        });
    }
    cfg.validate()?;
    let w = weighted_sums(kernel, trace)?;
    Ok(FeatureVector {
        threads_per_cta: cfg.threads_per_cta(),
        ctas: cfg.ctas(),
        total_instr: w.total,
        special_ops: w.special,
        logic_ops: w.logic,
        control_ops: w.control,
        arithm_ops: w.arithmetic,
        sync_ops: w.sync,
        global_mem_vol: w.global,
        param_mem_vol: w.param,
        shared_mem_vol: w.shared,
        arithm_intensity: arithmetic_intensity(w.arithmetic, w.global, w.local),
    })
}

/// Local-memory bytes moved by a launch. Only feeds the arithmetic
/// intensity; blocks unknown to the kernel contribute nothing.
pub fn local_mem_vol(kernel: &KernelCode, trace: &BlockFrequencyTrace) -> u64 {
    trace
        .freqs
        .iter()
        .filter_map(|(&b, &f)| kernel.blocks.get(b).map(|blk| f.saturating_mul(blk.mem.local_bytes)))
        .fold(0u64, u64::saturating_add)
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchTrace {
    pub trace: BlockFrequencyTrace,
    pub config: LaunchConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub key: LaunchKey,
    pub features: FeatureVector,
}

/// Builds one feature record per launch, looking kernels up by name.
pub fn extract_features(kernels: &[KernelCode], launches: &[LaunchTrace]) -> Result<Vec<FeatureRecord>, FeatureError> {
    let mut by_name: HashMap<&str, &KernelCode> = HashMap::new();
    for k in kernels {
        if by_name.insert(k.name.as_str(), k).is_some() {
            return Err(FeatureError::DuplicateKernel(k.name.clone()));
        }
    }
    launches
        .iter()
        .map(|l| {
            let kernel = by_name
                .get(l.trace.kernel())
                .ok_or_else(|| FeatureError::UnknownKernel(l.trace.kernel().to_string()))?;
            Ok(FeatureRecord { key: l.trace.launch_key.clone(), features: build_feature_vector(kernel, &l.trace, &l.config)? })
        })
        .collect()
}

pub const TRACE_FORMAT: &str = "gpucost-trace";
pub const FEATURES_FORMAT: &str = "gpucost-features";
const TRACE_COLUMNS: &[&str] = &[
    "benchmark",
    "dataset",
    "kernel",
    "launch_seq",
    "grid_x",
    "grid_y",
    "grid_z",
    "block_x",
    "block_y",
    "block_z",
    "shared_mem_bytes",
    "block_freqs",
];

pub(crate) const KEY_COLUMNS: [&str; 4] = ["benchmark", "dataset", "kernel", "launch_seq"];

pub(crate) fn key_from_record(rec: &crate::tabular::Record<'_>) -> Result<LaunchKey, FormatError> {
    Ok(LaunchKey {
        benchmark: rec.get("benchmark").to_string(),
        dataset: rec.get("dataset").to_string(),
        kernel: rec.get("kernel").to_string(),
        launch_seq: rec.parse("launch_seq")?,
    })
}

pub(crate) fn key_fields(key: &LaunchKey) -> [String; 4] {
    [key.benchmark.clone(), key.dataset.clone(), key.kernel.clone(), key.launch_seq.to_string()]
}

fn features_columns() -> Vec<&'static str> {
    KEY_COLUMNS.iter().chain(FEATURE_NAMES.iter()).copied().collect()
}

/// Reads a trace file. The `block_freqs` column holds space-separated
/// `block:count` pairs.
pub fn read_trace_file(text: &str) -> Result<Vec<LaunchTrace>, FormatError> {
    let table = Table::read(text, TRACE_FORMAT, 1, TRACE_COLUMNS)?;
    table
        .records()
        .map(|rec| {
            let launch_key = key_from_record(&rec)?;
            let mut freqs = BTreeMap::new();
            for pair in rec.get("block_freqs").split_whitespace() {
                let (b, f) = pair.split_once(':').ok_or_else(|| rec.bad("block_freqs"))?;
                let b: usize = b.parse().map_err(|_| rec.bad("block_freqs"))?;
                let f: u64 = f.parse().map_err(|_| rec.bad("block_freqs"))?;
                if freqs.insert(b, f).is_some() {
                    return Err(rec.bad("block_freqs"));
                }
            }
            let config = LaunchConfig {
                grid_dim: Dim3::new(rec.parse("grid_x")?, rec.parse("grid_y")?, rec.parse("grid_z")?),
                block_dim: Dim3::new(rec.parse("block_x")?, rec.parse("block_y")?, rec.parse("block_z")?),
                shared_mem_bytes: rec.parse("shared_mem_bytes")?,
                launch_seq: launch_key.launch_seq,
            };
            Ok(LaunchTrace { trace: BlockFrequencyTrace { launch_key, freqs }, config })
        })
        .collect()
}

pub fn write_trace_file(launches: &[LaunchTrace]) -> String {
    let header = Header::new(TRACE_FORMAT, 1, TRACE_COLUMNS);
    let rows = launches.iter().map(|l| {
        let c = &l.config;
        let freqs: Vec<String> = l.trace.freqs.iter().map(|(b, f)| format!("{b}:{f}")).collect();
        let mut row: Vec<String> = key_fields(&l.trace.launch_key).into();
        row.extend([c.grid_dim.x, c.grid_dim.y, c.grid_dim.z, c.block_dim.x, c.block_dim.y, c.block_dim.z].map(|v| v.to_string()));
        row.push(c.shared_mem_bytes.to_string());
        row.push(freqs.join(" "));
        row
    });
    write_table(&header, rows)
}

pub fn write_features_file(records: &[FeatureRecord]) -> String {
    let header = Header::new(FEATURES_FORMAT, 1, &features_columns());
    let rows = records.iter().map(|r| {
        let mut row: Vec<String> = key_fields(&r.key).into();
        row.extend(r.features.to_fields());
        row
    });
    write_table(&header, rows)
}

pub fn read_features_file(text: &str) -> Result<Vec<FeatureRecord>, FormatError> {
    let table = Table::read(text, FEATURES_FORMAT, 1, &features_columns())?;
    table
        .records()
        .map(|rec| Ok(FeatureRecord { key: key_from_record(&rec)?, features: FeatureVector::from_record(&rec)? }))
        .collect()
}
