#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use clap::Parser;
use gpucost::cli::Cli;

use gpucost::dataset::TargetKind;
use gpucost::extra_trees::TrainingSet;
use gpucost::features::{BlockFrequencyTrace, LaunchKey};
use gpucost::ptx::KernelCode;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE: &str = include_str!("../../corpus/kernels.ptx");

/// Per-block counts of the fixture, derived by reading the PTX by hand:
/// `[total, arithmetic, special, logic, control, sync, global, shared, param, local]`.
pub type BlockRow = [u64; 10];

pub struct KernelOracle {
    pub name: &'static str,
    pub param_bytes: u64,
    pub blocks: &'static [BlockRow],
}

pub const ORACLE: [KernelOracle; 3] = [
    KernelOracle {
        name: "saxpy",
        // u64 + u64 + f32 + u32
        param_bytes: 24,
        blocks: &[
            // 4 ld.param (8+8+4+4), 3 mov + mad, setp, bra
            [10, 4, 0, 1, 1, 0, 0, 0, 24, 0],
            // 2 cvta, mul, 2 add, fma; 2 ld.global.f32 + st.global.f32
            [9, 6, 0, 0, 0, 0, 12, 0, 0, 0],
            // ret
            [1, 0, 0, 0, 1, 0, 0, 0, 0, 0],
        ],
    },
    KernelOracle {
        name: "block_reduce",
        param_bytes: 16,
        blocks: &[
            // 2 ld.param.u64; 4 mov, mad, cvta, mul, 2 add; ld.global.f32;
            // shl, shr; st.shared.f32; bar.sync
            [16, 9, 0, 2, 0, 1, 4, 4, 16, 0],
            // $L__BB1_1: setp, bra
            [2, 0, 0, 1, 1, 0, 0, 0, 0, 0],
            // shl, add.s32, add.f32; 2 ld.shared.f32 + st.shared.f32
            [6, 2, 0, 1, 0, 0, 0, 12, 0, 0],
            // $L__BB1_3: bar.sync, shr, setp, bra
            [4, 0, 0, 2, 1, 1, 0, 0, 0, 0],
            // setp, bra
            [2, 0, 0, 1, 1, 0, 0, 0, 0, 0],
            // ld.shared.f32; cvta, mul, add; atom
            [5, 3, 0, 0, 0, 1, 0, 4, 0, 0],
            // $L__BB1_5: ret
            [1, 0, 0, 0, 1, 0, 0, 0, 0, 0],
        ],
    },
    KernelOracle {
        name: "normalize4",
        param_bytes: 12,
        blocks: &[
            // mov.u64, 3 mov.u32, mad; ld.param u64 + u32; setp, bra
            [9, 5, 0, 1, 1, 0, 0, 0, 12, 0],
            // cvta, mul.wide, add, mul, 3 fma, mul; rsqrt, sqrt, ex2;
            // ld/st.global.v4.f32 (16 + 16); st.local.v4.f32 + ld.local.f32 (16 + 4)
            [15, 8, 3, 0, 0, 0, 32, 0, 0, 20],
            // exit
            [1, 0, 0, 0, 1, 0, 0, 0, 0, 0],
        ],
    },
];

pub fn block_row(b: &gpucost::ptx::BasicBlock) -> BlockRow {
    let (c, m) = (b.counts, b.mem);
    [c.total, c.arithmetic, c.special, c.logic, c.control, c.sync, m.global_bytes, m.shared_bytes, m.param_bytes, m.local_bytes]
}

/// Features that drive [`piecewise_target`].
pub const INFORMATIVE: [usize; 3] = [0, 3, 7];

/// Noise-free kernel time in microseconds: linear in `x[7]`, bilinear in
/// `x[0]` and `x[3]`, with a slope change at `x[0] = 50`. Spans roughly
/// 200 to 1,600.
pub fn piecewise_target(x: &[f64]) -> f64 {
    let a = if x[0] < 50.0 { 2.0 * x[0] } else { 100.0 + 8.0 * (x[0] - 50.0) };
    200.0 + a * (1.0 + x[3] / 100.0) + 4.0 * x[7]
}

/// `n` rows of 12 uniform features in `[0, 100)` with a time target.
pub fn piecewise_dataset(n: usize, seed: u64) -> TrainingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..12).map(|_| rng.gen_range(0.0..100.0)).collect()).collect();
    let y = rows.iter().map(|r| TargetKind::Time.transform(piecewise_target(r))).collect();
    TrainingSet::from_rows(&rows, y, TargetKind::Time).unwrap()
}

/// Random rows (distinct with probability one) and log-uniform raw targets.
pub fn random_dataset(n: usize, arity: usize, kind: TargetKind, seed: u64) -> (TrainingSet<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..arity).map(|_| rng.gen_range(-50.0..50.0)).collect()).collect();
    let raw: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(0.5..5.5))).collect();
    let y = raw.iter().map(|&r| kind.transform(r)).collect();
    (TrainingSet::from_rows(&rows, y, kind).unwrap(), raw)
}

/// Rows whose feature values are distinct powers of two, so a uniform
/// cut-point usually peels off a single sample and trees grow long chains.
pub fn deep_dataset(n: usize, seed: u64) -> TrainingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for _ in 0..12 {
        let mut exps: Vec<i32> = (0..n as i32).collect();
        exps.shuffle(&mut rng);
        columns.push(exps.into_iter().map(|e| 2f64.powi(e)).collect());
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let y = (0..n).map(|_| rng.gen_range(1.0..10.0f64).ln()).collect();
    TrainingSet::from_rows(&rows, y, TargetKind::Time).unwrap()
}

/// A trace with every block executed between 1 and `max` times.
pub fn random_trace<R: Rng>(kernel: &KernelCode, max: u64, rng: &mut R) -> BlockFrequencyTrace {
    let freqs: BTreeMap<usize, u64> = kernel.blocks.iter().map(|b| (b.id, rng.gen_range(1..=max))).collect();
    BlockFrequencyTrace { launch_key: LaunchKey::new("bench", "data", &kernel.name, 0), freqs }
}

/// Log-uniform times from 10 us to 1 s, covering all three duration classes.
pub fn random_times(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 10f64.powf(rng.gen_range(1.0..6.0))).collect()
}

pub fn run_cli(args: &[&str]) -> Result<(), String> {
    let cli = Cli::try_parse_from(std::iter::once("gpucost").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    cli.execute().map_err(|e| format!("{}: {e}", cli.name()))
}

/// Runs every pipeline step on the bundled corpus with default flags.
pub fn run_pipeline(out: &Path) -> Result<(), String> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let c = |f: &str| corpus.join(f).display().to_string();
    let o = |f: &str| out.join(f).display().to_string();
    run_cli(&["extract", &c("kernels.ptx"), "-o", &o("blocks.csv")])?;
    run_cli(&["features", "--blocks", &o("blocks.csv"), "--trace", &c("trace.csv"), "-o", &o("features.csv")])?;
    run_cli(&["build", "--features", &o("features.csv"), "--measurements", &c("time.csv"), "--kind", "time", "-o", &o("time_dataset.csv")])?;
    run_cli(&[
        "build", "--features", &o("features.csv"), "--measurements", &c("power.csv"), "--kind", "power", "--trim-ms", "15", "-o",
        &o("power_dataset.csv"),
    ])?;
    for kind in ["time", "power"] {
        let ds = o(&format!("{kind}_dataset.csv"));
        let model = o(&format!("{kind}.model"));
        run_cli(&["train", "--dataset", &ds, "-o", &model])?;
        run_cli(&["evaluate", "--dataset", &ds, "--iterations", "1", "--out-dir", &o(&format!("{kind}_cv"))])?;
        run_cli(&["loo", "--dataset", &ds, "--out-dir", &o(&format!("{kind}_loo"))])?;
        run_cli(&["predict", "--model", &model, "--features", &o("features.csv"), "-o", &o(&format!("{kind}_predictions.csv"))])?;
        run_cli(&["importance", "--model", &model, "-o", &o(&format!("{kind}_importance.csv"))])?;
    }
    Ok(())
}

pub fn collect_files(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(&path, base, out);
        } else {
            out.insert(path.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&path).unwrap());
        }
    }
}
