//! Regenerates the bundled synthetic corpus in `corpus/`.
//!
//! Launch traces are derived from the control flow of `corpus/kernels.ptx`;
//! times and power readings come from a simple analytic device model with
//! seeded multiplicative noise.
//!
//! ```text
//! cargo run --example make_corpus
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use gpucost::dataset::{write_power_file, write_time_file, PowerSampleSeries, TimeMeasurement};
use gpucost::features::{
    extract_features, write_trace_file, BlockFrequencyTrace, Dim3, FeatureVector, LaunchConfig, LaunchKey, LaunchTrace,
};
use gpucost::seed::{derive_seed, DEFAULT_SEED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PTX: &str = include_str!("../corpus/kernels.ptx");

const DATASETS: [(&str, u64); 4] = [("n4k", 1 << 12), ("n64k", 1 << 16), ("n1m", 1 << 20), ("n16m", 1 << 24)];
const BLOCK_SIZES: [u32; 5] = [64, 128, 256, 512, 1024];
const REPEATS: u64 = 2;
const TIME_RUNS: u32 = 5;
const POWER_RUNS: u32 = 3;
const POWER_READINGS: usize = 12;
const POWER_PERIOD_MS: f64 = 10.0;

fn freqs(kernel: &str, n: u64, tpc: u64) -> BTreeMap<usize, u64> {
    let elems = if kernel == "normalize4" { n / 4 } else { n };
    let ctas = elems.div_ceil(tpc);
    let threads = ctas * tpc;
    let f: Vec<u64> = match kernel {
        "saxpy" | "normalize4" => vec![threads, elems, threads],
        "block_reduce" => {
            let steps = u64::from(tpc.trailing_zeros());
            vec![threads, threads * steps, ctas * (tpc - 1), threads * steps, threads, ctas, threads]
        }
        _ => unreachable!(),
    };
    f.into_iter().enumerate().collect()
}

fn launches() -> Vec<LaunchTrace> {
    let groups = [("linalg", "saxpy"), ("linalg", "normalize4"), ("reduction", "block_reduce")];
    let mut out = Vec::new();
    for (benchmark, kernel) in groups {
        for (dataset, n) in DATASETS {
            let mut seq = 0;
            for _ in 0..REPEATS {
                for tpc in BLOCK_SIZES {
                    let elems = if kernel == "normalize4" { n / 4 } else { n };
                    let ctas = elems.div_ceil(u64::from(tpc)) as u32;
                    let launch_key = LaunchKey::new(benchmark, dataset, kernel, seq);
                    let shared = if kernel == "block_reduce" { 1024 } else { 0 };
                    out.push(LaunchTrace {
                        trace: BlockFrequencyTrace { launch_key, freqs: freqs(kernel, n, u64::from(tpc)) },
                        config: LaunchConfig {
                            grid_dim: Dim3::new(ctas, 1, 1),
                            block_dim: Dim3::new(tpc, 1, 1),
                            shared_mem_bytes: shared,
                            launch_seq: seq,
                        },
                    });
                    seq += 1;
                }
            }
        }
    }
    out
}

/// Noise-free kernel time in microseconds.
fn device_time_us(f: &FeatureVector) -> f64 {
    let occupancy_penalty = match f.threads_per_cta {
        64 => 1.35,
        1024 => 1.12,
        _ => 1.0,
    };
    let memory = (f.global_mem_vol as f64 + 0.1 * f.shared_mem_vol as f64) / 80_000.0;
    let compute = (f.arithm_ops as f64 + 4.0 * f.special_ops as f64 + f.logic_ops as f64) / 600_000.0;
    let sync = f.sync_ops as f64 / 40_000.0;
    4.0 + occupancy_penalty * (memory.max(compute) + sync)
}

/// Noise-free board power in watts.
fn device_power_w(f: &FeatureVector) -> f64 {
    let threads = (f.threads_per_cta * f.ctas) as f64;
    let utilization = (threads / 163_840.0).min(1.0);
    let intensity = f.arithm_intensity.min(4.0) / 4.0;
    38.0 + 150.0 * utilization * (0.6 + 0.4 * intensity)
}

/// `(file name, contents)` of every corpus file except the PTX source.
pub fn generate() -> Vec<(&'static str, String)> {
    let module = gpucost::ptx::parse_ptx("kernels.ptx", PTX).expect("corpus PTX parses");
    let launches = launches();
    let features = extract_features(&module.kernels, &launches).expect("corpus traces match the PTX");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(DEFAULT_SEED, &[0xC0]));

    let mut times = Vec::new();
    let mut power = Vec::new();
    for rec in &features {
        let t = device_time_us(&rec.features);
        for run_index in 0..TIME_RUNS {
            let noise = 1.0 + rng.gen_range(-0.03..0.03);
            times.push(TimeMeasurement { launch_key: rec.key.clone(), run_index, duration_us: round(t * noise, 3) });
        }
        let w = device_power_w(&rec.features);
        for run_index in 0..POWER_RUNS {
            let start = rng.gen_range(0.0..5.0);
            let samples = (0..POWER_READINGS)
                .map(|i| {
                    // The first two readings still show the idle-to-load ramp.
                    let ramp = if i < 2 { 0.7 + 0.15 * i as f64 } else { 1.0 };
                    let noise = 1.0 + rng.gen_range(-0.02..0.02);
                    (round(start + i as f64 * POWER_PERIOD_MS, 3), round(w * ramp * noise, 2))
                })
                .collect();
            power.push(PowerSampleSeries { launch_key: rec.key.clone(), run_index, samples });
        }
    }
    vec![
        ("trace.csv", write_trace_file(&launches)),
        ("time.csv", write_time_file(&times)),
        ("power.csv", write_power_file(&power)),
    ]
}

fn round(v: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (v * scale).round() / scale
}

#[allow(dead_code)]
fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    for (name, contents) in generate() {
        std::fs::write(dir.join(name), contents)?;
        println!("wrote corpus/{name}");
    }
    Ok(())
}
