use std::time::Instant;

use super::metrics::quantile_sorted;
use super::EvalError;
use crate::extra_trees::Forest;
use crate::scalar::Scalar;

pub const MIN_REPETITIONS: usize = 30;
/// Calls made and discarded before timing starts.
pub const WARMUP_CALLS: usize = 5;

/// Wall-clock statistics of single-sample predictions, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub std_ms: f64,
    pub count: usize,
}

impl LatencyStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        let mut sorted = ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len().max(1) as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        LatencyStats {
            mean_ms: mean,
            median_ms: quantile_sorted(&sorted, 0.5),
            p95_ms: quantile_sorted(&sorted, 0.95),
            std_ms: var.sqrt(),
            count: sorted.len(),
        }
    }
}

/// Times `repetitions` single-sample `predict_raw` calls, cycling through
/// `probes`, after [`WARMUP_CALLS`] untimed calls.
pub fn measure_latency<T: Scalar>(forest: &Forest<T>, probes: &[Vec<T>], repetitions: usize) -> Result<LatencyStats, EvalError> {
    if repetitions < MIN_REPETITIONS {
        return Err(EvalError::TooFewRepetitions { found: repetitions, min: MIN_REPETITIONS });
    }
    if probes.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut probe = probes.iter().cycle();
    for _ in 0..WARMUP_CALLS {
        std::hint::black_box(forest.predict_raw(probe.next().unwrap())?);
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let x = probe.next().unwrap();
        let start = Instant::now();
        std::hint::black_box(forest.predict_raw(std::hint::black_box(x))?);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(LatencyStats::from_samples(&samples))
}
