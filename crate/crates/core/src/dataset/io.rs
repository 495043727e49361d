use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{Dataset, PowerSampleSeries, Sample, TargetKind, TimeMeasurement};
use crate::features::{key_fields, key_from_record, FeatureVector, LaunchKey, FEATURE_NAMES, KEY_COLUMNS};
use crate::tabular::{write_table, FormatError, Header, Table};

pub const TIME_FORMAT: &str = "gpucost-time";
pub const POWER_FORMAT: &str = "gpucost-power";
pub const DATASET_FORMAT: &str = "gpucost-dataset";
const DATASET_VERSION: u32 = 1;

/// `sha256:<hex>` of a file's bytes.
pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn columns(extra: &[&'static str]) -> Vec<&'static str> {
    KEY_COLUMNS.iter().chain(extra).copied().collect()
}

pub fn read_time_file(text: &str) -> Result<Vec<TimeMeasurement>, FormatError> {
    let table = Table::read(text, TIME_FORMAT, 1, &columns(&["run_index", "duration_us"]))?;
    table
        .records()
        .map(|rec| {
            let duration_us: f64 = rec.parse("duration_us")?;
            if !(duration_us > 0.0 && duration_us.is_finite()) {
                return Err(rec.bad("duration_us"));
            }
            Ok(TimeMeasurement { launch_key: key_from_record(&rec)?, run_index: rec.parse("run_index")?, duration_us })
        })
        .collect()
}

pub fn write_time_file(ms: &[TimeMeasurement]) -> String {
    let header = Header::new(TIME_FORMAT, 1, &columns(&["run_index", "duration_us"]));
    write_table(
        &header,
        ms.iter().map(|m| {
            let mut row: Vec<String> = key_fields(&m.launch_key).into();
            row.push(m.run_index.to_string());
            row.push(m.duration_us.to_string());
            row
        }),
    )
}

/// Reads power readings, one row per reading, and groups them into one
/// series per (launch, run) in order of first appearance.
pub fn read_power_file(text: &str) -> Result<Vec<PowerSampleSeries>, FormatError> {
    let table = Table::read(text, POWER_FORMAT, 1, &columns(&["run_index", "timestamp_ms", "watts"]))?;
    let mut order: Vec<(LaunchKey, u32)> = Vec::new();
    let mut series: BTreeMap<(LaunchKey, u32), Vec<(f64, f64)>> = BTreeMap::new();
    for rec in table.records() {
        let key = key_from_record(&rec)?;
        let run: u32 = rec.parse("run_index")?;
        let t: f64 = rec.parse("timestamp_ms")?;
        let w: f64 = rec.parse("watts")?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(rec.bad("watts"));
        }
        let entry = series.entry((key.clone(), run)).or_insert_with(|| {
            order.push((key, run));
            Vec::new()
        });
        if entry.last().is_some_and(|&(prev, _)| t <= prev) || !t.is_finite() {
            return Err(rec.bad("timestamp_ms"));
        }
        entry.push((t, w));
    }
    Ok(order
        .into_iter()
        .map(|(launch_key, run_index)| {
            let samples = series.remove(&(launch_key.clone(), run_index)).unwrap_or_default();
            PowerSampleSeries { launch_key, run_index, samples }
        })
        .collect())
}

pub fn write_power_file(series: &[PowerSampleSeries]) -> String {
    let header = Header::new(POWER_FORMAT, 1, &columns(&["run_index", "timestamp_ms", "watts"]));
    write_table(
        &header,
        series.iter().flat_map(|s| {
            s.samples.iter().map(move |(t, w)| {
                let mut row: Vec<String> = key_fields(&s.launch_key).into();
                row.extend([s.run_index.to_string(), t.to_string(), w.to_string()]);
                row
            })
        }),
    )
}

fn dataset_columns() -> Vec<&'static str> {
    let mut cols = columns(&FEATURE_NAMES);
    cols.extend(["raw_target", "target", "cv"]);
    cols
}

pub fn write_dataset_file(ds: &Dataset) -> String {
    let header = Header::new(DATASET_FORMAT, DATASET_VERSION, &dataset_columns())
        .with_meta("kind", ds.target_kind.as_str())
        .with_meta("provenance", ds.provenance.join("|"));
    write_table(
        &header,
        ds.samples.iter().map(|s| {
            let mut row: Vec<String> = key_fields(&s.launch_key).into();
            row.extend(s.features.to_fields());
            row.extend([s.raw_target.to_string(), s.target.to_string(), s.cv.to_string()]);
            row
        }),
    )
}

pub fn read_dataset_file(text: &str) -> Result<Dataset, crate::Error> {
    let table = Table::read(text, DATASET_FORMAT, DATASET_VERSION, &dataset_columns())?;
    let kind: TargetKind = table.header.require_meta("kind")?.parse()?;
    let provenance = match table.header.meta("provenance") {
        Some("") | None => Vec::new(),
        Some(p) => p.split('|').map(str::to_string).collect(),
    };
    let samples = table
        .records()
        .map(|rec| {
            let s = Sample {
                launch_key: key_from_record(&rec)?,
                features: FeatureVector::from_record(&rec)?,
                raw_target: rec.parse("raw_target")?,
                target: rec.parse("target")?,
                cv: rec.parse("cv")?,
            };
            if !(s.raw_target > 0.0) || !s.target.is_finite() {
                return Err(rec.bad("raw_target"));
            }
            if !(s.cv >= 0.0) {
                return Err(rec.bad("cv"));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(Dataset::new(samples, kind, provenance)?)
}
