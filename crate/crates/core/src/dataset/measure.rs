use super::{DatasetError, PowerSampleSeries, TargetKind};

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation over mean; zero for a zero mean.
fn coefficient_of_variation(values: &[f64]) -> f64 {
    let m = mean(values);
    if m == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt() / m.abs()
}

/// Collapses repeated timings of one launch to `(median, cv)`.
///
/// Even-length groups take the lower of the two middle values, so the
/// median is always an observed measurement.
pub fn group_identical_launches(values: &[f64]) -> Result<(f64, f64), DatasetError> {
    if values.is_empty() {
        return Err(DatasetError::EmptyGroup);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted[(sorted.len() - 1) / 2], coefficient_of_variation(values)))
}

/// Averages each run's power readings, then returns the mean and the
/// coefficient of variation across runs.
///
/// Readings earlier than `trim_ms` after a run's first timestamp are
/// dropped before averaging.
pub fn aggregate_power(series: &[PowerSampleSeries], trim_ms: f64) -> Result<(f64, f64), DatasetError> {
    if series.is_empty() {
        return Err(DatasetError::EmptySeries);
    }
    let run_means = series
        .iter()
        .map(|s| {
            s.validate()?;
            let start = s.samples.first().ok_or(DatasetError::EmptySeries)?.0;
            let kept: Vec<f64> = s.samples.iter().filter(|(t, _)| *t >= start + trim_ms).map(|&(_, w)| w).collect();
            if kept.is_empty() {
                return Err(DatasetError::EmptySeries);
            }
            Ok(mean(&kept))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok((mean(&run_means), coefficient_of_variation(&run_means)))
}

/// Natural log of microseconds for time, identity for power.
pub fn transform_target(raw: f64, kind: TargetKind) -> Result<f64, DatasetError> {
    if !(raw > 0.0) || !raw.is_finite() {
        return Err(DatasetError::NonPositiveTarget(raw));
    }
    Ok(kind.transform(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::LaunchKey;

    fn series(run: u32, watts: &[f64]) -> PowerSampleSeries {
        PowerSampleSeries {
            launch_key: LaunchKey::new("b", "d", "k", 0),
            run_index: run,
            samples: watts.iter().enumerate().map(|(i, &w)| (i as f64 * 15.0, w)).collect(),
        }
    }

    #[test]
    fn grouping_examples() {
        assert_eq!(group_identical_launches(&[6.0]).unwrap(), (6.0, 0.0));
        let (m, cv) = group_identical_launches(&[5.0, 7.0, 6.0]).unwrap();
        assert_eq!(m, 6.0);
        assert!((cv - (2.0f64 / 3.0).sqrt() / 6.0).abs() < 1e-15);
        assert!((cv - 0.1361).abs() < 1e-4);
        assert_eq!(group_identical_launches(&[5.0, 6.0, 7.0, 100.0]).unwrap().0, 6.0);
        assert_eq!(group_identical_launches(&[]), Err(DatasetError::EmptyGroup));
    }

    #[test]
    fn power_examples() {
        assert_eq!(aggregate_power(&[series(0, &[100.0; 70])], 0.0).unwrap(), (100.0, 0.0));
        let (m, cv) = aggregate_power(&[series(0, &[80.0, 100.0]), series(1, &[110.0, 110.0])], 0.0).unwrap();
        assert_eq!(m, 100.0);
        assert!((cv - 0.1).abs() < 1e-15);
        assert_eq!(aggregate_power(&[], 0.0), Err(DatasetError::EmptySeries));
        assert_eq!(aggregate_power(&[series(0, &[])], 0.0), Err(DatasetError::EmptySeries));
    }

    // Ten runs with run means 95, 96, ..., 104 (each run: mean +/- 2 W).
    // Spreadsheet: mean = 99.5, population variance = 8.25,
    // cv = sqrt(8.25) / 99.5 = 0.028867...
    #[test]
    fn ten_run_fixture() {
        let runs: Vec<_> = (0..10).map(|r| {
            let m = 95.0 + r as f64;
            series(r, &[m - 2.0, m + 2.0, m - 1.0, m + 1.0])
        }).collect();
        let (m, cv) = aggregate_power(&runs, 0.0).unwrap();
        assert!((m - 99.5).abs() < 1e-12);
        assert!((cv - 8.25f64.sqrt() / 99.5).abs() < 1e-12);
        assert!((cv - 0.028867).abs() < 1e-6);
    }

    #[test]
    fn trimming_drops_warmup() {
        // readings at 0, 15, 30 ms
        let s = series(0, &[10.0, 100.0, 100.0]);
        assert_eq!(aggregate_power(std::slice::from_ref(&s), 10.0).unwrap().0, 100.0);
        assert_eq!(aggregate_power(&[s], 1000.0), Err(DatasetError::EmptySeries));
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform_target(1.0, TargetKind::Time).unwrap(), 0.0);
        assert!((transform_target(1000.0, TargetKind::Time).unwrap() - 6.907755).abs() < 1e-6);
        assert_eq!(transform_target(42.0, TargetKind::Power).unwrap(), 42.0);
        assert_eq!(transform_target(0.0, TargetKind::Time), Err(DatasetError::NonPositiveTarget(0.0)));
        assert!(transform_target(f64::NAN, TargetKind::Power).is_err());
    }
}
