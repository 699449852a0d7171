//! Scalar reductions over series.
//!
//! These assume finite, non-empty input; callers check that first.

use super::AnalysisError;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Trapezoidal time-weighted mean. A single sample is its own mean.
pub fn time_weighted_mean(values: &[f64], times: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), times.len());
    if values.len() == 1 {
        return values[0];
    }
    let mut area = 0.0;
    for i in 1..values.len() {
        area += 0.5 * (values[i - 1] + values[i]) * (times[i] - times[i - 1]);
    }
    area / (times[times.len() - 1] - times[0])
}

/// Population standard deviation (divides by `n`).
pub fn std(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

pub fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Quantile with linear interpolation between closest ranks
/// (`h = (n - 1) q`). `q` must lie in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean, or the trapezoidal time-weighted mean when `time_weighted`.
pub fn aggregate_mean(values: &[f64], times: &[f64], time_weighted: bool) -> Result<f64, AnalysisError> {
    if values.len() != times.len() {
        return Err(AnalysisError::LengthMismatch {
            values: values.len(),
            times: times.len(),
        });
    }
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(if time_weighted {
        time_weighted_mean(values, times)
    } else {
        mean(values)
    })
}
