//! Numerical kernels behind the measure builtins and the detail views.

mod histogram;
mod pca;
mod recurrence;
pub mod stats;

pub use histogram::{histogram, Histogram, DEFAULT_BINS};
pub use pca::{pca, PcaResult};
pub use recurrence::{distance_to_first, recurrence_series, recurrence_series_with, DEFAULT_EXCLUSION};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window of {len} samples is too short for exclusion width {width} (need at least {need})")]
    WindowTooShort { len: usize, width: usize, need: usize },
    #[error("exclusion width must be at least 1")]
    ZeroExclusion,
    #[error("empty input")]
    Empty,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("variance threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("maximum component count must be positive")]
    ZeroComponents,
    #[error("bin count must be positive")]
    ZeroBins,
    #[error("length mismatch: {values} values, {times} times")]
    LengthMismatch { values: usize, times: usize },
    #[error("non-finite input value")]
    NonFinite,
}

/// Euclidean distance, summing squared differences in index order.
///
/// Every distance in the crate goes through this function (or
/// [`squared_distance`]) so that independent routes to the same quantity
/// agree bit for bit.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in a {
        acc += x * x;
    }
    acc.sqrt()
}
