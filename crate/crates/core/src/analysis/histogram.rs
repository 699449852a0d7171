use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Default bin count for tooltip histograms.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Equal-width histogram over `[min, max]`; the maximum falls in the last
/// bin. A constant input gives one bin over `[v - 0.5, v + 0.5]`.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::ZeroBins);
    }
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Histogram {
            bin_edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![values.len() as u64],
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * width).collect();
    bin_edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut b = (((v - lo) / width) as usize).min(bins - 1);
        // keep the bin consistent with the published edges despite rounding
        if b + 1 < bins && v >= bin_edges[b + 1] {
            b += 1;
        } else if b > 0 && v < bin_edges[b] {
            b -= 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}
