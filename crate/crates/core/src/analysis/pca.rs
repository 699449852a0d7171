use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::ensemble::RunView;

/// Per-run principal component analysis of the windowed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Temporal mean of every feature dimension.
    pub mean: Vec<f64>,
    /// Retained components (one row each), by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Components needed to reach the variance threshold, ignoring any cap.
    pub intrinsic_dim: usize,
    /// `T × min(intrinsic_dim, cap)` projection of the centered samples.
    pub projected: Vec<Vec<f64>>,
    /// Set when the trajectory has zero total variance.
    pub degenerate: bool,
}

impl PcaResult {
    pub fn projected_dims(&self) -> usize {
        self.projected.first().map_or(0, Vec::len)
    }
}

/// Centers the samples by their temporal mean and eigendecomposes the
/// `D × D` sample covariance.
///
/// Each component is oriented so that its entry of largest magnitude is
/// positive (lowest index on ties). `max_components` caps the projection
/// only; `intrinsic_dim` always reports the uncapped count.
pub fn pca(view: &RunView<'_>, var_threshold: f64, max_components: Option<usize>) -> Result<PcaResult, AnalysisError> {
    if !(var_threshold > 0.0 && var_threshold <= 1.0) {
        return Err(AnalysisError::BadThreshold(var_threshold));
    }
    if max_components == Some(0) {
        return Err(AnalysisError::ZeroComponents);
    }
    let n = view.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let dim = view.dim();

    let mut mean = vec![0.0; dim];
    for row in view.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| view.row(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    if total <= 0.0 {
        return Ok(PcaResult {
            mean,
            components: Vec::new(),
            explained_variance_ratio: Vec::new(),
            intrinsic_dim: 0,
            projected: vec![Vec::new(); n],
            degenerate: true,
        });
    }

    let ratios: Vec<f64> = eigenvalues.iter().map(|l| l / total).collect();
    let mut cumulative = 0.0;
    let mut intrinsic_dim = dim;
    for (idx, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= var_threshold {
            intrinsic_dim = idx + 1;
            break;
        }
    }

    let components: Vec<Vec<f64>> = order[..intrinsic_dim]
        .iter()
        .map(|&col| {
            let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            orient(&mut v);
            v
        })
        .collect();

    let kept = max_components.map_or(intrinsic_dim, |cap| cap.min(intrinsic_dim));
    let projected = (0..n)
        .map(|i| {
            let row = centered.row(i);
            components[..kept]
                .iter()
                .map(|c| row.iter().zip(c).map(|(x, w)| x * w).sum())
                .collect()
        })
        .collect();

    Ok(PcaResult {
        mean,
        components,
        explained_variance_ratio: ratios[..intrinsic_dim].to_vec(),
        intrinsic_dim,
        projected,
        degenerate: false,
    })
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn orient(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
