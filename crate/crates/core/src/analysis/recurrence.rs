use super::{squared_distance, AnalysisError};
use crate::ensemble::RunView;
use crate::par::{map_range, Parallelism};

/// Default exclusion half-width in steps.
pub const DEFAULT_EXCLUSION: usize = 10;

/// Distance from each sample to its nearest neighbour at least `exclusion`
/// steps away, searching both temporal directions inside the view.
///
/// `out[i] = min_{|j - i| >= exclusion} ||x(i) - x(j)||`. Exactly periodic
/// trajectories give zero wherever a return lies inside the window.
pub fn recurrence_series(view: &RunView<'_>, exclusion: usize) -> Result<Vec<f64>, AnalysisError> {
    recurrence_series_with(view, exclusion, Parallelism::default())
}

pub fn recurrence_series_with(
    view: &RunView<'_>,
    exclusion: usize,
    mode: Parallelism,
) -> Result<Vec<f64>, AnalysisError> {
    if exclusion == 0 {
        return Err(AnalysisError::ZeroExclusion);
    }
    let n = view.len();
    let need = exclusion + 2;
    if n < need {
        return Err(AnalysisError::WindowTooShort {
            len: n,
            width: exclusion,
            need,
        });
    }
    let dim = view.dim();
    let data = view.features();
    Ok(map_range(mode, n, |i| {
        let xi = &data[i * dim..(i + 1) * dim];
        let mut best = f64::INFINITY;
        let candidates = (0..i.saturating_sub(exclusion - 1)).chain((i + exclusion).min(n)..n);
        for j in candidates {
            let xj = &data[j * dim..(j + 1) * dim];
            // Partial sums only grow, so abandoning once past `best` cannot
            // change the minimum.
            let mut acc = 0.0;
            let mut pruned = false;
            for (a, b) in xi.iter().zip(xj) {
                let diff = a - b;
                acc += diff * diff;
                if acc > best {
                    pruned = true;
                    break;
                }
            }
            if !pruned && acc < best {
                best = acc;
                if best == 0.0 {
                    break;
                }
            }
        }
        best.sqrt()
    }))
}

/// `out[i] = ||x(i) - x(0)||`.
pub fn distance_to_first(view: &RunView<'_>) -> Result<Vec<f64>, AnalysisError> {
    if view.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let first = view.row(0);
    Ok(view.rows().map(|r| squared_distance(r, first).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(values: &[f64], dim: usize, w: usize) -> Vec<f64> {
        let n = values.len() / dim;
        (0..n)
            .map(|i| {
                let mut best = f64::INFINITY;
                for j in 0..n {
                    if i.abs_diff(j) >= w {
                        best = best.min(super::super::euclidean(
                            &values[i * dim..(i + 1) * dim],
                            &values[j * dim..(j + 1) * dim],
                        ));
                    }
                }
                best
            })
            .collect()
    }

    fn view_1d<'a>(times: &'a [f64], values: &'a [f64]) -> RunView<'a> {
        RunView::from_raw("t", times, values, 1)
    }

    #[test]
    fn ramp_and_alternating() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ramp = [0.0, 1.0, 2.0, 3.0, 4.0];
        let expected = brute(&ramp, 1, 2);
        assert_eq!(expected, vec![2.0; 5]);
        assert_eq!(recurrence_series(&view_1d(&t, &ramp), 2).unwrap(), expected);

        let alt = [0.0, 1.0, 0.0, 1.0, 0.0];
        let expected = brute(&alt, 1, 2);
        assert_eq!(expected, vec![0.0; 5]);
        assert_eq!(recurrence_series(&view_1d(&t, &alt), 2).unwrap(), expected);
    }

    #[test]
    fn constant_trajectory_is_zero() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let x = vec![0.3; 20 * 3];
        let out = recurrence_series(&RunView::from_raw("c", &t, &x, 3), 5).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn too_short_window() {
        let t = [0.0, 1.0, 2.0];
        let x = [0.0, 1.0, 2.0];
        assert!(matches!(
            recurrence_series(&view_1d(&t, &x), 2),
            Err(AnalysisError::WindowTooShort { need: 4, .. })
        ));
        assert_eq!(
            recurrence_series(&view_1d(&t, &x), 0),
            Err(AnalysisError::ZeroExclusion)
        );
        assert_eq!(recurrence_series(&view_1d(&t, &x), 1).unwrap(), brute(&x, 1, 1));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let t: Vec<f64> = (0..300).map(f64::from).collect();
        let x: Vec<f64> = (0..300 * 4).map(|i| ((i * 7919) % 113) as f64 / 37.0).collect();
        let v = RunView::from_raw("p", &t, &x, 4);
        let a = recurrence_series_with(&v, 10, Parallelism::Sequential).unwrap();
        let b = recurrence_series_with(&v, 10, Parallelism::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, brute(&x, 4, 10));
    }

    #[test]
    fn distance_to_first_values() {
        let t = [0.0, 1.0, 2.0];
        let x = [0.0, 3.0, 4.0];
        assert_eq!(distance_to_first(&view_1d(&t, &x)).unwrap(), vec![0.0, 3.0, 4.0]);
    }
}
