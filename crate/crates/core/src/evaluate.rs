//! Batch evaluation of measures across runs, shared by the CLI and the
//! service so both produce identical numbers.

use serde::{Deserialize, Serialize};

use crate::dsl::{CompiledMeasure, MeasureError, StepSeries};
use crate::ensemble::{EnsembleError, Run, Window};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The window selects fewer than two samples of the run.
    EmptyWindow,
    /// The measure failed at runtime.
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: String,
    pub kind: FailureKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl RunFailure {
    fn window(run: &Run, e: EnsembleError) -> Self {
        Self {
            run: run.id().to_string(),
            kind: FailureKind::EmptyWindow,
            message: e.to_string(),
            step: None,
        }
    }

    fn measure(run: &Run, e: MeasureError) -> Self {
        let step = match &e {
            MeasureError::Runtime { step, .. } => *step,
            _ => None,
        };
        Self {
            run: run.id().to_string(),
            kind: FailureKind::Measure,
            message: e.to_string(),
            step,
        }
    }
}

/// Evaluates a per-step measure over the window of one run.
pub fn step_series(run: &Run, measure: &CompiledMeasure, window: &Window) -> Result<StepSeries, RunFailure> {
    let view = run.slice(window).map_err(|e| RunFailure::window(run, e))?;
    measure.eval_per_step(&view).map_err(|e| RunFailure::measure(run, e))
}

/// Per-step evaluation followed by aggregation for one run. Returns the step
/// series too, since heatmap tooltips need it.
pub fn aggregate_run(
    run: &Run,
    step: &CompiledMeasure,
    agg: &CompiledMeasure,
    window: &Window,
) -> Result<(f64, StepSeries), RunFailure> {
    let series = step_series(run, step, window)?;
    let value = agg
        .eval_aggregate(&series.values, &series.times)
        .map_err(|e| RunFailure::measure(run, e))?;
    Ok((value, series))
}

/// Per-step series for each run, in input order.
pub fn evaluate_per_step(
    runs: &[&Run],
    measure: &CompiledMeasure,
    window: &Window,
    mode: Parallelism,
) -> Vec<Result<StepSeries, RunFailure>> {
    par::map_slice(mode, runs, |run| step_series(run, measure, window))
}

/// Aggregated scalar for each run, in input order.
pub fn evaluate_aggregate(
    runs: &[&Run],
    step: &CompiledMeasure,
    agg: &CompiledMeasure,
    window: &Window,
    mode: Parallelism,
) -> Vec<Result<(f64, StepSeries), RunFailure>> {
    par::map_slice(mode, runs, |run| aggregate_run(run, step, agg, window))
}

/// Reduces a series to at most `max_points` samples by keeping the minimum
/// and maximum of each bucket, in time order. The global extremes always
/// survive. Series already short enough are returned unchanged.
pub fn decimate_minmax(times: &[f64], values: &[f64], max_points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    if n <= max_points || max_points < 2 {
        if max_points >= n || n == 0 {
            return (times.to_vec(), values.to_vec());
        }
        // a single point can only carry one extreme; keep the maximum
        let i = argmax(values, 0..n);
        return (vec![times[i]], vec![values[i]]);
    }
    let buckets = max_points / 2;
    let mut out_t = Vec::with_capacity(max_points);
    let mut out_v = Vec::with_capacity(max_points);
    for b in 0..buckets {
        let lo = b * n / buckets;
        let hi = (b + 1) * n / buckets;
        if lo == hi {
            continue;
        }
        let mn = argmin(values, lo..hi);
        let mx = argmax(values, lo..hi);
        let (first, second) = if mn <= mx { (mn, mx) } else { (mx, mn) };
        out_t.push(times[first]);
        out_v.push(values[first]);
        if second != first {
            out_t.push(times[second]);
            out_v.push(values[second]);
        }
    }
    (out_t, out_v)
}

fn argmin(v: &[f64], range: std::ops::Range<usize>) -> usize {
    range.reduce(|a, b| if v[b] < v[a] { b } else { a }).unwrap()
}

fn argmax(v: &[f64], range: std::ops::Range<usize>) -> usize {
    range.reduce(|a, b| if v[b] > v[a] { b } else { a }).unwrap()
}
