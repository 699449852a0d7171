//! Parameter-space heatmap ("state diagram") over the `(d, beta)` plane.
//!
//! Parameter spaces are sampled irregularly, so each sample's segment is
//! extended halfway to its neighbours along both axes. Columns index unique
//! `d` values, rows index unique `beta` values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{histogram, AnalysisError, Histogram};
use crate::dsl::{CompiledMeasure, StepSeries};
use crate::ensemble::{Ensemble, ParameterPoint, Run, Window};
use crate::evaluate::{self, FailureKind, RunFailure};
use crate::par::Parallelism;

/// Half-width of the cell along an axis with a single unique value.
pub const SINGLE_VALUE_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateDiagramError {
    #[error("no samples")]
    NoSamples,
    #[error("non-finite parameter value")]
    NonFinite,
    #[error("cell ({row}, {col}) is empty")]
    EmptyCell { row: usize, col: usize },
    #[error("cell ({row}, {col}) outside a {rows} x {cols} grid")]
    OutOfGrid {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub d_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub d_boundaries: Vec<f64>,
    pub beta_boundaries: Vec<f64>,
}

fn unique_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    // `+ 0.0` folds -0.0 into 0.0 so the two never form separate columns
    let mut v: Vec<f64> = values.map(|x| x + 0.0).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Midpoints between neighbours; outer edges mirror the nearest gap.
fn axis_boundaries(u: &[f64], half_width: f64) -> Vec<f64> {
    let m = u.len();
    if m == 1 {
        return vec![u[0] - half_width, u[0] + half_width];
    }
    let mut b = Vec::with_capacity(m + 1);
    b.push(u[0] - (u[1] - u[0]) / 2.0);
    for w in u.windows(2) {
        b.push((w[0] + w[1]) / 2.0);
    }
    b.push(u[m - 1] + (u[m - 1] - u[m - 2]) / 2.0);
    b
}

impl GridLayout {
    pub fn build(samples: &[ParameterPoint]) -> Result<Self, StateDiagramError> {
        Self::build_with_half_width(samples, SINGLE_VALUE_HALF_WIDTH)
    }

    pub fn build_with_half_width(samples: &[ParameterPoint], half_width: f64) -> Result<Self, StateDiagramError> {
        if samples.is_empty() {
            return Err(StateDiagramError::NoSamples);
        }
        if samples.iter().any(|p| !p.is_finite()) {
            return Err(StateDiagramError::NonFinite);
        }
        let d_values = unique_sorted(samples.iter().map(|p| p.d));
        let beta_values = unique_sorted(samples.iter().map(|p| p.beta));
        Ok(Self {
            d_boundaries: axis_boundaries(&d_values, half_width),
            beta_boundaries: axis_boundaries(&beta_values, half_width),
            d_values,
            beta_values,
        })
    }

    pub fn rows(&self) -> usize {
        self.beta_values.len()
    }

    pub fn cols(&self) -> usize {
        self.d_values.len()
    }

    /// `(row, col)` of a sample's cell, or `None` for points that were not
    /// part of the layout.
    pub fn cell_of(&self, p: ParameterPoint) -> Option<(usize, usize)> {
        let (d, beta) = (p.d + 0.0, p.beta + 0.0);
        let col = self.d_values.binary_search_by(|v| v.total_cmp(&d)).ok()?;
        let row = self.beta_values.binary_search_by(|v| v.total_cmp(&beta)).ok()?;
        Some((row, col))
    }

    /// `((d_lo, d_hi), (beta_lo, beta_hi))` of a cell.
    pub fn cell_bounds(&self, row: usize, col: usize) -> ((f64, f64), (f64, f64)) {
        (
            (self.d_boundaries[col], self.d_boundaries[col + 1]),
            (self.beta_boundaries[row], self.beta_boundaries[row + 1]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Runs averaged into this cell, sorted by id.
    pub run_ids: Vec<String>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub run_id: String,
    pub d: f64,
    pub beta: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionOrigin {
    CellPick,
    RegionRect,
    SinglePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub run_ids: BTreeSet<String>,
    pub origin: SelectionOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapModel {
    pub layout: GridLayout,
    /// Non-empty cells in row-major order.
    pub cells: Vec<Cell>,
    /// Sorted by run id.
    pub samples: Vec<Sample>,
    pub value_range: Option<(f64, f64)>,
    pub measure_name: String,
    pub step_measure_name: String,
    pub window: Window,
    /// Runs that could not be evaluated (empty window or measure error).
    pub failures: Vec<RunFailure>,
    run_values: BTreeMap<String, f64>,
    step_values: BTreeMap<String, StepSeries>,
}

/// A cell with its per-step value distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetail {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub run_ids: Vec<String>,
    pub histogram: Histogram,
}

/// Evaluates `step` then `agg` on every run and lays the results out on the
/// parameter grid. Runs sharing a cell are averaged. Failing runs are
/// reported in `failures` rather than aborting the build.
pub fn build_heatmap(
    ensemble: &Ensemble,
    step: &CompiledMeasure,
    agg: &CompiledMeasure,
    window: &Window,
) -> Result<HeatmapModel, StateDiagramError> {
    build_heatmap_with(ensemble, step, agg, window, Parallelism::default())
}

pub fn build_heatmap_with(
    ensemble: &Ensemble,
    step: &CompiledMeasure,
    agg: &CompiledMeasure,
    window: &Window,
    mode: Parallelism,
) -> Result<HeatmapModel, StateDiagramError> {
    let mut runs: Vec<&Run> = ensemble.runs().iter().collect();
    runs.sort_by(|a, b| a.id().cmp(b.id()));
    let points: Vec<ParameterPoint> = runs.iter().map(|r| r.params()).collect();
    let layout = GridLayout::build(&points)?;

    let results = evaluate::evaluate_aggregate(&runs, step, agg, window, mode);
    let mut run_values = BTreeMap::new();
    let mut step_values = BTreeMap::new();
    let mut failures = Vec::new();
    let mut grouped: BTreeMap<(usize, usize), Vec<(&str, f64)>> = BTreeMap::new();
    for (run, result) in runs.iter().zip(results) {
        match result {
            Ok((value, series)) => {
                let cell = layout.cell_of(run.params()).expect("layout built from these runs");
                grouped.entry(cell).or_default().push((run.id(), value));
                run_values.insert(run.id().to_string(), value);
                step_values.insert(run.id().to_string(), series);
            }
            Err(f) => failures.push(f),
        }
    }

    // runs are visited in id order, so each group is already sorted
    let cells: Vec<Cell> = grouped
        .into_iter()
        .map(|((row, col), members)| Cell {
            row,
            col,
            value: members.iter().map(|m| m.1).sum::<f64>() / members.len() as f64,
            sample_count: members.len(),
            run_ids: members.iter().map(|m| m.0.to_string()).collect(),
        })
        .collect();

    let value_range = cells.iter().map(|c| c.value).fold(None, |acc: Option<(f64, f64)>, v| {
        Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
    });

    let samples = runs
        .iter()
        .map(|r| Sample {
            run_id: r.id().to_string(),
            d: r.params().d,
            beta: r.params().beta,
            selected: false,
        })
        .collect();

    Ok(HeatmapModel {
        layout,
        cells,
        samples,
        value_range,
        measure_name: agg.name().to_string(),
        step_measure_name: step.name().to_string(),
        window: *window,
        failures,
        run_values,
        step_values,
    })
}

impl HeatmapModel {
    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    /// Aggregated value of one run, if it evaluated.
    pub fn run_value(&self, run: &str) -> Option<f64> {
        self.run_values.get(run).copied()
    }

    pub fn step_series(&self, run: &str) -> Option<&StepSeries> {
        self.step_values.get(run)
    }

    /// Runs whose window selected too few samples.
    pub fn missing_runs(&self) -> impl Iterator<Item = &str> {
        self.failures
            .iter()
            .filter(|f| f.kind == FailureKind::EmptyWindow)
            .map(|f| f.run.as_str())
    }

    /// Selects every run inside the closed rectangle and updates the sample
    /// flags.
    pub fn select_region(&mut self, d_range: (f64, f64), beta_range: (f64, f64)) -> Selection {
        let (d_lo, d_hi) = ordered(d_range);
        let (b_lo, b_hi) = ordered(beta_range);
        let ids = self
            .samples
            .iter()
            .filter(|s| d_lo <= s.d && s.d <= d_hi && b_lo <= s.beta && s.beta <= b_hi)
            .map(|s| s.run_id.clone())
            .collect();
        self.apply_selection(ids, SelectionOrigin::RegionRect)
    }

    /// Selects all runs of one grid cell (including runs that failed).
    pub fn select_cell(&mut self, row: usize, col: usize) -> Selection {
        let layout = &self.layout;
        let ids = self
            .samples
            .iter()
            .filter(|s| layout.cell_of(ParameterPoint::new(s.d, s.beta)) == Some((row, col)))
            .map(|s| s.run_id.clone())
            .collect();
        self.apply_selection(ids, SelectionOrigin::CellPick)
    }

    /// Selects explicit run ids; unknown ids are dropped.
    pub fn select_runs<I, S>(&mut self, ids: I, origin: SelectionOrigin) -> Selection
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let wanted: BTreeSet<String> = ids.into_iter().map(|s| s.as_ref().to_string()).collect();
        let ids = self
            .samples
            .iter()
            .filter(|s| wanted.contains(&s.run_id))
            .map(|s| s.run_id.clone())
            .collect();
        self.apply_selection(ids, origin)
    }

    pub fn apply_selection(&mut self, run_ids: BTreeSet<String>, origin: SelectionOrigin) -> Selection {
        for s in &mut self.samples {
            s.selected = run_ids.contains(&s.run_id);
        }
        Selection { run_ids, origin }
    }

    /// Cell value plus a histogram of the per-step values of all its runs.
    pub fn cell_detail(&self, row: usize, col: usize, bins: usize) -> Result<CellDetail, StateDiagramError> {
        let (rows, cols) = (self.layout.rows(), self.layout.cols());
        if row >= rows || col >= cols {
            return Err(StateDiagramError::OutOfGrid { row, col, rows, cols });
        }
        let cell = self.cell(row, col).ok_or(StateDiagramError::EmptyCell { row, col })?;
        let values: Vec<f64> = cell
            .run_ids
            .iter()
            .filter_map(|id| self.step_values.get(id))
            .flat_map(|s| s.values.iter().copied())
            .collect();
        Ok(CellDetail {
            row,
            col,
            value: cell.value,
            run_ids: cell.run_ids.clone(),
            histogram: histogram(&values, bins)?,
        })
    }

    pub fn export(&self) -> HeatmapExport {
        HeatmapExport {
            measure: self.measure_name.clone(),
            step_measure: self.step_measure_name.clone(),
            d_boundaries: self.layout.d_boundaries.clone(),
            beta_boundaries: self.layout.beta_boundaries.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| ExportCell {
                    row: c.row,
                    col: c.col,
                    value: c.value,
                    count: c.sample_count,
                    runs: c.run_ids.clone(),
                })
                .collect(),
            samples: self
                .samples
                .iter()
                .map(|s| ExportSample {
                    run: s.run_id.clone(),
                    d: s.d,
                    beta: s.beta,
                    selected: s.selected,
                })
                .collect(),
            value_range: self.value_range.map(|(a, b)| [a, b]),
            failures: self.failures.clone(),
        }
    }

    /// One row per non-empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,d_lo,d_hi,beta_lo,beta_hi,value,count,runs\n");
        for c in &self.cells {
            let ((d_lo, d_hi), (b_lo, b_hi)) = self.layout.cell_bounds(c.row, c.col);
            writeln!(
                out,
                "{},{},{d_lo:?},{d_hi:?},{b_lo:?},{b_hi:?},{:?},{},{}",
                c.row,
                c.col,
                c.value,
                c.sample_count,
                c.run_ids.join(";")
            )
            .unwrap();
        }
        out
    }
}

fn ordered((a, b): (f64, f64)) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// JSON export of a heatmap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapExport {
    pub measure: String,
    pub step_measure: String,
    pub d_boundaries: Vec<f64>,
    pub beta_boundaries: Vec<f64>,
    pub cells: Vec<ExportCell>,
    pub samples: Vec<ExportSample>,
    pub value_range: Option<[f64; 2]>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub count: usize,
    pub runs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSample {
    pub run: String,
    pub d: f64,
    pub beta: f64,
    pub selected: bool,
}
