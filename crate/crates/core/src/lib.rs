//! Analysis engine for ensembles of multivariate time series produced by
//! two-parameter simulation sweeps.
//!
//! The crate is organised around the define → evaluate → select → refine
//! loop:
//!
//! * [`ensemble`] loads and validates runs (orientation feature vectors over
//!   time, stamped with a `(d, beta)` parameter point) and gives windowed
//!   access to them.
//! * [`dsl`] parses, type-checks and evaluates user-defined per-step and
//!   aggregate measures.
//! * [`analysis`] holds the numerical kernels: recurrence distance,
//!   distance-to-first, PCA, histograms and means.
//! * [`state_diagram`] turns per-run aggregates into an irregular-grid
//!   heatmap over parameter space.
//! * [`synth`] generates ensembles with known dynamics.
//! * [`evaluate`] is the batch layer shared by the CLI and the HTTP service.
//!
//! Data-parallel loops go through [`par`]; disabling the default `parallel`
//! feature makes every one of them sequential without changing results.

pub mod analysis;
pub mod dsl;
pub mod ensemble;
pub mod evaluate;
pub mod par;
pub mod state_diagram;
pub mod synth;

pub use ensemble::{load_ensemble, Axis, Ensemble, EnsembleError, ParameterPoint, Run, RunView, Window};
