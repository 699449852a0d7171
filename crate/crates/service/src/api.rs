use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use orderscope_core::analysis::{histogram, pca, Histogram, PcaResult};
use orderscope_core::dsl::{list_builtins, Builtin, CompiledMeasure, MeasureDefinition, MeasureKind};
use orderscope_core::ensemble::{load_ensemble, load_from_manifest, Manifest};
use orderscope_core::evaluate::{self, decimate_minmax, RunFailure};
use orderscope_core::par::Parallelism;
use orderscope_core::state_diagram::{
    build_heatmap, CellDetail, HeatmapExport, HeatmapModel, Selection, SelectionOrigin,
};
use orderscope_core::{Axis, Ensemble, Run, Window};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, Session, SessionExport, Settings};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

/// `Query` with JSON error bodies.
pub struct ApiQuery<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| ApiQuery(q.0))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// `Json` body with JSON error bodies.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|j| ApiJson(j.0))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/builtins", get(builtins))
        .route("/ensembles", post(create_ensemble))
        .route("/ensembles/{e}", get(get_ensemble))
        .route("/ensembles/{e}/runs/{r}/series", get(run_series))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{s}", get(get_session))
        .route("/sessions/{s}/measures", post(post_measure))
        .route("/sessions/{s}/window", put(put_window))
        .route("/sessions/{s}/settings", put(put_settings))
        .route("/sessions/{s}/evaluate", post(evaluate_measure))
        .route("/sessions/{s}/heatmap", get(heatmap))
        .route("/sessions/{s}/heatmap/cells/{row}/{col}", get(heatmap_cell))
        .route("/sessions/{s}/runs/{r}/pca", get(run_pca))
        .route("/sessions/{s}/runs/{r}/histogram", get(run_histogram))
        .route("/sessions/{s}/selection", put(put_selection))
        .route("/sessions/{s}/export", get(export_session))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn find_run<'a>(ensemble: &'a Ensemble, id: &str) -> Result<&'a Run, ApiError> {
    ensemble
        .run(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown run {id:?}")))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok" })
}

async fn builtins() -> Json<&'static [Builtin]> {
    Json(list_builtins())
}

// ---- ensembles ----

#[derive(Deserialize)]
#[serde(untagged)]
enum EnsembleSource {
    Path {
        path: String,
    },
    Inline {
        manifest: Manifest,
        #[serde(default)]
        base: Option<String>,
    },
}

#[derive(Serialize)]
struct RunSummary {
    id: String,
    d: f64,
    beta: f64,
    steps: usize,
    t_min: f64,
    t_max: f64,
}

#[derive(Serialize)]
struct EnsembleSummary {
    ensemble_id: String,
    name: String,
    k: usize,
    #[serde(rename = "D")]
    dim: usize,
    runs: Vec<RunSummary>,
}

fn summarize(ensemble_id: &str, e: &Ensemble) -> EnsembleSummary {
    EnsembleSummary {
        ensemble_id: ensemble_id.to_string(),
        name: e.id().to_string(),
        k: e.k(),
        dim: e.dim(),
        runs: e
            .runs()
            .iter()
            .map(|r| RunSummary {
                id: r.id().to_string(),
                d: r.params().d,
                beta: r.params().beta,
                steps: r.len(),
                t_min: r.times()[0],
                t_max: r.times()[r.len() - 1],
            })
            .collect(),
    }
}

async fn create_ensemble(State(app): Shared, ApiJson(source): ApiJson<EnsembleSource>) -> ApiResult<EnsembleSummary> {
    let loader = app.clone();
    let ensemble = blocking(move || match source {
        EnsembleSource::Path { path } => {
            let resolved = loader.resolve_path(&path)?;
            Ok(load_ensemble(resolved)?)
        }
        EnsembleSource::Inline { manifest, base } => {
            let base = loader.resolve_path(base.as_deref().unwrap_or("."))?;
            Ok(load_from_manifest(&manifest, &base, "inline".to_string())?)
        }
    })
    .await?;
    let (id, ensemble) = app.add_ensemble(ensemble);
    Ok(Json(summarize(&id, &ensemble)))
}

async fn get_ensemble(State(app): Shared, Path(e): Path<String>) -> ApiResult<EnsembleSummary> {
    let ensemble = app.ensemble(&e)?;
    Ok(Json(summarize(&e, &ensemble)))
}

#[derive(Deserialize)]
struct SeriesQuery {
    particle: Option<usize>,
    axis: Option<String>,
    from: Option<f64>,
    to: Option<f64>,
}

#[derive(Serialize)]
struct Series {
    times: Vec<f64>,
    values: Vec<f64>,
}

async fn run_series(
    State(app): Shared,
    Path((e, r)): Path<(String, String)>,
    ApiQuery(q): ApiQuery<SeriesQuery>,
) -> ApiResult<Series> {
    let ensemble = app.ensemble(&e)?;
    let run = find_run(&ensemble, &r)?;
    let particle = q.particle.ok_or_else(|| ApiError::bad_request("missing `particle`"))?;
    let axis: Axis = q
        .axis
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("missing `axis`"))?
        .parse()
        .map_err(ApiError::bad_request)?;
    let window = Window::from_bounds(q.from, q.to).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let view = run.slice(&window)?;
    let (times, values) = view.component_series(particle, axis)?;
    Ok(Json(Series { times, values }))
}

// ---- sessions ----

#[derive(Deserialize)]
struct NewSession {
    ensemble_id: String,
}

#[derive(Serialize)]
struct WindowBody {
    from: Option<f64>,
    to: Option<f64>,
}

#[derive(Serialize)]
struct SessionBody {
    session_id: String,
    ensemble_id: String,
    measures: Vec<MeasureDefinition>,
    window: WindowBody,
    selection: Option<Selection>,
    settings: Settings,
}

fn session_body(s: &Session) -> SessionBody {
    let exported = s.export();
    SessionBody {
        session_id: s.id.clone(),
        ensemble_id: s.ensemble_id.clone(),
        measures: exported.measures,
        window: WindowBody {
            from: exported.from,
            to: exported.to,
        },
        selection: exported.selection,
        settings: exported.settings,
    }
}

async fn create_session(State(app): Shared, ApiJson(body): ApiJson<NewSession>) -> ApiResult<SessionBody> {
    let slot = app.add_session(&body.ensemble_id)?;
    Ok(Json(session_body(&slot.snapshot())))
}

async fn get_session(State(app): Shared, Path(s): Path<String>) -> ApiResult<SessionBody> {
    Ok(Json(session_body(&app.session(&s)?.snapshot())))
}

#[derive(Serialize)]
struct MeasureCreated {
    measure_id: String,
    name: String,
    kind: MeasureKind,
}

async fn post_measure(
    State(app): Shared,
    Path(s): Path<String>,
    ApiJson(def): ApiJson<MeasureDefinition>,
) -> ApiResult<MeasureCreated> {
    let slot = app.session(&s)?;
    let compiled = CompiledMeasure::from_definition(def)?;
    let created = MeasureCreated {
        measure_id: compiled.name().to_string(),
        name: compiled.name().to_string(),
        kind: compiled.kind(),
    };
    slot.update(|session| {
        session.measures.insert(compiled.name().to_string(), compiled);
        Ok(())
    })?;
    Ok(Json(created))
}

#[derive(Deserialize)]
struct WindowUpdate {
    from: Option<f64>,
    to: Option<f64>,
}

async fn put_window(
    State(app): Shared,
    Path(s): Path<String>,
    ApiJson(w): ApiJson<WindowUpdate>,
) -> ApiResult<SessionBody> {
    let slot = app.session(&s)?;
    let window = Window::from_bounds(w.from, w.to).map_err(|e| ApiError::bad_request(e.to_string()))?;
    slot.update(|session| {
        session.window = window;
        Ok(())
    })?;
    Ok(Json(session_body(&slot.snapshot())))
}

fn check_settings(s: &Settings) -> Result<(), ApiError> {
    if s.histogram_bins == 0 {
        return Err(ApiError::bad_request("histogram_bins must be positive"));
    }
    if s.recurrence_width == 0 {
        return Err(ApiError::bad_request("recurrence_width must be positive"));
    }
    if !(s.pca_threshold > 0.0 && s.pca_threshold <= 1.0) {
        return Err(ApiError::bad_request("pca_threshold must lie in (0, 1]"));
    }
    if s.pca_max == Some(0) {
        return Err(ApiError::bad_request("pca_max must be positive"));
    }
    Ok(())
}

async fn put_settings(
    State(app): Shared,
    Path(s): Path<String>,
    ApiJson(settings): ApiJson<Settings>,
) -> ApiResult<SessionBody> {
    check_settings(&settings)?;
    let slot = app.session(&s)?;
    slot.update(|session| {
        session.settings = settings;
        Ok(())
    })?;
    Ok(Json(session_body(&slot.snapshot())))
}

async fn export_session(State(app): Shared, Path(s): Path<String>) -> ApiResult<SessionExport> {
    Ok(Json(app.session(&s)?.snapshot().export()))
}

#[derive(Deserialize)]
struct ImportBody {
    ensemble_id: String,
    state: SessionExport,
}

async fn import_session(State(app): Shared, ApiJson(body): ApiJson<ImportBody>) -> ApiResult<SessionBody> {
    let state = body.state;
    check_settings(&state.settings)?;
    let window = Window::from_bounds(state.from, state.to).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let measures = state
        .measures
        .into_iter()
        .map(CompiledMeasure::from_definition)
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = app.ensemble(&body.ensemble_id)?;
    if let Some(sel) = &state.selection {
        if let Some(unknown) = sel.run_ids.iter().find(|id| ensemble.run(id).is_none()) {
            return Err(ApiError::bad_request(format!(
                "selection names unknown run {unknown:?}"
            )));
        }
    }
    let slot = app.add_session(&body.ensemble_id)?;
    slot.update(|session| {
        session.measures = measures.into_iter().map(|m| (m.name().to_string(), m)).collect();
        session.window = window;
        session.selection = state.selection;
        session.settings = state.settings;
        Ok(())
    })?;
    Ok(Json(session_body(&slot.snapshot())))
}

// ---- evaluation ----

#[derive(Deserialize)]
struct EvaluateRequest {
    measure: String,
    #[serde(default)]
    step_measure: Option<String>,
    #[serde(default)]
    runs: Option<Vec<String>>,
    #[serde(default)]
    from: Option<f64>,
    #[serde(default)]
    to: Option<f64>,
    #[serde(default)]
    max_points: Option<usize>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum RunResult {
    Series {
        run: String,
        times: Vec<f64>,
        values: Vec<f64>,
    },
    Scalar {
        run: String,
        value: f64,
    },
    Failed {
        run: String,
        error: RunFailure,
    },
}

#[derive(Serialize)]
struct EvaluateResponse {
    measure: String,
    kind: MeasureKind,
    results: Vec<RunResult>,
}

/// Runs named in the request, or every run sorted by id.
fn pick_runs<'a>(ensemble: &'a Ensemble, ids: Option<&[String]>) -> Result<Vec<&'a Run>, ApiError> {
    match ids {
        Some(ids) => ids.iter().map(|id| find_run(ensemble, id)).collect(),
        None => {
            let mut runs: Vec<&Run> = ensemble.runs().iter().collect();
            runs.sort_by(|a, b| a.id().cmp(b.id()));
            Ok(runs)
        }
    }
}

async fn evaluate_measure(
    State(app): Shared,
    Path(s): Path<String>,
    ApiJson(req): ApiJson<EvaluateRequest>,
) -> ApiResult<EvaluateResponse> {
    let session = app.session(&s)?.snapshot();
    if req.max_points == Some(0) {
        return Err(ApiError::bad_request("max_points must be positive"));
    }
    blocking(move || {
        let measure = session.measure(&req.measure)?;
        let window = session.window_for(req.from, req.to)?;
        let runs = pick_runs(&session.ensemble, req.runs.as_deref())?;
        let results = match measure.kind() {
            MeasureKind::PerStep => evaluate::evaluate_per_step(&runs, measure, &window, Parallelism::default())
                .into_iter()
                .zip(&runs)
                .map(|(r, run)| match r {
                    Ok(series) => {
                        let (times, values) = match req.max_points {
                            Some(m) => decimate_minmax(&series.times, &series.values, m),
                            None => (series.times, series.values),
                        };
                        RunResult::Series {
                            run: run.id().to_string(),
                            times,
                            values,
                        }
                    }
                    Err(error) => RunResult::Failed {
                        run: run.id().to_string(),
                        error,
                    },
                })
                .collect(),
            MeasureKind::Aggregate => {
                let step_name = req
                    .step_measure
                    .as_deref()
                    .ok_or_else(|| ApiError::bad_request("aggregate evaluation needs `step_measure`"))?;
                let step = per_step_measure(&session, step_name)?;
                evaluate::evaluate_aggregate(&runs, step, measure, &window, Parallelism::default())
                    .into_iter()
                    .zip(&runs)
                    .map(|(r, run)| match r {
                        Ok((value, _)) => RunResult::Scalar {
                            run: run.id().to_string(),
                            value,
                        },
                        Err(error) => RunResult::Failed {
                            run: run.id().to_string(),
                            error,
                        },
                    })
                    .collect()
            }
        };
        Ok(EvaluateResponse {
            measure: measure.name().to_string(),
            kind: measure.kind(),
            results,
        })
    })
    .await
    .map(Json)
}

fn per_step_measure<'a>(session: &'a Session, name: &str) -> Result<&'a CompiledMeasure, ApiError> {
    let m = session.measure(name)?;
    if m.kind() != MeasureKind::PerStep {
        return Err(ApiError::bad_request(format!("measure {name:?} is not per-step")));
    }
    Ok(m)
}

fn aggregate_measure<'a>(session: &'a Session, name: &str) -> Result<&'a CompiledMeasure, ApiError> {
    let m = session.measure(name)?;
    if m.kind() != MeasureKind::Aggregate {
        return Err(ApiError::bad_request(format!("measure {name:?} is not an aggregate")));
    }
    Ok(m)
}

#[derive(Deserialize)]
struct HeatmapQuery {
    step_measure: Option<String>,
    agg_measure: Option<String>,
    from: Option<f64>,
    to: Option<f64>,
    bins: Option<usize>,
}

fn session_heatmap(session: &Session, q: &HeatmapQuery) -> Result<HeatmapModel, ApiError> {
    let step_name = q
        .step_measure
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("missing `step_measure`"))?;
    let agg_name = q
        .agg_measure
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("missing `agg_measure`"))?;
    let step = per_step_measure(session, step_name)?;
    let agg = aggregate_measure(session, agg_name)?;
    let window = session.window_for(q.from, q.to)?;
    let mut model = build_heatmap(&session.ensemble, step, agg, &window)?;
    if let Some(sel) = &session.selection {
        model.apply_selection(sel.run_ids.clone(), sel.origin);
    }
    Ok(model)
}

async fn heatmap(
    State(app): Shared,
    Path(s): Path<String>,
    ApiQuery(q): ApiQuery<HeatmapQuery>,
) -> ApiResult<HeatmapExport> {
    let session = app.session(&s)?.snapshot();
    blocking(move || Ok(session_heatmap(&session, &q)?.export()))
        .await
        .map(Json)
}

async fn heatmap_cell(
    State(app): Shared,
    Path((s, row, col)): Path<(String, usize, usize)>,
    ApiQuery(q): ApiQuery<HeatmapQuery>,
) -> ApiResult<CellDetail> {
    let session = app.session(&s)?.snapshot();
    blocking(move || {
        let bins = q.bins.unwrap_or(session.settings.histogram_bins);
        Ok(session_heatmap(&session, &q)?.cell_detail(row, col, bins)?)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct PcaQuery {
    threshold: Option<f64>,
    max: Option<usize>,
    from: Option<f64>,
    to: Option<f64>,
}

async fn run_pca(
    State(app): Shared,
    Path((s, r)): Path<(String, String)>,
    ApiQuery(q): ApiQuery<PcaQuery>,
) -> ApiResult<PcaResult> {
    let session = app.session(&s)?.snapshot();
    find_run(&session.ensemble, &r)?;
    let threshold = q.threshold.unwrap_or(session.settings.pca_threshold);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ApiError::bad_request(format!("threshold {threshold} outside (0, 1]")));
    }
    let cap = q.max.or(session.settings.pca_max);
    if cap == Some(0) {
        return Err(ApiError::bad_request("max must be positive"));
    }
    blocking(move || {
        let run = find_run(&session.ensemble, &r)?;
        let window = session.window_for(q.from, q.to)?;
        let view = run.slice(&window)?;
        Ok(pca(&view, threshold, cap)?)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct HistogramQuery {
    measure: Option<String>,
    bins: Option<usize>,
    from: Option<f64>,
    to: Option<f64>,
}

async fn run_histogram(
    State(app): Shared,
    Path((s, r)): Path<(String, String)>,
    ApiQuery(q): ApiQuery<HistogramQuery>,
) -> ApiResult<Histogram> {
    let session = app.session(&s)?.snapshot();
    let bins = q.bins.unwrap_or(session.settings.histogram_bins);
    if bins == 0 {
        return Err(ApiError::bad_request("bins must be positive"));
    }
    blocking(move || {
        let run = find_run(&session.ensemble, &r)?;
        let name = q
            .measure
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("missing `measure`"))?;
        let measure = per_step_measure(&session, name)?;
        let window = session.window_for(q.from, q.to)?;
        let series = evaluate::step_series(run, measure, &window).map_err(|f| {
            let mut err = ApiError::new(
                axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                "measure_runtime",
                f.message,
            );
            err.body.run = Some(f.run);
            err.body.row = f.step;
            err
        })?;
        Ok(histogram(&series.values, bins)?)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SelectionRequest {
    Region {
        d_range: (f64, f64),
        beta_range: (f64, f64),
    },
    Runs {
        run_ids: Vec<String>,
        #[serde(default)]
        origin: Option<SelectionOrigin>,
    },
}

async fn put_selection(
    State(app): Shared,
    Path(s): Path<String>,
    ApiJson(req): ApiJson<SelectionRequest>,
) -> ApiResult<Selection> {
    let slot = app.session(&s)?;
    let selection = slot.update(|session| {
        let ensemble = &session.ensemble;
        let selection = match req {
            SelectionRequest::Region { d_range, beta_range } => {
                let finite = [d_range.0, d_range.1, beta_range.0, beta_range.1]
                    .iter()
                    .all(|v| v.is_finite());
                if !finite {
                    return Err(ApiError::bad_request("selection ranges must be finite"));
                }
                let (d_lo, d_hi) = (d_range.0.min(d_range.1), d_range.0.max(d_range.1));
                let (b_lo, b_hi) = (beta_range.0.min(beta_range.1), beta_range.0.max(beta_range.1));
                let run_ids: BTreeSet<String> = ensemble
                    .runs()
                    .iter()
                    .filter(|r| {
                        let p = r.params();
                        d_lo <= p.d && p.d <= d_hi && b_lo <= p.beta && p.beta <= b_hi
                    })
                    .map(|r| r.id().to_string())
                    .collect();
                Selection {
                    run_ids,
                    origin: SelectionOrigin::RegionRect,
                }
            }
            SelectionRequest::Runs { run_ids, origin } => {
                for id in &run_ids {
                    find_run(ensemble, id)?;
                }
                let origin = origin.unwrap_or(if run_ids.len() == 1 {
                    SelectionOrigin::SinglePoint
                } else {
                    SelectionOrigin::CellPick
                });
                Selection {
                    run_ids: run_ids.into_iter().collect(),
                    origin,
                }
            }
        };
        session.selection = Some(selection.clone());
        Ok(selection)
    })?;
    Ok(Json(selection))
}
