use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use orderscope_core::analysis::{DEFAULT_BINS, DEFAULT_EXCLUSION};
use orderscope_core::dsl::{CompiledMeasure, MeasureDefinition};
use orderscope_core::state_diagram::Selection;
use orderscope_core::{Ensemble, Window};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorBy {
    D,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub histogram_bins: usize,
    pub recurrence_width: usize,
    pub pca_threshold: f64,
    pub pca_max: Option<usize>,
    pub time_weighted: bool,
    pub color_by: ColorBy,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            histogram_bins: DEFAULT_BINS,
            recurrence_width: DEFAULT_EXCLUSION,
            pca_threshold: 0.999,
            pca_max: Some(8),
            time_weighted: false,
            color_by: ColorBy::D,
        }
    }
}

/// Immutable snapshot of a session. Mutations build a new snapshot.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub ensemble_id: String,
    pub ensemble: Arc<Ensemble>,
    pub measures: BTreeMap<String, CompiledMeasure>,
    pub window: Window,
    pub selection: Option<Selection>,
    pub settings: Settings,
}

/// Serializable session state: measures, window, selection and settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub measures: Vec<MeasureDefinition>,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub selection: Option<Selection>,
    #[serde(default)]
    pub settings: Settings,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Session {
    pub fn export(&self) -> SessionExport {
        SessionExport {
            measures: self.measures.values().map(|m| m.definition().clone()).collect(),
            from: finite_or_none(self.window.t_start),
            to: finite_or_none(self.window.t_end),
            selection: self.selection.clone(),
            settings: self.settings.clone(),
        }
    }

    pub fn measure(&self, name: &str) -> Result<&CompiledMeasure, ApiError> {
        self.measures
            .get(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown measure {name:?}")))
    }

    /// Window from optional query bounds, falling back to the session window.
    pub fn window_for(&self, from: Option<f64>, to: Option<f64>) -> Result<Window, ApiError> {
        Window::new(from.unwrap_or(self.window.t_start), to.unwrap_or(self.window.t_end))
            .map_err(|e| ApiError::bad_request(e.to_string()))
    }
}

/// A session slot. Readers clone the current snapshot; writers hold the lock
/// for the whole read-modify-write, so mutations are serialized.
pub struct SessionSlot {
    current: Mutex<Arc<Session>>,
}

impl SessionSlot {
    pub fn new(session: Session) -> Self {
        Self {
            current: Mutex::new(Arc::new(session)),
        }
    }

    pub fn snapshot(&self) -> Arc<Session> {
        self.current.lock().expect("session lock poisoned").clone()
    }

    pub fn update<T>(&self, f: impl FnOnce(&mut Session) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let mut guard = self.current.lock().expect("session lock poisoned");
        let mut next = (**guard).clone();
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}

pub struct AppState {
    data_root: PathBuf,
    counter: AtomicU64,
    ensembles: RwLock<HashMap<String, Arc<Ensemble>>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self {
            data_root: data_root.into(),
            counter: AtomicU64::new(0),
            ensembles: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }

    fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.counter.fetch_add(1, Ordering::Relaxed) + 1)
    }

    pub fn add_ensemble(&self, ensemble: Ensemble) -> (String, Arc<Ensemble>) {
        let id = self.next_id("e");
        let ensemble = Arc::new(ensemble);
        self.ensembles.write().unwrap().insert(id.clone(), ensemble.clone());
        (id, ensemble)
    }

    pub fn ensemble(&self, id: &str) -> Result<Arc<Ensemble>, ApiError> {
        self.ensembles
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown ensemble {id:?}")))
    }

    pub fn add_session(&self, ensemble_id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let ensemble = self.ensemble(ensemble_id)?;
        let id = self.next_id("s");
        let slot = Arc::new(SessionSlot::new(Session {
            id: id.clone(),
            ensemble_id: ensemble_id.to_string(),
            ensemble,
            measures: BTreeMap::new(),
            window: Window::all(),
            selection: None,
            settings: Settings::default(),
        }));
        self.sessions.write().unwrap().insert(id, slot.clone());
        Ok(slot)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    /// Resolves a client-supplied path against the data root and refuses
    /// anything that escapes it.
    pub fn resolve_path(&self, requested: &str) -> Result<PathBuf, ApiError> {
        let root = self
            .data_root
            .canonicalize()
            .map_err(|e| ApiError::internal(format!("data root unavailable: {e}")))?;
        let candidate = root.join(requested);
        let resolved = candidate
            .canonicalize()
            .map_err(|_| ApiError::not_found(format!("no such path {requested:?}")))?;
        if !resolved.starts_with(&root) {
            return Err(ApiError::new(
                axum::http::StatusCode::FORBIDDEN,
                "forbidden",
                format!("{requested:?} is outside the data root"),
            ));
        }
        Ok(resolved)
    }
}
