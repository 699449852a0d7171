use serde::Serialize;
use thiserror::Error;

use super::ast::Pos;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureError {
    #[error("syntax error at {pos}: {message}")]
    Syntax {
        pos: Pos,
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        expected: Option<String>,
    },
    #[error("type error at {pos}: {message}")]
    Type { pos: Pos, message: String },
    #[error("{}", runtime_message(.pos, .step, .message))]
    Runtime {
        pos: Option<Pos>,
        /// Window index of the failing time step (per-step measures).
        step: Option<usize>,
        message: String,
    },
    #[error("invalid measure definition: {0}")]
    Definition(String),
}

fn runtime_message(pos: &Option<Pos>, step: &Option<usize>, message: &str) -> String {
    let mut s = String::from("runtime error");
    if let Some(step) = step {
        s.push_str(&format!(" at step {step}"));
    }
    if let Some(pos) = pos {
        s.push_str(&format!(" ({pos})"));
    }
    s.push_str(": ");
    s.push_str(message);
    s
}

impl MeasureError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>, expected: Option<String>) -> Self {
        MeasureError::Syntax {
            pos,
            message: message.into(),
            expected,
        }
    }

    pub(crate) fn type_error(pos: Pos, message: impl Into<String>) -> Self {
        MeasureError::Type {
            pos,
            message: message.into(),
        }
    }

    pub(crate) fn runtime(pos: Pos, message: impl Into<String>) -> Self {
        MeasureError::Runtime {
            pos: Some(pos),
            step: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_step(mut self, i: usize) -> Self {
        if let MeasureError::Runtime { step, .. } = &mut self {
            *step = Some(i);
        }
        self
    }

    /// Source position, for syntax and type errors and most runtime errors.
    pub fn position(&self) -> Option<Pos> {
        match self {
            MeasureError::Syntax { pos, .. } | MeasureError::Type { pos, .. } => Some(*pos),
            MeasureError::Runtime { pos, .. } => *pos,
            MeasureError::Definition(_) => None,
        }
    }

    /// Message without the position prefix.
    pub fn message(&self) -> &str {
        match self {
            MeasureError::Syntax { message, .. }
            | MeasureError::Type { message, .. }
            | MeasureError::Runtime { message, .. }
            | MeasureError::Definition(message) => message,
        }
    }

    /// True for errors raised before evaluation (parse, type, definition).
    pub fn is_compile_error(&self) -> bool {
        !matches!(self, MeasureError::Runtime { .. })
    }
}
