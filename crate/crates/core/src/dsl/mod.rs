//! Measure language: a small expression language for user-defined measures.
//!
//! A *per-step* measure maps each time step of a windowed run to a scalar and
//! sees `X` (feature vector), `t`, `i`, `N`, `d`, `beta` and `at(j)`. An
//! *aggregate* measure reduces the per-step series `S` (with time stamps
//! `T_axis`) to one scalar.
//!
//! ```
//! use orderscope_core::dsl::{CompiledMeasure, MeasureKind};
//!
//! let m = CompiledMeasure::compile("spread", MeasureKind::Aggregate, "max(S) - min(S)").unwrap();
//! assert_eq!(m.eval_aggregate(&[0.5, 2.5, 1.0], &[0.0, 1.0, 2.0]).unwrap(), 2.0);
//! ```
//!
//! Every intermediate value is a finite `f64`; division by zero, logarithms
//! of non-positive values and overflow are runtime errors.

mod ast;
mod builtins;
mod error;
mod eval;
mod lexer;
mod parser;
mod types;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ast::{BinOp, Expr, ExprKind, Pos};
pub use builtins::{list_builtins, Builtin, BuiltinKind};
pub use error::MeasureError;
pub use parser::parse;
pub use types::Type;

use crate::ensemble::RunView;
use eval::{AggregateContext, Context, RecurrenceMemo, StepContext, Value};
use types::Node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    PerStep,
    Aggregate,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::PerStep => "per_step",
            MeasureKind::Aggregate => "aggregate",
        })
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_step" | "per-step" | "perstep" => Ok(MeasureKind::PerStep),
            "aggregate" => Ok(MeasureKind::Aggregate),
            other => Err(format!("unknown measure kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureDefinition {
    /// Display label; never affects values.
    pub name: String,
    pub kind: MeasureKind,
    pub source: String,
}

/// A parsed and type-checked measure. Cheap to clone and safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct CompiledMeasure {
    definition: MeasureDefinition,
    tree: Arc<Expr>,
    node: Arc<Node>,
}

/// Per-step measure values with their time stamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Type-checks a parsed tree for `kind`.
pub fn typecheck(tree: Expr, definition: MeasureDefinition) -> Result<CompiledMeasure, MeasureError> {
    if definition.name.trim().is_empty() {
        return Err(MeasureError::Definition("measure name must not be empty".into()));
    }
    let node = types::check(&tree, definition.kind)?;
    Ok(CompiledMeasure {
        definition,
        tree: Arc::new(tree),
        node: Arc::new(node),
    })
}

impl CompiledMeasure {
    pub fn compile(
        name: impl Into<String>,
        kind: MeasureKind,
        source: impl Into<String>,
    ) -> Result<Self, MeasureError> {
        Self::from_definition(MeasureDefinition {
            name: name.into(),
            kind,
            source: source.into(),
        })
    }

    pub fn from_definition(definition: MeasureDefinition) -> Result<Self, MeasureError> {
        let tree = parse(&definition.source)?;
        typecheck(tree, definition)
    }

    pub fn definition(&self) -> &MeasureDefinition {
        &self.definition
    }

    pub fn name(&self) -> &str {
        &self.definition.name
    }

    pub fn kind(&self) -> MeasureKind {
        self.definition.kind
    }

    pub fn tree(&self) -> &Expr {
        &self.tree
    }

    /// Same measure under a different label.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let mut m = self.clone();
        m.definition.name = name.into();
        m
    }

    /// Evaluates a per-step measure at every sample of `view`.
    pub fn eval_per_step(&self, view: &RunView<'_>) -> Result<StepSeries, MeasureError> {
        if self.kind() != MeasureKind::PerStep {
            return Err(MeasureError::Definition(format!(
                "measure `{}` is an aggregate measure, expected per-step",
                self.name()
            )));
        }
        if view.is_empty() {
            return Err(MeasureError::Runtime {
                pos: None,
                step: None,
                message: "empty window".into(),
            });
        }
        let memo = RecurrenceMemo::default();
        let mut locals = Vec::new();
        let mut values = Vec::with_capacity(view.len());
        for index in 0..view.len() {
            let ctx = Context::Step(StepContext {
                view,
                index,
                recurrence: &memo,
            });
            let v = eval::eval(&self.node, &ctx, &mut locals).map_err(|e| e.at_step(index))?;
            values.push(scalar_result(v));
        }
        Ok(StepSeries {
            times: view.times().to_vec(),
            values,
        })
    }

    /// Reduces a per-step series to one scalar.
    pub fn eval_aggregate(&self, values: &[f64], times: &[f64]) -> Result<f64, MeasureError> {
        if self.kind() != MeasureKind::Aggregate {
            return Err(MeasureError::Definition(format!(
                "measure `{}` is a per-step measure, expected aggregate",
                self.name()
            )));
        }
        let runtime = |message: String| MeasureError::Runtime {
            pos: None,
            step: None,
            message,
        };
        if values.is_empty() {
            return Err(runtime("empty series".into()));
        }
        if values.len() != times.len() {
            return Err(runtime(format!(
                "series has {} values but {} time stamps",
                values.len(),
                times.len()
            )));
        }
        if values.iter().chain(times).any(|v| !v.is_finite()) {
            return Err(runtime("non-finite input value".into()));
        }
        let ctx = Context::Aggregate(AggregateContext { values, times });
        let mut locals = Vec::new();
        eval::eval(&self.node, &ctx, &mut locals).map(scalar_result)
    }
}

fn scalar_result(v: Value<'_>) -> f64 {
    match v {
        Value::Scalar(x) => x,
        _ => unreachable!("type checker admits only scalar measures"),
    }
}

/// Reads a measure file: one expression, optionally preceded by a
/// `# name: <label>` line. Falls back to `default_name` without one.
pub fn parse_measure_file(text: &str, kind: MeasureKind, default_name: &str) -> Result<CompiledMeasure, MeasureError> {
    let name = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|c| c.trim().strip_prefix("name:").map(|n| n.trim().to_string()))
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| default_name.to_string());
    // `#` lines are comments to the lexer, so positions stay file-relative.
    CompiledMeasure::compile(name, kind, text)
}
