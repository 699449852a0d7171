use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::ast::{BinOp, Pos};
use super::builtins::Func;
use super::error::MeasureError;
use super::types::{CtxVar, Node};
use crate::analysis::{self, stats};
use crate::ensemble::RunView;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Value<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
    Series(&'a [f64]),
}

impl<'a> Value<'a> {
    // The checker guarantees the shapes, so a mismatch here is a bug.
    fn scalar(self) -> f64 {
        match self {
            Value::Scalar(v) => v,
            other => unreachable!("expected scalar, got {other:?}"),
        }
    }

    fn slice(self) -> &'a [f64] {
        match self {
            Value::Vector(v) | Value::Series(v) => v,
            Value::Scalar(_) => unreachable!("expected vector or series"),
        }
    }
}

pub(crate) struct StepContext<'v, 'a> {
    pub view: &'v RunView<'a>,
    pub index: usize,
    pub recurrence: &'v RecurrenceMemo,
}

pub(crate) struct AggregateContext<'a> {
    pub values: &'a [f64],
    pub times: &'a [f64],
}

pub(crate) enum Context<'v, 'a> {
    Step(StepContext<'v, 'a>),
    Aggregate(AggregateContext<'a>),
}

/// Recurrence series computed once per exclusion width for a window.
#[derive(Default)]
pub(crate) struct RecurrenceMemo {
    cache: RefCell<HashMap<usize, Rc<Vec<f64>>>>,
}

impl RecurrenceMemo {
    fn get(&self, view: &RunView<'_>, width: usize, pos: Pos) -> Result<Rc<Vec<f64>>, MeasureError> {
        if let Some(series) = self.cache.borrow().get(&width) {
            return Ok(series.clone());
        }
        let series = analysis::recurrence_series(view, width)
            .map_err(|e| MeasureError::runtime(pos, format!("recurrence({width}): {e}")))?;
        let series = Rc::new(series);
        self.cache.borrow_mut().insert(width, series.clone());
        Ok(series)
    }
}

pub(crate) fn eval<'a>(
    node: &Node,
    ctx: &Context<'_, 'a>,
    locals: &mut Vec<Value<'a>>,
) -> Result<Value<'a>, MeasureError> {
    match node {
        Node::Const(v) => Ok(Value::Scalar(*v)),
        Node::Ctx(var) => Ok(context_var(*var, ctx)),
        Node::Local(slot) => Ok(locals[*slot]),
        Node::Let { value, body } => {
            let v = eval(value, ctx, locals)?;
            locals.push(v);
            let result = eval(body, ctx, locals);
            locals.pop();
            result
        }
        Node::Neg(inner) => Ok(Value::Scalar(-eval(inner, ctx, locals)?.scalar())),
        Node::Bin { op, lhs, rhs, pos } => {
            let l = eval(lhs, ctx, locals)?.scalar();
            let r = eval(rhs, ctx, locals)?.scalar();
            let v = match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(MeasureError::runtime(*pos, "division by zero"));
                    }
                    l / r
                }
                BinOp::Pow => l.powf(r),
            };
            finite(v, *pos, op.symbol()).map(Value::Scalar)
        }
        Node::At(index, pos) => {
            let Context::Step(step) = ctx else {
                unreachable!("at() outside a per-step context")
            };
            let j = eval(index, ctx, locals)?.scalar();
            let j = as_index(j, step.view.len(), *pos, "at")?;
            Ok(Value::Vector(step.view.row(j)))
        }
        Node::Index { target, index, pos } => {
            let data = eval(target, ctx, locals)?.slice();
            let j = eval(index, ctx, locals)?.scalar();
            let j = as_index(j, data.len(), *pos, "index")?;
            Ok(Value::Scalar(data[j]))
        }
        Node::Call { func, args, pos } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, ctx, locals)?);
            }
            call(*func, &vals, ctx, *pos)
        }
    }
}

fn context_var<'a>(var: CtxVar, ctx: &Context<'_, 'a>) -> Value<'a> {
    match (var, ctx) {
        (CtxVar::X, Context::Step(s)) => Value::Vector(s.view.row(s.index)),
        (CtxVar::T, Context::Step(s)) => Value::Scalar(s.view.times()[s.index]),
        (CtxVar::I, Context::Step(s)) => Value::Scalar(s.index as f64),
        (CtxVar::N, Context::Step(s)) => Value::Scalar(s.view.len() as f64),
        (CtxVar::D, Context::Step(s)) => Value::Scalar(s.view.params().d),
        (CtxVar::Beta, Context::Step(s)) => Value::Scalar(s.view.params().beta),
        (CtxVar::S, Context::Aggregate(a)) => Value::Series(a.values),
        (CtxVar::TAxis, Context::Aggregate(a)) => Value::Series(a.times),
        (var, _) => unreachable!("{var:?} bound in the wrong context"),
    }
}

fn finite(v: f64, pos: Pos, what: &str) -> Result<f64, MeasureError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(MeasureError::runtime(
            pos,
            format!("`{what}` produced a non-finite value"),
        ))
    }
}

fn as_index(j: f64, len: usize, pos: Pos, what: &str) -> Result<usize, MeasureError> {
    if j.fract() != 0.0 || j < 0.0 || j >= len as f64 {
        return Err(MeasureError::runtime(
            pos,
            format!("{what} {j} out of range: expected an integer in [0, {len})"),
        ));
    }
    Ok(j as usize)
}

fn call<'a>(func: Func, args: &[Value<'a>], ctx: &Context<'_, 'a>, pos: Pos) -> Result<Value<'a>, MeasureError> {
    let scalar = |v: f64, name: &str| finite(v, pos, name).map(Value::Scalar);
    let same_len = |a: &[f64], b: &[f64], name: &str| {
        if a.len() == b.len() {
            Ok(())
        } else {
            Err(MeasureError::runtime(
                pos,
                format!("{name}: vector lengths differ ({} vs {})", a.len(), b.len()),
            ))
        }
    };
    match func {
        Func::Norm => scalar(analysis::norm(args[0].slice()), "norm"),
        Func::Dot => {
            let (a, b) = (args[0].slice(), args[1].slice());
            same_len(a, b, "dot")?;
            scalar(a.iter().zip(b).map(|(x, y)| x * y).sum(), "dot")
        }
        Func::Dist => {
            let (a, b) = (args[0].slice(), args[1].slice());
            same_len(a, b, "dist")?;
            scalar(analysis::euclidean(a, b), "dist")
        }
        Func::Particle => {
            let v = args[0].slice();
            let p = as_index(args[1].scalar(), v.len() / 3, pos, "particle")?;
            Ok(Value::Vector(&v[3 * p..3 * p + 3]))
        }
        Func::VMean => scalar(stats::mean(nonempty(args[0].slice(), pos)?), "vmean"),
        Func::VMin => scalar(stats::min(nonempty(args[0].slice(), pos)?), "vmin"),
        Func::VMax => scalar(stats::max(nonempty(args[0].slice(), pos)?), "vmax"),
        Func::VStd => scalar(stats::std(nonempty(args[0].slice(), pos)?), "vstd"),
        Func::Recurrence => {
            let Context::Step(step) = ctx else {
                unreachable!("recurrence() outside a per-step context")
            };
            let w = args[0].scalar();
            if w.fract() != 0.0 || w < 1.0 {
                return Err(MeasureError::runtime(
                    pos,
                    format!("recurrence width must be a positive integer, got {w}"),
                ));
            }
            let series = step.recurrence.get(step.view, w as usize, pos)?;
            scalar(series[step.index], "recurrence")
        }
        Func::Abs => scalar(args[0].scalar().abs(), "abs"),
        Func::Sqrt => {
            let x = args[0].scalar();
            if x < 0.0 {
                return Err(MeasureError::runtime(pos, format!("sqrt of negative value {x}")));
            }
            scalar(x.sqrt(), "sqrt")
        }
        Func::Sin => scalar(args[0].scalar().sin(), "sin"),
        Func::Cos => scalar(args[0].scalar().cos(), "cos"),
        Func::Exp => scalar(args[0].scalar().exp(), "exp"),
        Func::Log => {
            let x = args[0].scalar();
            if x <= 0.0 {
                return Err(MeasureError::runtime(pos, format!("log of non-positive value {x}")));
            }
            scalar(x.ln(), "log")
        }
        Func::Mean => scalar(stats::mean(nonempty(args[0].slice(), pos)?), "mean"),
        Func::TwMean => {
            let Context::Aggregate(agg) = ctx else {
                unreachable!("twmean() outside an aggregate context")
            };
            let s = nonempty(args[0].slice(), pos)?;
            same_len(s, agg.times, "twmean")?;
            scalar(stats::time_weighted_mean(s, agg.times), "twmean")
        }
        Func::Median => scalar(stats::median(nonempty(args[0].slice(), pos)?), "median"),
        Func::Std => scalar(stats::std(nonempty(args[0].slice(), pos)?), "std"),
        Func::Min => scalar(stats::min(nonempty(args[0].slice(), pos)?), "min"),
        Func::Max => scalar(stats::max(nonempty(args[0].slice(), pos)?), "max"),
        Func::Quantile => {
            let s = nonempty(args[0].slice(), pos)?;
            let q = args[1].scalar();
            if !(0.0..=1.0).contains(&q) {
                return Err(MeasureError::runtime(pos, format!("quantile {q} outside [0, 1]")));
            }
            scalar(stats::quantile(s, q), "quantile")
        }
        Func::First => scalar(nonempty(args[0].slice(), pos)?[0], "first"),
        Func::Last => {
            let s = nonempty(args[0].slice(), pos)?;
            scalar(s[s.len() - 1], "last")
        }
        Func::Len => Ok(Value::Scalar(args[0].slice().len() as f64)),
    }
}

fn nonempty(s: &[f64], pos: Pos) -> Result<&[f64], MeasureError> {
    if s.is_empty() {
        Err(MeasureError::runtime(pos, "empty input"))
    } else {
        Ok(s)
    }
}
