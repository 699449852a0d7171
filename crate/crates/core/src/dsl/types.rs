use std::fmt;

use super::ast::{BinOp, Expr, ExprKind, Pos};
use super::builtins::{self, BuiltinKind, Func};
use super::error::MeasureError;
use super::MeasureKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Scalar,
    Vector,
    Series,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Scalar => "scalar",
            Type::Vector => "vector",
            Type::Series => "series",
        })
    }
}

/// Names bound by the evaluation context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CtxVar {
    X,
    T,
    I,
    N,
    D,
    Beta,
    S,
    TAxis,
}

impl CtxVar {
    fn resolve(kind: MeasureKind, name: &str) -> Option<(CtxVar, Type)> {
        match (kind, name) {
            (MeasureKind::PerStep, "X") => Some((CtxVar::X, Type::Vector)),
            (MeasureKind::PerStep, "t") => Some((CtxVar::T, Type::Scalar)),
            (MeasureKind::PerStep, "i") => Some((CtxVar::I, Type::Scalar)),
            (MeasureKind::PerStep, "N") => Some((CtxVar::N, Type::Scalar)),
            (MeasureKind::PerStep, "d") => Some((CtxVar::D, Type::Scalar)),
            (MeasureKind::PerStep, "beta") => Some((CtxVar::Beta, Type::Scalar)),
            (MeasureKind::Aggregate, "S") => Some((CtxVar::S, Type::Series)),
            (MeasureKind::Aggregate, "T_axis") => Some((CtxVar::TAxis, Type::Series)),
            _ => None,
        }
    }
}

/// Type-checked evaluation tree. Names are resolved: let-bound variables are
/// stack slots, context variables are tagged.
#[derive(Debug, Clone)]
pub(crate) enum Node {
    Const(f64),
    Ctx(CtxVar),
    Local(usize),
    Let {
        value: Box<Node>,
        body: Box<Node>,
    },
    Neg(Box<Node>),
    Bin {
        op: BinOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
        pos: Pos,
    },
    Call {
        func: Func,
        args: Vec<Node>,
        pos: Pos,
    },
    At(Box<Node>, Pos),
    Index {
        target: Box<Node>,
        index: Box<Node>,
        pos: Pos,
    },
}

/// Checks `expr` for the given measure kind and lowers it to an evaluation
/// tree. The top-level result must be a scalar.
pub(crate) fn check(expr: &Expr, kind: MeasureKind) -> Result<Node, MeasureError> {
    let mut checker = Checker {
        kind,
        scope: Vec::new(),
    };
    let (node, ty) = checker.expr(expr)?;
    if ty != Type::Scalar {
        return Err(MeasureError::type_error(
            expr.pos,
            format!("scalar required at top level, found {ty}"),
        ));
    }
    Ok(node)
}

struct Checker {
    kind: MeasureKind,
    scope: Vec<(String, Type)>,
}

impl Checker {
    fn lookup(&self, name: &str) -> Option<(Node, Type)> {
        if let Some(slot) = self.scope.iter().rposition(|(n, _)| n == name) {
            return Some((Node::Local(slot), self.scope[slot].1));
        }
        CtxVar::resolve(self.kind, name).map(|(v, ty)| (Node::Ctx(v), ty))
    }

    fn unbound(&self, name: &str, pos: Pos) -> MeasureError {
        let kind = match self.kind {
            MeasureKind::PerStep => "per-step",
            MeasureKind::Aggregate => "aggregate",
        };
        MeasureError::type_error(pos, format!("unbound identifier `{name}` in {kind} context"))
    }

    fn expr(&mut self, e: &Expr) -> Result<(Node, Type), MeasureError> {
        match &e.kind {
            ExprKind::Number(n) => Ok((Node::Const(*n), Type::Scalar)),
            ExprKind::Ident(name) => self.lookup(name).ok_or_else(|| self.unbound(name, e.pos)),
            ExprKind::Neg(inner) => {
                let (node, ty) = self.expr(inner)?;
                expect_type(Type::Scalar, ty, inner.pos, "operand of unary `-`")?;
                Ok((Node::Neg(Box::new(node)), Type::Scalar))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (l, lt) = self.expr(lhs)?;
                let what = format!("left operand of `{}`", op.symbol());
                expect_type(Type::Scalar, lt, lhs.pos, &what)?;
                let (r, rt) = self.expr(rhs)?;
                let what = format!("right operand of `{}`", op.symbol());
                expect_type(Type::Scalar, rt, rhs.pos, &what)?;
                Ok((
                    Node::Bin {
                        op: *op,
                        lhs: Box::new(l),
                        rhs: Box::new(r),
                        pos: e.pos,
                    },
                    Type::Scalar,
                ))
            }
            ExprKind::Let { name, value, body } => {
                let (v, vt) = self.expr(value)?;
                self.scope.push((name.clone(), vt));
                let result = self.expr(body);
                self.scope.pop();
                let (b, bt) = result?;
                Ok((
                    Node::Let {
                        value: Box::new(v),
                        body: Box::new(b),
                    },
                    bt,
                ))
            }
            ExprKind::Index { target, index } => {
                let (t, tt) = self.lookup(target).ok_or_else(|| self.unbound(target, e.pos))?;
                if tt == Type::Scalar {
                    return Err(MeasureError::type_error(
                        e.pos,
                        format!("cannot index `{target}`: expected vector or series, found scalar"),
                    ));
                }
                let (i, it) = self.expr(index)?;
                expect_type(Type::Scalar, it, index.pos, "index")?;
                Ok((
                    Node::Index {
                        target: Box::new(t),
                        index: Box::new(i),
                        pos: e.pos,
                    },
                    Type::Scalar,
                ))
            }
            ExprKind::Call { name, args } => self.call(name, args, e.pos),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<(Node, Type), MeasureError> {
        if name == "at" && self.kind == MeasureKind::PerStep && !self.scope.iter().any(|(n, _)| n == "at") {
            check_arity("at", 1, args.len(), pos)?;
            let (j, jt) = self.expr(&args[0])?;
            expect_type(Type::Scalar, jt, args[0].pos, "argument 1 of `at`")?;
            return Ok((Node::At(Box::new(j), pos), Type::Vector));
        }
        let Some(builtin) = builtins::lookup(name) else {
            if self.lookup(name).is_some() {
                return Err(MeasureError::type_error(pos, format!("`{name}` is not a function")));
            }
            return Err(MeasureError::type_error(pos, format!("unknown function `{name}`")));
        };
        let mut checked = Vec::with_capacity(args.len());
        for arg in args {
            checked.push(self.expr(arg)?);
        }
        let allowed = match (builtin.kind, self.kind) {
            (BuiltinKind::Both, _) => true,
            (BuiltinKind::PerStep, k) => k == MeasureKind::PerStep,
            (BuiltinKind::Aggregate, k) => k == MeasureKind::Aggregate,
        };
        if !allowed {
            let only = match builtin.kind {
                BuiltinKind::PerStep => "per-step",
                _ => "aggregate",
            };
            return Err(MeasureError::type_error(
                pos,
                format!("`{name}` is only available in {only} measures"),
            ));
        }
        check_arity(name, builtin.params.len(), args.len(), pos)?;
        let mut nodes = Vec::with_capacity(args.len());
        for (idx, ((node, ty), want)) in checked.into_iter().zip(builtin.params).enumerate() {
            expect_type(*want, ty, args[idx].pos, &format!("argument {} of `{name}`", idx + 1))?;
            nodes.push(node);
        }
        Ok((
            Node::Call {
                func: builtin.func,
                args: nodes,
                pos,
            },
            builtin.result,
        ))
    }
}

fn expect_type(want: Type, found: Type, pos: Pos, what: &str) -> Result<(), MeasureError> {
    if want == found {
        Ok(())
    } else {
        Err(MeasureError::type_error(
            pos,
            format!("{what}: expected {want}, found {found}"),
        ))
    }
}

fn check_arity(name: &str, want: usize, found: usize, pos: Pos) -> Result<(), MeasureError> {
    if want == found {
        Ok(())
    } else {
        Err(MeasureError::type_error(
            pos,
            format!(
                "`{name}` takes {want} argument{}, found {found}",
                if want == 1 { "" } else { "s" }
            ),
        ))
    }
}
