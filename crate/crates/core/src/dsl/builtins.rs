use serde::Serialize;

use super::types::Type;

/// Where a builtin may be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    PerStep,
    Aggregate,
    /// Scalar math, available in both measure kinds.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Func {
    Norm,
    Dot,
    Dist,
    Particle,
    VMean,
    VMin,
    VMax,
    VStd,
    Recurrence,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
    Mean,
    TwMean,
    Median,
    Std,
    Min,
    Max,
    Quantile,
    First,
    Last,
    Len,
}

#[derive(Debug, Clone, Serialize)]
pub struct Builtin {
    pub name: &'static str,
    pub kind: BuiltinKind,
    pub arity: usize,
    pub signature: &'static str,
    pub doc: &'static str,
    #[serde(skip)]
    pub(crate) func: Func,
    #[serde(skip)]
    pub(crate) params: &'static [Type],
    #[serde(skip)]
    pub(crate) result: Type,
}

use Type::{Scalar as S, Series as Ser, Vector as V};

macro_rules! builtin {
    ($name:literal, $kind:ident, $func:ident, [$($p:expr),*] -> $r:expr, $sig:literal, $doc:literal) => {
        Builtin {
            name: $name,
            kind: BuiltinKind::$kind,
            arity: [$($p),*].len(),
            signature: $sig,
            doc: $doc,
            func: Func::$func,
            params: &[$($p),*],
            result: $r,
        }
    };
}

static BUILTINS: [Builtin; 25] = [
    builtin!("norm", PerStep, Norm, [V] -> S, "norm(v) -> scalar", "Euclidean norm of a vector."),
    builtin!("dot", PerStep, Dot, [V, V] -> S, "dot(u, v) -> scalar", "Dot product of two vectors of equal length."),
    builtin!("dist", PerStep, Dist, [V, V] -> S, "dist(u, v) -> scalar", "Euclidean distance between two vectors of equal length."),
    builtin!("particle", PerStep, Particle, [V, S] -> V, "particle(v, p) -> vector", "The 3-component orientation block of particle p (0-based)."),
    builtin!("vmean", PerStep, VMean, [V] -> S, "vmean(v) -> scalar", "Mean of the vector's components."),
    builtin!("vmin", PerStep, VMin, [V] -> S, "vmin(v) -> scalar", "Smallest component."),
    builtin!("vmax", PerStep, VMax, [V] -> S, "vmax(v) -> scalar", "Largest component."),
    builtin!("vstd", PerStep, VStd, [V] -> S, "vstd(v) -> scalar", "Population standard deviation of the components."),
    builtin!("recurrence", PerStep, Recurrence, [S] -> S, "recurrence(w) -> scalar",
        "Distance from the current state to the closest state at least w steps away, searched in both directions within the window. Zero for periodic motion."),
    builtin!("abs", Both, Abs, [S] -> S, "abs(x) -> scalar", "Absolute value."),
    builtin!("sqrt", Both, Sqrt, [S] -> S, "sqrt(x) -> scalar", "Square root; negative arguments are an error."),
    builtin!("sin", Both, Sin, [S] -> S, "sin(x) -> scalar", "Sine (radians)."),
    builtin!("cos", Both, Cos, [S] -> S, "cos(x) -> scalar", "Cosine (radians)."),
    builtin!("exp", Both, Exp, [S] -> S, "exp(x) -> scalar", "Exponential."),
    builtin!("log", Both, Log, [S] -> S, "log(x) -> scalar", "Natural logarithm; non-positive arguments are an error."),
    builtin!("mean", Aggregate, Mean, [Ser] -> S, "mean(S) -> scalar", "Arithmetic mean of the samples."),
    builtin!("twmean", Aggregate, TwMean, [Ser] -> S, "twmean(S) -> scalar", "Trapezoidal time-weighted mean using the window's time axis."),
    builtin!("median", Aggregate, Median, [Ser] -> S, "median(S) -> scalar", "Median (mean of the two middle samples for even length)."),
    builtin!("std", Aggregate, Std, [Ser] -> S, "std(S) -> scalar", "Population standard deviation."),
    builtin!("min", Aggregate, Min, [Ser] -> S, "min(S) -> scalar", "Smallest sample."),
    builtin!("max", Aggregate, Max, [Ser] -> S, "max(S) -> scalar", "Largest sample."),
    builtin!("quantile", Aggregate, Quantile, [Ser, S] -> S, "quantile(S, q) -> scalar", "Linearly interpolated quantile, q in [0, 1]."),
    builtin!("first", Aggregate, First, [Ser] -> S, "first(S) -> scalar", "First sample in the window."),
    builtin!("last", Aggregate, Last, [Ser] -> S, "last(S) -> scalar", "Last sample in the window."),
    builtin!("len", Aggregate, Len, [Ser] -> S, "len(S) -> scalar", "Number of samples in the window."),
];

/// Catalog of every builtin function, in a fixed order.
pub fn list_builtins() -> &'static [Builtin] {
    &BUILTINS
}

pub(crate) fn lookup(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}
