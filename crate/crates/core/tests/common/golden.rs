//! Golden-file conformance checks for the measure language.

use orderscope_core::dsl::{parse, CompiledMeasure, MeasureError, MeasureKind};
use orderscope_core::{ParameterPoint, Run};

const GOLDEN: &str = include_str!("../golden/dsl.txt");
pub const TOL: f64 = 1e-12;

/// Two particles, four uneven steps, d = 2, beta = -1.
pub fn fixed_run() -> Run {
    let rows = [
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        [0.6, 0.8, 0.0, 0.0, 0.6, 0.8],
    ];
    Run::new(
        "fixed",
        ParameterPoint::new(2.0, -1.0),
        vec![0.0, 0.5, 1.5, 3.0],
        rows.concat(),
        6,
    )
    .unwrap()
}

fn floats(list: &str) -> Vec<f64> {
    list.split(',').map(|v| v.trim().parse().unwrap()).collect()
}

fn pos_of(err: &MeasureError) -> String {
    err.position()
        .map_or("none".into(), |p| format!("{}:{}", p.line, p.col))
}

pub struct Case<'a> {
    pub line: usize,
    kind: MeasureKind,
    input: &'a str,
    pub source: String,
    expect: &'a str,
}

pub fn cases() -> Vec<Case<'static>> {
    GOLDEN
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| {
            let parts: Vec<&str> = l.splitn(4, '|').map(str::trim).collect();
            assert_eq!(parts.len(), 4, "golden line {}", n + 1);
            Case {
                line: n + 1,
                kind: parts[0].parse().unwrap(),
                input: parts[1],
                source: parts[2].replace("\\n", "\n"),
                expect: parts[3],
            }
        })
        .collect()
}

pub fn check(case: &Case<'_>) -> Result<(), String> {
    let (what, rest) = case.expect.split_once(' ').unwrap_or((case.expect, ""));
    let compiled = CompiledMeasure::compile("golden", case.kind, case.source.as_str());
    match what {
        "tree" => {
            let tree = parse(&case.source).map_err(|e| e.to_string())?;
            if tree.sexpr() != rest {
                return Err(format!("tree {} != {rest}", tree.sexpr()));
            }
            compiled.map(|_| ()).map_err(|e| format!("should typecheck: {e}"))
        }
        "syntax" | "type" => {
            let err = match compiled {
                Ok(_) => return Err("compiled, expected an error".into()),
                Err(e) => e,
            };
            let (pos, fragment) = rest.split_once(' ').unwrap_or((rest, ""));
            let kind_ok = matches!(
                (&err, what),
                (MeasureError::Syntax { .. }, "syntax") | (MeasureError::Type { .. }, "type")
            );
            if !kind_ok || pos_of(&err) != pos || !err.message().contains(fragment) {
                return Err(format!("got {err:?}"));
            }
            Ok(())
        }
        "values" => {
            let m = compiled.map_err(|e| e.to_string())?;
            let run = fixed_run();
            let got = m.eval_per_step(&run.view()).map_err(|e| e.to_string())?;
            let want = floats(rest);
            if got.times != run.times() || got.values.len() != want.len() {
                return Err(format!("shape {:?}", got.values));
            }
            if got.values.iter().zip(&want).any(|(g, w)| (g - w).abs() > TOL) {
                return Err(format!("values {:?}", got.values));
            }
            Ok(())
        }
        "value" => {
            let m = compiled.map_err(|e| e.to_string())?;
            let (s, t) = series_input(case.input);
            let got = m.eval_aggregate(&s, &t).map_err(|e| e.to_string())?;
            let want: f64 = rest.parse().unwrap();
            if (got - want).abs() > TOL {
                return Err(format!("value {got}"));
            }
            Ok(())
        }
        "runtime" => {
            let m = compiled.map_err(|e| format!("should compile: {e}"))?;
            let err = if case.input == "run" {
                m.eval_per_step(&fixed_run().view()).err()
            } else {
                let (s, t) = series_input(case.input);
                m.eval_aggregate(&s, &t).err()
            };
            let Some(err) = err else {
                return Err("evaluated, expected a runtime error".into());
            };
            let MeasureError::Runtime { step, .. } = &err else {
                return Err(format!("not a runtime error: {err:?}"));
            };
            let mut words = rest.split_whitespace();
            let pos = words.next().unwrap();
            let want_step = match (words.next(), words.next()) {
                (Some("step"), Some(k)) => Some(k.parse::<usize>().unwrap()),
                _ => None,
            };
            if pos_of(&err) != pos || *step != want_step {
                return Err(format!("got {err:?}"));
            }
            Ok(())
        }
        other => Err(format!("unknown expectation {other}")),
    }
}

fn series_input(input: &str) -> (Vec<f64>, Vec<f64>) {
    let (s, t) = input.split_once(';').unwrap();
    (
        floats(s.strip_prefix("S=").unwrap()),
        floats(t.strip_prefix("T=").unwrap()),
    )
}
