use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use orderscope_core::analysis::pca as run_pca;
use orderscope_core::dsl::{parse_measure_file, CompiledMeasure, MeasureKind};
use orderscope_core::evaluate::{evaluate_aggregate, evaluate_per_step, RunFailure};
use orderscope_core::par::Parallelism;
use orderscope_core::state_diagram::build_heatmap;
use orderscope_core::synth::{generate_to_dir, EnsembleSpec, GeneratorError};
use orderscope_core::{load_ensemble, Ensemble, EnsembleError, Run, Window};
use orderscope_service::AppState;
use serde_json::{json, Value};

use crate::MeasureInput;

pub const EXIT_DATA: u8 = 1;
pub const EXIT_MEASURE: u8 = 2;
pub const EXIT_IO: u8 = 3;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn measure(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MEASURE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        CliError::data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `out`, or to stdout when absent.
fn write_output(out: Option<&Path>, content: &str) -> CliResult {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
            }
            std::fs::write(path, content).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("values are finite");
    text.push('\n');
    text
}

fn is_csv(out: Option<&Path>) -> bool {
    out.and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_measure(path: &Path, kind: MeasureKind) -> Result<CompiledMeasure, CliError> {
    let text = read_text(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("measure");
    parse_measure_file(&text, kind, stem).map_err(|e| match e.position() {
        Some(pos) => CliError::measure(format!("{}:{}:{}: {}", path.display(), pos.line, pos.col, e.message())),
        None => CliError::measure(format!("{}: {}", path.display(), e.message())),
    })
}

fn window(from: Option<f64>, to: Option<f64>) -> Result<Window, CliError> {
    Ok(Window::from_bounds(from, to)?)
}

fn sorted_runs(ensemble: &Ensemble) -> Vec<&Run> {
    let mut runs: Vec<&Run> = ensemble.runs().iter().collect();
    runs.sort_by(|a, b| a.id().cmp(b.id()));
    runs
}

fn failure_json(f: &RunFailure) -> Value {
    serde_json::to_value(f).expect("failure serializes")
}

fn report_failures<'a>(failures: impl IntoIterator<Item = &'a RunFailure>) {
    for f in failures {
        eprintln!("warning: run {}: {}", f.run, f.message);
    }
}

pub fn gen(spec_path: &Path, out: &Path) -> CliResult {
    let text = read_text(spec_path)?;
    let spec: EnsembleSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("invalid spec {}: {e}", spec_path.display())))?;
    let manifest = generate_to_dir(&spec, out).map_err(|e| match e {
        GeneratorError::Io(io) => CliError::io(format!("cannot write {}: {io}", out.display())),
        other => CliError::data(other.to_string()),
    })?;
    println!("wrote {} runs to {}", manifest.runs.len(), out.display());
    Ok(())
}

pub fn validate(path: &Path) -> CliResult {
    let ensemble = load_ensemble(path)?;
    let steps = ensemble.runs().iter().map(Run::len);
    let (lo, hi) = steps.fold((usize::MAX, 0), |(lo, hi), n| (lo.min(n), hi.max(n)));
    println!(
        "ok: ensemble {}: {} runs, k={}, D={}, {lo}..{hi} steps per run",
        ensemble.id(),
        ensemble.runs().len(),
        ensemble.k(),
        ensemble.dim()
    );
    Ok(())
}

pub fn eval(input: &MeasureInput, per_step: bool, out: Option<&Path>) -> CliResult {
    let step = load_measure(&input.step_measure, MeasureKind::PerStep)?;
    let agg = match (&input.agg_measure, per_step) {
        (Some(p), _) => Some(load_measure(p, MeasureKind::Aggregate)?),
        (None, true) => None,
        (None, false) => return Err(CliError::measure("--agg-measure is required without --per-step")),
    };
    let window = window(input.from, input.to)?;
    let ensemble = load_ensemble(&input.ensemble)?;
    let runs = sorted_runs(&ensemble);

    if per_step {
        let results = evaluate_per_step(&runs, &step, &window, Parallelism::default());
        report_failures(results.iter().filter_map(|r| r.as_ref().err()));
        let as_json = out.is_none_or(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")));
        if as_json {
            let items: Vec<Value> = runs
                .iter()
                .zip(&results)
                .map(|(run, r)| match r {
                    Ok(s) => json!({ "run": run.id(), "times": s.times, "values": s.values }),
                    Err(f) => json!({ "run": run.id(), "error": failure_json(f) }),
                })
                .collect();
            let doc = json!({ "measure": step.name(), "from": input.from, "to": input.to, "results": items });
            return write_output(out, &to_json(&doc));
        }
        let dir = out.expect("checked above");
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        for (run, r) in runs.iter().zip(&results) {
            if let Ok(s) = r {
                let mut csv = format!("t,{}\n", csv_field(step.name()));
                for (t, v) in s.times.iter().zip(&s.values) {
                    writeln!(csv, "{t:?},{v:?}").unwrap();
                }
                write_output(Some(&dir.join(format!("{}.csv", run.id()))), &csv)?;
            }
        }
        return Ok(());
    }

    let agg = agg.expect("required without --per-step");
    let results = evaluate_aggregate(&runs, &step, &agg, &window, Parallelism::default());
    report_failures(results.iter().filter_map(|r| r.as_ref().err()));
    if is_csv(out) {
        let mut csv = String::from("run,d,beta,value,error\n");
        for (run, r) in runs.iter().zip(&results) {
            let p = run.params();
            match r {
                Ok((v, _)) => writeln!(csv, "{},{:?},{:?},{v:?},", run.id(), p.d, p.beta).unwrap(),
                Err(f) => writeln!(csv, "{},{:?},{:?},,{}", run.id(), p.d, p.beta, csv_field(&f.message)).unwrap(),
            }
        }
        return write_output(out, &csv);
    }
    let items: Vec<Value> = runs
        .iter()
        .zip(&results)
        .map(|(run, r)| {
            let p = run.params();
            match r {
                Ok((v, _)) => json!({ "run": run.id(), "d": p.d, "beta": p.beta, "value": v }),
                Err(f) => json!({ "run": run.id(), "d": p.d, "beta": p.beta, "error": failure_json(f) }),
            }
        })
        .collect();
    let doc = json!({
        "measure": agg.name(),
        "step_measure": step.name(),
        "from": input.from,
        "to": input.to,
        "results": items,
    });
    write_output(out, &to_json(&doc))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn heatmap(input: &MeasureInput, out: Option<&Path>) -> CliResult {
    let step = load_measure(&input.step_measure, MeasureKind::PerStep)?;
    let agg_path = input
        .agg_measure
        .as_ref()
        .ok_or_else(|| CliError::measure("heatmap needs --agg-measure"))?;
    let agg = load_measure(agg_path, MeasureKind::Aggregate)?;
    let window = window(input.from, input.to)?;
    let ensemble = load_ensemble(&input.ensemble)?;
    let model = build_heatmap(&ensemble, &step, &agg, &window).map_err(|e| CliError::data(e.to_string()))?;
    report_failures(&model.failures);
    let text = if is_csv(out) {
        model.to_csv()
    } else {
        to_json(&model.export())
    };
    write_output(out, &text)
}

pub fn pca(
    ensemble: &Path,
    run: &str,
    threshold: f64,
    max: usize,
    from: Option<f64>,
    to: Option<f64>,
    out: Option<&Path>,
) -> CliResult {
    let window = window(from, to)?;
    let ensemble = load_ensemble(ensemble)?;
    let run = ensemble
        .run(run)
        .ok_or_else(|| CliError::data(format!("no run {run:?} in ensemble {}", ensemble.id())))?;
    let view = run.slice(&window)?;
    let result = run_pca(&view, threshold, Some(max)).map_err(|e| CliError::data(e.to_string()))?;
    let mut doc = serde_json::to_value(&result).expect("finite result");
    let obj = doc.as_object_mut().expect("struct serializes to an object");
    obj.insert("run".into(), json!(run.id()));
    obj.insert("threshold".into(), json!(threshold));
    obj.insert("max".into(), json!(max));
    obj.insert("from".into(), json!(from));
    obj.insert("to".into(), json!(to));
    write_output(out, &to_json(&doc))
}

pub fn serve(host: &str, port: u16, data_root: PathBuf) -> CliResult {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    if !data_root.is_dir() {
        return Err(CliError::io(format!(
            "data root {} is not a directory",
            data_root.display()
        )));
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = orderscope_service::bind(host, port)
            .await
            .map_err(|e| CliError::io(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::io(e.to_string()))?;
        println!("listening on http://{addr}");
        std::io::stdout().flush().ok();
        orderscope_service::serve(listener, Arc::new(AppState::new(data_root)))
            .await
            .map_err(|e| CliError::io(format!("server failed: {e}")))
    })
}
