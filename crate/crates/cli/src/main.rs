//! `orderscope` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "orderscope",
    version,
    about = "Analyze ensembles of multi-dimensional trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ensemble from a JSON spec.
    Gen {
        #[arg(long, env = "ORDERSCOPE_SPEC")]
        spec: PathBuf,
        #[arg(long, env = "ORDERSCOPE_OUT")]
        out: PathBuf,
    },
    /// Load and validate an ensemble; exit 0 only if it is clean.
    Validate {
        #[arg(long, env = "ORDERSCOPE_ENSEMBLE")]
        ensemble: PathBuf,
    },
    /// Evaluate measures on every run.
    Eval {
        #[command(flatten)]
        input: MeasureInput,
        /// Emit per-step series (one CSV per run under `--out`) instead of
        /// aggregated scalars.
        #[arg(long, env = "ORDERSCOPE_PER_STEP")]
        per_step: bool,
        /// Output file (`.json` or `.csv`), or a directory with `--per-step`.
        /// Defaults to JSON on stdout.
        #[arg(long, env = "ORDERSCOPE_OUT")]
        out: Option<PathBuf>,
    },
    /// Export the parameter-space heatmap.
    Heatmap {
        #[command(flatten)]
        input: MeasureInput,
        /// Output file (`.json` or `.csv`); defaults to JSON on stdout.
        #[arg(long, env = "ORDERSCOPE_OUT")]
        out: Option<PathBuf>,
    },
    /// Principal component analysis of one run.
    Pca {
        #[arg(long, env = "ORDERSCOPE_ENSEMBLE")]
        ensemble: PathBuf,
        #[arg(long, env = "ORDERSCOPE_RUN")]
        run: String,
        #[arg(long, env = "ORDERSCOPE_THRESHOLD", default_value_t = 0.999)]
        threshold: f64,
        #[arg(long, env = "ORDERSCOPE_MAX", default_value_t = 8)]
        max: usize,
        #[arg(long, env = "ORDERSCOPE_FROM", allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, env = "ORDERSCOPE_TO", allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, env = "ORDERSCOPE_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "ORDERSCOPE_HOST", default_value = orderscope_service::DEFAULT_HOST)]
        host: String,
        #[arg(long, env = "ORDERSCOPE_PORT", default_value_t = orderscope_service::DEFAULT_PORT)]
        port: u16,
        /// Directory that client-supplied ensemble paths are confined to.
        #[arg(long, env = "ORDERSCOPE_DATA_ROOT", default_value = ".")]
        data_root: PathBuf,
    },
}

#[derive(Args)]
struct MeasureInput {
    #[arg(long, env = "ORDERSCOPE_ENSEMBLE")]
    ensemble: PathBuf,
    #[arg(long, env = "ORDERSCOPE_STEP_MEASURE")]
    step_measure: PathBuf,
    #[arg(long, env = "ORDERSCOPE_AGG_MEASURE")]
    agg_measure: Option<PathBuf>,
    #[arg(long, env = "ORDERSCOPE_FROM", allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, env = "ORDERSCOPE_TO", allow_negative_numbers = true)]
    to: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { spec, out } => commands::gen(&spec, &out),
        Command::Validate { ensemble } => commands::validate(&ensemble),
        Command::Eval { input, per_step, out } => commands::eval(&input, per_step, out.as_deref()),
        Command::Heatmap { input, out } => commands::heatmap(&input, out.as_deref()),
        Command::Pca {
            ensemble,
            run,
            threshold,
            max,
            from,
            to,
            out,
        } => commands::pca(&ensemble, &run, threshold, max, from, to, out.as_deref()),
        Command::Serve { host, port, data_root } => commands::serve(&host, port, data_root),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
