//! Command-line front end: `run`, `validate` and `speedtest`.
//!
//! Every `run` and `speedtest` flag can also be set in a TOML file passed
//! with `--config`, under a `[run]` or `[speedtest]` table using the flag
//! names with underscores. Flags given on the command line win.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mobgo::bench::{
    format_timing_table, run_experiment_with, run_suite, speedtest, EngineOverrides, ExperimentSpec, FrontKind,
    ProblemKind, Suite,
};
use mobgo::{Error, Mode, Result, Variant};

#[derive(Parser)]
#[command(name = "mobgo", version, about = "Batch multi-objective Bayesian optimization with exact q-PoI")]
struct Cli {
    /// TOML file with [run] and [speedtest] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated optimization runs with convergence CSVs and a summary JSON.
    Run(RunArgs),
    /// Runs a built-in self-check suite.
    Validate {
        #[arg(long)]
        suite: String,
    },
    /// Times the exact acquisitions on synthetic fronts.
    Speedtest(SpeedArgs),
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct RunArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total true-objective evaluations, DoE included.
    #[arg(long)]
    budget_evals: Option<usize>,
    /// DoE size.
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// exact or monte_carlo.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n_sample: Option<usize>,
    /// Skip stripes outside the 3-sigma box.
    #[arg(long)]
    truncation: Option<bool>,
    /// Acquisition evaluations per inner optimization.
    #[arg(long)]
    optimizer_evals: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct SpeedArgs {
    #[arg(long)]
    front: Option<String>,
    /// Front sizes; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    size: Option<Vec<usize>>,
    /// Timing samples per cell (median is reported).
    #[arg(long)]
    samples: Option<usize>,
    /// Minimum milliseconds per sample.
    #[arg(long)]
    min_ms: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    run: RunArgs,
    #[serde(default)]
    speedtest: SpeedArgs,
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),+) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.clone(); } )+
    };
}

fn load_config(path: Option<&PathBuf>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        message: e.to_string(),
    })
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "exact" => Ok(Mode::Exact),
        "monte_carlo" | "mc" => Ok(Mode::MonteCarlo),
        _ => Err(Error::Config(format!(
            "unknown mode {s:?}; valid options are {{exact, monte_carlo}}"
        ))),
    }
}

fn cmd_run(mut a: RunArgs, file: &RunArgs) -> Result<bool> {
    merge!(a, file, problem, dim, variant, q, reps, seed, budget_evals, eta, out, mode, n_sample, truncation, optimizer_evals, threads);
    let problem: ProblemKind = a.problem.as_deref().unwrap_or("zdt1").parse()?;
    let variant: Variant = a.variant.as_deref().unwrap_or("best").parse()?;
    let mut spec = ExperimentSpec::new(
        problem,
        a.dim.unwrap_or(5),
        variant,
        a.q.unwrap_or(2),
        a.reps.unwrap_or(1),
        a.seed.unwrap_or(42),
        a.out.unwrap_or_else(|| PathBuf::from("results")),
    );
    spec.overrides = EngineOverrides {
        eta: a.eta,
        max_evals: a.budget_evals,
        mode: a.mode.as_deref().map(parse_mode).transpose()?,
        n_sample: a.n_sample,
        truncation: a.truncation,
        optimizer_evals: a.optimizer_evals,
        threads: a.threads,
        ..EngineOverrides::default()
    };
    let summary = run_experiment_with(&spec, |rep, log| {
        println!(
            "run {rep}: seed {} evals {} final HV {:.6}",
            spec.seeds[rep],
            log.evaluations(),
            log.final_hv().unwrap_or(f64::NAN)
        );
    })?;
    let s = summary.hv;
    println!(
        "HV over {} runs: min {:.6} max {:.6} median {:.6} mean {:.6} std {:.6}",
        summary.repetitions, s.min, s.max, s.median, s.mean, s.std
    );
    println!("summary written to {}", spec.summary_path().display());
    Ok(true)
}

fn cmd_validate(suite: &str) -> Result<bool> {
    let report = run_suite(suite.parse::<Suite>()?)?;
    print!("{report}");
    Ok(report.passed())
}

fn cmd_speedtest(mut a: SpeedArgs, file: &SpeedArgs) -> Result<bool> {
    merge!(a, file, front, size, samples, min_ms);
    let fronts: Vec<FrontKind> = match a.front.as_deref() {
        Some(f) => vec![f.parse()?],
        None => vec![FrontKind::Convex, FrontKind::Concave],
    };
    let sizes = a.size.unwrap_or_else(|| vec![10, 100, 1000]);
    let mut rows = Vec::new();
    for f in fronts {
        rows.extend(speedtest(
            f,
            &sizes,
            a.samples.unwrap_or(5),
            Duration::from_millis(a.min_ms.unwrap_or(20)),
        )?);
    }
    print!("{}", format_timing_table(&rows));
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(cli.config.as_ref()).and_then(|file| match cli.command {
        Command::Run(a) => cmd_run(a, &file.run),
        Command::Validate { suite } => cmd_validate(&suite),
        Command::Speedtest(a) => cmd_speedtest(a, &file.speedtest),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
