//! Repeated engine runs with per-run traces and a summary file.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::problems::ProblemKind;
use crate::engine::{run, EngineConfig, IterationRecord, RunLog};
use crate::error::{Error, Result};
use crate::qpoi::{Mode, Variant};

/// Optional changes to the engine defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineOverrides {
    pub eta: Option<usize>,
    pub max_evals: Option<usize>,
    pub mode: Option<Mode>,
    pub n_sample: Option<usize>,
    pub truncation: Option<bool>,
    /// Total acquisition evaluations per inner optimization.
    pub optimizer_evals: Option<usize>,
    pub optimizer_restarts: Option<usize>,
    pub fit_restarts: Option<usize>,
    pub threads: Option<usize>,
    pub concurrent_evaluation: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub d: usize,
    pub variant: Variant,
    pub q: usize,
    pub repetitions: usize,
    /// One seed per repetition.
    pub seeds: Vec<u64>,
    pub overrides: EngineOverrides,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Spec with seeds `seed, seed + 1, ...`.
    pub fn new(
        problem: ProblemKind,
        d: usize,
        variant: Variant,
        q: usize,
        repetitions: usize,
        seed: u64,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            problem,
            d,
            variant,
            q,
            repetitions,
            seeds: (0..repetitions as u64).map(|i| seed.wrapping_add(i)).collect(),
            overrides: EngineOverrides::default(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.seeds.len() != self.repetitions {
            return Err(Error::config(format!(
                "{} seeds given for {} repetitions",
                self.seeds.len(),
                self.repetitions
            )));
        }
        Ok(())
    }

    /// Engine configuration for repetition `rep`.
    pub fn engine_config(&self, rep: usize) -> EngineConfig {
        let o = &self.overrides;
        let mut c = EngineConfig::new(self.d, self.q, self.variant, self.seeds[rep]);
        c.hv_reference = self.problem.reference(self.d).to_vec();
        if let Some(v) = o.eta {
            c.eta = v;
            if o.max_evals.is_none() {
                c.max_evals = crate::engine::default_budget(v);
            }
        }
        if let Some(v) = o.max_evals {
            c.max_evals = v;
        }
        if let Some(v) = o.mode {
            c.acquisition.mode = v;
        }
        if let Some(v) = o.n_sample {
            c.acquisition.n_sample = v;
        }
        if c.acquisition.mode == Mode::MonteCarlo && c.acquisition.n_sample == 0 {
            c.acquisition.n_sample = 10_000;
        }
        c.acquisition.seed = self.seeds[rep];
        if let Some(v) = o.truncation {
            c.acquisition.truncation = v;
        }
        if let Some(v) = o.optimizer_evals {
            c.optimizer.max_evals = v;
        }
        if let Some(v) = o.optimizer_restarts {
            c.optimizer.restarts = v;
        }
        if let Some(v) = o.fit_restarts {
            c.fit.restarts = v;
        }
        if let Some(v) = o.threads {
            c.threads = v;
        }
        if let Some(v) = o.concurrent_evaluation {
            c.concurrent_evaluation = v;
        }
        c
    }

    fn stem(&self, rep: usize) -> String {
        format!("{}_d{}_{}_q{}_run{rep}", self.problem.name(), self.d, self.variant, self.q)
    }

    pub fn csv_path(&self, rep: usize) -> PathBuf {
        self.out_dir.join(format!("{}.csv", self.stem(rep)))
    }

    pub fn trace_path(&self, rep: usize) -> PathBuf {
        self.out_dir.join(format!("{}.jsonl", self.stem(rep)))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join(format!(
            "{}_d{}_{}_q{}_summary.json",
            self.problem.name(),
            self.d,
            self.variant,
            self.q
        ))
    }
}

/// One line of a convergence CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub evals: usize,
    pub hv: f64,
    pub acq_value: Option<f64>,
    pub wallclock_ms: f64,
}

impl From<&IterationRecord> for ConvergenceRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            evals: r.evals,
            hv: r.hv,
            acq_value: r.acq_value,
            wallclock_ms: r.wallclock_ms,
        }
    }
}

pub fn convergence_rows(log: &RunLog) -> Vec<ConvergenceRow> {
    log.records.iter().map(ConvergenceRow::from).collect()
}

/// Order statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return Err(Error::numerical("statistics need a non-empty sample without NaN"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            min: v[0],
            max: v[n - 1],
            median,
            mean,
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub problem: String,
    pub d: usize,
    pub variant: Variant,
    pub q: usize,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub evaluations: Vec<usize>,
    pub final_hv: Vec<f64>,
    pub hv: Stats,
    pub runtime_s: f64,
}

/// Runs every repetition, writing `<stem>.csv`, `<stem>.jsonl` and one
/// summary JSON into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    run_experiment_with(spec, |_, _| {})
}

/// Like [`run_experiment`], calling `progress(rep, log)` after each run.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, mut progress: F) -> Result<ExperimentSummary>
where
    F: FnMut(usize, &RunLog),
{
    spec.validate()?;
    let problem = spec.problem.build(spec.d)?;
    spec.engine_config(0).validate(&problem)?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let start = Instant::now();
    let mut final_hv = Vec::with_capacity(spec.repetitions);
    let mut evaluations = Vec::with_capacity(spec.repetitions);
    for rep in 0..spec.repetitions {
        let config = spec.engine_config(rep);
        let log = match run(&problem, &config) {
            Ok(log) => log,
            Err(abort) => {
                write_convergence_csv(&spec.csv_path(rep), &abort.log)?;
                write_trace(&spec.trace_path(rep), &abort.log)?;
                return Err(abort.error);
            }
        };
        write_convergence_csv(&spec.csv_path(rep), &log)?;
        write_trace(&spec.trace_path(rep), &log)?;
        final_hv.push(log.final_hv().unwrap_or(f64::NAN));
        evaluations.push(log.evaluations());
        progress(rep, &log);
    }
    let summary = ExperimentSummary {
        problem: spec.problem.name().to_string(),
        d: spec.d,
        variant: spec.variant,
        q: spec.q,
        repetitions: spec.repetitions,
        seeds: spec.seeds.clone(),
        evaluations,
        hv: Stats::of(&final_hv)?,
        final_hv,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    let path = spec.summary_path();
    let json = serde_json::to_string_pretty(&summary).map_err(|e| format_error(&path, e))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e))
}

/// Writes `iter,evals,hv,acq_value,wallclock_ms`; the DoE row has an empty
/// `acq_value`.
pub fn write_convergence_csv(path: &Path, log: &RunLog) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in convergence_rows(log) {
        w.serialize(row).map_err(|e| format_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_error(path, e))?;
    let header = r.headers().map_err(|e| format_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["iter", "evals", "hv", "acq_value", "wallclock_ms"] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| format_error(path, e))).collect()
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    problem: String,
}

/// Line-delimited JSON: a header line with the problem name, then one
/// [`IterationRecord`] per line.
pub fn write_trace(path: &Path, log: &RunLog) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = TraceHeader {
        problem: log.problem.clone(),
    };
    let mut line = |v: String| writeln!(w, "{v}").map_err(|e| Error::io(path, e));
    line(serde_json::to_string(&header).map_err(|e| format_error(path, e))?)?;
    for r in &log.records {
        line(serde_json::to_string(r).map_err(|e| format_error(path, e))?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<RunLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "empty trace".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let header: TraceHeader = serde_json::from_str(&first).map_err(|e| format_error(path, e))?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| format_error(path, e))?);
    }
    Ok(RunLog::from_records(header.problem, records))
}

fn format_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
