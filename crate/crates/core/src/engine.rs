//! The batch MOBGO loop: design of experiments, surrogate fitting,
//! acquisition maximization and archive bookkeeping.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::BatchPrediction;
use crate::error::{Error, Result};
use crate::gp::{fit_with, posterior_batch, FitOptions, SurrogateModel};
use crate::optim::{default_population, maximize_from, OptimizerBudget, SearchBox};
use crate::pareto::{hypervolume_2d, ParetoArchive};
use crate::qpoi::{qpoi_monte_carlo, AcquisitionConfig, Mode, QpoiEvaluator, Variant};

/// Rows closer than this (max-norm) to an existing row count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-8;

/// Relative size of the perturbation applied to duplicate batch rows.
pub const PERTURBATION: f64 = 1e-6;

/// Latin hypercube sample of `eta` points in `bounds`.
///
/// Every dimension is cut into `eta` equal strata; each stratum receives
/// exactly one point, placed uniformly at random within it.
pub fn latin_hypercube(eta: usize, bounds: &SearchBox, seed: u64) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; d]; eta];
    for k in 0..d {
        let mut perm: Vec<usize> = (0..eta).collect();
        // Fisher-Yates; kept explicit so the stream is fixed by the seed alone.
        for i in (1..eta).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let (lo, w) = (bounds.lower()[k], bounds.width(k));
        for (row, &stratum) in out.iter_mut().zip(&perm) {
            let u: f64 = rng.random();
            let v = lo + w * (stratum as f64 + u) / eta as f64;
            row[k] = v.min(bounds.upper()[k]);
        }
    }
    out
}

pub type ObjectiveFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// A box-constrained multi-objective minimization problem.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub m: usize,
    pub bounds: SearchBox,
    evaluate: Arc<ObjectiveFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("d", &self.bounds.dim())
            .field("m", &self.m)
            .finish()
    }
}

impl Problem {
    pub fn new<F>(name: impl Into<String>, m: usize, bounds: SearchBox, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            m,
            bounds,
            evaluate: Arc::new(f),
        }
    }

    pub fn d(&self) -> usize {
        self.bounds.dim()
    }

    /// Evaluates the objectives, checking the output shape and finiteness.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = (self.evaluate)(x)?;
        if y.len() != self.m {
            return Err(Error::Evaluation(format!(
                "{} returned {} objectives, expected {}",
                self.name,
                y.len(),
                self.m
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("{} returned {y:?} at {x:?}", self.name)));
        }
        Ok(y)
    }
}

/// `min(6d, 60)`.
pub fn default_doe_size(d: usize) -> usize {
    (6 * d).min(60)
}

/// `min(9 eta, eta + 2 (200 - eta))`.
pub fn default_budget(eta: usize) -> usize {
    let extra = 2 * 200usize.saturating_sub(eta);
    (9 * eta).min(eta + extra)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Initial design size.
    pub eta: usize,
    /// Total evaluation budget, DoE included.
    pub max_evals: usize,
    /// Batch size.
    pub q: usize,
    pub acquisition: AcquisitionConfig,
    pub optimizer: OptimizerBudget,
    pub fit: FitOptions,
    /// Finite reference point for hypervolume reporting.
    pub hv_reference: Vec<f64>,
    pub seed: u64,
    /// Evaluate the batch's true objectives on separate threads.
    pub concurrent_evaluation: bool,
    /// Threads for acquisition evaluation inside the optimizer.
    pub threads: usize,
    /// Lower bound applied to predictive variances before the acquisition.
    pub variance_floor: f64,
}

impl EngineConfig {
    /// Defaults for a `d`-dimensional bi-objective problem: DoE and budget
    /// rules above, exact acquisition without stripe pruning.
    pub fn new(d: usize, q: usize, variant: Variant, seed: u64) -> Self {
        let eta = default_doe_size(d);
        Self {
            eta,
            max_evals: default_budget(eta),
            q,
            acquisition: AcquisitionConfig::exact(variant).with_truncation(false),
            optimizer: OptimizerBudget::standard(q * d, seed),
            fit: FitOptions {
                restarts: 10,
                refine: Some(2),
                local_evals: 200,
                ..FitOptions::default()
            },
            hv_reference: vec![11.0, 11.0],
            seed,
            concurrent_evaluation: false,
            threads: 1,
            variance_floor: 1e-12,
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.eta < 2 {
            return Err(Error::config(format!("eta must be at least 2, got {}", self.eta)));
        }
        if self.max_evals < self.eta {
            return Err(Error::config(format!(
                "budget {} is smaller than the DoE size {}",
                self.max_evals, self.eta
            )));
        }
        if self.q == 0 {
            return Err(Error::config("q must be at least 1"));
        }
        if self.hv_reference.len() != problem.m || self.hv_reference.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "hv_reference must be a finite {}-vector",
                problem.m
            )));
        }
        if !(self.variance_floor >= 0.0) {
            return Err(Error::config("variance_floor must be non-negative"));
        }
        self.acquisition.validate(problem.m, self.q)
    }
}

/// One entry of the run log: state after the DoE (iteration 0) or after a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// True-objective evaluations so far.
    pub evals: usize,
    pub hv: f64,
    /// Acquisition value of the chosen batch; `None` for the DoE record.
    pub acq_value: Option<f64>,
    /// Milliseconds since the start of the run.
    pub wallclock_ms: f64,
    /// Inputs evaluated in this step.
    pub batch: Vec<Vec<f64>>,
    /// Objective vectors of `batch`.
    pub outputs: Vec<Vec<f64>>,
    /// Non-dominated set after this step.
    pub archive: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub problem: String,
    pub records: Vec<IterationRecord>,
    /// Every evaluated input, in order.
    pub x: Vec<Vec<f64>>,
    /// Objective vectors matching `x`.
    pub y: Vec<Vec<f64>>,
}

impl RunLog {
    /// Rebuilds the evaluation history from the records.
    pub fn from_records(problem: impl Into<String>, records: Vec<IterationRecord>) -> Self {
        let x = records.iter().flat_map(|r| r.batch.iter().cloned()).collect();
        let y = records.iter().flat_map(|r| r.outputs.iter().cloned()).collect();
        Self {
            problem: problem.into(),
            records,
            x,
            y,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.x.len()
    }

    pub fn final_hv(&self) -> Option<f64> {
        self.records.last().map(|r| r.hv)
    }

    pub fn hv_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.hv).collect()
    }

    pub fn final_archive(&self) -> ParetoArchive {
        let dim = self.y.first().map_or(2, Vec::len);
        ParetoArchive::from_points(dim, self.y.iter().cloned())
    }
}

/// A run that stopped early; `log` holds everything up to the failure.
pub struct RunAbort {
    pub log: RunLog,
    pub error: Error,
}

impl fmt::Display for RunAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} evaluations: {}",
            self.log.evaluations(),
            self.error
        )
    }
}

impl fmt::Debug for RunAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunAbort")
            .field("evaluations", &self.log.evaluations())
            .field("error", &self.error)
            .finish()
    }
}

impl std::error::Error for RunAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunAbort> for Error {
    fn from(a: RunAbort) -> Self {
        a.error
    }
}

/// Runs the optimization loop until the evaluation budget is spent.
pub fn run(problem: &Problem, config: &EngineConfig) -> std::result::Result<RunLog, RunAbort> {
    let mut log = RunLog {
        problem: problem.name.clone(),
        records: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
    };
    match drive(problem, config, &mut log) {
        Ok(()) => Ok(log),
        Err(error) => Err(RunAbort { log, error }),
    }
}

fn drive(problem: &Problem, config: &EngineConfig, log: &mut RunLog) -> Result<()> {
    config.validate(problem)?;
    let start = Instant::now();
    let d = problem.d();
    let bounds = &problem.bounds;
    let mut archive = ParetoArchive::new(problem.m);
    let mut perturb_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, 3));
    let mut start_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, 4));

    let doe = latin_hypercube(config.eta, bounds, derive_seed(config.seed, 0, 0));
    let ys = evaluate_all(problem, &doe, config.concurrent_evaluation)?;
    for (x, y) in doe.iter().zip(&ys) {
        archive.insert(y);
        log.x.push(x.clone());
        log.y.push(y.clone());
    }
    log.records.push(IterationRecord {
        iter: 0,
        evals: log.x.len(),
        hv: hypervolume(&archive, &config.hv_reference)?,
        acq_value: None,
        wallclock_ms: elapsed_ms(start),
        batch: doe,
        outputs: ys,
        archive: archive.points().to_vec(),
    });

    let batch_box = bounds.replicate(config.q);
    let mut theta: Vec<Option<Vec<f64>>> = vec![None; problem.m];
    let mut iter = 0;
    while log.x.len() < config.max_evals {
        iter += 1;
        let models = fit_models(problem, config, log, &mut theta, iter)?;

        let mut budget = config.optimizer;
        budget.seed = derive_seed(config.seed, iter as u64, 1);
        let acquisition = Acquisition::new(&models, &archive, config, d)?;
        let lambda = budget.population.unwrap_or_else(|| default_population(config.q * d));
        let starts = start_candidates(log, &archive, config.q, bounds, &mut start_rng, 2 * lambda);
        let best = maximize_from(|z| acquisition.value(z), &batch_box, &budget, config.threads, &starts)?;

        let mut batch: Vec<Vec<f64>> = best.argmax.chunks(d).map(<[f64]>::to_vec).collect();
        deduplicate(&mut batch, &log.x, bounds, &mut perturb_rng);
        let ys = evaluate_all(problem, &batch, config.concurrent_evaluation)?;
        for (x, y) in batch.iter().zip(&ys) {
            archive.insert(y);
            log.x.push(x.clone());
            log.y.push(y.clone());
        }
        log.records.push(IterationRecord {
            iter,
            evals: log.x.len(),
            hv: hypervolume(&archive, &config.hv_reference)?,
            acq_value: Some(best.value),
            wallclock_ms: elapsed_ms(start),
            batch,
            outputs: ys,
            archive: archive.points().to_vec(),
        });
    }
    Ok(())
}

/// Acquisition over a flattened `q x d` batch.
struct Acquisition<'a> {
    models: &'a [SurrogateModel],
    exact: Option<QpoiEvaluator>,
    archive: &'a ParetoArchive,
    config: &'a EngineConfig,
    d: usize,
}

impl<'a> Acquisition<'a> {
    fn new(models: &'a [SurrogateModel], archive: &'a ParetoArchive, config: &'a EngineConfig, d: usize) -> Result<Self> {
        let exact = match config.acquisition.mode {
            Mode::Exact => Some(QpoiEvaluator::new(archive)?.with_truncation(config.acquisition.truncation)),
            Mode::MonteCarlo => None,
        };
        Ok(Self {
            models,
            exact,
            archive,
            config,
            d,
        })
    }

    fn predict(&self, z: &[f64]) -> Result<BatchPrediction> {
        let xq: Vec<Vec<f64>> = z.chunks(self.d).map(<[f64]>::to_vec).collect();
        Ok(posterior_batch(self.models, &xq)?.with_variance_floor(self.config.variance_floor))
    }

    fn value(&self, z: &[f64]) -> Result<f64> {
        let batch = self.predict(z)?;
        let acq = &self.config.acquisition;
        match &self.exact {
            Some(ev) => ev.exact(&batch, acq.variant),
            None => Ok(qpoi_monte_carlo(&batch, self.archive, acq.n_sample, acq.seed)?.get(acq.variant)),
        }
    }
}

fn fit_models(
    problem: &Problem,
    config: &EngineConfig,
    log: &RunLog,
    theta: &mut [Option<Vec<f64>>],
    iter: usize,
) -> Result<Vec<SurrogateModel>> {
    let mut models = Vec::with_capacity(problem.m);
    for i in 0..problem.m {
        let y: Vec<f64> = log.y.iter().map(|v| v[i]).collect();
        let mut opts = config.fit.clone();
        opts.seed = derive_seed(config.seed, iter as u64, 10 + i as u64);
        opts.warm_start = theta[i].clone();
        let model = match fit_with(&log.x, &y, &problem.bounds, &opts) {
            Ok(m) => m,
            Err(Error::Numerical(_)) => {
                opts.jitter_start *= 100.0;
                fit_with(&log.x, &y, &problem.bounds, &opts)?
            }
            Err(e) => return Err(e),
        };
        theta[i] = Some(model.kernel().theta.clone());
        models.push(model);
    }
    Ok(models)
}

/// Flattened batches of jittered inputs whose outputs are on the current
/// front; they seed the acquisition search near known good regions.
fn start_candidates(
    log: &RunLog,
    archive: &ParetoArchive,
    q: usize,
    bounds: &SearchBox,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Vec<Vec<f64>> {
    let front: Vec<&Vec<f64>> = log
        .x
        .iter()
        .zip(&log.y)
        .filter(|(_, y)| archive.points().iter().any(|p| p == *y))
        .map(|(x, _)| x)
        .collect();
    if front.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let mut z = Vec::with_capacity(q * bounds.dim());
            for _ in 0..q {
                let mut x = front[rng.random_range(0..front.len())].clone();
                for (k, v) in x.iter_mut().enumerate() {
                    *v += 0.02 * bounds.width(k) * rng.random_range(-1.0..1.0);
                }
                bounds.clip(&mut x);
                z.extend(x);
            }
            z
        })
        .collect()
}

/// Moves batch rows that coincide with earlier rows (or with each other) by
/// a small uniform perturbation.
fn deduplicate(batch: &mut [Vec<f64>], existing: &[Vec<f64>], bounds: &SearchBox, rng: &mut ChaCha8Rng) {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(u, v)| (u - v).abs() <= DUPLICATE_TOL);
    for j in 0..batch.len() {
        for _ in 0..100 {
            let clash = existing.iter().any(|x| close(x, &batch[j])) || batch[..j].iter().any(|x| close(x, &batch[j]));
            if !clash {
                break;
            }
            for (k, v) in batch[j].iter_mut().enumerate() {
                *v += PERTURBATION * bounds.width(k) * rng.random_range(-1.0..1.0);
            }
            bounds.clip(&mut batch[j]);
        }
    }
}

fn evaluate_all(problem: &Problem, xs: &[Vec<f64>], concurrent: bool) -> Result<Vec<Vec<f64>>> {
    if !concurrent || xs.len() < 2 {
        return xs.iter().map(|x| problem.evaluate(x)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = xs.iter().map(|x| s.spawn(move || problem.evaluate(x))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Evaluation("objective panicked".into()))))
            .collect()
    })
}

fn hypervolume(archive: &ParetoArchive, r: &[f64]) -> Result<f64> {
    if archive.dim() != 2 {
        return Ok(f64::NAN);
    }
    hypervolume_2d(archive, [r[0], r[1]])
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Independent seed for a (run, iteration, purpose) triple.
fn derive_seed(seed: u64, iter: u64, purpose: u64) -> u64 {
    let mut z = seed ^ iter.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ purpose.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Problem {
        Problem::new("linear", 2, SearchBox::unit(1), |x| Ok(vec![x[0], 1.0 - x[0]]))
    }

    #[test]
    fn budget_rules() {
        assert_eq!(default_doe_size(5), 30);
        assert_eq!(default_budget(30), 270);
        assert_eq!(default_doe_size(20), 60);
        assert_eq!(default_budget(60), 340);
    }

    #[test]
    fn lhs_strata() {
        let x = latin_hypercube(4, &SearchBox::unit(3), 9);
        for k in 0..3 {
            let mut strata: Vec<usize> = x.iter().map(|r| (r[k] * 4.0).floor() as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, vec![0, 1, 2, 3]);
        }
        assert_eq!(latin_hypercube(1, &SearchBox::unit(2), 0).len(), 1);
    }

    #[test]
    fn doe_only_run() {
        let mut cfg = EngineConfig::new(1, 1, Variant::Poi, 1);
        cfg.eta = 5;
        cfg.max_evals = 5;
        cfg.hv_reference = vec![2.0, 2.0];
        let log = run(&toy(), &cfg).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.evaluations(), 5);
    }

    #[test]
    fn invalid_config_aborts_before_evaluating() {
        let mut cfg = EngineConfig::new(1, 1, Variant::Poi, 1);
        cfg.eta = 1;
        let err = run(&toy(), &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Config(_)));
        assert_eq!(err.log.evaluations(), 0);
    }

    #[test]
    fn failing_objective_keeps_partial_log() {
        let p = Problem::new("boom", 2, SearchBox::unit(1), |x| {
            if x[0] > 0.9 {
                Err(Error::Evaluation("boom".into()))
            } else {
                Ok(vec![x[0], 1.0 - x[0]])
            }
        });
        let mut cfg = EngineConfig::new(1, 1, Variant::Poi, 1);
        cfg.eta = 10;
        cfg.max_evals = 10;
        cfg.hv_reference = vec![2.0, 2.0];
        let err = run(&p, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Evaluation(_)));
    }

    #[test]
    fn duplicates_are_moved() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = SearchBox::unit(2);
        let mut batch = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        deduplicate(&mut batch, &[vec![0.5, 0.5]], &b, &mut rng);
        assert!(batch[0] != vec![0.5, 0.5]);
        assert!(batch[0] != batch[1]);
        assert!(batch.iter().all(|x| b.contains(x)));
    }
}
