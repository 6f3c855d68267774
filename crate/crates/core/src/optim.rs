//! Derivative-free maximization over a box with a compact CMA-ES.
//!
//! The search runs in coordinates normalized to the unit cube. Candidates
//! falling outside are resampled a few times and then clipped, and the
//! clipped point is what gets evaluated and fed back into the update.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned search region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::domain("search box bounds must be non-empty and equal length"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::domain(format!(
                    "search box dimension {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// The box repeated `q` times, for optimizing over concatenated batches.
    pub fn replicate(&self, q: usize) -> Self {
        Self {
            lower: self.lower.repeat(q),
            upper: self.upper.repeat(q),
        }
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| (v - self.lower[i]) / self.width(i))
            .collect()
    }

    fn from_unit(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, v)| (self.lower[i] + v * self.width(i)).clamp(self.lower[i], self.upper[i]))
            .collect()
    }
}

/// Evaluation budget for [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBudget {
    /// Total objective evaluations across the initial run and all restarts.
    pub max_evals: usize,
    /// Additional independent runs after the first.
    pub restarts: usize,
    pub seed: u64,
    /// Generation cap per run.
    pub max_generations: usize,
    /// Population size; `None` uses `4 + floor(3 ln n)`.
    pub population: Option<usize>,
    /// Uniform draws screened before each run; the best one becomes the
    /// starting mean. Counted against `max_evals`.
    #[serde(default)]
    pub screening: usize,
}

impl OptimizerBudget {
    /// 2000 generations per run and one restart.
    pub fn standard(dim: usize, seed: u64) -> Self {
        let lambda = default_population(dim);
        Self {
            max_evals: 2 * 2000 * lambda,
            restarts: 1,
            seed,
            max_generations: 2000,
            population: None,
            screening: 10 * lambda,
        }
    }

    pub fn with_max_evals(max_evals: usize, seed: u64) -> Self {
        Self {
            max_evals,
            restarts: 1,
            seed,
            max_generations: 2000,
            population: None,
            screening: 0,
        }
    }
}

pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Incumbent value after each generation.
    pub trace: Vec<f64>,
}

/// Maximizes `objective` over `bounds`.
///
/// Deterministic for a fixed seed. Ties keep the earlier incumbent.
pub fn maximize<F>(mut objective: F, bounds: &SearchBox, budget: &OptimizerBudget) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    run(
        |xs: &[Vec<f64>]| xs.iter().map(|x| objective(x)).collect(),
        bounds,
        budget,
        &[],
    )
}

/// Like [`maximize`], but evaluates each population on `threads` scoped
/// threads. The result is identical to the sequential one.
pub fn maximize_reentrant<F>(
    objective: F,
    bounds: &SearchBox,
    budget: &OptimizerBudget,
    threads: usize,
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    maximize_from(objective, bounds, budget, threads, &[])
}

/// Like [`maximize_reentrant`], with candidate starting points. The
/// candidates are evaluated first (and counted against the budget); the
/// first run starts from the best of them and the screening draws.
pub fn maximize_from<F>(
    objective: F,
    bounds: &SearchBox,
    budget: &OptimizerBudget,
    threads: usize,
    starts: &[Vec<f64>],
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let threads = threads.max(1);
    run(
        |xs: &[Vec<f64>]| {
            if threads == 1 || xs.len() < 2 {
                return xs.iter().map(|x| objective(x)).collect();
            }
            let chunk = xs.len().div_ceil(threads);
            let objective = &objective;
            std::thread::scope(|s| {
                let handles: Vec<_> = xs
                    .chunks(chunk)
                    .map(|part| s.spawn(move || part.iter().map(|x| objective(x)).collect::<Result<Vec<_>>>()))
                    .collect();
                let mut out = Vec::with_capacity(xs.len());
                for h in handles {
                    out.extend(h.join().expect("objective thread panicked")?);
                }
                Ok(out)
            })
        },
        bounds,
        budget,
        starts,
    )
}

fn run<E>(mut eval_batch: E, bounds: &SearchBox, budget: &OptimizerBudget, starts: &[Vec<f64>]) -> Result<OptimResult>
where
    E: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    let n = bounds.dim();
    let lambda = budget.population.unwrap_or_else(|| default_population(n)).max(2);
    if budget.max_evals < lambda {
        return Err(Error::config(format!(
            "max_evals {} is smaller than the population {lambda}",
            budget.max_evals
        )));
    }
    if starts.iter().any(|x| x.len() != n) {
        return Err(Error::config(format!("starting points must have dimension {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    let mut used = 0;
    let mut evaluate = |xs: &[Vec<f64>], best: &mut Option<(Vec<f64>, f64)>, used: &mut usize| -> Result<Vec<f64>> {
        let values = eval_batch(xs).map_err(|e| match e {
            Error::Evaluation(msg) => Error::Evaluation(format!("during acquisition search: {msg}")),
            other => other,
        })?;
        *used += xs.len();
        let fitness: Vec<f64> = values
            .iter()
            .map(|v| if v.is_nan() { f64::NEG_INFINITY } else { *v })
            .collect();
        for (x, &v) in xs.iter().zip(&fitness) {
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                *best = Some((x.clone(), v));
            }
        }
        Ok(fitness)
    };

    for run_index in 0..=budget.restarts {
        if used + lambda > budget.max_evals {
            break;
        }
        let mut pool: Vec<Vec<f64>> = if run_index == 0 {
            starts
                .iter()
                .map(|x| {
                    let mut x = x.clone();
                    bounds.clip(&mut x);
                    x
                })
                .collect()
        } else {
            Vec::new()
        };
        let room = budget.max_evals - used - lambda;
        pool.truncate(room);
        let draws = budget.screening.min(room - pool.len());
        pool.extend((0..draws).map(|_| bounds.from_unit(&(0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>())));
        let start = if pool.is_empty() {
            (0..n).map(|_| rng.random::<f64>()).collect()
        } else {
            let fitness = evaluate(&pool, &mut best, &mut used)?;
            let mut k = 0;
            for (i, v) in fitness.iter().enumerate() {
                if *v > fitness[k] {
                    k = i;
                }
            }
            bounds.to_unit(&pool[k])
        };
        let mut es = Cmaes::new(start, 0.3, lambda);
        for _ in 0..budget.max_generations {
            if used + lambda > budget.max_evals {
                break;
            }
            let unit = es.ask(&mut rng);
            let xs: Vec<Vec<f64>> = unit.iter().map(|z| bounds.from_unit(z)).collect();
            let fitness = evaluate(&xs, &mut best, &mut used)?;
            trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
            let unit_clipped: Vec<Vec<f64>> = xs.iter().map(|x| bounds.to_unit(x)).collect();
            if es.tell(&unit_clipped, &fitness) {
                break;
            }
        }
    }
    let (argmax, value) = best.ok_or_else(|| Error::config("optimizer budget allowed no evaluations"))?;
    Ok(OptimResult {
        argmax,
        value,
        evaluations: used,
        trace,
    })
}

/// State of one CMA-ES run in unit-cube coordinates (maximization).
struct Cmaes {
    n: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
    history: Vec<f64>,
}

impl Cmaes {
    fn new(start: Vec<f64>, sigma: f64, lambda: usize) -> Self {
        let n = start.len();
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        Self {
            n,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n: nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf)),
            mean: DVector::from_vec(start),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            history: Vec::new(),
        }
    }

    fn ask(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        const RESAMPLES: usize = 10;
        (0..self.lambda)
            .map(|_| {
                let mut x = self.sample(rng);
                for _ in 0..RESAMPLES {
                    if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                        break;
                    }
                    x = self.sample(rng);
                }
                x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
            })
            .collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &self.basis * z.component_mul(&self.scales);
        (&self.mean + y * self.sigma).iter().copied().collect()
    }

    /// Updates the distribution. Returns true when the run should stop.
    fn tell(&mut self, xs: &[Vec<f64>], fitness: &[f64]) -> bool {
        let n = self.n as f64;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        // Descending fitness; stable so equal values keep sampling order.
        order.sort_by(|&a, &b| fitness[b].partial_cmp(&fitness[a]).unwrap_or(std::cmp::Ordering::Equal));

        let old_mean = self.mean.clone();
        let steps: Vec<DVector<f64>> = order
            .iter()
            .take(self.weights.len())
            .map(|&i| (DVector::from_column_slice(&xs[i]) - &old_mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(self.n);
        for (w, y) in self.weights.iter().zip(&steps) {
            y_w += y * *w;
        }
        self.mean = &old_mean + &y_w * self.sigma;

        // C^{-1/2} y_w
        let inv_sqrt = &self.basis
            * DMatrix::from_diagonal(&self.scales.map(|s| 1.0 / s.max(1e-300)))
            * self.basis.transpose();
        let ps_coef = (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();
        self.p_sigma = &self.p_sigma * (1.0 - self.c_sigma) + inv_sqrt * &y_w * ps_coef;
        self.generation += 1;
        let ps_norm = self.p_sigma.norm();
        let denom = (1.0 - (1.0 - self.c_sigma).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = if ps_norm / denom / self.chi_n < 1.4 + 2.0 / (n + 1.0) {
            1.0
        } else {
            0.0
        };
        let pc_coef = (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt();
        self.p_c = &self.p_c * (1.0 - self.c_c) + &y_w * (h_sigma * pc_coef);

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, y) in self.weights.iter().zip(&steps) {
            rank_mu += y * y.transpose() * *w;
        }
        let delta_h = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c);
        self.cov = &self.cov * (1.0 - self.c_1 - self.c_mu + self.c_1 * delta_h)
            + &self.p_c * self.p_c.transpose() * self.c_1
            + rank_mu * self.c_mu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        // Flat fitness: widen the search instead of converging on a plateau.
        let k = ((0.7 * self.lambda as f64).ceil() as usize).clamp(1, order.len()) - 1;
        if fitness[order[0]] == fitness[order[k]] {
            self.sigma *= (0.2 + self.c_sigma / self.d_sigma).exp();
        }
        self.sigma = self.sigma.min(1.0);

        let eig = SymmetricEigen::new(self.cov.clone());
        self.basis = eig.eigenvectors;
        self.scales = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());

        self.should_stop(fitness[order[0]], fitness[order[order.len() - 1]])
    }

    fn should_stop(&mut self, best: f64, worst: f64) -> bool {
        self.history.push(best);
        let window = 10 + (30.0 * self.n as f64 / self.lambda as f64).ceil() as usize;
        if self.history.len() >= window {
            let recent = &self.history[self.history.len() - window..];
            let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(best);
            let lo = recent.iter().copied().fold(f64::INFINITY, f64::min).min(worst);
            if hi.is_finite() && lo.is_finite() && hi - lo < 1e-12 {
                return true;
            }
        }
        let spread = self.sigma * self.scales.max();
        if spread < 1e-11 {
            return true;
        }
        let cond = self.scales.max() / self.scales.min().max(1e-300);
        cond * cond > 1e14
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_maximum_at_origin() {
        let bounds = SearchBox::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let budget = OptimizerBudget::with_max_evals(2000, 7);
        let res = maximize(|x| Ok(-x.iter().map(|v| v * v).sum::<f64>()), &bounds, &budget).unwrap();
        assert!(res.argmax.iter().all(|v| v.abs() < 1e-2), "{:?}", res.argmax);
        assert!(res.value >= -1e-3);
        assert!(res.evaluations <= 2000);
    }

    #[test]
    fn constant_objective() {
        let bounds = SearchBox::unit(3);
        let res = maximize(|_| Ok(0.5), &bounds, &OptimizerBudget::with_max_evals(200, 1)).unwrap();
        assert_eq!(res.value, 0.5);
        assert!(bounds.contains(&res.argmax));
    }

    #[test]
    fn boundary_optimum_is_feasible() {
        let bounds = SearchBox::new(vec![0.0; 3], vec![2.0; 3]).unwrap();
        let res = maximize(|x| Ok(x.iter().sum()), &bounds, &OptimizerBudget::with_max_evals(3000, 3)).unwrap();
        assert!(bounds.contains(&res.argmax));
        assert!(res.value > 5.99);
    }

    #[test]
    fn incumbent_trace_is_monotone_and_reproducible() {
        let bounds = SearchBox::new(vec![-3.0; 5], vec![3.0; 5]).unwrap();
        let f = |x: &[f64]| Ok(-x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.5).powi(2)).sum::<f64>());
        let budget = OptimizerBudget::with_max_evals(4000, 11);
        let a = maximize(f, &bounds, &budget).unwrap();
        let b = maximize(f, &bounds, &budget).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        let c = maximize_reentrant(f, &bounds, &budget, 3).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn objective_errors_propagate() {
        let bounds = SearchBox::unit(2);
        let err = maximize(
            |_| Err(Error::Evaluation("boom".into())),
            &bounds,
            &OptimizerBudget::with_max_evals(100, 0),
        )
        .unwrap_err();
        assert!(err.to_string().contains("boom"));
    }

    #[test]
    fn budget_smaller_than_population_is_rejected() {
        let bounds = SearchBox::unit(4);
        assert!(maximize(|_| Ok(0.0), &bounds, &OptimizerBudget::with_max_evals(2, 0)).is_err());
    }

    #[test]
    fn search_box_validation() {
        assert!(SearchBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(SearchBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SearchBox::new(vec![f64::NEG_INFINITY], vec![0.0]).is_err());
        let b = SearchBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap().replicate(2);
        assert_eq!(b.lower(), &[0.0, -1.0, 0.0, -1.0]);
    }
}
