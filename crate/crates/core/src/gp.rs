//! Gaussian process regression with a squared-exponential kernel and a
//! constant trend (ordinary Kriging), fitted by maximum likelihood.
//!
//! The process variance is profiled out of the likelihood in closed form, so
//! the numerical search runs over the log length-scales only.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::BatchPrediction;
use crate::error::{Error, Result};
use crate::optim::SearchBox;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Length-scales are searched in `[THETA_MIN, THETA_MAX] * box width`.
pub const THETA_MIN: f64 = 1e-3;
pub const THETA_MAX: f64 = 1e3;
/// The process variance is kept in `[SIGMA2_MIN, SIGMA2_MAX] * var(y)`.
pub const SIGMA2_MIN: f64 = 1e-6;
pub const SIGMA2_MAX: f64 = 1e6;
/// Relative jitter added to the correlation diagonal, escalated tenfold on
/// Cholesky failure up to `JITTER_MAX`.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;
/// Two inputs closer than this in every coordinate are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-10;
/// Smallest squared Cholesky pivot of the correlation matrix accepted by
/// the length-scale search. Below it the matrix is singular to within the
/// jitter and the mean no longer interpolates the data.
pub const PIVOT_FLOOR: f64 = 1e-8;

/// `k(x, x') = sigma2 * exp(-sum_i (x_i - x'_i)^2 / (2 theta_i^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub sigma2: f64,
    pub theta: Vec<f64>,
}

impl Kernel {
    pub fn new(sigma2: f64, theta: Vec<f64>) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("kernel variance must be positive, got {sigma2}")));
        }
        if theta.is_empty() || theta.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::domain(format!("length-scales must be positive, got {theta:?}")));
        }
        Ok(Self { sigma2, theta })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.sigma2 * correlation(&inv_two_theta_sq(&self.theta), a, b)
    }
}

fn inv_two_theta_sq(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| 0.5 / (t * t)).collect()
}

#[inline]
fn correlation(scale: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((x, y), c) in a.iter().zip(b).zip(scale) {
        let d = x - y;
        s += c * d * d;
    }
    (-s).exp()
}

/// Hyperparameter search settings for [`fit_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Random starting points for the local search.
    pub restarts: usize,
    /// How many of the best starting points (by likelihood) are refined by
    /// Nelder–Mead; `None` refines all of them.
    pub refine: Option<usize>,
    /// Likelihood evaluations per refined start.
    pub local_evals: usize,
    pub seed: u64,
    /// Length-scales tried first (e.g. the previous fit).
    pub warm_start: Option<Vec<f64>>,
    pub jitter_start: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            refine: None,
            local_evals: 200,
            seed: 0,
            warm_start: None,
            jitter_start: JITTER_START,
        }
    }
}

/// A fitted GP for one objective. Immutable once built.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    bounds: SearchBox,
    kernel: Kernel,
    scale: Vec<f64>,
    /// Lower Cholesky factor of `R + jitter * I`, where `K = sigma2 * R`.
    chol: DMatrix<f64>,
    /// `(R + jitter I)^{-1} (y - trend)`.
    alpha: Vec<f64>,
    trend: f64,
    jitter: f64,
    log_likelihood: f64,
}

/// Posterior of one objective at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
    /// The query lies outside the model's search box.
    pub outside_box: bool,
}

impl SurrogateModel {
    /// Builds a model with fixed length-scales; the trend and the process
    /// variance take their maximum-likelihood values.
    pub fn with_length_scales(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox, theta: &[f64]) -> Result<Self> {
        validate_data(x, y, bounds)?;
        let state = Likelihood::new(x, y, bounds).evaluate(theta, JITTER_START)?;
        Ok(Self::from_state(x, y, bounds, theta, state))
    }

    /// Builds a model with fully specified hyperparameters (no estimation of
    /// `sigma2`; the trend is still estimated).
    pub fn with_kernel(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox, kernel: Kernel) -> Result<Self> {
        validate_data(x, y, bounds)?;
        if kernel.theta.len() != bounds.dim() {
            return Err(Error::config("kernel dimension does not match the data"));
        }
        let lik = Likelihood::new(x, y, bounds);
        let mut state = lik.evaluate(&kernel.theta, JITTER_START)?;
        state.sigma2 = kernel.sigma2;
        state.log_likelihood = state.log_likelihood_at(kernel.sigma2, y.len());
        Ok(Self::from_state(x, y, bounds, &kernel.theta, state))
    }

    fn from_state(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox, theta: &[f64], mut s: FitState) -> Self {
        let scale = inv_two_theta_sq(theta);
        refine_alpha(x, y, &scale, &s.chol, s.trend, &mut s.alpha);
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            bounds: bounds.clone(),
            kernel: Kernel {
                sigma2: s.sigma2,
                theta: theta.to_vec(),
            },
            scale,
            chol: s.chol,
            alpha: s.alpha,
            trend: s.trend,
            jitter: s.jitter,
            log_likelihood: s.log_likelihood,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn trend(&self) -> f64 {
        self.trend
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn outputs(&self) -> &[f64] {
        &self.y
    }

    pub fn bounds(&self) -> &SearchBox {
        &self.bounds
    }

    /// Lower Cholesky factor `L` with `L L^T = K + jitter * sigma2 * I`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        &self.chol * self.kernel.sigma2.sqrt()
    }

    /// `K + jitter * sigma2 * I` assembled directly from the kernel.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.x.len();
        DMatrix::from_fn(n, n, |i, j| {
            let k = self.kernel.sigma2 * correlation(&self.scale, &self.x[i], &self.x[j]);
            if i == j {
                k + self.jitter * self.kernel.sigma2
            } else {
                k
            }
        })
    }

    fn corr_vector(&self, x: &[f64]) -> Vec<f64> {
        self.x.iter().map(|xi| correlation(&self.scale, x, xi)).collect()
    }

    pub fn posterior(&self, x: &[f64]) -> Posterior {
        let r = self.corr_vector(x);
        let mean = self.trend + dot(&r, &self.alpha);
        let mut v = r;
        forward_solve(&self.chol, &mut v);
        let var = (self.kernel.sigma2 * (1.0 - dot(&v, &v))).clamp(0.0, self.kernel.sigma2);
        Posterior {
            mean,
            var,
            outside_box: !self.bounds.contains(x),
        }
    }
}

/// Posterior mean and variance of one model at `x`.
pub fn posterior_point(model: &SurrogateModel, x: &[f64]) -> Posterior {
    model.posterior(x)
}

/// Joint posterior of `m` independent models at the `q` rows of `xq`.
pub fn posterior_batch(models: &[SurrogateModel], xq: &[Vec<f64>]) -> Result<BatchPrediction> {
    let first = models
        .first()
        .ok_or_else(|| Error::config("posterior_batch needs at least one model"))?;
    if xq.is_empty() {
        return Err(Error::config("posterior_batch needs at least one candidate"));
    }
    let d = first.bounds.dim();
    if xq.iter().any(|x| x.len() != d) {
        return Err(Error::config(format!("candidates must have dimension {d}")));
    }
    for (i, m) in models.iter().enumerate().skip(1) {
        if m.x != first.x {
            return Err(Error::config(format!(
                "model {i} was trained on different inputs than model 0"
            )));
        }
    }
    let q = xq.len();
    let mut means = Vec::with_capacity(models.len());
    let mut covs = Vec::with_capacity(models.len());
    for model in models {
        let s2 = model.kernel.sigma2;
        let mut mean = Vec::with_capacity(q);
        let mut solved = Vec::with_capacity(q);
        for x in xq {
            let r = model.corr_vector(x);
            mean.push(model.trend + dot(&r, &model.alpha));
            let mut v = r;
            forward_solve(&model.chol, &mut v);
            solved.push(v);
        }
        let mut cov = vec![vec![0.0; q]; q];
        for a in 0..q {
            let diag = (s2 * (1.0 - dot(&solved[a], &solved[a]))).clamp(0.0, s2);
            cov[a][a] = diag;
            for b in 0..a {
                let prior = correlation(&model.scale, &xq[a], &xq[b]);
                let c = s2 * (prior - dot(&solved[a], &solved[b]));
                cov[a][b] = c;
                cov[b][a] = c;
            }
        }
        means.push(mean);
        covs.push(cov);
    }
    let scales: Vec<f64> = models.iter().map(|m| m.kernel.sigma2).collect();
    BatchPrediction::with_scales(means, covs, Some(&scales))
}

/// Fits a model with default search settings.
pub fn fit(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox) -> Result<SurrogateModel> {
    fit_with(x, y, bounds, &FitOptions::default())
}

/// Maximum-likelihood fit: random multi-start in log length-scale space,
/// each start refined by bounded Nelder–Mead.
pub fn fit_with(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox, opts: &FitOptions) -> Result<SurrogateModel> {
    validate_data(x, y, bounds)?;
    let d = bounds.dim();
    let lik = Likelihood::new(x, y, bounds);
    let lo: Vec<f64> = (0..d).map(|i| (THETA_MIN * bounds.width(i)).ln()).collect();
    let hi: Vec<f64> = (0..d).map(|i| (THETA_MAX * bounds.width(i)).ln()).collect();
    // Random starts are drawn from the central part of the range, where the
    // correlation matrix is neither diagonal nor numerically singular.
    let start_lo: Vec<f64> = (0..d).map(|i| (1e-2 * bounds.width(i)).ln()).collect();
    let start_hi: Vec<f64> = (0..d).map(|i| (1e1 * bounds.width(i)).ln()).collect();

    let jitter0 = opts.jitter_start;
    let objective = |log_theta: &[f64]| -> f64 {
        let theta: Vec<f64> = log_theta.iter().map(|v| v.exp()).collect();
        match lik.evaluate(&theta, jitter0) {
            Ok(s) if s.log_likelihood.is_finite() && s.min_pivot >= PIVOT_FLOOR => -s.log_likelihood,
            // Ranked behind every admissible point but still pointing
            // towards better conditioning.
            Ok(s) if s.log_likelihood.is_finite() => 1e12 + (PIVOT_FLOOR / s.min_pivot.max(1e-300)).ln(),
            _ => f64::INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
    if let Some(w) = &opts.warm_start {
        if w.len() == d && w.iter().all(|t| *t > 0.0) {
            let p: Vec<f64> = w.iter().zip(lo.iter().zip(&hi)).map(|(t, (l, h))| t.ln().clamp(*l, *h)).collect();
            let f = objective(&p);
            starts.push((p, f));
        }
    }
    let warm = starts.len();
    for _ in 0..opts.restarts {
        let p: Vec<f64> = (0..d).map(|i| rng.random_range(start_lo[i]..start_hi[i])).collect();
        let f = objective(&p);
        starts.push((p, f));
    }
    if starts.is_empty() {
        let p: Vec<f64> = (0..d).map(|i| 0.5 * (start_lo[i] + start_hi[i])).collect();
        let f = objective(&p);
        starts.push((p, f));
    }
    // Keep the warm start, then the best random starts.
    let mut random: Vec<(Vec<f64>, f64)> = starts.split_off(warm);
    random.sort_by(|a, b| a.1.total_cmp(&b.1));
    let keep = opts.refine.unwrap_or(random.len()).min(random.len());
    starts.extend(random.into_iter().take(keep.max(usize::from(warm == 0))));

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (p, f) in starts {
        let (p, f) = nelder_mead(&objective, p, f, &lo, &hi, opts.local_evals);
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((p, f));
        }
    }
    let (log_theta, _) = best.expect("at least one start");
    let theta: Vec<f64> = log_theta.iter().map(|v| v.exp()).collect();
    let state = lik.evaluate(&theta, jitter0)?;
    Ok(SurrogateModel::from_state(x, y, bounds, &theta, state))
}

/// Profiled log-likelihood of the data at length-scales `theta`.
pub fn profile_log_likelihood(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox, theta: &[f64]) -> Result<f64> {
    validate_data(x, y, bounds)?;
    Ok(Likelihood::new(x, y, bounds).evaluate(theta, JITTER_START)?.log_likelihood)
}

fn validate_data(x: &[Vec<f64>], y: &[f64], bounds: &SearchBox) -> Result<()> {
    let n = x.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 training points, got {n}")));
    }
    if y.len() != n {
        return Err(Error::config(format!("{n} inputs but {} outputs", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("training outputs must be finite"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != bounds.dim() {
            return Err(Error::config(format!("training row {i} has wrong dimension")));
        }
        if !bounds.contains(row) {
            return Err(Error::domain(format!("training row {i} lies outside the search box")));
        }
    }
    for i in 0..n {
        for j in 0..i {
            if x[i].iter().zip(&x[j]).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL) {
                return Err(Error::DuplicateRows { first: j, second: i });
            }
        }
    }
    Ok(())
}

struct FitState {
    chol: DMatrix<f64>,
    alpha: Vec<f64>,
    trend: f64,
    sigma2: f64,
    jitter: f64,
    log_det: f64,
    quad: f64,
    log_likelihood: f64,
    /// Smallest squared diagonal entry of the factor.
    min_pivot: f64,
}

impl FitState {
    fn log_likelihood_at(&self, sigma2: f64, n: usize) -> f64 {
        -0.5 * (n as f64 * (LN_2PI + sigma2.ln()) + self.log_det + self.quad / sigma2)
    }
}

struct Likelihood<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    var_y: f64,
}

impl<'a> Likelihood<'a> {
    fn new(x: &'a [Vec<f64>], y: &'a [f64], _bounds: &SearchBox) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            x,
            y,
            var_y: var.max(1e-12),
        }
    }

    fn evaluate(&self, theta: &[f64], jitter_start: f64) -> Result<FitState> {
        let n = self.x.len();
        let scale = inv_two_theta_sq(theta);
        let mut base = DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            for i in (j + 1)..n {
                let r = correlation(&scale, &self.x[i], &self.x[j]);
                base[(i, j)] = r;
                base[(j, i)] = r;
            }
        }
        let mut jitter = jitter_start.max(JITTER_START);
        let chol = loop {
            let mut r = base.clone();
            for i in 0..n {
                r[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::<f64, Dyn>::new(r) {
                break c;
            }
            jitter *= 10.0;
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::numerical(format!(
                    "Cholesky failed with jitter up to {JITTER_MAX:e} (theta = {theta:?})"
                )));
            }
        };
        let ones = DVector::from_element(n, 1.0);
        let yv = DVector::from_column_slice(self.y);
        let r_inv_one = chol.solve(&ones);
        let r_inv_y = chol.solve(&yv);
        let trend = r_inv_y.sum() / r_inv_one.sum();
        let resid = &yv - &ones * trend;
        let alpha = chol.solve(&resid);
        let quad = resid.dot(&alpha).max(0.0);
        let l = chol.unpack();
        let log_det = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        let sigma2 = (quad / n as f64).clamp(SIGMA2_MIN * self.var_y, SIGMA2_MAX * self.var_y);
        let mut state = FitState {
            chol: l,
            alpha: alpha.iter().copied().collect(),
            trend,
            sigma2,
            jitter,
            log_det,
            quad,
            log_likelihood: 0.0,
            min_pivot,
        };
        state.log_likelihood = state.log_likelihood_at(sigma2, n);
        Ok(state)
    }
}

/// Nelder–Mead minimization with coordinates clamped into `[lo, hi]`.
fn nelder_mead<F>(f: &F, start: Vec<f64>, f_start: f64, lo: &[f64], hi: &[f64], max_evals: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    let clamp = |p: &mut Vec<f64>| {
        for (v, (l, h)) in p.iter_mut().zip(lo.iter().zip(hi)) {
            *v = v.clamp(*l, *h);
        }
    };
    let mut simplex = vec![(start.clone(), f_start)];
    let mut evals = 0;
    for i in 0..d {
        let mut p = start.clone();
        let step = 0.1 * (hi[i] - lo[i]);
        p[i] += if p[i] + step <= hi[i] { step } else { -step };
        clamp(&mut p);
        let v = f(&p);
        evals += 1;
        simplex.push((p, v));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[d].1);
        if best.is_finite() && (worst - best).abs() <= 1e-9 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(p, _)| p[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..d).map(|k| centroid[k] + t * (simplex[d].0[k] - centroid[k])).collect();
            clamp(&mut p);
            p
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[d].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = anchor.iter().zip(&item.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    clamp(&mut p);
                    item.1 = f(&p);
                    item.0 = p;
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Iterative refinement of `alpha` towards `R^{-1} (y - trend)` with the
/// un-jittered `R`, preconditioned by the jittered factor. The jitter then
/// only stabilizes the factorization and the mean interpolates the data.
fn refine_alpha(x: &[Vec<f64>], y: &[f64], scale: &[f64], chol: &DMatrix<f64>, trend: f64, alpha: &mut [f64]) {
    let n = y.len();
    let residual = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] - trend - (0..n).map(|j| correlation(scale, &x[i], &x[j]) * a[j]).sum::<f64>())
            .collect()
    };
    let size = |r: &[f64]| r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut r = residual(alpha);
    for _ in 0..REFINE_STEPS {
        let mut delta = r.clone();
        forward_solve(chol, &mut delta);
        backward_solve_transposed(chol, &mut delta);
        let candidate: Vec<f64> = alpha.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let next = residual(&candidate);
        if !(size(&next) < size(&r)) {
            break;
        }
        alpha.copy_from_slice(&candidate);
        r = next;
    }
}

const REFINE_STEPS: usize = 20;

/// Solves `L^T v = b` in place for column-major lower-triangular `L`.
fn backward_solve_transposed(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for j in (0..n).rev() {
        let col = &data[j * n..(j + 1) * n];
        let s: f64 = b[j + 1..].iter().zip(&col[j + 1..]).map(|(bi, li)| bi * li).sum();
        b[j] = (b[j] - s) / col[j];
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `L v = b` in place for column-major lower-triangular `L`.
fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let v = b[j] / col[j];
        b[j] = v;
        if v != 0.0 {
            for (bi, li) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= li * v;
            }
        }
    }
}
