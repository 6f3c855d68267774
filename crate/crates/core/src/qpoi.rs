//! Single- and multi-point probability of improvement.
//!
//! A batch of `q` Gaussian predictions improves the archive in one of five
//! senses:
//!
//! * `all`   every point lands in the non-dominated space,
//! * `one`   at least one point does,
//! * `best`  the coordinatewise maximum of the batch does,
//! * `worst` the coordinatewise minimum of the batch does,
//! * `mean`  the average single-point probability.
//!
//! Exact values are computed for two objectives from the stripe
//! decomposition of the non-dominated space and bivariate normal rectangle
//! probabilities. A Monte Carlo estimator covers the same quantities for any
//! shape and serves as an independent check.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch::BatchPrediction;
use crate::error::{Error, Result};
use crate::pareto::{stripes, ParetoArchive, Stripe, StripeSet, INFINITE_REFERENCE};
use crate::prob::{std_norm_cdf, BivariateGaussian};

/// Results this far outside `[0, 1]` are reported as numerical errors.
pub const RESULT_SLACK: f64 = 1e-10;

/// Half-width, in standard deviations, of the box used for stripe pruning.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Single-point PoI; on a batch it is the average over points.
    Poi,
    All,
    One,
    Best,
    Worst,
    Mean,
}

impl Variant {
    pub const VALUES: [Variant; 6] = [
        Variant::Poi,
        Variant::All,
        Variant::One,
        Variant::Best,
        Variant::Worst,
        Variant::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Poi => "poi",
            Variant::All => "all",
            Variant::One => "one",
            Variant::Best => "best",
            Variant::Worst => "worst",
            Variant::Mean => "mean",
        }
    }

    /// Whether the exact formula is limited to batches of two.
    pub fn needs_pair(self) -> bool {
        matches!(self, Variant::All | Variant::One | Variant::Best | Variant::Worst)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("qpoi_").unwrap_or(&key);
        Variant::VALUES
            .iter()
            .copied()
            .find(|v| v.name() == key)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown variant {s:?}; valid options are {{poi, all, one, best, worst, mean}}"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

/// Which acquisition to compute and how.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub variant: Variant,
    pub mode: Mode,
    /// Monte Carlo sample count.
    pub n_sample: usize,
    /// Monte Carlo seed.
    pub seed: u64,
    /// Skip stripes outside the 3-sigma box of the predictive marginals.
    pub truncation: bool,
}

impl AcquisitionConfig {
    pub fn exact(variant: Variant) -> Self {
        Self {
            variant,
            mode: Mode::Exact,
            n_sample: 0,
            seed: 0,
            truncation: false,
        }
    }

    pub fn monte_carlo(variant: Variant, n_sample: usize, seed: u64) -> Self {
        Self {
            variant,
            mode: Mode::MonteCarlo,
            n_sample,
            seed,
            truncation: false,
        }
    }

    pub fn with_truncation(mut self, on: bool) -> Self {
        self.truncation = on;
        self
    }

    /// Checks that the configuration can handle `m` objectives and batches of `q`.
    pub fn validate(&self, m: usize, q: usize) -> Result<()> {
        if q == 0 || m == 0 {
            return Err(Error::config("batch must contain at least one point and objective"));
        }
        match self.mode {
            Mode::Exact => {
                if m != 2 {
                    return Err(Error::config(format!(
                        "exact q-PoI supports 2 objectives, got {m}; use monte_carlo"
                    )));
                }
                if self.variant.needs_pair() && q != 2 {
                    return Err(Error::config(format!(
                        "exact q-PoI {} needs q = 2, got q = {q}",
                        self.variant
                    )));
                }
            }
            Mode::MonteCarlo => {
                if self.n_sample == 0 {
                    return Err(Error::config("n_sample must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// The five batch probabilities of improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpoiValues {
    pub best: f64,
    pub all: f64,
    pub mean: f64,
    pub one: f64,
    pub worst: f64,
}

impl QpoiValues {
    pub fn get(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Best => self.best,
            Variant::All => self.all,
            Variant::Mean | Variant::Poi => self.mean,
            Variant::One => self.one,
            Variant::Worst => self.worst,
        }
    }

    /// Values in the order `best, all, mean, one, worst`, which is
    /// nondecreasing for exact results.
    pub fn chain(&self) -> [f64; 5] {
        [self.best, self.all, self.mean, self.one, self.worst]
    }
}

/// Exact evaluator bound to one archive. The stripe decomposition is built
/// once and reused across batches.
#[derive(Debug, Clone)]
pub struct QpoiEvaluator {
    stripes: StripeSet,
    truncation: bool,
}

impl QpoiEvaluator {
    pub fn new(archive: &ParetoArchive) -> Result<Self> {
        if archive.dim() != 2 {
            return Err(Error::config(format!(
                "exact q-PoI supports 2 objectives, archive has {}",
                archive.dim()
            )));
        }
        Ok(Self {
            stripes: stripes(archive, INFINITE_REFERENCE)?,
            truncation: false,
        })
    }

    pub fn with_truncation(mut self, on: bool) -> Self {
        self.truncation = on;
        self
    }

    pub fn stripes(&self) -> &StripeSet {
        &self.stripes
    }

    fn active(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<&Stripe> {
        if self.truncation {
            self.stripes.iter().filter(|s| s.overlaps(lo, hi)).collect()
        } else {
            self.stripes.iter().collect()
        }
    }

    /// Single-point PoI with independent objectives.
    pub fn poi(&self, mu: &[f64], s: &[f64]) -> Result<f64> {
        if mu.len() != 2 || s.len() != 2 {
            return Err(Error::config("exact PoI needs 2-objective mean and sd"));
        }
        if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "PoI needs finite mean and positive sd, got mu={mu:?}, s={s:?}"
            )));
        }
        let (lo, hi) = sigma_box(mu, s);
        let cdf = |x: f64, i: usize| std_norm_cdf((x - mu[i]) / s[i]);
        let p: f64 = self
            .active(lo, hi)
            .iter()
            .map(|st| {
                (cdf(st.upper[0], 0) - cdf(st.lower[0], 0)) * (cdf(st.upper[1], 1) - cdf(st.lower[1], 1))
            })
            .sum();
        finish(p, "poi")
    }

    /// Exact value of `variant` for `batch`.
    pub fn exact(&self, batch: &BatchPrediction, variant: Variant) -> Result<f64> {
        AcquisitionConfig::exact(variant).validate(batch.objectives(), batch.points())?;
        match variant {
            Variant::Poi | Variant::Mean => self.mean(batch),
            Variant::All => self.all(batch),
            Variant::One => {
                let one = 2.0 * self.mean(batch)? - self.all(batch)?;
                finish(one, "one")
            }
            Variant::Best => self.best(batch),
            Variant::Worst => self.worst(batch),
        }
    }

    /// All five exact values for a two-point batch.
    pub fn exact_values(&self, batch: &BatchPrediction) -> Result<QpoiValues> {
        AcquisitionConfig::exact(Variant::All).validate(batch.objectives(), batch.points())?;
        let mean = self.mean(batch)?;
        let all = self.all(batch)?;
        Ok(QpoiValues {
            best: self.best(batch)?,
            all,
            mean,
            one: finish(2.0 * mean - all, "one")?,
            worst: self.worst(batch)?,
        })
    }

    fn mean(&self, batch: &BatchPrediction) -> Result<f64> {
        let q = batch.points();
        let mut total = 0.0;
        for j in 0..q {
            total += self.poi(&batch.point_mean(j), &batch.point_sd(j))?;
        }
        finish(total / q as f64, "mean")
    }

    fn all(&self, batch: &BatchPrediction) -> Result<f64> {
        let g = pair_gaussians(batch)?;
        let (lo1, hi1) = sigma_box(&batch.point_mean(0), &batch.point_sd(0));
        let (lo2, hi2) = sigma_box(&batch.point_mean(1), &batch.point_sd(1));
        let first = self.active(lo1, hi1);
        let second = self.active(lo2, hi2);
        let mut p = 0.0;
        for a in &first {
            for b in &second {
                let g1 = g[0].rect(a.lower[0], a.upper[0], b.lower[0], b.upper[0]);
                if g1 == 0.0 {
                    continue;
                }
                p += g1 * g[1].rect(a.lower[1], a.upper[1], b.lower[1], b.upper[1]);
            }
        }
        finish(p, "all")
    }

    fn best(&self, batch: &BatchPrediction) -> Result<f64> {
        let g = pair_gaussians(batch)?;
        let (lo, hi) = composite_box(batch, f64::max);
        let p: f64 = self
            .active(lo, hi)
            .iter()
            .map(|st| {
                (0..2)
                    .map(|i| {
                        let (l, u) = (st.lower[i], st.upper[i]);
                        g[i].cdf(u, u) - g[i].cdf(l, l)
                    })
                    .product::<f64>()
            })
            .sum();
        finish(p, "best")
    }

    fn worst(&self, batch: &BatchPrediction) -> Result<f64> {
        let g = pair_gaussians(batch)?;
        let inf = f64::INFINITY;
        let (lo, hi) = composite_box(batch, f64::min);
        let p: f64 = self
            .active(lo, hi)
            .iter()
            .map(|st| {
                (0..2)
                    .map(|i| {
                        let (l, u) = (st.lower[i], st.upper[i]);
                        let gi = &g[i];
                        (gi.cdf(u, inf) + gi.cdf(inf, u))
                            - (gi.cdf(inf, l) + gi.cdf(l, inf))
                            - (gi.cdf(u, u) - gi.cdf(l, l))
                    })
                    .product::<f64>()
            })
            .sum();
        finish(p, "worst")
    }
}

fn sigma_box(mu: &[f64], s: &[f64]) -> ([f64; 2], [f64; 2]) {
    (
        [mu[0] - TRUNCATION_SIGMAS * s[0], mu[1] - TRUNCATION_SIGMAS * s[1]],
        [mu[0] + TRUNCATION_SIGMAS * s[0], mu[1] + TRUNCATION_SIGMAS * s[1]],
    )
}

/// Box of the coordinatewise max (or min) of the batch points.
fn composite_box(batch: &BatchPrediction, pick: fn(f64, f64) -> f64) -> ([f64; 2], [f64; 2]) {
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for i in 0..2 {
        let row_mu = &batch.mean()[i];
        let row_sd = &batch.sd()[i];
        let l = row_mu.iter().zip(row_sd).map(|(m, s)| m - TRUNCATION_SIGMAS * s);
        let h = row_mu.iter().zip(row_sd).map(|(m, s)| m + TRUNCATION_SIGMAS * s);
        lo[i] = l.reduce(pick).unwrap_or(0.0);
        hi[i] = h.reduce(pick).unwrap_or(0.0);
    }
    (lo, hi)
}

fn pair_gaussians(batch: &BatchPrediction) -> Result<[BivariateGaussian; 2]> {
    let make = |i: usize| {
        let c = batch.cov(i);
        let mu = &batch.mean()[i];
        BivariateGaussian::new([mu[0], mu[1]], [[c[0][0], c[0][1]], [c[1][0], c[1][1]]])
            .map_err(|e| Error::numerical(format!("objective {i} covariance: {e}")))
    };
    Ok([make(0)?, make(1)?])
}

fn finish(p: f64, what: &str) -> Result<f64> {
    if !(-RESULT_SLACK..=1.0 + RESULT_SLACK).contains(&p) {
        return Err(Error::numerical(format!("q-PoI {what} = {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Exact single-point PoI of `N(mu, diag(s²))` against `archive`.
pub fn poi_single(mu: &[f64], s: &[f64], archive: &ParetoArchive) -> Result<f64> {
    QpoiEvaluator::new(archive)?.poi(mu, s)
}

/// Exact `variant` for `batch` against `archive`, without stripe pruning.
pub fn qpoi_exact(batch: &BatchPrediction, archive: &ParetoArchive, variant: Variant) -> Result<f64> {
    QpoiEvaluator::new(archive)?.exact(batch, variant)
}

/// All five exact values for a two-point batch.
pub fn qpoi_exact_values(batch: &BatchPrediction, archive: &ParetoArchive) -> Result<QpoiValues> {
    QpoiEvaluator::new(archive)?.exact_values(batch)
}

/// Monte Carlo estimate of the five probabilities.
///
/// Each sample draws one correlated `q`-vector per objective, recomposes the
/// `q` objective vectors and tests them against the archive. Works for any
/// number of objectives and batch size; deterministic for a fixed seed.
pub fn qpoi_monte_carlo(
    batch: &BatchPrediction,
    archive: &ParetoArchive,
    n_sample: usize,
    seed: u64,
) -> Result<QpoiValues> {
    let m = batch.objectives();
    let q = batch.points();
    if n_sample == 0 {
        return Err(Error::config("n_sample must be positive"));
    }
    if archive.dim() != m {
        return Err(Error::config(format!(
            "archive has {} objectives but the batch has {m}",
            archive.dim()
        )));
    }
    let factors: Vec<DMatrix<f64>> = (0..m).map(|i| sqrt_factor(batch.cov(i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; q];
    let mut samples = vec![vec![0.0; m]; q];
    let mut composite_max = vec![0.0; m];
    let mut composite_min = vec![0.0; m];
    let (mut best, mut worst, mut all, mut one, mut mean) = (0u64, 0u64, 0u64, 0u64, 0u64);

    for _ in 0..n_sample {
        for (i, a) in factors.iter().enumerate() {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for (j, point) in samples.iter_mut().enumerate() {
                let mut y = batch.mean()[i][j];
                for (k, zk) in z.iter().enumerate() {
                    y += a[(j, k)] * zk;
                }
                point[i] = y;
            }
        }
        for i in 0..m {
            composite_max[i] = samples.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            composite_min[i] = samples.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
        }
        let improving = samples.iter().filter(|p| archive.is_improved_by(p)).count() as u64;
        best += u64::from(archive.is_improved_by(&composite_max));
        worst += u64::from(archive.is_improved_by(&composite_min));
        all += u64::from(improving == q as u64);
        one += u64::from(improving > 0);
        mean += improving;
    }
    let n = n_sample as f64;
    Ok(QpoiValues {
        best: best as f64 / n,
        all: all as f64 / n,
        mean: mean as f64 / (n * q as f64),
        one: one as f64 / n,
        worst: worst as f64 / n,
    })
}

/// `A` with `A A^T = c`, via the eigendecomposition so that singular
/// covariances (duplicated points) are handled.
fn sqrt_factor(c: &[Vec<f64>]) -> DMatrix<f64> {
    let q = c.len();
    let m = DMatrix::from_fn(q, q, |a, b| c[a][b]);
    let eig = SymmetricEigen::new(m);
    let scales = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&scales)
}

/// Evaluates the configured acquisition.
pub fn evaluate(config: &AcquisitionConfig, batch: &BatchPrediction, archive: &ParetoArchive) -> Result<f64> {
    config.validate(batch.objectives(), batch.points())?;
    match config.mode {
        Mode::Exact => QpoiEvaluator::new(archive)?
            .with_truncation(config.truncation)
            .exact(batch, config.variant),
        Mode::MonteCarlo => Ok(qpoi_monte_carlo(batch, archive, config.n_sample, config.seed)?.get(config.variant)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_archive() -> ParetoArchive {
        ParetoArchive::from_points(2, [[1.0, 2.5], [2.0, 1.5], [3.0, 1.0]])
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("best".parse::<Variant>().unwrap(), Variant::Best);
        assert_eq!("qpoi_all".parse::<Variant>().unwrap(), Variant::All);
        let err = "qpoi_max".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("{poi, all, one, best, worst, mean}"), "{err}");
    }

    #[test]
    fn poi_extremes() {
        let a = ParetoArchive::from_points(2, [[1.0, 1.0]]);
        assert!(poi_single(&[10.0, 10.0], &[0.01, 0.01], &a).unwrap() <= 1e-12);
        assert!(poi_single(&[0.0, 0.0], &[0.01, 0.01], &a).unwrap() >= 1.0 - 1e-12);
        assert!(matches!(poi_single(&[0.0, 0.0], &[0.0, 1.0], &a), Err(Error::Domain(_))));
    }

    #[test]
    fn empty_archive_means_certain_improvement() {
        let b = BatchPrediction::pair([[0.0, 1.0], [2.0, 3.0]], [[1.0, 1.0], [1.0, 1.0]], [0.3, 0.3]).unwrap();
        let v = qpoi_exact_values(&b, &ParetoArchive::new(2)).unwrap();
        for p in v.chain() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_validation() {
        let a = fig_archive();
        let b3 = BatchPrediction::independent(vec![vec![0.0; 3], vec![0.0; 3]], vec![vec![1.0; 3], vec![1.0; 3]])
            .unwrap();
        assert!(matches!(qpoi_exact(&b3, &a, Variant::All), Err(Error::Config(_))));
        assert!(qpoi_exact(&b3, &a, Variant::Mean).is_ok());
        let m3 = BatchPrediction::independent(vec![vec![0.0; 2]; 3], vec![vec![1.0; 2]; 3]).unwrap();
        assert!(matches!(qpoi_exact(&m3, &a, Variant::Best), Err(Error::Config(_))));
    }

    #[test]
    fn monte_carlo_single_sample_deep_improvement() {
        let b = BatchPrediction::pair([[-5.0, -4.0], [-5.0, -6.0]], [[1e-9, 1e-9], [1e-9, 1e-9]], [0.0, 0.0]).unwrap();
        let v = qpoi_monte_carlo(&b, &fig_archive(), 1, 3).unwrap();
        assert_eq!(v.chain(), [1.0; 5]);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let b = BatchPrediction::pair([[1.5, 2.5], [2.7, 1.7]], [[1.0, 3.0], [2.0, 2.0]], [0.5, -0.5]).unwrap();
        let a = qpoi_monte_carlo(&b, &fig_archive(), 1000, 42).unwrap();
        assert_eq!(a, qpoi_monte_carlo(&b, &fig_archive(), 1000, 42).unwrap());
        assert_ne!(a, qpoi_monte_carlo(&b, &fig_archive(), 1000, 43).unwrap());
        let c = a.chain();
        assert!(c.windows(2).all(|w| w[0] <= w[1]), "{c:?}");
    }

    #[test]
    fn truncation_changes_little_for_accuracy_configs() {
        let b = BatchPrediction::pair([[1.5, 2.5], [2.7, 1.7]], [[0.3, 0.4], [0.2, 0.3]], [0.5, -0.5]).unwrap();
        let full = QpoiEvaluator::new(&fig_archive()).unwrap();
        let cut = full.clone().with_truncation(true);
        for v in Variant::VALUES {
            let a = full.exact(&b, v).unwrap();
            let c = cut.exact(&b, v).unwrap();
            assert!((a - c).abs() < 1e-2, "{v}: {a} vs {c}");
        }
    }
}
