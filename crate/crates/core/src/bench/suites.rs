//! Self-checks runnable from the command line.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::problems::{synthetic_front, FrontKind};
use super::speed::{speed_batch, SPEED_RADIUS};
use crate::batch::BatchPrediction;
use crate::error::{Error, Result};
use crate::pareto::ParetoArchive;
use crate::prob::{gamma_rect, orthant_closed_form, BivariateGaussian};
use crate::qpoi::{qpoi_monte_carlo, QpoiEvaluator, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Qpoi,
    Ordering,
    Mc,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kernels" => Ok(Suite::Kernels),
            "qpoi" => Ok(Suite::Qpoi),
            "ordering" => Ok(Suite::Ordering),
            "mc" => Ok(Suite::Mc),
            _ => Err(Error::config(format!(
                "unknown suite {s:?}; valid options are {{kernels, qpoi, ordering, mc}}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}: {}", self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let (name, checks) = match suite {
        Suite::Kernels => ("kernels", kernel_checks()?),
        Suite::Qpoi => ("qpoi", qpoi_checks()?),
        Suite::Ordering => ("ordering", ordering_checks(500, 7)?),
        Suite::Mc => ("mc", mc_checks()?),
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        checks,
    })
}

/// Composite Simpson rule for the bivariate normal density over a finite
/// rectangle, `n` (even) panels per side.
pub fn simpson_rect(a: f64, b: f64, c: f64, d: f64, g: &BivariateGaussian, n: usize) -> f64 {
    let n = n + n % 2;
    let [m1, m2] = g.mean();
    let [s1, s2] = g.sd();
    let r = g.rho();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s1 * s2 * (1.0 - r * r).sqrt());
    let density = |x: f64, y: f64| {
        let u = (x - m1) / s1;
        let v = (y - m2) / s2;
        norm * (-(u * u - 2.0 * r * u * v + v * v) / (2.0 * (1.0 - r * r))).exp()
    };
    let weight = |i: usize| match i {
        0 => 1.0,
        i if i == n => 1.0,
        i if i % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let (hx, hy) = ((b - a) / n as f64, (d - c) / n as f64);
    let mut total = 0.0;
    for i in 0..=n {
        let x = a + hx * i as f64;
        let mut row = 0.0;
        for j in 0..=n {
            row += weight(j) * density(x, c + hy * j as f64);
        }
        total += weight(i) * row;
    }
    total * hx * hy / 9.0
}

fn kernel_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst = 0.0_f64;
    for k in -9..=9 {
        let rho = f64::from(k) / 10.0;
        let g = BivariateGaussian::standard(rho)?;
        worst = worst.max((g.cdf(0.0, 0.0) - orthant_closed_form(rho)).abs());
    }
    out.push(check("orthant closed form", worst <= 1e-8, format!("max error {worst:.2e}")));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (g, [a, b, c, d]) = random_rectangle(&mut rng)?;
        let exact = gamma_rect(a, b, c, d, &g)?;
        worst = worst.max((exact - simpson_rect(a, b, c, d, &g, 400)).abs());
    }
    out.push(check("rectangles vs Simpson", worst <= 1e-8, format!("max error {worst:.2e} over 50")));
    Ok(out)
}

/// A random Gaussian with `|rho| <= 0.9` and a finite rectangle around its mean.
pub fn random_rectangle(rng: &mut ChaCha8Rng) -> Result<(BivariateGaussian, [f64; 4])> {
    let mean = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    let sd = [rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)];
    let rho = rng.random_range(-0.9..0.9);
    let g = BivariateGaussian::from_sd(mean, sd, rho)?;
    let mut side = |m: f64, s: f64| {
        let lo = m + s * rng.random_range(-3.0..1.0);
        let hi = lo + s * rng.random_range(0.1..3.0);
        (lo, hi)
    };
    let (a, b) = side(mean[0], sd[0]);
    let (c, d) = side(mean[1], sd[1]);
    Ok((g, [a, b, c, d]))
}

/// Monte Carlo tolerance `max(0.01, 4 sqrt(p (1 - p) / n))`.
pub fn mc_tolerance(p: f64, n: usize) -> f64 {
    (4.0 * (p * (1.0 - p) / n as f64).sqrt()).max(0.01)
}

fn qpoi_checks() -> Result<Vec<Check>> {
    let n = 100_000;
    let mut out = Vec::new();
    for kind in [FrontKind::Convex, FrontKind::Concave] {
        for size in [10, 100] {
            let archive = synthetic_front(kind, size, SPEED_RADIUS)?;
            let batch = speed_batch(kind);
            let exact = QpoiEvaluator::new(&archive)?.exact_values(&batch)?;
            let mc = qpoi_monte_carlo(&batch, &archive, n, 2024)?;
            for v in [Variant::Best, Variant::All, Variant::Mean, Variant::One, Variant::Worst] {
                let (e, m) = (exact.get(v), mc.get(v));
                let tol = mc_tolerance(e, n);
                out.push(check(
                    format!("{kind:?} |P|={size} {v}"),
                    (e - m).abs() <= tol,
                    format!("exact {e:.5} mc {m:.5} tol {tol:.4}"),
                ));
            }
        }
    }
    Ok(out)
}

/// A random two-point prediction against a random front of 1 to 50 points.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Result<(BatchPrediction, ParetoArchive)> {
    let n = rng.random_range(1..=50);
    let mut f1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut f2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    f1.sort_by(f64::total_cmp);
    f2.sort_by(|a, b| b.total_cmp(a));
    let archive = ParetoArchive::from_points(2, f1.into_iter().zip(f2).map(|(a, b)| [a, b]));
    let mut mean = [[0.0; 2]; 2];
    let mut sd = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            mean[i][j] = rng.random_range(-1.0..11.0);
            sd[i][j] = rng.random_range(0.05..3.0);
        }
    }
    let rho = [rng.random_range(-0.99..0.99), rng.random_range(-0.99..0.99)];
    Ok((BatchPrediction::pair(mean, sd, rho)?, archive))
}

/// Ordering chain and the `one + all = 2 mean` identity on random instances.
pub fn ordering_checks(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut chain_violation, mut identity) = (0.0_f64, 0.0_f64);
    for _ in 0..instances {
        let (batch, archive) = random_instance(&mut rng)?;
        let v = QpoiEvaluator::new(&archive)?.exact_values(&batch)?;
        let c = v.chain();
        for w in c.windows(2) {
            chain_violation = chain_violation.max(w[0] - w[1]);
        }
        identity = identity.max((v.one + v.all - 2.0 * v.mean).abs());
    }
    Ok(vec![
        check(
            "best <= all <= mean <= one <= worst",
            chain_violation <= 1e-9,
            format!("largest violation {chain_violation:.2e} over {instances}"),
        ),
        check(
            "one + all - 2 mean = 0",
            identity <= 1e-9,
            format!("largest residual {identity:.2e} over {instances}"),
        ),
    ])
}

fn mc_checks() -> Result<Vec<Check>> {
    let archive = ParetoArchive::from_points(2, [[1.0, 2.5], [2.0, 1.5], [3.0, 1.0]]);
    let batch = BatchPrediction::pair([[1.5, 2.5], [2.7, 1.7]], [[1.0, 3.0], [2.0, 2.0]], [0.5, -0.5])?;
    let a = qpoi_monte_carlo(&batch, &archive, 10_000, 5)?;
    let b = qpoi_monte_carlo(&batch, &archive, 10_000, 5)?;
    let mut out = vec![check("same seed, same estimate", a == b, format!("{:?}", a.chain()))];

    let n = 10_000;
    let runs: Vec<_> = (0..30)
        .map(|s| qpoi_monte_carlo(&batch, &archive, n, 100 + s))
        .collect::<Result<_>>()?;
    for v in [Variant::Best, Variant::All, Variant::One, Variant::Worst] {
        let xs: Vec<f64> = runs.iter().map(|r| r.get(v)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        let binomial = (mean * (1.0 - mean) / n as f64).sqrt();
        let ratio = sd / binomial;
        out.push(check(
            format!("seed spread {v}"),
            (1.0 / 3.0..=3.0).contains(&ratio),
            format!("sd {sd:.2e} vs binomial {binomial:.2e} (ratio {ratio:.2})"),
        ));
    }
    Ok(out)
}
