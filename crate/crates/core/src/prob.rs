//! Univariate and bivariate normal probabilities.
//!
//! The bivariate lower-orthant probability follows Genz's refinement of the
//! Drezner–Wesolowsky method: Gauss–Legendre quadrature over the arcsine
//! transform of the correlation for `|rho| < 0.925`, and an asymptotic
//! expansion plus quadrature near the singular ends. Accuracy is close to
//! double precision across the whole correlation range.
//!
//! Infinite integration limits are accepted everywhere and reduce to the
//! univariate CDF without substituting large finite numbers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// Correlations this close to ±1 use the degenerate closed form.
pub const DEGENERATE_RHO_EPS: f64 = 1e-9;

/// Slack under which negative determinants still count as PSD.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Results within this distance outside `[0, 1]` are clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Standard normal CDF, `Φ(z)`. Infinite arguments are exact.
#[inline]
pub fn std_norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn std_norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_TWO_PI
}

/// Density of `N(mu, s²)` at `x`.
pub fn norm_pdf(x: f64, mu: f64, s: f64) -> Result<f64> {
    check_scale(s)?;
    if x.is_nan() || mu.is_nan() {
        return Err(Error::domain("norm_pdf: NaN argument"));
    }
    Ok(std_norm_pdf((x - mu) / s) / s)
}

/// `P(X <= x)` for `X ~ N(mu, s²)`; `x` may be infinite.
pub fn norm_cdf(x: f64, mu: f64, s: f64) -> Result<f64> {
    check_scale(s)?;
    if x.is_nan() || !mu.is_finite() {
        return Err(Error::domain("norm_cdf: NaN or non-finite location"));
    }
    Ok(std_norm_cdf((x - mu) / s))
}

fn check_scale(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "standard deviation must be positive and finite, got {s}"
        )))
    }
}

/// A bivariate normal distribution with its correlation precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateGaussian {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    sd: [f64; 2],
    rho: f64,
}

impl BivariateGaussian {
    /// Validates the covariance: symmetric, positive variances, PSD up to
    /// [`PSD_TOLERANCE`] on the determinant.
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("bivariate mean must be finite"));
        }
        let [[a, b], [c, d]] = cov;
        if [a, b, c, d].iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("covariance entries must be finite"));
        }
        if (b - c).abs() > 1e-12 * (1.0 + b.abs().max(c.abs())) {
            return Err(Error::domain(format!(
                "covariance is not symmetric: {b} vs {c}"
            )));
        }
        if a <= 0.0 || d <= 0.0 {
            return Err(Error::domain(format!(
                "variances must be positive, got ({a}, {d})"
            )));
        }
        if a * d - b * b < -PSD_TOLERANCE {
            return Err(Error::domain(format!(
                "covariance is not positive semi-definite (det = {})",
                a * d - b * b
            )));
        }
        let sd = [a.sqrt(), d.sqrt()];
        let rho = (b / (sd[0] * sd[1])).clamp(-1.0, 1.0);
        Ok(Self {
            mean,
            cov: [[a, b], [b, d]],
            sd,
            rho,
        })
    }

    /// Builds the distribution from standard deviations and a correlation.
    pub fn from_sd(mean: [f64; 2], sd: [f64; 2], rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::domain(format!("correlation {rho} outside [-1, 1]")));
        }
        let off = rho * sd[0] * sd[1];
        Self::new(mean, [[sd[0] * sd[0], off], [off, sd[1] * sd[1]]])
    }

    pub fn standard(rho: f64) -> Result<Self> {
        Self::from_sd([0.0, 0.0], [1.0, 1.0], rho)
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    pub fn sd(&self) -> [f64; 2] {
        self.sd
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The same distribution with coordinates swapped.
    pub fn swapped(&self) -> Self {
        Self {
            mean: [self.mean[1], self.mean[0]],
            cov: [[self.cov[1][1], self.cov[0][1]], [self.cov[1][0], self.cov[0][0]]],
            sd: [self.sd[1], self.sd[0]],
            rho: self.rho,
        }
    }

    /// `P(X1 <= x1, X2 <= x2)`. Arguments must not be NaN.
    pub fn cdf(&self, x1: f64, x2: f64) -> f64 {
        if x1 == f64::NEG_INFINITY || x2 == f64::NEG_INFINITY {
            return 0.0;
        }
        let h = (x1 - self.mean[0]) / self.sd[0];
        let k = (x2 - self.mean[1]) / self.sd[1];
        if x1 == f64::INFINITY {
            return std_norm_cdf(k);
        }
        if x2 == f64::INFINITY {
            return std_norm_cdf(h);
        }
        std_bvn_lower(h, k, self.rho)
    }

    /// Mass of `(a, b] x (c, d]` with near-boundary round-off clamped.
    /// Bounds must satisfy `a <= b`, `c <= d`.
    pub(crate) fn rect(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        if a == b || c == d {
            return 0.0;
        }
        let p = self.cdf(b, d) + self.cdf(a, c) - self.cdf(a, d) - self.cdf(b, c);
        clamp_probability(p)
    }
}

/// Clamps values within [`CLAMP_TOLERANCE`] of `[0, 1]` into the interval and
/// leaves anything further out untouched, so callers can still detect it.
#[inline]
pub(crate) fn clamp_probability(p: f64) -> f64 {
    if (-CLAMP_TOLERANCE..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p <= 1.0 + CLAMP_TOLERANCE {
        1.0
    } else {
        p
    }
}

/// `P(X1 <= x1, X2 <= x2)` for `(X1, X2) ~ g`.
pub fn bvn_cdf(x1: f64, x2: f64, g: &BivariateGaussian) -> Result<f64> {
    if x1.is_nan() || x2.is_nan() {
        return Err(Error::domain("bvn_cdf: NaN integration limit"));
    }
    Ok(g.cdf(x1, x2))
}

/// Probability mass of the rectangle `(a, b] x (c, d]` under `g`.
pub fn gamma_rect(a: f64, b: f64, c: f64, d: f64, g: &BivariateGaussian) -> Result<f64> {
    if [a, b, c, d].iter().any(|v| v.is_nan()) {
        return Err(Error::domain("gamma_rect: NaN bound"));
    }
    if a > b || c > d {
        return Err(Error::domain(format!(
            "gamma_rect: empty interval ({a}, {b}] x ({c}, {d}]"
        )));
    }
    let p = g.rect(a, b, c, d);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::numerical(format!(
            "gamma_rect: probability {p} outside [0, 1]"
        )));
    }
    Ok(p)
}

/// Standard bivariate lower orthant `P(Z1 <= h, Z2 <= k)` with correlation `rho`.
pub(crate) fn std_bvn_lower(h: f64, k: f64, rho: f64) -> f64 {
    if rho >= 1.0 - DEGENERATE_RHO_EPS {
        return std_norm_cdf(h.min(k));
    }
    if rho <= -1.0 + DEGENERATE_RHO_EPS {
        // Z2 = -Z1: the event is -k <= Z1 <= h.
        return (std_norm_cdf(h) - std_norm_cdf(-k)).max(0.0);
    }
    bvn_upper(-h, -k, rho)
}

// Gauss–Legendre abscissae (positive half) and weights for 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (0.932_469_514_203_152_2, 0.171_324_492_379_170_5),
    (0.661_209_386_466_264_7, 0.360_761_573_048_138_4),
    (0.238_619_186_083_197_0, 0.467_913_934_572_690_4),
];

const GL12: [(f64, f64); 6] = [
    (0.981_560_634_246_719_1, 0.047_175_336_386_511_77),
    (0.904_117_256_370_475_0, 0.106_939_325_995_318_3),
    (0.769_902_674_194_305_0, 0.160_078_328_543_346_4),
    (0.587_317_954_286_617_1, 0.203_167_426_723_065_9),
    (0.367_831_498_998_180_2, 0.233_492_536_538_354_7),
    (0.125_233_408_511_469_2, 0.249_147_045_813_402_9),
];

const GL20: [(f64, f64); 10] = [
    (0.993_128_599_185_094_9, 0.017_614_007_139_152_12),
    (0.963_971_927_277_913_8, 0.040_601_429_800_386_94),
    (0.912_234_428_251_325_9, 0.062_672_048_334_109_06),
    (0.839_116_971_822_218_8, 0.083_276_741_576_704_75),
    (0.746_331_906_460_150_8, 0.101_930_119_817_240_4),
    (0.636_053_680_726_515_0, 0.118_194_531_961_518_4),
    (0.510_867_001_950_827_1, 0.131_688_638_449_176_6),
    (0.373_706_088_715_419_6, 0.142_096_109_318_382_1),
    (0.227_785_851_141_645_1, 0.149_172_986_472_603_7),
    (0.076_526_521_133_497_33, 0.152_753_387_130_725_9),
];

/// Upper orthant `P(Z1 > h, Z2 > k)` for finite `h`, `k` and `|r| < 1`.
fn bvn_upper(h: f64, mut k: f64, r: f64) -> f64 {
    if r == 0.0 {
        return std_norm_cdf(-h) * std_norm_cdf(-k);
    }
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(x, w) in rule {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / TWO_PI + std_norm_cdf(-h) * std_norm_cdf(-k)).clamp(0.0, 1.0);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let as_ = (1.0 - r) * (1.0 + r);
    let mut a = as_.sqrt();
    let bs = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 80.0;
    let asr = -0.5 * (bs / as_ + hk);
    if asr > -100.0 {
        bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
    }
    if hk > -100.0 {
        let b = bs.sqrt();
        let sp = SQRT_TWO_PI * std_norm_cdf(-b / a);
        bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a *= 0.5;
    let mut acc = 0.0;
    for &(x, w) in rule {
        for node in [1.0 - x, 1.0 + x] {
            let xs = (a * node) * (a * node);
            let asr = -0.5 * (bs / xs + hk);
            if asr > -100.0 {
                let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                let rs = (1.0 - xs).sqrt();
                let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                acc += w * asr.exp() * (sp - ep);
            }
        }
    }
    bvn = (a * acc - bvn) / TWO_PI;

    let p = if r > 0.0 {
        bvn + std_norm_cdf(-h.max(k))
    } else if h >= k {
        -bvn
    } else {
        let l = if h < 0.0 {
            std_norm_cdf(k) - std_norm_cdf(h)
        } else {
            std_norm_cdf(-h) - std_norm_cdf(-k)
        };
        l - bvn
    };
    p.clamp(0.0, 1.0)
}

/// `Φ₂(0, 0; rho) = 1/4 + asin(rho) / (2π)`.
pub fn orthant_closed_form(rho: f64) -> f64 {
    0.25 + rho.asin() / TWO_PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_values() {
        assert!((norm_pdf(0.0, 0.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((norm_pdf(3.0, 0.0, 1.0).unwrap() - 0.004_431_848_411_938_008).abs() < 1e-15);
        let s = 2.5;
        assert!((norm_pdf(1.3, 1.3, s).unwrap() - 1.0 / (s * SQRT_TWO_PI)).abs() < 1e-15);
        assert!(matches!(norm_pdf(0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(norm_pdf(0.0, 0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_values_and_limits() {
        assert_eq!(norm_cdf(0.0, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(norm_cdf(f64::INFINITY, 5.0, 2.0).unwrap(), 1.0);
        assert_eq!(norm_cdf(f64::NEG_INFINITY, 5.0, 2.0).unwrap(), 0.0);
        // Frozen from adaptive quadrature of the density (see tests/prob_oracles.rs).
        assert!((norm_cdf(1.96, 0.0, 1.0).unwrap() - 0.975_002_104_851_779_6).abs() < 1e-12);
        assert!(norm_cdf(f64::NAN, 0.0, 1.0).is_err());
        assert!(norm_cdf(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn bvn_trivial_values() {
        let g = BivariateGaussian::standard(0.0).unwrap();
        assert!((bvn_cdf(0.0, 0.0, &g).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(bvn_cdf(f64::INFINITY, f64::INFINITY, &g).unwrap(), 1.0);
        let g = BivariateGaussian::standard(0.5).unwrap();
        assert!((bvn_cdf(0.0, 0.0, &g).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bvn_infinite_argument_reduces_to_univariate() {
        let g = BivariateGaussian::from_sd([1.0, -2.0], [2.0, 0.5], -0.7).unwrap();
        let p = bvn_cdf(f64::INFINITY, -1.5, &g).unwrap();
        assert!((p - std_norm_cdf(1.0)).abs() < 1e-15);
        let p = bvn_cdf(0.0, f64::INFINITY, &g).unwrap();
        assert!((p - std_norm_cdf(-0.5)).abs() < 1e-15);
        assert_eq!(bvn_cdf(f64::NEG_INFINITY, 3.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn bvn_degenerate_correlations() {
        let g = BivariateGaussian::standard(1.0).unwrap();
        assert!((g.cdf(0.3, -0.2) - std_norm_cdf(-0.2)).abs() < 1e-15);
        let g = BivariateGaussian::standard(-1.0).unwrap();
        assert!((g.cdf(0.3, 0.2) - (std_norm_cdf(0.3) - std_norm_cdf(-0.2))).abs() < 1e-15);
        assert_eq!(g.cdf(-1.0, -1.0), 0.0);
    }

    #[test]
    fn bvn_near_singular_branch_is_continuous() {
        // The quadrature switches method at |rho| = 0.925 and at the degenerate cutoff.
        for &(h, k) in &[(0.3, -0.4), (-1.2, 0.8), (1.5, 1.1), (-0.5, -0.5)] {
            for &r in &[0.925_f64, -0.925, 1.0 - 2e-9, -1.0 + 2e-9] {
                let below = std_bvn_lower(h, k, r - 1e-9 * r.signum());
                let above = std_bvn_lower(h, k, r + 1e-9 * r.signum());
                // Near |rho| = 1 the orthant varies like sqrt(1 - |rho|) when h = k.
                let tol = if r.abs() > 0.99 { 2e-5 } else { 1e-7 };
                assert!((below - above).abs() < tol, "h={h} k={k} r={r}");
            }
        }
    }

    #[test]
    fn covariance_validation() {
        assert!(BivariateGaussian::new([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(BivariateGaussian::new([0.0, 0.0], [[0.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(BivariateGaussian::new([0.0, 0.0], [[1.0, 0.1], [0.2, 1.0]]).is_err());
        assert!(BivariateGaussian::new([0.0, 0.0], [[4.0, 2.0], [2.0, 1.0]]).is_ok());
    }

    #[test]
    fn gamma_rect_trivial() {
        let inf = f64::INFINITY;
        let g = BivariateGaussian::from_sd([0.3, -0.1], [1.2, 0.7], 0.4).unwrap();
        assert!((gamma_rect(-inf, inf, -inf, inf, &g).unwrap() - 1.0).abs() < 1e-15);
        let s = BivariateGaussian::standard(0.0).unwrap();
        assert!((gamma_rect(0.0, inf, 0.0, inf, &s).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(gamma_rect(0.4, 0.4, -1.0, 2.0, &g).unwrap(), 0.0);
        assert!(matches!(gamma_rect(1.0, 0.0, 0.0, 1.0, &g), Err(Error::Domain(_))));
        assert!(matches!(gamma_rect(0.0, 1.0, 2.0, 1.0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn orthant_identity() {
        for i in -9..=9 {
            let rho = i as f64 / 10.0;
            let g = BivariateGaussian::standard(rho).unwrap();
            assert!((g.cdf(0.0, 0.0) - orthant_closed_form(rho)).abs() < 1e-14, "rho={rho}");
        }
    }
}
