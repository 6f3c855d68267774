//! Benchmark problems and synthetic Pareto fronts.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::Problem;
use crate::error::{Error, Result};
use crate::optim::SearchBox;
use crate::pareto::ParetoArchive;

/// Reference point used for hypervolume on the ZDT problems.
pub const ZDT_REFERENCE: [f64; 2] = [11.0, 11.0];

/// ZDT1, ZDT2 or ZDT3 at `x` in the unit box.
pub fn zdt(idx: u8, x: &[f64]) -> Result<[f64; 2]> {
    let d = x.len();
    if d < 2 {
        return Err(Error::domain(format!("ZDT needs at least 2 variables, got {d}")));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::domain(format!("ZDT input outside the unit box: {x:?}")));
    }
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (d - 1) as f64;
    let h = f1 / g;
    let f2 = match idx {
        1 => g * (1.0 - h.sqrt()),
        2 => g * (1.0 - h * h),
        3 => g * (1.0 - h.sqrt() - h * (10.0 * PI * f1).sin()),
        _ => return Err(Error::config(format!("unknown ZDT index {idx}; valid options are {{1, 2, 3}}"))),
    };
    Ok([f1, f2])
}

/// Problems shipped with the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Zdt1,
    Zdt2,
    Zdt3,
    /// `f = (x1, 1 - x1)`; every point is Pareto optimal.
    Linear,
    /// `f = (|x|^2, |x - 1|^2)`; the Pareto set is the diagonal of the box.
    Schaffer,
}

impl ProblemKind {
    pub const VALUES: [ProblemKind; 5] = [
        ProblemKind::Zdt1,
        ProblemKind::Zdt2,
        ProblemKind::Zdt3,
        ProblemKind::Linear,
        ProblemKind::Schaffer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Zdt1 => "zdt1",
            ProblemKind::Zdt2 => "zdt2",
            ProblemKind::Zdt3 => "zdt3",
            ProblemKind::Linear => "linear",
            ProblemKind::Schaffer => "schaffer",
        }
    }

    /// Builds the problem in dimension `d`.
    pub fn build(self, d: usize) -> Result<Problem> {
        let min_d = if matches!(self, ProblemKind::Linear | ProblemKind::Schaffer) { 1 } else { 2 };
        if d < min_d {
            return Err(Error::config(format!("{} needs d >= {min_d}, got {d}", self.name())));
        }
        let bounds = SearchBox::unit(d);
        let name = self.name();
        Ok(match self {
            ProblemKind::Zdt1 => Problem::new(name, 2, bounds, |x| zdt(1, x).map(Vec::from)),
            ProblemKind::Zdt2 => Problem::new(name, 2, bounds, |x| zdt(2, x).map(Vec::from)),
            ProblemKind::Zdt3 => Problem::new(name, 2, bounds, |x| zdt(3, x).map(Vec::from)),
            ProblemKind::Linear => Problem::new(name, 2, bounds, |x| Ok(vec![x[0], 1.0 - x[0]])),
            ProblemKind::Schaffer => Problem::new(name, 2, bounds, |x| {
                let a = x.iter().map(|v| v * v).sum();
                let b = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
                Ok(vec![a, b])
            }),
        })
    }

    /// Hypervolume reference point used when reporting.
    pub fn reference(self, d: usize) -> [f64; 2] {
        match self {
            ProblemKind::Linear => [1.1, 1.1],
            ProblemKind::Schaffer => {
                let r = 1.1 * d as f64;
                [r, r]
            }
            _ => ZDT_REFERENCE,
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        ProblemKind::VALUES.iter().copied().find(|p| p.name() == key).ok_or_else(|| {
            Error::config(format!(
                "unknown problem {s:?}; valid options are {{zdt1, zdt2, zdt3, linear, schaffer}}"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontKind {
    Convex,
    Concave,
}

impl FromStr for FrontKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "convex" => Ok(FrontKind::Convex),
            "concave" => Ok(FrontKind::Concave),
            _ => Err(Error::config(format!("unknown front {s:?}; valid options are {{convex, concave}}"))),
        }
    }
}

/// `n` points on a quarter circle of radius `r`, at evenly spaced angles
/// `(pi / 2) k / (n + 1)` for `k = 1..=n`.
///
/// Concave: `(r cos t, r sin t)`. Convex: `(r (1 - sin t), r (1 - cos t))`.
pub fn synthetic_front(kind: FrontKind, n: usize, r: f64) -> Result<ParetoArchive> {
    if n == 0 || !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("synthetic front needs n >= 1 and r > 0, got n={n}, r={r}")));
    }
    let mut archive = ParetoArchive::new(2);
    for k in 1..=n {
        let t = FRAC_PI_2 * k as f64 / (n + 1) as f64;
        let p = match kind {
            FrontKind::Concave => [r * t.cos(), r * t.sin()],
            FrontKind::Convex => [r * (1.0 - t.sin()), r * (1.0 - t.cos())],
        };
        archive.insert(&p);
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zdt_corners() {
        assert_eq!(zdt(1, &[0.0; 5]).unwrap(), [0.0, 1.0]);
        assert_eq!(zdt(1, &[1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0]);
        assert_eq!(zdt(2, &[0.0; 3]).unwrap(), [0.0, 1.0]);
        assert!(matches!(zdt(1, &[1.2, 0.0]), Err(Error::Domain(_))));
        assert!(zdt(4, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn fronts_keep_every_point() {
        let c = synthetic_front(FrontKind::Concave, 1, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.points()[0][0] - h).abs() < 1e-15 && (c.points()[0][1] - h).abs() < 1e-15);
        for kind in [FrontKind::Convex, FrontKind::Concave] {
            assert_eq!(synthetic_front(kind, 100, 10.0).unwrap().len(), 100);
        }
    }

    #[test]
    fn unknown_problem_lists_options() {
        let e = "dtlz2".parse::<ProblemKind>().unwrap_err().to_string();
        assert!(e.contains("zdt1"));
    }
}
