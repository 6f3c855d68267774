use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this (relative to the largest variance) reject a
/// covariance as non-PSD rather than projecting it.
pub const PSD_SLACK: f64 = 1e-10;

/// Joint Gaussian prediction for a batch of `q` points over `m` objectives.
///
/// Objectives are independent of each other; within an objective the `q`
/// predictions carry a full covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPrediction {
    /// `m x q`: `mean[i][j]` is objective `i` at batch point `j`.
    mean: Vec<Vec<f64>>,
    /// `m` matrices, each `q x q`, row-major.
    cov: Vec<Vec<Vec<f64>>>,
    /// `m x q` standard deviations, the square roots of the diagonals of `cov`.
    sd: Vec<Vec<f64>>,
}

impl BatchPrediction {
    /// Validates shapes and symmetry. A covariance whose smallest eigenvalue
    /// is below zero but above `-PSD_SLACK` (scaled) is projected onto the
    /// PSD cone; anything worse is a numerical error.
    pub fn new(mean: Vec<Vec<f64>>, cov: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::with_scales(mean, cov, None)
    }

    /// Like [`new`](Self::new), but the PSD slack for objective `i` is
    /// relative to `scales[i]` (e.g. the prior variance the covariance was
    /// computed from) rather than to its own diagonal.
    pub fn with_scales(mean: Vec<Vec<f64>>, cov: Vec<Vec<Vec<f64>>>, scales: Option<&[f64]>) -> Result<Self> {
        let m = mean.len();
        if m == 0 {
            return Err(Error::config("batch prediction needs at least one objective"));
        }
        let q = mean[0].len();
        if q == 0 {
            return Err(Error::config("batch prediction needs at least one point"));
        }
        if mean.iter().any(|row| row.len() != q) {
            return Err(Error::config("mean matrix rows have unequal lengths"));
        }
        if mean.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite predicted mean"));
        }
        if cov.len() != m {
            return Err(Error::config(format!(
                "expected {m} covariance matrices, got {}",
                cov.len()
            )));
        }
        if scales.is_some_and(|s| s.len() != m) {
            return Err(Error::config("one covariance scale per objective expected"));
        }
        let mut projected = Vec::with_capacity(m);
        for (i, c) in cov.into_iter().enumerate() {
            if c.len() != q || c.iter().any(|row| row.len() != q) {
                return Err(Error::config(format!("covariance {i} is not {q}x{q}")));
            }
            let scale = scales.map(|s| s[i]);
            projected.push(project_psd(c, scale).map_err(|e| match e {
                Error::Numerical(msg) => Error::numerical(format!("objective {i}: {msg}")),
                other => other,
            })?);
        }
        let sd = projected
            .iter()
            .map(|c| (0..q).map(|j| c[j][j].sqrt()).collect())
            .collect();
        Ok(Self {
            mean,
            cov: projected,
            sd,
        })
    }

    /// Two-point batch from per-objective standard deviations and correlations.
    ///
    /// `mean[i]` and `sd[i]` hold objective `i` for both points and `rho[i]`
    /// is their correlation within that objective.
    pub fn pair(mean: [[f64; 2]; 2], sd: [[f64; 2]; 2], rho: [f64; 2]) -> Result<Self> {
        let cov = (0..2)
            .map(|i| {
                let off = rho[i] * sd[i][0] * sd[i][1];
                vec![vec![sd[i][0] * sd[i][0], off], vec![off, sd[i][1] * sd[i][1]]]
            })
            .collect();
        Self::new(mean.iter().map(|r| r.to_vec()).collect(), cov)
    }

    /// Batch of independent points: diagonal covariances.
    pub fn independent(mean: Vec<Vec<f64>>, sd: Vec<Vec<f64>>) -> Result<Self> {
        let cov = sd
            .iter()
            .map(|row| {
                let q = row.len();
                (0..q)
                    .map(|a| (0..q).map(|b| if a == b { row[a] * row[a] } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        Self::new(mean, cov)
    }

    pub fn objectives(&self) -> usize {
        self.mean.len()
    }

    pub fn points(&self) -> usize {
        self.mean[0].len()
    }

    pub fn mean(&self) -> &[Vec<f64>] {
        &self.mean
    }

    pub fn cov(&self, objective: usize) -> &[Vec<f64>] {
        &self.cov[objective]
    }

    pub fn sd(&self) -> &[Vec<f64>] {
        &self.sd
    }

    /// Mean vector of batch point `j` across objectives.
    pub fn point_mean(&self, j: usize) -> Vec<f64> {
        self.mean.iter().map(|row| row[j]).collect()
    }

    /// Standard deviations of batch point `j` across objectives.
    pub fn point_sd(&self, j: usize) -> Vec<f64> {
        self.sd.iter().map(|row| row[j]).collect()
    }

    /// Correlation between points `a` and `b` within `objective`; zero when
    /// either variance vanishes.
    pub fn correlation(&self, objective: usize, a: usize, b: usize) -> f64 {
        let s = self.sd[objective][a] * self.sd[objective][b];
        if s > 0.0 {
            (self.cov[objective][a][b] / s).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    /// Batch with points reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let q = self.points();
        let mut seen = vec![false; q];
        if perm.len() != q || perm.iter().any(|&p| p >= q || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::config("invalid permutation"));
        }
        let mean = self
            .mean
            .iter()
            .map(|row| perm.iter().map(|&p| row[p]).collect())
            .collect();
        let cov = self
            .cov
            .iter()
            .map(|c| {
                perm.iter()
                    .map(|&a| perm.iter().map(|&b| c[a][b]).collect())
                    .collect()
            })
            .collect();
        Self::new(mean, cov)
    }

    /// Raises every variance to at least `floor`, keeping correlations
    /// valid. Used where the acquisition must stay defined at sampled inputs.
    pub fn with_variance_floor(&self, floor: f64) -> Self {
        let mut out = self.clone();
        for (c, sd) in out.cov.iter_mut().zip(out.sd.iter_mut()) {
            for j in 0..c.len() {
                if c[j][j] < floor {
                    c[j][j] = floor;
                    sd[j] = floor.sqrt();
                }
            }
        }
        out
    }
}

/// Symmetrizes `c` and clips negative eigenvalues to zero. Eigenvalues below
/// `-PSD_SLACK * scale` are rejected; `scale` defaults to `max(1, max diagonal)`.
fn project_psd(mut c: Vec<Vec<f64>>, scale: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let q = c.len();
    for a in 0..q {
        if !(c[a][a] >= 0.0) && c[a][a] > -PSD_SLACK * scale.unwrap_or(1.0).max(1.0) {
            c[a][a] = 0.0;
        }
        for b in 0..a {
            if (c[a][b] - c[b][a]).abs() > 1e-9 * (1.0 + c[a][b].abs()) {
                return Err(Error::numerical(format!(
                    "covariance not symmetric at ({a}, {b})"
                )));
            }
            let s = 0.5 * (c[a][b] + c[b][a]);
            c[a][b] = s;
            c[b][a] = s;
        }
    }
    if c.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite covariance entry"));
    }
    let own = (0..q).map(|a| c[a][a]).fold(1.0_f64, f64::max);
    let scale = scale.map_or(own, |s| s.max(own));
    let min_eig = smallest_eigenvalue(&c);
    if min_eig >= 0.0 {
        return Ok(c);
    }
    if min_eig < -PSD_SLACK * scale {
        return Err(Error::numerical(format!(
            "covariance is not PSD (smallest eigenvalue {min_eig:e})"
        )));
    }
    let m = DMatrix::from_fn(q, q, |a, b| c[a][b]);
    let eig = SymmetricEigen::new(m);
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok((0..q)
        .map(|a| (0..q).map(|b| 0.5 * (rebuilt[(a, b)] + rebuilt[(b, a)])).collect())
        .collect())
}

pub(crate) fn smallest_eigenvalue(c: &[Vec<f64>]) -> f64 {
    match c.len() {
        1 => c[0][0],
        2 => {
            let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
            let half_tr = 0.5 * (a + d);
            let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            half_tr - disc
        }
        q => {
            let m = DMatrix::from_fn(q, q, |a, b| c[a][b]);
            SymmetricEigen::new(m).eigenvalues.min()
        }
    }
}
