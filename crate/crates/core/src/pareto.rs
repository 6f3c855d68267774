//! Pareto dominance, the non-dominated archive, stripe decomposition of the
//! bi-objective non-dominated space, and the 2-D hypervolume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a` dominates `b` (minimization): no coordinate worse, at least one better.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "dominance between vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// A set of mutually non-dominated objective vectors.
///
/// For two objectives the points are kept sorted by ascending `f1`, which is
/// strictly descending `f2`. Other dimensions keep insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl ParetoArchive {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "archive dimension must be positive");
        Self {
            dim,
            points: Vec::new(),
        }
    }

    /// Builds an archive by inserting every point in order.
    pub fn from_points<I, P>(dim: usize, points: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut archive = Self::new(dim);
        for p in points {
            archive.insert(p.as_ref());
        }
        archive
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in sorted order (ascending `f1` for two objectives).
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Points sorted by descending `f2`, the order used by the stripe formulas.
    pub fn sorted_desc_f2(&self) -> impl DoubleEndedIterator<Item = &[f64]> {
        debug_assert_eq!(self.dim, 2);
        self.points.iter().rev().map(Vec::as_slice)
    }

    /// Returns a copy of the archive with `y` offered for insertion.
    pub fn with(&self, y: &[f64]) -> Self {
        let mut next = self.clone();
        next.insert(y);
        next
    }

    /// Offers `y` to the archive. It is added iff no member dominates or
    /// equals it; members it dominates are dropped. Returns whether `y` was
    /// added.
    ///
    /// # Panics
    /// If `y` has the wrong length or contains NaN.
    pub fn insert(&mut self, y: &[f64]) -> bool {
        assert_eq!(y.len(), self.dim, "objective vector has wrong dimension");
        assert!(y.iter().all(|v| !v.is_nan()), "objective vector contains NaN");
        if self
            .points
            .iter()
            .any(|p| p.as_slice() == y || dominates_unchecked(p, y))
        {
            return false;
        }
        self.points.retain(|p| !dominates_unchecked(y, p));
        if self.dim == 2 {
            let at = self.points.partition_point(|p| p[0] < y[0]);
            self.points.insert(at, y.to_vec());
        } else {
            self.points.push(y.to_vec());
        }
        true
    }

    /// `y` lies in the non-dominated space: no member strictly dominates it.
    /// Points equal to a member count as improving.
    pub fn is_improved_by(&self, y: &[f64]) -> bool {
        if self.dim == 2 && y.len() == 2 {
            // The member with the largest f1 <= y1 has the smallest f2 among
            // all potential dominators.
            let idx = self.points.partition_point(|p| p[0] <= y[0]);
            if idx == 0 {
                return true;
            }
            let p = &self.points[idx - 1];
            return !dominates_unchecked(p, y);
        }
        !self.points.iter().any(|p| dominates_unchecked(p, y))
    }

    /// Direct check of membership in the non-dominated space bounded by `r`.
    pub fn ndom_contains(&self, y: &[f64], r: &[f64]) -> bool {
        dominates_unchecked(y, r) && !self.points.iter().any(|p| dominates_unchecked(p, y))
    }
}

/// An axis-aligned region `(l1, u1] x (l2, u2]` of the objective plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stripe {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Stripe {
    pub fn contains(&self, y: [f64; 2]) -> bool {
        self.lower[0] < y[0] && y[0] <= self.upper[0] && self.lower[1] < y[1] && y[1] <= self.upper[1]
    }

    /// Whether the open box `(lo, hi)` overlaps the stripe with positive area.
    pub fn overlaps(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        self.lower[0] < hi[0] && lo[0] < self.upper[0] && self.lower[1] < hi[1] && lo[1] < self.upper[1]
    }
}

/// Partition of the bi-objective non-dominated space into `n + 1` stripes.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeSet {
    stripes: Vec<Stripe>,
}

impl StripeSet {
    pub fn as_slice(&self) -> &[Stripe] {
        &self.stripes
    }

    pub fn len(&self) -> usize {
        self.stripes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stripes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Stripe> {
        self.stripes.iter()
    }

    /// Index of the stripe containing `y`, if any.
    pub fn locate(&self, y: [f64; 2]) -> Option<usize> {
        self.stripes.iter().position(|s| s.contains(y))
    }
}

impl<'a> IntoIterator for &'a StripeSet {
    type Item = &'a Stripe;
    type IntoIter = std::slice::Iter<'a, Stripe>;

    fn into_iter(self) -> Self::IntoIter {
        self.stripes.iter()
    }
}

/// The all-infinite reference point used by probability-of-improvement.
pub const INFINITE_REFERENCE: [f64; 2] = [f64::INFINITY, f64::INFINITY];

/// Decomposes `ndom(archive, r)` into stripes.
///
/// With the archive sorted by descending `f2` as `y(1), ..., y(n)` and the
/// sentinels `y(0) = (r1, -inf)`, `y(n+1) = (-inf, r2)`, stripe `i` spans
/// `(y1(i), y1(i-1)] x (-inf, y2(i)]`.
pub fn stripes(archive: &ParetoArchive, r: [f64; 2]) -> Result<StripeSet> {
    if archive.dim() != 2 {
        return Err(Error::domain(format!(
            "stripe decomposition needs 2 objectives, archive has {}",
            archive.dim()
        )));
    }
    if r.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("reference point contains NaN"));
    }
    if let Some(p) = archive.points().iter().find(|p| !dominates_unchecked(p, &r)) {
        return Err(Error::domain(format!(
            "archive point {p:?} does not dominate reference point {r:?}"
        )));
    }
    let n = archive.len();
    let mut out = Vec::with_capacity(n + 1);
    let mut prev_f1 = r[0];
    for p in archive.sorted_desc_f2() {
        out.push(Stripe {
            lower: [p[0], f64::NEG_INFINITY],
            upper: [prev_f1, p[1]],
        });
        prev_f1 = p[0];
    }
    out.push(Stripe {
        lower: [f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: [prev_f1, r[1]],
    });
    Ok(StripeSet { stripes: out })
}

/// Area dominated by the archive and bounded above by the finite `r`.
/// Points that do not dominate `r` contribute nothing.
pub fn hypervolume_2d(archive: &ParetoArchive, r: [f64; 2]) -> Result<f64> {
    if archive.dim() != 2 {
        return Err(Error::domain("hypervolume_2d needs 2 objectives"));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "hypervolume reference point must be finite, got {r:?}"
        )));
    }
    let mut hv = 0.0;
    let mut ceiling = r[1];
    // Ascending f1 / descending f2: each point adds the slab below the previous one.
    for p in archive.points() {
        if p[0] >= r[0] || p[1] >= ceiling {
            continue;
        }
        hv += (r[0] - p[0]) * (ceiling - p[1]);
        ceiling = p[1];
    }
    Ok(hv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> ParetoArchive {
        ParetoArchive::from_points(2, [[3.0, 1.0], [2.0, 1.5], [1.0, 2.5]])
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(dominates(&[1.0, 1.0], &[1.0, 2.0]).unwrap());
        assert!(matches!(dominates(&[1.0], &[1.0, 2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn insert_cases() {
        let a = ParetoArchive::from_points(2, [[1.0, 1.0]]);
        assert_eq!(a.with(&[0.0, 0.0]).points(), &[vec![0.0, 0.0]]);
        assert_eq!(a.with(&[2.0, 2.0]), a);

        let b = fig2().with(&[1.5, 1.2]);
        assert_eq!(
            b.points(),
            &[vec![1.0, 2.5], vec![1.5, 1.2], vec![3.0, 1.0]]
        );
    }

    #[test]
    fn insert_rejects_duplicates_and_keeps_strict_order() {
        let mut a = fig2();
        assert!(!a.insert(&[2.0, 1.5]));
        assert!(!a.insert(&[2.0, 1.7]));
        assert!(a.insert(&[2.0, 1.2]));
        let pts = a.points();
        for w in pts.windows(2) {
            assert!(w[0][0] < w[1][0] && w[0][1] > w[1][1]);
        }
    }

    #[test]
    fn improvement_test_matches_linear_scan() {
        let a = fig2();
        for y in [[2.5, 1.2], [2.0, 1.5], [2.0, 1.6], [0.5, 9.0], [3.5, 0.9], [3.5, 1.0]] {
            let scan = !a.points().iter().any(|p| dominates_unchecked(p, &y));
            assert_eq!(a.is_improved_by(&y), scan, "{y:?}");
        }
    }

    #[test]
    fn stripes_of_figure_two() {
        let s = stripes(&fig2(), [4.0, 4.0]).unwrap();
        let ninf = f64::NEG_INFINITY;
        assert_eq!(s.len(), 4);
        assert_eq!(s.as_slice()[0], Stripe { lower: [3.0, ninf], upper: [4.0, 1.0] });
        assert_eq!(s.as_slice()[1], Stripe { lower: [2.0, ninf], upper: [3.0, 1.5] });
        assert_eq!(s.as_slice()[2], Stripe { lower: [1.0, ninf], upper: [2.0, 2.5] });
        assert_eq!(s.as_slice()[3], Stripe { lower: [ninf, ninf], upper: [1.0, 4.0] });
    }

    #[test]
    fn stripes_edge_cases() {
        let ninf = f64::NEG_INFINITY;
        let inf = f64::INFINITY;
        let s = stripes(&ParetoArchive::new(2), [4.0, 4.0]).unwrap();
        assert_eq!(s.as_slice(), &[Stripe { lower: [ninf, ninf], upper: [4.0, 4.0] }]);

        let one = ParetoArchive::from_points(2, [[1.0, 1.0]]);
        let s = stripes(&one, INFINITE_REFERENCE).unwrap();
        assert_eq!(
            s.as_slice(),
            &[
                Stripe { lower: [1.0, ninf], upper: [inf, 1.0] },
                Stripe { lower: [ninf, ninf], upper: [1.0, inf] },
            ]
        );
        assert!(matches!(stripes(&one, [0.5, 4.0]), Err(Error::Domain(_))));
        assert!(stripes(&ParetoArchive::new(3), [1.0, 1.0]).is_err());
    }

    #[test]
    fn hypervolume_examples() {
        let a = ParetoArchive::from_points(2, [[1.0, 2.0], [2.0, 1.0]]);
        assert!((hypervolume_2d(&a, [3.0, 3.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!((hypervolume_2d(&fig2(), [4.0, 4.0]).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(hypervolume_2d(&ParetoArchive::new(2), [4.0, 4.0]).unwrap(), 0.0);
        // Points beyond the reference point are ignored.
        let b = ParetoArchive::from_points(2, [[5.0, 0.5], [1.0, 2.0]]);
        assert!((hypervolume_2d(&b, [4.0, 4.0]).unwrap() - 6.0).abs() < 1e-12);
        assert!(hypervolume_2d(&a, [f64::INFINITY, 3.0]).is_err());
    }
}
