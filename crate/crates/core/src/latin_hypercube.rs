//! Latin hypercube designs built from the diagonal and improved by random
//! plane exchanges that lower the inverse-distance spread.

use rand::Rng;
use thiserror::Error;

/// Default number of candidate exchanges.
pub const DEFAULT_ATTEMPTS: usize = 1000;

/// Pairs closer than this count as coincident.
const COINCIDENT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LhError {
    #[error("a Latin hypercube needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("a Latin hypercube needs at least one dimension")]
    ZeroDimension,
    #[error("spread needs at least 2 points, got {0}")]
    SpreadTooFewPoints(usize),
}

/// `n` points on an `n`-per-axis mesh, one permutation of `0..n` per axis.
///
/// Point `k` sits at mesh index `perms[axis][k]` on every axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatinHypercube {
    n: usize,
    perms: Vec<Vec<usize>>,
}

impl LatinHypercube {
    /// All points on the main diagonal of the mesh.
    pub fn diagonal(n: usize, d: usize) -> Result<Self, LhError> {
        if n < 2 {
            return Err(LhError::TooFewPoints(n));
        }
        if d == 0 {
            return Err(LhError::ZeroDimension);
        }
        Ok(Self {
            n,
            perms: vec![(0..n).collect(); d],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.perms.len()
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Mesh indices of point `k`, one per axis.
    pub fn mesh_index(&self, k: usize) -> Vec<usize> {
        self.perms.iter().map(|p| p[k]).collect()
    }

    /// Checks that every axis carries a true permutation.
    pub fn is_latin(&self) -> bool {
        self.perms.iter().all(|p| {
            let mut seen = vec![false; self.n];
            p.len() == self.n
                && p.iter()
                    .all(|&j| j < self.n && !std::mem::replace(&mut seen[j], true))
        })
    }

    /// Embeds the mesh in the closed unit cube: index `j` becomes `j / (n - 1)`.
    pub fn to_unit_points(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|k| self.unit_point(k)).collect()
    }

    fn unit_point(&self, k: usize) -> Vec<f64> {
        let scale = (self.n - 1) as f64;
        self.perms.iter().map(|p| p[k] as f64 / scale).collect()
    }

    /// Runs `attempts` random plane exchanges, keeping each one only if it
    /// strictly lowers the spread.
    pub fn improve<R: Rng + ?Sized>(mut self, attempts: usize, rng: &mut R) -> Self {
        self.improve_with(attempts, rng, |_| {});
        self
    }

    /// Like [`LatinHypercube::improve`] but calls `observe` after every attempt.
    pub fn improve_with<R, F>(&mut self, attempts: usize, rng: &mut R, mut observe: F) -> f64
    where
        R: Rng + ?Sized,
        F: FnMut(&LatinHypercube),
    {
        let mut points = self.to_unit_points();
        let mut current = spread_unchecked(&points);
        let n = self.n;
        let scale = (n - 1) as f64;
        for _ in 0..attempts {
            let axis = rng.random_range(0..self.dim());
            let p = rng.random_range(0..n);
            let mut q = rng.random_range(0..n - 1);
            if q >= p {
                q += 1;
            }
            let before = point_terms(&points, p, q);
            self.perms[axis].swap(p, q);
            points[p][axis] = self.perms[axis][p] as f64 / scale;
            points[q][axis] = self.perms[axis][q] as f64 / scale;
            let after = point_terms(&points, p, q);
            let delta = after - before;
            if delta < 0.0 {
                current += delta;
            } else {
                self.perms[axis].swap(p, q);
                points[p][axis] = self.perms[axis][p] as f64 / scale;
                points[q][axis] = self.perms[axis][q] as f64 / scale;
            }
            observe(self);
        }
        current
    }
}

/// Sum of inverse pairwise distances over all point pairs.
///
/// Returns `f64::INFINITY` when any two points coincide.
pub fn spread(points: &[Vec<f64>]) -> Result<f64, LhError> {
    if points.len() < 2 {
        return Err(LhError::SpreadTooFewPoints(points.len()));
    }
    Ok(spread_unchecked(points))
}

fn spread_unchecked(points: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            total += inverse_distance(a, b);
        }
    }
    total
}

fn inverse_distance(a: &[f64], b: &[f64]) -> f64 {
    let dist = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if dist < COINCIDENT {
        f64::INFINITY
    } else {
        1.0 / dist
    }
}

/// Spread terms for every pair that involves `p` or `q`.
fn point_terms(points: &[Vec<f64>], p: usize, q: usize) -> f64 {
    let mut total = inverse_distance(&points[p], &points[q]);
    for (k, x) in points.iter().enumerate() {
        if k != p && k != q {
            total += inverse_distance(&points[p], x) + inverse_distance(&points[q], x);
        }
    }
    total
}
