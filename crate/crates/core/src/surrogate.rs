//! Cubic RBF response surface with a linear tail, optionally measured in a
//! rescaled metric `‖T(x - x_i)‖` built from the covariance of the
//! surrogate's low-value region.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Default number of uniform cloud points used to estimate the scaling.
pub const DEFAULT_CLOUD_SIZE: usize = 10_000;
/// Default fraction of the cloud, by lowest surrogate value, that is kept.
pub const DEFAULT_BEST_FRACTION: f64 = 0.05;

const MIN_SEPARATION: f64 = 1e-10;
const CONDITION_LIMIT: f64 = 1e12;
const DIAGONAL_JITTER: f64 = 1e-10;
const EIGEN_FLOOR: f64 = 1e-8;
/// Largest cloud variance still treated as a single point (rounding noise of
/// unit-cube coordinates).
const COLLAPSED_VARIANCE: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("need at least {needed} points to fit in dimension {dim}, got {got}")]
    TooFewPoints { needed: usize, dim: usize, got: usize },
    #[error("{points} points but {values} values")]
    LengthMismatch { points: usize, values: usize },
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("interpolation system is singular")]
    Singular,
    #[error("non-finite training value at index {0}")]
    NonFiniteValue(usize),
    #[error("scaling matrix must be {dim}x{dim}")]
    ScalingShape { dim: usize },
    #[error("cloud size {0} is below the minimum of 100")]
    CloudTooSmall(usize),
    #[error("best fraction {0} must lie in (0, 0.5]")]
    InvalidBestFraction(f64),
}

/// Fitted interpolant `s(x) = Σ λ_i ‖T(x - x_i)‖³ + bᵀx + a`.
#[derive(Debug, Clone)]
pub struct RbfModel {
    dim: usize,
    centers: Vec<Vec<f64>>,
    values: Vec<f64>,
    scaled_centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail_linear: Vec<f64>,
    tail_const: f64,
    scaling: DMatrix<f64>,
    condition: f64,
    jittered: bool,
}

impl RbfModel {
    /// Fits the interpolant to `values` at `points`.
    ///
    /// `scaling` is the matrix `T` applied inside the kernel; `None` means the
    /// identity.
    pub fn fit(
        points: &[Vec<f64>],
        values: &[f64],
        scaling: Option<&DMatrix<f64>>,
    ) -> Result<Self, SurrogateError> {
        let n = points.len();
        if n != values.len() {
            return Err(SurrogateError::LengthMismatch {
                points: n,
                values: values.len(),
            });
        }
        let dim = points.first().map_or(0, Vec::len);
        if n < dim + 2 || dim == 0 {
            return Err(SurrogateError::TooFewPoints {
                needed: dim.max(1) + 2,
                dim,
                got: n,
            });
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(SurrogateError::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFiniteValue(i));
        }
        for i in 0..n {
            for j in i + 1..n {
                if distance(&points[i], &points[j]) < MIN_SEPARATION {
                    return Err(SurrogateError::DuplicatePoints(i, j));
                }
            }
        }
        let scaling = match scaling {
            Some(t) if t.nrows() != dim || t.ncols() != dim => {
                return Err(SurrogateError::ScalingShape { dim })
            }
            Some(t) => t.clone(),
            None => DMatrix::identity(dim, dim),
        };
        let scaled_centers: Vec<Vec<f64>> = points.iter().map(|p| apply(&scaling, p)).collect();

        let size = n + dim + 1;
        let mut system = DMatrix::zeros(size, size);
        let phi = kernel_block(&scaled_centers);
        system.view_mut((0, 0), (n, n)).copy_from(&phi);
        for (i, p) in points.iter().enumerate() {
            for (k, &x) in p.iter().enumerate() {
                system[(i, n + k)] = x;
                system[(n + k, i)] = x;
            }
            system[(i, n + dim)] = 1.0;
            system[(n + dim, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, n).copy_from_slice(values);

        let (solution, condition, jittered) = match solve(&system, &rhs) {
            Some((solution, condition)) if condition <= CONDITION_LIMIT => {
                (solution, condition, false)
            }
            first => {
                for i in 0..n {
                    system[(i, i)] += DIAGONAL_JITTER;
                }
                match (solve(&system, &rhs), first) {
                    (Some((solution, condition)), _) => (solution, condition, true),
                    (None, Some((solution, condition))) => (solution, condition, false),
                    (None, None) => return Err(SurrogateError::Singular),
                }
            }
        };
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::Singular);
        }

        Ok(Self {
            dim,
            centers: points.to_vec(),
            values: values.to_vec(),
            scaled_centers,
            weights: solution.rows(0, n).iter().copied().collect(),
            tail_linear: solution.rows(n, dim).iter().copied().collect(),
            tail_const: solution[n + dim],
            scaling,
            condition,
            jittered,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Training values, aligned with [`RbfModel::centers`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_linear(&self) -> &[f64] {
        &self.tail_linear
    }

    pub fn tail_const(&self) -> f64 {
        self.tail_const
    }

    pub fn scaling(&self) -> &DMatrix<f64> {
        &self.scaling
    }

    /// 1-norm condition estimate of the interpolation system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Whether the kernel diagonal had to be perturbed to get a usable solve.
    pub fn was_jittered(&self) -> bool {
        self.jittered
    }

    /// The center with the lowest training value (first one on ties).
    pub fn best_center(&self) -> &[f64] {
        let best = self
            .values
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if *v < self.values[best] { i } else { best });
        &self.centers[best]
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        if x.len() != self.dim {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.value(x))
    }

    /// Evaluates without checking the dimension.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let tx = apply(&self.scaling, x);
        let radial: f64 = self
            .scaled_centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * distance(&tx, c).powi(3))
            .sum();
        // the tail is evaluated on unscaled coordinates
        let tail: f64 = self.tail_linear.iter().zip(x).map(|(b, v)| b * v).sum();
        radial + tail + self.tail_const
    }
}

/// Kernel matrix `Φ_ij = ‖T(x_i - x_j)‖³` for the given points.
pub fn kernel_matrix(points: &[Vec<f64>], scaling: &DMatrix<f64>) -> DMatrix<f64> {
    let scaled: Vec<Vec<f64>> = points.iter().map(|p| apply(scaling, p)).collect();
    kernel_block(&scaled)
}

fn kernel_block(scaled: &[Vec<f64>]) -> DMatrix<f64> {
    let n = scaled.len();
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(&scaled[i], &scaled[j]).powi(3);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    phi
}

/// LU solve together with a 1-norm condition estimate.
fn solve(system: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let lu = system.clone().lu();
    let solution = lu.solve(rhs)?;
    let inverse = lu.try_inverse()?;
    if inverse.iter().chain(solution.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some((solution, one_norm(system) * one_norm(&inverse)))
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn apply(t: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..t.nrows())
        .map(|r| t.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Kernel metric `T` whose rows are eigenvectors of the low-value cloud
/// covariance divided by the square roots of their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceScaling {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    degenerate: bool,
}

impl SpaceScaling {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            eigenvalues: vec![1.0; dim],
            eigenvectors: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            degenerate: false,
        }
    }

    /// Builds `T` from a point cloud (rows are points).
    ///
    /// Eigenvalues below `1e-8 * max` are raised to that floor. A cloud with
    /// no spread at all yields the identity with [`SpaceScaling::is_degenerate`]
    /// set.
    pub fn from_cloud(cloud: &[Vec<f64>], dim: usize) -> Self {
        let Some(cov) = covariance(cloud, dim) else {
            return Self::degenerate(dim);
        };
        let eig = SymmetricEigen::new(cov);
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(max > COLLAPSED_VARIANCE && max.is_finite()) {
            return Self::degenerate(dim);
        }
        let floor = EIGEN_FLOOR * max;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(floor)).collect();
        let eigenvectors: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        let mut matrix = DMatrix::zeros(dim, dim);
        for (row, (alpha, m)) in eigenvalues.iter().zip(&eigenvectors).enumerate() {
            let inv = 1.0 / alpha.sqrt();
            for (col, v) in m.iter().enumerate() {
                matrix[(row, col)] = v * inv;
            }
        }
        Self {
            matrix,
            eigenvalues,
            eigenvectors,
            degenerate: false,
        }
    }

    fn degenerate(dim: usize) -> Self {
        Self {
            degenerate: true,
            ..Self::identity(dim)
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues after the floor is applied, largest first.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unit eigenvectors aligned with [`SpaceScaling::eigenvalues`].
    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    /// Set when the cloud collapsed and the identity was substituted.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Unbiased sample covariance; `None` with fewer than two points.
pub fn covariance(points: &[Vec<f64>], dim: usize) -> Option<DMatrix<f64>> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(dim, dim);
    for p in points {
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[(i, j)] /= (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Some(cov)
}

/// Samples `cloud_size` uniform points, keeps the `best_fraction` with the
/// lowest surrogate value and derives the kernel metric from their covariance.
pub fn compute_space_scaling<R: Rng + ?Sized>(
    model: &RbfModel,
    cloud_size: usize,
    best_fraction: f64,
    rng: &mut R,
) -> Result<SpaceScaling, SurrogateError> {
    if cloud_size < 100 {
        return Err(SurrogateError::CloudTooSmall(cloud_size));
    }
    if !(best_fraction > 0.0 && best_fraction <= 0.5) {
        return Err(SurrogateError::InvalidBestFraction(best_fraction));
    }
    let dim = model.dim();
    let cloud: Vec<Vec<f64>> = (0..cloud_size)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let values: Vec<f64> = cloud.par_iter().map(|p| model.value(p)).collect();
    let keep = ((best_fraction * cloud_size as f64).ceil() as usize).clamp(1, cloud_size);
    let mut order: Vec<usize> = (0..cloud_size).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let kept: Vec<Vec<f64>> = order[..keep].iter().map(|&i| cloud[i].clone()).collect();
    Ok(SpaceScaling::from_cloud(&kept, dim))
}

/// Refits on the same data with the kernel measured through `scaling`.
pub fn refit_with_scaling(
    points: &[Vec<f64>],
    values: &[f64],
    scaling: &SpaceScaling,
) -> Result<RbfModel, SurrogateError> {
    RbfModel::fit(points, values, Some(scaling.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchfns::valley;
    use crate::latin_hypercube::LatinHypercube;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    /// Random Latin hypercube with each point jittered around its cell
    /// center, keeping neighbours at least half a cell apart on every axis.
    fn jittered_design(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        use rand::seq::SliceRandom;
        let perms: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        (0..n)
            .map(|k| {
                perms
                    .iter()
                    .map(|p| (p[k] as f64 + 0.5 + 0.5 * (rng.random::<f64>() - 0.5)) / n as f64)
                    .collect()
            })
            .collect()
    }

    fn lh_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatinHypercube::diagonal(n, 2)
            .unwrap()
            .improve(1000, &mut rng)
            .to_unit_points()
    }

    fn max_residual(model: &RbfModel, points: &[Vec<f64>], values: &[f64]) -> f64 {
        points
            .iter()
            .zip(values)
            .map(|(p, v)| (model.evaluate(p).unwrap() - v).abs())
            .fold(0.0, f64::max)
    }

    fn side_conditions(model: &RbfModel) -> f64 {
        let mut worst = model.weights().iter().sum::<f64>().abs();
        for k in 0..model.dim() {
            let s: f64 = model
                .weights()
                .iter()
                .zip(model.centers())
                .map(|(w, c)| w * c[k])
                .sum();
            worst = worst.max(s.abs());
        }
        worst
    }

    #[test]
    fn one_dimensional_bump() {
        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        let vals = [0.0, 1.0, 0.0];
        let m = RbfModel::fit(&pts, &vals, None).unwrap();
        assert!(max_residual(&m, &pts, &vals) < 1e-12);
    }

    #[test]
    fn constant_data_lives_in_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 12, 2);
        let m = RbfModel::fit(&pts, &[0.5; 12], None).unwrap();
        assert!(m.weights().iter().all(|w| w.abs() < 1e-9));
        assert!(m.tail_linear().iter().all(|b| b.abs() < 1e-9));
        assert!((m.tail_const() - 0.5).abs() < 1e-9);
        assert!((m.evaluate(&[0.123, 0.987]).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn valley_lh_fit_interpolates() {
        let pts = lh_points(20, 1);
        let vals: Vec<f64> = pts.iter().map(|p| valley(p[0], p[1])).collect();
        let m = RbfModel::fit(&pts, &vals, None).unwrap();
        assert!(max_residual(&m, &pts, &vals) <= 1e-6);
    }

    #[test]
    fn valley_model_approaches_zero_at_center() {
        let pts = lh_points(50, 2);
        let vals: Vec<f64> = pts.iter().map(|p| valley(p[0], p[1])).collect();
        let m = RbfModel::fit(&pts, &vals, None).unwrap();
        assert!(m.evaluate(&[0.5, 0.5]).unwrap().abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            RbfModel::fit(&pts, &[0.0; 3], None),
            Err(SurrogateError::TooFewPoints { needed: 4, .. })
        ));
        let dup = vec![vec![0.1], vec![0.5], vec![0.1]];
        assert_eq!(
            RbfModel::fit(&dup, &[0.0; 3], None).unwrap_err(),
            SurrogateError::DuplicatePoints(0, 2)
        );
        assert!(matches!(
            RbfModel::fit(&dup, &[0.0; 2], None),
            Err(SurrogateError::LengthMismatch { .. })
        ));
        let m = RbfModel::fit(&[vec![0.0], vec![0.5], vec![1.0]], &[0.0; 3], None).unwrap();
        assert!(matches!(
            m.evaluate(&[0.0, 1.0]),
            Err(SurrogateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn collinear_points_in_2d_are_singular() {
        // every point on a line: the linear tail is not determined
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, i as f64 / 5.0]).collect();
        let vals: Vec<f64> = (0..6).map(|i| (i as f64).sin().abs()).collect();
        let fitted = RbfModel::fit(&pts, &vals, None);
        match fitted {
            Err(SurrogateError::Singular) => {}
            Ok(m) => assert!(m.was_jittered() || m.condition() > CONDITION_LIMIT),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn identity_scaling_matches_plain_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 15, 3);
        let vals: Vec<f64> = (0..15).map(|_| rng.random()).collect();
        let plain = RbfModel::fit(&pts, &vals, None).unwrap();
        let scaled = refit_with_scaling(&pts, &vals, &SpaceScaling::identity(3)).unwrap();
        let again = refit_with_scaling(&pts, &vals, &SpaceScaling::identity(3)).unwrap();
        for (a, b) in plain.weights().iter().zip(scaled.weights()) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(scaled.weights(), again.weights());
        assert_eq!(scaled.tail_const(), again.tail_const());
    }

    #[test]
    fn kernel_entries_match_direct_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 8, 3);
        let t = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let phi = kernel_matrix(&pts, &t);
        for _ in 0..5 {
            let i = rng.random_range(0..8);
            let j = rng.random_range(0..8);
            let diff = DVector::from_iterator(3, pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b));
            let direct = (&t * diff).norm().powi(3);
            assert!((phi[(i, j)] - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn evaluate_is_continuous() {
        let pts = lh_points(20, 6);
        let vals: Vec<f64> = pts.iter().map(|p| valley(p[0], p[1])).collect();
        let m = RbfModel::fit(&pts, &vals, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // crude Lipschitz bound from the coefficients
        let slope = 3.0 * 2f64.powi(2) * m.weights().iter().map(|w| w.abs()).sum::<f64>()
            + m.tail_linear().iter().map(|b| b.abs()).sum::<f64>();
        for _ in 0..100 {
            let x = [rng.random::<f64>() * 0.99, rng.random::<f64>() * 0.99];
            let y = [x[0] + 1e-6, x[1] - 1e-6];
            let gap = (m.evaluate(&x).unwrap() - m.evaluate(&y).unwrap()).abs();
            assert!(gap <= slope * 2e-6);
        }
    }

    #[test]
    fn isotropic_bowl_gives_near_isotropic_scaling() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 40, 2);
            let vals: Vec<f64> = pts
                .iter()
                .map(|p| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2))
                .collect();
            let m = RbfModel::fit(&pts, &vals, None).unwrap();
            let s = compute_space_scaling(&m, 10_000, 0.05, &mut rng).unwrap();
            assert!(!s.is_degenerate());
            let ttt = s.matrix().transpose() * s.matrix();
            let c2 = ttt.trace() / 2.0;
            for i in 0..2 {
                for j in 0..2 {
                    let target = if i == j { c2 } else { 0.0 };
                    assert!(
                        (ttt[(i, j)] - target).abs() <= 0.15 * c2,
                        "seed {seed}: {ttt}"
                    );
                }
            }
        }
    }

    #[test]
    fn valley_scaling_stiffens_the_cross_diagonal() {
        let pts = lh_points(20, 8);
        let vals: Vec<f64> = pts.iter().map(|p| valley(p[0], p[1])).collect();
        let m = RbfModel::fit(&pts, &vals, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = compute_space_scaling(&m, 10_000, 0.05, &mut rng).unwrap();
        let ttt = s.matrix().transpose() * s.matrix();
        let eig = SymmetricEigen::new(ttt.clone());
        let (hi, lo) = if eig.eigenvalues[0] > eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        assert!(eig.eigenvalues[hi] / eig.eigenvalues[lo] > 2.0);
        let stiff = eig.eigenvectors.column(hi);
        let cos = ((stiff[0] - stiff[1]) / 2f64.sqrt()).abs();
        assert!(cos >= 10f64.to_radians().cos(), "stiff direction {stiff}");

        // oracle cloud on the true function has the same orientation
        let cloud: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.sort_by(|&a, &b| {
            valley(cloud[a][0], cloud[a][1]).total_cmp(&valley(cloud[b][0], cloud[b][1]))
        });
        let best: Vec<Vec<f64>> = order[..500].iter().map(|&i| cloud[i].clone()).collect();
        let cov = covariance(&best, 2).unwrap();
        let oe = SymmetricEigen::new(cov);
        let small = if oe.eigenvalues[0] < oe.eigenvalues[1] { 0 } else { 1 };
        let v = oe.eigenvectors.column(small);
        assert!(((v[0] - v[1]) / 2f64.sqrt()).abs() >= 10f64.to_radians().cos());
    }

    #[test]
    fn collapsed_cloud_falls_back_to_identity() {
        let cloud = vec![vec![0.3, 0.3]; 10];
        let s = SpaceScaling::from_cloud(&cloud, 2);
        assert!(s.is_degenerate());
        assert_eq!(s.matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn flat_directions_are_clamped() {
        let cloud: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0, 0.5]).collect();
        let s = SpaceScaling::from_cloud(&cloud, 2);
        assert!(!s.is_degenerate());
        let max = s.eigenvalues()[0];
        assert!(s.eigenvalues().iter().all(|a| *a >= 1e-8 * max));
        assert!(s.matrix().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn scaling_rejects_bad_arguments() {
        let m = RbfModel::fit(&[vec![0.0], vec![0.5], vec![1.0]], &[0.0, 1.0, 0.0], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            compute_space_scaling(&m, 50, 0.05, &mut rng),
            Err(SurrogateError::CloudTooSmall(50))
        );
        assert!(compute_space_scaling(&m, 1000, 0.7, &mut rng).is_err());
    }

    fn instance() -> impl Strategy<Value = (usize, usize, u64)> {
        prop::sample::select(vec![1usize, 2, 3, 5])
            .prop_flat_map(|d| (Just(d), (d + 2)..=60, any::<u64>()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_fits_interpolate((d, n, seed) in instance()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = jittered_design(&mut rng, n, d);
            let vals: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let m = RbfModel::fit(&pts, &vals, None).unwrap();
            prop_assert!(max_residual(&m, &pts, &vals) <= 1e-6);
            prop_assert!(side_conditions(&m) <= 1e-8);
        }

        #[test]
        fn clustered_fits_still_interpolate((d, n, seed) in instance()) {
            // iid points can nearly coincide, so weights grow large and the
            // side conditions are only checked relative to their magnitude
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n, d);
            let vals: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let m = RbfModel::fit(&pts, &vals, None).unwrap();
            // rounding grows with the condition number, and a jittered retry
            // trades exactness for a residual of jitter * λ
            let mut slack = 1e-16 * m.condition();
            if m.was_jittered() {
                slack += 2.0 * DIAGONAL_JITTER * m.weights().iter().fold(0.0f64, |a, w| a.max(w.abs()));
            }
            prop_assert!(max_residual(&m, &pts, &vals) <= 1e-6 + slack);
            let scale: f64 = m.weights().iter().map(|w| w.abs()).sum::<f64>().max(1.0);
            prop_assert!(side_conditions(&m) <= 1e-12 * scale);
        }

        #[test]
        fn linear_data_is_reproduced((d, n, seed) in instance()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = jittered_design(&mut rng, n, d);
            let coef: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let c0 = rng.random::<f64>();
            let lin = |p: &[f64]| p.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() + c0;
            let vals: Vec<f64> = pts.iter().map(|p| lin(p)).collect();
            let m = RbfModel::fit(&pts, &vals, None).unwrap();
            prop_assert!(m.weights().iter().all(|w| w.abs() <= 1e-8));
            for _ in 0..10 {
                let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                prop_assert!((m.evaluate(&x).unwrap() - lin(&x)).abs() <= 1e-8);
            }
        }
    }
}
