//! Constrained surrogate minimization with an exclusion radius derived from a
//! decaying ball density.
//!
//! Each previously sampled point carries a ball of radius `r`. The balls'
//! total volume relative to the unit cube is the density `ρ`, which decays
//! from `ρ₀` to 0 over the `m` subsequent iterations:
//!
//! ```text
//! ρ(i) = ρ₀ ((m - i) / (m - 1))^p
//! r(i) = (ρ(i) / (N v₁))^(1/d),   v₁ = π^(d/2) / Γ(d/2 + 1)
//! ```
//!
//! A new sample minimizes the surrogate outside every ball. Distances are
//! plain Euclidean distances in unit-cube coordinates.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::surrogate::{distance, RbfModel};

pub const DEFAULT_RHO0: f64 = 0.75;
pub const DEFAULT_DECAY: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorsError {
    #[error("initial density {0} must lie in (0, 1]")]
    InvalidDensity(f64),
    #[error("decay exponent {0} must be positive")]
    InvalidDecay(f64),
    #[error("schedule needs at least one iteration")]
    NoIterations,
    #[error("schedule needs at least one initial point")]
    NoInitialPoints,
    #[error("schedule needs at least one dimension")]
    ZeroDimension,
    #[error("iteration {iter} is outside 1..={total}")]
    IterationOutOfRange { iter: usize, total: usize },
    #[error("radius needs at least one existing point")]
    NoPoints,
    #[error("batch of {len} starting at iteration {start} runs past iteration {total}")]
    BatchTooLong { start: usize, len: usize, total: usize },
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(half + 1.0)
}

/// Radius at which `n_points` balls in `dim` dimensions have total volume
/// `density`.
pub fn radius_for_density(density: f64, n_points: usize, dim: usize) -> f64 {
    if density <= 0.0 {
        return 0.0;
    }
    (density / (n_points as f64 * unit_ball_volume(dim))).powf(1.0 / dim as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSchedule {
    rho0: f64,
    decay: f64,
    total_iters: usize,
    n_init: usize,
    dim: usize,
}

impl RadiusSchedule {
    pub fn new(
        rho0: f64,
        decay: f64,
        total_iters: usize,
        n_init: usize,
        dim: usize,
    ) -> Result<Self, CorsError> {
        if !(rho0 > 0.0 && rho0 <= 1.0) {
            return Err(CorsError::InvalidDensity(rho0));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(CorsError::InvalidDecay(decay));
        }
        if total_iters == 0 {
            return Err(CorsError::NoIterations);
        }
        if n_init == 0 {
            return Err(CorsError::NoInitialPoints);
        }
        if dim == 0 {
            return Err(CorsError::ZeroDimension);
        }
        Ok(Self {
            rho0,
            decay,
            total_iters,
            n_init,
            dim,
        })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn total_iters(&self) -> usize {
        self.total_iters
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, i: usize) -> Result<(), CorsError> {
        if i == 0 || i > self.total_iters {
            return Err(CorsError::IterationOutOfRange {
                iter: i,
                total: self.total_iters,
            });
        }
        Ok(())
    }

    /// Ball density at iteration `i` (counted from 1). A one-iteration
    /// schedule has density 0.
    pub fn density(&self, i: usize) -> Result<f64, CorsError> {
        self.check(i)?;
        let m = self.total_iters;
        if m == 1 {
            return Ok(0.0);
        }
        let frac = (m - i) as f64 / (m - 1) as f64;
        Ok(self.rho0 * frac.powf(self.decay))
    }

    /// Exclusion radius at iteration `i` with `n_points` balls placed.
    pub fn radius(&self, i: usize, n_points: usize) -> Result<f64, CorsError> {
        if n_points == 0 {
            return Err(CorsError::NoPoints);
        }
        Ok(radius_for_density(self.density(i)?, n_points, self.dim))
    }

    /// Radius with the serial center count `n + i - 1`.
    pub fn serial_radius(&self, i: usize) -> Result<f64, CorsError> {
        self.radius(i, self.n_init + i.max(1) - 1)
    }
}

/// Settings for the candidate search inside [`propose_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    /// Uniform candidates; `None` means `2000 * d`.
    pub candidates: Option<usize>,
    /// Gaussian perturbations around the best evaluated point.
    pub perturbations: usize,
    /// Lower bound on the perturbation standard deviation.
    pub min_sigma: f64,
    /// Pattern-search sweeps used to polish the best feasible candidate.
    pub refine_steps: usize,
    /// Proposals never come closer than this to an existing point, even when
    /// the radius is 0.
    pub min_separation: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            candidates: None,
            perturbations: 500,
            min_sigma: 0.05,
            refine_steps: 50,
            min_separation: 1e-6,
        }
    }
}

impl ProposalConfig {
    fn uniform_count(&self, dim: usize) -> usize {
        self.candidates.unwrap_or(2000 * dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: Vec<f64>,
    /// Surrogate value at `point`.
    pub predicted: f64,
    /// Distance to the nearest existing point.
    pub min_distance: f64,
    /// Set when no candidate cleared the radius and the most isolated
    /// candidate was returned instead.
    pub fallback: bool,
}

/// Uniform and perturbed candidates for one proposal.
pub fn generate_candidates<R: Rng + ?Sized>(
    model: &RbfModel,
    r: f64,
    rng: &mut R,
    cfg: &ProposalConfig,
) -> Vec<Vec<f64>> {
    let dim = model.dim();
    let mut out: Vec<Vec<f64>> = (0..cfg.uniform_count(dim))
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let sigma = r.max(cfg.min_sigma);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let best = model.best_center().to_vec();
    out.extend((0..cfg.perturbations).map(|_| {
        best.iter()
            .map(|c| (c + normal.sample(rng)).clamp(0.0, 1.0))
            .collect()
    }));
    out
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> f64 {
    centers
        .iter()
        .map(|c| distance(x, c))
        .fold(f64::INFINITY, f64::min)
}

/// Picks the feasible candidate with the lowest surrogate value and polishes
/// it with a shrinking coordinate pattern search.
pub fn propose_from_candidates(
    model: &RbfModel,
    centers: &[Vec<f64>],
    r: f64,
    candidates: &[Vec<f64>],
    cfg: &ProposalConfig,
) -> Proposal {
    let limit = r.max(cfg.min_separation);
    let scored: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|c| (nearest(c, centers), model.value(c)))
        .collect();

    let best = scored
        .iter()
        .enumerate()
        .filter(|(_, (dist, _))| *dist >= limit)
        .fold(None::<(usize, f64)>, |acc, (i, &(_, v))| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((i, v)),
        });

    let Some((index, _)) = best else {
        let (index, &(dist, value)) = scored
            .iter()
            .enumerate()
            .fold(None::<(usize, &(f64, f64))>, |acc, (i, s)| match acc {
                Some((_, b)) if b.0 >= s.0 => acc,
                _ => Some((i, s)),
            })
            .expect("candidate set is non-empty");
        return Proposal {
            point: candidates[index].clone(),
            predicted: value,
            min_distance: dist,
            fallback: true,
        };
    };

    let (mut point, mut value) = (candidates[index].clone(), scored[index].1);
    let mut step = 0.5 * r.max(cfg.min_sigma);
    for _ in 0..cfg.refine_steps {
        let mut moved = false;
        for axis in 0..point.len() {
            for dir in [1.0, -1.0] {
                let mut trial = point.clone();
                trial[axis] += dir * step;
                if !(0.0..=1.0).contains(&trial[axis]) || nearest(&trial, centers) < limit {
                    continue;
                }
                let v = model.value(&trial);
                if v < value {
                    point = trial;
                    value = v;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Proposal {
        min_distance: nearest(&point, centers),
        point,
        predicted: value,
        fallback: false,
    }
}

/// Proposes one point at least `r` away from every center that approximately
/// minimizes the surrogate.
pub fn propose_point<R: Rng + ?Sized>(
    model: &RbfModel,
    centers: &[Vec<f64>],
    r: f64,
    rng: &mut R,
    cfg: &ProposalConfig,
) -> Proposal {
    let candidates = generate_candidates(model, r, rng, cfg);
    propose_from_candidates(model, centers, r, &candidates, cfg)
}

/// One batch entry together with the schedule values it was proposed under.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchProposal {
    pub iteration: usize,
    pub density: f64,
    pub radius: f64,
    pub proposal: Proposal,
}

/// Proposes `k` points for iterations `start_iter .. start_iter + k`.
///
/// Earlier proposals in the batch are treated as centers for later ones, both
/// in the distance constraint and in the ball count.
pub fn propose_batch<R: Rng + ?Sized>(
    model: &RbfModel,
    centers: &[Vec<f64>],
    sched: &RadiusSchedule,
    start_iter: usize,
    k: usize,
    rng: &mut R,
    cfg: &ProposalConfig,
) -> Result<Vec<BatchProposal>, CorsError> {
    if start_iter == 0 || start_iter + k > sched.total_iters() + 1 {
        return Err(CorsError::BatchTooLong {
            start: start_iter,
            len: k,
            total: sched.total_iters(),
        });
    }
    let mut all = centers.to_vec();
    let mut out = Vec::with_capacity(k);
    for iteration in start_iter..start_iter + k {
        let density = sched.density(iteration)?;
        let radius = sched.radius(iteration, all.len())?;
        let proposal = propose_point(model, &all, radius, rng, cfg);
        all.push(proposal.point.clone());
        out.push(BatchProposal {
            iteration,
            density,
            radius,
            proposal,
        });
    }
    Ok(out)
}
