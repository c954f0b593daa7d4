//! Reference objectives and an exhaustive grid oracle.

use std::f64::consts::PI;

use thiserror::Error;

use crate::domain_scaling::BoundedDomain;
use crate::objective::{EvalError, Objective};

/// Largest dimension the grid oracle accepts.
pub const ORACLE_MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("grid oracle supports at most {ORACLE_MAX_DIM} dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error("grid resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),
    #[error("unknown objective `{0}` (expected multimodal, valley or sphere)")]
    UnknownObjective(String),
    #[error("objective evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// `cos 4πx + cos 4πy + 5(x + y) + 2`: one global and three local minima on
/// the unit square.
pub fn multimodal(x: f64, y: f64) -> f64 {
    (4.0 * PI * x).cos() + (4.0 * PI * y).cos() + 5.0 * (x + y) + 2.0
}

/// `|x - y| + ((x + y - 1) / 3)²`: a narrow valley along the diagonal with its
/// minimum 0 at the center.
pub fn valley(x: f64, y: f64) -> f64 {
    (x - y).abs() + ((x + y - 1.0) / 3.0).powi(2)
}

/// Squared distance to the cube center.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum()
}

/// A built-in objective with its box.
#[derive(Debug, Clone)]
pub struct NamedObjective {
    name: &'static str,
    domain: BoundedDomain,
    eval: fn(&[f64]) -> f64,
}

impl NamedObjective {
    pub fn multimodal() -> Self {
        Self {
            name: "multimodal",
            domain: BoundedDomain::unit(2).expect("unit square"),
            eval: |x| multimodal(x[0], x[1]),
        }
    }

    pub fn valley() -> Self {
        Self {
            name: "valley",
            domain: BoundedDomain::unit(2).expect("unit square"),
            eval: |x| valley(x[0], x[1]),
        }
    }

    pub fn sphere(dim: usize) -> Self {
        Self {
            name: "sphere",
            domain: BoundedDomain::unit(dim.max(1)).expect("unit cube"),
            eval: sphere,
        }
    }

    /// Looks up `multimodal`, `valley` or `sphere`; `dim` only matters for
    /// the sphere.
    pub fn by_name(name: &str, dim: usize) -> Result<Self, BenchError> {
        match name {
            "multimodal" => Ok(Self::multimodal()),
            "valley" => Ok(Self::valley()),
            "sphere" => Ok(Self::sphere(dim)),
            other => Err(BenchError::UnknownObjective(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    /// Evaluates with no bounds check.
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

impl Objective for NamedObjective {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        if !self.domain.contains(x) {
            return Err(EvalError::new(format!(
                "{}: point {x:?} lies outside its box",
                self.name
            )));
        }
        Ok(self.value(x))
    }
}

/// Minimizer over the closed uniform grid with `resolution` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub argmin: Vec<f64>,
    pub value: f64,
}

/// Exhaustive search over `domain`; ties go to the lexicographically first
/// node.
pub fn grid_oracle<O: Objective + ?Sized>(
    objective: &O,
    domain: &BoundedDomain,
    resolution: usize,
) -> Result<GridMinimum, BenchError> {
    let dim = domain.dim();
    if dim > ORACLE_MAX_DIM {
        return Err(BenchError::DimensionTooLarge(dim));
    }
    if resolution < 2 {
        return Err(BenchError::ResolutionTooSmall(resolution));
    }
    let node = |index: &[usize]| -> Vec<f64> {
        index
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let (a, b) = (domain.lower()[k], domain.upper()[k]);
                if j == resolution - 1 {
                    b
                } else {
                    a + (b - a) * j as f64 / (resolution - 1) as f64
                }
            })
            .collect()
    };
    let mut index = vec![0usize; dim];
    let mut best: Option<GridMinimum> = None;
    loop {
        let x = node(&index);
        let f = objective.evaluate(&x)?;
        if best.as_ref().is_none_or(|b| f < b.value) {
            best = Some(GridMinimum { argmin: x, value: f });
        }
        // odometer with the last axis fastest, i.e. lexicographic order
        let mut axis = dim;
        loop {
            if axis == 0 {
                return Ok(best.expect("grid is non-empty"));
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < resolution {
                break;
            }
            index[axis] = 0;
        }
    }
}
