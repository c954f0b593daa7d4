//! Mapping between user variable ranges and the unit cube, and rescaling of
//! raw objective values into `[0, 1]`.

use thiserror::Error;

use crate::objective::{EvalError, Objective};

/// Default fraction of initial samples kept below the outlier threshold.
pub const DEFAULT_KEEP_FRACTION: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("domain must have at least one dimension")]
    EmptyDomain,
    #[error("lower and upper bounds have different lengths ({lower} vs {upper})")]
    BoundsLength { lower: usize, upper: usize },
    #[error("bounds for variable {index} are not a proper interval: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("component {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("cannot fit a rescaler on an empty set of values")]
    EmptyValues,
    #[error("objective value {0} is negative or not finite")]
    InvalidValue(f64),
    #[error("keep fraction {0} must lie in (0, 1]")]
    InvalidKeepFraction(f64),
}

/// Box constraints `[a_i, b_i]` on each variable.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundedDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ScalingError> {
        if lower.len() != upper.len() {
            return Err(ScalingError::BoundsLength {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(ScalingError::EmptyDomain);
        }
        for (index, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(ScalingError::InvalidBounds {
                    index,
                    lower: a,
                    upper: b,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self, ScalingError> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&a, &b))| x >= a && x <= b)
    }

    /// Maps a point in original units to the unit cube.
    ///
    /// Points outside the box are rejected rather than clamped.
    pub fn to_unit(&self, v: &[f64]) -> Result<Vec<f64>, ScalingError> {
        self.check_len(v)?;
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .enumerate()
            .map(|(index, (&x, (&a, &b)))| {
                if !(x >= a && x <= b) {
                    return Err(ScalingError::OutOfBounds {
                        index,
                        value: x,
                        lower: a,
                        upper: b,
                    });
                }
                Ok(((x - a) / (b - a)).clamp(0.0, 1.0))
            })
            .collect()
    }

    /// Maps a unit-cube point back to original units.
    pub fn from_unit(&self, xi: &[f64]) -> Result<Vec<f64>, ScalingError> {
        self.check_len(xi)?;
        xi.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .enumerate()
            .map(|(index, (&u, (&a, &b)))| {
                if !(0.0..=1.0).contains(&u) {
                    return Err(ScalingError::OutOfBounds {
                        index,
                        value: u,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
                // the upper end is pinned so that 1.0 maps to b even when a + (b - a) rounds
                Ok(if u == 1.0 { b } else { (a + u * (b - a)).min(b) })
            })
            .collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<(), ScalingError> {
        if v.len() != self.dim() {
            return Err(ScalingError::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Maps raw non-negative objective values into `[0, 1]`, cutting everything at
/// or above the threshold `t` to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveRescaler {
    threshold: f64,
    keep_fraction: f64,
    degenerate: bool,
}

impl ObjectiveRescaler {
    /// Fits the threshold as the `ceil(q * n)`-th smallest raw value.
    ///
    /// When every value is equal, or the threshold is zero, the rescaler is
    /// degenerate: values at or below `t` map to 0 and everything else to 1.
    pub fn fit(raw_values: &[f64], keep_fraction: f64) -> Result<Self, ScalingError> {
        if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
            return Err(ScalingError::InvalidKeepFraction(keep_fraction));
        }
        if raw_values.is_empty() {
            return Err(ScalingError::EmptyValues);
        }
        if let Some(&bad) = raw_values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ScalingError::InvalidValue(bad));
        }
        let mut sorted = raw_values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((keep_fraction * n as f64).ceil() as usize).clamp(1, n);
        let threshold = sorted[rank - 1];
        let degenerate = threshold == 0.0 || sorted[0] == sorted[n - 1];
        Ok(Self {
            threshold,
            keep_fraction,
            degenerate,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn keep_fraction(&self) -> f64 {
        self.keep_fraction
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn rescale(&self, f: f64) -> Result<f64, ScalingError> {
        if !(f.is_finite() && f >= 0.0) {
            return Err(ScalingError::InvalidValue(f));
        }
        if self.degenerate {
            return Ok(if f <= self.threshold { 0.0 } else { 1.0 });
        }
        Ok(if f < self.threshold {
            f / self.threshold
        } else {
            1.0
        })
    }
}

/// `1 / (f + 1)`: minimizing this maximizes a non-negative `f`.
pub fn maximize_transform(f: f64) -> f64 {
    1.0 / (f + 1.0)
}

/// Objective adaptor returning `1 / (f(x) + 1)`.
#[derive(Debug, Clone)]
pub struct Maximize<O>(pub O);

impl<O: Objective> Objective for Maximize<O> {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.0.evaluate(x).map(maximize_transform)
    }
}

pub fn maximization_wrapper<O: Objective>(objective: O) -> Maximize<O> {
    Maximize(objective)
}
