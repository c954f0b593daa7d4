use std::fmt;

/// Failure reported by a black-box objective.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    message: String,
}

impl EvalError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for EvalError {}

/// A black-box function of a point in original units.
///
/// Implementations must tolerate concurrent calls on distinct inputs.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        self(x)
    }
}

/// Adapts an infallible closure.
pub struct Infallible<F>(pub F);

impl<F> Objective for Infallible<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok((self.0)(x))
    }
}
