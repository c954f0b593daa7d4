//! End-to-end driver: Latin hypercube start, objective rescaling, then
//! batches of surrogate fit, optional space rescaling and constrained
//! proposals.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cors::{self, CorsError, ProposalConfig, RadiusSchedule};
use crate::domain_scaling::{
    maximize_transform, BoundedDomain, ObjectiveRescaler, ScalingError, DEFAULT_KEEP_FRACTION,
};
use crate::latin_hypercube::{LatinHypercube, LhError, DEFAULT_ATTEMPTS};
use crate::objective::{EvalError, Objective};
use crate::surrogate::{
    compute_space_scaling, refit_with_scaling, RbfModel, SurrogateError, DEFAULT_BEST_FRACTION,
    DEFAULT_CLOUD_SIZE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub n_init: usize,
    /// Number of subsequent iterations.
    pub m: usize,
    pub rho0: f64,
    pub p: f64,
    /// Fraction of initial samples kept below the outlier threshold.
    pub q: f64,
    pub lh_attempts: usize,
    pub cloud_size: usize,
    pub best_fraction: f64,
    /// Simultaneous objective evaluations.
    pub workers: usize,
    /// Proposals per subsequent batch. Kept independent of `workers` so that
    /// the history does not depend on how many slots run it.
    pub batch_size: usize,
    pub seed: u64,
    pub use_space_rescaling: bool,
    pub maximize: bool,
    pub proposal: ProposalConfig,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            n_init: 20,
            m: 10,
            rho0: cors::DEFAULT_RHO0,
            p: cors::DEFAULT_DECAY,
            q: DEFAULT_KEEP_FRACTION,
            lh_attempts: DEFAULT_ATTEMPTS,
            cloud_size: DEFAULT_CLOUD_SIZE,
            best_fraction: DEFAULT_BEST_FRACTION,
            workers: 1,
            batch_size: 1,
            seed: 0,
            use_space_rescaling: true,
            maximize: false,
            proposal: ProposalConfig::default(),
        }
    }
}

/// A violated configuration invariant, naming the offending field.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self, dim: usize) -> Result<(), ConfigError> {
        if self.n_init < dim + 2 {
            return Err(ConfigError::new(
                "n_init",
                format!("must be at least d + 2 = {} (got {})", dim + 2, self.n_init),
            ));
        }
        if self.workers == 0 {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::new("batch_size", "must be at least 1"));
        }
        if !(self.rho0 > 0.0 && self.rho0 <= 1.0) {
            return Err(ConfigError::new(
                "rho0",
                format!("must lie in (0, 1] (got {})", self.rho0),
            ));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(ConfigError::new(
                "p",
                format!("must be positive (got {})", self.p),
            ));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(ConfigError::new(
                "q",
                format!("must lie in (0, 1] (got {})", self.q),
            ));
        }
        if self.use_space_rescaling {
            if self.cloud_size < 100 {
                return Err(ConfigError::new(
                    "cloud_size",
                    format!("must be at least 100 (got {})", self.cloud_size),
                ));
            }
            if !(self.best_fraction > 0.0 && self.best_fraction <= 0.5) {
                return Err(ConfigError::new(
                    "best_fraction",
                    format!("must lie in (0, 0.5] (got {})", self.best_fraction),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    Subsequent,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Subsequent => "subsequent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub stage: Stage,
    pub index: usize,
    pub x_unit: Vec<f64>,
    pub x_original: Vec<f64>,
    /// Value returned by the objective, before any maximization transform.
    pub f_raw: f64,
    /// Rescaled value the surrogate is trained on; `None` only in partial
    /// histories cut short before the rescaler existed.
    pub f_scaled: Option<f64>,
    pub radius_used: Option<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub iteration: usize,
    pub density: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub best_index: usize,
    pub history: Vec<EvaluationRecord>,
    pub schedule_trace: Vec<ScheduleEntry>,
    pub rescaler: ObjectiveRescaler,
}

/// One line of progress after a subsequent iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub density: f64,
    pub radius: f64,
    pub best_f: f64,
}

impl std::fmt::Display for Progress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter={} rho={} r={} best={}",
            self.iteration, self.density, self.radius, self.best_f
        )
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("objective failed at evaluation {index}: {message}")]
    Objective {
        index: usize,
        message: String,
        partial: Box<Vec<EvaluationRecord>>,
    },
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Design(#[from] LhError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Schedule(#[from] CorsError),
}

impl EngineError {
    /// Evaluations completed before an objective failure.
    pub fn partial_history(&self) -> Option<&[EvaluationRecord]> {
        match self {
            EngineError::Objective { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// A batch that stopped on an objective failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation of point {failed} failed: {error}")]
pub struct BatchError {
    pub failed: usize,
    pub error: EvalError,
    /// `(position, value)` of every point that finished, in input order.
    pub completed: Vec<(usize, f64)>,
}

/// Evaluates every point once with at most `workers` calls in flight.
///
/// Results follow input order. The first failure stops the queue; points
/// already running are allowed to finish.
pub fn evaluate_batch<O: Objective + ?Sized>(
    objective: &O,
    points: &[Vec<f64>],
    workers: usize,
) -> Result<Vec<f64>, BatchError> {
    let workers = workers.max(1).min(points.len());
    if workers == 0 {
        return Ok(Vec::new());
    }
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<f64, EvalError>>>> = Mutex::new(vec![None; points.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let out = objective.evaluate(&points[i]);
                if out.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                slots.lock().expect("result slots")[i] = Some(out);
            });
        }
    });
    let slots = slots.into_inner().expect("result slots");
    let mut completed = Vec::with_capacity(points.len());
    let mut failure = None;
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(Ok(v)) => completed.push((i, v)),
            Some(Err(e)) if failure.is_none() => failure = Some((i, e)),
            _ => {}
        }
    }
    match failure {
        Some((failed, error)) => Err(BatchError {
            failed,
            error,
            completed,
        }),
        None => Ok(completed.into_iter().map(|(_, v)| v).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Record with the lowest `f_raw`; ties go to the lowest index.
pub fn best_so_far(history: &[EvaluationRecord]) -> Option<&EvaluationRecord> {
    best_so_far_by(history, Sense::Minimize)
}

pub fn best_so_far_by(history: &[EvaluationRecord], sense: Sense) -> Option<&EvaluationRecord> {
    history.iter().fold(None, |best: Option<&EvaluationRecord>, r| match best {
        None => Some(r),
        Some(b) => {
            let better = match sense {
                Sense::Minimize => r.f_raw < b.f_raw,
                Sense::Maximize => r.f_raw > b.f_raw,
            };
            if better || (r.f_raw == b.f_raw && r.index < b.index) {
                Some(r)
            } else {
                Some(b)
            }
        }
    })
}

/// Runs the full procedure with no progress reporting.
pub fn run<O: Objective + ?Sized>(
    objective: &O,
    domain: &BoundedDomain,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult, EngineError> {
    run_with_progress(objective, domain, cfg, |_| {})
}

pub fn run_with_progress<O, F>(
    objective: &O,
    domain: &BoundedDomain,
    cfg: &OptimizationConfig,
    mut progress: F,
) -> Result<OptimizationResult, EngineError>
where
    O: Objective + ?Sized,
    F: FnMut(&Progress),
{
    let dim = domain.dim();
    cfg.validate(dim)?;
    let sense = if cfg.maximize {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let minimized = |f: f64| if cfg.maximize { maximize_transform(f) } else { f };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let design = LatinHypercube::diagonal(cfg.n_init, dim)?.improve(cfg.lh_attempts, &mut rng);
    let mut history: Vec<EvaluationRecord> = Vec::with_capacity(cfg.n_init + cfg.m);
    let initial: Vec<Vec<f64>> = design.to_unit_points();
    for chunk in initial.chunks(cfg.workers) {
        let entries: Vec<(Vec<f64>, Option<f64>, bool)> =
            chunk.iter().map(|u| (u.clone(), None, false)).collect();
        evaluate_into(objective, domain, cfg, Stage::Initial, entries, None, &mut history)?;
    }

    let targets: Vec<f64> = history.iter().map(|r| minimized(r.f_raw)).collect();
    let rescaler = ObjectiveRescaler::fit(&targets, cfg.q)?;
    for (record, target) in history.iter_mut().zip(&targets) {
        record.f_scaled = Some(rescaler.rescale(*target)?);
    }

    let mut schedule_trace = Vec::with_capacity(cfg.m);
    if cfg.m > 0 {
        let sched = RadiusSchedule::new(cfg.rho0, cfg.p, cfg.m, cfg.n_init, dim)?;
        let mut iteration = 1;
        while iteration <= cfg.m {
            let k = cfg.batch_size.min(cfg.m - iteration + 1);
            let centers: Vec<Vec<f64>> = history.iter().map(|r| r.x_unit.clone()).collect();
            let values: Vec<f64> = history
                .iter()
                .map(|r| r.f_scaled.expect("rescaled before fitting"))
                .collect();
            let model = fit_surrogate(&centers, &values, cfg, &mut rng)?;
            let batch =
                cors::propose_batch(&model, &centers, &sched, iteration, k, &mut rng, &cfg.proposal)?;

            let entries = batch
                .iter()
                .map(|b| (b.proposal.point.clone(), Some(b.radius), b.proposal.fallback))
                .collect();
            evaluate_into(
                objective,
                domain,
                cfg,
                Stage::Subsequent,
                entries,
                Some(&rescaler),
                &mut history,
            )?;

            let best_f = best_so_far_by(&history, sense).expect("non-empty").f_raw;
            for b in &batch {
                let entry = ScheduleEntry {
                    iteration: b.iteration,
                    density: b.density,
                    radius: b.radius,
                };
                schedule_trace.push(entry);
                progress(&Progress {
                    iteration: b.iteration,
                    density: b.density,
                    radius: b.radius,
                    best_f,
                });
            }
            iteration += k;
        }
    }

    let best = best_so_far_by(&history, sense).expect("non-empty history");
    Ok(OptimizationResult {
        best_x: best.x_original.clone(),
        best_f: best.f_raw,
        best_index: best.index,
        rescaler,
        history,
        schedule_trace,
    })
}

fn fit_surrogate(
    centers: &[Vec<f64>],
    values: &[f64],
    cfg: &OptimizationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RbfModel, EngineError> {
    let model = RbfModel::fit(centers, values, None)?;
    if !cfg.use_space_rescaling {
        return Ok(model);
    }
    let scaling = compute_space_scaling(&model, cfg.cloud_size, cfg.best_fraction, rng)?;
    if scaling.is_degenerate() {
        return Ok(model);
    }
    // a singular rescaled system keeps the plain fit
    Ok(refit_with_scaling(centers, values, &scaling).unwrap_or(model))
}

/// Evaluates one synchronous batch and appends its records.
fn evaluate_into<O: Objective + ?Sized>(
    objective: &O,
    domain: &BoundedDomain,
    cfg: &OptimizationConfig,
    stage: Stage,
    entries: Vec<(Vec<f64>, Option<f64>, bool)>,
    rescaler: Option<&ObjectiveRescaler>,
    history: &mut Vec<EvaluationRecord>,
) -> Result<(), EngineError> {
    let originals: Vec<Vec<f64>> = entries
        .iter()
        .map(|(u, _, _)| domain.from_unit(u))
        .collect::<Result<_, _>>()?;
    let base = history.len();
    let outcome = evaluate_batch(objective, &originals, cfg.workers);
    let (values, failure): (Vec<Option<f64>>, Option<(usize, String)>) = match outcome {
        Ok(vals) => (vals.into_iter().map(Some).collect(), None),
        Err(e) => {
            let mut vals = vec![None; entries.len()];
            for (i, v) in e.completed {
                vals[i] = Some(v);
            }
            (vals, Some((e.failed, e.error.to_string())))
        }
    };
    let mut failure = failure;
    for (k, ((unit, radius, fallback), (original, value))) in
        entries.into_iter().zip(originals.into_iter().zip(values)).enumerate()
    {
        if failure.as_ref().is_some_and(|(at, _)| k >= *at) {
            break;
        }
        let Some(f) = value else { break };
        if !(f.is_finite() && f >= 0.0) {
            failure = Some((k, format!("objective returned {f}, expected a finite non-negative value")));
            break;
        }
        history.push(EvaluationRecord {
            stage,
            index: base + k,
            x_unit: unit,
            x_original: original,
            f_raw: f,
            f_scaled: match rescaler {
                Some(r) => Some(r.rescale(if cfg.maximize { maximize_transform(f) } else { f })?),
                None => None,
            },
            radius_used: radius,
            fallback,
        });
    }
    if let Some((k, message)) = failure {
        return Err(EngineError::Objective {
            index: base + k,
            message,
            partial: Box::new(std::mem::take(history)),
        });
    }
    Ok(())
}
