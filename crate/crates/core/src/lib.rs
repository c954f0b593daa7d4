//! Global optimization of expensive black-box functions on box domains.
//!
//! The pipeline maps the box onto the unit cube, evaluates a Latin hypercube
//! design, rescales objective values into `[0, 1]`, and then alternates
//! between fitting a cubic RBF response surface and sampling where the
//! surface is low but not too close to earlier samples. The exclusion radius
//! shrinks as a ball-density schedule decays, moving the search from global
//! to local. Objective calls are dispatched in parallel batches.
//!
//! ```
//! use corsrbf::{run, NamedObjective, OptimizationConfig};
//!
//! let valley = NamedObjective::valley();
//! let cfg = OptimizationConfig { n_init: 12, m: 4, cloud_size: 500, ..Default::default() };
//! let result = run(&valley, valley.domain(), &cfg).unwrap();
//! assert_eq!(result.history.len(), 16);
//! ```

pub mod benchfns;
pub mod cors;
pub mod domain_scaling;
pub mod engine;
pub mod latin_hypercube;
pub mod objective;
pub mod surrogate;

pub use benchfns::{grid_oracle, multimodal, sphere, valley, GridMinimum, NamedObjective};
pub use cors::{propose_batch, propose_point, ProposalConfig, RadiusSchedule};
pub use domain_scaling::{maximization_wrapper, BoundedDomain, Maximize, ObjectiveRescaler};
pub use engine::{
    best_so_far, evaluate_batch, run, run_with_progress, EngineError, EvaluationRecord,
    OptimizationConfig, OptimizationResult, Stage,
};
pub use latin_hypercube::{spread, LatinHypercube};
pub use objective::{EvalError, Infallible, Objective};
pub use surrogate::{compute_space_scaling, refit_with_scaling, RbfModel, SpaceScaling};
