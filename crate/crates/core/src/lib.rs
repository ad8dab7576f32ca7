//! Unified extra-step solvers for stochastic and finite-sum variational inequalities.
//!
//! A run combines a [`problems::VIProblem`], an [`estimators::EstimatorKind`]
//! and a [`solver::SolverConfig`]:
//!
//! ```
//! use extrastep::{gen_policeman_burglar, run_solver, EstimatorKind, SolverConfig};
//!
//! let p = gen_policeman_burglar(3, 0.6, 3.0, 1).unwrap();
//! let gamma = 1.0 / (3.0 * p.constants().lipschitz);
//! let trace = run_solver(&p, &EstimatorKind::FullDet, &SolverConfig::new(gamma, 200)).unwrap();
//! let first = trace.rows[0].gap_avg.unwrap();
//! assert!(trace.last().gap_avg.unwrap() < first);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use estimators::{
    assumption_constants, importance_weights, optimal_tau, AssumptionConstants, ConstantInputs, CostLedger,
    EstimatorKind, EstimatorState, Quantizer,
};
pub use metrics::{
    distance_to_solution, duality_gap_bilinear, random_pairs, restricted_gap_bruteforce, verify_assumption2,
    verify_unbiasedness, GapEvaluator, GapSet, VerificationMode, VerificationReport,
};
pub use problems::{gen_mixing_vi, gen_policeman_burglar, gen_quadratic_vi, ProblemConstants, VIProblem};
pub use prox::{project_simplex, prox_eval, ProxSpec};
pub use rng::{rng_stream, RngStream};
pub use solver::{
    auto_parameters, default_stride, initial_point, run_solver, run_solver_from, step_size_bound, Regime, RunTrace,
    SolverConfig, TraceRow,
};

/// Library version echoed into trace headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
