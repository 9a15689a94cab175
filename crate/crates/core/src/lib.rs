//! Posynomial geometric programming with preemptive lexicographic objectives.
//!
//! Each priority level is solved through its dual program: the normality and
//! orthogonality conditions fix the feasible weights, the dual function is
//! maximized over them, and the primal point is recovered from a log-linear
//! system whose rank decides whether the minimizer is unique. An independent
//! log-space penalty solver in [`oracle`] cross-checks the dual route.

pub mod duality;
pub mod lex_driver;
mod linalg;
pub mod oracle;
pub mod posy_core;
pub mod primal_recovery;

pub use duality::{
    build_dual, eval_dual, eval_log_dual_gradient, solve_dual, DualError, DualMethod, DualOptions,
    DualProgram, DualSolution, WeightSlot,
};
pub use lex_driver::{
    carry_constraint, evaluate_objective_vector, solve_lexicographic, LexError, LexMode,
    LexOptions, LexSolution, StageFailure, StageSolution,
};
pub use posy_core::{
    degree_of_difficulty, exponent_matrix, lex_compare, normalize, rank, Constraint, GpStage,
    LexGpProblem, LexOrdering, ModelError, Posynomial, Term,
};
pub use primal_recovery::{
    build_log_linear_system, recover_primal, weights_from_primal, LogLinearSystem, PrimalReport,
    RecoveryError,
};
