//! Sequential lexicographic solve over priority-ordered objectives.
//!
//! Stage `k` minimizes objective `k` under the original constraints. In
//! [`LexMode::Strict`] every earlier objective is additionally held at its
//! optimum through an upper bound `g_j(x) <= g_j* (1 + eps)`. In
//! [`LexMode::Independent`] each stage sees only the original constraints.

use crate::duality::{build_dual, solve_dual, DualError, DualOptions, DualSolution};
use crate::posy_core::{degree_of_difficulty, Constraint, LexGpProblem, ModelError, Posynomial};
use crate::primal_recovery::{
    build_log_linear_system, recover_primal, PrimalReport, RecoveryError, DEFAULT_ACTIVITY_TOL,
};

pub const DEFAULT_CARRY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LexMode {
    #[default]
    Strict,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexOptions {
    /// Relative slack on carried bounds.
    pub carry_eps: f64,
    pub activity_tol: f64,
    pub dual: DualOptions,
}

impl Default for LexOptions {
    fn default() -> Self {
        Self {
            carry_eps: DEFAULT_CARRY_EPS,
            activity_tol: DEFAULT_ACTIVITY_TOL,
            dual: DualOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    /// 0-based priority level.
    pub stage_index: usize,
    pub dual: DualSolution,
    pub primal: PrimalReport,
    /// Objective evaluated at `primal.x`.
    pub objective_value: f64,
    /// Bound carried into later stages (strict mode, all but the last stage).
    pub carried_bound: Option<f64>,
    pub degree_of_difficulty: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexSolution {
    pub stages: Vec<StageSolution>,
    pub final_x: Vec<f64>,
    pub objective_vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StageFailure {
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A failed stage together with every stage solved before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("stage {} failed: {source}", stage + 1)]
pub struct LexError {
    /// 0-based index of the failing stage.
    pub stage: usize,
    pub source: StageFailure,
    pub partial: Vec<StageSolution>,
}

/// `g(x) <= bound (1 + eps)` for an objective already minimized to `bound`.
pub fn carry_constraint(g: &Posynomial, bound: f64, eps: f64) -> Result<Constraint, ModelError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ModelError::NonpositiveBound(bound * (1.0 + eps)));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(ModelError::NonpositiveBound(bound));
    }
    Constraint::new(g.clone(), bound * (1.0 + eps))
}

pub fn solve_lexicographic(
    p: &LexGpProblem,
    mode: LexMode,
    opts: &LexOptions,
) -> Result<LexSolution, LexError> {
    let mut stages: Vec<StageSolution> = Vec::with_capacity(p.objectives().len());
    let mut carried: Vec<Constraint> = Vec::new();
    for k in 0..p.objectives().len() {
        let solved = solve_stage(p, k, &carried, mode, opts);
        let stage = match solved {
            Ok(s) => s,
            Err(source) => {
                return Err(LexError {
                    stage: k,
                    source,
                    partial: stages,
                })
            }
        };
        if let Some(bound) = stage.carried_bound {
            carried.push(
                Constraint::new(p.objectives()[k].clone(), bound).map_err(|e| LexError {
                    stage: k,
                    source: e.into(),
                    partial: stages.clone(),
                })?,
            );
        }
        stages.push(stage);
    }
    let final_x = stages
        .last()
        .map(|s| s.primal.x.clone())
        .unwrap_or_default();
    let objective_vector = evaluate_objective_vector(p, &final_x).map_err(|e| LexError {
        stage: stages.len().saturating_sub(1),
        source: e.into(),
        partial: stages.clone(),
    })?;
    Ok(LexSolution {
        stages,
        final_x,
        objective_vector,
    })
}

fn solve_stage(
    p: &LexGpProblem,
    k: usize,
    carried: &[Constraint],
    mode: LexMode,
    opts: &LexOptions,
) -> Result<StageSolution, StageFailure> {
    let s = p.stage(k, carried);
    let dual = solve_dual(&build_dual(&s), &opts.dual)?;
    let sys = build_log_linear_system(&s, &dual, opts.activity_tol)?;
    let primal = recover_primal(&sys, &s, &dual)?;
    let objective = &p.objectives()[k];
    let objective_value = objective.eval(&primal.x)?;
    let has_successor = k + 1 < p.objectives().len();
    let carried_bound = match mode {
        LexMode::Strict if has_successor => {
            Some(carry_constraint(objective, objective_value, opts.carry_eps)?.bound())
        }
        _ => None,
    };
    Ok(StageSolution {
        stage_index: k,
        degree_of_difficulty: degree_of_difficulty(&s),
        dual,
        primal,
        objective_value,
        carried_bound,
    })
}

/// Every objective at `x`, in priority order.
pub fn evaluate_objective_vector(p: &LexGpProblem, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    p.objectives().iter().map(|g| g.eval(x)).collect()
}
