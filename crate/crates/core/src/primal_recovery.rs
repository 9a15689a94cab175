//! Primal recovery from a maximizing dual vector.
//!
//! At an optimum every term with positive weight satisfies a monomial
//! equation in `x`. Objective term `t` gives `term_t(x) = w_t V`; a term of an
//! active constraint `i` gives `term_t(x) = w_t / u_i`. Taking logs turns these
//! into `A z = gamma` with `z = ln x`. The system has a unique solution exactly
//! when `A` has full column rank; otherwise the optimal set is an affine family
//! in `z` and the minimum-norm member is reported.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::duality::{DualSolution, WeightSlot};
use crate::linalg;
use crate::posy_core::{self, GpStage, ModelError, DEFAULT_RANK_TOL};

pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-8;
pub const CONSISTENCY_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecoveryError {
    #[error("every dual weight is below the activity threshold")]
    DegenerateDual,
    #[error("dual value must be positive, got {0}")]
    NonpositiveDualValue(f64),
    #[error("dual vector has {found} weights but the stage has {expected} terms")]
    WeightCount { expected: usize, found: usize },
    #[error("log-linear system is inconsistent (residual {residual:.3e}); the dual vector is not optimal")]
    InconsistentSystem { residual: f64 },
    #[error("the primal infimum is not attained: {0}")]
    NotAttained(String),
    #[error("recovered point violates constraint {constraint} by {violation:.3e}")]
    InfeasibleRecovery { constraint: usize, violation: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rows of `A z = gamma` for the terms that carry positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Which term each row came from.
    pub rows: Vec<WeightSlot>,
    /// 0-based indices of constraints whose activity `u_i` exceeds the threshold.
    pub active_constraints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalReport {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub unique: bool,
    pub rank: usize,
    pub optimal_set_dimension: usize,
    /// Largest gap between weights recomputed from `x` and the dual weights.
    pub consistency_residual: f64,
    /// `|g0(x) - V| / max(1, V)`.
    pub duality_gap: f64,
    /// `max_i g_i(x) - 1`, absent when the stage has no constraints.
    pub feasibility_margin: Option<f64>,
    /// Unit vector in `z` along which the optimum is not unique.
    pub nullspace_direction: Option<Vec<f64>>,
    pub system_residual: f64,
}

/// Assemble the log-linear system from the dual optimum.
pub fn build_log_linear_system(
    s: &GpStage,
    sol: &DualSolution,
    activity_tol: f64,
) -> Result<LogLinearSystem, RecoveryError> {
    if !(sol.value > 0.0 && sol.value.is_finite()) {
        return Err(RecoveryError::NonpositiveDualValue(sol.value));
    }
    if sol.w.len() != s.term_count() {
        return Err(RecoveryError::WeightCount {
            expected: s.term_count(),
            found: sol.w.len(),
        });
    }
    let mut exps: Vec<&[f64]> = Vec::new();
    let mut rhs = Vec::new();
    let mut rows = Vec::new();
    let mut active_constraints = Vec::new();
    let mut offset = 0;
    for (b, p) in s.blocks().enumerate() {
        let w = &sol.w[offset..offset + p.len()];
        offset += p.len();
        let u: f64 = w.iter().sum();
        if b > 0 {
            if u <= activity_tol {
                continue;
            }
            active_constraints.push(b - 1);
        }
        for (t, (term, &wt)) in p.terms().iter().zip(w).enumerate() {
            if wt <= activity_tol {
                continue;
            }
            let gamma = if b == 0 {
                (wt * sol.value / term.coeff()).ln()
            } else {
                (wt / (term.coeff() * u)).ln()
            };
            exps.push(term.exponents());
            rhs.push(gamma);
            rows.push(WeightSlot { block: b, term: t });
        }
    }
    if rows.is_empty() {
        return Err(RecoveryError::DegenerateDual);
    }
    let n = s.n();
    Ok(LogLinearSystem {
        matrix: DMatrix::from_fn(rows.len(), n, |i, j| exps[i][j]),
        rhs: DVector::from_vec(rhs),
        rows,
        active_constraints,
    })
}

/// Solve the log-linear system and report uniqueness and residual diagnostics.
pub fn recover_primal(
    sys: &LogLinearSystem,
    s: &GpStage,
    sol: &DualSolution,
) -> Result<PrimalReport, RecoveryError> {
    if sys.rows.is_empty() {
        return Err(RecoveryError::DegenerateDual);
    }
    check_attainable(s, sol)?;
    let z = linalg::min_norm_solve(&sys.matrix, &sys.rhs);
    let system_residual = (&sys.matrix * &z - &sys.rhs).amax();
    if system_residual > CONSISTENCY_TOL {
        return Err(RecoveryError::InconsistentSystem {
            residual: system_residual,
        });
    }
    let n = s.n();
    let rank = posy_core::rank(&sys.matrix, DEFAULT_RANK_TOL);
    let nullspace_direction = (rank < n)
        .then(|| linalg::nullspace(&sys.matrix))
        .filter(|ns| ns.ncols() > 0)
        .map(|ns| ns.column(0).iter().copied().collect());
    let z: Vec<f64> = z.iter().copied().collect();
    let x: Vec<f64> = z.iter().map(|v| v.exp()).collect();

    let objective_value = s.objective().eval(&x)?;
    let duality_gap = (objective_value - sol.value).abs() / sol.value.max(1.0);
    let margins = s
        .constraints()
        .iter()
        .map(|g| g.eval(&x).map(|v| v - 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((i, &m)) = margins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, &m)| m > FEASIBILITY_TOL)
    {
        return Err(RecoveryError::InfeasibleRecovery {
            constraint: i,
            violation: m,
        });
    }
    let feasibility_margin = margins.iter().copied().reduce(f64::max);
    if duality_gap > GAP_TOL {
        return Err(RecoveryError::NotAttained(format!(
            "recovered objective misses the dual value by {duality_gap:.3e}"
        )));
    }

    let weights = weights_from_primal(s, &x, Some(&sol.lambda))?;
    let consistency_residual = weights
        .flat()
        .iter()
        .zip(&sol.w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(PrimalReport {
        x,
        z,
        unique: rank == n,
        rank,
        optimal_set_dimension: n - rank,
        consistency_residual,
        duality_gap,
        feasibility_margin,
        nullspace_direction,
        system_residual,
    })
}

/// An attained optimum gives every objective term and every term of an active
/// constraint positive weight, so a zero there rules attainment out.
fn check_attainable(s: &GpStage, sol: &DualSolution) -> Result<(), RecoveryError> {
    let mut offset = 0;
    for (b, p) in s.blocks().enumerate() {
        let w = &sol.w[offset..offset + p.len()];
        offset += p.len();
        let u: f64 = w.iter().sum();
        if b > 0 && u <= DEFAULT_ACTIVITY_TOL {
            continue;
        }
        if let Some(t) = w.iter().position(|&v| v <= DEFAULT_ACTIVITY_TOL) {
            let place = if b == 0 {
                format!("objective term {t}")
            } else {
                format!("term {t} of active constraint {}", b - 1)
            };
            return Err(RecoveryError::NotAttained(format!(
                "{place} has zero dual weight"
            )));
        }
    }
    Ok(())
}

/// Term weights implied by a primal point.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalWeights {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
}

impl PrimalWeights {
    /// Flattened in dual-layout order.
    pub fn flat(&self) -> Vec<f64> {
        self.objective
            .iter()
            .chain(self.constraints.iter().flatten())
            .copied()
            .collect()
    }
}

/// Objective weights `term_t(x) / g0(x)`; constraint weights
/// `u_i term_it(x) / g_i(x)` when the activities `u` are supplied, otherwise the
/// plain ratios `term_it(x) / g_i(x)`.
pub fn weights_from_primal(
    s: &GpStage,
    x: &[f64],
    u: Option<&[f64]>,
) -> Result<PrimalWeights, ModelError> {
    let ratios = |p: &posy_core::Posynomial| -> Result<Vec<f64>, ModelError> {
        let total = p.eval(x)?;
        Ok(p.terms().iter().map(|t| t.eval(x) / total).collect())
    };
    let objective = ratios(s.objective())?;
    let constraints = s
        .constraints()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let r = ratios(g)?;
            let scale = u.map_or(1.0, |u| u[i]);
            Ok(r.into_iter().map(|v| v * scale).collect())
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(PrimalWeights {
        objective,
        constraints,
    })
}

/// Convenience wrapper: build the system with the default threshold and recover.
pub fn recover(s: &GpStage, sol: &DualSolution) -> Result<PrimalReport, RecoveryError> {
    let sys = build_log_linear_system(s, sol, DEFAULT_ACTIVITY_TOL)?;
    recover_primal(&sys, s, sol)
}
