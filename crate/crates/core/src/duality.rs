//! Dual program of a single GP stage and its maximization.
//!
//! Each term of the stage owns one dual weight. Weights are laid out flat,
//! objective terms first and then every constraint's terms in declaration
//! order. Feasible weights satisfy the normality row (objective weights sum to
//! one) and one orthogonality row per variable (`sum_t w_t a_tj = 0`). The dual
//! function is
//!
//! ```text
//! V(w) = prod_t (c_t / w_t)^w_t * prod_i u_i^u_i,   u_i = sum of block i weights
//! ```
//!
//! and is handled in log form throughout. A factor whose weight is zero
//! contributes one.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::posy_core::{degree_of_difficulty, GpStage};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DualError {
    #[error("dual program is infeasible: {0}")]
    Infeasible(String),
    #[error("dual function is unbounded above; the primal constraints are inconsistent")]
    Unbounded,
    #[error("dual ascent stopped after {} iterations (projected gradient {:.3e})", .best.iterations, .best.projected_gradient)]
    IterationLimit { best: Box<DualSolution> },
    #[error("weight vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("weight {index} is {value}; {requirement}")]
    InvalidWeight {
        index: usize,
        value: f64,
        requirement: &'static str,
    },
}

/// Position of one dual weight: block 0 is the objective, block `i >= 1` is
/// constraint `i`; `term` is the 0-based term index inside the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSlot {
    pub block: usize,
    pub term: usize,
}

#[derive(Debug, Clone)]
pub struct DualProgram<'a> {
    stage: &'a GpStage,
    layout: Vec<WeightSlot>,
    blocks: Vec<Range<usize>>,
    equality_matrix: DMatrix<f64>,
    equality_rhs: DVector<f64>,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualMethod {
    LinearExact,
    ConcaveMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub w: Vec<f64>,
    pub value: f64,
    /// Per-constraint weight sums `u_i`.
    pub lambda: Vec<f64>,
    /// `max |E w - rhs|`.
    pub residual: f64,
    pub method: DualMethod,
    pub iterations: usize,
    pub projected_gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    pub linear_tol: f64,
    pub optimality_tol: f64,
    pub max_iter: usize,
    /// Skip the direct linear solve even when it applies.
    pub force_concave: bool,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            linear_tol: 1e-10,
            optimality_tol: 1e-8,
            max_iter: 10_000,
            force_concave: false,
        }
    }
}

/// Lay out the weights and assemble the normality/orthogonality system.
pub fn build_dual(s: &GpStage) -> DualProgram<'_> {
    let n = s.n();
    let mut layout = Vec::with_capacity(s.term_count());
    let mut blocks = Vec::new();
    let mut coeffs = Vec::with_capacity(s.term_count());
    for (b, p) in s.blocks().enumerate() {
        let start = layout.len();
        for (t, term) in p.terms().iter().enumerate() {
            layout.push(WeightSlot { block: b, term: t });
            coeffs.push(term.coeff());
        }
        blocks.push(start..layout.len());
    }
    let terms: Vec<_> = s.all_terms().collect();
    let objective_terms = s.objective().len();
    let equality_matrix = DMatrix::from_fn(n + 1, terms.len(), |r, c| match r {
        0 => f64::from(u8::from(c < objective_terms)),
        j => terms[c].exponents()[j - 1],
    });
    let mut equality_rhs = DVector::zeros(n + 1);
    equality_rhs[0] = 1.0;
    DualProgram {
        stage: s,
        layout,
        blocks,
        equality_matrix,
        equality_rhs,
        coeffs,
    }
}

impl<'a> DualProgram<'a> {
    pub fn stage(&self) -> &'a GpStage {
        self.stage
    }

    pub fn layout(&self) -> &[WeightSlot] {
        &self.layout
    }

    /// Flat index range of block `b` (0 = objective).
    pub fn block(&self, b: usize) -> Range<usize> {
        self.blocks[b].clone()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn equality_matrix(&self) -> &DMatrix<f64> {
        &self.equality_matrix
    }

    pub fn equality_rhs(&self) -> &DVector<f64> {
        &self.equality_rhs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Weight sums of constraint blocks 1.. (the objective block is excluded).
    pub fn constraint_sums(&self, w: &[f64]) -> Vec<f64> {
        self.blocks[1..]
            .iter()
            .map(|r| w[r.clone()].iter().sum())
            .collect()
    }

    /// `max |E w - rhs|`.
    pub fn residual(&self, w: &[f64]) -> f64 {
        let wv = DVector::from_column_slice(w);
        (&self.equality_matrix * wv - &self.equality_rhs).amax()
    }

    fn check_len(&self, w: &[f64]) -> Result<(), DualError> {
        if w.len() != self.len() {
            return Err(DualError::Length {
                expected: self.len(),
                found: w.len(),
            });
        }
        Ok(())
    }

    /// `ln V(w)` for nonnegative `w`.
    pub fn log_dual(&self, w: &[f64]) -> Result<f64, DualError> {
        self.check_len(w)?;
        if let Some(index) = w.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(DualError::InvalidWeight {
                index,
                value: w[index],
                requirement: "dual weights must be nonnegative",
            });
        }
        Ok(self.log_dual_unchecked(w))
    }

    fn log_dual_unchecked(&self, w: &[f64]) -> f64 {
        let terms: f64 = w
            .iter()
            .zip(&self.coeffs)
            .filter(|(&wt, _)| wt > 0.0)
            .map(|(&wt, &c)| wt * (c / wt).ln())
            .sum();
        let sums: f64 = self
            .constraint_sums(w)
            .into_iter()
            .filter(|&u| u > 0.0)
            .map(|u| u * u.ln())
            .sum();
        terms + sums
    }

    /// Block index of the constraint owning weight `t`, or `None` for objective terms.
    fn constraint_of(&self, t: usize) -> Option<usize> {
        match self.layout[t].block {
            0 => None,
            b => Some(b - 1),
        }
    }

    /// Gradient of `ln V` valid on the closed orthant. Components whose true
    /// derivative is `+inf` (a zero weight in an objective block or a
    /// constraint with positive activity) get a large finite surrogate; a zero
    /// weight in an all-zero block gets `ln(sum of block coefficients)`, the
    /// best directional derivative of entering that block.
    fn boundary_gradient(&self, w: &[f64]) -> Vec<f64> {
        const LOG_FLOOR: f64 = -690.0;
        let u = self.constraint_sums(w);
        (0..w.len())
            .map(|t| {
                let c = self.coeffs[t];
                let ui = self.constraint_of(t).map(|i| u[i]);
                if w[t] > 0.0 {
                    return match ui {
                        None => (c / w[t]).ln() - 1.0,
                        Some(ui) => (c * ui / w[t]).ln(),
                    };
                }
                match ui {
                    Some(ui) if ui <= 0.0 => {
                        let i = self.constraint_of(t).unwrap_or(0);
                        self.coeffs[self.blocks[i + 1].clone()]
                            .iter()
                            .sum::<f64>()
                            .ln()
                    }
                    Some(ui) => c.ln() + ui.ln() - LOG_FLOOR,
                    None => c.ln() - LOG_FLOOR - 1.0,
                }
            })
            .collect()
    }

    /// Hessian of `ln V` restricted to the strictly positive components `free`.
    fn hessian(&self, w: &[f64], free: &[usize]) -> DMatrix<f64> {
        let u = self.constraint_sums(w);
        DMatrix::from_fn(free.len(), free.len(), |a, b| {
            let (s, t) = (free[a], free[b]);
            let mut h = 0.0;
            if s == t {
                h -= 1.0 / w[s];
            }
            if let (Some(i), Some(k)) = (self.constraint_of(s), self.constraint_of(t)) {
                if i == k {
                    h += 1.0 / u[i];
                }
            }
            h
        })
    }
}

/// `V(w)`; weights need not satisfy the equality system.
pub fn eval_dual(d: &DualProgram<'_>, w: &[f64]) -> Result<f64, DualError> {
    Ok(d.log_dual(w)?.exp())
}

/// Exact gradient of `ln V` at a strictly positive weight vector.
///
/// Objective components are `ln(c_t / w_t) - 1`; constraint components are
/// `ln(c_t u_i / w_t)`.
pub fn eval_log_dual_gradient(d: &DualProgram<'_>, w: &[f64]) -> Result<Vec<f64>, DualError> {
    d.check_len(w)?;
    if let Some(index) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(DualError::InvalidWeight {
            index,
            value: w[index],
            requirement: "the gradient needs strictly positive weights",
        });
    }
    Ok(d.boundary_gradient(w))
}

/// Maximize the dual function over nonnegative solutions of the equality system.
///
/// Zero degree of difficulty with a nonsingular system is a single linear
/// solve. Everything else goes through [`maximize_log_dual`].
pub fn solve_dual(d: &DualProgram<'_>, opts: &DualOptions) -> Result<DualSolution, DualError> {
    if !opts.force_concave && degree_of_difficulty(d.stage) == 0 {
        if let Some(w) = linear_solution(d, opts.linear_tol)? {
            return Ok(finish(d, w, DualMethod::LinearExact, 0, 0.0));
        }
    }
    maximize_log_dual(d, opts)
}

/// Direct solve of the square system; `Ok(None)` when it is singular.
fn linear_solution(d: &DualProgram<'_>, tol: f64) -> Result<Option<Vec<f64>>, DualError> {
    let e = &d.equality_matrix;
    if crate::posy_core::rank(e, crate::posy_core::DEFAULT_RANK_TOL) < e.ncols() {
        return Ok(None);
    }
    let Some(w) = e.clone().lu().solve(&d.equality_rhs) else {
        return Ok(None);
    };
    if let Some(index) = w.iter().position(|&v| v < -tol) {
        return Err(DualError::Infeasible(format!(
            "the unique solution of the equality system has negative weight {} at index {index}",
            w[index]
        )));
    }
    Ok(Some(w.iter().map(|&v| v.max(0.0)).collect()))
}

fn finish(
    d: &DualProgram<'_>,
    mut w: Vec<f64>,
    method: DualMethod,
    iterations: usize,
    projected_gradient: f64,
) -> DualSolution {
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    let value = d.log_dual_unchecked(&w).exp();
    DualSolution {
        lambda: d.constraint_sums(&w),
        residual: d.residual(&w),
        value,
        w,
        method,
        iterations,
        projected_gradient,
    }
}

/// Relative interior of `{w >= 0 : E w = rhs}`: a feasible point whose support
/// is as large as possible, together with that support.
///
/// Weight `t` is in the support when some feasible point has `w_t > 0`; the
/// average of one such point per weight is positive on the whole support.
fn relative_interior(d: &DualProgram<'_>) -> Result<(Vec<f64>, Vec<usize>), DualError> {
    let e = &d.equality_matrix;
    let b = &d.equality_rhs;
    let t_len = e.ncols();
    let tol = 1e-9 * e.amax().max(1.0);
    // Anything below the smallest lift is round-off from the NNLS solves.
    let noise = 1e-8;
    let mut points: Vec<DVector<f64>> = Vec::new();
    for t in 0..t_len {
        if points.iter().any(|p| p[t] > noise) {
            continue;
        }
        for lift in [1e-1, 1e-3, 1e-6] {
            let shifted = b - e.column(t) * lift;
            let mut w = linalg::nnls(e, &shifted);
            w[t] += lift;
            if (e * &w - b).amax() <= tol {
                points.push(w);
                break;
            }
        }
    }
    if points.is_empty() {
        return Err(DualError::Infeasible(
            "no nonnegative weights satisfy normality and orthogonality".into(),
        ));
    }
    let mean = points.iter().fold(DVector::zeros(t_len), |acc, p| acc + p) / points.len() as f64;
    let support: Vec<usize> = (0..t_len)
        .filter(|&t| points.iter().any(|p| p[t] > noise))
        .collect();
    let mut w = vec![0.0; t_len];
    for &t in &support {
        w[t] = mean[t];
    }
    // Remove the averaging round-off and the dropped noise from the residual.
    let sub = e.select_columns(&support);
    let base = DVector::from_column_slice(&w);
    let fix = linalg::min_norm_solve(&sub, &(b - e * &base));
    let fixed: Vec<f64> = support
        .iter()
        .zip(fix.iter())
        .map(|(&t, f)| w[t] + f)
        .collect();
    if fixed.iter().all(|&v| v > 0.0) {
        for (&t, v) in support.iter().zip(fixed) {
            w[t] = v;
        }
    }
    Ok((w, support))
}

/// Maximize `ln V` over `{w >= 0 : E w = rhs}` by a log-barrier path.
///
/// Weights outside the support of the feasible set stay at zero. On the
/// support, `w = w0 + N y` with `N` a basis of the kernel of the support
/// columns, and `ln V(w) + mu * sum ln w_t` is maximized in `y` by damped Newton
/// steps for a decreasing sequence of `mu`. Weights left at barrier level are
/// then set to zero.
pub fn maximize_log_dual(
    d: &DualProgram<'_>,
    opts: &DualOptions,
) -> Result<DualSolution, DualError> {
    const ARMIJO: f64 = 1e-4;
    const BLOWUP: f64 = 1e12;
    // ln V this large along a blown-up path means a ray of positive slope.
    const LOG_UNBOUNDED: f64 = 100.0;
    const MU_START: f64 = 1.0;
    const MU_END: f64 = 1e-13;
    const MU_FACTOR: f64 = 0.1;
    const INNER_ITER: usize = 200;
    const SNAP_REL: f64 = 1e-9;

    let (mut w, support) = relative_interior(d)?;
    let e = &d.equality_matrix;
    let basis = linalg::nullspace(&e.select_columns(&support));
    let mut iterations = 0;
    let barrier = |w: &[f64], mu: f64| -> f64 {
        d.log_dual_unchecked(w) + mu * support.iter().map(|&t| w[t].ln()).sum::<f64>()
    };

    if basis.ncols() > 0 {
        let mut mu = MU_START;
        'path: loop {
            let mut f = barrier(&w, mu);
            for _ in 0..INNER_ITER {
                if iterations >= opts.max_iter {
                    let best = finish(d, w, DualMethod::ConcaveMax, iterations, f64::NAN);
                    return Err(DualError::IterationLimit {
                        best: Box::new(best),
                    });
                }
                iterations += 1;
                let g = d.boundary_gradient(&w);
                let gs = DVector::from_iterator(
                    support.len(),
                    support.iter().map(|&t| g[t] + mu / w[t]),
                );
                let mut h = d.hessian(&w, &support);
                for (k, &t) in support.iter().enumerate() {
                    h[(k, k)] -= mu / (w[t] * w[t]);
                }
                let grad_y = basis.transpose() * &gs;
                let neg_h = -(basis.transpose() * h * &basis);
                let Some(step_y) = neg_h.cholesky().map(|c| c.solve(&grad_y)) else {
                    break;
                };
                let decrement = grad_y.dot(&step_y);
                if decrement.is_nan()
                    || decrement <= 2.0 * opts.optimality_tol * opts.optimality_tol
                {
                    break;
                }
                let dir = &basis * step_y;
                let mut alpha: f64 = 1.0;
                for (k, &t) in support.iter().enumerate() {
                    if dir[k] < 0.0 {
                        alpha = alpha.min(0.99 * w[t] / -dir[k]);
                    }
                }
                let mut accepted = None;
                for _ in 0..60 {
                    let mut nw = w.clone();
                    for (k, &t) in support.iter().enumerate() {
                        nw[t] += alpha * dir[k];
                    }
                    if support.iter().all(|&t| nw[t] > 0.0) {
                        let nf = barrier(&nw, mu);
                        if nf >= f + ARMIJO * alpha * decrement {
                            accepted = Some((nw, nf));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some((nw, nf)) = accepted else { break };
                if !nf.is_finite() {
                    return Err(DualError::Unbounded);
                }
                w = nw;
                f = nf;
                if w.iter().any(|&v| v > BLOWUP) {
                    if d.log_dual_unchecked(&w) > LOG_UNBOUNDED {
                        return Err(DualError::Unbounded);
                    }
                    // A flat ray: the supremum is only approached at infinity.
                    break 'path;
                }
            }
            if mu <= MU_END {
                break;
            }
            mu *= MU_FACTOR;
        }
    }

    for b in 0..d.block_count() {
        let r = d.block(b);
        let floor = SNAP_REL * w[r.clone()].iter().fold(1.0f64, |m, &v| m.max(v));
        w[r].iter_mut()
            .filter(|v| **v < floor)
            .for_each(|v| *v = 0.0);
    }
    let pg = face_gradient(d, &w);
    Ok(finish(d, w, DualMethod::ConcaveMax, iterations, pg))
}

/// Largest component of the log-dual gradient projected onto the face where
/// exactly the positive weights may move.
fn face_gradient(d: &DualProgram<'_>, w: &[f64]) -> f64 {
    let free: Vec<usize> = (0..w.len()).filter(|&t| w[t] > 0.0).collect();
    let basis = linalg::nullspace(&d.equality_matrix.select_columns(&free));
    if basis.ncols() == 0 {
        return 0.0;
    }
    let g = d.boundary_gradient(w);
    let gf = DVector::from_iterator(free.len(), free.iter().map(|&t| g[t]));
    (&basis * (basis.transpose() * gf)).amax()
}
