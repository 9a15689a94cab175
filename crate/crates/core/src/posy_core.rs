//! Posynomial algebra and the lexicographic GP problem model.
//!
//! A posynomial is a sum of monomial terms `c * prod_j x_j^a_j` with `c > 0`
//! and real exponents, defined on the strictly positive orthant. Term order is
//! declaration order and is significant: dual weights are indexed by it.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Errors raised while building or evaluating the problem model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("component {index} of the point is not strictly positive ({value})")]
    NonpositiveComponent { index: usize, value: f64 },
    #[error("term coefficient must be positive and finite, got {0}")]
    NonpositiveCoefficient(f64),
    #[error("exponent must be finite, got {0}")]
    NonfiniteExponent(f64),
    #[error("constraint bound must be positive and finite, got {0}")]
    NonpositiveBound(f64),
    #[error("a posynomial needs at least one term")]
    EmptyPosynomial,
    #[error("a problem needs at least one objective")]
    EmptyObjectives,
    #[error("a problem needs at least one variable")]
    NoVariables,
    #[error("expected {expected} variable names, found {found}")]
    VariableCount { expected: usize, found: usize },
}

/// One monomial `coeff * prod_j x_j^exponents[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    coeff: f64,
    exponents: Vec<f64>,
}

impl Term {
    pub fn new(coeff: f64, exponents: Vec<f64>) -> Result<Self, ModelError> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(ModelError::NonpositiveCoefficient(coeff));
        }
        if let Some(&a) = exponents.iter().find(|a| !a.is_finite()) {
            return Err(ModelError::NonfiniteExponent(a));
        }
        Ok(Self { coeff, exponents })
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `ln c + a . z`, the log of the term at `x = exp(z)`.
    pub fn log_at(&self, z: &[f64]) -> f64 {
        self.coeff.ln() + dot(&self.exponents, z)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coeff, |acc, (a, xj)| acc * xj.powf(*a))
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            coeff: self.coeff * factor,
            exponents: self.exponents.clone(),
        }
    }
}

/// A nonempty sum of terms sharing one variable count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    terms: Vec<Term>,
}

impl Posynomial {
    pub fn new(terms: Vec<Term>) -> Result<Self, ModelError> {
        let first = terms.first().ok_or(ModelError::EmptyPosynomial)?;
        let n = first.exponents.len();
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != n) {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: t.exponents.len(),
            });
        }
        Ok(Self { terms })
    }

    /// Convenience constructor from `(coeff, exponents)` pairs.
    pub fn from_terms<I, E>(terms: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (f64, E)>,
        E: Into<Vec<f64>>,
    {
        let terms = terms
            .into_iter()
            .map(|(c, a)| Term::new(c, a.into()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of variables the posynomial is dimensioned to.
    pub fn n(&self) -> usize {
        self.terms[0].exponents.len()
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| t.scaled(factor)).collect(),
        }
    }

    fn check_dim(&self, len: usize) -> Result<(), ModelError> {
        if len != self.n() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// Value at a strictly positive point.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x.len())?;
        check_positive(x)?;
        Ok(self.terms.iter().map(|t| t.eval(x)).sum())
    }

    /// Value and gradient of `z -> p(exp(z))`.
    ///
    /// The terms are summed as `exp(m) * sum_t exp(s_t - m)` where
    /// `s_t = ln c_t + a_t . z` and `m = max_t s_t`, so large exponents do not
    /// overflow before the final scaling.
    pub fn eval_log(&self, z: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_dim(z.len())?;
        let logs: Vec<f64> = self.terms.iter().map(|t| t.log_at(z)).collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut grad = vec![0.0; z.len()];
        for (term, s) in self.terms.iter().zip(&logs) {
            let r = (s - shift).exp();
            sum += r;
            for (g, a) in grad.iter_mut().zip(&term.exponents) {
                *g += r * a;
            }
        }
        let scale = shift.exp();
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((sum * scale, grad))
    }
}

/// A raw posynomial constraint `lhs(x) <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    lhs: Posynomial,
    bound: f64,
}

impl Constraint {
    pub fn new(lhs: Posynomial, bound: f64) -> Result<Self, ModelError> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(ModelError::NonpositiveBound(bound));
        }
        Ok(Self { lhs, bound })
    }

    pub fn lhs(&self) -> &Posynomial {
        &self.lhs
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The equivalent `<= 1` posynomial: every coefficient divided by the bound.
    pub fn normalize(&self) -> Posynomial {
        self.lhs.scaled(1.0 / self.bound)
    }
}

/// Free-function form of [`Constraint::normalize`] that also re-validates the bound.
pub fn normalize(c: &Constraint) -> Result<Posynomial, ModelError> {
    if !(c.bound > 0.0 && c.bound.is_finite()) {
        return Err(ModelError::NonpositiveBound(c.bound));
    }
    Ok(c.normalize())
}

/// Priority-ordered objectives sharing one constraint set.
///
/// `objectives[0]` has the highest priority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexGpProblem {
    variable_names: Vec<String>,
    objectives: Vec<Posynomial>,
    constraints: Vec<Constraint>,
}

impl LexGpProblem {
    pub fn new(
        variable_names: Vec<String>,
        objectives: Vec<Posynomial>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        let n = variable_names.len();
        if n == 0 {
            return Err(ModelError::NoVariables);
        }
        if objectives.is_empty() {
            return Err(ModelError::EmptyObjectives);
        }
        for p in objectives.iter().chain(constraints.iter().map(|c| &c.lhs)) {
            if p.n() != n {
                return Err(ModelError::VariableCount {
                    expected: n,
                    found: p.n(),
                });
            }
        }
        Ok(Self {
            variable_names,
            objectives,
            constraints,
        })
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn n(&self) -> usize {
        self.variable_names.len()
    }

    pub fn objectives(&self) -> &[Posynomial] {
        &self.objectives
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Objective terms summed over all objectives plus constraint terms, minus `n + 1`.
    pub fn aggregate_degree_of_difficulty(&self) -> i64 {
        let t: usize = self.objectives.iter().map(Posynomial::len).sum::<usize>()
            + self.constraints.iter().map(|c| c.lhs.len()).sum::<usize>();
        t as i64 - self.n() as i64 - 1
    }

    /// The single-objective stage minimizing objective `k` under the original
    /// constraints plus `extra` (already raw constraints, normalized here).
    pub fn stage(&self, k: usize, extra: &[Constraint]) -> GpStage {
        let constraints = self
            .constraints
            .iter()
            .chain(extra)
            .map(Constraint::normalize)
            .collect();
        GpStage {
            objective: self.objectives[k].clone(),
            constraints,
            n: self.n(),
        }
    }
}

/// One posynomial minimization with normalized `<= 1` constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpStage {
    objective: Posynomial,
    constraints: Vec<Posynomial>,
    n: usize,
}

impl GpStage {
    pub fn new(objective: Posynomial, constraints: Vec<Posynomial>) -> Result<Self, ModelError> {
        let n = objective.n();
        if n == 0 {
            return Err(ModelError::NoVariables);
        }
        if let Some(c) = constraints.iter().find(|c| c.n() != n) {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: c.n(),
            });
        }
        Ok(Self {
            objective,
            constraints,
            n,
        })
    }

    pub fn objective(&self) -> &Posynomial {
        &self.objective
    }

    pub fn constraints(&self) -> &[Posynomial] {
        &self.constraints
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of terms, objective and constraints together.
    pub fn term_count(&self) -> usize {
        self.objective.len() + self.constraints.iter().map(Posynomial::len).sum::<usize>()
    }

    /// Objective first, then constraints in declaration order.
    pub fn blocks(&self) -> impl Iterator<Item = &Posynomial> {
        std::iter::once(&self.objective).chain(self.constraints.iter())
    }

    pub fn all_terms(&self) -> impl Iterator<Item = &Term> {
        self.blocks().flat_map(|p| p.terms.iter())
    }
}

/// `T x n` matrix of term exponents, objective rows first.
pub fn exponent_matrix(s: &GpStage) -> DMatrix<f64> {
    let rows: Vec<&Term> = s.all_terms().collect();
    DMatrix::from_fn(rows.len(), s.n, |i, j| rows[i].exponents[j])
}

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// A pivot counts as zero when its magnitude is at most `tol` times the
/// largest absolute entry of `m`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let scale = m.amax();
    if m.is_empty() || scale == 0.0 {
        return 0;
    }
    let threshold = tol * scale;
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty row range");
        if val <= threshold {
            continue;
        }
        a.swap_rows(r, piv);
        for i in r + 1..rows {
            let f = a[(i, c)] / a[(r, c)];
            if f != 0.0 {
                for j in c..cols {
                    a[(i, j)] -= f * a[(r, j)];
                }
            }
        }
        r += 1;
    }
    r
}

/// `T - n - 1`; negative values mean an overdetermined dual system.
pub fn degree_of_difficulty(s: &GpStage) -> i64 {
    s.term_count() as i64 - s.n as i64 - 1
}

/// Result of comparing two objective vectors left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LexOrdering {
    Less,
    Equal,
    Greater,
}

impl From<LexOrdering> for Ordering {
    fn from(o: LexOrdering) -> Self {
        match o {
            LexOrdering::Less => Ordering::Less,
            LexOrdering::Equal => Ordering::Equal,
            LexOrdering::Greater => Ordering::Greater,
        }
    }
}

pub const DEFAULT_LEX_TOL: f64 = 1e-9;

/// Lexicographic comparison with an absolute per-component tolerance.
///
/// The first component whose difference exceeds `tol` decides.
pub fn lex_compare(u: &[f64], v: &[f64], tol: f64) -> Result<LexOrdering, ModelError> {
    if u.len() != v.len() {
        return Err(ModelError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    for (a, b) in u.iter().zip(v) {
        let d = a - b;
        if d > tol {
            return Ok(LexOrdering::Greater);
        }
        if d < -tol {
            return Ok(LexOrdering::Less);
        }
    }
    Ok(LexOrdering::Equal)
}

pub(crate) fn check_positive(x: &[f64]) -> Result<(), ModelError> {
    match x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(ModelError::NonpositiveComponent {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
