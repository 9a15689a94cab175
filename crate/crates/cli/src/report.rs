//! Report documents and their JSON / table forms.
//!
//! Every float is rounded to 9 significant digits before it enters a document,
//! so the JSON text is the shortest representation of the stored value and
//! parsing it back gives the same document.

use std::fmt::Write as _;

use lexgp::oracle::{OracleResult, OracleStatus};
use lexgp::{build_dual, DualMethod, GpStage, StageSolution};
use serde::{Deserialize, Serialize};

/// Round to 9 significant digits; negative zero becomes zero.
pub fn sig9(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.8e}")
        .parse::<f64>()
        .expect("formatted float parses")
        + 0.0
}

pub fn sig9_all(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(sig9).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub command: String,
    pub mode: String,
    pub carry_eps: f64,
    pub variables: Vec<String>,
    pub aggregate_degree_of_difficulty: i64,
    pub stages: Vec<StageRecord>,
    /// Absent when a stage failed.
    pub final_x: Option<Vec<f64>>,
    pub objective_vector: Option<Vec<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    /// 1-based priority level.
    pub index: usize,
    pub objective: String,
    pub degree_of_difficulty: i64,
    pub carried_constraints: usize,
    pub dual_method: String,
    pub dual_iterations: usize,
    pub dual_weights: Vec<WeightRecord>,
    pub dual_value: f64,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub unique: bool,
    pub rank: usize,
    pub optimal_set_dimension: usize,
    /// Weight sum `u_i` of each constraint, carried ones last.
    pub constraint_activity: Vec<f64>,
    pub carried_bound: Option<f64>,
    pub residuals: Residuals,
    pub oracle: Option<OracleRecord>,
}

/// Block 0 is the objective, block `i` the `i`-th constraint; terms are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRecord {
    pub block: usize,
    pub term: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Residuals {
    pub normality_orthogonality: f64,
    pub projected_gradient: f64,
    pub log_system: f64,
    pub weight_consistency: f64,
    pub duality_gap: f64,
    pub feasibility_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleRecord {
    pub value: f64,
    pub status: String,
    pub relative_difference: f64,
    pub iterations: usize,
    pub seed: u64,
    pub samples_checked: usize,
    /// Feasible samples whose objective falls below the dual value.
    pub weak_duality_violations: usize,
}

impl OracleRecord {
    pub fn new(
        result: &OracleResult,
        dual_value: f64,
        seed: u64,
        samples_checked: usize,
        weak_duality_violations: usize,
    ) -> Self {
        let status = match result.status {
            OracleStatus::Converged => "converged",
            OracleStatus::IterationLimit => "iteration_limit",
            OracleStatus::UnboundedSuspected => "unbounded_suspected",
        };
        Self {
            value: sig9(result.value),
            status: status.into(),
            relative_difference: sig9((result.value - dual_value).abs() / dual_value.max(1.0)),
            iterations: result.iterations,
            seed,
            samples_checked,
            weak_duality_violations,
        }
    }
}

impl StageRecord {
    pub fn new(
        stage: &GpStage,
        sol: &StageSolution,
        objective: &str,
        carried_constraints: usize,
        oracle: Option<OracleRecord>,
    ) -> Self {
        let dual_weights = stage
            .blocks()
            .enumerate()
            .flat_map(|(b, p)| (1..=p.len()).map(move |t| (b, t)))
            .zip(&sol.dual.w)
            .map(|((block, term), &w)| WeightRecord {
                block,
                term,
                weight: sig9(w),
            })
            .collect();
        let method = match sol.dual.method {
            DualMethod::LinearExact => "linear_exact",
            DualMethod::ConcaveMax => "concave_max",
        };
        let p = &sol.primal;
        Self {
            index: sol.stage_index + 1,
            objective: objective.into(),
            degree_of_difficulty: sol.degree_of_difficulty,
            carried_constraints,
            dual_method: method.into(),
            dual_iterations: sol.dual.iterations,
            dual_weights,
            dual_value: sig9(sol.dual.value),
            x: sig9_all(&p.x),
            objective_value: sig9(sol.objective_value),
            unique: p.unique,
            rank: p.rank,
            optimal_set_dimension: p.optimal_set_dimension,
            constraint_activity: sig9_all(&sol.dual.lambda),
            carried_bound: sol.carried_bound.map(sig9),
            residuals: Residuals {
                normality_orthogonality: sig9(sol.dual.residual),
                projected_gradient: sig9(sol.dual.projected_gradient),
                log_system: sig9(p.system_residual),
                weight_consistency: sig9(p.consistency_residual),
                duality_gap: sig9(p.duality_gap),
                feasibility_margin: p.feasibility_margin.map(sig9),
            },
            oracle,
        }
    }
}

/// The dual program of one stage, before it is solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualDocument {
    pub index: usize,
    pub objective: String,
    pub mode: String,
    pub variables: Vec<String>,
    pub degree_of_difficulty: i64,
    pub carried_bounds: Vec<f64>,
    pub terms: Vec<DualTerm>,
    /// Normality row first, then one orthogonality row per variable.
    pub equality_matrix: Vec<Vec<f64>>,
    pub equality_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualTerm {
    pub block: usize,
    pub term: usize,
    pub coeff: f64,
    pub exponents: Vec<f64>,
}

impl DualDocument {
    pub fn new(
        stage: &GpStage,
        index: usize,
        objective: &str,
        mode: &str,
        variables: &[String],
        carried_bounds: &[f64],
    ) -> Self {
        let d = build_dual(stage);
        let terms = stage
            .blocks()
            .enumerate()
            .flat_map(|(b, p)| {
                p.terms().iter().enumerate().map(move |(t, term)| DualTerm {
                    block: b,
                    term: t + 1,
                    coeff: sig9(term.coeff()),
                    exponents: sig9_all(term.exponents()),
                })
            })
            .collect();
        let e = d.equality_matrix();
        Self {
            index,
            objective: objective.into(),
            mode: mode.into(),
            variables: variables.to_vec(),
            degree_of_difficulty: lexgp::degree_of_difficulty(stage),
            carried_bounds: sig9_all(carried_bounds),
            terms,
            equality_matrix: e
                .row_iter()
                .map(|r| sig9_all(&r.iter().copied().collect::<Vec<_>>()))
                .collect(),
            equality_rhs: sig9_all(d.equality_rhs().as_slice()),
        }
    }
}

/// Structural summary of every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDocument {
    pub mode: String,
    pub variables: Vec<String>,
    pub objectives: usize,
    pub constraints: usize,
    pub aggregate_degree_of_difficulty: i64,
    pub stages: Vec<CheckStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckStage {
    pub index: usize,
    pub objective: String,
    pub terms: usize,
    pub carried_constraints: usize,
    pub rank: usize,
    pub degree_of_difficulty: i64,
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(text)
}

/// Same digits as the JSON form, in exponent notation when tiny or huge.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e9).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().copied().map(num).collect();
    format!("({})", items.join(", "))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), num)
}

pub fn report_table(r: &ReportDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} ({} mode, carry eps {})",
        r.command,
        r.mode,
        num(r.carry_eps)
    );
    let _ = writeln!(s, "variables: {}", r.variables.join(", "));
    let _ = writeln!(
        s,
        "aggregate degree of difficulty: {}",
        r.aggregate_degree_of_difficulty
    );
    for st in &r.stages {
        let _ = writeln!(s);
        let _ = writeln!(s, "stage {}: minimize {}", st.index, st.objective);
        let _ = writeln!(s, "  degree of difficulty   {}", st.degree_of_difficulty);
        let _ = writeln!(s, "  carried constraints    {}", st.carried_constraints);
        let _ = writeln!(
            s,
            "  dual method            {} ({} iterations)",
            st.dual_method, st.dual_iterations
        );
        let _ = writeln!(s, "  dual weights");
        for w in &st.dual_weights {
            let _ = writeln!(
                s,
                "    block {} term {}      {}",
                w.block,
                w.term,
                num(w.weight)
            );
        }
        let _ = writeln!(s, "  dual value             {}", num(st.dual_value));
        let _ = writeln!(s, "  x                      {}", list(&st.x));
        let _ = writeln!(s, "  objective value        {}", num(st.objective_value));
        let _ = writeln!(
            s,
            "  unique                 {} (rank {}, optimal set dimension {})",
            st.unique, st.rank, st.optimal_set_dimension
        );
        let _ = writeln!(
            s,
            "  constraint activity    {}",
            list(&st.constraint_activity)
        );
        let _ = writeln!(s, "  carried bound          {}", opt(st.carried_bound));
        let res = &st.residuals;
        let _ = writeln!(s, "  residuals");
        let _ = writeln!(
            s,
            "    normality/orthogonality  {}",
            num(res.normality_orthogonality)
        );
        let _ = writeln!(
            s,
            "    projected gradient       {}",
            num(res.projected_gradient)
        );
        let _ = writeln!(s, "    log system               {}", num(res.log_system));
        let _ = writeln!(
            s,
            "    weight consistency       {}",
            num(res.weight_consistency)
        );
        let _ = writeln!(s, "    duality gap              {}", num(res.duality_gap));
        let _ = writeln!(
            s,
            "    feasibility margin       {}",
            opt(res.feasibility_margin)
        );
        if let Some(o) = &st.oracle {
            let _ = writeln!(s, "  oracle");
            let _ = writeln!(
                s,
                "    value                    {} ({}, {} iterations)",
                num(o.value),
                o.status,
                o.iterations
            );
            let _ = writeln!(
                s,
                "    relative difference      {}",
                num(o.relative_difference)
            );
            let _ = writeln!(
                s,
                "    weak duality             {} violations in {} samples (seed {})",
                o.weak_duality_violations, o.samples_checked, o.seed
            );
        }
    }
    let _ = writeln!(s);
    if let Some(x) = &r.final_x {
        let _ = writeln!(s, "final x: {}", list(x));
    }
    if let Some(v) = &r.objective_vector {
        let _ = writeln!(s, "objective vector: {}", list(v));
    }
    if let Some(f) = &r.failure {
        let _ = writeln!(s, "failure: {f}");
    }
    s
}

pub fn dual_table(d: &DualDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "dual program of stage {} ({}, {} mode)",
        d.index, d.objective, d.mode
    );
    let _ = writeln!(s, "variables: {}", d.variables.join(", "));
    let _ = writeln!(s, "degree of difficulty: {}", d.degree_of_difficulty);
    let _ = writeln!(s, "carried bounds: {}", list(&d.carried_bounds));
    let _ = writeln!(s, "terms");
    for t in &d.terms {
        let _ = writeln!(
            s,
            "  block {} term {}  coeff {}  exponents {}",
            t.block,
            t.term,
            num(t.coeff),
            list(&t.exponents)
        );
    }
    let _ = writeln!(s, "equality system (normality, then orthogonality)");
    for (row, rhs) in d.equality_matrix.iter().zip(&d.equality_rhs) {
        let _ = writeln!(s, "  {} = {}", list(row), num(*rhs));
    }
    s
}

pub fn check_table(c: &CheckDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "check ({} mode)", c.mode);
    let _ = writeln!(s, "variables: {}", c.variables.join(", "));
    let _ = writeln!(s, "objectives: {}", c.objectives);
    let _ = writeln!(s, "constraints: {}", c.constraints);
    let _ = writeln!(
        s,
        "aggregate degree of difficulty: {}",
        c.aggregate_degree_of_difficulty
    );
    for st in &c.stages {
        let _ = writeln!(
            s,
            "stage {} ({}): {} terms, {} carried constraints, rank {}, degree of difficulty {}",
            st.index,
            st.objective,
            st.terms,
            st.carried_constraints,
            st.rank,
            st.degree_of_difficulty
        );
    }
    s
}
