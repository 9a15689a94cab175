//! JSON problem files.
//!
//! ```json
//! {
//!   "variables": ["x1", "x2"],
//!   "objectives": [{"name": "cost", "terms": [{"coeff": 1.0, "exponents": [-1, 0]}]}],
//!   "constraints": [{"terms": [{"coeff": 1.0, "exponents": [1, 1]}], "bound": 10}]
//! }
//! ```
//!
//! Objectives are listed in priority order. Constraint bounds stay in raw form.

use std::collections::HashSet;

use lexgp::{Constraint, LexGpProblem, Posynomial, Term};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InputError {
    #[error("malformed document at {field}: {message}")]
    MalformedDocument { field: String, message: String },
    #[error("nonpositive coefficient at {field}: {value}")]
    NonpositiveCoefficient { field: String, value: f64 },
    #[error("exponent length mismatch at {field}: expected {expected} entries, found {found}")]
    ExponentLengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("no objectives at objectives: at least one is required")]
    EmptyObjectives,
    #[error("nonpositive bound at {field}: {value}")]
    NonpositiveBound { field: String, value: f64 },
}

impl InputError {
    fn malformed(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::MalformedDocument {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    variables: Vec<String>,
    objectives: Vec<RawObjective>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    name: String,
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    terms: Vec<RawTerm>,
    bound: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    exponents: Vec<f64>,
}

/// A parsed problem plus the objective names, which the model does not keep.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: LexGpProblem,
    pub objective_names: Vec<String>,
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, InputError> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| {
        InputError::malformed(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let n = raw.variables.len();
    if n == 0 {
        return Err(InputError::malformed(
            "variables",
            "at least one variable is required",
        ));
    }
    let mut seen = HashSet::new();
    for (j, name) in raw.variables.iter().enumerate() {
        if name.is_empty() || !seen.insert(name.as_str()) {
            return Err(InputError::malformed(
                format!("variables[{j}]"),
                format!("variable names must be nonempty and distinct, got {name:?}"),
            ));
        }
    }
    if raw.objectives.is_empty() {
        return Err(InputError::EmptyObjectives);
    }
    let objectives = raw
        .objectives
        .iter()
        .enumerate()
        .map(|(k, o)| posynomial(&o.terms, n, &format!("objectives[{k}].terms")))
        .collect::<Result<Vec<_>, _>>()?;
    let constraints = raw
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let lhs = posynomial(&c.terms, n, &format!("constraints[{i}].terms"))?;
            if !(c.bound > 0.0 && c.bound.is_finite()) {
                return Err(InputError::NonpositiveBound {
                    field: format!("constraints[{i}].bound"),
                    value: c.bound,
                });
            }
            Constraint::new(lhs, c.bound)
                .map_err(|e| InputError::malformed(format!("constraints[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let objective_names = raw.objectives.into_iter().map(|o| o.name).collect();
    let problem = LexGpProblem::new(raw.variables, objectives, constraints)
        .map_err(|e| InputError::malformed("document", e.to_string()))?;
    Ok(ProblemFile {
        problem,
        objective_names,
    })
}

fn posynomial(terms: &[RawTerm], n: usize, field: &str) -> Result<Posynomial, InputError> {
    if terms.is_empty() {
        return Err(InputError::malformed(
            field,
            "at least one term is required",
        ));
    }
    let terms = terms
        .iter()
        .enumerate()
        .map(|(t, raw)| {
            if !(raw.coeff > 0.0 && raw.coeff.is_finite()) {
                return Err(InputError::NonpositiveCoefficient {
                    field: format!("{field}[{t}].coeff"),
                    value: raw.coeff,
                });
            }
            if raw.exponents.len() != n {
                return Err(InputError::ExponentLengthMismatch {
                    field: format!("{field}[{t}].exponents"),
                    expected: n,
                    found: raw.exponents.len(),
                });
            }
            Term::new(raw.coeff, raw.exponents.clone())
                .map_err(|e| InputError::malformed(format!("{field}[{t}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Posynomial::new(terms).map_err(|e| InputError::malformed(field, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../examples/paper.json");

    #[test]
    fn example_file() {
        let f = parse_problem(EXAMPLE).unwrap();
        let p = &f.problem;
        assert_eq!(p.n(), 3);
        assert_eq!(p.objectives().len(), 2);
        assert_eq!(p.objectives()[0].len(), 1);
        assert_eq!(p.objectives()[1].len(), 2);
        let bounds: Vec<f64> = p.constraints().iter().map(|c| c.bound()).collect();
        assert_eq!(bounds, vec![10.0, 2.0]);
        assert_eq!(f.objective_names, vec!["g10", "g20"]);
    }

    #[test]
    fn negative_coefficient() {
        let text = r#"{"variables":["x"],"objectives":[{"name":"f","terms":[{"coeff":-1,"exponents":[1]}]}]}"#;
        match parse_problem(text) {
            Err(InputError::NonpositiveCoefficient { field, value }) => {
                assert_eq!(field, "objectives[0].terms[0].coeff");
                assert_eq!(value, -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_exponent_list() {
        let text = r#"{"variables":["a","b","c"],"objectives":[{"name":"f","terms":[{"coeff":1,"exponents":[1,2]}]}]}"#;
        assert!(matches!(
            parse_problem(text),
            Err(InputError::ExponentLengthMismatch {
                expected: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            parse_problem(r#"{"variables":["x"],"objectives":[]}"#).unwrap_err(),
            InputError::EmptyObjectives
        );
        let bad_bound = r#"{"variables":["x"],"objectives":[{"name":"f","terms":[{"coeff":1,"exponents":[1]}]}],
            "constraints":[{"terms":[{"coeff":1,"exponents":[-1]}],"bound":0}]}"#;
        assert!(matches!(
            parse_problem(bad_bound),
            Err(InputError::NonpositiveBound { field, .. }) if field == "constraints[0].bound"
        ));
        let missing =
            r#"{"variables":["x"],"objectives":[{"name":"f","terms":[{"exponents":[1]}]}]}"#;
        let err = parse_problem(missing).unwrap_err().to_string();
        assert!(err.contains("coeff"), "{err}");
        let dup = r#"{"variables":["x","x"],"objectives":[{"name":"f","terms":[{"coeff":1,"exponents":[1,1]}]}]}"#;
        assert!(parse_problem(dup)
            .unwrap_err()
            .to_string()
            .contains("variables[1]"));
        assert!(matches!(
            parse_problem("{"),
            Err(InputError::MalformedDocument { .. })
        ));
    }
}
