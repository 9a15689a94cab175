mod common;

use common::example_problem;
use lexgp::oracle::sample_feasible_points;
use lexgp::{
    evaluate_objective_vector, lex_compare, solve_lexicographic, LexMode, LexOptions, LexOrdering,
};

#[test]
fn strict_final_point_is_never_beaten_by_feasible_samples() {
    let p = example_problem();
    let sol = solve_lexicographic(&p, LexMode::Strict, &LexOptions::default()).unwrap();
    assert!(sol.objective_vector[0] <= 0.15 * (1.0 + 1e-6) + 1e-9);
    let xs = sample_feasible_points(&p.stage(0, &[]), 1000, 42).unwrap();
    assert_eq!(xs.len(), 1000);
    for x in xs {
        let v = evaluate_objective_vector(&p, &x).unwrap();
        let ord = lex_compare(&sol.objective_vector, &v, 1e-6).unwrap();
        assert_ne!(ord, LexOrdering::Greater, "{x:?} gives {v:?}");
    }
}

#[test]
fn independent_final_point_is_beaten_on_the_first_objective() {
    let p = example_problem();
    let sol = solve_lexicographic(&p, LexMode::Independent, &LexOptions::default()).unwrap();
    let strict = solve_lexicographic(&p, LexMode::Strict, &LexOptions::default()).unwrap();
    let ord = lex_compare(&sol.objective_vector, &strict.objective_vector, 1e-6).unwrap();
    assert_eq!(ord, LexOrdering::Greater);
}
