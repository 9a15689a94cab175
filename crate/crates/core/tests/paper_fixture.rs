mod common;

use approx::assert_abs_diff_eq;
use common::{example_problem, rel, REPORTED_STAGE_ONE_X, REPORTED_STAGE_TWO_X};
use lexgp::primal_recovery::recover;
use lexgp::{
    build_dual, evaluate_objective_vector, exponent_matrix, rank, solve_dual, solve_lexicographic,
    DualMethod, DualOptions, LexMode, LexOptions,
};

#[test]
fn stage_one_dual_weights_and_value() {
    let s = example_problem().stage(0, &[]);
    let sol = solve_dual(&build_dual(&s), &DualOptions::default()).unwrap();
    for (w, e) in sol.w.iter().zip([1.0, 0.6666667, 0.3333333, 0.3333333]) {
        assert_abs_diff_eq!(*w, e, epsilon = 1e-6);
    }
    assert_abs_diff_eq!(sol.value, 0.15, epsilon = 1e-6);
}

#[test]
fn stage_two_independent() {
    let s = example_problem().stage(1, &[]);
    let sol = solve_dual(&build_dual(&s), &DualOptions::default()).unwrap();
    assert_abs_diff_eq!(sol.value, 0.0431647, epsilon = 1e-6);
    for (w, e) in sol
        .w
        .iter()
        .zip([0.6666667, 0.3333333, 1.0, 1.3333333, 0.0])
    {
        assert_abs_diff_eq!(*w, e, epsilon = 1e-5);
    }
    let r = recover(&s, &sol).unwrap();
    for (x, e) in r.x.iter().zip(REPORTED_STAGE_TWO_X) {
        assert!(rel(*x, e) <= 1e-4, "{:?}", r.x);
    }
}

#[test]
fn stage_one_rank_deficiency_and_witness() {
    let s = example_problem().stage(0, &[]);
    assert_eq!(rank(&exponent_matrix(&s), 1e-9), 2);
    let sol = solve_dual(&build_dual(&s), &DualOptions::default()).unwrap();
    assert_eq!(sol.method, DualMethod::ConcaveMax);
    let r = recover(&s, &sol).unwrap();
    assert!(!r.unique);
    assert_eq!(r.optimal_set_dimension, 1);
    let d = r.nullspace_direction.clone().unwrap();
    let witness: Vec<f64> =
        r.z.iter()
            .zip(&d)
            .map(|(z, d)| (z + 0.1 * d).exp())
            .collect();
    assert!(witness.iter().zip(&r.x).any(|(a, b)| (a - b).abs() > 1e-3));
    let v = s.objective().eval(&witness).unwrap();
    assert!(rel(v, 0.15) <= 1e-8, "{v}");
    for g in s.constraints() {
        assert!(g.eval(&witness).unwrap() <= 1.0 + 1e-8);
    }
}

#[test]
fn reported_stage_one_point_is_optimal_member() {
    let s = example_problem().stage(0, &[]);
    let x = REPORTED_STAGE_ONE_X;
    for g in s.constraints() {
        let v = g.eval(&x).unwrap();
        assert!(v <= 1.0, "infeasible: {v}");
        assert!((v - 1.0).abs() <= 1e-5, "inactive: {v}");
    }
    assert_abs_diff_eq!(s.objective().eval(&x).unwrap(), 0.15, epsilon = 1e-6);
    let sol = solve_dual(&build_dual(&s), &DualOptions::default()).unwrap();
    let r = recover(&s, &sol).unwrap();
    // Same optimal set, different representative.
    assert!(r.x.iter().zip(x).any(|(a, b)| (a - b).abs() > 1e-2));
}

#[test]
fn objective_vector_at_reported_points() {
    let p = example_problem();
    let v = evaluate_objective_vector(&p, &REPORTED_STAGE_TWO_X).unwrap();
    assert_abs_diff_eq!(v[0], 0.233333, epsilon = 1e-4);
    assert_abs_diff_eq!(v[1], 0.0431647, epsilon = 1e-4);
    let v = evaluate_objective_vector(&p, &REPORTED_STAGE_ONE_X).unwrap();
    assert_abs_diff_eq!(v[0], 0.15, epsilon = 1e-6);
    assert!(evaluate_objective_vector(&p, &[1.0, -1.0, 1.0]).is_err());
}

#[test]
fn strict_mode_against_reference_solution() {
    // Reference optimum of the strict second stage from an independent conic solver.
    let sol =
        solve_lexicographic(&example_problem(), LexMode::Strict, &LexOptions::default()).unwrap();
    let s2 = &sol.stages[1];
    assert!(rel(s2.objective_value, 0.0569316) <= 1e-6);
    for (x, e) in s2.primal.x.iter().zip([5.62284, 9.37144, 0.355691]) {
        assert!(rel(*x, e) <= 1e-4, "{:?}", s2.primal.x);
    }
    assert!(sol.objective_vector[0] <= 0.15 * (1.0 + 1e-6) + 1e-9);
    // Every carried bound holds at every later point.
    for later in &sol.stages[1..] {
        let g = example_problem().objectives()[0]
            .eval(&later.primal.x)
            .unwrap();
        assert!(g <= sol.stages[0].carried_bound.unwrap() * (1.0 + 1e-8));
    }
}

#[test]
fn strict_mode_with_zero_slack() {
    let opts = LexOptions {
        carry_eps: 0.0,
        ..LexOptions::default()
    };
    // With no slack the second stage has an empty interior; the dual supremum is
    // only approached along a ray, so a clean stage-2 failure is acceptable.
    match solve_lexicographic(&example_problem(), LexMode::Strict, &opts) {
        Ok(sol) => {
            assert!(rel(sol.stages[1].objective_value, 0.0569317) <= 1e-5);
            assert!(sol.objective_vector[0] <= sol.stages[0].objective_value + 1e-9);
        }
        Err(e) => {
            assert_eq!(e.stage, 1, "{e}");
            assert_eq!(e.partial.len(), 1);
            assert!(rel(e.partial[0].objective_value, 0.15) <= 1e-6);
        }
    }
}

#[test]
fn independent_final_point_breaks_carried_bound() {
    let sol = solve_lexicographic(
        &example_problem(),
        LexMode::Independent,
        &LexOptions::default(),
    )
    .unwrap();
    assert_abs_diff_eq!(sol.objective_vector[0], 0.2333333, epsilon = 1e-6);
    assert!(sol.objective_vector[0] > 0.15 * (1.0 + 1e-6));
}

#[test]
fn single_objective_modes_agree() {
    let p = example_problem();
    let one = lexgp::LexGpProblem::new(
        p.variable_names().to_vec(),
        p.objectives()[..1].to_vec(),
        p.constraints().to_vec(),
    )
    .unwrap();
    let a = solve_lexicographic(&one, LexMode::Strict, &LexOptions::default()).unwrap();
    let b = solve_lexicographic(&one, LexMode::Independent, &LexOptions::default()).unwrap();
    assert_eq!(a, b);
}
