#![allow(dead_code)]

use lexgp::{Constraint, LexGpProblem, Posynomial};

/// Two objectives in three variables under `x1 x2 x3^2 + x2 x3 <= 10` and `x1 x3 <= 2`.
pub fn example_problem() -> LexGpProblem {
    let g10 = Posynomial::from_terms([(1.0, vec![-1.0, -1.0, -2.0])]).unwrap();
    let g20 = Posynomial::from_terms([(1.0, vec![-1.0, -3.0, -5.0]), (1.0, vec![-1.0, -1.0, 0.0])])
        .unwrap();
    let c1 = Constraint::new(
        Posynomial::from_terms([(1.0, vec![1.0, 1.0, 2.0]), (1.0, vec![0.0, 1.0, 1.0])]).unwrap(),
        10.0,
    )
    .unwrap();
    let c2 = Constraint::new(
        Posynomial::from_terms([(1.0, vec![1.0, 0.0, 1.0])]).unwrap(),
        2.0,
    )
    .unwrap();
    LexGpProblem::new(
        vec!["x1".into(), "x2".into(), "x3".into()],
        vec![g10, g20],
        vec![c1, c2],
    )
    .unwrap()
}

/// Stage-1 optimum reported with the problem.
pub const REPORTED_STAGE_ONE_X: [f64; 3] = [0.9086967, 1.514494, 2.200954];
/// Stage-2 optimum without the carried bound.
pub const REPORTED_STAGE_TWO_X: [f64; 3] = [3.020273, 23.01163, 0.2483217];

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

use lexgp::oracle::random_stage;
use lexgp::{build_dual, solve_dual, DualError, DualOptions, DualSolution, GpStage};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stages whose dual has a finite maximum, with that maximum.
pub fn dual_feasible_instances(seed: u64, count: usize) -> Vec<(GpStage, DualSolution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = random_stage(&mut rng);
        match solve_dual(&build_dual(&s), &DualOptions::default()) {
            Ok(sol) => out.push((s, sol)),
            Err(DualError::Infeasible(_) | DualError::Unbounded) => {}
            Err(e) => panic!("unexpected dual failure: {e}"),
        }
    }
    out
}

/// Random nonnegative solutions of the dual equality system around `w`.
pub fn dual_feasible_points<R: Rng>(
    s: &GpStage,
    w: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let d = build_dual(s);
    let basis = kernel(d.equality_matrix());
    let cols = d.len();
    let mut out = vec![w.to_vec()];
    if basis.is_empty() {
        return out;
    }
    while out.len() < count {
        let mix: Vec<f64> = basis.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..cols)
            .map(|t| basis.iter().zip(&mix).map(|(b, m)| b[t] * m).sum())
            .collect();
        let t_max = w
            .iter()
            .zip(&dir)
            .filter(|(_, &d)| d < 0.0)
            .map(|(&w, &d)| w / -d)
            .fold(f64::INFINITY, f64::min)
            .min(10.0);
        let t = rng.gen_range(0.0..=1.0) * t_max;
        out.push(
            w.iter()
                .zip(&dir)
                .map(|(w, d)| (w + t * d).max(0.0))
                .collect(),
        );
    }
    out
}

/// Kernel basis from the eigenvectors of `E^T E` with negligible eigenvalue.
fn kernel(e: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let eig = (e.transpose() * e).symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1.0);
    (0..e.ncols())
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-12 * top)
        .map(|i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect()
}
