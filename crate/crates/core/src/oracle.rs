//! Independent primal solver used to cross-check the dual route.
//!
//! Works directly on `min ln g0(e^z)  s.t.  ln g_i(e^z) <= 0` with an exterior
//! quadratic penalty and gradient descent. It deliberately has its own
//! log-sum-exp evaluation and gradient and touches nothing in `duality` or
//! `primal_recovery`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::posy_core::{GpStage, Posynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleStatus {
    Converged,
    IterationLimit,
    UnboundedSuspected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub status: OracleStatus,
    pub constraint_margins: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

const MARGIN_TOL: f64 = 1e-6;
const UNBOUNDED_RADIUS: f64 = 50.0;
/// Beyond the radius, descent from a strictly feasible iterate counts as
/// "still decreasing" only while the gradient stays above this size.
const STEEP_GRADIENT: f64 = 1e-3;
/// Past this radius descent is abandoned as runaway.
const RUNAWAY_RADIUS: f64 = 1e3;
const PENALTY_SCHEDULE: [f64; 10] = [1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9];

/// `ln p(e^z)` and its gradient, via a shifted log-sum-exp.
fn log_posy(p: &Posynomial, z: &[f64]) -> (f64, Vec<f64>) {
    let s: Vec<f64> = p
        .terms()
        .iter()
        .map(|t| t.coeff().ln() + t.exponents().iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    let mut grad = vec![0.0; z.len()];
    for (t, ei) in p.terms().iter().zip(&e) {
        let share = ei / total;
        for (g, a) in grad.iter_mut().zip(t.exponents()) {
            *g += share * a;
        }
    }
    (m + total.ln(), grad)
}

/// Penalized log objective `ln g0 + rho * sum_i max(0, ln g_i)^2` and its gradient.
pub fn penalized_objective(s: &GpStage, z: &[f64], rho: f64) -> (f64, Vec<f64>) {
    let (mut f, mut grad) = log_posy(s.objective(), z);
    for g in s.constraints() {
        let (v, gv) = log_posy(g, z);
        if v > 0.0 {
            f += rho * v * v;
            for (a, b) in grad.iter_mut().zip(gv) {
                *a += 2.0 * rho * v * b;
            }
        }
    }
    (f, grad)
}

/// Far from the origin, strictly feasible, and still descending.
fn descending_outside(s: &GpStage, z: &[f64], g: &[f64]) -> bool {
    inf_norm(z) > UNBOUNDED_RADIUS
        && inf_norm(g) > STEEP_GRADIENT
        && s.constraints().iter().all(|c| log_posy(c, z).0 <= 0.0)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize the stage in log space from `z = 0`.
///
/// The penalty weight runs through a fixed increasing schedule with warm
/// starts. Each subproblem is solved by gradient descent whose trial step is
/// the Barzilai-Borwein length, cut back by Armijo backtracking.
pub fn solve_primal_log_space(s: &GpStage, opts: &OracleOptions) -> OracleResult {
    let n = s.n();
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut status = OracleStatus::IterationLimit;
    let schedule: &[f64] = if s.constraints().is_empty() {
        &PENALTY_SCHEDULE[..1]
    } else {
        &PENALTY_SCHEDULE
    };

    let round_budget = opts.max_iter / schedule.len();
    'outer: for (k, &rho) in schedule.iter().enumerate() {
        let last = k + 1 == schedule.len();
        let round_end = if last {
            opts.max_iter
        } else {
            iterations + round_budget
        };
        let (mut f, mut g) = penalized_objective(s, &z, rho);
        let mut step = 1.0 / inf_norm(&g).max(1.0);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        loop {
            grad_norm = inf_norm(&g);
            if grad_norm <= opts.tol {
                if last {
                    status = OracleStatus::Converged;
                }
                break;
            }
            if iterations >= round_end {
                if last {
                    break 'outer;
                }
                break;
            }
            iterations += 1;
            if let Some((pz, pg)) = &prev {
                let sz: Vec<f64> = z.iter().zip(pz).map(|(a, b)| a - b).collect();
                let yg: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                let sy: f64 = sz.iter().zip(&yg).map(|(a, b)| a * b).sum();
                let ss: f64 = sz.iter().map(|a| a * a).sum();
                if sy > 0.0 {
                    step = (ss / sy).clamp(1e-14, 1e6);
                }
            }
            let gg: f64 = g.iter().map(|a| a * a).sum();
            let mut t = step;
            let accepted = loop {
                let cand: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                let (fc, gc) = penalized_objective(s, &cand, rho);
                if fc < f && fc <= f - 1e-4 * t * gg {
                    break Some((cand, fc, gc));
                }
                t *= 0.5;
                if t < 1e-20 {
                    break None;
                }
            };
            let Some((cand, fc, gc)) = accepted else {
                // No representable decrease along -g: stationary to working precision.
                if last {
                    status = OracleStatus::Converged;
                }
                break;
            };
            prev = Some((
                std::mem::replace(&mut z, cand),
                std::mem::replace(&mut g, gc),
            ));
            f = fc;
            step = t.max(1e-14);
            if inf_norm(&z) > RUNAWAY_RADIUS && descending_outside(s, &z, &g) {
                status = OracleStatus::UnboundedSuspected;
                break 'outer;
            }
        }
    }
    if status == OracleStatus::IterationLimit
        && descending_outside(
            s,
            &z,
            &penalized_objective(s, &z, schedule[schedule.len() - 1]).1,
        )
    {
        status = OracleStatus::UnboundedSuspected;
    }

    let x: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let value = log_posy(s.objective(), &z).0.exp();
    let constraint_margins: Vec<f64> = s
        .constraints()
        .iter()
        .map(|g| log_posy(g, &z).0.exp() - 1.0)
        .collect();
    if status == OracleStatus::Converged && constraint_margins.iter().any(|&m| m > MARGIN_TOL) {
        status = OracleStatus::IterationLimit;
    }
    OracleResult {
        z,
        x,
        value,
        status,
        constraint_margins,
        iterations,
        gradient_norm: grad_norm,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("found only {found} of {requested} feasible points in {draws} draws")]
pub struct SamplerExhausted {
    pub requested: usize,
    pub found: usize,
    pub draws: usize,
    pub points: Vec<Vec<f64>>,
}

pub const SAMPLER_MAX_DRAWS: usize = 1_000_000;

/// Seeded rejection sampling with `ln x` uniform in `[-3, 3]^n`.
pub fn sample_feasible_points(
    s: &GpStage,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SamplerExhausted> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut draws = 0;
    while points.len() < count && draws < SAMPLER_MAX_DRAWS {
        draws += 1;
        let z: Vec<f64> = (0..s.n()).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        if s.constraints().iter().all(|g| log_posy(g, &z).0 <= 0.0) {
            points.push(z.iter().map(|v| v.exp()).collect());
        }
    }
    if points.len() < count {
        return Err(SamplerExhausted {
            requested: count,
            found: points.len(),
            draws,
            points,
        });
    }
    Ok(points)
}

/// Random small stage: `n <= 3`, at most 6 terms, integer exponents in
/// `-3..=3`, coefficients in `[0.1, 10]`, degree of difficulty in `0..=2`.
/// Nothing guarantees the result is bounded or feasible.
pub fn random_stage<R: Rng>(rng: &mut R) -> GpStage {
    let n = rng.gen_range(1..=3usize);
    let total = rng.gen_range(n + 1..=(n + 3).min(6));
    let objective_terms = rng.gen_range(1..=total);
    let mut remaining = total - objective_terms;
    let term = |rng: &mut R| {
        let exps: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.gen_range(-3i32..=3)))
            .collect();
        (rng.gen_range(0.1..=10.0), exps)
    };
    let objective =
        Posynomial::from_terms((0..objective_terms).map(|_| term(rng)).collect::<Vec<_>>())
            .expect("valid random terms");
    let mut constraints = Vec::new();
    while remaining > 0 {
        let k = rng.gen_range(1..=remaining);
        remaining -= k;
        constraints.push(
            Posynomial::from_terms((0..k).map(|_| term(rng)).collect::<Vec<_>>())
                .expect("valid random terms"),
        );
    }
    GpStage::new(objective, constraints).expect("consistent dimensions")
}
