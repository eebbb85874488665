//! Self-checks run by `gbl check`: the regularizer derivatives against finite
//! differences, the Hessian lower bound, the convexity witness of the shifted
//! Shannon perspective, the solver against the brute-force oracle, estimator
//! unbiasedness, and a short monitored run. Everything is seeded, so the suite
//! is deterministic.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{
    alpha_for_conditional_floor, hessian_diag_lower_bound, tsallis_perspective_min_eig, tsallis_shannon_grad,
    tsallis_shannon_hessian,
};
use crate::environments::{CorruptionSpec, Family, Regime, StochasticSpec};
use crate::error::Result;
use crate::graph::{CliqueCover, FeedbackGraph};
use crate::harness::run::{run_experiment, Algorithm, Monitors, Scenario, TraceDetail};
use crate::learner::{default_params, estimate_losses, expected_estimate, Feedback};
use crate::simplex::SimplexPoint;
use crate::solver::{brute_force_solve, ftrl_solve};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const CHECK_SEED: u64 = 0x6b1;

type Check = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

pub fn run_checks() -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 6] = [
        ("hessian_vs_finite_differences", check_hessian),
        ("hessian_lower_bound", check_lower_bound),
        ("perspective_convexity_witness", check_convexity_witness),
        ("solver_vs_brute_force", check_solver),
        ("estimator_unbiasedness", check_estimator),
        ("monitored_run", check_monitored_run),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
            match f(&mut rng) {
                Ok((passed, detail)) => CheckResult { name, passed, detail },
                Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
            }
        })
        .collect()
}

fn random_cover<R: Rng>(n: usize, rng: &mut R) -> CliqueCover {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.gen_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    CliqueCover::blocks(&sizes).expect("sizes sum to n")
}

/// Random point with clique marginals bounded away from 0 and every conditional at least `floor`.
fn random_point<R: Rng>(cover: &CliqueCover, floor: f64, rng: &mut R) -> Vec<f64> {
    let weights: Vec<f64> = (0..cover.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut p = vec![0.0; cover.num_arms()];
    for (clique, w) in cover.cliques().iter().zip(&weights) {
        let u: Vec<f64> = clique.iter().map(|_| rng.gen_range(0.0..1.0f64)).collect();
        let su: f64 = u.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let free = 1.0 - floor * clique.len() as f64;
        for (&i, ui) in clique.iter().zip(&u) {
            p[i] = w / total * (floor + free * ui / su);
        }
    }
    p
}

fn check_hessian(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let cover = random_cover(n, rng);
        let alpha = rng.gen_range(0.0..10.0);
        let p = random_point(&cover, 0.05, rng);
        let analytic = tsallis_shannon_hessian(&p, &cover, alpha)?;
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * p[j];
            let (mut up, mut down) = (p.clone(), p.clone());
            up[j] += h;
            down[j] -= h;
            let (gu, gd) = (tsallis_shannon_grad(&up, &cover, alpha)?, tsallis_shannon_grad(&down, &cover, alpha)?);
            for i in 0..n {
                fd[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        worst = worst.max((&analytic - &fd).norm() / analytic.norm().max(1e-300));
    }
    Ok((worst <= 1e-4, format!("max relative Frobenius error {worst:.2e} over 50 instances")))
}

fn check_lower_bound(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for floor in [1e-2, 1e-4] {
        let alpha = alpha_for_conditional_floor(floor);
        for _ in 0..100 {
            let n = rng.gen_range(2..=8);
            let cover = random_cover(n, rng);
            let biggest = cover.sizes().into_iter().max().unwrap_or(1) as f64;
            if floor * biggest > 1.0 {
                continue;
            }
            let p = random_point(&cover, floor, rng);
            let bound = hessian_diag_lower_bound(&p, &cover)?;
            let gap = tsallis_shannon_hessian(&p, &cover, alpha)? - DMatrix::from_diagonal(&bound.into());
            worst = worst.min(SymmetricEigen::new(gap).eigenvalues.min());
        }
    }
    Ok((worst >= -1e-8, format!("min eigenvalue of Hessian minus bound {worst:.3e}")))
}

fn check_convexity_witness(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let (mut min0, mut min_shifted) = (f64::INFINITY, f64::INFINITY);
    for &a in &grid {
        for &b in &grid {
            min0 = min0.min(tsallis_perspective_min_eig(&[a, b], 0.0)?);
            min_shifted = min_shifted.min(tsallis_perspective_min_eig(&[a, b], 0.25)?);
        }
    }
    Ok((
        min0 < 0.0 && min_shifted >= -1e-10,
        format!("min eigenvalue {min0:.3e} at alpha = 0, {min_shifted:.3e} at alpha = 0.25"),
    ))
}

fn check_solver(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..6 {
        let cover = random_cover(3, rng);
        let params = default_params(3, 1000);
        let t = [1, 10, 1000][rng.gen_range(0..3)];
        let scale = 10f64.powf(rng.gen_range(0.0..4.0));
        let loss: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..scale)).collect();
        let fast = ftrl_solve(&loss, &cover, &params, t, None)?.solution;
        let oracle = brute_force_solve(&loss, &cover, &params, t)?;
        let diff = fast.probs().iter().zip(oracle.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok((worst <= 1e-6, format!("max-norm distance to the oracle {worst:.2e}")))
}

fn check_estimator(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let cover = random_cover(n, rng);
        let graph = FeedbackGraph::disjoint_cliques(&cover.sizes())?;
        let p = SimplexPoint::new(random_point(&cover, 0.01, rng))?;
        let losses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        // Exact expectation by enumerating the played arm.
        let mut mean = vec![0.0; n];
        for arm in 0..n {
            let est = estimate_losses(&Feedback::from_losses(&graph, arm, &losses)?, &p, &cover)?;
            mean.iter_mut().zip(&est).for_each(|(m, e)| *m += p.probs()[arm] * e);
        }
        let closed = expected_estimate(&p, &losses, &cover);
        for i in 0..n {
            worst = worst.max((mean[i] - losses[i]).abs()).max((closed[i] - losses[i]).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max deviation of the expectation from the loss {worst:.2e}")))
}

fn check_monitored_run(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let sizes = [2, 2, 2];
    let horizon = 300;
    let scenario = Scenario {
        graph: FeedbackGraph::disjoint_cliques(&sizes)?,
        cover: CliqueCover::blocks(&sizes)?,
        regime: Regime::Stochastic {
            spec: StochasticSpec::new(vec![0.2, 0.5, 0.5, 0.5, 0.5, 0.5], Family::Bernoulli)?,
            corruption: CorruptionSpec::none(),
        },
        horizon,
        algorithm: Algorithm::GraphFtrl,
        params: default_params(6, horizon),
        monitors: Monitors::default(),
        detail: TraceDetail::Full,
    };
    let out = run_experiment(&scenario, 0)?;
    let violations = out.summary.violations.total();
    let penalty = out.summary.penalty.expect("full detail records the penalty");
    Ok((
        violations == 0 && penalty.holds(),
        format!(
            "{violations} monitor violations in {horizon} rounds; penalty {:.1} <= {:.1}",
            penalty.penalty, penalty.rhs
        ),
    ))
}
