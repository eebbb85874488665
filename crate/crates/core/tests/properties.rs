//! Property tests and worked examples across the public API: solver optimality,
//! estimator structure, baseline symmetry, and the regret diagnostics.

#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gbl::baselines::mab_next_distribution;
use gbl::entropy::{log_barrier_value, tsallis_shannon_value, RegularizerParams};
use gbl::environments::{CorruptionSpec, Family, Regime, StochasticSpec};
use gbl::graph::{CliqueCover, FeedbackGraph};
use gbl::harness::{
    aggregate_curves, bound_rhs, penalty_diagnostic, pseudo_regret, run_experiment, Algorithm, Monitors, RegimeKind,
    Scenario, Trace, TraceDetail, TraceRecord,
};
use gbl::learner::{default_params, estimate_losses, Feedback};
use gbl::simplex::SimplexPoint;
use gbl::solver::ftrl_solve;

use common::{barrier_oracle, fd_gradient, max_abs_diff, psi_oracle, random_cover, random_point};

fn cover_strategy() -> impl Strategy<Value = CliqueCover> {
    (1usize..=6, any::<u64>()).prop_map(|(n, seed)| random_cover(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn instance() -> impl Strategy<Value = (CliqueCover, Vec<f64>, usize)> {
    cover_strategy().prop_flat_map(|cover| {
        let n = cover.num_arms();
        (Just(cover), prop::collection::vec(0.0f64..200.0, n), 1usize..2000)
    })
}

fn params_for(cover: &CliqueCover) -> RegularizerParams {
    default_params(cover.num_arms(), 1000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// KKT conditions checked with an independent objective and finite-difference
    /// gradient: free arms share one multiplier, arms at the floor have no smaller gradient.
    #[test]
    fn solver_satisfies_kkt((cover, loss, t) in instance()) {
        let params = params_for(&cover);
        let p = ftrl_solve(&loss, &cover, &params, t, None).unwrap().solution;
        let probs = p.probs();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(probs.iter().all(|&x| x >= params.gamma - 1e-12));

        let inv_eta = params.eta.inv_eta(t);
        let objective = |x: &[f64]| {
            x.iter().zip(&loss).map(|(a, b)| a * b).sum::<f64>()
                + inv_eta * psi_oracle(x, cover.cliques(), params.alpha)
                + barrier_oracle(x, cover.cliques(), params.beta)
        };
        let grad = fd_gradient(objective, probs, 1e-6);
        let free: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > params.gamma * (1.0 + 1e-6)).collect();
        prop_assert!(!free.is_empty());
        let lambda = free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64;
        let scale = 1.0 + lambda.abs() + loss.iter().fold(0.0f64, |a, &b| a.max(b));
        for i in 0..probs.len() {
            if free.contains(&i) {
                prop_assert!((grad[i] - lambda).abs() <= 1e-4 * scale, "arm {} gradient {} vs {}", i, grad[i], lambda);
            } else {
                prop_assert!(grad[i] >= lambda - 1e-4 * scale, "pinned arm {} gradient {} < {}", i, grad[i], lambda);
            }
        }
    }

    #[test]
    fn warm_start_does_not_change_the_solution((cover, loss, t) in instance(), shift in 0.0f64..5.0) {
        let params = params_for(&cover);
        let previous: Vec<f64> = loss.iter().map(|l| (l - shift).max(0.0)).collect();
        let warm = ftrl_solve(&previous, &cover, &params, t, None).unwrap().solution;
        let cold = ftrl_solve(&loss, &cover, &params, t, None).unwrap().solution;
        let hot = ftrl_solve(&loss, &cover, &params, t, Some(&warm)).unwrap().solution;
        prop_assert!(max_abs_diff(cold.probs(), hot.probs()) <= 1e-8);
    }

    /// Raising one arm's cumulative loss never raises its probability.
    #[test]
    fn probability_is_monotone_in_own_loss((cover, loss, t) in instance(), arm_seed in any::<usize>(), bump in 0.1f64..50.0) {
        let params = params_for(&cover);
        let arm = arm_seed % cover.num_arms();
        let before = ftrl_solve(&loss, &cover, &params, t, None).unwrap().solution;
        let mut raised = loss.clone();
        raised[arm] += bump;
        let after = ftrl_solve(&raised, &cover, &params, t, None).unwrap().solution;
        prop_assert!(after.probs()[arm] <= before.probs()[arm] + 1e-9);
    }

    /// The estimate is supported on the played arm's clique and equals `l_i / p(V_k)` there.
    #[test]
    fn estimator_support_and_range(cover in cover_strategy(), seed in any::<u64>(), arm_seed in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cover.num_arms();
        let graph = FeedbackGraph::complete(n).unwrap();
        let p = SimplexPoint::new(random_point(&cover, 0.05, 0.01, &mut rng)).unwrap();
        let losses: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 10.0).collect();
        let arm = arm_seed % n;
        let est = estimate_losses(&Feedback::from_losses(&graph, arm, &losses).unwrap(), &p, &cover).unwrap();
        let k = cover.clique_of(arm).unwrap();
        let m: f64 = cover.clique(k).iter().map(|&j| p.probs()[j]).sum();
        for i in 0..n {
            if cover.clique_of(i).unwrap() == k {
                prop_assert!((est[i] - losses[i] / m).abs() <= 1e-12 * (1.0 + est[i]));
            } else {
                prop_assert_eq!(est[i], 0.0);
            }
        }
    }

    #[test]
    fn baseline_is_permutation_equivariant(loss in prop::collection::vec(0.0f64..500.0, 2..12), t in 1usize..5000, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..loss.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<f64> = perm.iter().map(|&i| loss[i]).collect();
        let p = mab_next_distribution(&loss, t).unwrap();
        let q = mab_next_distribution(&permuted, t).unwrap();
        for (slot, &i) in perm.iter().enumerate() {
            prop_assert!((q.probs()[slot] - p.probs()[i]).abs() <= 1e-12);
        }
    }
}

fn record(t: usize, marginals: Vec<f64>, gap_regret: Option<f64>) -> TraceRecord {
    TraceRecord {
        t,
        arm: 0,
        loss: 0.0,
        clean_loss: 0.0,
        plus_marginals: Some(marginals.clone()),
        marginals,
        best_arm_prob: None,
        plus_best_arm_prob: None,
        distribution: None,
        gap_regret,
        expected_loss: 0.0,
        best_fixed_cum: 0.0,
        consumed: 0.0,
    }
}

fn two_arm_trace(horizon: usize, p_best: f64) -> Trace {
    // Means (0, 1): Delta = (0, 1), so the per-round regret is the mass on arm 1.
    Trace {
        regime: RegimeKind::Stochastic,
        num_arms: 2,
        num_cliques: 2,
        horizon,
        clique_of: vec![0, 1],
        best_arm: Some(0),
        records: (1..=horizon).map(|t| record(t, vec![p_best, 1.0 - p_best], Some(1.0 - p_best))).collect(),
    }
}

#[test]
fn uniform_learner_has_regret_half_t() {
    let curve = pseudo_regret(&two_arm_trace(100, 0.5), RegimeKind::Stochastic).unwrap();
    assert_eq!(curve.len(), 100);
    assert!((curve[99] - 50.0).abs() < 1e-12);
    assert!(curve.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn always_playing_the_best_arm_has_zero_regret() {
    let curve = pseudo_regret(&two_arm_trace(100, 1.0), RegimeKind::Stochastic).unwrap();
    assert!(curve.iter().all(|&r| r == 0.0));
}

#[test]
fn pseudo_regret_rejects_the_wrong_regime() {
    assert!(pseudo_regret(&two_arm_trace(3, 0.5), RegimeKind::Adversarial).is_err());
}

#[test]
fn adversarial_regret_uses_the_best_fixed_arm() {
    let mut trace = two_arm_trace(4, 0.5);
    trace.regime = RegimeKind::Adversarial;
    // Losses (1, 0) every round with p = (1/2, 1/2): learner pays 1/2 per round, best arm 0.
    for r in &mut trace.records {
        r.expected_loss = 0.5;
        r.best_fixed_cum = 0.0;
    }
    let curve = pseudo_regret(&trace, RegimeKind::Adversarial).unwrap();
    assert_eq!(curve, vec![0.5, 1.0, 1.5, 2.0]);
}

/// All mass on a singleton best clique: only `9K ln(NT)` survives.
#[test]
fn bound_with_all_mass_on_the_best_singleton_is_the_constant_term() {
    let (n, k, horizon) = (10, 3, 1_000_000);
    let mut clique_of = vec![1; n];
    clique_of[0] = 0;
    clique_of[5..].iter_mut().for_each(|c| *c = 2);
    let records = (1..=1000)
        .map(|t| {
            let mut r = record(t, vec![1.0, 0.0, 0.0], Some(0.0));
            r.best_arm_prob = Some(1.0);
            r.plus_best_arm_prob = Some(1.0);
            r
        })
        .collect();
    let trace = Trace {
        regime: RegimeKind::Stochastic,
        num_arms: n,
        num_cliques: k,
        horizon,
        clique_of,
        best_arm: Some(0),
        records,
    };
    let bound = bound_rhs(&[trace]).unwrap();
    let expected = 9.0 * 3.0 * 1e7f64.ln();
    assert!((bound.constant_term - expected).abs() < 1e-9);
    assert_eq!(bound.value, bound.constant_term);
    assert!(bound.applicable);
}

#[test]
fn bound_requires_monitor_data() {
    let mut trace = two_arm_trace(5, 0.5);
    assert!(bound_rhs(std::slice::from_ref(&trace)).is_err(), "best-arm probabilities are missing");
    trace.records.iter_mut().for_each(|r| {
        r.best_arm_prob = Some(0.5);
        r.plus_best_arm_prob = Some(0.5);
    });
    let bound = bound_rhs(&[trace]).unwrap();
    assert!(!bound.applicable, "NT = 10 is far below 3^11");
}

fn small_scenario(horizon: usize, detail: TraceDetail) -> Scenario {
    let sizes = [2, 2, 1];
    Scenario {
        graph: FeedbackGraph::disjoint_cliques(&sizes).unwrap(),
        cover: CliqueCover::blocks(&sizes).unwrap(),
        regime: Regime::Stochastic {
            spec: StochasticSpec::new(vec![0.2, 0.5, 0.5, 0.6, 0.7], Family::Bernoulli).unwrap(),
            corruption: CorruptionSpec::none(),
        },
        horizon,
        algorithm: Algorithm::GraphFtrl,
        params: default_params(5, horizon),
        monitors: Monitors::default(),
        detail,
    }
}

#[test]
fn one_round_regret_is_the_gap_weighted_first_distribution() {
    let scenario = small_scenario(1, TraceDetail::Full);
    let out = run_experiment(&scenario, 3).unwrap();
    assert_eq!(out.trace.records.len(), 1);
    let p = out.trace.records[0].distribution.clone().unwrap();
    let gaps = [0.0, 0.3, 0.3, 0.4, 0.5];
    let expected: f64 = p.iter().zip(gaps).map(|(a, b)| a * b).sum();
    assert!((out.summary.final_regret - expected).abs() < 1e-12);
}

/// At T = 1 the penalty is `Phi(p^gamma) - Phi(p_1) + Psi(p^gamma) - Psi(p_1)`.
#[test]
fn penalty_at_one_round() {
    let scenario = small_scenario(1, TraceDetail::Full);
    let out = run_experiment(&scenario, 0).unwrap();
    let params = scenario.params;
    let diag = penalty_diagnostic(&out.trace, &params, &scenario.cover, 0).unwrap();
    let p1 = out.trace.records[0].distribution.clone().unwrap();
    let corner = SimplexPoint::corner(5, 0, params.gamma);
    let cliques = scenario.cover.cliques();
    let expected = barrier_oracle(corner.probs(), cliques, params.beta) - barrier_oracle(&p1, cliques, params.beta)
        + psi_oracle(corner.probs(), cliques, params.alpha)
        - psi_oracle(&p1, cliques, params.alpha);
    assert!((diag.penalty - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    // Library and oracle agree on the pieces too.
    let lib_barrier = log_barrier_value(corner.probs(), &scenario.cover, params.beta).unwrap();
    assert!((lib_barrier - barrier_oracle(corner.probs(), cliques, params.beta)).abs() < 1e-9);
    let lib_psi = tsallis_shannon_value(&p1, &scenario.cover, params.alpha).unwrap();
    assert!((lib_psi - psi_oracle(&p1, cliques, params.alpha)).abs() < 1e-9);
    // First barrier term is at most 9K ln(1/gamma).
    assert!(diag.barrier_term <= 9.0 * 3.0 * (1.0 / params.gamma).ln());
    assert!(diag.holds());
}

#[test]
fn penalty_requires_full_distributions() {
    let scenario = small_scenario(20, TraceDetail::Summary);
    let out = run_experiment(&scenario, 0).unwrap();
    assert!(out.summary.penalty.is_none());
    assert!(penalty_diagnostic(&out.trace, &scenario.params, &scenario.cover, 0).is_err());
}

#[test]
fn aggregate_examples() {
    let run = |seed| pseudo_regret(&run_experiment(&small_scenario(200, TraceDetail::Summary), seed).unwrap().trace, RegimeKind::Stochastic).unwrap();
    let single = aggregate_curves(&[run(1)]).unwrap();
    assert_eq!(single.mean, run(1));
    assert!(single.std.iter().all(|&s| s == 0.0));

    let duplicated = aggregate_curves(&[run(4), run(4), run(4)]).unwrap();
    assert!(duplicated.std.iter().all(|&s| s == 0.0));

    let many: Vec<Vec<f64>> = (0..20).map(run).collect();
    let agg = aggregate_curves(&many).unwrap();
    assert!(*agg.std.last().unwrap() > 0.0);

    assert!(aggregate_curves(&[run(1), run(1)[..100].to_vec()]).is_err());
    assert!(aggregate_curves(&[]).is_err());
}

#[test]
fn runs_are_deterministic_and_traces_well_formed() {
    let scenario = small_scenario(300, TraceDetail::Summary);
    let a = run_experiment(&scenario, 9).unwrap();
    let b = run_experiment(&scenario, 9).unwrap();
    assert_eq!(a.trace, b.trace);
    for (i, r) in a.trace.records.iter().enumerate() {
        assert_eq!(r.t, i + 1);
        assert!((r.marginals.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    assert_eq!(a.summary.violations.total(), 0);
}

#[test]
fn baseline_runs_without_graph_monitors() {
    let scenario = Scenario { algorithm: Algorithm::TsallisInf, ..small_scenario(300, TraceDetail::Summary) };
    let out = run_experiment(&scenario, 2).unwrap();
    assert_eq!(out.trace.records.len(), 300);
    assert!(out.summary.max_stability_ratio.is_none());
}
