//! FTRL with feedback graphs.
//!
//! Each round the learner plays `p_t = argmin_{p in S^gamma_N} L_{t-1} . p + R_t(p)`,
//! samples `I_t ~ p_t`, and builds the importance-weighted estimate
//! `l_hat_{t,i} = l_{t,i} / p_t(V(i))` for arms in the clique of `I_t` (zero elsewhere).
//! Losses of neighbors outside `V(I_t)` are observed but not used.

use std::collections::BTreeMap;

use rand::Rng;

use crate::entropy::{EtaSchedule, RegularizerParams};
use crate::error::{Error, Result};
use crate::graph::{CliqueCover, FeedbackGraph};
use crate::simplex::{marginals_unchecked, SimplexPoint};
use crate::solver::{ftrl_solve_with, SolverOptions};

/// `alpha = 2(ln^2(NT) + 1)`, `beta = 9`, `gamma = 1/(NT)`, `eta_t = 1/sqrt(t)`.
pub fn default_params(num_arms: usize, horizon: usize) -> RegularizerParams {
    let nt = (num_arms * horizon) as f64;
    let l = nt.ln();
    RegularizerParams { alpha: 2.0 * (l * l + 1.0), beta: 9.0, gamma: 1.0 / nt, eta: EtaSchedule::InverseSqrt }
}

/// Losses revealed after playing `chosen_arm`: one entry per arm of `N(chosen_arm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub chosen_arm: usize,
    pub observed: BTreeMap<usize, f64>,
}

impl Feedback {
    /// Reveals `losses[j]` for every neighbor `j` of `chosen_arm` (itself included).
    pub fn from_losses(graph: &FeedbackGraph, chosen_arm: usize, losses: &[f64]) -> Result<Self> {
        if losses.len() != graph.num_arms() {
            return Err(Error::Dimension { expected: graph.num_arms(), got: losses.len() });
        }
        let observed = graph.neighbors(chosen_arm)?.into_iter().map(|j| (j, losses[j])).collect();
        let feedback = Self { chosen_arm, observed };
        feedback.validate(graph)?;
        Ok(feedback)
    }

    /// Keys must be exactly `N(chosen_arm)` and every loss must lie in `[0, 1]`.
    pub fn validate(&self, graph: &FeedbackGraph) -> Result<()> {
        let expected = graph.neighbors(self.chosen_arm)?;
        if !self.observed.keys().copied().eq(expected.iter().copied()) {
            return Err(Error::Feedback(format!(
                "observed arms {:?} differ from the neighborhood {:?} of arm {}",
                self.observed.keys().collect::<Vec<_>>(),
                expected,
                self.chosen_arm
            )));
        }
        if let Some((j, l)) = self.observed.iter().find(|(_, l)| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Feedback(format!("loss {l} of arm {j} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Learner state: `L_hat_{t-1}` and the round `t` whose distribution is next.
#[derive(Debug, Clone)]
pub struct LearnerState {
    cum_est_loss: Vec<f64>,
    round: usize,
    params: RegularizerParams,
    cover: CliqueCover,
    last_distribution: Option<SimplexPoint>,
    solver: SolverOptions,
}

impl LearnerState {
    pub fn new(cover: CliqueCover, params: RegularizerParams) -> Result<Self> {
        params.validate(cover.num_arms())?;
        Ok(Self {
            cum_est_loss: vec![0.0; cover.num_arms()],
            round: 1,
            params,
            cover,
            last_distribution: None,
            solver: SolverOptions::default(),
        })
    }

    /// State for horizon `T` with the default parameters.
    pub fn with_horizon(cover: CliqueCover, horizon: usize) -> Result<Self> {
        let params = default_params(cover.num_arms(), horizon);
        Self::new(cover, params)
    }

    pub fn with_solver_options(mut self, options: SolverOptions) -> Self {
        self.solver = options;
        self
    }

    pub fn cum_est_loss(&self) -> &[f64] {
        &self.cum_est_loss
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn params(&self) -> &RegularizerParams {
        &self.params
    }

    pub fn cover(&self) -> &CliqueCover {
        &self.cover
    }

    pub fn last_distribution(&self) -> Option<&SimplexPoint> {
        self.last_distribution.as_ref()
    }

    /// `p_t` for the current round; cached as the next warm start.
    pub fn next_distribution(&mut self) -> Result<SimplexPoint> {
        let report = ftrl_solve_with(
            &self.cum_est_loss,
            &self.cover,
            &self.params,
            self.round,
            self.last_distribution.as_ref(),
            &self.solver,
        )?;
        self.last_distribution = Some(report.solution.clone());
        Ok(report.solution)
    }

    /// `L_hat_t = L_hat_{t-1} + estimate`, then advances the round.
    pub fn update(&mut self, estimate: &[f64]) -> Result<()> {
        if estimate.len() != self.cum_est_loss.len() {
            return Err(Error::Dimension { expected: self.cum_est_loss.len(), got: estimate.len() });
        }
        if let Some(x) = estimate.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Contract(format!("loss estimate {x} must be finite and nonnegative")));
        }
        self.cum_est_loss.iter_mut().zip(estimate).for_each(|(l, e)| *l += e);
        self.round += 1;
        Ok(())
    }

    /// `p_t^+ = argmin L_hat_t . p + R_t(p)`, for the round just completed by
    /// [`update`](Self::update). Uses the same `eta_t` as `p_t`.
    pub fn plus_iterate(&self) -> Result<SimplexPoint> {
        if self.round < 2 {
            return Err(Error::Contract("plus iterate needs a completed round".into()));
        }
        let report = ftrl_solve_with(
            &self.cum_est_loss,
            &self.cover,
            &self.params,
            self.round - 1,
            self.last_distribution.as_ref(),
            &self.solver,
        )?;
        Ok(report.solution)
    }
}

/// Inverse-CDF sample from `p` using one uniform draw.
pub fn sample_arm<R: Rng + ?Sized>(p: &SimplexPoint, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let probs = p.probs();
    for (i, &x) in probs.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the final partial sum; return the last arm with mass.
    probs.iter().rposition(|&x| x > 0.0).unwrap_or(probs.len() - 1)
}

/// Graph-feedback estimate: `l_{t,i} / p(V(i))` for `i` in `V(I_t)`, zero elsewhere.
pub fn estimate_losses(feedback: &Feedback, p: &SimplexPoint, cover: &CliqueCover) -> Result<Vec<f64>> {
    if p.len() != cover.num_arms() {
        return Err(Error::Dimension { expected: cover.num_arms(), got: p.len() });
    }
    let k = cover.clique_of(feedback.chosen_arm)?;
    let marginal: f64 = cover.clique(k).iter().map(|&i| p.probs()[i]).sum();
    if !(marginal > 0.0) {
        return Err(Error::Domain(format!("clique {k} of the chosen arm has zero probability")));
    }
    let mut estimate = vec![0.0; cover.num_arms()];
    for &i in cover.clique(k) {
        let loss = feedback.observed.get(&i).ok_or_else(|| {
            Error::Feedback(format!("arm {i} shares a clique with arm {} but was not observed", feedback.chosen_arm))
        })?;
        estimate[i] = loss / marginal;
    }
    Ok(estimate)
}

/// Exact expectation of [`estimate_losses`] over `I_t ~ p` for fixed losses:
/// `sum_k p(V_k) * (l_i / p(V_k)) 1{i in V_k}`.
pub fn expected_estimate(p: &SimplexPoint, losses: &[f64], cover: &CliqueCover) -> Vec<f64> {
    let marg = marginals_unchecked(p.probs(), cover);
    let mut out = vec![0.0; losses.len()];
    for (k, clique) in cover.cliques().iter().enumerate() {
        for &i in clique {
            out[i] += marg[k] * (losses[i] / marg[k]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_params_values() {
        let p = default_params(10, 1000);
        assert_eq!(p.beta, 9.0);
        assert!((p.gamma - 1e-4).abs() < 1e-18);
        assert_eq!(p.eta.eta(4), 0.5);
        let l = 4.0 * 10f64.ln();
        assert!((p.alpha - 2.0 * (l * l + 1.0)).abs() < 1e-12);
        let p = default_params(1, 1);
        assert_eq!(p.alpha, 2.0);
        assert_eq!(p.gamma, 1.0);
    }

    #[test]
    fn first_distribution_is_uniform() {
        let mut s = LearnerState::with_horizon(CliqueCover::blocks(&[2, 2, 2]).unwrap(), 100).unwrap();
        let p = s.next_distribution().unwrap();
        assert!(p.probs().iter().all(|x| (x - 1.0 / 6.0).abs() < 1e-12));
        assert_eq!(s.last_distribution(), Some(&p));
    }

    #[test]
    fn next_distribution_is_deterministic() {
        let cover = CliqueCover::blocks(&[2, 1]).unwrap();
        let mut a = LearnerState::with_horizon(cover.clone(), 50).unwrap();
        let mut b = LearnerState::with_horizon(cover, 50).unwrap();
        for s in [&mut a, &mut b] {
            s.next_distribution().unwrap();
            s.update(&[0.0, 3.0, 1.0]).unwrap();
        }
        assert_eq!(a.next_distribution().unwrap(), b.next_distribution().unwrap());
    }

    #[test]
    fn repeated_loss_drives_arm_to_floor() {
        let cover = CliqueCover::singletons(3);
        let horizon = 2000;
        let mut s = LearnerState::with_horizon(cover.clone(), horizon).unwrap();
        let gamma = s.params().gamma;
        let mut p = s.next_distribution().unwrap();
        for _ in 0..horizon - 1 {
            // Full-information loss on arm 2 only.
            let est = [0.0, 0.0, 1.0 / p.probs()[2]];
            s.update(&est).unwrap();
            p = s.next_distribution().unwrap();
        }
        assert!(p.probs()[2] <= 2.0 * gamma, "p_2 = {}", p.probs()[2]);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vertex = SimplexPoint::vertex(4, 2);
        assert!((0..1000).all(|_| sample_arm(&vertex, &mut rng) == 2));

        let p = SimplexPoint::uniform(3);
        let a: Vec<usize> = (0..50).map(|_| sample_arm(&p, &mut ChaCha8Rng::seed_from_u64(9))).collect();
        assert!(a.iter().all(|&x| x == a[0]));
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let s1: Vec<usize> = (0..100).map(|_| sample_arm(&p, &mut r1)).collect();
        let s2: Vec<usize> = (0..100).map(|_| sample_arm(&p, &mut r2)).collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn sampling_frequencies() {
        let n = 5;
        let draws = 1_000_000;
        let p = SimplexPoint::uniform(n);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[sample_arm(&p, &mut rng)] += 1;
        }
        let q = 1.0 / n as f64;
        let sigma = (q * (1.0 - q) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - q).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn estimator_examples() {
        let graph = FeedbackGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let cover = CliqueCover::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let p = SimplexPoint::new(vec![0.25, 0.25, 0.5]).unwrap();
        let fb = Feedback::from_losses(&graph, 0, &[0.2, 0.4, 0.9]).unwrap();
        let est = estimate_losses(&fb, &p, &cover).unwrap();
        assert!((est[0] - 0.4).abs() < 1e-15 && (est[1] - 0.8).abs() < 1e-15 && est[2] == 0.0);

        let p = SimplexPoint::new(vec![0.5, 0.25, 0.25]).unwrap();
        let fb = Feedback::from_losses(&graph, 2, &[0.3, 0.3, 1.0]).unwrap();
        // Arm 1 is observed (neighbor of 2) but not in V(2) = {2}.
        assert!(fb.observed.contains_key(&1));
        assert_eq!(estimate_losses(&fb, &p, &cover).unwrap(), vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn estimator_requires_clique_feedback() {
        let cover = CliqueCover::blocks(&[2, 1]).unwrap();
        let p = SimplexPoint::uniform(3);
        let fb = Feedback { chosen_arm: 0, observed: [(0, 0.5)].into_iter().collect() };
        assert!(matches!(estimate_losses(&fb, &p, &cover), Err(Error::Feedback(_))));
        let graph = FeedbackGraph::edgeless(3).unwrap();
        assert!(fb.validate(&graph).is_ok());
        let bad = Feedback { chosen_arm: 0, observed: [(0, 1.5)].into_iter().collect() };
        assert!(bad.validate(&graph).is_err());
    }

    #[test]
    fn expectation_identity() {
        let cover = CliqueCover::new(4, vec![vec![0, 3], vec![1], vec![2]]).unwrap();
        let p = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let losses = [0.3, 0.9, 0.0, 0.55];
        let e = expected_estimate(&p, &losses, &cover);
        for (a, b) in e.iter().zip(&losses) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn update_rules() {
        let cover = CliqueCover::singletons(2);
        let mut s = LearnerState::with_horizon(cover, 10).unwrap();
        s.update(&[0.0, 0.0]).unwrap();
        assert_eq!(s.cum_est_loss(), &[0.0, 0.0]);
        assert_eq!(s.round(), 2);
        s.update(&[1.0, 2.0]).unwrap();
        s.update(&[0.5, 0.0]).unwrap();
        assert_eq!(s.cum_est_loss(), &[1.5, 2.0]);
        assert_eq!(s.round(), 4);
        assert!(matches!(s.update(&[-1.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn plus_iterate_with_zero_estimate_equals_p() {
        let cover = CliqueCover::blocks(&[2, 3]).unwrap();
        let mut s = LearnerState::with_horizon(cover, 100).unwrap();
        let p = s.next_distribution().unwrap();
        s.update(&[0.0; 5]).unwrap();
        let plus = s.plus_iterate().unwrap();
        let diff = p.probs().iter().zip(plus.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}
