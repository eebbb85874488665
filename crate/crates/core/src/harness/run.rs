//! The interaction loop: distribution, sample, environment round, feedback,
//! estimate, update, with the per-round invariant monitors.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{mab_estimate, MabState};
use crate::entropy::RegularizerParams;
use crate::environments::{Environment, Regime};
use crate::error::{Error, Result};
use crate::graph::{CliqueCover, FeedbackGraph};
use crate::harness::diagnostics::{penalty_diagnostic, pseudo_regret, PenaltyDiagnostic};
use crate::learner::{estimate_losses, sample_arm, Feedback, LearnerState};
use crate::simplex::{marginals_unchecked, SimplexPoint};

/// Version of the trace CSV and summary JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Slack on the stability ratio `p_t^+(V_k) / p_t(V_k) <= 7/3`.
pub const STABILITY_RATIO_BOUND: f64 = 7.0 / 3.0 + 1e-6;
/// Slack on the shifted-loss inequality `p_t^+ . l_hat_t <= p_t . l_hat_t`.
pub const SHIFTED_LOSS_SLACK: f64 = 1e-9;

/// RNG stream of the learner's arm sampling.
const SAMPLING_STREAM: u64 = 0;
/// RNG stream of the environment's loss draws.
const ENVIRONMENT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// FTRL with the Tsallis-Shannon regularizer and log-barrier over clique marginals.
    GraphFtrl,
    /// Graph-oblivious 1/2-Tsallis FTRL.
    TsallisInf,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GraphFtrl => "graph_ftrl",
            Algorithm::TsallisInf => "tsallis_inf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monitors {
    #[serde(default = "enabled")]
    pub stability_ratio: bool,
    #[serde(default = "enabled")]
    pub shifted_loss: bool,
    /// Record `p_t^+` marginals and `p_t(i*)` for the regret-bound diagnostic.
    #[serde(default = "enabled")]
    pub bound_rhs: bool,
}

fn enabled() -> bool {
    true
}

impl Default for Monitors {
    fn default() -> Self {
        Self { stability_ratio: true, shifted_loss: true, bound_rhs: true }
    }
}

impl Monitors {
    pub fn none() -> Self {
        Self { stability_ratio: false, shifted_loss: false, bound_rhs: false }
    }

    fn needs_plus_iterate(&self) -> bool {
        self.stability_ratio || self.shifted_loss || self.bound_rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDetail {
    /// Clique marginals only.
    #[default]
    Summary,
    /// Also the full `p_t` vector each round (`O(NT)` storage).
    Full,
}

/// A fully resolved experiment: everything except the seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: FeedbackGraph,
    pub cover: CliqueCover,
    pub regime: Regime,
    pub horizon: usize,
    pub algorithm: Algorithm,
    pub params: RegularizerParams,
    pub monitors: Monitors,
    pub detail: TraceDetail,
}

impl Scenario {
    pub fn num_arms(&self) -> usize {
        self.graph.num_arms()
    }

    /// Checks the cross-field invariants: `T >= 1`, the cover is valid for the graph,
    /// the environment matches `N`, and `params` is feasible.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        crate::graph::validate_cover(&self.graph, &self.cover)?;
        self.params.validate(self.num_arms())?;
        Environment::new(self.num_arms(), self.horizon, self.regime.clone())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Stochastic,
    Adversarial,
}

impl From<&Regime> for RegimeKind {
    fn from(regime: &Regime) -> Self {
        match regime {
            Regime::Stochastic { .. } => RegimeKind::Stochastic,
            Regime::Adversarial(_) => RegimeKind::Adversarial,
        }
    }
}

/// One round of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// `I_t`.
    pub arm: usize,
    /// `l_{t, I_t}`.
    pub loss: f64,
    /// `l~_{t, I_t}`.
    pub clean_loss: f64,
    /// `p_t(V_k)` for every clique.
    pub marginals: Vec<f64>,
    /// `p_t^+(V_k)`, when monitored.
    pub plus_marginals: Option<Vec<f64>>,
    /// `p_{t,i*}` and `p^+_{t,i*}` for the stochastic best arm, when monitored.
    pub best_arm_prob: Option<f64>,
    pub plus_best_arm_prob: Option<f64>,
    /// Full `p_t`, in full-detail mode.
    pub distribution: Option<Vec<f64>>,
    /// `sum_i p_{t,i} Delta_i` from the clean means (stochastic regimes only).
    pub gap_regret: Option<f64>,
    /// `p_t . l_t`.
    pub expected_loss: f64,
    /// `min_i sum_{s <= t} l_{s,i}`.
    pub best_fixed_cum: f64,
    /// `||l_t - l~_t||_inf`.
    pub consumed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub regime: RegimeKind,
    pub num_arms: usize,
    pub num_cliques: usize,
    pub horizon: usize,
    /// Clique index of every arm, so marginals can be related to arms.
    pub clique_of: Vec<usize>,
    /// The unique best arm of a stochastic regime.
    pub best_arm: Option<usize>,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub stability_ratio: usize,
    pub shifted_loss: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.stability_ratio + self.shifted_loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub num_arms: usize,
    pub num_cliques: usize,
    pub params: RegularizerParams,
    pub final_regret: f64,
    /// Realized `C = sum_t ||l_t - l~_t||_inf`.
    pub realized_corruption: f64,
    pub violations: ViolationCounts,
    /// Largest `p_t^+(V_k) / p_t(V_k)` seen, when monitored.
    pub max_stability_ratio: Option<f64>,
    /// Largest `p_t^+ . l_hat_t - p_t . l_hat_t` seen, when monitored.
    pub max_shifted_excess: Option<f64>,
    /// Penalty diagnostic, in full-detail graph runs.
    pub penalty: Option<PenaltyDiagnostic>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: RunSummary,
}

enum Player {
    Graph(LearnerState),
    Mab(MabState),
}

/// Runs `scenario` with `seed`. Solver or learner failures abort the run and
/// report the failing round.
pub fn run_experiment(scenario: &Scenario, seed: u64) -> Result<RunOutput> {
    scenario.validate()?;
    let started = Instant::now();
    let n = scenario.num_arms();
    let cover = &scenario.cover;
    let horizon = scenario.horizon;
    let mut env = Environment::new(n, horizon, scenario.regime.clone())?;
    let mut sampling = ChaCha8Rng::seed_from_u64(seed);
    sampling.set_stream(SAMPLING_STREAM);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(ENVIRONMENT_STREAM);

    let (best_arm, deltas) = match &scenario.regime {
        Regime::Stochastic { spec, .. } => {
            let mu_star = spec.means()[spec.best_arm()];
            (Some(spec.best_arm()), Some(spec.means().iter().map(|m| m - mu_star).collect::<Vec<_>>()))
        }
        Regime::Adversarial(_) => (None, None),
    };

    let mut player = match scenario.algorithm {
        Algorithm::GraphFtrl => Player::Graph(LearnerState::new(cover.clone(), scenario.params)?),
        Algorithm::TsallisInf => Player::Mab(MabState::new(n)),
    };
    let monitored = scenario.algorithm == Algorithm::GraphFtrl && scenario.monitors.needs_plus_iterate();

    let mut records = Vec::with_capacity(horizon);
    let mut cum_arm_loss = vec![0.0; n];
    let mut violations = ViolationCounts::default();
    let mut max_ratio = monitored.then_some(0.0f64);
    let mut max_excess = monitored.then_some(f64::NEG_INFINITY);

    for t in 1..=horizon {
        let abort = |source: Error| Error::RunAborted { round: t, source: Box::new(source) };
        let p = match &mut player {
            Player::Graph(state) => state.next_distribution(),
            Player::Mab(state) => state.next_distribution(),
        }
        .map_err(abort)?;
        let arm = sample_arm(&p, &mut sampling);
        let round = env.gen_round(t, &mut env_rng).map_err(abort)?;

        let mut plus = None;
        match &mut player {
            Player::Graph(state) => {
                let feedback = Feedback::from_losses(&scenario.graph, arm, &round.realized).map_err(abort)?;
                let estimate = estimate_losses(&feedback, &p, cover).map_err(abort)?;
                state.update(&estimate).map_err(abort)?;
                if monitored {
                    let p_plus = state.plus_iterate().map_err(abort)?;
                    let marg = marginals_unchecked(p.probs(), cover);
                    let marg_plus = marginals_unchecked(p_plus.probs(), cover);
                    if scenario.monitors.stability_ratio {
                        let ratio = marg_plus.iter().zip(&marg).map(|(a, b)| a / b).fold(0.0, f64::max);
                        max_ratio = max_ratio.map(|m| m.max(ratio));
                        if ratio > STABILITY_RATIO_BOUND {
                            violations.stability_ratio += 1;
                        }
                    }
                    if scenario.monitors.shifted_loss {
                        let excess = p_plus.dot(&estimate) - p.dot(&estimate);
                        max_excess = max_excess.map(|m| m.max(excess));
                        if excess > SHIFTED_LOSS_SLACK {
                            violations.shifted_loss += 1;
                        }
                    }
                    plus = Some((p_plus, marg_plus));
                }
            }
            Player::Mab(state) => {
                let estimate = mab_estimate(arm, round.realized[arm], &p).map_err(abort)?;
                state.update(&estimate).map_err(abort)?;
            }
        }

        cum_arm_loss.iter_mut().zip(&round.realized).for_each(|(c, l)| *c += l);
        let record_bound = scenario.monitors.bound_rhs && monitored;
        records.push(TraceRecord {
            t,
            arm,
            loss: round.realized[arm],
            clean_loss: round.clean[arm],
            marginals: marginals_unchecked(p.probs(), cover),
            best_arm_prob: best_arm.filter(|_| record_bound).map(|i| p.probs()[i]),
            plus_best_arm_prob: best_arm
                .filter(|_| record_bound)
                .and_then(|i| plus.as_ref().map(|(pp, _)| pp.probs()[i])),
            plus_marginals: plus.filter(|_| record_bound).map(|(_, m)| m),
            distribution: (scenario.detail == TraceDetail::Full).then(|| p.probs().to_vec()),
            gap_regret: deltas.as_ref().map(|d| p.dot(d)),
            expected_loss: p.dot(&round.realized),
            best_fixed_cum: cum_arm_loss.iter().copied().fold(f64::INFINITY, f64::min),
            consumed: round.consumed,
        });
    }

    let trace = Trace {
        regime: RegimeKind::from(&scenario.regime),
        num_arms: n,
        num_cliques: cover.len(),
        horizon,
        clique_of: (0..n).map(|i| cover.clique_of_unchecked(i)).collect(),
        best_arm,
        records,
    };
    let curve = pseudo_regret(&trace, trace.regime)?;
    let penalty = match (scenario.algorithm, scenario.detail) {
        (Algorithm::GraphFtrl, TraceDetail::Full) => {
            // Comparator arm: the stochastic best arm, else the best arm in hindsight.
            let target = best_arm.unwrap_or_else(|| {
                (0..n).min_by(|&a, &b| cum_arm_loss[a].total_cmp(&cum_arm_loss[b])).unwrap_or(0)
            });
            Some(penalty_diagnostic(&trace, &scenario.params, cover, target)?)
        }
        _ => None,
    };
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        algorithm: scenario.algorithm,
        seed,
        horizon,
        num_arms: n,
        num_cliques: cover.len(),
        params: scenario.params,
        final_regret: curve.last().copied().unwrap_or(0.0),
        realized_corruption: env.consumed_total(),
        violations,
        max_stability_ratio: max_ratio,
        max_shifted_excess: max_excess,
        penalty,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { trace, summary })
}

/// Full `p_t` of a record as a simplex point (full-detail traces only).
pub(crate) fn record_distribution(record: &TraceRecord) -> Result<SimplexPoint> {
    let probs = record.distribution.clone().ok_or_else(|| Error::MissingMonitorData("trace lacks full distributions; use full trace detail".into()))?;
    Ok(SimplexPoint::from_vec_unchecked(probs))
}
