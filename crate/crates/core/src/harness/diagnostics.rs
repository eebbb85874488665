//! Pseudo-regret, the explicit-constant regret bound, the FTRL penalty term,
//! and cross-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::entropy::{log_barrier_value, tsallis_shannon_value, EtaSchedule, RegularizerParams};
use crate::error::{Error, Result};
use crate::graph::CliqueCover;
use crate::harness::run::{record_distribution, RegimeKind, Trace};
use crate::simplex::SimplexPoint;

/// The regret bound's constants are stated for `NT >= 3^11`.
pub const BOUND_MIN_NT: usize = 177_147;

/// Cumulative pseudo-regret after each round.
///
/// Stochastic: `sum_t sum_i p_{t,i} Delta_i` from the clean means.
/// Adversarial: `sum_{s<=t} p_s . l_s - min_i sum_{s<=t} l_{s,i}` on the realized losses.
pub fn pseudo_regret(trace: &Trace, regime: RegimeKind) -> Result<Vec<f64>> {
    if regime != trace.regime {
        return Err(Error::RegimeMismatch(format!("trace is {:?}, requested {:?}", trace.regime, regime)));
    }
    match regime {
        RegimeKind::Stochastic => {
            let mut total = 0.0;
            trace
                .records
                .iter()
                .map(|r| {
                    let inc = r.gap_regret.ok_or_else(|| {
                        Error::RegimeMismatch(format!("round {} has no gap-based regret", r.t))
                    })?;
                    total += inc;
                    Ok(total)
                })
                .collect()
        }
        RegimeKind::Adversarial => {
            let mut learner = 0.0;
            Ok(trace
                .records
                .iter()
                .map(|r| {
                    learner += r.expected_loss;
                    learner - r.best_fixed_cum
                })
                .collect())
        }
    }
}

/// Terms of the explicit-constant regret bound, evaluated on seed averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostic {
    /// `9K ln(NT)`.
    pub constant_term: f64,
    /// `6 ln^2(NT) sum_t sum_{k != k*} sqrt(E[p_t(V_k)] / t)`.
    pub clique_term: f64,
    /// `2 ln(NT) sum_t sqrt(E[p_t(V_{k*} \ i*)] / t)`.
    pub best_clique_term: f64,
    /// `16 sum_t sqrt(E[p_t^+(V_{k*} \ i*)] / t)`.
    pub plus_term: f64,
    pub value: f64,
    /// Whether `NT >= 3^11`, the range where the constants are proved.
    pub applicable: bool,
}

/// Right-hand side of the explicit-constant regret bound, with expectations
/// replaced by averages over `traces` (one per seed, same scenario).
pub fn bound_rhs(traces: &[Trace]) -> Result<BoundDiagnostic> {
    let first = traces.first().ok_or_else(|| Error::MissingMonitorData("no traces".into()))?;
    let best_arm = first
        .best_arm
        .ok_or_else(|| Error::RegimeMismatch("the regret bound needs a stochastic best arm".into()))?;
    for trace in traces {
        if trace.horizon != first.horizon || trace.records.len() != first.records.len() {
            return Err(Error::InconsistentHorizons(format!("{} vs {}", trace.horizon, first.horizon)));
        }
        if trace.num_arms != first.num_arms || trace.clique_of != first.clique_of || trace.best_arm != first.best_arm {
            return Err(Error::RegimeMismatch("traces come from different scenarios".into()));
        }
    }
    let (n, k, horizon) = (first.num_arms, first.num_cliques, first.horizon);
    let best_clique = first.clique_of[best_arm];
    let seeds = traces.len() as f64;
    let log_nt = ((n * horizon) as f64).ln();

    let (mut clique_sum, mut best_sum, mut plus_sum) = (0.0, 0.0, 0.0);
    let mut mean_marg = vec![0.0; k];
    for idx in 0..first.records.len() {
        mean_marg.iter_mut().for_each(|m| *m = 0.0);
        let (mut rest, mut plus_rest) = (0.0, 0.0);
        for trace in traces {
            let r = &trace.records[idx];
            let missing = || Error::MissingMonitorData(format!("round {} lacks bound monitor data", r.t));
            let plus = r.plus_marginals.as_ref().ok_or_else(missing)?;
            let p_best = r.best_arm_prob.ok_or_else(missing)?;
            let plus_best = r.plus_best_arm_prob.ok_or_else(missing)?;
            mean_marg.iter_mut().zip(&r.marginals).for_each(|(m, x)| *m += x / seeds);
            rest += (r.marginals[best_clique] - p_best).max(0.0) / seeds;
            plus_rest += (plus[best_clique] - plus_best).max(0.0) / seeds;
        }
        let t = first.records[idx].t as f64;
        clique_sum += (0..k).filter(|&j| j != best_clique).map(|j| (mean_marg[j] / t).sqrt()).sum::<f64>();
        best_sum += (rest / t).sqrt();
        plus_sum += (plus_rest / t).sqrt();
    }
    let constant_term = 9.0 * k as f64 * log_nt;
    let clique_term = 6.0 * log_nt * log_nt * clique_sum;
    let best_clique_term = 2.0 * log_nt * best_sum;
    let plus_term = 16.0 * plus_sum;
    Ok(BoundDiagnostic {
        constant_term,
        clique_term,
        best_clique_term,
        plus_term,
        value: constant_term + clique_term + best_clique_term + plus_term,
        applicable: n * horizon >= BOUND_MIN_NT,
    })
}

/// The FTRL penalty term against the corner `p^gamma` of a target arm, and the
/// closed-form bound on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyDiagnostic {
    /// `Phi(p^gamma) - Phi(p_1)`.
    pub barrier_term: f64,
    /// `sum_t (1/eta_t - 1/eta_{t-1}) (Psi(p^gamma) - Psi(p_t))`.
    pub entropy_term: f64,
    pub penalty: f64,
    /// `9K ln(1/gamma) + 5 ln^2(1/gamma) sum_t sum_{k != k*} sqrt(p_t(V_k)/t)
    ///  + 2 ln(1/gamma) sum_t sqrt(p_t(V_{k*} \ i*)/t)`.
    pub rhs: f64,
    /// The bound is proved for `eta_t = 1/sqrt(t)`, `beta <= 9`, and
    /// `alpha <= 2(ln^2(1/gamma) + 1)`; outside that it is reported but not asserted.
    pub applicable: bool,
}

impl PenaltyDiagnostic {
    pub fn holds(&self) -> bool {
        self.penalty <= self.rhs
    }
}

/// Evaluates the penalty term exactly on a full-detail trace.
pub fn penalty_diagnostic(
    trace: &Trace,
    params: &RegularizerParams,
    cover: &CliqueCover,
    target_arm: usize,
) -> Result<PenaltyDiagnostic> {
    let n = cover.num_arms();
    if trace.num_arms != n {
        return Err(Error::Dimension { expected: n, got: trace.num_arms });
    }
    if target_arm >= n {
        return Err(Error::Index { index: target_arm, len: n });
    }
    let first = trace.records.first().ok_or_else(|| Error::MissingMonitorData("empty trace".into()))?;
    let gamma = params.gamma;
    let corner = SimplexPoint::corner(n, target_arm, gamma);
    let psi_corner = tsallis_shannon_value(corner.probs(), cover, params.alpha)?;
    let p1 = record_distribution(first)?;
    let barrier_term =
        log_barrier_value(corner.probs(), cover, params.beta)? - log_barrier_value(p1.probs(), cover, params.beta)?;

    let best_clique = cover.clique_of(target_arm)?;
    let log_inv_gamma = (1.0 / gamma).ln();
    let (mut entropy_term, mut clique_sum, mut rest_sum) = (0.0, 0.0, 0.0);
    for r in &trace.records {
        let p = record_distribution(r)?;
        let weight = params.eta.inv_eta(r.t) - params.eta.inv_eta(r.t - 1);
        entropy_term += weight * (psi_corner - tsallis_shannon_value(p.probs(), cover, params.alpha)?);
        let t = r.t as f64;
        clique_sum +=
            (0..cover.len()).filter(|&k| k != best_clique).map(|k| (r.marginals[k] / t).sqrt()).sum::<f64>();
        let rest = (r.marginals[best_clique] - p.probs()[target_arm]).max(0.0);
        rest_sum += (rest / t).sqrt();
    }
    let rhs = 9.0 * cover.len() as f64 * log_inv_gamma
        + 5.0 * log_inv_gamma * log_inv_gamma * clique_sum
        + 2.0 * log_inv_gamma * rest_sum;
    let applicable = params.eta == EtaSchedule::InverseSqrt
        && params.beta <= 9.0
        && params.alpha <= 2.0 * (log_inv_gamma * log_inv_gamma + 1.0) * (1.0 + 1e-12);
    Ok(PenaltyDiagnostic { barrier_term, entropy_term, penalty: barrier_term + entropy_term, rhs, applicable })
}

/// Per-round mean and sample standard deviation of regret curves.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Aggregates equal-length curves; the standard deviation uses `n - 1` and is 0 for one curve.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<AggregateCurve> {
    let first = curves.first().ok_or_else(|| Error::InconsistentHorizons("no runs to aggregate".into()))?;
    if let Some(c) = curves.iter().find(|c| c.len() != first.len()) {
        return Err(Error::InconsistentHorizons(format!("curve lengths {} and {}", first.len(), c.len())));
    }
    let (mut mean, mut std) = (Vec::with_capacity(first.len()), Vec::with_capacity(first.len()));
    let mut column = Vec::with_capacity(curves.len());
    for t in 0..first.len() {
        column.clear();
        column.extend(curves.iter().map(|c| c[t]));
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
    }
    Ok(AggregateCurve { mean, std })
}

/// Mean and sample standard deviation (`n - 1`) of a set of values; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // Welford's update: identical values give exactly that mean and a zero spread.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = if values.len() > 1 { (m2 / (values.len() - 1) as f64).sqrt() } else { 0.0 };
    (mean, std)
}

/// Least-squares slope of `ln y` against `ln x`: the growth exponent of `y` in `x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain("need at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}
