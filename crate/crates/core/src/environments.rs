//! Loss generators: stochastic, adversarially corrupted stochastic, and oblivious adversarial.
//!
//! A stochastic environment first draws a clean vector `l~_t` i.i.d. from a
//! fixed distribution; a corruption strategy may then move it to the final
//! vector `l_t`, paying `||l_t - l~_t||_inf` from a total budget `C`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CliqueCover;

/// Per-arm loss distribution with mean `mu_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    /// `l_i ~ Bernoulli(mu_i)`.
    Bernoulli,
    /// `l_i ~ Uniform[mu_i - width/2, mu_i + width/2]`, clipped to `[0, 1]`.
    /// Clipping shifts the mean for `mu_i` within `width/2` of the boundary.
    Uniform { width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSpec {
    means: Vec<f64>,
    family: Family,
    best_arm: usize,
}

impl StochasticSpec {
    /// Requires means in `[0, 1]` and a unique minimum.
    pub fn new(means: Vec<f64>, family: Family) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Spec("no arms".into()));
        }
        if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Spec(format!("mean {m} outside [0, 1]")));
        }
        if let Family::Uniform { width } = family {
            if !(width.is_finite() && width >= 0.0) {
                return Err(Error::Spec(format!("uniform width {width} must be nonnegative")));
            }
        }
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        let best: Vec<usize> = (0..means.len()).filter(|&i| means[i] == min).collect();
        if best.len() != 1 {
            return Err(Error::Spec(format!("best arm is not unique: arms {best:?} share mean {min}")));
        }
        Ok(Self { means, family, best_arm: best[0] })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn best_arm(&self) -> usize {
        self.best_arm
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.means
            .iter()
            .map(|&mu| match self.family {
                Family::Bernoulli => {
                    if rng.gen::<f64>() < mu {
                        1.0
                    } else {
                        0.0
                    }
                }
                Family::Uniform { width } => (mu + width * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionStrategy {
    None,
    /// Raise the best arm's loss to 1 and drop the runner-up's (lowest suboptimal
    /// mean) to 0, every round, until the budget runs out.
    FlipBest,
    /// Flip every loss (`l -> 1 - l`) on consecutive rounds from the start until
    /// the budget runs out; the corrupted content follows the random clean draws.
    RandomBurst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub budget: f64,
    pub strategy: CorruptionStrategy,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self { budget: 0.0, strategy: CorruptionStrategy::None }
    }
}

/// Oblivious, deterministic loss sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversarialSpec {
    /// Arms `arms.0` and `arms.1` take turns at loss `low` in blocks of `period`
    /// rounds (starting with `arms.0`); every other loss is `high`.
    Alternating { period: usize, arms: (usize, usize), low: f64, high: f64 },
    /// `l_{t,i} = 0.5 + amplitude sin(2 pi t / period + 2 pi i / N)`, clipped to `[0, 1]`.
    Sinusoidal { period: f64, amplitude: f64 },
    /// Row `t - 1` is the loss vector of round `t`.
    Fixed { losses: Vec<Vec<f64>> },
}

impl AdversarialSpec {
    fn validate(&self, num_arms: usize, horizon: usize) -> Result<()> {
        match self {
            AdversarialSpec::Alternating { period, arms, low, high } => {
                if *period == 0 {
                    return Err(Error::Spec("alternating period must be positive".into()));
                }
                if arms.0 >= num_arms || arms.1 >= num_arms || arms.0 == arms.1 {
                    return Err(Error::Spec(format!("alternating arms {arms:?} invalid for {num_arms} arms")));
                }
                for v in [low, high] {
                    if !(0.0..=1.0).contains(v) {
                        return Err(Error::Spec(format!("loss level {v} outside [0, 1]")));
                    }
                }
            }
            AdversarialSpec::Sinusoidal { period, amplitude } => {
                if !(*period > 0.0) || !(0.0..=0.5).contains(amplitude) {
                    return Err(Error::Spec("sinusoidal needs period > 0 and amplitude in [0, 0.5]".into()));
                }
            }
            AdversarialSpec::Fixed { losses } => {
                if losses.len() < horizon {
                    return Err(Error::Spec(format!("fixed sequence has {} rounds, horizon is {horizon}", losses.len())));
                }
                for (t, row) in losses.iter().enumerate() {
                    if row.len() != num_arms {
                        return Err(Error::Spec(format!("row {} has {} losses, expected {num_arms}", t + 1, row.len())));
                    }
                    if let Some(l) = row.iter().find(|l| !(0.0..=1.0).contains(*l)) {
                        return Err(Error::Spec(format!("loss {l} in row {} outside [0, 1]", t + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    fn losses(&self, num_arms: usize, t: usize) -> Vec<f64> {
        match self {
            AdversarialSpec::Alternating { period, arms, low, high } => {
                let leader = if ((t - 1) / period).is_multiple_of(2) { arms.0 } else { arms.1 };
                (0..num_arms).map(|i| if i == leader { *low } else { *high }).collect()
            }
            AdversarialSpec::Sinusoidal { period, amplitude } => (0..num_arms)
                .map(|i| {
                    let phase = 2.0 * PI * (t as f64 / period + i as f64 / num_arms as f64);
                    (0.5 + amplitude * phase.sin()).clamp(0.0, 1.0)
                })
                .collect(),
            AdversarialSpec::Fixed { losses } => losses[t - 1].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    /// Stochastic losses, optionally corrupted (`CorruptionSpec::none()` for the pure case).
    Stochastic { spec: StochasticSpec, corruption: CorruptionSpec },
    Adversarial(AdversarialSpec),
}

/// One round of losses.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLosses {
    /// `l~_t`.
    pub clean: Vec<f64>,
    /// `l_t`, what the learner observes.
    pub realized: Vec<f64>,
    /// `||l_t - l~_t||_inf`.
    pub consumed: f64,
}

#[derive(Debug, Clone)]
pub struct Environment {
    num_arms: usize,
    horizon: usize,
    regime: Regime,
    consumed_total: f64,
    runner_up: Option<usize>,
}

impl Environment {
    pub fn new(num_arms: usize, horizon: usize, regime: Regime) -> Result<Self> {
        let mut runner_up = None;
        match &regime {
            Regime::Stochastic { spec, corruption } => {
                if spec.num_arms() != num_arms {
                    return Err(Error::Dimension { expected: num_arms, got: spec.num_arms() });
                }
                if !(corruption.budget.is_finite() && corruption.budget >= 0.0) {
                    return Err(Error::Spec(format!("corruption budget {} must be nonnegative", corruption.budget)));
                }
                let best = spec.best_arm();
                runner_up = (0..num_arms)
                    .filter(|&i| i != best)
                    .min_by(|&a, &b| spec.means()[a].total_cmp(&spec.means()[b]));
                if corruption.strategy == CorruptionStrategy::FlipBest && runner_up.is_none() {
                    return Err(Error::Spec("flip_best needs at least two arms".into()));
                }
            }
            Regime::Adversarial(spec) => spec.validate(num_arms, horizon)?,
        }
        Ok(Self { num_arms, horizon, regime, consumed_total: 0.0, runner_up })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    /// Total corruption consumed so far.
    pub fn consumed_total(&self) -> f64 {
        self.consumed_total
    }

    /// Losses of round `t` (1-based). Draws come from `rng`, which should be a
    /// stream reserved for the environment.
    pub fn gen_round<R: Rng + ?Sized>(&mut self, t: usize, rng: &mut R) -> Result<RoundLosses> {
        if t == 0 || t > self.horizon {
            return Err(Error::Domain(format!("round {t} outside 1..={}", self.horizon)));
        }
        match &self.regime {
            Regime::Adversarial(spec) => {
                let losses = spec.losses(self.num_arms, t);
                Ok(RoundLosses { clean: losses.clone(), realized: losses, consumed: 0.0 })
            }
            Regime::Stochastic { spec, corruption } => {
                let clean = spec.draw(rng);
                let remaining = (corruption.budget - self.consumed_total).max(0.0);
                let target = match corruption.strategy {
                    CorruptionStrategy::None => None,
                    _ if remaining <= 0.0 => None,
                    CorruptionStrategy::FlipBest => {
                        let mut target = clean.clone();
                        target[spec.best_arm()] = 1.0;
                        target[self.runner_up.expect("checked at construction")] = 0.0;
                        Some(target)
                    }
                    CorruptionStrategy::RandomBurst => Some(clean.iter().map(|l| 1.0 - l).collect()),
                };
                let Some(target) = target else {
                    return Ok(RoundLosses { realized: clean.clone(), clean, consumed: 0.0 });
                };
                // Move toward the target by at most the remaining budget per coordinate.
                let realized: Vec<f64> = clean
                    .iter()
                    .zip(&target)
                    .map(|(c, g)| c + (g - c).clamp(-remaining, remaining))
                    .collect();
                let consumed = realized.iter().zip(&clean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                self.consumed_total += consumed;
                Ok(RoundLosses { clean, realized, consumed })
            }
        }
    }
}

/// Suboptimality gaps relative to the best arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaps {
    /// `Delta_i = mu_i - mu_{i*}`.
    pub per_arm: Vec<f64>,
    /// `Delta_k`: smallest gap of a suboptimal arm in `V_k`; 0 when `V_k = {i*}`.
    pub per_clique: Vec<f64>,
    /// `Z = sum_{k : Delta_k > 0} 1 / Delta_k`.
    pub z: f64,
    pub best_arm: usize,
    pub best_clique: usize,
}

pub fn gaps(spec: &StochasticSpec, cover: &CliqueCover) -> Result<Gaps> {
    if spec.num_arms() != cover.num_arms() {
        return Err(Error::Dimension { expected: cover.num_arms(), got: spec.num_arms() });
    }
    let best_arm = spec.best_arm();
    let mu_star = spec.means()[best_arm];
    let per_arm: Vec<f64> = spec.means().iter().map(|m| m - mu_star).collect();
    let per_clique: Vec<f64> = cover
        .cliques()
        .iter()
        .map(|c| {
            c.iter()
                .filter(|&&i| i != best_arm)
                .map(|&i| per_arm[i])
                .fold(f64::INFINITY, f64::min)
        })
        .map(|d| if d.is_finite() { d } else { 0.0 })
        .collect();
    let z = per_clique.iter().filter(|d| **d > 0.0).map(|d| 1.0 / d).sum();
    Ok(Gaps { per_arm, per_clique, z, best_arm, best_clique: cover.clique_of(best_arm)? })
}

/// Reads a loss sequence with header `t,loss_0,...,loss_{N-1}`; rows must be in round order.
pub fn parse_loss_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty loss file".into() })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let n = columns.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string()).chain((0..n).map(|i| format!("loss_{i}"))).collect();
    if n == 0 || columns != expected {
        return Err(Error::Parse { line: 1, message: format!("expected header `t,loss_0,...`, found `{header}`") });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let parse_err = |message: String| Error::Parse { line: idx + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(parse_err(format!("expected {} fields, found {}", n + 1, fields.len())));
        }
        let t: usize = fields[0].parse().map_err(|_| parse_err(format!("bad round `{}`", fields[0])))?;
        if t != rows.len() + 1 {
            return Err(parse_err(format!("expected round {}, found {t}", rows.len() + 1)));
        }
        let row = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("bad loss `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_loss_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_loss_csv(&std::fs::read_to_string(path)?)
}
