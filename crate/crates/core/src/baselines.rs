//! Graph-oblivious baseline: FTRL with the 1/2-Tsallis entropy over the full simplex.
//!
//! `p_t = argmin_p eta_t L_hat . p - sum_i sqrt(p_i)` has the closed form
//! `p_i = 1 / (4 eta_t^2 (L_hat_i - nu)^2)` for the unique `nu < min_i L_hat_i`
//! that normalizes the distribution; `nu` is found by Newton's method.

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

const NORMALIZATION_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone)]
pub struct MabState {
    cum_est_loss: Vec<f64>,
    round: usize,
}

impl MabState {
    pub fn new(num_arms: usize) -> Self {
        Self { cum_est_loss: vec![0.0; num_arms], round: 1 }
    }

    pub fn cum_est_loss(&self) -> &[f64] {
        &self.cum_est_loss
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn next_distribution(&self) -> Result<SimplexPoint> {
        mab_next_distribution(&self.cum_est_loss, self.round)
    }

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
}

/// Tsallis-INF distribution for cumulative estimates `cum_loss` at round `t` (`eta_t = 1/sqrt(t)`).
pub fn mab_next_distribution(cum_loss: &[f64], t: usize) -> Result<SimplexPoint> {
    let n = cum_loss.len();
    if n == 0 || t == 0 {
        return Err(Error::Domain("need at least one arm and t >= 1".into()));
    }
    let eta = 1.0 / (t as f64).sqrt();
    let min = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
    // Work with x_i = L_i - min >= 0 and mu = min - nu > 0:
    // p_i = 1 / (4 eta^2 (x_i + mu)^2), sum p_i is decreasing and convex in mu.
    let x: Vec<f64> = cum_loss.iter().map(|l| l - min).collect();
    let c = 1.0 / (4.0 * eta * eta);
    let sum = |mu: f64| x.iter().map(|xi| c / ((xi + mu) * (xi + mu))).sum::<f64>();
    let sum_derivative = |mu: f64| x.iter().map(|xi| -2.0 * c / (xi + mu).powi(3)).sum::<f64>();

    // At mu0 the best arm's term alone is 1, so sum(mu0) >= 1; Newton on a
    // decreasing convex function started left of the root increases monotonically.
    let mut mu = c.sqrt();
    let mut residual = sum(mu) - 1.0;
    let mut iterations = 0;
    while residual.abs() > NORMALIZATION_TOL {
        if iterations == MAX_NEWTON {
            return Err(Error::NonConvergence { iterations, residual: residual.abs() });
        }
        mu -= residual / sum_derivative(mu);
        residual = sum(mu) - 1.0;
        iterations += 1;
    }
    let mut probs: Vec<f64> = x.iter().map(|xi| c / ((xi + mu) * (xi + mu))).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    SimplexPoint::new(probs)
}

/// Importance-weighted estimate `loss / p_chosen` on the chosen arm, zero elsewhere.
pub fn mab_estimate(chosen: usize, loss: f64, p: &SimplexPoint) -> Result<Vec<f64>> {
    if chosen >= p.len() {
        return Err(Error::Index { index: chosen, len: p.len() });
    }
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::Domain(format!("loss {loss} outside [0, 1]")));
    }
    let mut estimate = vec![0.0; p.len()];
    estimate[chosen] = loss / p.probs()[chosen];
    Ok(estimate)
}
