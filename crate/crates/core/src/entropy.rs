//! The Tsallis-Shannon entropy, the clique log-barrier, and their derivatives.
//!
//! For a cover `V_1..V_K` and `p` in the positive orthant,
//!
//! ```text
//! Psi_alpha(p) = sum_k sqrt(p(V_k)) * sum_{i in V_k} psi_alpha(p_i / p(V_k)),
//! psi_alpha(y) = y ln y - alpha y,
//! ```
//!
//! which expands to `-alpha sum_k sqrt(p(V_k)) + sum_k p(V_k)^{-1/2} sum_{i in V_k} p_i ln(p_i / p(V_k))`.
//! Across cliques it acts like the 1/2-Tsallis entropy on the marginals; inside a
//! clique it is a shifted Shannon entropy of the conditionals. Each clique term is
//! the *Tsallis-perspective* `H(x) = sqrt(|x|_1) sum_i h(x_i / |x|_1)` of `h = psi_alpha`,
//! so the Hessian is block diagonal with one block per clique.
//!
//! The barrier is `Phi(p) = -beta sum_k ln p(V_k)`, and the round-`t` regularizer is
//! `R_t = Psi_alpha / eta_t + Phi`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CliqueCover;
use crate::simplex::marginals_unchecked;

/// Step-size schedule `t -> eta_t`, nonincreasing by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    /// `eta_t = 1 / sqrt(t)`.
    InverseSqrt,
    /// `eta_t = c` for all rounds.
    Constant(f64),
}

impl EtaSchedule {
    pub fn eta(&self, t: usize) -> f64 {
        1.0 / self.inv_eta(t)
    }

    /// `1 / eta_t`, with the convention `1 / eta_0 = 0`.
    pub fn inv_eta(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        match *self {
            EtaSchedule::InverseSqrt => (t as f64).sqrt(),
            EtaSchedule::Constant(c) => 1.0 / c,
        }
    }
}

/// Parameters of the regularizer `R_t` and the truncated simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerParams {
    /// Shannon shift `alpha >= 0`.
    pub alpha: f64,
    /// Barrier weight `beta >= 0`.
    pub beta: f64,
    /// Truncation floor, `0 < gamma <= 1/N`.
    pub gamma: f64,
    pub eta: EtaSchedule,
}

impl RegularizerParams {
    /// Checks the parameter ranges for `num_arms` arms.
    pub fn validate(&self, num_arms: usize) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha must be finite and nonnegative, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Domain(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        let bound = 1.0 / num_arms as f64;
        if !(self.gamma > 0.0) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.gamma > bound * (1.0 + 1e-12) {
            return Err(Error::Infeasible { gamma: self.gamma, bound });
        }
        if let EtaSchedule::Constant(c) = self.eta {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Domain(format!("constant step size must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// The smallest shift for which the Hessian lower bound holds when every
/// conditional `p_i / p(V(i))` is at least `conditional_floor`: `2 (1 + ln^2(1/floor))`.
pub fn alpha_for_conditional_floor(conditional_floor: f64) -> f64 {
    let l = (1.0 / conditional_floor).ln();
    2.0 * (1.0 + l * l)
}

fn check_positive(p: &[f64], cover: &CliqueCover) -> Result<()> {
    if p.len() != cover.num_arms() {
        return Err(Error::Dimension { expected: cover.num_arms(), got: p.len() });
    }
    match p.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(i) => Err(Error::Domain(format!("entry {i} is {}, must be strictly positive", p[i]))),
        None => Ok(()),
    }
}

/// A scalar function `h` with first and second derivatives, used by the
/// generic Tsallis-perspective routines.
pub trait ScalarFn {
    fn value(&self, y: f64) -> f64;
    fn d1(&self, y: f64) -> f64;
    fn d2(&self, y: f64) -> f64;
}

/// `psi_alpha(y) = y ln y - alpha y`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedShannon {
    pub alpha: f64,
}

impl ScalarFn for ShiftedShannon {
    fn value(&self, y: f64) -> f64 {
        y * y.ln() - self.alpha * y
    }
    fn d1(&self, y: f64) -> f64 {
        y.ln() + 1.0 - self.alpha
    }
    fn d2(&self, y: f64) -> f64 {
        1.0 / y
    }
}

/// Tsallis-perspective `H(x) = sqrt(|x|_1) sum_i h(x_i / |x|_1)`.
pub fn perspective_value<H: ScalarFn>(x: &[f64], h: &H) -> f64 {
    let s: f64 = x.iter().sum();
    s.sqrt() * x.iter().map(|&xi| h.value(xi / s)).sum::<f64>()
}

/// Hessian of the Tsallis-perspective, assembled term by term:
///
/// ```text
/// -1/4 s^{-3/2} sum_i h(y_i) z z^T
///   + s^{-7/2} sum_i x_i^2 h''(y_i) z_i z_i^T
///   + 1/2 s^{-5/2} sum_i x_i h'(y_i) (z z_i^T + z_i z^T)
/// ```
///
/// with `s = |x|_1`, `y = x / s`, `z = 1` and `z_i = 1 - (s / x_i) e_i`.
pub fn perspective_hessian<H: ScalarFn>(x: &[f64], h: &H) -> DMatrix<f64> {
    let d = x.len();
    let s: f64 = x.iter().sum();
    let z = DMatrix::from_element(d, 1, 1.0);
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let y = x[i] / s;
        let mut zi = z.clone();
        zi[(i, 0)] -= s / x[i];
        let zzt = &z * z.transpose();
        let zizit = &zi * zi.transpose();
        let cross = &z * zi.transpose() + &zi * z.transpose();
        out += zzt * (-0.25 * s.powf(-1.5) * h.value(y))
            + zizit * (s.powf(-3.5) * x[i] * x[i] * h.d2(y))
            + cross * (0.5 * s.powf(-2.5) * x[i] * h.d1(y));
    }
    out
}

/// Minimum Hessian eigenvalue of the Tsallis-perspective of `psi_alpha` at `x`.
pub fn tsallis_perspective_min_eig(x: &[f64], alpha: f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Domain("perspective needs at least two coordinates".into()));
    }
    if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("coordinate {v} must be strictly positive")));
    }
    let h = perspective_hessian(x, &ShiftedShannon { alpha });
    Ok(SymmetricEigen::new(h).eigenvalues.min())
}

/// `Psi_alpha(p)`. Natural logarithm throughout.
pub fn tsallis_shannon_value(p: &[f64], cover: &CliqueCover, alpha: f64) -> Result<f64> {
    check_positive(p, cover)?;
    Ok(value_unchecked(p, cover, alpha))
}

fn value_unchecked(p: &[f64], cover: &CliqueCover, alpha: f64) -> f64 {
    let mut total = 0.0;
    for clique in cover.cliques() {
        let m: f64 = clique.iter().map(|&i| p[i]).sum();
        let shannon: f64 = clique.iter().map(|&i| p[i] * (p[i] / m).ln()).sum();
        total += -alpha * m.sqrt() + shannon / m.sqrt();
    }
    total
}

/// Gradient of `Psi_alpha`: for `j` in `V_k` with marginal `m` and
/// `S = sum_{i in V_k} p_i ln(p_i / m)`,
/// `-alpha / (2 sqrt m) - S / (2 m^{3/2}) + ln(p_j / m) / sqrt m`.
pub fn tsallis_shannon_grad(p: &[f64], cover: &CliqueCover, alpha: f64) -> Result<Vec<f64>> {
    check_positive(p, cover)?;
    let mut grad = vec![0.0; p.len()];
    grad_into(p, cover, alpha, &mut grad);
    Ok(grad)
}

fn grad_into(p: &[f64], cover: &CliqueCover, alpha: f64, grad: &mut [f64]) {
    for clique in cover.cliques() {
        let m: f64 = clique.iter().map(|&i| p[i]).sum();
        let sq = m.sqrt();
        let shannon: f64 = clique.iter().map(|&i| p[i] * (p[i] / m).ln()).sum();
        let common = -alpha / (2.0 * sq) - shannon / (2.0 * m * sq);
        for &j in clique {
            grad[j] = common + (p[j] / m).ln() / sq;
        }
    }
}

/// Hessian block of one clique term at `x = p_{V_k}`.
///
/// Closed form of [`perspective_hessian`] for `h = psi_alpha`:
/// `c J - 1/2 s^{-3/2} (1 h'^T + h' 1^T) + s^{-1/2} diag(1/x)` with
/// `c = -1/4 s^{-3/2} sum h(y_i) - s^{-3/2} + s^{-5/2} sum x_i h'(y_i)`.
fn psi_block_hessian(x: &[f64], alpha: f64) -> DMatrix<f64> {
    let d = x.len();
    let s: f64 = x.iter().sum();
    let h = ShiftedShannon { alpha };
    let s_m32 = s.powf(-1.5);
    let sum_h: f64 = x.iter().map(|&xi| h.value(xi / s)).sum();
    let hp: Vec<f64> = x.iter().map(|&xi| h.d1(xi / s)).collect();
    let w: f64 = x.iter().zip(&hp).map(|(xi, hi)| xi * hi).sum();
    let c = -0.25 * s_m32 * sum_h - s_m32 + w * s_m32 / s;
    let inv_sqrt_s = 1.0 / s.sqrt();
    DMatrix::from_fn(d, d, |a, b| {
        let mut v = c - 0.5 * s_m32 * (hp[a] + hp[b]);
        if a == b {
            v += inv_sqrt_s / x[a];
        }
        v
    })
}

/// Per-clique Hessian blocks of `Psi_alpha`, in cover order; block `k` is indexed
/// by the (sorted) members of `V_k`.
pub fn tsallis_shannon_hessian_blocks(p: &[f64], cover: &CliqueCover, alpha: f64) -> Result<Vec<DMatrix<f64>>> {
    check_positive(p, cover)?;
    Ok(cover
        .cliques()
        .iter()
        .map(|c| psi_block_hessian(&c.iter().map(|&i| p[i]).collect::<Vec<_>>(), alpha))
        .collect())
}

/// Dense `N x N` Hessian of `Psi_alpha`; entries across distinct cliques are exactly zero.
pub fn tsallis_shannon_hessian(p: &[f64], cover: &CliqueCover, alpha: f64) -> Result<DMatrix<f64>> {
    let blocks = tsallis_shannon_hessian_blocks(p, cover, alpha)?;
    Ok(assemble_blocks(p.len(), cover, &blocks))
}

pub(crate) fn assemble_blocks(n: usize, cover: &CliqueCover, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (clique, block) in cover.cliques().iter().zip(blocks) {
        for (a, &i) in clique.iter().enumerate() {
            for (b, &j) in clique.iter().enumerate() {
                out[(i, j)] = block[(a, b)];
            }
        }
    }
    out
}

/// Diagonal of the Hessian lower bound: entry `i` is `1 / (2 p_i sqrt(p(V(i))))`.
pub fn hessian_diag_lower_bound(p: &[f64], cover: &CliqueCover) -> Result<Vec<f64>> {
    check_positive(p, cover)?;
    let marg = marginals_unchecked(p, cover);
    Ok((0..p.len())
        .map(|i| 1.0 / (2.0 * p[i] * marg[cover.clique_of_unchecked(i)].sqrt()))
        .collect())
}

fn barrier_marginals(p: &[f64], cover: &CliqueCover) -> Result<Vec<f64>> {
    if p.len() != cover.num_arms() {
        return Err(Error::Dimension { expected: cover.num_arms(), got: p.len() });
    }
    let marg = marginals_unchecked(p, cover);
    match marg.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
        Some(k) => Err(Error::Domain(format!("clique {k} has marginal {}, must be positive", marg[k]))),
        None => Ok(marg),
    }
}

/// `Phi(p) = -beta sum_k ln p(V_k)`.
pub fn log_barrier_value(p: &[f64], cover: &CliqueCover, beta: f64) -> Result<f64> {
    Ok(-beta * barrier_marginals(p, cover)?.iter().map(|m| m.ln()).sum::<f64>())
}

/// Entry `i` is `-beta / p(V(i))`.
pub fn log_barrier_grad(p: &[f64], cover: &CliqueCover, beta: f64) -> Result<Vec<f64>> {
    let marg = barrier_marginals(p, cover)?;
    Ok((0..p.len()).map(|i| -beta / marg[cover.clique_of_unchecked(i)]).collect())
}

/// Block diagonal; block `k` is `beta / p(V_k)^2` times the all-ones matrix.
pub fn log_barrier_hessian(p: &[f64], cover: &CliqueCover, beta: f64) -> Result<DMatrix<f64>> {
    let marg = barrier_marginals(p, cover)?;
    let n = p.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let k = cover.clique_of_unchecked(i);
        if k == cover.clique_of_unchecked(j) {
            beta / (marg[k] * marg[k])
        } else {
            0.0
        }
    }))
}

/// Value and derivatives of `R_t = Psi_alpha / eta_t + Phi`.
#[derive(Debug, Clone)]
pub struct RegularizerEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

pub fn regularizer_eval(p: &[f64], cover: &CliqueCover, params: &RegularizerParams, t: usize) -> Result<RegularizerEval> {
    if t == 0 {
        return Err(Error::Domain("rounds start at t = 1".into()));
    }
    let blocks = regularizer_blocks(p, cover, params, t)?;
    Ok(RegularizerEval {
        value: blocks.value,
        gradient: blocks.gradient,
        hessian: assemble_blocks(p.len(), cover, &blocks.hessian_blocks),
    })
}

/// Block form of [`RegularizerEval`], used by the solver.
#[derive(Debug, Clone)]
pub(crate) struct RegularizerBlocks {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian_blocks: Vec<DMatrix<f64>>,
}

pub(crate) fn regularizer_value(p: &[f64], cover: &CliqueCover, params: &RegularizerParams, t: usize) -> f64 {
    let marg = marginals_unchecked(p, cover);
    value_unchecked(p, cover, params.alpha) * params.eta.inv_eta(t)
        - params.beta * marg.iter().map(|m| m.ln()).sum::<f64>()
}

pub(crate) fn regularizer_blocks(
    p: &[f64],
    cover: &CliqueCover,
    params: &RegularizerParams,
    t: usize,
) -> Result<RegularizerBlocks> {
    check_positive(p, cover)?;
    let inv_eta = params.eta.inv_eta(t);
    let beta = params.beta;
    let marg = marginals_unchecked(p, cover);
    let value = regularizer_value(p, cover, params, t);
    let mut gradient = vec![0.0; p.len()];
    grad_into(p, cover, params.alpha, &mut gradient);
    for (i, g) in gradient.iter_mut().enumerate() {
        *g = *g * inv_eta - beta / marg[cover.clique_of_unchecked(i)];
    }
    let hessian_blocks = cover
        .cliques()
        .iter()
        .zip(&marg)
        .map(|(c, m)| {
            let x: Vec<f64> = c.iter().map(|&i| p[i]).collect();
            psi_block_hessian(&x, params.alpha) * inv_eta + DMatrix::from_element(c.len(), c.len(), beta / (m * m))
        })
        .collect();
    Ok(RegularizerBlocks { value, gradient, hessian_blocks })
}
