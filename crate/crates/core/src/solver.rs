//! Per-round FTRL problem: minimize `L . p + R_t(p)` over the truncated simplex
//! `{p : sum p = 1, p_i >= gamma}`.
//!
//! [`ftrl_solve`] runs a damped Newton method on the equality-constrained
//! problem with an active set for the floor constraints. The regularizer Hessian
//! is block diagonal over cliques, so each Newton system splits into one small
//! dense solve per clique. [`brute_force_solve`] is a slow grid-plus-coordinate-descent
//! reference for tiny instances.

use nalgebra::DMatrix;

use crate::entropy::{regularizer_blocks, regularizer_value, RegularizerParams};
use crate::error::{Error, Result};
use crate::graph::CliqueCover;
use crate::simplex::SimplexPoint;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the scaled KKT residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: SimplexPoint,
    /// Max-norm KKT residual divided by `1 + |lambda|`, where `lambda` is the
    /// multiplier of the equality constraint.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `argmin_{p in S^gamma_N} cum_loss . p + R_t(p)` with default options.
pub fn ftrl_solve(
    cum_loss: &[f64],
    cover: &CliqueCover,
    params: &RegularizerParams,
    t: usize,
    warm_start: Option<&SimplexPoint>,
) -> Result<SolveReport> {
    ftrl_solve_with(cum_loss, cover, params, t, warm_start, &SolverOptions::default())
}

pub fn ftrl_solve_with(
    cum_loss: &[f64],
    cover: &CliqueCover,
    params: &RegularizerParams,
    t: usize,
    warm_start: Option<&SimplexPoint>,
    options: &SolverOptions,
) -> Result<SolveReport> {
    let n = cover.num_arms();
    if cum_loss.len() != n {
        return Err(Error::Dimension { expected: n, got: cum_loss.len() });
    }
    params.validate(n)?;
    if t == 0 {
        return Err(Error::Domain("rounds start at t = 1".into()));
    }
    if let Some(x) = cum_loss.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("cumulative loss {x} is not finite")));
    }
    let gamma = params.gamma;
    if gamma * n as f64 >= 1.0 - 1e-12 {
        // The truncated simplex is the single point 1/N.
        return Ok(SolveReport {
            solution: SimplexPoint::uniform(n),
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    // The argmin is invariant to constant shifts of the linear term.
    let shift = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let lin: Vec<f64> = cum_loss.iter().map(|x| x - shift).collect();

    let mut p = initial_point(n, gamma, warm_start)?;
    let mut active: Vec<bool> = p.iter().map(|&x| x <= gamma).collect();
    for (x, a) in p.iter_mut().zip(&active) {
        if *a {
            *x = gamma;
        }
    }
    fix_sum(&mut p, &active);

    let objective = |q: &[f64]| -> f64 {
        lin.iter().zip(q).map(|(l, x)| l * x).sum::<f64>() + regularizer_value(q, cover, params, t)
    };

    let mut residual = f64::INFINITY;
    for iteration in 0..options.max_iterations {
        let blocks = regularizer_blocks(&p, cover, params, t)?;
        let grad: Vec<f64> = lin.iter().zip(&blocks.gradient).map(|(l, g)| l + g).collect();
        let f = lin.iter().zip(&p).map(|(l, x)| l * x).sum::<f64>() + blocks.value;

        let kkt = kkt_state(&grad, &active);
        residual = kkt.residual();
        if residual <= options.tolerance {
            return Ok(SolveReport {
                solution: SimplexPoint::from_vec_unchecked(p),
                kkt_residual: residual,
                iterations: iteration,
                converged: true,
            });
        }
        if let Some(release) = kkt.most_negative_multiplier {
            if kkt.stationarity <= options.tolerance * kkt.scale || kkt.stationarity <= 1e-3 * kkt.dual {
                active[release] = false;
                continue;
            }
        }

        let mut dir = newton_direction(&grad, &blocks.hessian_blocks, cover, &active);
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            dir = projected_gradient(&grad, &active);
            slope = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        }
        if slope == 0.0 {
            break;
        }

        // Longest step keeping every free coordinate above the floor.
        let mut max_step = 1.0;
        let mut blocking = None;
        for i in 0..n {
            if !active[i] && dir[i] < 0.0 {
                let s = (p[i] - gamma) / -dir[i];
                if s < max_step {
                    max_step = s;
                    blocking = Some(i);
                }
            }
        }

        let roundoff = 1e-14 * (f.abs() + 1.0);
        let mut step = max_step;
        let mut accepted = None;
        for backtrack in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = p.iter().zip(&dir).map(|(x, d)| (x + step * d).max(gamma)).collect();
            if -slope * step <= roundoff || objective(&trial) <= f + ARMIJO * step * slope {
                accepted = Some((trial, backtrack == 0));
                break;
            }
            step *= 0.5;
        }
        let Some((mut next, full)) = accepted else {
            break;
        };
        if full {
            if let Some(b) = blocking {
                next[b] = gamma;
                active[b] = true;
            }
        }
        fix_sum(&mut next, &active);
        p = next;
    }
    Err(Error::NonConvergence { iterations: options.max_iterations, residual })
}

fn initial_point(n: usize, gamma: f64, warm_start: Option<&SimplexPoint>) -> Result<Vec<f64>> {
    match warm_start {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Dimension { expected: n, got: w.len() });
            }
            let mut p: Vec<f64> = w.probs().iter().map(|&x| x.max(gamma)).collect();
            let excess: f64 = p.iter().sum::<f64>() - 1.0;
            if excess > 0.0 {
                // Pull the excess out of the slack above the floor, proportionally.
                let slack: f64 = p.iter().map(|x| x - gamma).sum();
                p.iter_mut().for_each(|x| *x -= (*x - gamma) * excess / slack);
            }
            Ok(p)
        }
    }
}

/// Puts the rounding error of `sum p - 1` on the largest free coordinate.
fn fix_sum(p: &mut [f64], active: &[bool]) {
    let err: f64 = p.iter().sum::<f64>() - 1.0;
    if let Some(i) = (0..p.len()).filter(|&i| !active[i]).max_by(|&a, &b| p[a].total_cmp(&p[b])) {
        p[i] -= err;
    }
}

struct KktState {
    stationarity: f64,
    dual: f64,
    scale: f64,
    most_negative_multiplier: Option<usize>,
}

impl KktState {
    fn residual(&self) -> f64 {
        self.stationarity.max(self.dual) / self.scale
    }
}

/// With `lambda` the midpoint of the free gradients, stationarity is the max
/// deviation of free gradients from `lambda`, and dual infeasibility is the
/// largest negative multiplier `g_i - lambda` over pinned arms.
fn kkt_state(grad: &[f64], active: &[bool]) -> KktState {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (g, a) in grad.iter().zip(active) {
        if !a {
            lo = lo.min(*g);
            hi = hi.max(*g);
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut dual = 0.0;
    let mut most_negative_multiplier = None;
    for (i, (g, a)) in grad.iter().zip(active).enumerate() {
        if *a && lambda - g > dual {
            dual = lambda - g;
            most_negative_multiplier = Some(i);
        }
    }
    KktState { stationarity: 0.5 * (hi - lo), dual, scale: 1.0 + lambda.abs(), most_negative_multiplier }
}

/// Newton step on the free coordinates with `sum d = 0`:
/// `d = lambda H^{-1} 1 - H^{-1} g`, `lambda = 1^T H^{-1} g / 1^T H^{-1} 1`.
fn newton_direction(grad: &[f64], blocks: &[DMatrix<f64>], cover: &CliqueCover, active: &[bool]) -> Vec<f64> {
    let n = grad.len();
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (clique, block) in cover.cliques().iter().zip(blocks) {
        let free: Vec<usize> = (0..clique.len()).filter(|&a| !active[clique[a]]).collect();
        if free.is_empty() {
            continue;
        }
        let d = free.len();
        let sub = DMatrix::from_fn(d, d, |a, b| block[(free[a], free[b])]);
        let rhs = DMatrix::from_fn(d, 2, |a, c| if c == 0 { grad[clique[free[a]]] } else { 1.0 });
        let sol = solve_spd(sub, rhs);
        for (a, &fa) in free.iter().enumerate() {
            u[clique[fa]] = sol[(a, 0)];
            w[clique[fa]] = sol[(a, 1)];
        }
    }
    let lambda = u.iter().sum::<f64>() / w.iter().sum::<f64>();
    (0..n).map(|i| if active[i] { 0.0 } else { lambda * w[i] - u[i] }).collect()
}

fn solve_spd(mut m: DMatrix<f64>, rhs: DMatrix<f64>) -> DMatrix<f64> {
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-13 * scale;
    loop {
        if let Some(chol) = m.clone().cholesky() {
            return chol.solve(&rhs);
        }
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        jitter *= 10.0;
    }
}

fn projected_gradient(grad: &[f64], active: &[bool]) -> Vec<f64> {
    let free: Vec<usize> = (0..grad.len()).filter(|&i| !active[i]).collect();
    let mean = free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64;
    (0..grad.len()).map(|i| if active[i] { 0.0 } else { mean - grad[i] }).collect()
}

/// Largest instance accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_LIMIT: usize = 4;
const GRID_RESOLUTION: usize = 1000;

/// Reference minimizer for tiny instances: exhaustive grid over the truncated
/// simplex at resolution 1e-3, then pairwise coordinate descent (mass moved
/// between two arms at a time) with each line minimization done by bisection
/// on a central-difference slope of the objective.
///
/// The objective here is evaluated term by term from the clique-perspective
/// form, independently of the regularizer code used by [`ftrl_solve`].
pub fn brute_force_solve(
    cum_loss: &[f64],
    cover: &CliqueCover,
    params: &RegularizerParams,
    t: usize,
) -> Result<SimplexPoint> {
    let n = cover.num_arms();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { what: "number of arms", got: n, limit: BRUTE_FORCE_LIMIT });
    }
    if cum_loss.len() != n {
        return Err(Error::Dimension { expected: n, got: cum_loss.len() });
    }
    params.validate(n)?;
    let gamma = params.gamma;
    let mass = 1.0 - n as f64 * gamma;
    if mass <= 1e-12 {
        return Ok(SimplexPoint::uniform(n));
    }
    let shift = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let lin: Vec<f64> = cum_loss.iter().map(|x| x - shift).collect();
    let inv_eta = params.eta.inv_eta(t);
    let objective = |q: &[f64]| reference_objective(q, &lin, cover, params.alpha, params.beta, inv_eta);

    // Grid stage.
    let mut counts = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut point = vec![0.0; n];
    grid_search(0, GRID_RESOLUTION, &mut counts, &mut |c| {
        for (x, &ci) in point.iter_mut().zip(c) {
            *x = gamma + mass * ci as f64 / GRID_RESOLUTION as f64;
        }
        let v = objective(&point);
        if v < best.0 {
            best = (v, point.clone());
        }
    });
    let mut p = best.1;

    // Pairwise coordinate descent.
    let h = (1e-5f64).min(0.5 * gamma);
    for _sweep in 0..20_000 {
        let mut largest_move: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let lo = gamma - p[i];
                let hi = p[j] - gamma;
                if hi - lo <= 0.0 {
                    continue;
                }
                let at = |s: f64| {
                    let mut q = p.clone();
                    q[i] += s;
                    q[j] -= s;
                    objective(&q)
                };
                let slope = |s: f64| (at(s + h) - at(s - h)) / (2.0 * h);
                let s = if slope(lo) >= 0.0 {
                    lo
                } else if slope(hi) <= 0.0 {
                    hi
                } else {
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        if slope(mid) > 0.0 {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    0.5 * (a + b)
                };
                p[i] += s;
                p[j] -= s;
                largest_move = largest_move.max(s.abs());
            }
        }
        if largest_move < 1e-12 {
            break;
        }
    }
    Ok(SimplexPoint::from_vec_unchecked(p))
}

/// `lin . p + (1/eta) sum_k sqrt(m_k) sum_{i in V_k} psi_alpha(p_i / m_k) - beta sum_k ln m_k`.
fn reference_objective(p: &[f64], lin: &[f64], cover: &CliqueCover, alpha: f64, beta: f64, inv_eta: f64) -> f64 {
    let mut linear = 0.0;
    for (l, x) in lin.iter().zip(p) {
        linear += l * x;
    }
    let mut perspective = 0.0;
    let mut barrier = 0.0;
    for clique in cover.cliques() {
        let mut m = 0.0;
        for &i in clique {
            m += p[i];
        }
        let mut inner = 0.0;
        for &i in clique {
            let y = p[i] / m;
            inner += y * y.ln() - alpha * y;
        }
        perspective += m.sqrt() * inner;
        barrier += m.ln();
    }
    linear + inv_eta * perspective - beta * barrier
}

fn grid_search(pos: usize, remaining: usize, counts: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        grid_search(pos + 1, remaining - c, counts, visit);
    }
}
