//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's derivative code: values are written term by term from the
//! definitions, and derivatives come from central finite differences.

#![allow(dead_code)]

use gbl::graph::CliqueCover;
use nalgebra::DMatrix;
use rand::Rng;

/// `Psi_alpha(p) = sum_k sqrt(m_k) sum_{i in V_k} psi_alpha(p_i / m_k)`, `psi_alpha(y) = y ln y - alpha y`.
pub fn psi_oracle(p: &[f64], cliques: &[Vec<usize>], alpha: f64) -> f64 {
    cliques
        .iter()
        .map(|c| {
            let m: f64 = c.iter().map(|&i| p[i]).sum();
            let inner: f64 = c
                .iter()
                .map(|&i| {
                    let y = p[i] / m;
                    y * y.ln() - alpha * y
                })
                .sum();
            m.sqrt() * inner
        })
        .sum()
}

/// `Phi(p) = -beta sum_k ln m_k`.
pub fn barrier_oracle(p: &[f64], cliques: &[Vec<usize>], beta: f64) -> f64 {
    -beta * cliques.iter().map(|c| c.iter().map(|&i| p[i]).sum::<f64>().ln()).sum::<f64>()
}

/// Central-difference Hessian of `f` with per-coordinate steps `rel_step * x_i`,
/// Richardson-extrapolated from steps `h` and `h / 2` (error `O(h^4)`).
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> DMatrix<f64> {
    let coarse = fd_hessian_plain(&f, x, rel_step);
    let fine = fd_hessian_plain(&f, x, rel_step / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

fn fd_hessian_plain(f: &impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * v.abs().max(1e-12)).collect();
    let eval = |di: (usize, f64), dj: (usize, f64)| {
        let mut y = x.to_vec();
        y[di.0] += di.1;
        y[dj.0] += dj.1;
        f(&y)
    };
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                let mut up = x.to_vec();
                let mut down = x.to_vec();
                up[i] += h[i];
                down[i] -= h[i];
                (f(&up) - 2.0 * f(x) + f(&down)) / (h[i] * h[i])
            } else {
                (eval((i, h[i]), (j, h[j])) - eval((i, h[i]), (j, -h[j])) - eval((i, -h[i]), (j, h[j]))
                    + eval((i, -h[i]), (j, -h[j])))
                    / (4.0 * h[i] * h[j])
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Central-difference gradient with per-coordinate steps `rel_step * x_i`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1e-12);
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Random partition of `0..n` into consecutive blocks.
pub fn random_cover<R: Rng>(n: usize, rng: &mut R) -> CliqueCover {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.gen_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    CliqueCover::blocks(&sizes).unwrap()
}

/// Random point on the simplex whose clique marginals are at least `marginal_floor`
/// (before normalization) and whose conditionals within each clique are at least
/// `conditional_floor`. With probability 1/2 per clique, one arm sits exactly at the
/// conditional floor.
pub fn random_point<R: Rng>(cover: &CliqueCover, marginal_floor: f64, conditional_floor: f64, rng: &mut R) -> Vec<f64> {
    let weights: Vec<f64> = (0..cover.len()).map(|_| marginal_floor + rng.gen::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut p = vec![0.0; cover.num_arms()];
    for (clique, w) in cover.cliques().iter().zip(&weights) {
        let d = clique.len();
        let mut u: Vec<f64> = (0..d).map(|_| rng.gen::<f64>().powi(3)).collect();
        if d > 1 && rng.gen_bool(0.5) {
            u[rng.gen_range(0..d)] = 0.0;
        }
        let su: f64 = u.iter().sum::<f64>();
        let free = 1.0 - conditional_floor * d as f64;
        for (a, &i) in clique.iter().enumerate() {
            let share = if su > 0.0 { u[a] / su } else { 1.0 / d as f64 };
            p[i] = w / total * (conditional_floor + free * share);
        }
    }
    p
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
