//! Independent oracles shared by the integration suites. These deliberately
//! avoid the library's solver paths: the flow oracle is a dense grid scan
//! plus bisection on the raw head balance, and the SVR oracle solves the
//! same dual by projected gradient descent.

#![allow(dead_code)]

use hydrotwin::hydronet::{network_head_loss, pump_head, ComponentVector, ControlVector, LoopConfig};

/// Brute-force operating point: scan the head residual on a 1e-4 m³/h grid
/// over [0, zero-head flow], locate the sign change, refine by bisection.
pub fn oracle_operating_point(u: &ControlVector, theta: &ComponentVector, cfg: &LoopConfig) -> f64 {
    if u.pump_speed <= 0.0 {
        return 0.0;
    }
    let s = u.pump_speed / 100.0;
    let residual =
        |q: f64| pump_head(q, s, theta, cfg) - network_head_loss(q, u.valve_opening, theta, cfg);
    let q_max = theta.rated_flow * s * (cfg.pump_c0 / cfg.pump_c2).sqrt();
    let step = 1e-4;
    let n = (q_max / step).ceil() as usize;
    let mut lo = 0.0;
    let mut hi = q_max;
    let mut found = false;
    let mut prev_q = 0.0;
    let mut prev_r = residual(0.0);
    for i in 1..=n {
        let q = (i as f64 * step).min(q_max);
        let r = residual(q);
        if prev_r > 0.0 && r <= 0.0 {
            lo = prev_q;
            hi = q;
            found = true;
            break;
        }
        prev_q = q;
        prev_r = r;
    }
    assert!(found, "oracle found no sign change in [0, {q_max}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Independent solution of the ε-SVR dual by projected gradient descent on
/// the 2n box variables (α, α*) with the single equality constraint
/// Σ(α−α*) = 0. Exact projection onto {box ∩ hyperplane} via bisection on
/// the constraint multiplier. Slow but globally convergent on a convex QP.
pub struct SvrDualOracle {
    pub beta: Vec<f64>,
    pub objective: f64,
}

/// Minimization objective used on both sides of the comparison:
/// f(β) = ½ βᵀKβ + ε‖β‖₁ − yᵀβ.
pub fn svr_dual_objective(kernel: &[Vec<f64>], targets: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = targets.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel[i][j];
        }
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lin: f64 = beta.iter().zip(targets).map(|(b, y)| b * y).sum();
    0.5 * quad + eps * l1 - lin
}

pub fn solve_svr_dual_oracle(
    kernel: &[Vec<f64>],
    targets: &[f64],
    c: f64,
    eps: f64,
    iterations: usize,
) -> SvrDualOracle {
    let n = targets.len();
    // a[0..n] = α (coefficient +1), a[n..2n] = α* (coefficient −1).
    let mut a = vec![0.0f64; 2 * n];
    // Step size 1/L with L an upper bound on the Hessian spectral norm
    // (row-sum bound on the 2n×2n quadratic form).
    let lmax: f64 = (0..n)
        .map(|i| (0..n).map(|j| kernel[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (2.0 * lmax.max(1e-12));

    for _ in 0..iterations {
        // Gradient of ½βᵀKβ + εΣa − yᵀβ in the 2n variables.
        let beta: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
        let kb: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| kernel[i][j] * beta[j]).sum::<f64>())
            .collect();
        let mut v = vec![0.0f64; 2 * n];
        for i in 0..n {
            v[i] = a[i] - step * (kb[i] + eps - targets[i]);
            v[n + i] = a[n + i] - step * (-kb[i] + eps + targets[i]);
        }
        project_box_hyperplane(&mut v, n, c);
        a = v;
    }
    let beta: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
    let objective = svr_dual_objective(kernel, targets, eps, &beta);
    SvrDualOracle { beta, objective }
}

/// Project v onto {0 ≤ v ≤ C, Σᵢ v[i] − Σᵢ v[n+i] = 0}. The constraint
/// residual as a function of the multiplier λ,
/// h(λ) = Σ clip(v[i]−λ) − Σ clip(v[n+i]+λ), is monotone non-increasing;
/// bisection finds h(λ)=0.
fn project_box_hyperplane(v: &mut [f64], n: usize, c: f64) {
    let clip = |x: f64| x.clamp(0.0, c);
    let h = |lambda: f64, v: &[f64]| -> f64 {
        let up: f64 = (0..n).map(|i| clip(v[i] - lambda)).sum();
        let down: f64 = (0..n).map(|i| clip(v[n + i] + lambda)).sum();
        up - down
    };
    let mut lo = -2.0 * c - v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut hi = -lo;
    debug_assert!(h(lo, v) >= 0.0 && h(hi, v) <= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid, v) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    for i in 0..n {
        v[i] = clip(v[i] - lambda);
        v[n + i] = clip(v[n + i] + lambda);
    }
}

pub fn rbf_kernel_matrix(rows: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k[i][j] = (-gamma * d2).exp();
        }
    }
    k
}
