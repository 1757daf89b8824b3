//! ε-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved by sequential minimal optimization over the 2n box
//! variables (α, α*) with the single equality constraint Σ(α−α*) = 0,
//! using second-order working-pair selection. Features and targets are
//! standardized inside the model so persisted models are self-contained.

use super::{FeatureVector, FitError, FEATURE_COUNT};

/// SVR hyperparameters. `epsilon` is the half-width of the insensitive tube
/// in standardized target units; `tol` bounds the maximal KKT violation at
/// convergence; one sweep is `n` pair updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvrParams {
    /// Tuned for the monitoring pipeline: the validation threshold demands
    /// estimates good to a few tenths of a percent, which needs a sharper
    /// kernel and a tighter tube than textbook defaults.
    fn default() -> Self {
        Self {
            c: 100.0,
            epsilon: 0.001,
            gamma: 2.0,
            tol: 1e-3,
            max_sweeps: 10_000,
        }
    }
}

/// Fitted ε-SVR model: kernel expansion over the support vectors in
/// standardized feature space, plus the standardization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub(crate) support_vectors: Vec<FeatureVector>,
    pub(crate) dual_coefficients: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) gamma: f64,
    pub(crate) c: f64,
    pub(crate) epsilon: f64,
    pub(crate) feature_mean: [f64; FEATURE_COUNT],
    pub(crate) feature_std: [f64; FEATURE_COUNT],
    pub(crate) target_mean: f64,
    pub(crate) target_std: f64,
    pub(crate) converged: bool,
    pub(crate) sweeps_used: usize,
    pub(crate) kkt_gap: f64,
    pub(crate) dual_objective: f64,
}

impl SvrModel {
    pub fn fit(rows: &[FeatureVector], targets: &[f64], params: &SvrParams) -> Result<Self, FitError> {
        if rows.is_empty() {
            return Err(FitError::Empty);
        }
        if rows.len() != targets.len() {
            return Err(FitError::LengthMismatch {
                rows: rows.len(),
                targets: targets.len(),
            });
        }
        if rows.len() < 2 {
            return Err(FitError::TooFewRows {
                needed: 2,
                got: rows.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite())
            || targets.iter().any(|v| !v.is_finite())
        {
            return Err(FitError::NonFinite);
        }

        let n = rows.len();
        let (feature_mean, feature_std) = standardize_features(rows);
        let (target_mean, target_std) = mean_std(targets);
        let x: Vec<FeatureVector> = rows
            .iter()
            .map(|r| apply_standardization(r, &feature_mean, &feature_std))
            .collect();
        let y: Vec<f64> = targets.iter().map(|t| (t - target_mean) / target_std).collect();

        let kernel = KernelMatrix::new(&x, params.gamma);
        let solution = solve_smo(&kernel, &y, params);

        let mut support_vectors = Vec::new();
        let mut dual_coefficients = Vec::new();
        for i in 0..n {
            if solution.beta[i] != 0.0 {
                support_vectors.push(x[i]);
                dual_coefficients.push(solution.beta[i]);
            }
        }

        Ok(Self {
            support_vectors,
            dual_coefficients,
            bias: solution.bias,
            gamma: params.gamma,
            c: params.c,
            epsilon: params.epsilon,
            feature_mean,
            feature_std,
            target_mean,
            target_std,
            converged: solution.converged,
            sweeps_used: solution.sweeps_used,
            kkt_gap: solution.kkt_gap,
            dual_objective: solution.objective,
        })
    }

    /// Kernel expansion plus bias in standardized space, then unstandardize.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let xs = apply_standardization(x, &self.feature_mean, &self.feature_std);
        let mut f = self.bias;
        for (sv, beta) in self.support_vectors.iter().zip(&self.dual_coefficients) {
            f += beta * rbf(&xs, sv, self.gamma);
        }
        f * self.target_std + self.target_mean
    }

    pub fn support_vector_count(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn sweeps_used(&self) -> usize {
        self.sweeps_used
    }

    /// Maximal KKT violation at termination (standardized units).
    pub fn kkt_gap(&self) -> f64 {
        self.kkt_gap
    }

    /// Final value of the minimization dual ½βᵀKβ + ε‖β‖₁ − yᵀβ in
    /// standardized units.
    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn params_c(&self) -> f64 {
        self.c
    }

    pub fn params_epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn feature_mean(&self) -> &[f64; FEATURE_COUNT] {
        &self.feature_mean
    }

    pub fn feature_std(&self) -> &[f64; FEATURE_COUNT] {
        &self.feature_std
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    pub fn dual_coefficients(&self) -> &[f64] {
        &self.dual_coefficients
    }

    pub fn standardized_support_vectors(&self) -> &[FeatureVector] {
        &self.support_vectors
    }

    /// Standardize a raw feature row with the model's parameters.
    pub fn standardize(&self, x: &FeatureVector) -> FeatureVector {
        apply_standardization(x, &self.feature_mean, &self.feature_std)
    }
}

pub(crate) fn rbf(a: &FeatureVector, b: &FeatureVector, gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for k in 0..FEATURE_COUNT {
        let d = a[k] - b[k];
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Population mean and standard deviation; a constant series gets std 1 so
/// standardization stays a bijection.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

fn standardize_features(rows: &[FeatureVector]) -> ([f64; FEATURE_COUNT], [f64; FEATURE_COUNT]) {
    let mut mean = [0.0; FEATURE_COUNT];
    let mut std = [1.0; FEATURE_COUNT];
    for k in 0..FEATURE_COUNT {
        let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let (m, s) = mean_std(&column);
        mean[k] = m;
        std[k] = s;
    }
    (mean, std)
}

fn apply_standardization(
    x: &FeatureVector,
    mean: &[f64; FEATURE_COUNT],
    std: &[f64; FEATURE_COUNT],
) -> FeatureVector {
    let mut out = [0.0; FEATURE_COUNT];
    for k in 0..FEATURE_COUNT {
        out[k] = (x[k] - mean[k]) / std[k];
    }
    out
}

struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    fn new(x: &[FeatureVector], gamma: f64) -> Self {
        let n = x.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf(&x[i], &x[j], gamma);
                data[i * n + j] = k;
                data[j * n + i] = k;
            }
        }
        Self { n, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

struct SmoSolution {
    beta: Vec<f64>,
    bias: f64,
    converged: bool,
    sweeps_used: usize,
    kkt_gap: f64,
    objective: f64,
}

/// SMO on the 2n-variable dual. Variables t < n are α (constraint
/// coefficient +1), t ≥ n are α* (coefficient −1). Pair selection is
/// LIBSVM-style: the maximal violator on the up side, then the second-order
/// best partner on the low side. Variables pinned at a bound and far from
/// violating are shrunk out of the working set; convergence is only
/// declared after a full-gradient reconciliation pass over every variable.
fn solve_smo(kernel: &KernelMatrix, y: &[f64], params: &SvrParams) -> SmoSolution {
    let n = y.len();
    let c = params.c;
    let tau = 1e-12f64;
    let mut a = vec![0.0f64; 2 * n];
    // grad[t] = ∂f/∂a_t with f = ½βᵀKβ + εΣa − yᵀβ. Maintained exactly for
    // active variables; stale entries are rebuilt from β on reconciliation.
    let mut grad: Vec<f64> = (0..2 * n)
        .map(|t| {
            if t < n {
                params.epsilon - y[t]
            } else {
                params.epsilon + y[t - n]
            }
        })
        .collect();

    let label = |t: usize| if t < n { 1.0 } else { -1.0 };
    let point = |t: usize| if t < n { t } else { t - n };

    let max_updates = params.max_sweeps.saturating_mul(n);
    let mut updates = 0usize;
    let mut converged = false;
    let mut gap;
    let mut active: Vec<usize> = (0..2 * n).collect();
    let shrink_interval = n.max(64);
    let mut since_shrink = 0usize;

    'outer: loop {
        // Selection over the active set: maximal up-side violator plus the
        // low-side minimum for the stopping gap.
        let mut i_best = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for &t in &active {
            let v = -label(t) * grad[t];
            let in_up = if t < n { a[t] < c } else { a[t] > 0.0 };
            let in_low = if t < n { a[t] > 0.0 } else { a[t] < c };
            if in_up && v > m_up {
                m_up = v;
                i_best = t;
            }
            if in_low && v < m_low {
                m_low = v;
            }
        }
        gap = m_up - m_low;

        if !gap.is_finite() || gap < params.tol {
            if !gap.is_finite() {
                break;
            }
            // The active set satisfies KKT; reconcile against the full
            // problem before declaring convergence.
            let beta: Vec<f64> = (0..n).map(|p| a[p] - a[n + p]).collect();
            rebuild_gradient(kernel, y, params.epsilon, &beta, &mut grad);
            let (full_up, full_low) = full_bounds(&a, &grad, n, c);
            gap = full_up - full_low;
            if gap < params.tol {
                converged = true;
                break;
            }
            active = (0..2 * n).collect();
            since_shrink = 0;
            continue;
        }
        if updates >= max_updates {
            // Budget exhausted: report the true full-problem gap.
            let beta: Vec<f64> = (0..n).map(|p| a[p] - a[n + p]).collect();
            rebuild_gradient(kernel, y, params.epsilon, &beta, &mut grad);
            let (full_up, full_low) = full_bounds(&a, &grad, n, c);
            gap = full_up - full_low;
            converged = gap < params.tol;
            break;
        }

        let i = i_best;
        let p = point(i);
        let yi = label(i);
        let k_p = kernel.row(p);
        let k_pp = k_p[p];

        // Second-order partner: maximize (m_up − v_t)² / quad over the low
        // set with v_t < m_up.
        let mut j_best = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for &t in &active {
            let in_low = if t < n { a[t] > 0.0 } else { a[t] < c };
            if !in_low {
                continue;
            }
            let v = -label(t) * grad[t];
            let diff = m_up - v;
            if diff <= 0.0 {
                continue;
            }
            let q = point(t);
            let quad = (k_pp + kernel.at(q, q) - 2.0 * k_p[q]).max(tau);
            let gain = diff * diff / quad;
            if gain > best_gain {
                best_gain = gain;
                j_best = t;
            }
        }
        if j_best == usize::MAX {
            break;
        }
        let j = j_best;
        let q = point(j);
        let yj = label(j);
        let v_j = -yj * grad[j];

        let quad = (k_pp + kernel.at(q, q) - 2.0 * k_p[q]).max(tau);
        // Unconstrained optimum of the pair subproblem along the constraint
        // direction, then clipped to both boxes.
        let mut delta_i = yi * (m_up - v_j) / quad;
        let (lo, hi) = if yi * yj > 0.0 {
            // Δa_j = −Δa_i
            ((a[j] - c).max(-a[i]), a[j].min(c - a[i]))
        } else {
            // Δa_j = Δa_i
            ((-a[j]).max(-a[i]), (c - a[j]).min(c - a[i]))
        };
        delta_i = delta_i.clamp(lo, hi);
        if delta_i == 0.0 {
            break;
        }
        let delta_j = -yi * yj * delta_i;
        a[i] += delta_i;
        a[j] += delta_j;

        let d_beta_p = yi * delta_i;
        let d_beta_q = yj * delta_j;
        let k_q = kernel.row(q);
        for &t in &active {
            let r = point(t);
            let dk = k_p[r] * d_beta_p + k_q[r] * d_beta_q;
            grad[t] += label(t) * dk;
        }
        updates += 1;
        since_shrink += 1;

        if since_shrink >= shrink_interval {
            since_shrink = 0;
            // Drop bound-pinned variables that cannot join a violating
            // pair: up-only candidates below the low bound and low-only
            // candidates above the up bound. Reconciliation above protects
            // against wrong shrinks.
            active.retain(|&t| {
                let v = -label(t) * grad[t];
                let in_up = if t < n { a[t] < c } else { a[t] > 0.0 };
                let in_low = if t < n { a[t] > 0.0 } else { a[t] < c };
                if in_up && in_low {
                    return true;
                }
                if in_up {
                    v > m_low
                } else {
                    v < m_up
                }
            });
            if active.len() < 2 {
                let beta: Vec<f64> = (0..n).map(|p| a[p] - a[n + p]).collect();
                rebuild_gradient(kernel, y, params.epsilon, &beta, &mut grad);
                let (full_up, full_low) = full_bounds(&a, &grad, n, c);
                gap = full_up - full_low;
                if gap < params.tol {
                    converged = true;
                    break 'outer;
                }
                active = (0..2 * n).collect();
            }
        }
    }

    let beta: Vec<f64> = (0..n).map(|p| a[p] - a[n + p]).collect();
    rebuild_gradient(kernel, y, params.epsilon, &beta, &mut grad);
    // At optimality −y_t·grad_t equals the bias for every free variable;
    // the midpoint of the final bounds is the standard estimate.
    let bias = bias_from_gradient(&a, &grad, n, c);
    let objective = dual_objective(kernel, y, params.epsilon, &beta);
    SmoSolution {
        beta,
        bias,
        converged,
        sweeps_used: updates.div_ceil(n.max(1)),
        kkt_gap: gap,
        objective,
    }
}

/// Recompute the exact gradient of every variable from the current β.
fn rebuild_gradient(kernel: &KernelMatrix, y: &[f64], epsilon: f64, beta: &[f64], grad: &mut [f64]) {
    let n = y.len();
    let mut kb = vec![0.0f64; n];
    for (q, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let row = kernel.row(q);
        for (slot, k) in kb.iter_mut().zip(row) {
            *slot += b * k;
        }
    }
    for p in 0..n {
        grad[p] = kb[p] + epsilon - y[p];
        grad[n + p] = -kb[p] + epsilon + y[p];
    }
}

/// (max over I_up, min over I_low) of −y_t·grad_t across every variable.
fn full_bounds(a: &[f64], grad: &[f64], n: usize, c: f64) -> (f64, f64) {
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..2 * n {
        let y_t = if t < n { 1.0 } else { -1.0 };
        let v = -y_t * grad[t];
        let in_up = if t < n { a[t] < c } else { a[t] > 0.0 };
        let in_low = if t < n { a[t] > 0.0 } else { a[t] < c };
        if in_up && v > m_up {
            m_up = v;
        }
        if in_low && v < m_low {
            m_low = v;
        }
    }
    (m_up, m_low)
}

fn bias_from_gradient(a: &[f64], grad: &[f64], n: usize, c: f64) -> f64 {
    let label = |t: usize| if t < n { 1.0f64 } else { -1.0 };
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..2 * n {
        let v = -label(t) * grad[t];
        let in_up = if t < n { a[t] < c } else { a[t] > 0.0 };
        let in_low = if t < n { a[t] > 0.0 } else { a[t] < c };
        if in_up {
            m_up = m_up.max(v);
        }
        if in_low {
            m_low = m_low.min(v);
        }
        if a[t] > 0.0 && a[t] < c {
            free_sum += v;
            free_count += 1;
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else {
        0.5 * (m_up + m_low)
    }
}

fn dual_objective(kernel: &KernelMatrix, y: &[f64], epsilon: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let row = kernel.row(i);
        for j in 0..n {
            quad += beta[i] * beta[j] * row[j];
        }
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lin: f64 = beta.iter().zip(y).map(|(b, t)| b * t).sum();
    0.5 * quad + epsilon * l1 - lin
}
