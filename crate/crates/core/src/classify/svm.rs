//! Soft-margin RBF SVM trained by sequential minimal optimization.
//!
//! Solves the dual min ½α'Qα − e'α s.t. 0 ≤ α ≤ C, y'α = 0 with
//! Q_ij = y_i y_j K(x_i, x_j), selecting the maximal-KKT-violation pair each
//! iteration and stopping when the violation gap drops below 1e-3.

use crate::classify::validate_training_input;
use crate::{Error, Result};

pub const KKT_TOL: f64 = 1e-3;
pub const MAX_PASSES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvmRbfModel {
    /// Support vectors, row-major.
    pub support_x: Vec<f64>,
    pub dim: usize,
    /// α_i·y_i per support vector.
    pub alpha_y: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub gamma: f64,
    pub iterations: usize,
    /// Σα − ½α'Qα at the solution.
    pub dual_objective: f64,
}

impl SvmRbfModel {
    pub fn n_support(&self) -> usize {
        self.alpha_y.len()
    }

    /// Decision value Σ α_i y_i K(x_i, x) + b.
    pub fn score(&self, features: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (sv, ay) in self.support_x.chunks_exact(self.dim).zip(&self.alpha_y) {
            acc += ay * rbf(sv, features, self.gamma);
        }
        acc
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn train_svm_rbf(x: &[Vec<f64>], y: &[u8], c: f64, gamma: f64) -> Result<SvmRbfModel> {
    let dim = validate_training_input(x, y)?;
    if c <= 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidConfig(format!("C and gamma must be positive ({c}, {gamma})")));
    }
    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();

    // Full kernel cache; problem sizes here are a few hundred rows.
    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = rbf(&x[i], &x[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let mut alpha = vec![0.0f64; n];
    // grad_i = (Qα)_i − 1.
    let mut grad = vec![-1.0f64; n];
    let mut iterations = 0;

    let dual_value = |alpha: &[f64], grad: &[f64]| -> f64 {
        // Σα − ½α'Qα, using α'Qα = α·(grad + e).
        let ag: f64 = alpha.iter().zip(grad).map(|(a, g)| a * g).sum();
        let asum: f64 = alpha.iter().sum();
        asum - 0.5 * (ag + asum)
    };

    loop {
        // Maximal violating pair.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut big_m_val = f64::INFINITY;
        let mut big_m_idx = usize::MAX;
        for i in 0..n {
            let v = -signs[i] * grad[i];
            let in_up =
                (signs[i] > 0.0 && alpha[i] < c) || (signs[i] < 0.0 && alpha[i] > 0.0);
            let in_low =
                (signs[i] < 0.0 && alpha[i] < c) || (signs[i] > 0.0 && alpha[i] > 0.0);
            if in_up && v > m_val {
                m_val = v;
                m_idx = i;
            }
            if in_low && v < big_m_val {
                big_m_val = v;
                big_m_idx = i;
            }
        }
        if m_idx == usize::MAX || big_m_idx == usize::MAX || m_val - big_m_val <= KKT_TOL {
            break;
        }
        if iterations >= MAX_PASSES {
            return Err(Error::SmoNotConverged {
                passes: iterations,
                objective: dual_value(&alpha, &grad),
            });
        }

        let (i, j) = (m_idx, big_m_idx);
        let quad =
            (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
        // Step along α_i += y_i δ, α_j −= y_j δ (keeps y'α fixed).
        let mut delta = (m_val - big_m_val) / quad;
        let cap_i = if signs[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if signs[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        delta = delta.min(cap_i).min(cap_j);

        let old_dual = if cfg!(debug_assertions) { dual_value(&alpha, &grad) } else { 0.0 };

        alpha[i] += signs[i] * delta;
        alpha[j] -= signs[j] * delta;
        for k in 0..n {
            grad[k] += signs[k] * delta * (kernel[k * n + i] - kernel[k * n + j]);
        }
        iterations += 1;

        if cfg!(debug_assertions) {
            let new_dual = dual_value(&alpha, &grad);
            debug_assert!(
                new_dual >= old_dual - 1e-9 * (1.0 + old_dual.abs()),
                "dual objective decreased: {old_dual} -> {new_dual}"
            );
        }
    }

    // Bias from free support vectors, or the violation midpoint.
    let free: Vec<usize> =
        (0..n).filter(|&i| alpha[i] > 1e-12 && alpha[i] < c - 1e-12).collect();
    let bias = if free.is_empty() {
        let mut m_val = f64::NEG_INFINITY;
        let mut big_m_val = f64::INFINITY;
        for i in 0..n {
            let v = -signs[i] * grad[i];
            if (signs[i] > 0.0 && alpha[i] < c) || (signs[i] < 0.0 && alpha[i] > 0.0) {
                m_val = m_val.max(v);
            }
            if (signs[i] < 0.0 && alpha[i] < c) || (signs[i] > 0.0 && alpha[i] > 0.0) {
                big_m_val = big_m_val.min(v);
            }
        }
        (m_val + big_m_val) / 2.0
    } else {
        free.iter().map(|&i| -signs[i] * grad[i]).sum::<f64>() / free.len() as f64
    };

    let dual_objective = dual_value(&alpha, &grad);
    let mut support_x = Vec::new();
    let mut alpha_y = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-12 {
            support_x.extend_from_slice(&x[i]);
            alpha_y.push(alpha[i] * signs[i]);
        }
    }

    Ok(SvmRbfModel {
        support_x,
        dim,
        alpha_y,
        bias,
        c,
        gamma,
        iterations,
        dual_objective,
    })
}
