//! L2-regularized logistic regression by damped Newton iterations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::classify::validate_training_input;
use crate::{Error, Result};

/// Linear model with an unpenalized bias; the score is the raw logit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub iterations: usize,
    pub final_loss: f64,
}

impl LogRegModel {
    pub fn score(&self, features: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Minimize mean log-loss + (1/(2C))·‖w‖² to gradient norm ≤ 1e-6.
///
/// Newton steps with backtracking line search; a Levenberg ridge kicks in if
/// the Hessian factorization fails, degrading gracefully toward gradient
/// descent.
pub fn train_logreg(x: &[Vec<f64>], y: &[u8], c: f64) -> Result<LogRegModel> {
    let dim = validate_training_input(x, y)?;
    if c <= 0.0 {
        return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
    }
    let n = x.len();
    // theta = [w_0..w_{d-1}, bias].
    let mut theta = DVector::zeros(dim + 1);
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();

    let objective = |theta: &DVector<f64>| -> f64 {
        let mut loss = 0.0;
        for (row, &s) in x.iter().zip(&signs) {
            let z = theta[dim] + row.iter().enumerate().map(|(j, v)| theta[j] * v).sum::<f64>();
            // ln(1 + exp(-s z)), stable.
            let m = -s * z;
            loss += if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
        }
        let penalty = theta.rows(0, dim).norm_squared() / (2.0 * c);
        loss / n as f64 + penalty
    };

    let mut iterations = 0;
    let tol = 1e-6;
    let max_iters = 500;
    loop {
        // Gradient and Hessian of the mean loss.
        let mut grad = DVector::zeros(dim + 1);
        let mut hess = DMatrix::zeros(dim + 1, dim + 1);
        for (row, &s) in x.iter().zip(&signs) {
            let z: f64 =
                theta[dim] + row.iter().enumerate().map(|(j, &v)| theta[j] * v).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let target = if s > 0.0 { 1.0 } else { 0.0 };
            let g_scale = (p - target) / n as f64;
            let h_scale = (p * (1.0 - p)).max(1e-12) / n as f64;
            for j in 0..dim {
                grad[j] += g_scale * row[j];
                for k in 0..=j {
                    hess[(j, k)] += h_scale * row[j] * row[k];
                }
                hess[(dim, j)] += h_scale * row[j];
            }
            grad[dim] += g_scale;
            hess[(dim, dim)] += h_scale;
        }
        for j in 0..dim {
            grad[j] += theta[j] / c;
            hess[(j, j)] += 1.0 / c;
        }
        // Mirror the lower triangle.
        for j in 0..=dim {
            for k in 0..j {
                hess[(k, j)] = hess[(j, k)];
            }
        }

        if grad.norm() <= tol || iterations >= max_iters {
            break;
        }

        let mut ridge = 0.0;
        let direction = loop {
            let mut h = hess.clone();
            if ridge > 0.0 {
                for j in 0..=dim {
                    h[(j, j)] += ridge;
                }
            }
            match Cholesky::new(h) {
                Some(chol) => break chol.solve(&(-&grad)),
                None => {
                    ridge = if ridge == 0.0 { 1e-8 } else { ridge * 100.0 };
                    if ridge > 1e6 {
                        // Pure gradient step as a last resort.
                        break -&grad;
                    }
                }
            }
        };

        // Backtracking line search (Armijo).
        let f0 = objective(&theta);
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &theta + &direction * step;
            if objective(&candidate) <= f0 + 1e-4 * step * slope {
                theta = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
    }

    let final_loss = objective(&theta);
    Ok(LogRegModel {
        weights: theta.rows(0, dim).iter().copied().collect(),
        bias: theta[dim],
        c,
        iterations,
        final_loss,
    })
}
