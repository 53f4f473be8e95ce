//! Mood-episode classifiers and score-based evaluation.

mod auroc;
mod logreg;
mod mlp;
mod model;
mod svm;

pub use auroc::auroc;
pub use logreg::{train_logreg, LogRegModel};
pub use mlp::{gradient_check, train_mlp, MlpModel, MlpTrainConfig};
pub use model::TrainedModel;
pub use svm::{train_svm_rbf, SvmRbfModel};

use crate::{Error, Result};

/// Shared input validation: features finite, rows consistent, both classes
/// present.
pub(crate) fn validate_training_input(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::SingleClass);
    }
    let dim = x[0].len();
    for (row, features) in x.iter().enumerate() {
        if features.len() != dim {
            return Err(Error::LengthMismatch(features.len(), dim));
        }
        for (col, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}
