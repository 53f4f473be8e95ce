//! Benjamini–Hochberg step-up control of the false discovery rate.

use crate::{Error, Result};

/// Step-up procedure at level `alpha`: sort the p-values ascending, find the
/// largest k with p_(k) <= k*alpha/m, and reject hypotheses 1..k. Returns
/// per-input reject flags (original order). Ties are handled stably: equal
/// p-values always receive the same decision.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::BadPValue(p));
        }
    }
    let m = p_values.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());

    let mut threshold_p = -1.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let k = rank + 1;
        if p_values[idx] <= k as f64 * alpha / m as f64 {
            threshold_p = p_values[idx];
        }
    }
    // Rejecting by value (p <= p_(k*)) rather than by rank keeps tied
    // p-values consistent.
    Ok(p_values.iter().map(|&p| p <= threshold_p).collect())
}
