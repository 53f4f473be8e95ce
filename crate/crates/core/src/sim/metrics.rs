//! Ground-truth comparison metrics for segmentation output.

use crate::timeline::{ConversationTimeline, Speaker};

/// F1 over turn boundaries (start and end events, speaker-tagged), matched
/// one-to-one within `tol_ms`.
pub fn boundary_f1(
    truth: &ConversationTimeline,
    predicted: &ConversationTimeline,
    tol_ms: u64,
) -> f64 {
    let events = |tl: &ConversationTimeline| -> Vec<(Speaker, bool, u64)> {
        let mut ev: Vec<(Speaker, bool, u64)> = tl
            .turns
            .iter()
            .flat_map(|t| [(t.speaker, true, t.start_ms), (t.speaker, false, t.end_ms)])
            .collect();
        ev.sort_by_key(|&(_, _, t)| t);
        ev
    };
    let truth_ev = events(truth);
    let pred_ev = events(predicted);
    if truth_ev.is_empty() && pred_ev.is_empty() {
        return 1.0;
    }
    if truth_ev.is_empty() || pred_ev.is_empty() {
        return 0.0;
    }

    let mut used = vec![false; pred_ev.len()];
    let mut matched = 0usize;
    for &(spk, kind, t) in &truth_ev {
        let mut best: Option<(u64, usize)> = None;
        for (j, &(pspk, pkind, pt)) in pred_ev.iter().enumerate() {
            if used[j] || pspk != spk || pkind != kind {
                continue;
            }
            let dist = t.abs_diff(pt);
            if dist <= tol_ms && best.map(|(d, _)| dist < d).unwrap_or(true) {
                best = Some((dist, j));
            }
        }
        if let Some((_, j)) = best {
            used[j] = true;
            matched += 1;
        }
    }
    2.0 * matched as f64 / (truth_ev.len() + pred_ev.len()) as f64
}

fn speaker_at(tl: &ConversationTimeline, t_ms: u64) -> Option<Speaker> {
    tl.turns
        .iter()
        .find(|turn| turn.start_ms <= t_ms && t_ms < turn.end_ms)
        .map(|turn| turn.speaker)
}

/// Fraction of predicted speaker-assigned frames whose speaker matches the
/// ground truth, at `hop_ms` frame resolution.
pub fn speaker_frame_accuracy(
    truth: &ConversationTimeline,
    predicted: &ConversationTimeline,
    hop_ms: u64,
) -> f64 {
    let duration = truth.call_duration_ms.max(predicted.call_duration_ms);
    let mut assigned = 0usize;
    let mut correct = 0usize;
    let mut t = hop_ms / 2;
    while t < duration {
        if let Some(pred) = speaker_at(predicted, t) {
            assigned += 1;
            if speaker_at(truth, t) == Some(pred) {
                correct += 1;
            }
        }
        t += hop_ms;
    }
    if assigned == 0 {
        return 0.0;
    }
    correct as f64 / assigned as f64
}
