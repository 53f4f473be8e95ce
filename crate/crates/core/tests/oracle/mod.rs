//! Self-contained oracles for the acceptance suite. Nothing here calls the
//! library code paths under test.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dyad_core::stats::{AnalysisDataset, ModelSpec};
use dyad_core::timeline::{ConversationTimeline, Speaker, SpeechSegment, Turn};

/// Random structurally-valid timeline with both speakers present.
pub fn random_timeline(rng: &mut ChaCha8Rng) -> ConversationTimeline {
    let n_turns = rng.gen_range(4..18);
    let mut turns: Vec<Turn> = Vec::with_capacity(n_turns);
    let mut clock = rng.gen_range(0u64..1500);
    let mut speaker = if rng.gen_bool(0.5) { Speaker::Patient } else { Speaker::Clinician };
    for i in 0..n_turns {
        // Force both speakers early so summarize() has its precondition.
        if i == 1 {
            speaker = turns[0].speaker.other();
        } else if i > 1 {
            speaker = if rng.gen_bool(0.3) { speaker } else { speaker.other() };
        }
        let same_as_last = turns.last().map(|t: &Turn| t.speaker == speaker).unwrap_or(false);
        let gap = if same_as_last {
            rng.gen_range(500u64..2500)
        } else {
            rng.gen_range(0u64..1500)
        };
        clock += gap;

        let n_segments = rng.gen_range(1..4);
        let mut segments = Vec::with_capacity(n_segments);
        for s in 0..n_segments {
            if s > 0 {
                clock += rng.gen_range(1u64..500);
            }
            let len = rng.gen_range(100u64..3000);
            segments.push(SpeechSegment::with_speaker(clock, clock + len, speaker));
            clock += len;
        }
        turns.push(Turn::from_segments(speaker, segments));
    }
    let call_duration_ms = clock + rng.gen_range(1800u64..4000);
    let tl = ConversationTimeline { call_id: "rand".into(), turns, call_duration_ms };
    tl.validate(500).expect("generator must produce valid timelines");
    tl
}

fn naive_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for v in values {
        acc += v;
    }
    acc / values.len() as f64
}

fn naive_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = naive_mean(values);
    let mut acc = 0.0;
    for v in values {
        acc += (v - m) * (v - m);
    }
    (acc / (values.len() as f64 - 1.0)).sqrt()
}

/// Straightforward re-implementation of the 20 dialogue features from their
/// definitions, in canonical column order.
pub fn naive_dialogue_features(tl: &ConversationTimeline) -> [f64; 20] {
    let speech_of = |spk: Speaker| -> f64 {
        let mut total = 0.0;
        for turn in &tl.turns {
            if turn.speaker == spk {
                for seg in &turn.segments {
                    total += (seg.end_ms - seg.start_ms) as f64;
                }
            }
        }
        total
    };
    let total_speech = speech_of(Speaker::Patient) + speech_of(Speaker::Clinician);

    let holds = |spk: Speaker| -> Vec<f64> {
        let mut out = Vec::new();
        for turn in &tl.turns {
            if turn.speaker == spk {
                for pair in turn.segments.windows(2) {
                    out.push((pair[1].start_ms - pair[0].end_ms) as f64);
                }
            }
        }
        out
    };
    let consec = |spk: Speaker| -> Vec<f64> {
        let mut out = Vec::new();
        let mut run = 0.0;
        for turn in &tl.turns {
            if turn.speaker == spk {
                run += 1.0;
            } else if run > 0.0 {
                out.push(run);
                run = 0.0;
            }
        }
        if run > 0.0 {
            out.push(run);
        }
        out
    };
    let switch_offsets = |spk: Speaker| -> Vec<f64> {
        let mut out = Vec::new();
        for i in 1..tl.turns.len() {
            if tl.turns[i].speaker == spk && tl.turns[i - 1].speaker != spk {
                out.push((tl.turns[i].start_ms - tl.turns[i - 1].end_ms) as f64);
            }
        }
        out
    };
    let lengths = |spk: Speaker| -> Vec<f64> {
        tl.turns
            .iter()
            .filter(|t| t.speaker == spk)
            .map(|t| (t.end_ms - t.start_ms) as f64)
            .collect()
    };

    let mut switches = 0.0;
    for i in 1..tl.turns.len() {
        if tl.turns[i].speaker != tl.turns[i - 1].speaker {
            switches += 1.0;
        }
    }
    let minutes = tl.call_duration_ms as f64 / 60000.0;

    let mut out = [0.0f64; 20];
    out[0] = minutes;
    out[1] = switches / minutes;
    for (block, spk) in [(0usize, Speaker::Patient), (9, Speaker::Clinician)] {
        let base = 2 + block;
        out[base] = 100.0 * speech_of(spk) / total_speech;
        let h = holds(spk);
        out[base + 1] = naive_mean(&h);
        out[base + 2] = naive_sd(&h);
        let c = consec(spk);
        out[base + 3] = naive_mean(&c);
        out[base + 4] = naive_sd(&c);
        let s = switch_offsets(spk);
        out[base + 5] = naive_mean(&s);
        out[base + 6] = naive_sd(&s);
        let l = lengths(spk);
        out[base + 7] = naive_mean(&l);
        out[base + 8] = naive_sd(&l);
    }
    out
}

/// Exhaustive pair-counting AUROC.
pub fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Accelerated projected-gradient solver for the SVM dual: maximize
/// Σα − ½α'Qα over 0 ≤ α ≤ C, y'α = 0. The feasibility projection solves a
/// scalar equation by bisection; the step size comes from power iteration.
pub fn qp_dual_objective(x: &[Vec<f64>], y: &[u8], c: f64, gamma: f64) -> f64 {
    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let rbf = |a: &[f64], b: &[f64]| -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-gamma * d2).exp()
    };
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = signs[i] * signs[j] * rbf(&x[i], &x[j]);
        }
    }
    let project = |v: &[f64]| -> Vec<f64> {
        let alpha_at = |nu: f64| -> Vec<f64> {
            v.iter().zip(&signs).map(|(&vi, &yi)| (vi - nu * yi).clamp(0.0, c)).collect()
        };
        let balance =
            |nu: f64| -> f64 { alpha_at(nu).iter().zip(&signs).map(|(a, y)| a * y).sum() };
        let (mut lo, mut hi) = (-1e7, 1e7);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        alpha_at(0.5 * (lo + hi))
    };
    let objective = |alpha: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += alpha[i] * q[i * n + j] * alpha[j];
            }
        }
        alpha.iter().sum::<f64>() - 0.5 * quad
    };

    let mut vec_pw = vec![1.0f64; n];
    let mut lambda_max = 1.0f64;
    for _ in 0..60 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[i] += q[i * n + j] * vec_pw[j];
            }
        }
        lambda_max = next.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut next {
            *v /= lambda_max;
        }
        vec_pw = next;
    }
    let step = 1.0 / (lambda_max * 1.05 + 1e-9);

    let mut alpha = project(&vec![0.0; n]);
    let mut momentum = alpha.clone();
    let mut t = 1.0f64;
    let mut best = objective(&alpha);
    let mut stale = 0;
    for _ in 0..200_000 {
        let mut v = momentum.clone();
        for i in 0..n {
            let mut g = -1.0;
            for j in 0..n {
                g += q[i * n + j] * momentum[j];
            }
            v[i] = momentum[i] - step * g;
        }
        let next = project(&v);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let coef = (t - 1.0) / t_next;
        momentum =
            next.iter().zip(&alpha).map(|(nw, old)| nw + coef * (nw - old)).collect();
        let f_next = objective(&next);
        if f_next < objective(&alpha) {
            momentum = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        alpha = next;
        if f_next > best + 1e-13 {
            best = f_next;
            stale = 0;
        } else {
            stale += 1;
            if stale > 3000 {
                break;
            }
        }
    }
    best
}

/// Ordinary least squares via hand-rolled Gaussian elimination (independent
/// of the library's linear algebra).
pub fn ols_fit(data: &AnalysisDataset, spec: &ModelSpec) -> Vec<f64> {
    let p = spec.term_names().len();
    let rows: Vec<(Vec<f64>, f64)> = data
        .rows
        .iter()
        .map(|r| {
            let mut x = vec![1.0];
            if spec.term_names().contains(&"mood") {
                x.push(r.mood as f64);
            }
            x.push(r.gender.code());
            if spec.term_names().contains(&"mood:gender") {
                x.push(r.mood as f64 * r.gender.code());
            }
            (x, r.response)
        })
        .collect();
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for (x, y) in &rows {
        for i in 0..p {
            xty[i] += x[i] * y;
            for j in 0..p {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    let mut a = xtx;
    let mut b = xty;
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in col + 1..p {
            let factor = a[row][col] / diag;
            for k in col..p {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut beta = vec![0.0f64; p];
    for row in (0..p).rev() {
        let mut acc = b[row];
        for k in row + 1..p {
            acc -= a[row][k] * beta[k];
        }
        beta[row] = acc / a[row][row];
    }
    beta
}
