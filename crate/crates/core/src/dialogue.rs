//! Call-level interaction features computed from a turn timeline.
//!
//! Six feature families — floor control, hold offsets, consecutive-turn run
//! lengths, turn-switch rate, switch offsets, and turn lengths — summarized
//! per call as mean and sample standard deviation where the family is a list,
//! for 20 features total (call duration, switch rate, and nine per-speaker
//! values for each side).

use std::io::Write;

use crate::csvfmt::fmt_g6;
use crate::timeline::{ConversationTimeline, Speaker, Turn};
use crate::{Error, Result};

/// The fixed output order of the 20 per-call features.
pub const DIALOGUE_FEATURE_NAMES: [&str; 20] = [
    "call_duration_min",
    "switches_per_min",
    "patient_floor_control_pct",
    "patient_hold_offset_mean_ms",
    "patient_hold_offset_sd_ms",
    "patient_consecutive_turns_mean",
    "patient_consecutive_turns_sd",
    "patient_switch_offset_mean_ms",
    "patient_switch_offset_sd_ms",
    "patient_turn_length_mean_ms",
    "patient_turn_length_sd_ms",
    "clinician_floor_control_pct",
    "clinician_hold_offset_mean_ms",
    "clinician_hold_offset_sd_ms",
    "clinician_consecutive_turns_mean",
    "clinician_consecutive_turns_sd",
    "clinician_switch_offset_mean_ms",
    "clinician_switch_offset_sd_ms",
    "clinician_turn_length_mean_ms",
    "clinician_turn_length_sd_ms",
];

/// Index of the call-duration column; the classification harness always
/// masks it out.
pub const CALL_DURATION_INDEX: usize = 0;

/// Per-speaker block of summarized features.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerFeatures {
    pub floor_control_pct: f64,
    pub hold_offset_mean_ms: f64,
    pub hold_offset_sd_ms: f64,
    pub consecutive_turns_mean: f64,
    pub consecutive_turns_sd: f64,
    pub switch_offset_mean_ms: f64,
    pub switch_offset_sd_ms: f64,
    pub turn_length_mean_ms: f64,
    pub turn_length_sd_ms: f64,
}

/// The 20 call-level interaction features.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueFeatureVector {
    pub call_id: String,
    pub call_duration_min: f64,
    pub switches_per_min: f64,
    pub patient: SpeakerFeatures,
    pub clinician: SpeakerFeatures,
    /// Names of features whose source list was empty (their mean/SD were
    /// forced to 0 so downstream vectors stay complete).
    pub empty_fields: Vec<String>,
}

impl DialogueFeatureVector {
    /// Values in [`DIALOGUE_FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 20] {
        let p = &self.patient;
        let c = &self.clinician;
        [
            self.call_duration_min,
            self.switches_per_min,
            p.floor_control_pct,
            p.hold_offset_mean_ms,
            p.hold_offset_sd_ms,
            p.consecutive_turns_mean,
            p.consecutive_turns_sd,
            p.switch_offset_mean_ms,
            p.switch_offset_sd_ms,
            p.turn_length_mean_ms,
            p.turn_length_sd_ms,
            c.floor_control_pct,
            c.hold_offset_mean_ms,
            c.hold_offset_sd_ms,
            c.consecutive_turns_mean,
            c.consecutive_turns_sd,
            c.switch_offset_mean_ms,
            c.switch_offset_sd_ms,
            c.turn_length_mean_ms,
            c.turn_length_sd_ms,
        ]
    }
}

/// Percentage of total speech time (constituent segments, both speakers)
/// produced by `speaker`.
pub fn floor_control(timeline: &ConversationTimeline, speaker: Speaker) -> Result<f64> {
    let total: u64 = timeline.turns.iter().map(Turn::speech_ms).sum();
    if total == 0 {
        return Err(Error::NoSpeech);
    }
    let own: u64 = timeline.turns_of(speaker).map(Turn::speech_ms).sum();
    Ok(own as f64 / total as f64 * 100.0)
}

/// Held pauses: gaps between consecutive constituent segments inside each of
/// the speaker's turns. Each is below the merge gap by construction.
pub fn hold_offsets(timeline: &ConversationTimeline, speaker: Speaker) -> Vec<f64> {
    timeline
        .turns_of(speaker)
        .flat_map(|t| t.internal_gaps_ms().into_iter().map(|g| g as f64))
        .collect()
}

/// Lengths of maximal runs of the speaker's turns uninterrupted by the
/// interlocutor.
pub fn consecutive_turn_counts(timeline: &ConversationTimeline, speaker: Speaker) -> Vec<f64> {
    let mut runs = Vec::new();
    let mut current = 0u64;
    for turn in &timeline.turns {
        if turn.speaker == speaker {
            current += 1;
        } else if current > 0 {
            runs.push(current as f64);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current as f64);
    }
    runs
}

/// Turn switches (adjacent turn pairs with differing speakers) per minute of
/// call time.
pub fn switch_rate(timeline: &ConversationTimeline) -> Result<f64> {
    if timeline.call_duration_ms == 0 {
        return Err(Error::ZeroDuration);
    }
    let switches = timeline
        .turns
        .windows(2)
        .filter(|w| w[0].speaker != w[1].speaker)
        .count();
    let minutes = timeline.call_duration_ms as f64 / 60_000.0;
    Ok(switches as f64 / minutes)
}

/// Latency of every transition into a turn of `speaker`: its start minus the
/// previous (other-speaker) turn's end.
pub fn switch_offsets(timeline: &ConversationTimeline, speaker: Speaker) -> Vec<f64> {
    timeline
        .turns
        .windows(2)
        .filter(|w| w[1].speaker == speaker && w[0].speaker != speaker)
        .map(|w| (w[1].start_ms - w[0].end_ms) as f64)
        .collect()
}

/// Span of each of the speaker's turns, held pauses included.
pub fn turn_lengths(timeline: &ConversationTimeline, speaker: Speaker) -> Vec<f64> {
    timeline.turns_of(speaker).map(|t| t.length_ms() as f64).collect()
}

/// Assemble the full 20-feature vector for one call.
///
/// Mean/SD use the sample (n−1) convention; a singleton list has SD 0, and an
/// empty list contributes mean 0 / SD 0 plus an entry in `empty_fields`.
pub fn summarize(timeline: &ConversationTimeline) -> Result<DialogueFeatureVector> {
    for speaker in [Speaker::Patient, Speaker::Clinician] {
        if !timeline.has_speaker(speaker) {
            return Err(Error::MissingSpeaker(speaker));
        }
    }
    let mut empty_fields = Vec::new();
    let mut speaker_block = |speaker: Speaker| -> Result<SpeakerFeatures> {
        let prefix = match speaker {
            Speaker::Patient => "patient",
            Speaker::Clinician => "clinician",
        };
        let mut summarize_list = |name: &str, values: Vec<f64>| -> (f64, f64) {
            if values.is_empty() {
                empty_fields.push(format!("{prefix}_{name}"));
            }
            (mean(&values), sample_sd(&values))
        };
        let (hold_mean, hold_sd) = summarize_list("hold_offset", hold_offsets(timeline, speaker));
        let (consec_mean, consec_sd) =
            summarize_list("consecutive_turns", consecutive_turn_counts(timeline, speaker));
        let (switch_mean, switch_sd) =
            summarize_list("switch_offset", switch_offsets(timeline, speaker));
        let (len_mean, len_sd) = summarize_list("turn_length", turn_lengths(timeline, speaker));
        Ok(SpeakerFeatures {
            floor_control_pct: floor_control(timeline, speaker)?,
            hold_offset_mean_ms: hold_mean,
            hold_offset_sd_ms: hold_sd,
            consecutive_turns_mean: consec_mean,
            consecutive_turns_sd: consec_sd,
            switch_offset_mean_ms: switch_mean,
            switch_offset_sd_ms: switch_sd,
            turn_length_mean_ms: len_mean,
            turn_length_sd_ms: len_sd,
        })
    };
    let patient = speaker_block(Speaker::Patient)?;
    let clinician = speaker_block(Speaker::Clinician)?;
    Ok(DialogueFeatureVector {
        call_id: timeline.call_id.clone(),
        call_duration_min: timeline.call_duration_ms as f64 / 60_000.0,
        switches_per_min: switch_rate(timeline)?,
        patient,
        clinician,
        empty_fields,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample standard deviation (n−1); 0 for empty or singleton lists.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Per-call metadata joined into the dialogue feature CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CallMeta {
    pub call_id: String,
    pub patient_id: String,
    pub clinician_id: String,
    /// "F" or "M".
    pub patient_gender: String,
    /// "F" or "M"; empty when unknown.
    pub clinician_gender: String,
    pub hamd: u32,
    pub ymrs: u32,
    pub duration_ms: u64,
}

pub fn dialogue_csv_header() -> String {
    format!(
        "call_id,patient_id,clinician_id,patient_gender,hamd,ymrs,{}",
        DIALOGUE_FEATURE_NAMES.join(",")
    )
}

/// Write the dialogue feature CSV (`call_id,patient_id,clinician_id,
/// patient_gender,hamd,ymrs` + the 20 feature columns in fixed order).
pub fn write_dialogue_csv<W: Write>(
    mut w: W,
    rows: &[(CallMeta, DialogueFeatureVector)],
) -> Result<()> {
    writeln!(w, "{}", dialogue_csv_header())?;
    for (meta, features) in rows {
        let values: Vec<String> = features.values().iter().map(|&v| fmt_g6(v)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            meta.call_id,
            meta.patient_id,
            meta.clinician_id,
            meta.patient_gender,
            meta.hamd,
            meta.ymrs,
            values.join(",")
        )?;
    }
    Ok(())
}
