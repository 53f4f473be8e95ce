//! Speaker-turn timelines and their derivation from paired VAD output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::align::AlignmentConfig;
use crate::vad::VadConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Speaker {
    Patient,
    Clinician,
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::Patient => Speaker::Clinician,
            Speaker::Clinician => Speaker::Patient,
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::Patient => "Patient",
            Speaker::Clinician => "Clinician",
        })
    }
}

impl FromStr for Speaker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Patient" => Ok(Speaker::Patient),
            "Clinician" => Ok(Speaker::Clinician),
            other => Err(Error::BadSegments(format!("unknown speaker {other:?}"))),
        }
    }
}

/// A contiguous stretch of detected speech, `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeechSegment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub speaker: Option<Speaker>,
}

impl SpeechSegment {
    pub fn new(start_ms: u64, end_ms: u64) -> Self {
        assert!(start_ms < end_ms, "segment must have positive duration");
        Self { start_ms, end_ms, speaker: None }
    }

    pub fn with_speaker(start_ms: u64, end_ms: u64, speaker: Speaker) -> Self {
        Self { speaker: Some(speaker), ..Self::new(start_ms, end_ms) }
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// A maximal stretch of one speaker's speech: constituent segments whose
/// internal gaps are each shorter than the merge gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub speaker: Speaker,
    pub segments: Vec<SpeechSegment>,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Turn {
    pub fn from_segments(speaker: Speaker, segments: Vec<SpeechSegment>) -> Self {
        assert!(!segments.is_empty(), "turn needs at least one segment");
        let start_ms = segments.first().unwrap().start_ms;
        let end_ms = segments.last().unwrap().end_ms;
        Self { speaker, segments, start_ms, end_ms }
    }

    /// Turn span including held pauses.
    pub fn length_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    /// Total speech inside the turn (constituent segments only).
    pub fn speech_ms(&self) -> u64 {
        self.segments.iter().map(SpeechSegment::duration_ms).sum()
    }

    /// Gaps between consecutive constituent segments.
    pub fn internal_gaps_ms(&self) -> Vec<u64> {
        self.segments.windows(2).map(|w| w[1].start_ms - w[0].end_ms).collect()
    }
}

/// Ordered, non-overlapping speaker turns for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationTimeline {
    pub call_id: String,
    pub turns: Vec<Turn>,
    pub call_duration_ms: u64,
}

impl ConversationTimeline {
    pub fn turns_of(&self, speaker: Speaker) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(move |t| t.speaker == speaker)
    }

    pub fn has_speaker(&self, speaker: Speaker) -> bool {
        self.turns_of(speaker).next().is_some()
    }

    /// Check the structural invariants: time-ordered non-overlapping turns,
    /// consistent speakers and spans, internal gaps under the merge gap,
    /// adjacent same-speaker turns at least the merge gap apart, and a call
    /// duration covering the last turn.
    pub fn validate(&self, merge_gap_ms: u64) -> Result<()> {
        let fail = |msg: String| Err(Error::BadSegments(format!("{}: {msg}", self.call_id)));
        for turn in &self.turns {
            if turn.segments.is_empty() {
                return fail("turn without segments".into());
            }
            if turn.start_ms != turn.segments[0].start_ms
                || turn.end_ms != turn.segments.last().unwrap().end_ms
            {
                return fail(format!("turn span mismatch at {}", turn.start_ms));
            }
            for seg in &turn.segments {
                if seg.speaker != Some(turn.speaker) {
                    return fail(format!("segment speaker mismatch at {}", seg.start_ms));
                }
                if seg.start_ms >= seg.end_ms {
                    return fail(format!("empty segment at {}", seg.start_ms));
                }
            }
            for w in turn.segments.windows(2) {
                if w[1].start_ms < w[0].end_ms {
                    return fail(format!("overlapping segments at {}", w[1].start_ms));
                }
                if w[1].start_ms - w[0].end_ms >= merge_gap_ms {
                    return fail(format!("internal gap >= merge gap at {}", w[0].end_ms));
                }
            }
        }
        for w in self.turns.windows(2) {
            if w[1].start_ms < w[0].end_ms {
                return fail(format!("overlapping turns at {}", w[1].start_ms));
            }
            if w[0].speaker == w[1].speaker && w[1].start_ms - w[0].end_ms < merge_gap_ms {
                return fail(format!(
                    "same-speaker turns closer than the merge gap at {}",
                    w[0].end_ms
                ));
            }
        }
        if let Some(last) = self.turns.last() {
            if self.call_duration_ms < last.end_ms {
                return fail("duration shorter than last turn".into());
            }
        }
        Ok(())
    }
}

/// Everything the segmentation front end needs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub merge_gap_ms: u64,
    pub vad: VadConfig,
    pub alignment: AlignmentConfig,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { merge_gap_ms: 500, vad: VadConfig::default(), alignment: AlignmentConfig::default() }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.merge_gap_ms == 0 {
            return Err(Error::InvalidConfig("merge_gap_ms must be > 0".into()));
        }
        self.vad.validate()
    }
}

/// Shift segment boundaries by a signed millisecond offset, clamping at zero.
pub fn shift_segments(segments: &[SpeechSegment], offset_ms: i64) -> Vec<SpeechSegment> {
    segments
        .iter()
        .filter_map(|s| {
            let start = s.start_ms as i64 + offset_ms;
            let end = s.end_ms as i64 + offset_ms;
            if end <= 0 {
                return None;
            }
            Some(SpeechSegment { start_ms: start.max(0) as u64, end_ms: end as u64, speaker: s.speaker })
        })
        .collect()
}

/// Derive the per-speaker turn timeline from the two aligned VAD outputs.
///
/// At frame resolution (the VAD hop), landline frames overlapping patient
/// activity are patient speech. Patient segments closer than the merge gap
/// join into one turn first; landline coverage left outside patient turn
/// spans is clinician speech, merged across sub-gap silences unless a patient
/// turn intervenes. Every landline-active frame ends up inside exactly one
/// turn span, and turns never overlap.
pub fn derive_turns(
    call_id: &str,
    patient_vad: &[SpeechSegment],
    landline_vad: &[SpeechSegment],
    call_duration_ms: u64,
    cfg: &SegmentationConfig,
) -> Result<ConversationTimeline> {
    cfg.validate()?;
    check_sorted(patient_vad, "patient")?;
    check_sorted(landline_vad, "landline")?;

    let hop = cfg.vad.hop_ms as u64;
    let n_frames = (call_duration_ms / hop) as usize;
    let patient_active = rasterize(patient_vad, hop, n_frames);
    let landline_active = rasterize(landline_vad, hop, n_frames);

    // Overlap frames -> patient; merge across sub-gap pauses unconditionally.
    let overlap: Vec<bool> =
        patient_active.iter().zip(&landline_active).map(|(&p, &l)| p && l).collect();
    let patient_raw = frames_to_segments(&overlap, hop);
    let patient_turns = merge_into_turns(Speaker::Patient, &patient_raw, cfg.merge_gap_ms, &[]);

    // Landline coverage outside patient turn spans -> clinician.
    let mut clinician_mask = landline_active;
    for turn in &patient_turns {
        let lo = (turn.start_ms / hop) as usize;
        let hi = ((turn.end_ms + hop - 1) / hop) as usize;
        for frame in clinician_mask.iter_mut().take(hi.min(n_frames)).skip(lo) {
            *frame = false;
        }
    }
    let clinician_raw = frames_to_segments(&clinician_mask, hop);
    let patient_spans: Vec<(u64, u64)> =
        patient_turns.iter().map(|t| (t.start_ms, t.end_ms)).collect();
    let clinician_turns =
        merge_into_turns(Speaker::Clinician, &clinician_raw, cfg.merge_gap_ms, &patient_spans);

    let mut turns: Vec<Turn> = patient_turns.into_iter().chain(clinician_turns).collect();
    turns.sort_by_key(|t| t.start_ms);
    debug_assert!(turns.windows(2).all(|w| w[0].end_ms <= w[1].start_ms));

    Ok(ConversationTimeline { call_id: call_id.to_string(), turns, call_duration_ms })
}

fn check_sorted(segments: &[SpeechSegment], which: &str) -> Result<()> {
    for w in segments.windows(2) {
        if w[1].start_ms < w[0].end_ms {
            return Err(Error::BadSegments(format!(
                "{which} list unsorted or overlapping at {}..{} then {}..{}",
                w[0].start_ms, w[0].end_ms, w[1].start_ms, w[1].end_ms
            )));
        }
    }
    Ok(())
}

fn rasterize(segments: &[SpeechSegment], hop: u64, n_frames: usize) -> Vec<bool> {
    let mut mask = vec![false; n_frames];
    for seg in segments {
        let lo = ((seg.start_ms + hop / 2) / hop) as usize;
        let hi = ((seg.end_ms + hop / 2) / hop) as usize;
        for frame in mask.iter_mut().take(hi.min(n_frames)).skip(lo) {
            *frame = true;
        }
    }
    mask
}

fn frames_to_segments(mask: &[bool], hop: u64) -> Vec<SpeechSegment> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=mask.len() {
        let active = i < mask.len() && mask[i];
        match (start, active) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                out.push(SpeechSegment::new(s as u64 * hop, i as u64 * hop));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Group segments into turns: a segment joins the current turn when the gap
/// to it is under `merge_gap_ms` and no blocking span starts inside the gap.
fn merge_into_turns(
    speaker: Speaker,
    segments: &[SpeechSegment],
    merge_gap_ms: u64,
    blocking_spans: &[(u64, u64)],
) -> Vec<Turn> {
    let mut turns: Vec<Turn> = Vec::new();
    let mut current: Vec<SpeechSegment> = Vec::new();
    for seg in segments {
        let seg = SpeechSegment::with_speaker(seg.start_ms, seg.end_ms, speaker);
        if let Some(last) = current.last() {
            let gap = seg.start_ms - last.end_ms;
            let blocked = blocking_spans
                .iter()
                .any(|&(s, _)| s >= last.end_ms && s < seg.start_ms);
            if gap < merge_gap_ms && !blocked {
                current.push(seg);
                continue;
            }
            turns.push(Turn::from_segments(speaker, std::mem::take(&mut current)));
        }
        current.push(seg);
    }
    if !current.is_empty() {
        turns.push(Turn::from_segments(speaker, current));
    }
    turns
}

pub const TIMELINE_CSV_HEADER: &str = "call_id,speaker,turn_index,start_ms,end_ms";

/// Write timelines as the segment-level CSV (one row per turn-constituent
/// segment). This file doubles as the ingestion format for pre-segmented
/// conversations.
pub fn write_timeline_csv<W: Write>(mut w: W, timelines: &[ConversationTimeline]) -> Result<()> {
    writeln!(w, "{TIMELINE_CSV_HEADER}")?;
    for tl in timelines {
        for (turn_index, turn) in tl.turns.iter().enumerate() {
            for seg in &turn.segments {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    tl.call_id, turn.speaker, turn_index, seg.start_ms, seg.end_ms
                )?;
            }
        }
    }
    Ok(())
}

/// Read a timeline CSV. Rows must be grouped by call and ordered in time.
/// The call duration is not part of the schema; it defaults to the last
/// segment's end per call and can be overridden by the caller afterwards.
pub fn read_timeline_csv<P: AsRef<Path>>(path: P) -> Result<Vec<ConversationTimeline>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let expect = TIMELINE_CSV_HEADER.split(',').collect::<Vec<_>>();
    let got = reader.headers()?.iter().collect::<Vec<_>>();
    if got != expect {
        return Err(Error::CsvSchema {
            path: path.to_path_buf(),
            detail: format!("expected header {expect:?}, got {got:?}"),
        });
    }

    let mut timelines: Vec<ConversationTimeline> = Vec::new();
    let mut current: Option<(String, Vec<(u32, Speaker, Vec<SpeechSegment>)>)> = None;
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<u64> {
            record[i].parse::<u64>().map_err(|_| Error::CsvSchema {
                path: path.to_path_buf(),
                detail: format!("bad integer {:?} in {:?}", &record[i], record),
            })
        };
        let call_id = record[0].to_string();
        let speaker: Speaker = record[1].parse()?;
        let turn_index = parse(2)? as u32;
        let (start_ms, end_ms) = (parse(3)?, parse(4)?);
        if start_ms >= end_ms {
            return Err(Error::BadSegments(format!("segment {start_ms}..{end_ms} in {call_id}")));
        }
        let seg = SpeechSegment::with_speaker(start_ms, end_ms, speaker);

        if current.as_ref().map(|(id, _)| id != &call_id).unwrap_or(true) {
            if let Some(done) = current.take() {
                timelines.push(finish_call(done)?);
            }
            current = Some((call_id, Vec::new()));
        }
        let turns = &mut current.as_mut().unwrap().1;
        match turns.last_mut() {
            Some((idx, spk, segs)) if *idx == turn_index => {
                if *spk != speaker {
                    return Err(Error::BadSegments(format!(
                        "turn {turn_index} mixes speakers"
                    )));
                }
                segs.push(seg);
            }
            _ => turns.push((turn_index, speaker, vec![seg])),
        }
    }
    if let Some(done) = current.take() {
        timelines.push(finish_call(done)?);
    }
    Ok(timelines)
}

fn finish_call(
    (call_id, raw_turns): (String, Vec<(u32, Speaker, Vec<SpeechSegment>)>),
) -> Result<ConversationTimeline> {
    let mut turns = Vec::with_capacity(raw_turns.len());
    let mut last_end = 0u64;
    for (_, speaker, segments) in raw_turns {
        for w in segments.windows(2) {
            if w[1].start_ms < w[0].end_ms {
                return Err(Error::BadSegments(format!("overlapping segments in {call_id}")));
            }
        }
        let turn = Turn::from_segments(speaker, segments);
        if turn.start_ms < last_end {
            return Err(Error::BadSegments(format!("overlapping turns in {call_id}")));
        }
        last_end = turn.end_ms;
        turns.push(turn);
    }
    let call_duration_ms = last_end;
    Ok(ConversationTimeline { call_id, turns, call_duration_ms })
}
