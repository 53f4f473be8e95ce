//! Energy + spectral-flatness voice activity detection.
//!
//! A deliberately simple detector with the same input/output contract as the
//! production VAD it stands in for: each frame votes on log energy (relative
//! to an estimated noise floor) and spectral flatness (speech-band energy is
//! spectrally concentrated, broadband noise is not); majority smoothing over
//! a short window removes flicker, and surviving runs of active frames become
//! speech segments quantized to the hop grid.
//!
//! The paper behind this pipeline does not publish the VAD internals, so the
//! frame, margin, and flatness parameters below are this crate's defaults —
//! tune them per corpus.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use crate::timeline::SpeechSegment;
use crate::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct VadConfig {
    /// Analysis frame length in ms. Must be ≥ `hop_ms`.
    pub frame_ms: u32,
    /// Frame hop in ms; all segment boundaries land on this grid.
    pub hop_ms: u32,
    /// Absolute energy floor in dB; frames below `floor + margin` never vote.
    pub energy_floor_db: f64,
    /// How far above the noise floor a frame must sit to vote active.
    pub energy_margin_db: f64,
    /// Frames with spectral flatness above this are treated as noise.
    pub flatness_max: f64,
    /// Width (frames) of the majority-vote smoother; 0 or 1 disables it.
    pub smoothing_frames: usize,
    /// Segments shorter than this are dropped.
    pub min_segment_ms: u32,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25,
            hop_ms: 10,
            energy_floor_db: -60.0,
            energy_margin_db: 6.0,
            flatness_max: 0.6,
            smoothing_frames: 5,
            min_segment_ms: 100,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_ms == 0 || self.frame_ms < self.hop_ms {
            return Err(Error::InvalidConfig(format!(
                "require frame_ms >= hop_ms > 0, got frame {} hop {}",
                self.frame_ms, self.hop_ms
            )));
        }
        Ok(())
    }
}

/// Detect speech regions. Returns non-overlapping, ordered segments (no
/// speaker attached) with boundaries on the `hop_ms` grid; silence yields an
/// empty list. Deterministic, and invariant to global amplitude scaling as
/// long as the signal stays above the configured energy floor.
pub fn detect_speech(signal: &AudioSignal, cfg: &VadConfig) -> Result<Vec<SpeechSegment>> {
    cfg.validate()?;
    let fs = signal.sample_rate as usize;
    let frame_len = (fs * cfg.frame_ms as usize) / 1000;
    let hop = (fs * cfg.hop_ms as usize) / 1000;
    if frame_len == 0 || hop == 0 {
        return Err(Error::InvalidConfig("frame shorter than one sample".into()));
    }
    if signal.len() < frame_len {
        return Ok(Vec::new());
    }
    let n_frames = (signal.len() - frame_len) / hop + 1;

    let energies: Vec<f64> = (0..n_frames)
        .map(|i| {
            let frame = &signal.samples[i * hop..i * hop + frame_len];
            let mean_sq =
                frame.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / frame_len as f64;
            10.0 * (mean_sq + 1e-12).log10()
        })
        .collect();

    let flatness = spectral_flatness(signal, frame_len, hop, n_frames);
    let threshold_db = energy_threshold(&energies, cfg);

    let raw: Vec<bool> = (0..n_frames)
        .map(|i| energies[i] >= threshold_db && flatness[i] <= cfg.flatness_max)
        .collect();
    let smoothed = majority_smooth(&raw, cfg.smoothing_frames);

    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=n_frames {
        let active = i < n_frames && smoothed[i];
        match (run_start, active) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                let start_ms = s as u64 * cfg.hop_ms as u64;
                let end_ms = i as u64 * cfg.hop_ms as u64;
                if end_ms - start_ms >= cfg.min_segment_ms as u64 {
                    segments.push(SpeechSegment::new(start_ms, end_ms));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(segments)
}

/// Noise-floor-relative threshold. When the frame energies are spread out,
/// the 10th percentile estimates the noise floor; when they are homogeneous
/// (all silence, or continuous speech) only the absolute floor separates the
/// two cases.
fn energy_threshold(energies: &[f64], cfg: &VadConfig) -> f64 {
    let mut sorted = energies.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
    let (p10, p90) = (p(0.10), p(0.90));
    let base = if p90 - p10 > 2.0 * cfg.energy_margin_db {
        p10.max(cfg.energy_floor_db)
    } else {
        cfg.energy_floor_db
    };
    base + cfg.energy_margin_db
}

/// Per-frame spectral flatness (geometric / arithmetic mean of the normalized
/// power spectrum, DC excluded). 1.0 for degenerate all-zero frames.
fn spectral_flatness(
    signal: &AudioSignal,
    frame_len: usize,
    hop: usize,
    n_frames: usize,
) -> Vec<f64> {
    let fft_len = frame_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let window: Vec<f64> = (0..frame_len)
        .map(|i| {
            let phase = std::f64::consts::TAU * i as f64 / frame_len as f64;
            0.5 - 0.5 * phase.cos()
        })
        .collect();

    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    (0..n_frames)
        .map(|i| {
            let frame = &signal.samples[i * hop..i * hop + frame_len];
            for (b, (s, w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
                *b = Complex::new(*s as f64 * w, 0.0);
            }
            for b in buf.iter_mut().skip(frame_len) {
                *b = Complex::new(0.0, 0.0);
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[1..=fft_len / 2].iter().map(|c| c.norm_sqr()).collect();
            let total: f64 = power.iter().sum();
            if total <= 0.0 {
                return 1.0;
            }
            let n = power.len() as f64;
            let log_gm = power.iter().map(|&p| (p / total + 1e-15).ln()).sum::<f64>() / n;
            log_gm.exp() * n
        })
        .collect()
}

fn majority_smooth(raw: &[bool], width: usize) -> Vec<bool> {
    if width <= 1 {
        return raw.to_vec();
    }
    let half = width / 2;
    (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(raw.len() - 1);
            let active = raw[lo..=hi].iter().filter(|&&a| a).count();
            2 * active > hi - lo + 1
        })
        .collect()
}
