//! Render a timeline into the paired two-channel recording fixture.
//!
//! Speech segments become band-limited noise bursts (speaker-distinct bands);
//! the landline channel carries both speakers plus background noise, the
//! cellphone channel carries the patient bursts only, shifted by a known
//! offset. The burst waveforms are shared across channels, so alignment by
//! cross-correlation has a real target.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioSignal;
use crate::timeline::{ConversationTimeline, Speaker};
use crate::Result;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RenderConfig {
    pub sample_rate: u32,
    /// Lag of the landline clock relative to the cellphone clock, samples.
    pub offset_samples: i64,
    /// Landline speech-to-background ratio in dB.
    pub snr_db: f64,
    /// Burst RMS amplitude.
    pub speech_amplitude: f32,
    pub patient_band_hz: (f64, f64),
    pub clinician_band_hz: (f64, f64),
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            offset_samples: 0,
            snr_db: 30.0,
            speech_amplitude: 0.25,
            patient_band_hz: (300.0, 2400.0),
            clinician_band_hz: (600.0, 3400.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedCall {
    pub patient_channel: AudioSignal,
    pub landline_channel: AudioSignal,
    pub true_offset_samples: i64,
}

/// Sum-of-sinusoids band noise with unit-RMS-per-amp normalization and short
/// linear ramps against spectral splatter.
fn burst(rng: &mut ChaCha8Rng, len: usize, rate: u32, band: (f64, f64), amp: f32) -> Vec<f32> {
    let n_tones = 24;
    let tones: Vec<(f64, f64)> = (0..n_tones)
        .map(|_| (rng.gen_range(band.0..band.1), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let norm = amp as f64 / (n_tones as f64 / 2.0).sqrt();
    let ramp = (rate as usize / 1000).max(1); // ~1 ms
    (0..len)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let v: f64 =
                tones.iter().map(|&(f, ph)| (std::f64::consts::TAU * f * t + ph).sin()).sum();
            let edge = (i + 1).min(len - i).min(ramp) as f64 / ramp as f64;
            (v * norm * edge) as f32
        })
        .collect()
}

pub fn render_audio(timeline: &ConversationTimeline, cfg: &RenderConfig) -> Result<RenderedCall> {
    let rate = cfg.sample_rate;
    let duration = (timeline.call_duration_ms * rate as u64 / 1000) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut patient_track = vec![0.0f32; duration];
    let mut landline = vec![0.0f32; duration];

    for turn in &timeline.turns {
        let band = match turn.speaker {
            Speaker::Patient => cfg.patient_band_hz,
            Speaker::Clinician => cfg.clinician_band_hz,
        };
        for seg in &turn.segments {
            let start = (seg.start_ms * rate as u64 / 1000) as usize;
            let end = ((seg.end_ms * rate as u64 / 1000) as usize).min(duration);
            if start >= end {
                continue;
            }
            let wave = burst(&mut rng, end - start, rate, band, cfg.speech_amplitude);
            for (i, &v) in wave.iter().enumerate() {
                landline[start + i] += v;
                if turn.speaker == Speaker::Patient {
                    patient_track[start + i] += v;
                }
            }
        }
    }

    // Background noise on the landline at the configured SNR; a quieter
    // independent floor on the cellphone.
    let noise_rms = cfg.speech_amplitude * 10f32.powf(-(cfg.snr_db as f32) / 20.0);
    for v in &mut landline {
        *v += rng.gen_range(-1.0f32..1.0) * noise_rms * 1.732;
    }
    let cell_noise = noise_rms / 3.0;

    // Cellphone clock: landline_time = cellphone_time + offset.
    let offset = cfg.offset_samples;
    let cell_len = (duration as i64 - offset).max(1) as usize;
    let mut cellphone = vec![0.0f32; cell_len];
    for (t, v) in cellphone.iter_mut().enumerate() {
        let land_t = t as i64 + offset;
        if land_t >= 0 && (land_t as usize) < duration {
            *v = patient_track[land_t as usize];
        }
        *v += rng.gen_range(-1.0f32..1.0) * cell_noise * 1.732;
    }

    Ok(RenderedCall {
        patient_channel: AudioSignal::new(cellphone, rate),
        landline_channel: AudioSignal::new(landline, rate),
        true_offset_samples: offset,
    })
}
