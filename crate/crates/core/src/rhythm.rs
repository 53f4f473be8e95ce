//! Speech-rhythm descriptors from the amplitude envelope.
//!
//! Front end: band-pass the signal to the speech band, rectify, low-pass,
//! and downsample to a slow envelope. Windowed analysis then yields seven
//! descriptors per window (power, envelope-spectrum shape, modulation peak,
//! and inter-peak regularity), and ten call-level statistics per descriptor
//! give the 70-dimensional rhythm vector. The descriptor set is a documented
//! stand-in for the published algorithm this pipeline references; only the
//! descriptor categories (power distribution, rate, stability) are shared.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use crate::csvfmt::fmt_g6;
use crate::{Error, Result};

pub const N_DESCRIPTORS: usize = 7;
pub const N_STATISTICS: usize = 10;
pub const N_RHYTHM_FEATURES: usize = N_DESCRIPTORS * N_STATISTICS;

pub const RHYTHM_STAT_NAMES: [&str; N_STATISTICS] = [
    "mean", "sd", "kurtosis", "skewness", "max", "loc_max", "min", "loc_min", "slope", "rmse",
];

/// Column names `d{1..7}_{stat}` in output order (descriptor-major).
pub fn rhythm_feature_names() -> Vec<String> {
    (1..=N_DESCRIPTORS)
        .flat_map(|d| RHYTHM_STAT_NAMES.iter().map(move |s| format!("d{d}_{s}")))
        .collect()
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RhythmConfig {
    /// Speech band-pass edges applied before rectification.
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Envelope low-pass cutoff.
    pub envelope_lp_hz: f64,
    /// Envelope sample rate after decimation.
    pub envelope_rate_hz: f64,
    /// Analysis window and hop over the envelope, in seconds.
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for RhythmConfig {
    fn default() -> Self {
        Self {
            band_low_hz: 400.0,
            band_high_hz: 4000.0,
            envelope_lp_hz: 10.0,
            envelope_rate_hz: 80.0,
            window_s: 4.0,
            hop_s: 2.0,
        }
    }
}

/// Slow non-negative amplitude envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub rate_hz: f64,
}

/// Windowed 7-descriptor series.
#[derive(Debug, Clone, PartialEq)]
pub struct RhythmFrameSeries {
    pub frames: Vec<[f64; N_DESCRIPTORS]>,
    pub window_s: f64,
    pub hop_s: f64,
}

/// The 70 call-level rhythm statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RhythmFeatureVector {
    pub call_id: String,
    pub values: Vec<f64>,
}

/// Band-pass, rectify, low-pass, and decimate the signal into its amplitude
/// envelope. Polarity-invariant and non-negative.
pub fn amplitude_envelope(signal: &AudioSignal, cfg: &RhythmConfig) -> Result<Envelope> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let fs = signal.sample_rate as f64;
    let decim = (fs / cfg.envelope_rate_hz).round().max(1.0) as usize;
    if signal.len() < decim {
        return Err(Error::SignalTooShort { got: signal.len(), need: decim });
    }
    let rate_hz = fs / decim as f64;

    let mut x: Vec<f64> = signal.samples.iter().map(|&s| s as f64).collect();
    Biquad::highpass(cfg.band_low_hz, fs).run(&mut x);
    // Skip the upper edge when it sits at or above Nyquist (e.g. 8 kHz input).
    if cfg.band_high_hz < 0.49 * fs {
        Biquad::lowpass(cfg.band_high_hz, fs).run(&mut x);
    }
    for v in &mut x {
        *v = v.abs();
    }
    Biquad::lowpass(cfg.envelope_lp_hz, fs).run(&mut x);

    let values: Vec<f64> = x.iter().step_by(decim).map(|&v| v.max(0.0)).collect();
    Ok(Envelope { values, rate_hz })
}

/// Second-order (RBJ biquad) Butterworth section, direct form II transposed.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff_hz: f64, fs: f64) -> Self {
        let w0 = std::f64::consts::TAU * cutoff_hz / fs;
        // Butterworth Q = 1/sqrt(2).
        let alpha = w0.sin() * std::f64::consts::FRAC_1_SQRT_2;
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - cosw) / 2.0 / a0, (1.0 - cosw) / a0, (1.0 - cosw) / 2.0 / a0],
            a: [-2.0 * cosw / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(cutoff_hz: f64, fs: f64) -> Self {
        let w0 = std::f64::consts::TAU * cutoff_hz / fs;
        let alpha = w0.sin() * std::f64::consts::FRAC_1_SQRT_2;
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + cosw) / 2.0 / a0, -(1.0 + cosw) / a0, (1.0 + cosw) / 2.0 / a0],
            a: [-2.0 * cosw / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0f64, 0.0f64);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// Compute the 7 descriptors per analysis window:
/// 1. total envelope power (mean square, time domain)
/// 2. spectral centroid of the envelope spectrum in Hz (DC excluded)
/// 3. peak frequency in 0.5–10 Hz
/// 4. normalized peak power (peak bin / total, DC excluded)
/// 5. spectral entropy of the normalized envelope spectrum (nats)
/// 6. fraction of envelope-spectrum power in 1–3 Hz
/// 7. coefficient of variation of inter-peak intervals of the envelope
///
/// Degenerate (constant/silent) windows map spectral descriptors to 0.
pub fn rhythm_frames(envelope: &Envelope, cfg: &RhythmConfig) -> Result<RhythmFrameSeries> {
    let win = (cfg.window_s * envelope.rate_hz).round() as usize;
    let hop = (cfg.hop_s * envelope.rate_hz).round().max(1.0) as usize;
    if win < 4 {
        return Err(Error::InvalidConfig("rhythm window shorter than 4 envelope samples".into()));
    }
    if envelope.values.len() < win {
        return Err(Error::EnvelopeTooShort { got: envelope.values.len(), need: win });
    }

    let fft_len = win.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / win as f64).cos())
        .collect();
    let bin_hz = envelope.rate_hz / fft_len as f64;

    let n_frames = (envelope.values.len() - win) / hop + 1;
    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for f in 0..n_frames {
        let window = &envelope.values[f * hop..f * hop + win];
        let power = window.iter().map(|v| v * v).sum::<f64>() / win as f64;
        let mean = window.iter().sum::<f64>() / win as f64;

        for (b, (v, w)) in buf.iter_mut().zip(window.iter().zip(&hann)) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        for b in buf.iter_mut().skip(win) {
            *b = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        let spectrum: Vec<f64> = buf[1..=fft_len / 2].iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = spectrum.iter().sum();

        // Degenerate threshold relative to the envelope scale: mean removal
        // of a constant window leaves rounding residue, not signal.
        let floor = 1e-20 * (mean * mean * win as f64).max(1e-280);
        let (centroid, peak_freq, peak_power, entropy, band_frac) = if total > floor {
            let centroid = spectrum
                .iter()
                .enumerate()
                .map(|(k, p)| (k + 1) as f64 * bin_hz * p)
                .sum::<f64>()
                / total;
            let mut peak_freq = 0.0;
            let mut peak_val = 0.0;
            for (k, &p) in spectrum.iter().enumerate() {
                let freq = (k + 1) as f64 * bin_hz;
                if (0.5..=10.0).contains(&freq) && p > peak_val {
                    peak_val = p;
                    peak_freq = freq;
                }
            }
            let entropy = -spectrum
                .iter()
                .map(|&p| {
                    let q = p / total;
                    if q > 0.0 {
                        q * q.ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>();
            let band_frac = spectrum
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let freq = (*k + 1) as f64 * bin_hz;
                    (1.0..=3.0).contains(&freq)
                })
                .map(|(_, &p)| p)
                .sum::<f64>()
                / total;
            (centroid, peak_freq, peak_val / total, entropy, band_frac)
        } else {
            (0.0, 0.0, 0.0, 0.0, 0.0)
        };

        frames.push([
            power,
            centroid,
            peak_freq,
            peak_power,
            entropy,
            band_frac,
            inter_peak_cv(window, mean),
        ]);
    }
    Ok(RhythmFrameSeries { frames, window_s: cfg.window_s, hop_s: cfg.hop_s })
}

/// Coefficient of variation of the intervals between local envelope maxima
/// that rise above the window mean. 0 when fewer than two intervals exist.
fn inter_peak_cv(window: &[f64], mean: f64) -> f64 {
    let mut peaks = Vec::new();
    for i in 1..window.len().saturating_sub(1) {
        if window[i] > window[i - 1] && window[i] >= window[i + 1] && window[i] > mean {
            peaks.push(i as f64);
        }
    }
    if peaks.len() < 3 {
        return 0.0;
    }
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let m = crate::dialogue::mean(&intervals);
    if m <= 0.0 {
        return 0.0;
    }
    crate::dialogue::sample_sd(&intervals) / m
}

/// Reduce a frame series to the 70 call-level statistics: per descriptor the
/// mean, sample SD, excess kurtosis, skewness, max, normalized location of
/// max, min, normalized location of min, least-squares slope against
/// normalized time in [0,1], and regression RMSE.
pub fn call_statistics(call_id: &str, series: &RhythmFrameSeries) -> Result<RhythmFeatureVector> {
    let n = series.frames.len();
    if n < 2 {
        return Err(Error::TooFewFrames(n));
    }
    let mut values = Vec::with_capacity(N_RHYTHM_FEATURES);
    for d in 0..N_DESCRIPTORS {
        let y: Vec<f64> = series.frames.iter().map(|f| f[d]).collect();
        values.extend_from_slice(&descriptor_statistics(&y));
    }
    Ok(RhythmFeatureVector { call_id: call_id.to_string(), values })
}

fn descriptor_statistics(y: &[f64]) -> [f64; N_STATISTICS] {
    let n = y.len();
    let mean = crate::dialogue::mean(y);
    let sd = crate::dialogue::sample_sd(y);

    // Population central moments for shape statistics; zero-variance series
    // floor both at 0.
    let m2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let (skewness, kurtosis) = if m2 > 0.0 {
        let m3 = y.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n as f64;
        let m4 = y.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let mut max_val = f64::NEG_INFINITY;
    let mut max_idx = 0usize;
    let mut min_val = f64::INFINITY;
    let mut min_idx = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v > max_val {
            max_val = v;
            max_idx = i;
        }
        if v < min_val {
            min_val = v;
            min_idx = i;
        }
    }
    let denom = (n - 1) as f64;
    let loc_max = max_idx as f64 / denom;
    let loc_min = min_idx as f64 / denom;

    // Least squares against normalized time t_i = i/(n-1).
    let t: Vec<f64> = (0..n).map(|i| i as f64 / denom).collect();
    let t_mean = crate::dialogue::mean(&t);
    let stt: f64 = t.iter().map(|v| (v - t_mean).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(tv, yv)| (tv - t_mean) * (yv - mean)).sum();
    let slope = sty / stt;
    let intercept = mean - slope * t_mean;
    let rmse = (t
        .iter()
        .zip(y)
        .map(|(tv, yv)| {
            let r = yv - (intercept + slope * tv);
            r * r
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();

    [mean, sd, kurtosis, skewness, max_val, loc_max, min_val, loc_min, slope, rmse]
}

pub fn rhythm_csv_header() -> String {
    format!("call_id,{}", rhythm_feature_names().join(","))
}

pub fn write_rhythm_csv<W: Write>(mut w: W, rows: &[RhythmFeatureVector]) -> Result<()> {
    writeln!(w, "{}", rhythm_csv_header())?;
    for row in rows {
        debug_assert_eq!(row.values.len(), N_RHYTHM_FEATURES);
        let values: Vec<String> = row.values.iter().map(|&v| fmt_g6(v)).collect();
        writeln!(w, "{},{}", row.call_id, values.join(","))?;
    }
    Ok(())
}

/// Read a rhythm CSV produced by [`write_rhythm_csv`] (or the simulator).
pub fn read_rhythm_csv<P: AsRef<std::path::Path>>(path: P) -> Result<Vec<RhythmFeatureVector>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let expected = rhythm_csv_header();
    let got = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != expected {
        return Err(Error::CsvSchema {
            path: path.to_path_buf(),
            detail: "rhythm CSV header mismatch".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut values = Vec::with_capacity(N_RHYTHM_FEATURES);
        for field in record.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(|_| Error::CsvSchema {
                path: path.to_path_buf(),
                detail: format!("bad number {field:?}"),
            })?);
        }
        if values.len() != N_RHYTHM_FEATURES {
            return Err(Error::CsvSchema {
                path: path.to_path_buf(),
                detail: format!("expected {N_RHYTHM_FEATURES} values, got {}", values.len()),
            });
        }
        rows.push(RhythmFeatureVector { call_id: record[0].to_string(), values });
    }
    Ok(rows)
}
