//! Cross-correlation alignment of the paired call recordings.
//!
//! The cellphone channel carries patient speech only; the landline channel
//! carries both speakers. The two recorders start at different instants, so
//! the patient content appears in both channels at a fixed relative lag. The
//! lag maximizing the cross-correlation (computed in the frequency domain,
//! searched within a bounded window) aligns the cellphone clock to the
//! landline clock: `landline_time = cellphone_time + offset_samples`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use crate::{Error, Result};

/// Bounds for the alignment search.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Search window half-width in seconds.
    pub max_lag_s: f64,
    /// Below this peak-to-runner-up ratio the result is flagged low confidence.
    pub min_peak_ratio: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { max_lag_s: 30.0, min_peak_ratio: 2.0 }
    }
}

/// Outcome of the alignment search.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Lag (in samples) that maps cellphone time onto landline time.
    pub offset_samples: i64,
    /// Peak correlation divided by the highest non-adjacent local maximum.
    pub peak_ratio: f64,
    /// Set when `peak_ratio < min_peak_ratio`; the offset is still reported.
    pub low_confidence: bool,
}

/// Estimate the lag of `landline` relative to `cellphone` by frequency-domain
/// cross-correlation, searching lags within `±max_lag_s`.
///
/// The returned argmax is identical to a brute-force time-domain scan of the
/// same window. `peak_ratio` compares the winning peak against the best local
/// maximum at least two samples away, as a confidence measure; low confidence
/// attaches a flag rather than failing.
pub fn estimate_offset(
    cellphone: &AudioSignal,
    landline: &AudioSignal,
    cfg: &AlignmentConfig,
) -> Result<AlignmentResult> {
    if cellphone.is_empty() || landline.is_empty() {
        return Err(Error::EmptySignal);
    }
    if cellphone.sample_rate != landline.sample_rate {
        return Err(Error::SampleRateMismatch(cellphone.sample_rate, landline.sample_rate));
    }

    let n_cell = cellphone.len();
    let n_land = landline.len();
    let max_lag = (cfg.max_lag_s * cellphone.sample_rate as f64).round() as i64;
    // Valid lags for the linear correlation c[k] = sum_t land[t]*cell[t-k].
    let lo = (-(n_cell as i64 - 1)).max(-max_lag);
    let hi = (n_land as i64 - 1).min(max_lag);
    if lo > hi {
        return Err(Error::SignalTooShort { got: n_cell.min(n_land), need: 1 });
    }

    // Linear correlation via zero-padded FFTs to the next power of two.
    let fft_len = (n_cell + n_land - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut land_buf: Vec<Complex<f64>> = landline
        .samples
        .iter()
        .map(|&s| Complex::new(s as f64, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    let mut cell_buf: Vec<Complex<f64>> = cellphone
        .samples
        .iter()
        .map(|&s| Complex::new(s as f64, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    fft.process(&mut land_buf);
    fft.process(&mut cell_buf);
    for (l, c) in land_buf.iter_mut().zip(&cell_buf) {
        *l *= c.conj();
    }
    ifft.process(&mut land_buf);
    let scale = 1.0 / fft_len as f64;
    // c[k] lives at index k mod fft_len.
    let corr_at = |k: i64| -> f64 {
        let idx = k.rem_euclid(fft_len as i64) as usize;
        land_buf[idx].re * scale
    };

    let lags: Vec<f64> = (lo..=hi).map(corr_at).collect();
    let (best_idx, &best) = lags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty lag window");
    let offset_samples = lo + best_idx as i64;

    let peak_ratio = runner_up_ratio(&lags, best_idx, best);
    Ok(AlignmentResult {
        offset_samples,
        peak_ratio,
        low_confidence: peak_ratio < cfg.min_peak_ratio,
    })
}

/// Ratio of the winning peak to the largest local maximum more than one
/// sample away from it.
fn runner_up_ratio(lags: &[f64], best_idx: usize, best: f64) -> f64 {
    if best <= 0.0 {
        return 0.0;
    }
    let mut runner_up = f64::NEG_INFINITY;
    for i in 0..lags.len() {
        if i.abs_diff(best_idx) <= 1 {
            continue;
        }
        let left_ok = i == 0 || lags[i - 1] <= lags[i];
        let right_ok = i + 1 == lags.len() || lags[i + 1] <= lags[i];
        if left_ok && right_ok && lags[i] > runner_up {
            runner_up = lags[i];
        }
    }
    if runner_up <= 0.0 {
        f64::INFINITY
    } else {
        best / runner_up
    }
}

/// Brute-force time-domain cross-correlation argmax over the same lag window.
/// Quadratic; intended as an independent check of [`estimate_offset`].
pub fn brute_force_offset(
    cellphone: &AudioSignal,
    landline: &AudioSignal,
    max_lag_s: f64,
) -> i64 {
    let n_cell = cellphone.len() as i64;
    let n_land = landline.len() as i64;
    let max_lag = (max_lag_s * cellphone.sample_rate as f64).round() as i64;
    let lo = (-(n_cell - 1)).max(-max_lag);
    let hi = (n_land - 1).min(max_lag);
    let mut best = f64::NEG_INFINITY;
    let mut best_k = lo;
    for k in lo..=hi {
        let t0 = k.max(0);
        let t1 = (n_land - 1).min(n_cell - 1 + k);
        let mut acc = 0.0f64;
        for t in t0..=t1 {
            acc += landline.samples[t as usize] as f64
                * cellphone.samples[(t - k) as usize] as f64;
        }
        if acc > best {
            best = acc;
            best_k = k;
        }
    }
    best_k
}

/// Delay a signal by `lag` samples (prepends zeros for positive lag, drops
/// leading samples for negative lag).
pub fn shift_signal(signal: &AudioSignal, lag: i64) -> AudioSignal {
    let samples = if lag >= 0 {
        let mut out = vec![0.0f32; lag as usize];
        out.extend_from_slice(&signal.samples);
        out
    } else {
        let drop = (-lag as usize).min(signal.samples.len());
        signal.samples[drop..].to_vec()
    };
    AudioSignal::new(samples, signal.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, rate: u32, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..len).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
        AudioSignal::new(samples, rate)
    }

    #[test]
    fn identical_signals_give_zero_offset() {
        let a = noise(4000, 8000, 1);
        let r = estimate_offset(&a, &a, &AlignmentConfig::default()).unwrap();
        assert_eq!(r.offset_samples, 0);
        assert!(!r.low_confidence);
    }

    #[test]
    fn delayed_copy_recovers_lag() {
        let a = noise(4000, 8000, 2);
        let delayed = shift_signal(&a, 800);
        let r = estimate_offset(&a, &delayed, &AlignmentConfig::default()).unwrap();
        assert_eq!(r.offset_samples, 800);
        assert_eq!(r.offset_samples, brute_force_offset(&a, &delayed, 1.0));
    }

    #[test]
    fn negative_lag_recovered() {
        let a = noise(4000, 8000, 3);
        let advanced = shift_signal(&a, -350);
        let r = estimate_offset(&a, &advanced, &AlignmentConfig::default()).unwrap();
        assert_eq!(r.offset_samples, -350);
    }

    #[test]
    fn independent_noise_is_low_confidence() {
        let a = noise(4000, 8000, 4);
        let b = noise(4000, 8000, 5);
        let r = estimate_offset(&a, &b, &AlignmentConfig::default()).unwrap();
        assert!(r.low_confidence, "peak ratio {} should be < 2", r.peak_ratio);
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let a = noise(100, 8000, 6);
        let b = noise(100, 16000, 7);
        assert!(matches!(
            estimate_offset(&a, &b, &AlignmentConfig::default()),
            Err(Error::SampleRateMismatch(8000, 16000))
        ));
    }

    #[test]
    fn matches_brute_force_on_random_pairs() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let a = noise(rng.gen_range(500..1500), 1000, seed);
            let lag = rng.gen_range(-400i64..400);
            let mut b = shift_signal(&a, lag);
            // Add independent noise so the peak is not exact-copy trivial.
            let mut nrng = ChaCha8Rng::seed_from_u64(seed + 999);
            for s in &mut b.samples {
                *s += nrng.gen_range(-0.05f32..0.05);
            }
            let fft = estimate_offset(&a, &b, &AlignmentConfig::default())
                .unwrap()
                .offset_samples;
            let brute = brute_force_offset(&a, &b, 30.0);
            assert_eq!(fft, brute, "seed {seed}");
            assert_eq!(fft, lag, "seed {seed}");
        }
    }
}
