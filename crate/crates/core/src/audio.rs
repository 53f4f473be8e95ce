//! Single-channel PCM audio loading.

use std::path::Path;

use crate::{Error, Result};

/// A mono audio signal with samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> u64 {
        (self.samples.len() as u64 * 1000) / self.sample_rate as u64
    }
}

/// Load a single-channel linear-PCM WAV file.
///
/// Integer samples are normalized by the full scale of their bit depth
/// (e.g. 16-bit sample 32767 maps to 32767/32768); IEEE-float files are
/// passed through. Multi-channel files and non-PCM encodings are rejected
/// with distinct errors rather than silently downmixed.
pub fn load_audio<P: AsRef<Path>>(path: P) -> Result<AudioSignal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::AudioNotFound(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::MultiChannel { path: path.to_path_buf(), channels: spec.channels });
    }

    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => {
            reader.samples::<f32>().collect::<std::result::Result<_, _>>()?
        }
        (hound::SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1i64 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (format, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                detail: format!("{format:?} at {bits} bits per sample"),
            });
        }
    };

    Ok(AudioSignal::new(samples, spec.sample_rate))
}

/// Write a signal as 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn write_wav_i16<P: AsRef<Path>>(path: P, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}
