//! Mono PCM buffers, resampling and MFCC features.

mod fft;
mod mfcc;
mod resample;

use alloc::vec::Vec;
use core::fmt;

pub use fft::{power_spectrum, Complex};
pub use mfcc::{frame_count, mfcc, MfccConfig, MfccMatrix};
pub use resample::{resample, SINC_TAPS};

/// Every ingest path converts to this rate.
pub const CANONICAL_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub enum AudioError {
    /// A sample was NaN, infinite or outside `[-1, 1]`.
    SampleOutOfRange { index: usize, value: f32 },
    ZeroSampleRate,
}

impl fmt::Display for AudioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AudioError::SampleOutOfRange { index, value } => {
                write!(f, "sample {index} out of range: {value}")
            }
            AudioError::ZeroSampleRate => f.write_str("sample rate must be positive"),
        }
    }
}

impl core::error::Error for AudioError {}

/// Mono audio with every sample in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self { samples, sample_rate })
    }

    /// Builds a buffer, clamping out-of-range samples and zeroing NaN.
    pub fn clamped(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        for s in &mut samples {
            *s = if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) };
        }
        Self::new(samples, sample_rate)
    }

    pub fn silence(n_samples: usize, sample_rate: u32) -> Self {
        Self { samples: alloc::vec![0.0; n_samples], sample_rate }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of `[start, end)`, clipped to the buffer.
    pub fn slice(&self, start: usize, end: usize) -> AudioBuffer {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        AudioBuffer { samples: self.samples[start..end].to_vec(), sample_rate: self.sample_rate }
    }

    /// Converts to `target_rate` with the windowed-sinc resampler.
    pub fn resampled(&self, target_rate: u32) -> Result<AudioBuffer, AudioError> {
        if target_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let out = resample(&self.samples, self.sample_rate, target_rate);
        AudioBuffer::clamped(out, target_rate)
    }

    /// Averages interleaved channels to mono.
    pub fn from_interleaved(
        interleaved: &[f32],
        channels: usize,
        sample_rate: u32,
    ) -> Result<AudioBuffer, AudioError> {
        let channels = channels.max(1);
        let mono = interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect();
        AudioBuffer::clamped(mono, sample_rate)
    }
}
