//! RIFF/WAVE ingest and output.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use corpusforge_core::audio::{AudioBuffer, AudioError};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{}: no such file", .0.display())]
    Missing(PathBuf),
    #[error("{path}: unsupported codec ({detail})")]
    Unsupported { path: String, detail: String },
    #[error("{0}: zero-length data chunk")]
    Empty(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed WAV: {detail}")]
    Malformed { path: String, detail: String },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

fn from_hound(path: &Path, e: hound::Error) -> WavError {
    let path = path.display().to_string();
    match e {
        hound::Error::IoError(source) => WavError::Io { path, source },
        hound::Error::Unsupported => WavError::Unsupported { path, detail: "not PCM or IEEE float".into() },
        other => WavError::Malformed { path, detail: other.to_string() },
    }
}

/// Reads 16-bit PCM or 32-bit float WAV as mono at `target_rate`.
pub fn read_wav(path: impl AsRef<Path>, target_rate: u32) -> Result<AudioBuffer, WavError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(WavError::Missing(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| WavError::Io { path: path.display().to_string(), source })?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| from_hound(path, e))?;
    let spec = reader.spec();
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| from_hound(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| from_hound(path, e))?,
        (fmt, bits) => {
            return Err(WavError::Unsupported {
                path: path.display().to_string(),
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    };
    if samples.is_empty() {
        return Err(WavError::Empty(path.display().to_string()));
    }
    let mono = AudioBuffer::from_interleaved(&samples, spec.channels as usize, spec.sample_rate)?;
    Ok(mono.resampled(target_rate)?)
}

/// Writes 16-bit PCM mono, clamping to `[-1, 1]` first.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), WavError> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let file = File::create(path).map_err(|source| WavError::Io { path: path.display().to_string(), source })?;
    let mut w = WavWriter::new(BufWriter::new(file), spec).map_err(|e| from_hound(path, e))?;
    for s in buffer.samples() {
        w.write_sample(quantize(*s)).map_err(|e| from_hound(path, e))?;
    }
    w.finalize().map_err(|e| from_hound(path, e))
}

pub fn quantize(s: f32) -> i16 {
    (s.clamp(-1.0, 1.0) as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}
