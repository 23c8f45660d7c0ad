//! Speech segmentation with a padded sliding-window trigger/detrigger
//! collector over per-frame voiced decisions.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use crate::audio::{power_spectrum, AudioBuffer};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum VadError {
    /// Frame length is not 10, 20 or 30 ms at the given rate.
    FrameLength { len: usize, sample_rate: u32 },
    Aggressiveness(u8),
    Config(&'static str),
}

impl fmt::Display for VadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VadError::FrameLength { len, sample_rate } => {
                write!(f, "frame of {len} samples is not 10/20/30 ms at {sample_rate} Hz")
            }
            VadError::Aggressiveness(a) => write!(f, "aggressiveness {a} not in 0..=3"),
            VadError::Config(msg) => write!(f, "invalid vad config: {msg}"),
        }
    }
}

impl core::error::Error for VadError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    pub aggressiveness: u8,
    pub frame_ms: u32,
    pub padding_ms: u32,
    pub trigger_ratio: f64,
    pub min_chunk_s: f64,
    pub max_chunk_s: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            aggressiveness: 2,
            frame_ms: 30,
            padding_ms: 300,
            trigger_ratio: 0.9,
            min_chunk_s: 1.0,
            max_chunk_s: 15.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<(), VadError> {
        if self.aggressiveness > 3 {
            return Err(VadError::Aggressiveness(self.aggressiveness));
        }
        if ![10, 20, 30].contains(&self.frame_ms) {
            return Err(VadError::Config("frame_ms must be 10, 20 or 30"));
        }
        if self.padding_ms == 0 || !self.padding_ms.is_multiple_of(self.frame_ms) {
            return Err(VadError::Config("padding_ms must be a positive multiple of frame_ms"));
        }
        if !(self.trigger_ratio > 0.0 && self.trigger_ratio <= 1.0) {
            return Err(VadError::Config("trigger_ratio must be in (0, 1]"));
        }
        if !(self.min_chunk_s > 0.0 && self.min_chunk_s * 2.0 <= self.max_chunk_s) {
            return Err(VadError::Config("need 0 < min_chunk_s and 2 * min_chunk_s <= max_chunk_s"));
        }
        Ok(())
    }

    pub fn window_frames(&self) -> usize {
        (self.padding_ms / self.frame_ms) as usize
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (sample_rate as usize * self.frame_ms as usize) / 1000
    }
}

/// Half-open sample range `[start_sample, end_sample)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VoicedSpan {
    pub start_sample: usize,
    pub end_sample: usize,
}

impl VoicedSpan {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }
}

/// Per-aggressiveness thresholds. A frame is voiced when its level is above
/// `min_energy_db` and its spectral flatness is below `max_flatness`; both
/// tighten monotonically with aggressiveness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePreset {
    pub min_energy_db: f64,
    pub max_flatness: f64,
}

pub const PRESETS: [FramePreset; 4] = [
    FramePreset { min_energy_db: -55.0, max_flatness: 0.50 },
    FramePreset { min_energy_db: -50.0, max_flatness: 0.42 },
    FramePreset { min_energy_db: -45.0, max_flatness: 0.35 },
    FramePreset { min_energy_db: -40.0, max_flatness: 0.28 },
];

/// Level and spectral flatness of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFeatures {
    /// Mean power in dB relative to full scale.
    pub energy_db: f64,
    /// Geometric over arithmetic mean of the power spectrum between
    /// 100 Hz and 4 kHz; 1.0 for flat (noise-like) spectra.
    pub flatness: f64,
}

pub fn frame_features(frame: &[f32], sample_rate: u32) -> FrameFeatures {
    let n = frame.len().max(1);
    let mean_power = frame.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / n as f64;
    let energy_db = 10.0 * math::log10(mean_power + 1e-12);

    let n_fft = frame.len().next_power_of_two().max(2);
    let x: Vec<f64> = frame.iter().map(|&s| s as f64).collect();
    let power = power_spectrum(&x, n_fft);
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let lo = ((100.0 / bin_hz) as usize).max(1);
    let hi = ((4000.0 / bin_hz) as usize).min(power.len() - 1);
    let band = &power[lo..=hi.max(lo)];
    let eps = 1e-20;
    let log_mean = band.iter().map(|p| math::ln(p + eps)).sum::<f64>() / band.len() as f64;
    let arith = band.iter().sum::<f64>() / band.len() as f64 + eps;
    FrameFeatures { energy_db, flatness: math::exp(log_mean) / arith }
}

/// Voiced/unvoiced decision for one 10, 20 or 30 ms frame.
pub fn classify_frame(frame: &[f32], sample_rate: u32, aggressiveness: u8) -> Result<bool, VadError> {
    if aggressiveness > 3 {
        return Err(VadError::Aggressiveness(aggressiveness));
    }
    let valid = [10usize, 20, 30]
        .iter()
        .any(|ms| frame.len() * 1000 == ms * sample_rate as usize);
    if !valid {
        return Err(VadError::FrameLength { len: frame.len(), sample_rate });
    }
    let preset = PRESETS[aggressiveness as usize];
    let feats = frame_features(frame, sample_rate);
    Ok(feats.energy_db > preset.min_energy_db && feats.flatness < preset.max_flatness)
}

/// Runs the classifier over consecutive whole frames.
pub fn frame_decisions(buffer: &AudioBuffer, config: &VadConfig) -> Result<Vec<bool>, VadError> {
    config.validate()?;
    let frame_len = config.frame_len(buffer.sample_rate());
    buffer
        .samples()
        .chunks_exact(frame_len)
        .map(|f| classify_frame(f, buffer.sample_rate(), config.aggressiveness))
        .collect()
}

/// Half-open frame range produced by the collector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
    /// True when the span was still open at the end of the input.
    pub open_at_end: bool,
}

/// The two-state ring-buffer automaton.
///
/// Not triggered: once more than `ratio * window` frames in the ring are
/// voiced, a span opens at the oldest frame in the ring. Triggered: once at
/// least `ratio * window` frames in the ring are unvoiced, the span closes
/// just after the last voiced frame in the ring. The ring is cleared on every
/// transition.
pub fn collect_frame_spans(decisions: &[bool], window: usize, ratio: f64) -> Vec<FrameSpan> {
    let window = window.max(1);
    let threshold = ratio * window as f64;
    let mut ring: VecDeque<(usize, bool)> = VecDeque::with_capacity(window);
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &voiced) in decisions.iter().enumerate() {
        if ring.len() == window {
            ring.pop_front();
        }
        ring.push_back((i, voiced));
        match open {
            None => {
                let n_voiced = ring.iter().filter(|(_, v)| *v).count();
                if n_voiced as f64 > threshold {
                    open = Some(ring[0].0);
                    ring.clear();
                }
            }
            Some(start) => {
                let n_unvoiced = ring.iter().filter(|(_, v)| !*v).count();
                if n_unvoiced as f64 >= threshold {
                    let end = ring
                        .iter()
                        .rev()
                        .find(|(_, v)| *v)
                        .map_or(ring[0].0, |(idx, _)| idx + 1)
                        .max(start + 1);
                    spans.push(FrameSpan { start, end, open_at_end: false });
                    open = None;
                    ring.clear();
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(FrameSpan { start, end: decisions.len(), open_at_end: true });
    }
    spans
}

/// Voiced spans of `buffer` in sample coordinates. A span still open at the
/// end of the audio is closed at the last sample.
pub fn collect_spans(buffer: &AudioBuffer, config: &VadConfig) -> Result<Vec<VoicedSpan>, VadError> {
    let decisions = frame_decisions(buffer, config)?;
    Ok(spans_from_decisions(&decisions, buffer.len(), config.frame_len(buffer.sample_rate()), config))
}

pub fn spans_from_decisions(
    decisions: &[bool],
    n_samples: usize,
    frame_len: usize,
    config: &VadConfig,
) -> Vec<VoicedSpan> {
    collect_frame_spans(decisions, config.window_frames(), config.trigger_ratio)
        .into_iter()
        .map(|s| VoicedSpan {
            start_sample: s.start * frame_len,
            end_sample: if s.open_at_end { n_samples } else { (s.end * frame_len).min(n_samples) },
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// A chunk cut from the source buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub span: VoicedSpan,
    pub audio: AudioBuffer,
}

/// Result of [`chunk`]: emitted chunks and spans dropped as too short.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chunking {
    pub chunks: Vec<Chunk>,
    pub too_short: Vec<VoicedSpan>,
}

/// Enforces the chunk duration bounds: short spans are dropped, long spans
/// are split recursively at the lowest-energy frame of their middle third.
pub fn chunk(buffer: &AudioBuffer, spans: &[VoicedSpan], config: &VadConfig) -> Chunking {
    let rate = buffer.sample_rate() as f64;
    let frame_len = config.frame_len(buffer.sample_rate()).max(1);
    let mut out = Chunking::default();
    for span in spans {
        let mut pieces = Vec::new();
        split_long(buffer.samples(), *span, config.max_chunk_s, rate, frame_len, &mut pieces);
        for piece in pieces {
            if (piece.len() as f64) / rate < config.min_chunk_s {
                out.too_short.push(piece);
            } else {
                out.chunks.push(Chunk {
                    span: piece,
                    audio: buffer.slice(piece.start_sample, piece.end_sample),
                });
            }
        }
    }
    out
}

fn split_long(
    samples: &[f32],
    span: VoicedSpan,
    max_s: f64,
    rate: f64,
    frame_len: usize,
    out: &mut Vec<VoicedSpan>,
) {
    if (span.len() as f64) / rate <= max_s {
        out.push(span);
        return;
    }
    let cut = min_energy_cut(samples, span, frame_len);
    split_long(samples, VoicedSpan { start_sample: span.start_sample, end_sample: cut }, max_s, rate, frame_len, out);
    split_long(samples, VoicedSpan { start_sample: cut, end_sample: span.end_sample }, max_s, rate, frame_len, out);
}

/// Centre of the lowest-energy frame whose centre lies in the middle third
/// of `span`; the first such frame wins ties.
fn min_energy_cut(samples: &[f32], span: VoicedSpan, frame_len: usize) -> usize {
    let third = span.len() / 3;
    let lo = span.start_sample + third;
    let hi = span.end_sample - third;
    let half = frame_len / 2;
    let mut best = (f64::INFINITY, (lo + hi) / 2);
    let mut start = lo.saturating_sub(half).max(span.start_sample);
    while start + frame_len <= span.end_sample && start + half <= hi {
        let centre = start + half;
        if centre >= lo {
            let e: f64 = samples[start..start + frame_len].iter().map(|&s| (s as f64) * (s as f64)).sum();
            if e < best.0 {
                best = (e, centre);
            }
        }
        start += frame_len / 2;
    }
    best.1.clamp(lo, hi)
}
