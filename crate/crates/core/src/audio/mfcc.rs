use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fft::power_spectrum;
use super::AudioBuffer;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_coeffs: usize,
    pub n_mel_filters: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_coeffs: 13,
            n_mel_filters: 26,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn is_valid(&self) -> bool {
        self.n_coeffs >= 1
            && self.n_coeffs <= self.n_mel_filters
            && self.hop_ms > 0.0
            && self.frame_ms > self.hop_ms
            && self.log_floor > 0.0
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        math::round(self.frame_ms * sample_rate as f64 / 1000.0) as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        math::round(self.hop_ms * sample_rate as f64 / 1000.0) as usize
    }
}

/// Frame-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    data: Vec<f64>,
    n_frames: usize,
    n_coeffs: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl MfccMatrix {
    /// Builds a matrix from frame-major rows; all rows must share one width.
    pub fn from_rows(rows: &[Vec<f64>], frame_ms: f64, hop_ms: f64) -> Option<Self> {
        let n_coeffs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_coeffs) {
            return None;
        }
        Some(Self {
            data: rows.iter().flatten().copied().collect(),
            n_frames: rows.len(),
            n_coeffs,
            frame_ms,
            hop_ms,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_coeffs..(i + 1) * self.n_coeffs]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero width
        self.data.chunks_exact(self.n_coeffs.max(1)).take(self.n_frames)
    }
}

/// `floor((len - win) / hop) + 1` for `len >= win`, else 0.
pub fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if win == 0 || hop == 0 || len < win {
        0
    } else {
        (len - win) / hop + 1
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * math::log10(1.0 + hz / 700.0)
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (math::powf(10.0, mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale spanning 0 Hz to Nyquist,
/// evaluated at the exact bin frequencies.
fn mel_filterbank(n_filters: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis rows `0..n_out` for inputs of length `n_in`.
fn dct_basis(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                math::sqrt(1.0 / n_in as f64)
            } else {
                math::sqrt(2.0 / n_in as f64)
            };
            (0..n_in)
                .map(|n| scale * math::cos(PI * k as f64 * (n as f64 + 0.5) / n_in as f64))
                .collect()
        })
        .collect()
}

/// Pre-emphasis, Hamming window, power spectrum, mel filterbank, floored log
/// and orthonormal DCT-II; the first `n_coeffs` cepstra are kept.
///
/// Buffers shorter than one window yield an empty matrix.
pub fn mfcc(buffer: &AudioBuffer, config: &MfccConfig) -> MfccMatrix {
    let rate = buffer.sample_rate();
    let win = config.window_len(rate);
    let hop = config.hop_len(rate);
    let samples = buffer.samples();
    let n_frames = frame_count(samples.len(), win, hop);
    let mut out = MfccMatrix {
        data: Vec::with_capacity(n_frames * config.n_coeffs),
        n_frames,
        n_coeffs: config.n_coeffs,
        frame_ms: config.frame_ms,
        hop_ms: config.hop_ms,
    };
    if n_frames == 0 {
        return out;
    }

    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0] as f64);
    for w in samples.windows(2) {
        emphasized.push(w[1] as f64 - config.pre_emphasis * w[0] as f64);
    }

    let n_fft = win.next_power_of_two();
    let hamming: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * math::cos(2.0 * PI * n as f64 / (win as f64 - 1.0)))
        .collect();
    let filters = mel_filterbank(config.n_mel_filters, n_fft, rate);
    let dct = dct_basis(config.n_coeffs, config.n_mel_filters);

    let mut frame = vec![0.0; win];
    let mut log_mel = vec![0.0; config.n_mel_filters];
    for f in 0..n_frames {
        let start = f * hop;
        for (i, slot) in frame.iter_mut().enumerate() {
            *slot = emphasized[start + i] * hamming[i];
        }
        let power: Vec<f64> =
            power_spectrum(&frame, n_fft).into_iter().map(|p| p / n_fft as f64).collect();
        for (slot, filt) in log_mel.iter_mut().zip(&filters) {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            *slot = math::ln(e.max(config.log_floor));
        }
        for row in &dct {
            out.data.push(row.iter().zip(&log_mel).map(|(b, x)| b * x).sum());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::CANONICAL_RATE;

    fn tone(freq: f64, seconds: f64) -> AudioBuffer {
        let n = (seconds * CANONICAL_RATE as f64) as usize;
        let s = (0..n)
            .map(|i| (0.5 * libm::sin(2.0 * PI * freq * i as f64 / CANONICAL_RATE as f64)) as f32)
            .collect();
        AudioBuffer::new(s, CANONICAL_RATE).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let m = mfcc(&AudioBuffer::silence(16_000, CANONICAL_RATE), &MfccConfig::default());
        assert_eq!(m.n_frames(), 98);
        assert_eq!(m.n_coeffs(), 13);
    }

    #[test]
    fn short_buffer_is_empty() {
        let m = mfcc(&AudioBuffer::silence(399, CANONICAL_RATE), &MfccConfig::default());
        assert!(m.is_empty());
        assert_eq!(m.frames().count(), 0);
    }

    #[test]
    fn silence_frames_are_identical_floor_vectors() {
        let cfg = MfccConfig::default();
        let m = mfcc(&AudioBuffer::silence(4000, CANONICAL_RATE), &cfg);
        let first = m.frame(0).to_vec();
        assert!(m.frames().all(|f| f == first.as_slice()));
        // DCT of a constant ln(floor) vector: only c0 is non-zero
        let expected_c0 = libm::log(cfg.log_floor) * libm::sqrt(cfg.n_mel_filters as f64);
        assert!((first[0] - expected_c0).abs() < 1e-9);
        assert!(first[1..].iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn deterministic() {
        let b = tone(440.0, 0.3);
        let cfg = MfccConfig::default();
        assert_eq!(mfcc(&b, &cfg), mfcc(&b, &cfg));
    }

    #[test]
    fn config_validity() {
        assert!(MfccConfig::default().is_valid());
        assert!(!MfccConfig { n_coeffs: 30, ..Default::default() }.is_valid());
        assert!(!MfccConfig { hop_ms: 30.0, ..Default::default() }.is_valid());
    }
}
