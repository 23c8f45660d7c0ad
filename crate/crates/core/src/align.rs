//! Forced alignment: render the transcript fragments, warp their MFCCs onto
//! the real recording with DTW and read fragment boundaries off the path.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::audio::{mfcc, AudioBuffer, MfccConfig, MfccMatrix, CANONICAL_RATE};
use crate::math;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const TONE_MS: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AlignError {
    NoFragments,
    EmptyFragment(String),
    Provider(String),
    CoeffMismatch { a: usize, b: usize },
    EmptyFeatures,
    BandTooNarrow,
}

impl fmt::Display for AlignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoFragments => f.write_str("no fragments to synthesize"),
            Self::EmptyFragment(id) => write!(f, "fragment {id} has empty text"),
            Self::Provider(msg) => write!(f, "synthesis failed: {msg}"),
            Self::CoeffMismatch { a, b } => write!(f, "coefficient count mismatch: {a} vs {b}"),
            Self::EmptyFeatures => f.write_str("feature sequence is empty"),
            Self::BandTooNarrow => f.write_str("band excludes every path"),
        }
    }
}

impl core::error::Error for AlignError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextFragment {
    pub id: String,
    pub text: String,
}

impl TextFragment {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), text: text.into() }
    }
}

/// Anything that can turn text into audio.
pub trait SynthesisProvider {
    fn name(&self) -> &str;
    fn render(&self, text: &str) -> Result<AudioBuffer, AlignError>;
}

impl<T: SynthesisProvider + ?Sized> SynthesisProvider for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn render(&self, text: &str) -> Result<AudioBuffer, AlignError> {
        (**self).render(text)
    }
}

/// Hermetic provider: every character becomes an 80 ms two-tone chord
/// (one low, one high frequency, DTMF style) chosen from its code point;
/// spaces are silence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToneCode {
    pub sample_rate: u32,
}

impl Default for ToneCode {
    fn default() -> Self {
        Self { sample_rate: CANONICAL_RATE }
    }
}

const LOW_TONES: (f64, f64) = (200.0, 1100.0);
const HIGH_TONES: (f64, f64) = (1400.0, 5000.0);
const TONES_PER_GROUP: u64 = 8;

fn mel(f: f64) -> f64 {
    2595.0 * math::log10(1.0 + f / 700.0)
}

fn mel_spaced(range: (f64, f64), k: u64) -> f64 {
    let (lo, hi) = (mel(range.0), mel(range.1));
    let m = lo + (hi - lo) * k as f64 / (TONES_PER_GROUP - 1) as f64;
    700.0 * (math::powf(10.0, m / 2595.0) - 1.0)
}

impl ToneCode {
    /// Chord index in `0..64`, or `None` for whitespace.
    pub fn code(c: char) -> Option<u64> {
        if c.is_whitespace() {
            None
        } else {
            Some((c as u64 * 37) % (TONES_PER_GROUP * TONES_PER_GROUP))
        }
    }

    /// The (low, high) chord frequencies in Hz.
    pub fn frequencies(c: char) -> Option<(f64, f64)> {
        Self::code(c).map(|k| {
            (mel_spaced(LOW_TONES, k / TONES_PER_GROUP), mel_spaced(HIGH_TONES, k % TONES_PER_GROUP))
        })
    }

    /// Renders with an explicit duration per character, for building test
    /// recordings with known timing.
    pub fn render_timed(&self, text: &str, durations_ms: &[f64]) -> Vec<f32> {
        let rate = self.sample_rate as f64;
        let fade = (0.005 * rate) as usize;
        let mut out = Vec::new();
        for (c, ms) in text.chars().zip(durations_ms) {
            let n = math::round(ms * rate / 1000.0) as usize;
            match Self::frequencies(c) {
                None => out.extend(core::iter::repeat_n(0.0, n)),
                Some((lo, hi)) => out.extend((0..n).map(|i| {
                    let ramp = (i.min(n - 1 - i) as f64 / fade.max(1) as f64).min(1.0);
                    let t = i as f64 / rate;
                    (0.25 * ramp * (math::sin(2.0 * PI * lo * t) + math::sin(2.0 * PI * hi * t))) as f32
                })),
            }
        }
        out
    }
}

impl SynthesisProvider for ToneCode {
    fn name(&self) -> &str {
        "tone-code"
    }

    fn render(&self, text: &str) -> Result<AudioBuffer, AlignError> {
        let durations = vec![TONE_MS; text.chars().count()];
        AudioBuffer::clamped(self.render_timed(text, &durations), self.sample_rate)
            .map_err(|e| AlignError::Provider(alloc::format!("{e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub fragment_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthResult {
    pub audio: AudioBuffer,
    pub features: MfccMatrix,
    /// Contiguous and covering `0..features.n_frames()`.
    pub segments: Vec<Segment>,
}

/// Renders each fragment, concatenates the audio at the canonical rate and
/// records where each fragment falls on the MFCC frame grid.
pub fn synthesize<P: SynthesisProvider + ?Sized>(
    fragments: &[TextFragment],
    provider: &P,
    config: &MfccConfig,
) -> Result<SynthResult, AlignError> {
    if fragments.is_empty() {
        return Err(AlignError::NoFragments);
    }
    let mut samples: Vec<f32> = Vec::new();
    let mut bounds = Vec::with_capacity(fragments.len());
    for f in fragments {
        if f.text.trim().is_empty() {
            return Err(AlignError::EmptyFragment(f.id.clone()));
        }
        let audio = provider.render(&f.text)?;
        let audio = if audio.sample_rate() == CANONICAL_RATE {
            audio
        } else {
            audio.resampled(CANONICAL_RATE).map_err(|e| AlignError::Provider(alloc::format!("{e}")))?
        };
        samples.extend_from_slice(audio.samples());
        bounds.push(samples.len());
    }
    let audio = AudioBuffer::clamped(samples, CANONICAL_RATE).map_err(|e| AlignError::Provider(alloc::format!("{e}")))?;
    let features = mfcc(&audio, config);
    let n_frames = features.n_frames();
    let hop = config.hop_len(CANONICAL_RATE) as f64;
    let mut segments = Vec::with_capacity(fragments.len());
    let mut start = 0;
    for (i, (f, end_sample)) in fragments.iter().zip(&bounds).enumerate() {
        let end = if i + 1 == fragments.len() {
            n_frames
        } else {
            (math::round(*end_sample as f64 / hop) as usize).clamp(start, n_frames)
        };
        segments.push(Segment { fragment_id: f.id.clone(), start_frame: start, end_frame: end });
        start = end;
    }
    Ok(SynthResult { audio, features, segments })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    /// `(i, j)` pairs from `(0, 0)` to `(m - 1, n - 1)`.
    pub path: Vec<(usize, usize)>,
    pub cost: f64,
    /// Local cost of each path pair.
    pub local: Vec<f64>,
}

/// Full dynamic-programming DTW with Euclidean local cost and steps
/// (1,1), (0,1), (1,0), preferred in that order on ties. `band`, if set,
/// is a Sakoe-Chiba radius in frames around the scaled diagonal.
pub fn dtw(a: &MfccMatrix, b: &MfccMatrix, band: Option<usize>) -> Result<Warp, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptyFeatures);
    }
    if a.n_coeffs() != b.n_coeffs() {
        return Err(AlignError::CoeffMismatch { a: a.n_coeffs(), b: b.n_coeffs() });
    }
    let (m, n) = (a.n_frames(), b.n_frames());
    let inside = |i: usize, j: usize| match band {
        None => true,
        Some(r) => {
            let centre = if m > 1 { i as f64 * (n - 1) as f64 / (m - 1) as f64 } else { 0.0 };
            math::abs(j as f64 - centre) <= r as f64 + 0.5
        }
    };
    const DIAG: u8 = 0;
    const RIGHT: u8 = 1;
    const DOWN: u8 = 2;
    let mut step = vec![DIAG; m * n];
    let mut prev = vec![f64::INFINITY; n];
    let mut cur = vec![f64::INFINITY; n];
    for i in 0..m {
        for j in 0..n {
            if !inside(i, j) {
                cur[j] = f64::INFINITY;
                continue;
            }
            let local = math::euclidean(a.frame(i), b.frame(j));
            if i == 0 && j == 0 {
                cur[j] = local;
                continue;
            }
            let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
            let right = if j > 0 { cur[j - 1] } else { f64::INFINITY };
            let down = if i > 0 { prev[j] } else { f64::INFINITY };
            let (best, s) = if diag <= right && diag <= down {
                (diag, DIAG)
            } else if right <= down {
                (right, RIGHT)
            } else {
                (down, DOWN)
            };
            cur[j] = local + best;
            step[i * n + j] = s;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let cost = prev[n - 1];
    if !cost.is_finite() {
        return Err(AlignError::BandTooNarrow);
    }
    let (mut i, mut j) = (m - 1, n - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        match step[i * n + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            RIGHT => j -= 1,
            _ => i -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    let local = path.iter().map(|&(i, j)| math::euclidean(a.frame(i), b.frame(j))).collect();
    Ok(Warp { path, cost, local })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFragment {
    pub fragment_id: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Mean local distance along the fragment's part of the path; lower is
    /// a closer match.
    pub confidence: f64,
}

/// Maps synthesized segment boundaries through the warp. Each segment ends
/// one frame after the last real frame paired with its final synthesized
/// frame. The first segment starts the same way from the frame before it
/// (leading padding), or at the last real frame paired with frame 0 when
/// there is none. Boundaries are forced non-decreasing with at least one
/// frame per fragment where the real timeline allows it.
pub fn map_boundaries(warp: &Warp, segments: &[Segment], hop_s: f64) -> Vec<AlignedFragment> {
    let Some(&(m_last, n_last)) = warp.path.last() else { return Vec::new() };
    let n_real = n_last + 1;
    let mut last_j = vec![0usize; m_last + 1];
    for &(i, j) in &warp.path {
        last_j[i] = j;
    }
    let mut sum = vec![0.0; m_last + 1];
    let mut count = vec![0usize; m_last + 1];
    for (&(i, _), c) in warp.path.iter().zip(&warp.local) {
        sum[i] += c;
        count[i] += 1;
    }
    let mut out = Vec::with_capacity(segments.len());
    let mut boundary = match segments.first() {
        Some(s) if s.start_frame > 0 => last_j[(s.start_frame - 1).min(m_last)] + 1,
        Some(_) => last_j[0],
        None => 0,
    };
    for s in segments {
        let start = boundary;
        let raw_end = if s.end_frame == 0 { 0 } else { last_j[(s.end_frame - 1).min(m_last)] + 1 };
        let end = raw_end.max(start + 1).min(n_real).max(start);
        let (cs, cc) = (s.start_frame..s.end_frame.min(m_last + 1))
            .fold((0.0, 0usize), |(a, b), i| (a + sum[i], b + count[i]));
        out.push(AlignedFragment {
            fragment_id: s.fragment_id.clone(),
            start_s: start as f64 * hop_s,
            end_s: end as f64 * hop_s,
            confidence: if cc > 0 { cs / cc as f64 } else { f64::INFINITY },
        });
        boundary = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Sakoe-Chiba radius in frames; `None` runs the full DTW.
    pub band: Option<usize>,
    /// Silence added around the synthesized audio so leading and trailing
    /// non-speech in the recording has something to match.
    pub pad_ms: f64,
    /// Warp on c1.. only. Digital silence and a noise floor differ mostly in
    /// c0; the rest of the cepstrum is near zero for both.
    pub drop_c0: bool,
    /// Add white noise at the recording's estimated floor to the synthesized
    /// audio, so silences on both sides look alike.
    pub match_noise_floor: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self { band: None, pad_ms: 200.0, drop_c0: true, match_noise_floor: true }
    }
}

/// Synthesizes, pads, warps and maps in one call. `real` is resampled to the
/// canonical rate if needed.
pub fn align<P: SynthesisProvider + ?Sized>(
    real: &AudioBuffer,
    fragments: &[TextFragment],
    provider: &P,
    config: &MfccConfig,
    options: &AlignOptions,
) -> Result<Vec<AlignedFragment>, AlignError> {
    let synth = synthesize(fragments, provider, config)?;
    let pad_frames = math::round(options.pad_ms.max(0.0) / config.hop_ms) as usize;
    let pad_samples = pad_frames * config.hop_len(CANONICAL_RATE);
    let mut padded = vec![0.0f32; pad_samples];
    padded.extend_from_slice(synth.audio.samples());
    padded.extend(core::iter::repeat_n(0.0, pad_samples));
    let real = if real.sample_rate() == CANONICAL_RATE {
        real.clone()
    } else {
        real.resampled(CANONICAL_RATE).map_err(|e| AlignError::Provider(alloc::format!("{e}")))?
    };
    if options.match_noise_floor {
        let floor = noise_floor(real.samples(), config.window_len(CANONICAL_RATE), config.hop_len(CANONICAL_RATE));
        if floor > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for s in &mut padded {
                let z: f64 = rng.sample(StandardNormal);
                *s += (floor * z) as f32;
            }
        }
    }
    let padded = AudioBuffer::clamped(padded, CANONICAL_RATE).map_err(|e| AlignError::Provider(alloc::format!("{e}")))?;
    // The unpadded timeline ends at the last whole window; with padding the
    // final fragment can run to its true last sample.
    let hop = config.hop_len(CANONICAL_RATE) as f64;
    let content_end = pad_frames + math::round(synth.audio.len() as f64 / hop) as usize;
    let n_segments = synth.segments.len();
    let segments: Vec<Segment> = synth
        .segments
        .iter()
        .enumerate()
        .map(|(k, s)| Segment {
            fragment_id: s.fragment_id.clone(),
            start_frame: s.start_frame + pad_frames,
            end_frame: if k + 1 == n_segments { content_end } else { s.end_frame + pad_frames },
        })
        .collect();
    let (mut a, mut b) = (mfcc(&padded, config), mfcc(&real, config));
    if options.drop_c0 && config.n_coeffs > 1 {
        a = without_c0(&a);
        b = without_c0(&b);
    }
    let warp = dtw(&a, &b, options.band)?;
    Ok(map_boundaries(&warp, &segments, config.hop_ms / 1000.0))
}

/// RMS of the 5th-percentile quietest frame.
pub fn noise_floor(samples: &[f32], window: usize, hop: usize) -> f64 {
    if samples.len() < window || window == 0 || hop == 0 {
        return 0.0;
    }
    let mut rms: Vec<f64> = samples
        .windows(window)
        .step_by(hop)
        .map(|w| math::sqrt(w.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>() / window as f64))
        .collect();
    rms.sort_by(f64::total_cmp);
    rms[rms.len() / 20]
}

fn without_c0(m: &MfccMatrix) -> MfccMatrix {
    let rows: Vec<Vec<f64>> = m.frames().map(|f| f[1..].to_vec()).collect();
    MfccMatrix::from_rows(&rows, m.frame_ms, m.hop_ms).unwrap_or_else(|| m.clone())
}
