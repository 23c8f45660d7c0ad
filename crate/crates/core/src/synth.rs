//! Seeded synthetic data: WADA-model signals, embedding blobs, a two-class
//! gender set, harmonic "voices" and Markov text. Used by tests,
//! calibration and end-to-end fixtures.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::math;

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples of the WADA generative model: Gamma(0.4, 1) magnitudes with a
/// random sign plus Gaussian noise at `snr_db` (`None` for no noise).
pub fn wada_model_samples(n: usize, snr_db: Option<f64>, rng: &mut SynthRng) -> Vec<f64> {
    let shape = crate::snr::SPEECH_GAMMA_SHAPE;
    let gamma = Gamma::new(shape, 1.0).expect("valid gamma");
    let sigma = snr_db.map(|db| math::sqrt(shape * (shape + 1.0) / math::powf(10.0, db / 10.0)));
    (0..n)
        .map(|_| {
            let mag: f64 = gamma.sample(rng);
            let s = if rng.random::<bool>() { mag } else { -mag };
            match sigma {
                Some(sd) => s + sd * rng.sample::<f64, _>(StandardNormal),
                None => s,
            }
        })
        .collect()
}

/// Pure Gaussian noise.
pub fn gaussian_noise(n: usize, std_dev: f64, rng: &mut SynthRng) -> Vec<f64> {
    (0..n).map(|_| std_dev * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Scales so the peak magnitude is `peak` and converts to `f32`.
pub fn scale_to_peak(x: &[f64], peak: f64) -> Vec<f32> {
    let max = x.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    let k = if max > 0.0 { peak / max } else { 0.0 };
    x.iter().map(|v| (v * k) as f32).collect()
}

pub fn random_unit_vector(dim: usize, rng: &mut SynthRng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = math::sqrt(v.iter().map(|x| x * x).sum());
    v.into_iter().map(|x| x / norm).collect()
}

/// Isotropic blobs around random unit-norm centres. `radius` is the RMS
/// distance of a point from its centre. Returns points and blob labels.
pub fn gaussian_blobs(
    n_blobs: usize,
    per_blob: usize,
    dim: usize,
    radius: f64,
    rng: &mut SynthRng,
) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>) {
    let centres: Vec<Vec<f64>> = (0..n_blobs).map(|_| random_unit_vector(dim, rng)).collect();
    let coord_sd = radius / math::sqrt(dim as f64);
    let normal = Normal::new(0.0, coord_sd).expect("valid normal");
    let mut points = Vec::with_capacity(n_blobs * per_blob);
    let mut labels = Vec::with_capacity(n_blobs * per_blob);
    for (b, c) in centres.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(c.iter().map(|x| x + normal.sample(rng)).collect());
            labels.push(b);
        }
    }
    (points, labels, centres)
}

/// Two Gaussian classes whose means differ by `2 * offset` along a random
/// unit direction; per-point noise has RMS radius 1. Labels are `true` for
/// the positive class. Vectors are returned unnormalized.
pub struct TwoClassSet {
    base: Vec<f64>,
    direction: Vec<f64>,
    offset: f64,
}

impl TwoClassSet {
    pub fn new(dim: usize, offset: f64, rng: &mut SynthRng) -> Self {
        let base = random_unit_vector(dim, rng).into_iter().map(|x| 3.0 * x).collect();
        Self { base, direction: random_unit_vector(dim, rng), offset }
    }

    pub fn sample(&self, n: usize, rng: &mut SynthRng) -> (Vec<Vec<f64>>, Vec<bool>) {
        let dim = self.base.len();
        let normal = Normal::new(0.0, 1.0 / math::sqrt(dim as f64)).expect("valid normal");
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let positive = i % 2 == 0;
            let sign = if positive { 1.0 } else { -1.0 };
            xs.push(
                self.base
                    .iter()
                    .zip(&self.direction)
                    .map(|(b, d)| b + sign * self.offset * d + normal.sample(rng))
                    .collect(),
            );
            ys.push(positive);
        }
        (xs, ys)
    }
}

/// A harmonic source with a fixed pitch and spectral envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    pub f0: f64,
    /// Resonance centres (Hz) shaping harmonic amplitudes.
    pub formants: [f64; 3],
}

impl Voice {
    pub fn random(rng: &mut SynthRng, low_pitch: bool) -> Self {
        let f0 = if low_pitch { rng.random_range(95.0..140.0) } else { rng.random_range(180.0..250.0) };
        Self {
            f0,
            formants: [
                rng.random_range(400.0..900.0),
                rng.random_range(1100.0..2200.0),
                rng.random_range(2400.0..3400.0),
            ],
        }
    }

    fn harmonic_gain(&self, freq: f64) -> f64 {
        self.formants
            .iter()
            .map(|&fc| {
                let bw = 0.15 * fc;
                math::exp(-((freq - fc) * (freq - fc)) / (2.0 * bw * bw))
            })
            .sum::<f64>()
            + 0.05
    }

    /// Connected syllables: each is a raised-cosine envelope over a floor of
    /// 30% of its Gamma-distributed level. Output peak is at most `peak`.
    pub fn speak(&self, seconds: f64, sample_rate: u32, peak: f64, rng: &mut SynthRng) -> Vec<f32> {
        let n = (seconds * sample_rate as f64) as usize;
        let rate = sample_rate as f64;
        let n_harm = ((3800.0 / self.f0) as usize).max(1);
        let gains: Vec<f64> = (1..=n_harm).map(|h| self.harmonic_gain(h as f64 * self.f0)).collect();
        let phases: Vec<f64> = (0..n_harm).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let level = Gamma::new(1.5, 1.0).expect("valid gamma");

        let mut env = Vec::with_capacity(n);
        while env.len() < n {
            let len = (rng.random_range(0.12..0.28) * rate) as usize;
            let amp: f64 = 0.2 + level.sample(rng);
            for i in 0..len {
                env.push(amp * (0.3 + 0.35 * (1.0 - math::cos(2.0 * PI * i as f64 / len as f64))));
            }
        }
        let vibrato = rng.random_range(4.0..6.0);
        let mut phase = 0.0;
        let mut out = Vec::with_capacity(n);
        for (i, e) in env.iter().take(n).enumerate() {
            let t = i as f64 / rate;
            let f = self.f0 * (1.0 + 0.02 * math::sin(2.0 * PI * vibrato * t));
            phase += 2.0 * PI * f / rate;
            let s: f64 = gains
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(h, (g, p))| g * math::sin((h + 1) as f64 * phase + p))
                .sum();
            out.push(e * s);
        }
        let out_f64: Vec<f64> = out;
        scale_to_peak(&out_f64, peak)
    }

    /// Closer to recorded speech: cosine-phase harmonics (a glottal pulse
    /// train), syllables dipping to 15% of their level, and occasional word
    /// gaps. The sparse amplitudes read as clean under WADA, unlike
    /// [`Voice::speak`], whose random phases look Gaussian.
    pub fn speak_pulsed(&self, seconds: f64, sample_rate: u32, peak: f64, rng: &mut SynthRng) -> Vec<f32> {
        let n = (seconds * sample_rate as f64) as usize;
        let rate = sample_rate as f64;
        let n_harm = ((3800.0 / self.f0) as usize).max(1);
        let gains: Vec<f64> = (1..=n_harm).map(|h| self.harmonic_gain(h as f64 * self.f0)).collect();
        let level = Gamma::new(1.5, 1.0).expect("valid gamma");

        let mut env = Vec::with_capacity(n);
        while env.len() < n {
            let len = (rng.random_range(0.12..0.28) * rate) as usize;
            let amp: f64 = 0.2 + level.sample(rng);
            for i in 0..len {
                env.push(amp * (0.15 + 0.425 * (1.0 - math::cos(2.0 * PI * i as f64 / len as f64))));
            }
            if rng.random::<f64>() < 0.1 {
                let gap = (rng.random_range(0.05..0.15) * rate) as usize;
                env.extend(core::iter::repeat_n(0.0, gap));
            }
        }
        let vibrato = rng.random_range(4.0..6.0);
        let mut phase = 0.0;
        let mut out = Vec::with_capacity(n);
        for (i, e) in env.iter().take(n).enumerate() {
            let t = i as f64 / rate;
            phase += 2.0 * PI * self.f0 * (1.0 + 0.02 * math::sin(2.0 * PI * vibrato * t)) / rate;
            let s: f64 = gains.iter().enumerate().map(|(h, g)| g * math::cos((h + 1) as f64 * phase)).sum();
            out.push(e * s);
        }
        scale_to_peak(&out, peak)
    }
}

/// Word sequences from a sparse first-order Markov chain over a random
/// lexicon: each word prefers `branching` successors.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSource {
    pub lexicon: Vec<String>,
    successors: Vec<Vec<usize>>,
}

impl TextSource {
    pub fn new(alphabet: &[char], n_words: usize, branching: usize, rng: &mut SynthRng) -> Self {
        let mut lexicon: Vec<String> = Vec::with_capacity(n_words);
        while lexicon.len() < n_words {
            let len = rng.random_range(2..=6);
            let w: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
            if !lexicon.contains(&w) {
                lexicon.push(w);
            }
        }
        let successors = (0..n_words)
            .map(|_| (0..branching).map(|_| rng.random_range(0..n_words)).collect())
            .collect();
        Self { lexicon, successors }
    }

    /// 2 to 8 words; 90% of transitions follow the preferred successors.
    pub fn sentence(&self, rng: &mut SynthRng) -> String {
        let len = rng.random_range(2..=8);
        let mut w = rng.random_range(0..self.lexicon.len());
        let mut out = self.lexicon[w].clone();
        for _ in 1..len {
            w = if rng.random::<f64>() < 0.9 {
                let s = &self.successors[w];
                s[rng.random_range(0..s.len())]
            } else {
                rng.random_range(0..self.lexicon.len())
            };
            out.push(' ');
            out.push_str(&self.lexicon[w]);
        }
        out
    }
}
