use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

/// Kernel length of the windowed-sinc interpolator.
pub const SINC_TAPS: usize = 64;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        math::sin(PI * x) / (PI * x)
    }
}

/// Windowed-sinc resampling with a Blackman-windowed 64-tap kernel. When
/// downsampling the cutoff is lowered to the target Nyquist frequency.
pub fn resample(input: &[f32], from_rate: u32, to_rate: u32) -> Vec<f32> {
    if input.is_empty() || from_rate == to_rate {
        return input.to_vec();
    }
    let ratio = to_rate as f64 / from_rate as f64;
    let cutoff = ratio.min(1.0);
    let out_len = math::round(input.len() as f64 * ratio) as usize;
    let half = (SINC_TAPS / 2) as i64;
    let span = half as f64;
    (0..out_len)
        .map(|i| {
            let t = i as f64 / ratio;
            let center = math::floor(t) as i64;
            let mut acc = 0.0;
            for k in (center - half + 1)..=(center + half) {
                if k < 0 || k as usize >= input.len() {
                    continue;
                }
                let d = t - k as f64;
                if d.abs() >= span {
                    continue;
                }
                // Blackman window over [-span, span]
                let p = (d + span) / (2.0 * span);
                let w = 0.42 - 0.5 * math::cos(2.0 * PI * p) + 0.08 * math::cos(4.0 * PI * p);
                acc += input[k as usize] as f64 * cutoff * sinc(cutoff * d) * w;
            }
            acc as f32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::fft::power_spectrum;

    fn tone(freq: f64, rate: u32, n: usize) -> Vec<f32> {
        (0..n).map(|i| (0.5 * libm::sin(2.0 * PI * freq * i as f64 / rate as f64)) as f32).collect()
    }

    fn dominant_bin(x: &[f32], n_fft: usize) -> usize {
        let frame: Vec<f64> = x[..n_fft].iter().map(|&v| v as f64).collect();
        let p = power_spectrum(&frame, n_fft);
        (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap()
    }

    #[test]
    fn preserves_tone_frequency() {
        let n_fft = 8192;
        for from in [8_000u32, 22_050, 44_100, 48_000] {
            let x = tone(440.0, from, from as usize * 2);
            let y = resample(&x, from, 16_000);
            assert_eq!(y.len(), 32_000);
            let expected = 440.0 * n_fft as f64 / 16_000.0;
            let bin = dominant_bin(&y, n_fft) as f64;
            assert!((bin - expected).abs() <= 1.0, "{from}: bin {bin} vs {expected}");
        }
    }

    #[test]
    fn upsample_interpolates_smoothly() {
        let x = tone(100.0, 8000, 8000);
        let y = resample(&x, 8000, 16_000);
        // away from the edges the interpolated tone matches the analytic one
        for i in 200..15_800 {
            let want = 0.5 * libm::sin(2.0 * PI * 100.0 * i as f64 / 16_000.0);
            assert!((y[i] as f64 - want).abs() < 2e-3, "{i}");
        }
    }
}
