use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    fn mul(self, o: Complex) -> Complex {
        Complex { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// In-place iterative radix-2 FFT. `data.len()` must be a power of two.
pub(crate) fn fft_in_place(data: &mut [Complex]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let step = Complex { re: math::cos(ang), im: math::sin(ang) };
        for start in (0..n).step_by(len) {
            let mut w = Complex { re: 1.0, im: 0.0 };
            for k in 0..len / 2 {
                let a = data[start + k];
                let b = data[start + k + len / 2].mul(w);
                data[start + k] = Complex { re: a.re + b.re, im: a.im + b.im };
                data[start + k + len / 2] = Complex { re: a.re - b.re, im: a.im - b.im };
                w = w.mul(step);
            }
        }
        len <<= 1;
    }
}

/// `|X_k|^2` for `k in 0..=n_fft/2` of the zero-padded real frame.
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Vec<f64> {
    assert!(n_fft.is_power_of_two() && frame.len() <= n_fft);
    let mut buf = vec![Complex::default(); n_fft];
    for (slot, &x) in buf.iter_mut().zip(frame) {
        slot.re = x;
    }
    fft_in_place(&mut buf);
    buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect()
}
