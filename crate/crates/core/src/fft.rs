//! Iterative radix-2 complex FFT for power-of-two lengths.
//!
//! Collocation grids are powers of two, and the core has to stay `no_std`, so
//! a small in-place Cooley–Tukey transform with cached twiddles is enough.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::TAU;

#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    // twiddles[k] = exp(-2πik/len), k < len/2
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    /// Panics unless `len` is a power of two.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Fft { len, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform, `X_k = Σ_m x_m e^{-2πikm/N}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Unnormalized inverse transform, `x_m = Σ_k X_k e^{+2πikm/N}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.len;
        assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}
