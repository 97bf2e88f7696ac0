//! Real trigonometric representation of zero-mean periodic functions.
//!
//! A [`SpectralField`] stores the coefficients `u_s`, `0 < |s| ≤ n_modes`, of
//! `u = Σ u_s e_s`. Internally a mode pair is handled as the complex number
//! `z_s = u_s + i u_{-s}`, for which `u(x) = √2 Re Σ_{s>0} z_s e^{2πisx}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;
use num_complex::Complex64;

use crate::fft::Fft;
use crate::{Error, Result, TAU};

/// Order `p ≥ 0` of the homogeneous Sobolev space `H^p`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 0.0 {
            Ok(SobolevIndex(p))
        } else {
            Err(Error::invalid("Sobolev index must be a finite p >= 0"))
        }
    }

    pub const ZERO: SobolevIndex = SobolevIndex(0.0);
    pub const ONE: SobolevIndex = SobolevIndex(1.0);
    pub const THREE: SobolevIndex = SobolevIndex(3.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Zero-mean real periodic function on `[0, 1)`, truncated to `|s| ≤ n_modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n_modes: usize,
    grid_size: usize,
    // coeffs[2(j-1)] = u_j, coeffs[2(j-1)+1] = u_{-j}
    coeffs: Vec<f64>,
}

/// Smallest power-of-two grid that dealiases quadratic products of `n_modes` modes.
pub fn default_grid(n_modes: usize) -> usize {
    (3 * n_modes + 1).next_power_of_two()
}

fn check_grid(n_modes: usize, grid_size: usize) -> Result<()> {
    if n_modes == 0 {
        return Err(Error::invalid("n_modes must be positive"));
    }
    if !grid_size.is_power_of_two() || grid_size <= 3 * n_modes {
        return Err(Error::Dealiasing { n_modes, grid_size });
    }
    Ok(())
}

impl SpectralField {
    pub fn zeros(n_modes: usize, grid_size: usize) -> Result<Self> {
        check_grid(n_modes, grid_size)?;
        Ok(SpectralField { n_modes, grid_size, coeffs: vec![0.0; 2 * n_modes] })
    }

    /// Zero field on the default dealiasing grid.
    pub fn with_default_grid(n_modes: usize) -> Result<Self> {
        Self::zeros(n_modes, default_grid(n_modes))
    }

    /// Field with the listed `(s, u_s)` coefficients and all others zero.
    pub fn from_modes(n_modes: usize, grid_size: usize, modes: &[(i64, f64)]) -> Result<Self> {
        let mut u = Self::zeros(n_modes, grid_size)?;
        for &(s, c) in modes {
            u.set(s, c)?;
        }
        Ok(u)
    }

    /// Coefficients in pair layout `[u_1, u_{-1}, u_2, u_{-2}, ...]`.
    pub fn from_coeffs(n_modes: usize, grid_size: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_grid(n_modes, grid_size)?;
        if coeffs.len() != 2 * n_modes {
            return Err(Error::invalid("coefficient vector must hold 2·n_modes entries"));
        }
        Ok(SpectralField { n_modes, grid_size, coeffs })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn index(&self, s: i64) -> Option<usize> {
        let j = s.unsigned_abs() as usize;
        if s == 0 || j > self.n_modes {
            return None;
        }
        Some(2 * (j - 1) + usize::from(s < 0))
    }

    /// Coefficient of `e_s`; zero outside the truncation.
    pub fn get(&self, s: i64) -> f64 {
        self.index(s).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set(&mut self, s: i64, value: f64) -> Result<()> {
        let i = self
            .index(s)
            .ok_or_else(|| Error::invalid("mode index must satisfy 0 < |s| <= n_modes"))?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// `(u_j, u_{-j})` for `j ≥ 1`.
    pub fn pair(&self, j: usize) -> [f64; 2] {
        [self.coeffs[2 * (j - 1)], self.coeffs[2 * (j - 1) + 1]]
    }

    /// Same coefficients on another collocation grid.
    pub fn with_grid(&self, grid_size: usize) -> Result<Self> {
        check_grid(self.n_modes, grid_size)?;
        Ok(SpectralField { grid_size, ..self.clone() })
    }

    /// Same function embedded in (or truncated to) `n_modes` modes, keeping the grid
    /// if it still dealiases and otherwise switching to the default one.
    pub fn resized(&self, n_modes: usize) -> Result<Self> {
        let grid = if self.grid_size > 3 * n_modes { self.grid_size } else { default_grid(n_modes) };
        let mut out = Self::zeros(n_modes, grid)?;
        let keep = 2 * n_modes.min(self.n_modes);
        out.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<Self> {
        if self.n_modes != other.n_modes {
            return Err(Error::ModeMismatch(self.n_modes, other.n_modes));
        }
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += a * y);
        Ok(out)
    }

    pub fn dot(&self, other: &SpectralField) -> Result<f64> {
        if self.n_modes != other.n_modes {
            return Err(Error::ModeMismatch(self.n_modes, other.n_modes));
        }
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    /// Pair `j` as `z_j = u_j + i u_{-j}`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.coeffs.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn from_complex(n_modes: usize, grid_size: usize, z: &[Complex64]) -> Result<Self> {
        check_grid(n_modes, grid_size)?;
        if z.len() != n_modes {
            return Err(Error::invalid("complex coefficient vector must hold n_modes entries"));
        }
        let coeffs = z.iter().flat_map(|c| [c.re, c.im]).collect();
        Ok(SpectralField { n_modes, grid_size, coeffs })
    }

    /// Values at the collocation points `x_m = m / grid_size`.
    pub fn to_grid(&self) -> Vec<f64> {
        sample_on_grid(&self.to_complex(), self.grid_size)
    }

    /// Projection of grid values onto the modes `0 < |s| ≤ n_modes`.
    pub fn from_grid(values: &[f64], n_modes: usize) -> Result<Self> {
        let n = values.len();
        check_grid(n_modes, n)?;
        let fft = Fft::new(n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut buf);
        let z: Vec<Complex64> = (1..=n_modes).map(|j| buf[j] * (SQRT_2 / n as f64)).collect();
        Self::from_complex(n_modes, n, &z)
    }
}

/// Samples `√2 Re Σ z_j e^{2πijx}` on `n` equispaced points (`n` a power of
/// two larger than `2·z.len()`).
pub fn sample_on_grid(z: &[Complex64], n: usize) -> Vec<f64> {
    let fft = Fft::new(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (j, c) in z.iter().enumerate() {
        let hat = c / SQRT_2;
        buf[j + 1] = hat;
        buf[n - j - 1] = hat.conj();
    }
    fft.inverse(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Scratch space for collocation products on a fixed grid.
#[derive(Debug, Clone)]
pub struct Collocation {
    n_modes: usize,
    fft: Fft,
    buf: Vec<Complex64>,
}

impl Collocation {
    pub fn new(n_modes: usize, grid_size: usize) -> Result<Self> {
        check_grid(n_modes, grid_size)?;
        Ok(Collocation {
            n_modes,
            fft: Fft::new(grid_size),
            buf: vec![Complex64::new(0.0, 0.0); grid_size],
        })
    }

    pub fn for_field(u: &SpectralField) -> Result<Self> {
        Self::new(u.n_modes, u.grid_size)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    // After this call buf[m] = u(x_m) + i u_x(x_m).
    fn load_u_and_ux(&mut self, z: &[Complex64]) {
        let n = self.buf.len();
        self.buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (idx, c) in z.iter().enumerate() {
            let j = idx + 1;
            let u_hat = c / SQRT_2;
            let ux_hat = u_hat * Complex64::new(0.0, TAU * j as f64);
            let i = Complex64::i();
            self.buf[j] = u_hat + i * ux_hat;
            self.buf[n - j] = u_hat.conj() + i * ux_hat.conj();
        }
        self.fft.inverse(&mut self.buf);
    }

    /// `6 u u_x` in complex pair form, projected onto `|s| ≤ keep`
    /// (modes above `keep` are zeroed).
    pub fn six_u_ux(&mut self, z: &[Complex64], out: &mut [Complex64], keep: usize) {
        debug_assert_eq!(z.len(), self.n_modes);
        self.load_u_and_ux(z);
        let n = self.buf.len();
        for c in self.buf.iter_mut() {
            *c = Complex64::new(6.0 * c.re * c.im, 0.0);
        }
        self.fft.forward(&mut self.buf);
        let scale = SQRT_2 / n as f64;
        for (idx, o) in out.iter_mut().enumerate() {
            *o = if idx < keep { self.buf[idx + 1] * scale } else { Complex64::new(0.0, 0.0) };
        }
    }

    /// `u²` projected onto modes `1..=out.len()` (the mean is dropped).
    pub fn square(&mut self, z: &[Complex64], out: &mut [Complex64]) {
        self.load_u_and_ux(z);
        let n = self.buf.len();
        for c in self.buf.iter_mut() {
            *c = Complex64::new(c.re * c.re, 0.0);
        }
        self.fft.forward(&mut self.buf);
        let scale = SQRT_2 / n as f64;
        for (idx, o) in out.iter_mut().enumerate() {
            *o = self.buf[idx + 1] * scale;
        }
    }

    /// Collocation quadrature of `½u_x² + u³` (exact: `u³` has at most
    /// `3·n_modes < grid_size` modes).
    pub fn hamiltonian(&mut self, z: &[Complex64]) -> f64 {
        self.load_u_and_ux(z);
        let n = self.buf.len() as f64;
        self.buf.iter().map(|c| 0.5 * c.im * c.im + c.re * c.re * c.re).sum::<f64>() / n
    }

    /// `max_x |u(x)|` on the collocation grid.
    pub fn sup_norm(&mut self, z: &[Complex64]) -> f64 {
        self.load_u_and_ux(z);
        self.buf.iter().fold(0.0, |m, c| m.max(c.re.abs()))
    }
}

/// `(Σ_s (2π|s|)^{2p} u_s²)^{1/2}`.
pub fn sobolev_norm(u: &SpectralField, p: SobolevIndex) -> f64 {
    weighted_sq(u.coeffs(), 2.0 * p.value()).sqrt()
}

// Σ_j (2πj)^w (a_j² + a_{-j}²) in pair layout
pub(crate) fn weighted_sq(coeffs: &[f64], w: f64) -> f64 {
    coeffs
        .chunks_exact(2)
        .enumerate()
        .map(|(i, pr)| (TAU * (i + 1) as f64).powf(w) * (pr[0] * pr[0] + pr[1] * pr[1]))
        .sum()
}

/// `J₀(u) = ‖u‖₀²`.
pub fn l2_sq(u: &SpectralField) -> f64 {
    u.coeffs().iter().map(|c| c * c).sum()
}

/// Spectral `(∂/∂x)^order` for `order ∈ {-1, 1, 2, 3}`; `-1` is the
/// antiderivative on the zero-mean subspace.
pub fn derivative(u: &SpectralField, order: i32) -> Result<SpectralField> {
    if !matches!(order, -1 | 1 | 2 | 3) {
        return Err(Error::UnsupportedOrder(order));
    }
    let z: Vec<Complex64> = u
        .to_complex()
        .iter()
        .enumerate()
        .map(|(i, c)| c * Complex64::new(0.0, TAU * (i + 1) as f64).powi(order))
        .collect();
    SpectralField::from_complex(u.n_modes, u.grid_size, &z)
}

/// The `6uu_x` part of KdV, by a dealiased collocation product.
pub fn nonlinear_term(u: &SpectralField) -> Result<SpectralField> {
    let mut col = Collocation::for_field(u)?;
    let z = u.to_complex();
    let mut out = vec![Complex64::new(0.0, 0.0); u.n_modes];
    col.six_u_ux(&z, &mut out, u.n_modes);
    SpectralField::from_complex(u.n_modes, u.grid_size, &out)
}

/// `H(u) = ∫ (½u_x² + u³) dx`.
pub fn hamiltonian(u: &SpectralField) -> Result<f64> {
    let mut col = Collocation::for_field(u)?;
    Ok(col.hamiltonian(&u.to_complex()))
}
