//! Periodic spectrum of the Hill operator `-y'' + u y` and the KdV actions
//! it encodes.
//!
//! The `n`-th gap `[λ⁻_n, λ⁺_n]` sits near `(nπ)²` and is where
//! `(-1)^n Δ(λ) ≥ 2`. Its action is
//!
//! ```text
//! I_n = (2/π) ∫_{λ⁻_n}^{λ⁺_n} arccosh(|Δ(λ)|/2) dλ,
//! ```
//!
//! which reduces to `|û_n|²/(2πn)` (= `½|v_n|²` of the linear map) as `u → 0`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::birkhoff::ActionVector;
use crate::quad::gauss_chebyshev_u;
use crate::roots::{bracketed_root, golden_max};
use crate::spectral::{sample_on_grid, SobolevIndex, SpectralField};
use crate::{Error, Result};

/// Hill operator for a fixed potential, with its numerical settings.
#[derive(Debug, Clone)]
pub struct HillOperator {
    // potential on 2·steps points: u(k h / 2)
    potential: Vec<f64>,
    steps: usize,
    /// Largest gap index that may be requested.
    pub max_gaps: usize,
    /// Gauss–Chebyshev nodes per gap.
    pub quad_nodes: usize,
    /// Endpoint tolerance in `λ`.
    pub root_tol: f64,
    /// A gap whose peak `(-1)^n Δ - 2` is below this counts as closed.
    pub collapse_tol: f64,
}

impl HillOperator {
    pub const DEFAULT_STEPS: usize = 2048;

    pub fn new(u: &SpectralField) -> Self {
        Self::with_steps(u, Self::DEFAULT_STEPS)
    }

    /// `steps` RK4 steps per period (a power of two larger than `n_modes`).
    pub fn with_steps(u: &SpectralField, steps: usize) -> Self {
        let n = (2 * steps).max(4 * u.n_modes()).next_power_of_two();
        let potential = sample_on_grid(&u.to_complex(), n);
        HillOperator {
            steps: n / 2,
            potential,
            max_gaps: 128,
            quad_nodes: 48,
            root_tol: 1e-10,
            collapse_tol: 1e-12,
        }
    }

    /// Trace of the monodromy matrix, normalized by `√det` (the exact
    /// determinant is 1; the normalization cancels RK4's amplitude error).
    pub fn discriminant(&self, lambda: f64) -> Result<f64> {
        let h = 1.0 / self.steps as f64;
        if h * lambda.abs().sqrt() > 0.5 {
            return Err(Error::DiscriminantUnstable { lambda });
        }
        // columns: (y1, y1', y2, y2')
        let mut s = [1.0, 0.0, 0.0, 1.0];
        let q = |i: usize| self.potential[i % self.potential.len()] - lambda;
        let rhs = |s: &[f64; 4], q: f64| [s[1], q * s[0], s[3], q * s[2]];
        for k in 0..self.steps {
            let (q0, q1, q2) = (q(2 * k), q(2 * k + 1), q(2 * k + 2));
            let k1 = rhs(&s, q0);
            let k2 = rhs(&add(&s, &k1, 0.5 * h), q1);
            let k3 = rhs(&add(&s, &k2, 0.5 * h), q1);
            let k4 = rhs(&add(&s, &k3, h), q2);
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        let det = s[0] * s[3] - s[2] * s[1];
        if !(det.is_finite() && (det - 1.0).abs() < 1e-3) {
            return Err(Error::DiscriminantUnstable { lambda });
        }
        Ok((s[0] + s[3]) / det.sqrt())
    }

    /// Endpoints of the `n`-th gap (`lo == hi` when the gap is closed).
    pub fn gap(&self, n: usize) -> Result<(f64, f64)> {
        if n == 0 || n > self.max_gaps {
            return Err(Error::invalid("gap index out of range"));
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let g = |l: f64| self.discriminant(l).map(|d| sign * d - 2.0);
        let lo = ((n as f64 - 0.5) * PI).powi(2);
        let hi = ((n as f64 + 0.5) * PI).powi(2);
        let (peak, top) = golden_max(g, lo, hi, 1e-9 * hi)?;
        if top <= self.collapse_tol {
            return Ok((peak, peak));
        }
        let left = bracketed_root(g, lo, peak, self.root_tol)?;
        let right = bracketed_root(g, peak, hi, self.root_tol)?;
        Ok((left, right))
    }

    /// Action of the `n`-th gap.
    pub fn action(&self, n: usize) -> Result<f64> {
        let (lo, hi) = self.gap(n)?;
        self.gap_action(lo, hi)
    }

    fn gap_action(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        // λ = c + r t; the integrand vanishes like √(1-t²) at both edges
        let integral = gauss_chebyshev_u(self.quad_nodes, |t| {
            let x = 0.5 * self.discriminant(c + r * t)?.abs() - 1.0;
            let w = (1.0 - t * t).sqrt();
            Ok(r * acosh1p(x.max(0.0)) / w)
        })?;
        Ok(2.0 / PI * integral)
    }
}

fn add(s: &[f64; 4], k: &[f64; 4], h: f64) -> [f64; 4] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

// arccosh(1 + x) without cancellation for small x
fn acosh1p(x: f64) -> f64 {
    (x + (x * (x + 2.0)).sqrt()).ln_1p()
}

/// `Δ(λ)` for the potential `u`.
pub fn hill_discriminant(u: &SpectralField, lambda: f64) -> Result<f64> {
    HillOperator::new(u).discriminant(lambda)
}

/// The first `n_gaps` gaps as `(λ⁻, λ⁺)` pairs.
pub fn hill_gaps(u: &SpectralField, n_gaps: usize) -> Result<Vec<(f64, f64)>> {
    let op = HillOperator::new(u);
    (1..=n_gaps).map(|n| op.gap(n)).collect()
}

/// Actions `I_1..I_n` from the gap data. Gaps that cannot be located are
/// collected into a single [`Error::UnresolvedGaps`].
pub fn hill_actions(u: &SpectralField, n: usize, p: SobolevIndex) -> Result<ActionVector> {
    let op = HillOperator::new(u);
    let mut out = Vec::with_capacity(n);
    let mut failed = Vec::new();
    for k in 1..=n {
        match op.action(k) {
            Ok(a) => out.push(a),
            Err(Error::RootBracket { .. }) | Err(Error::DiscriminantUnstable { .. }) => {
                failed.push(k);
                out.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(Error::UnresolvedGaps(failed));
    }
    ActionVector::new(out, p)
}
