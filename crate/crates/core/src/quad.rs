//! Quadrature rules.

use alloc::vec::Vec;

use crate::Result;
use crate::Error;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[a, b]` split into `panels` equal panels.
#[derive(Debug, Clone)]
pub struct CompositeGauss {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CompositeGauss {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        CompositeGauss { nodes, weights }
    }

    /// `∫_a^b g` over one panel.
    pub fn panel(&self, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(mid + half * x))
            .sum();
        s * half
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| self.panel(a + i as f64 * h, a + (i + 1) as f64 * h, &mut g))
            .sum()
    }
}

/// `∫_{-1}^{1} √(1-t²) q(t) dt` by the `n`-point Gauss–Chebyshev rule of the
/// second kind. Exact for polynomial `q` of degree `< 2n`.
pub fn gauss_chebyshev_u(n: usize, mut q: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("Gauss–Chebyshev rule needs at least one node"));
    }
    let step = core::f64::consts::PI / (n as f64 + 1.0);
    let mut acc = 0.0;
    for k in 1..=n {
        let angle = k as f64 * step;
        let s = angle.sin();
        acc += step * s * s * q(angle.cos())?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // ∫ x^10 = 2/11, degree 10 < 12
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_on_oscillatory_integrand() {
        let rule = CompositeGauss::new(8);
        let s = rule.integrate(0.0, 100.0, 400, |t| (3.0 * t).cos());
        assert!((s - (300.0f64).sin() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_half_disc() {
        // ∫ √(1-t²) dt = π/2
        let s = gauss_chebyshev_u(5, |_| Ok(1.0)).unwrap();
        assert!((s - core::f64::consts::FRAC_PI_2).abs() < 1e-14);
        // ∫ √(1-t²) t² dt = π/8
        let s = gauss_chebyshev_u(5, |t| Ok(t * t)).unwrap();
        assert!((s - core::f64::consts::PI / 8.0).abs() < 1e-14);
    }
}
