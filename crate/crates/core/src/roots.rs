//! Scalar root bracketing and unimodal maximization.


use crate::{Error, Result};

/// Root of `g` in `[lo, hi]` by the Illinois variant of regula falsi, falling
/// back to bisection when the secant step stalls. `g(lo)` and `g(hi)` must
/// have opposite signs (or one of them vanish).
pub fn bracketed_root(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootBracket { lo, hi });
    }
    let mut side = 0i8;
    for iter in 0..200 {
        let width = (b - a).abs();
        if width <= tol {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        // every fourth step bisect, guarantees linear shrinking
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) || iter % 4 == 3 {
            c = 0.5 * (a + b);
        }
        let fc = g(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Golden-section search for the maximizer of a unimodal `g` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_max(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c)?, g(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}
