//! Time integration of `u_t = -u_xxx + 6uu_x + εf(u)` on the circle.
//!
//! The stiff dispersive part is diagonal in Fourier space (mode `s` rotates
//! at `(2πs)³`) and is solved exactly by the integrating factor; the
//! remainder is advanced by classical RK4 (Lawson's IF-RK4).

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::birkhoff::{FrequencyVector, ANGLE_THRESHOLD};
use crate::spectral::{sobolev_norm, Collocation, SobolevIndex, SpectralField};
use crate::{Error, Result, TAU};

/// Largest admissible `|dt|·6·max|u|·2πK` (RK4's stability interval on the
/// imaginary axis is `2√2`).
pub const COURANT_LIMIT: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub eps: f64,
    /// Fast-time step; negative values integrate backwards.
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Index of the monitored norm `‖u‖_p`.
    pub norm_p: SobolevIndex,
    /// The run aborts once `‖u‖_p` exceeds this multiple of its a-priori scale.
    pub ceiling_factor: f64,
    /// `t_end` may not exceed `safety_horizon · max(1, 1/ε)`.
    pub safety_horizon: f64,
}

impl FlowParams {
    pub fn new(eps: f64, dt: f64, t_end: f64, record_every: usize) -> Result<Self> {
        let p = FlowParams {
            eps,
            dt,
            t_end,
            record_every,
            norm_p: SobolevIndex::THREE,
            ceiling_factor: 10.0,
            safety_horizon: 100.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid("eps must be finite and >= 0"));
        }
        if !(self.dt != 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt must be finite and nonzero"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be positive"));
        }
        if !(self.ceiling_factor > 1.0) {
            return Err(Error::invalid("ceiling_factor must exceed 1"));
        }
        let limit = self.horizon_limit();
        if self.t_end > limit {
            return Err(Error::HorizonExceeded { t_end: self.t_end, limit });
        }
        Ok(())
    }

    pub fn horizon_limit(&self) -> f64 {
        let scale = if self.eps > 0.0 { (1.0 / self.eps).max(1.0) } else { 1.0 };
        self.safety_horizon * scale
    }

    /// Number of steps and the exact step that lands on `t_end`.
    pub fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt.abs()) - 1e-9).ceil().max(1.0) as usize;
        (n, self.dt.signum() * self.t_end / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// `f = f(x)`, independent of `u`.
    FixedProfile,
    /// `f(u) = profile + gain · Λ^{-ζ₀} Π₀(u²)`, with `Λ = (1 - ∂²)^{1/2}`.
    SmoothingMap,
}

/// The perturbation `u ↦ f(x, u(·))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    kind: PerturbationKind,
    profile: SpectralField,
    zeta0: f64,
    gain: f64,
}

impl PerturbationSpec {
    /// A fixed forcing profile. `zeta0` is the declared smoothing order.
    pub fn fixed_profile(profile: SpectralField, zeta0: f64) -> Result<Self> {
        check_zeta0(zeta0)?;
        Ok(PerturbationSpec { kind: PerturbationKind::FixedProfile, profile, zeta0, gain: 0.0 })
    }

    pub fn zero(n_modes: usize, grid_size: usize) -> Result<Self> {
        Self::fixed_profile(SpectralField::zeros(n_modes, grid_size)?, 2.0)
    }

    /// Smoothing map; validated by [`PerturbationSpec::check_smoothing`]
    /// before it is returned.
    pub fn smoothing_map(profile: SpectralField, gain: f64, zeta0: f64) -> Result<Self> {
        check_zeta0(zeta0)?;
        if !gain.is_finite() {
            return Err(Error::invalid("smoothing gain must be finite"));
        }
        let spec = PerturbationSpec { kind: PerturbationKind::SmoothingMap, profile, zeta0, gain };
        spec.check_smoothing(4, 0x5eed)?;
        Ok(spec)
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn profile(&self) -> &SpectralField {
        &self.profile
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn is_zero(&self) -> bool {
        self.gain == 0.0 && self.profile.coeffs().iter().all(|c| *c == 0.0)
    }

    /// `f(u)`, truncated to the modes of `u`.
    pub fn eval(&self, u: &SpectralField) -> Result<SpectralField> {
        let mut col = Collocation::for_field(u)?;
        let profile = self.profile_complex(u.n_modes());
        let mut out = vec![Complex64::new(0.0, 0.0); u.n_modes()];
        self.eval_complex(&u.to_complex(), &profile, &mut col, &mut out);
        SpectralField::from_complex(u.n_modes(), u.grid_size(), &out)
    }

    pub(crate) fn profile_complex(&self, n_modes: usize) -> Vec<Complex64> {
        let mut z = self.profile.to_complex();
        z.resize(n_modes, Complex64::new(0.0, 0.0));
        z
    }

    pub(crate) fn eval_complex(
        &self,
        z: &[Complex64],
        profile: &[Complex64],
        col: &mut Collocation,
        out: &mut [Complex64],
    ) {
        match self.kind {
            PerturbationKind::FixedProfile => out.copy_from_slice(profile),
            PerturbationKind::SmoothingMap => {
                col.square(z, out);
                for (j, (o, p)) in out.iter_mut().zip(profile).enumerate() {
                    *o = p + *o * (self.gain * smoothing_symbol(j + 1, self.zeta0));
                }
            }
        }
    }

    /// Spot check that the `u`-dependent part of the map gains `ζ₀`
    /// derivatives: on random rough inputs, the per-mode ratio between
    /// output and the unsmoothed product must decay at least like `s^{-ζ₀}`
    /// (log-log slope within 0.05 of `-ζ₀`).
    pub fn check_smoothing(&self, trials: usize, seed: u64) -> Result<()> {
        if self.kind == PerturbationKind::FixedProfile || self.gain == 0.0 {
            return Ok(());
        }
        let n = self.profile.n_modes().max(8);
        let grid = crate::spectral::default_grid(n);
        let mut col = Collocation::new(n, grid)?;
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let mut rng = crate::rng::stream(seed, 0, 0);
        for _ in 0..trials {
            let z: Vec<Complex64> = (1..=n)
                .map(|j| {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    Complex64::new(a, b) / j as f64
                })
                .collect();
            let mut sq = vec![Complex64::new(0.0, 0.0); n];
            let mut fz = vec![Complex64::new(0.0, 0.0); n];
            col.square(&z, &mut sq);
            self.eval_complex(&z, &zero, &mut col, &mut fz);
            let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 1..=n {
                let (a, b) = (sq[j - 1].norm(), fz[j - 1].norm());
                if a < 1e-12 || b == 0.0 {
                    continue;
                }
                let x = (TAU * j as f64).ln();
                let y = (b / (a * self.gain.abs())).ln();
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                m += 1.0;
            }
            if m < 2.0 {
                continue;
            }
            let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            if slope > -self.zeta0 + 0.05 {
                return Err(Error::NotSmoothing(alloc::format!(
                    "measured decay exponent {:.3} is weaker than zeta0 = {}",
                    -slope,
                    self.zeta0
                )));
            }
        }
        Ok(())
    }
}

fn check_zeta0(zeta0: f64) -> Result<()> {
    if zeta0 > 1.0 && zeta0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("zeta0 must be a finite real > 1"))
    }
}

fn smoothing_symbol(j: usize, zeta0: f64) -> f64 {
    let k = TAU * j as f64;
    (1.0 + k * k).powf(-0.5 * zeta0)
}

/// Snapshots of a fast-time run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub eps: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Slow times `τ = εt`.
    pub fn taus(&self) -> Vec<f64> {
        self.times.iter().map(|t| self.eps * t).collect()
    }

    pub fn last(&self) -> Option<&SpectralField> {
        self.states.last()
    }
}

// Vector field `6uu_x + εf(u)` in pair form, projected onto `|s| ≤ keep`.
#[derive(Debug, Clone)]
struct Field<'a> {
    f: &'a PerturbationSpec,
    eps: f64,
    keep: usize,
    profile: Vec<Complex64>,
    col: Collocation,
    fz: Vec<Complex64>,
}

impl Field<'_> {
    fn eval(&mut self, z: &[Complex64], out: &mut [Complex64]) {
        self.col.six_u_ux(z, out, self.keep);
        if self.eps != 0.0 {
            self.f.eval_complex(z, &self.profile, &mut self.col, &mut self.fz);
            for (o, g) in out.iter_mut().zip(&self.fz).take(self.keep) {
                *o += self.eps * g;
            }
        }
    }
}

/// Stateful IF-RK4 stepper; the building block of every integration routine.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    field: Field<'a>,
    h: f64,
    t: f64,
    z: Vec<Complex64>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    grid_size: usize,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
}

impl<'a> Integrator<'a> {
    /// Starts at `t = 0` with step `h`; modes above `keep` are discarded
    /// from the state and from every vector-field evaluation.
    pub fn new(u0: &SpectralField, eps: f64, h: f64, f: &'a PerturbationSpec, keep: usize) -> Result<Self> {
        let n = u0.n_modes();
        if keep == 0 || keep > n {
            return Err(Error::invalid("Galerkin level must be in 1..=n_modes"));
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut z = u0.to_complex();
        z[keep..].iter_mut().for_each(|c| *c = zero);
        let mut profile = f.profile_complex(n);
        profile[keep..].iter_mut().for_each(|c| *c = zero);
        let field = Field { f, eps, keep, profile, col: Collocation::for_field(u0)?, fz: vec![zero; n] };
        let mut it = Integrator {
            field,
            h,
            t: 0.0,
            z,
            half: Vec::new(),
            full: Vec::new(),
            grid_size: u0.grid_size(),
            k: core::array::from_fn(|_| vec![zero; n]),
            stage: vec![zero; n],
        };
        it.set_step(h);
        Ok(it)
    }

    pub fn set_step(&mut self, h: f64) {
        self.h = h;
        let n = self.z.len();
        let phase = |j: usize, tau: f64| Complex64::from_polar(1.0, (TAU * j as f64).powi(3) * tau);
        self.half = (1..=n).map(|j| phase(j, 0.5 * h)).collect();
        self.full = (1..=n).map(|j| phase(j, h)).collect();
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.z
    }

    pub fn state(&self) -> SpectralField {
        SpectralField::from_complex(self.z.len(), self.grid_size, &self.z)
            .expect("integrator state keeps a valid grid")
    }

    /// `|dt|·6·max|u|·2πK` with `max|u| ≤ √2 Σ|z_j|`.
    pub fn courant(&self) -> f64 {
        let sup = core::f64::consts::SQRT_2 * self.z.iter().map(|c| c.norm()).sum::<f64>();
        self.h.abs() * 6.0 * sup * TAU * self.field.keep as f64
    }

    /// One IF-RK4 step.
    pub fn step(&mut self) -> Result<()> {
        let courant = self.courant();
        if courant > COURANT_LIMIT {
            return Err(Error::Stability { time: self.t, courant, limit: COURANT_LIMIT });
        }
        let h = self.h;
        let [k1, k2, k3, k4] = &mut self.k;
        let (z, e1, e2, st) = (&mut self.z, &self.half, &self.full, &mut self.stage);
        self.field.eval(z, k1);
        for i in 0..z.len() {
            st[i] = e1[i] * (z[i] + 0.5 * h * k1[i]);
        }
        self.field.eval(st, k2);
        for i in 0..z.len() {
            st[i] = e1[i] * z[i] + 0.5 * h * k2[i];
        }
        self.field.eval(st, k3);
        for i in 0..z.len() {
            st[i] = e2[i] * z[i] + h * e1[i] * k3[i];
        }
        self.field.eval(st, k4);
        for i in 0..z.len() {
            z[i] = e2[i] * z[i] + h / 6.0 * (e2[i] * k1[i] + 2.0 * e1[i] * (k2[i] + k3[i]) + k4[i]);
        }
        self.t += h;
        if !z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::Blowup { time: self.t });
        }
        Ok(())
    }
}

/// One IF-RK4 step of size `params.dt` from `u`.
pub fn step(u: &SpectralField, params: &FlowParams, f: &PerturbationSpec) -> Result<SpectralField> {
    let mut it = Integrator::new(u, params.eps, params.dt, f, u.n_modes())?;
    it.step()?;
    Ok(it.state())
}

/// `‖u‖_p` ceiling: `ceiling_factor` times the linear-growth scale
/// `‖u₀‖_p + ε t_end ‖f(u₀)‖_p`.
pub fn norm_ceiling(u0: &SpectralField, params: &FlowParams, f: &PerturbationSpec) -> Result<f64> {
    let fu = f.eval(u0)?;
    let scale = sobolev_norm(u0, params.norm_p) + params.eps * params.t_end * sobolev_norm(&fu, params.norm_p);
    Ok(params.ceiling_factor * scale.max(f64::MIN_POSITIVE))
}

/// Integrates from `t = 0` to `t_end`, recording every `record_every` steps
/// (and the final state).
pub fn integrate(u0: &SpectralField, params: &FlowParams, f: &PerturbationSpec) -> Result<Trajectory> {
    integrate_with(u0, params, f, u0.n_modes(), |_, _| Ok(()))
}

/// [`integrate`] on the Galerkin level `keep`, calling `observer(t, z)` at
/// `t = 0` and after every step with the pair-form coefficients.
pub fn integrate_with(
    u0: &SpectralField,
    params: &FlowParams,
    f: &PerturbationSpec,
    keep: usize,
    mut observer: impl FnMut(f64, &[Complex64]) -> Result<()>,
) -> Result<Trajectory> {
    params.validate()?;
    if params.dt < 0.0 {
        return Err(Error::invalid("integrate runs forward; use integrate_reverse for dt < 0"));
    }
    let ceiling = norm_ceiling(u0, params, f)?;
    let (n_steps, h) = params.steps();
    let mut it = Integrator::new(u0, params.eps, h, f, keep)?;
    let weights: Vec<f64> = (1..=u0.n_modes())
        .map(|j| (TAU * j as f64).powf(2.0 * params.norm_p.value()))
        .collect();
    let mut traj = Trajectory { times: vec![0.0], states: vec![it.state()], eps: params.eps };
    observer(0.0, it.coeffs())?;
    for k in 1..=n_steps {
        it.step()?;
        let norm = it.coeffs().iter().zip(&weights).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt();
        if norm > ceiling {
            return Err(Error::NormCeiling { time: it.time(), norm, ceiling });
        }
        observer(it.time(), it.coeffs())?;
        if k % params.record_every == 0 || k == n_steps {
            // land exactly on the nominal grid of times
            traj.times.push(k as f64 * h);
            traj.states.push(it.state());
        }
    }
    Ok(traj)
}

/// Integrates backwards over `params.t_end` from `u_end` (the sign of
/// `params.dt` is ignored) and returns the state at the start time.
pub fn integrate_reverse(u_end: &SpectralField, params: &FlowParams, f: &PerturbationSpec) -> Result<SpectralField> {
    params.validate()?;
    let (n_steps, h) = params.steps();
    let mut it = Integrator::new(u_end, params.eps, -h.abs(), f, u_end.n_modes())?;
    for _ in 0..n_steps {
        it.step()?;
    }
    Ok(it.state())
}

/// `Π^n u`: zeroes all coefficients with `|s| > n`.
pub fn galerkin_truncate(u: &SpectralField, n: usize) -> Result<SpectralField> {
    if n == 0 {
        return Err(Error::invalid("Galerkin level must be at least 1"));
    }
    let mut out = u.clone();
    let cut = (2 * n).min(out.coeffs().len());
    out.coeffs_mut()[cut..].iter_mut().for_each(|c| *c = 0.0);
    Ok(out)
}

/// For each level in `n_list` (increasing), the sup over recorded times of
/// `‖u_n(t) − u_ref(t)‖_p`, where `u_ref` is the run at the largest level.
pub fn galerkin_convergence_probe(
    u0: &SpectralField,
    params: &FlowParams,
    f: &PerturbationSpec,
    n_list: &[usize],
) -> Result<Vec<f64>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_list must be nonempty and strictly increasing"));
    }
    let n_ref = *n_list.last().unwrap();
    if n_ref > u0.n_modes() {
        return Err(Error::invalid("Galerkin level exceeds n_modes"));
    }
    let reference = integrate_with(u0, params, f, n_ref, |_, _| Ok(()))?;
    n_list
        .iter()
        .map(|&n| {
            if n == n_ref {
                return Ok(0.0);
            }
            let run = integrate_with(u0, params, f, n, |_, _| Ok(()))?;
            let mut worst: f64 = 0.0;
            for (a, b) in run.states.iter().zip(&reference.states) {
                worst = worst.max(sobolev_norm(&a.axpy(-1.0, b)?, params.norm_p));
            }
            Ok(worst)
        })
        .collect()
}

/// Frequencies `W_k`, `k ≤ k_max`, from a least-squares fit of the unwrapped
/// angles along the unperturbed flow over `[0, t_end]`. The step is
/// `min(1e-4, π/(4κ_kmax))` so each angle advances less than `π/4` per step.
pub fn estimate_frequencies(u0: &SpectralField, t_end: f64, k_max: usize) -> Result<FrequencyVector> {
    if k_max == 0 || k_max > u0.n_modes() {
        return Err(Error::invalid("k_max must be in 1..=n_modes"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("fit horizon must be positive"));
    }
    let z0 = u0.to_complex();
    for k in 1..=k_max {
        // |v_k| = |z_k| / √(2πk)
        let v = z0[k - 1].norm() / (TAU * k as f64).sqrt();
        if v < ANGLE_THRESHOLD {
            return Err(Error::ActionBelowThreshold { k, action: 0.5 * v * v });
        }
    }
    let kappa = (TAU * k_max as f64).powi(3);
    let dt = (core::f64::consts::PI / (4.0 * kappa)).min(1e-4);
    let params = FlowParams { eps: 0.0, dt, t_end, record_every: usize::MAX, ..FlowParams::new(0.0, dt, t_end, 1)? };
    let f = PerturbationSpec::zero(u0.n_modes(), u0.grid_size())?;
    let mut last: Vec<f64> = z0[..k_max].iter().map(|c| c.arg()).collect();
    let mut unwrapped = last.clone();
    // running least-squares sums per mode
    let (mut st, mut stt, mut m) = (0.0, 0.0, 0.0);
    let mut sy = vec![0.0; k_max];
    let mut sty = vec![0.0; k_max];
    let mut syy = vec![0.0; k_max];
    integrate_with(u0, &params, &f, u0.n_modes(), |t, z| {
        for k in 0..k_max {
            let a = z[k].arg();
            let mut d = a - last[k];
            d -= TAU * (d / TAU).round();
            unwrapped[k] += d;
            last[k] = a;
            let y = unwrapped[k];
            sy[k] += y;
            sty[k] += t * y;
            syy[k] += y * y;
        }
        st += t;
        stt += t * t;
        m += 1.0;
        Ok(())
    })?;
    let var_t = stt - st * st / m;
    let mut freqs = Vec::with_capacity(k_max);
    let mut residuals = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let cov = sty[k] - st * sy[k] / m;
        let slope = cov / var_t;
        let ss_res = (syy[k] - sy[k] * sy[k] / m) - slope * cov;
        freqs.push(slope);
        residuals.push((ss_res.max(0.0) / m).sqrt());
    }
    Ok(FrequencyVector { freqs, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{default_grid, hamiltonian, l2_sq};
    use core::f64::consts::PI;

    fn field(n: usize, modes: &[(i64, f64)]) -> SpectralField {
        SpectralField::from_modes(n, default_grid(n), modes).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let u = field(8, &[]);
        let f = PerturbationSpec::zero(8, default_grid(8)).unwrap();
        let p = FlowParams::new(0.1, 1e-3, 1.0, 1).unwrap();
        assert_eq!(step(&u, &p, &f).unwrap(), u);
    }

    #[test]
    fn tiny_data_follows_airy_rotation() {
        let u = field(8, &[(1, 1e-4)]);
        let f = PerturbationSpec::zero(8, default_grid(8)).unwrap();
        let p = FlowParams::new(0.0, 1e-4, 1.0, 1).unwrap();
        let next = step(&u, &p, &f).unwrap();
        let exact = Complex64::from_polar(1e-4, (TAU).powi(3) * 1e-4);
        let z = next.to_complex()[0];
        assert!((z - exact).norm() < 1e-10 * 1e-4);
    }

    #[test]
    fn single_step_conserves_l2() {
        let u = field(16, &[(1, 0.05), (-1, 0.01), (-2, 0.02), (3, -0.004)]);
        let f = PerturbationSpec::zero(16, default_grid(16)).unwrap();
        let p = FlowParams::new(0.0, 1e-4, 1.0, 1).unwrap();
        let next = step(&u, &p, &f).unwrap();
        let r = rel(l2_sq(&next).sqrt(), l2_sq(&u).sqrt());
        assert!(r < 1e-10, "{r:e}");
    }

    #[test]
    fn conservation_over_unit_time() {
        let u0 = field(32, &[(1, 0.05)]);
        let f = PerturbationSpec::zero(32, 128).unwrap();
        let p = FlowParams::new(0.0, 1e-4, 1.0, 1000).unwrap();
        let traj = integrate(&u0, &p, &f).unwrap();
        assert_eq!(traj.len(), 11);
        let (h0, m0) = (hamiltonian(&u0).unwrap(), l2_sq(&u0).sqrt());
        for s in &traj.states {
            assert!(rel(hamiltonian(s).unwrap(), h0) < 1e-8);
            assert!(rel(l2_sq(s).sqrt(), m0) < 1e-10);
        }
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        let back = integrate_reverse(traj.last().unwrap(), &p, &f).unwrap();
        let err = back.axpy(-1.0, &u0).unwrap();
        assert!(l2_sq(&err).sqrt() < 1e-7 * m0);
    }

    #[test]
    fn forced_growth_respects_energy_bound() {
        let f = PerturbationSpec::fixed_profile(field(16, &[(1, 1.0)]), 2.0).unwrap();
        let p = FlowParams::new(0.1, 1e-3, 5.0, 100).unwrap();
        let traj = integrate(&field(16, &[]), &p, &f).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let bound = (0.1 * t).exp() * (0.1 * t);
            assert!(l2_sq(s) <= bound * (1.0 + 1e-6), "t = {t}");
        }
        assert!(l2_sq(traj.last().unwrap()) > 0.0);
    }

    #[test]
    fn horizon_and_ceiling_guards() {
        assert!(matches!(FlowParams::new(0.5, 1e-3, 1000.0, 1), Err(Error::HorizonExceeded { .. })));
        assert!(FlowParams::new(-0.1, 1e-3, 1.0, 1).is_err());
        // ‖u‖₃ is not conserved by KdV, so a ceiling just above its initial value trips
        let mut p = FlowParams::new(0.0, 1e-4, 0.5, 1).unwrap();
        p.ceiling_factor = 1.0 + 1e-9;
        let zero = PerturbationSpec::zero(8, 32).unwrap();
        let r = integrate(&field(8, &[(1, 0.2), (2, 0.1)]), &p, &zero);
        assert!(matches!(r, Err(Error::NormCeiling { .. })), "{r:?}");
        p.ceiling_factor = 10.0;
        assert!(integrate(&field(8, &[(1, 0.2), (2, 0.1)]), &p, &zero).is_ok());
        let big = field(4, &[(1, 50.0)]);
        let r = integrate(&big, &FlowParams::new(0.0, 1e-2, 1.0, 1).unwrap(), &PerturbationSpec::zero(4, 16).unwrap());
        assert!(matches!(r, Err(Error::Stability { .. })));
    }

    #[test]
    fn truncation_examples() {
        let u = field(4, &[(1, 1.0), (-3, 1.0)]);
        assert_eq!(galerkin_truncate(&u, 2).unwrap(), field(4, &[(1, 1.0)]));
        assert_eq!(galerkin_truncate(&u, 9).unwrap(), u);
    }

    #[test]
    fn truncation_tail_bound() {
        let mut rng = crate::rng::stream(3, 0, 0);
        let n = 24;
        let coeffs: Vec<f64> = (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let u = SpectralField::from_coeffs(n, default_grid(n), coeffs).unwrap();
        for m in [1, 4, 10, 23] {
            let tail = u.axpy(-1.0, &galerkin_truncate(&u, m).unwrap()).unwrap();
            let lhs = sobolev_norm(&tail, SobolevIndex::ZERO);
            let rhs = (TAU * m as f64).powf(-2.0) * sobolev_norm(&u, SobolevIndex::new(2.0).unwrap());
            assert!(lhs <= rhs);
        }
    }

    #[test]
    fn galerkin_levels_converge() {
        let u0 = field(16, &[(1, 0.3), (-2, 0.2)]);
        let f = PerturbationSpec::zero(16, default_grid(16)).unwrap();
        let mut p = FlowParams::new(0.0, 1e-4, 0.05, 50).unwrap();
        p.norm_p = SobolevIndex::ZERO;
        let dev = galerkin_convergence_probe(&u0, &p, &f, &[2, 4, 8, 16]).unwrap();
        assert_eq!(dev[3], 0.0);
        assert!(dev[0] > 0.0);
        for w in dev.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{dev:?}");
        }
        let tiny = galerkin_convergence_probe(&field(16, &[(1, 1e-9)]), &p, &f, &[2, 16]).unwrap();
        assert!(tiny[0] < 1e-15);
        assert_eq!(galerkin_convergence_probe(&u0, &p, &f, &[16]).unwrap(), vec![0.0]);
    }

    #[test]
    fn frequencies_tend_to_kappa() {
        let u0 = field(8, &[(1, 1e-4), (-2, 1e-4), (3, 5e-5)]);
        let w = estimate_frequencies(&u0, 0.2, 3).unwrap();
        for k in 1..=3 {
            let kappa = (2.0 * PI * k as f64).powi(3);
            assert!(rel(w.freqs[k - 1], kappa) < 1e-6, "k = {k}: {}", w.freqs[k - 1]);
            assert!(w.residuals[k - 1] < 1e-4 * kappa);
        }
        assert!(matches!(estimate_frequencies(&field(8, &[(1, 1e-3)]), 0.1, 2), Err(Error::ActionBelowThreshold { k: 2, .. })));
    }

    #[test]
    fn frequencies_invariant_under_rotation() {
        use crate::birkhoff::{linear_birkhoff, linear_birkhoff_inverse_on, rotate};
        let u0 = field(8, &[(1, 2e-3), (-2, 1e-3)]);
        let v = linear_birkhoff(&u0, SobolevIndex::ZERO);
        let u1 = linear_birkhoff_inverse_on(&rotate(&v, &[1.3, -0.4]), u0.grid_size()).unwrap();
        let w0 = estimate_frequencies(&u0, 0.5, 2).unwrap();
        let w1 = estimate_frequencies(&u1, 0.5, 2).unwrap();
        for k in 0..2 {
            assert!(rel(w1.freqs[k], w0.freqs[k]) < 1e-6, "{:?} {:?}", w0.freqs, w1.freqs);
        }
    }

    #[test]
    fn smoothing_map_passes_its_spot_check() {
        let f = PerturbationSpec::smoothing_map(field(8, &[(1, 1.0)]), 0.5, 2.0).unwrap();
        let u = field(8, &[(1, 0.1), (3, 0.2)]);
        let out = f.eval(&u).unwrap();
        // u² only has even modes here, so mode 1 is the bare profile
        assert_eq!(out.get(1), 1.0);
        let k = TAU * 2.0;
        // u² ∋ (2ab + a²) cos 4πx with a = 0.1, b = 0.2
        let sq = (2.0 * 0.1 * 0.2 + 0.01) / core::f64::consts::SQRT_2;
        assert!((out.get(2) - 0.5 * sq / (1.0 + k * k)).abs() < 1e-15, "{}", out.get(2));
        assert!(PerturbationSpec::smoothing_map(field(8, &[]), 1.0, 0.5).is_err());
    }
}
