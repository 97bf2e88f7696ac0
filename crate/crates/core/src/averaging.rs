//! Slow action dynamics and their angle averages.
//!
//! In slow time `τ = εt` the actions obey `dI_k/dτ = F_k(u)` with
//! `F_k = dI_k(u)·f(u)`. Averaging `F` over the angles gives the field of the
//! averaged equation `dJ/dτ = ⟨F⟩(J)`. Angles enter through
//! `u(J, θ) = dΨ(0)⁻¹ assemble(J, θ)`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;

use crate::birkhoff::{
    actions, assemble, hill_actions, linear_birkhoff, linear_birkhoff_inverse, rotate, weighted_l1,
    ActionVector, AngleVector, BirkhoffState,
};
use crate::flow::{PerturbationSpec, Trajectory};
use crate::quad::CompositeGauss;
use crate::spectral::{l2_sq, SobolevIndex, SpectralField};
use crate::{Error, Result, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureScheme {
    MonteCarlo,
    /// Randomly shifted rank-1 lattice; falls back to Monte Carlo above
    /// [`LATTICE_MAX_DIM`] angles.
    LatticeQmc,
}

pub const LATTICE_MAX_DIM: usize = 8;

/// Which action functional `u ↦ I(u)` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionBackend {
    /// `½|dΨ(0)u|²`.
    Linear,
    /// Gap actions of the Hill operator, for the first `modes` gaps.
    Hill { modes: usize },
}

impl ActionBackend {
    pub fn name(&self) -> &'static str {
        match self {
            ActionBackend::Linear => "linear",
            ActionBackend::Hill { .. } => "hill",
        }
    }
}

pub trait ActionFunctional {
    /// Actions of `u` on all of its modes (zero where not computed).
    fn actions_of(&self, u: &SpectralField, p: SobolevIndex) -> Result<ActionVector>;
}

impl ActionFunctional for ActionBackend {
    fn actions_of(&self, u: &SpectralField, p: SobolevIndex) -> Result<ActionVector> {
        match *self {
            ActionBackend::Linear => Ok(actions(&linear_birkhoff(u, p))),
            ActionBackend::Hill { modes } => {
                let k = modes.min(u.n_modes());
                let mut a = hill_actions(u, k, p)?.actions().to_vec();
                a.resize(u.n_modes(), 0.0);
                ActionVector::new(a, p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingConfig {
    pub n_angles: usize,
    pub m_samples: usize,
    pub scheme: QuadratureScheme,
    pub fd_step: f64,
    pub backend: ActionBackend,
    /// Independent random shifts of the lattice (its error estimate).
    pub shifts: usize,
    /// Norm used for clip accounting and Lipschitz estimates.
    pub p: SobolevIndex,
}

impl AveragingConfig {
    pub fn new(n_angles: usize, m_samples: usize, scheme: QuadratureScheme) -> Result<Self> {
        let c = AveragingConfig {
            n_angles,
            m_samples,
            scheme,
            fd_step: 1e-4,
            backend: ActionBackend::Linear,
            shifts: 8,
            p: SobolevIndex::ONE,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_angles == 0 {
            return Err(Error::invalid("averaging: n_angles must be positive"));
        }
        if self.m_samples < 16 {
            return Err(Error::invalid("averaging: m_samples must be at least 16"));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 1e-2) {
            return Err(Error::invalid("averaging: fd_step must lie in (0, 1e-2]"));
        }
        if self.scheme == QuadratureScheme::LatticeQmc && (self.shifts < 2 || self.m_samples / self.shifts < 2) {
            return Err(Error::invalid("averaging: lattice needs >= 2 shifts of >= 2 points"));
        }
        Ok(())
    }
}

/// Quadrature value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// A vector of action rates `dI_k/dτ` (signed).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRate {
    pub rates: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ActionRate {
    pub fn norm(&self, p: SobolevIndex) -> f64 {
        weighted_l1(&self.rates, p)
    }
}

/// `F_k(u) = [I_k(u + hf) − I_k(u − hf)]/(2h)`, `h = fd_step·‖u‖₀/max(‖f‖₀, 1)`
/// (`h = fd_step` when `u ≈ 0`).
#[allow(non_snake_case)]
pub fn slow_field_F(u: &SpectralField, f: &PerturbationSpec, cfg: &AveragingConfig) -> Result<ActionRate> {
    let fu = f.eval(u)?;
    slow_field_with_step(u, &fu, cfg, step_size(u, &fu, cfg.fd_step))
}

fn step_size(u: &SpectralField, fu: &SpectralField, fd_step: f64) -> f64 {
    let nu = l2_sq(u).sqrt();
    let nf = l2_sq(fu).sqrt();
    if nu < 1e-12 {
        fd_step
    } else {
        fd_step * nu / nf.max(1.0)
    }
}

pub(crate) fn slow_field_with_step(
    u: &SpectralField,
    fu: &SpectralField,
    cfg: &AveragingConfig,
    h: f64,
) -> Result<ActionRate> {
    let plus = cfg.backend.actions_of(&u.axpy(h, fu)?, cfg.p)?;
    let minus = cfg.backend.actions_of(&u.axpy(-h, fu)?, cfg.p)?;
    let rates = plus.actions().iter().zip(minus.actions()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    Ok(ActionRate { rates, stderr: vec![0.0; u.n_modes()] })
}

/// Rank-1 lattice `{k z / m}` with a Korobov generator `z = (1, a, a², …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub m: usize,
    pub z: Vec<usize>,
}

impl Lattice {
    /// Korobov lattice whose multiplier minimizes the `P₂` figure of merit.
    pub fn korobov(m: usize, dim: usize) -> Self {
        let gen = |a: usize| {
            let mut z = Vec::with_capacity(dim);
            let mut c = 1usize;
            for _ in 0..dim {
                z.push(c % m);
                c = c * a % m;
            }
            z
        };
        if dim <= 1 || m <= 2 {
            return Lattice { m, z: gen(1) };
        }
        let mut best = (f64::INFINITY, 1);
        for a in 1..=m / 2 {
            let z = gen(a);
            let crit = p2_criterion(m, &z);
            if crit < best.0 {
                best = (crit, a);
            }
        }
        Lattice { m, z: gen(best.1) }
    }

    /// Point `k` shifted by `shift` (in units of the period), as angles.
    pub fn point(&self, k: usize, shift: &[f64]) -> Vec<f64> {
        self.z
            .iter()
            .zip(shift)
            .map(|(&zj, s)| TAU * ((k * zj % self.m) as f64 / self.m as f64 + s).fract())
            .collect()
    }
}

// P₂(z) = −1 + (1/m) Σ_k Π_j (1 + 2π² B₂({k z_j / m})),  B₂(x) = x² − x + 1/6
fn p2_criterion(m: usize, z: &[usize]) -> f64 {
    let c = 2.0 * core::f64::consts::PI * core::f64::consts::PI;
    let mut sum = 0.0;
    for k in 0..m {
        let mut prod = 1.0;
        for &zj in z {
            let x = (k * zj % m) as f64 / m as f64;
            prod *= 1.0 + c * (x * x - x + 1.0 / 6.0);
        }
        sum += prod;
    }
    sum / m as f64 - 1.0
}

/// Quadrature nodes on `T^N` split into independent groups; the estimate is
/// the mean of group means and its error the spread of the group means.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusQuadrature {
    dim: usize,
    groups: Vec<Vec<Vec<f64>>>,
}

impl TorusQuadrature {
    pub fn new(cfg: &AveragingConfig, seed: u64) -> Self {
        let dim = cfg.n_angles;
        let groups = if cfg.scheme == QuadratureScheme::LatticeQmc && dim <= LATTICE_MAX_DIM {
            let per = cfg.m_samples / cfg.shifts;
            let lat = Lattice::korobov(per, dim);
            (0..cfg.shifts as u64)
                .map(|r| {
                    let mut rng = crate::rng::stream(seed, r, 0x1a77);
                    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    (0..per).map(|k| lat.point(k, &shift)).collect()
                })
                .collect()
        } else {
            (0..cfg.m_samples as u64)
                .map(|k| {
                    let mut rng = crate::rng::stream(seed, k, 0x3c);
                    vec![(0..dim).map(|_| TAU * rng.random::<f64>()).collect()]
                })
                .collect()
        };
        TorusQuadrature { dim, groups }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Componentwise estimate of `∫ g(θ) dθ` (normalized Haar measure).
    pub fn integrate(&self, mut g: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(self.groups.len());
        let mut anchor: Option<Vec<f64>> = None;
        for grp in &self.groups {
            let mut acc: Option<Vec<f64>> = None;
            for th in grp {
                let val = g(th)?;
                // sums are taken relative to the first value, so a constant
                // integrand is reproduced without rounding
                let a = anchor.get_or_insert_with(|| val.clone());
                let s = acc.get_or_insert_with(|| vec![0.0; val.len()]);
                for ((s, v), a) in s.iter_mut().zip(&val).zip(a.iter()) {
                    *s += v - a;
                }
            }
            let n = grp.len() as f64;
            means.push(acc.unwrap_or_default().into_iter().map(|s| s / n).collect());
        }
        let anchor = anchor.unwrap_or_default();
        let r = means.len() as f64;
        let dim = anchor.len();
        let mut value = vec![0.0; dim];
        let mut stderr = vec![0.0; dim];
        for c in 0..dim {
            let mean = means.iter().map(|m| m[c]).sum::<f64>() / r;
            let var = means.iter().map(|m| (m[c] - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
            value[c] = anchor[c] + mean;
            stderr[c] = (var / r).sqrt();
        }
        Ok((value, stderr))
    }
}

/// `⟨g⟩_N(v)`: average of `g ∘ (Φ_θ ⊕ Id)` over `θ ∈ T^N` acting on the
/// first `N = cfg.n_angles` pairs.
pub fn average_first_n(
    mut g: impl FnMut(&BirkhoffState) -> Result<f64>,
    v: &BirkhoffState,
    cfg: &AveragingConfig,
    seed: u64,
) -> Result<Estimate> {
    let quad = TorusQuadrature::new(cfg, seed);
    let (value, stderr) = quad.integrate(|th| Ok(vec![g(&rotate(v, th))?]))?;
    Ok(Estimate { value: value[0], stderr: stderr[0] })
}

/// `⟨F⟩_N(J)` with `u(θ) = dΨ(0)⁻¹ assemble(J, θ)`; actions beyond
/// `n_angles` are set to zero.
pub fn averaged_field(j: &ActionVector, f: &PerturbationSpec, cfg: &AveragingConfig, seed: u64) -> Result<ActionRate> {
    let quad = TorusQuadrature::new(cfg, seed);
    averaged_field_with(j, f, cfg, &quad)
}

pub fn averaged_field_with(
    j: &ActionVector,
    f: &PerturbationSpec,
    cfg: &AveragingConfig,
    quad: &TorusQuadrature,
) -> Result<ActionRate> {
    let n = j.n_modes();
    let mut acts = j.actions().to_vec();
    acts[cfg.n_angles.min(n)..].iter_mut().for_each(|a| *a = 0.0);
    if acts.iter().all(|a| *a == 0.0) && f.is_zero() {
        return Ok(ActionRate { rates: vec![0.0; n], stderr: vec![0.0; n] });
    }
    let jt = ActionVector::new(acts, j.p())?;
    let (rates, stderr) = quad.integrate(|th| {
        let mut phi = vec![0.0; n];
        phi[..th.len().min(n)].copy_from_slice(&th[..th.len().min(n)]);
        let u = linear_birkhoff_inverse(&assemble(&jt, &AngleVector::new(phi))?)?;
        Ok(slow_field_F(&u, f, cfg)?.rates)
    })?;
    Ok(ActionRate { rates, stderr })
}

/// Solution of the averaged equation.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTrajectory {
    pub taus: Vec<f64>,
    pub j: Vec<ActionVector>,
    /// `|stderr of ⟨F⟩|_p` at the start of each step.
    pub field_noise: Vec<f64>,
    /// `(τ, mode, clipped value)` for every negative action set to zero.
    pub clips: Vec<(f64, usize, f64)>,
    /// Empirical Lipschitz constant used to choose the step.
    pub lipschitz: f64,
}

impl AveragedTrajectory {
    /// `J(τ)` by linear interpolation between steps.
    pub fn at(&self, tau: f64) -> Result<ActionVector> {
        let last = *self.taus.last().unwrap_or(&0.0);
        if tau > last * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::RangeMismatch { needed: tau, available: last });
        }
        let i = self.taus.partition_point(|t| *t <= tau).clamp(1, self.taus.len().max(2) - 1);
        if self.taus.len() == 1 {
            return Ok(self.j[0].clone());
        }
        let (t0, t1) = (self.taus[i - 1], self.taus[i]);
        let w = ((tau - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = self.j[i - 1].actions().iter().zip(self.j[i].actions()).map(|(a, b)| a + w * (b - a)).collect();
        ActionVector::new(a, self.j[0].p())
    }
}

/// RK4 for `dJ/dτ = ⟨F⟩_N(J)` on `[0, t_slow]`. The step is chosen so that
/// an empirical Lipschitz constant times the step is below 0.1 (and at
/// least 4 steps are taken); `min_steps` can raise that floor.
pub fn integrate_averaged(
    j0: &ActionVector,
    t_slow: f64,
    f: &PerturbationSpec,
    cfg: &AveragingConfig,
    seed: u64,
    min_steps: usize,
) -> Result<AveragedTrajectory> {
    cfg.validate()?;
    if !(t_slow > 0.0 && t_slow.is_finite()) {
        return Err(Error::invalid("slow horizon must be positive"));
    }
    let quad = TorusQuadrature::new(cfg, seed);
    let p = cfg.p;
    let field = |j: &ActionVector| averaged_field_with(j, f, cfg, &quad);
    let lipschitz = empirical_lipschitz(j0, &field, p, seed)?;
    let steps = ((t_slow * lipschitz / 0.1).ceil() as usize).max(4).max(min_steps);
    let h = t_slow / steps as f64;
    let n = j0.n_modes();
    let mut traj = AveragedTrajectory {
        taus: vec![0.0],
        j: vec![j0.clone()],
        field_noise: Vec::with_capacity(steps),
        clips: Vec::new(),
        lipschitz,
    };
    let mut j = j0.actions().to_vec();
    let shifted = |j: &[f64], k: &[f64], c: f64| -> Vec<f64> { j.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    // stages may dip below zero by quadrature noise; evaluate at the clipped point
    let eval = |x: Vec<f64>| field(&ActionVector::new(x.into_iter().map(|a| a.max(0.0)).collect(), p)?);
    for s in 1..=steps {
        let k1 = eval(j.clone())?;
        traj.field_noise.push(weighted_l1(&k1.stderr, p));
        let k2 = eval(shifted(&j, &k1.rates, 0.5 * h))?;
        let k3 = eval(shifted(&j, &k2.rates, 0.5 * h))?;
        let k4 = eval(shifted(&j, &k3.rates, h))?;
        for i in 0..n {
            j[i] += h / 6.0 * (k1.rates[i] + 2.0 * (k2.rates[i] + k3.rates[i]) + k4.rates[i]);
        }
        let tau = s as f64 * h;
        let mut clipped = vec![0.0; n];
        for (i, a) in j.iter_mut().enumerate() {
            if *a < 0.0 {
                traj.clips.push((tau, i + 1, *a));
                clipped[i] = *a;
                *a = 0.0;
            }
        }
        let lost = weighted_l1(&clipped, p);
        if lost > 0.0 {
            let total = weighted_l1(&j, p) + lost;
            if lost > 0.01 * total {
                return Err(Error::ClipExceeded { tau, fraction: lost / total });
            }
        }
        traj.taus.push(tau);
        traj.j.push(ActionVector::new(j.clone(), p)?);
    }
    Ok(traj)
}

/// Largest `|⟨F⟩(J₁) − ⟨F⟩(J₂)|_p / |J₁ − J₂|_p` over a few random relative
/// perturbations of `j0` (5% per mode), floored at 1e-12.
pub fn empirical_lipschitz(
    j0: &ActionVector,
    field: &dyn Fn(&ActionVector) -> Result<ActionRate>,
    p: SobolevIndex,
    seed: u64,
) -> Result<f64> {
    let base = field(j0)?;
    let mut rng = crate::rng::stream(seed, 0, 0x11b);
    let mut worst: f64 = 1e-12;
    let scale = j0.actions().iter().cloned().fold(0.0, f64::max).max(1e-12);
    for _ in 0..3 {
        let a: Vec<f64> = j0
            .actions()
            .iter()
            .map(|a| (a + (0.05 * a + 1e-3 * scale) * (2.0 * rng.random::<f64>() - 1.0)).max(0.0))
            .collect();
        let j1 = ActionVector::new(a, p)?;
        let dj = j1.distance(j0, p);
        if dj == 0.0 {
            continue;
        }
        let df: Vec<f64> = field(&j1)?.rates.iter().zip(&base.rates).map(|(a, b)| a - b).collect();
        worst = worst.max(weighted_l1(&df, p) / dj);
    }
    Ok(worst)
}

/// `|I(u(τ)) − J(τ)|_p` at each recorded state of `traj` (`τ = εt`).
pub fn action_deviation_series(
    traj: &Trajectory,
    avg: &AveragedTrajectory,
    p: SobolevIndex,
    backend: &dyn ActionFunctional,
) -> Result<Vec<(f64, f64)>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, u)| {
            let tau = traj.eps * t;
            let j = avg.at(tau)?;
            let i = backend.actions_of(u, p)?;
            Ok((tau, i.distance(&j, p)))
        })
        .collect()
}

/// `sup_τ |I(u(τ)) − J(τ)|_p` over the recorded states of `traj`.
pub fn compare_actions(
    traj: &Trajectory,
    avg: &AveragedTrajectory,
    p: SobolevIndex,
    backend: &dyn ActionFunctional,
) -> Result<f64> {
    Ok(action_deviation_series(traj, avg, p, backend)?.into_iter().map(|(_, d)| d).fold(0.0, f64::max))
}

/// Real trigonometric polynomial `g₀ + Σ_k a_k cos(k·x) + b_k sin(k·x)` on `T^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub mean: f64,
    pub terms: Vec<(Vec<i64>, f64, f64)>,
}

impl TrigPolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.mean
            + self
                .terms
                .iter()
                .map(|(k, a, b)| {
                    let ph: f64 = k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
                    let (s, c) = ph.sin_cos();
                    a * c + b * s
                })
                .sum::<f64>()
    }

    pub fn order(&self) -> usize {
        self.terms.iter().map(|(k, _, _)| k.iter().map(|c| c.unsigned_abs() as usize).sum()).max().unwrap_or(0)
    }

    /// `Σ_{k≠0} 2|ĝ_k|/(T|k·ω|)` over both `±k` of every term.
    pub fn error_envelope(&self, omega: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(k, a, b)| {
                let kw: f64 = k.iter().zip(omega).map(|(k, w)| *k as f64 * w).sum();
                // |ĝ_{±k}| = √(a² + b²)/2
                2.0 * 2.0 * (0.5 * a.hypot(*b)) / (t * kw.abs())
            })
            .sum()
    }
}

/// Nonzero `k ∈ ℤⁿ` with `|k|₁ ≤ order`, one of each `±k` pair.
pub fn harmonics(n: usize, order: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut k = vec![0i64; n];
    fn rec(i: usize, left: i64, k: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == k.len() {
            // keep k whose first nonzero entry is positive
            if let Some(first) = k.iter().find(|c| **c != 0) {
                if *first > 0 {
                    out.push(k.clone());
                }
            }
            return;
        }
        for c in -left..=left {
            k[i] = c;
            rec(i + 1, left - c.abs(), k, out);
        }
        k[i] = 0;
    }
    rec(0, order as i64, &mut k, &mut out);
    out
}

/// Rejects `ω` with `|k·ω| ≤ 1e-9` for some `0 < |k|₁ ≤ order`.
pub fn check_nonresonant(omega: &[f64], order: usize) -> Result<()> {
    for k in harmonics(omega.len(), order) {
        let kw: f64 = k.iter().zip(omega).map(|(k, w)| *k as f64 * w).sum();
        if kw.abs() <= 1e-9 {
            return Err(Error::Resonance { k, value: kw.abs() });
        }
    }
    Ok(())
}

/// `(1/T) ∫₀^T g(x₀ + ωt) dt`, after checking non-resonance up to `order`.
/// Gauss–Legendre panels are sized so that no harmonic up to `order` turns
/// more than one radian per panel.
pub fn time_average_quasiperiodic(
    g: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    omega: &[f64],
    t: f64,
    order: usize,
) -> Result<f64> {
    let series = time_average_series(g, x0, omega, t, order, 1)?;
    Ok(series.last().map(|s| s.1).unwrap_or(0.0))
}

/// Running averages `(T', (1/T')∫₀^{T'} g)` at `T' = t_end·i/points`,
/// `i = 1..=points`.
pub fn time_average_series(
    g: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    omega: &[f64],
    t_end: f64,
    order: usize,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if x0.len() != omega.len() {
        return Err(Error::ModeMismatch(x0.len(), omega.len()));
    }
    if !(t_end > 0.0) || points == 0 {
        return Err(Error::invalid("time average needs T > 0 and at least one output point"));
    }
    check_nonresonant(omega, order)?;
    let speed = order.max(1) as f64 * omega.iter().map(|w| w.abs()).fold(0.0, f64::max) * omega.len() as f64;
    let seg = t_end / points as f64;
    let panels = (seg * speed).ceil().max(1.0) as usize;
    let rule = CompositeGauss::new(8);
    let mut x = vec![0.0; x0.len()];
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let a = i as f64 * seg;
        acc += rule.integrate(a, a + seg, panels, |s| {
            for ((x, x0), w) in x.iter_mut().zip(x0).zip(omega) {
                *x = x0 + w * s;
            }
            g(&x)
        });
        let tt = (i + 1) as f64 * seg;
        out.push((tt, acc / tt));
    }
    Ok(out)
}

/// `|(1/M) Σ_m e^{i L·φ_m}|` over a series of angle vectors.
pub fn weyl_sum(phi_series: &[AngleVector], l: &[i64]) -> Result<f64> {
    let mut acc = WeylAccumulator::new(vec![l.to_vec()])?;
    for phi in phi_series {
        acc.push(phi.angles());
    }
    Ok(acc.values()[0])
}

/// Streaming Weyl sums for a fixed set of harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylAccumulator {
    harmonics: Vec<Vec<i64>>,
    sums: Vec<Complex64>,
    count: usize,
}

impl WeylAccumulator {
    pub fn new(harmonics: Vec<Vec<i64>>) -> Result<Self> {
        if harmonics.iter().any(|l| l.iter().all(|c| *c == 0)) {
            return Err(Error::invalid("Weyl sum needs L != 0"));
        }
        let n = harmonics.len();
        Ok(WeylAccumulator { harmonics, sums: vec![Complex64::new(0.0, 0.0); n], count: 0 })
    }

    pub fn harmonics(&self) -> &[Vec<i64>] {
        &self.harmonics
    }

    pub fn push(&mut self, phi: &[f64]) {
        for (l, s) in self.harmonics.iter().zip(self.sums.iter_mut()) {
            let ph: f64 = l.iter().zip(phi).map(|(l, p)| *l as f64 * p).sum();
            *s += Complex64::from_polar(1.0, ph);
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sums.iter().map(|s| (s.norm() / n).min(1.0)).collect()
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::default_grid;
    use core::f64::consts::{PI, SQRT_2};

    fn field(n: usize, modes: &[(i64, f64)]) -> SpectralField {
        SpectralField::from_modes(n, default_grid(n), modes).unwrap()
    }

    fn forcing(n: usize) -> PerturbationSpec {
        PerturbationSpec::fixed_profile(field(n, &[(1, 1.0), (-2, 0.5)]), 2.0).unwrap()
    }

    #[test]
    fn slow_field_at_origin_vanishes() {
        let cfg = AveragingConfig::new(2, 64, QuadratureScheme::LatticeQmc).unwrap();
        let r = slow_field_F(&field(4, &[]), &forcing(4), &cfg).unwrap();
        assert!(r.rates.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn slow_field_linear_closed_form() {
        let cfg = AveragingConfig::new(2, 64, QuadratureScheme::LatticeQmc).unwrap();
        let u = field(4, &[(1, 0.03), (-1, 0.01), (2, -0.02)]);
        let f = forcing(4);
        let r = slow_field_F(&u, &f, &cfg).unwrap();
        let vu = linear_birkhoff(&u, cfg.p);
        let vf = linear_birkhoff(&f.eval(&u).unwrap(), cfg.p);
        for k in 0..4 {
            let (a, b) = (vu.pairs()[k], vf.pairs()[k]);
            let exact = a[0] * b[0] + a[1] * b[1];
            assert!((r.rates[k] - exact).abs() < 1e-12, "{k}: {} vs {exact}", r.rates[k]);
        }
    }

    #[test]
    fn hill_slow_field_richardson() {
        let mut cfg = AveragingConfig::new(2, 64, QuadratureScheme::LatticeQmc).unwrap();
        cfg.backend = ActionBackend::Hill { modes: 2 };
        let u = field(4, &[(1, 0.3), (-2, 0.2)]);
        let fu = forcing(4).eval(&u).unwrap();
        let h = 0.02;
        let f1 = slow_field_with_step(&u, &fu, &cfg, h).unwrap().rates[0];
        let f2 = slow_field_with_step(&u, &fu, &cfg, h / 2.0).unwrap().rates[0];
        let f4 = slow_field_with_step(&u, &fu, &cfg, h / 4.0).unwrap().rates[0];
        let extrap = (4.0 * f4 - f2) / 3.0;
        assert!((f2 - extrap).abs() * 3.5 <= (f1 - extrap).abs(), "{f1} {f2} {f4}");
    }

    #[test]
    fn angle_independent_functional_is_fixed() {
        let cfg = AveragingConfig::new(3, 256, QuadratureScheme::LatticeQmc).unwrap();
        let v = BirkhoffState::new(vec![[0.3, 0.1], [-0.2, 0.05], [0.01, 0.4], [1.0, 2.0]], SobolevIndex::ONE);
        // a function of the actions only
        let g = |w: &BirkhoffState| -> Result<f64> { Ok(actions(w).norm().sqrt()) };
        let target = g(&v).unwrap();
        let e = average_first_n(
            |w| Ok(actions(&w.truncated(0)).norm() + g(&v)? + 0.0 * w.norm()),
            &v,
            &cfg,
            1,
        )
        .unwrap();
        assert_eq!(e.value, target);
        assert_eq!(e.stderr, 0.0);
        let e = average_first_n(|w| Ok(w.norm_sq()), &v, &cfg, 1).unwrap();
        assert!((e.value - v.norm_sq()).abs() <= 4.0 * f64::EPSILON * v.norm_sq());
        assert!(e.stderr <= 4.0 * f64::EPSILON * v.norm_sq());
    }

    #[test]
    fn odd_functional_averages_to_zero() {
        let v = BirkhoffState::new(vec![[0.3, 0.1], [-0.2, 0.05]], SobolevIndex::ONE);
        for scheme in [QuadratureScheme::LatticeQmc, QuadratureScheme::MonteCarlo] {
            let cfg = AveragingConfig::new(2, 256, scheme).unwrap();
            let e = average_first_n(|w| Ok(w.pairs()[0][0]), &v, &cfg, 4).unwrap();
            assert!(e.value.abs() <= 4.0 * e.stderr + 1e-15, "{scheme:?}: {e:?}");
        }
    }

    #[test]
    fn monte_carlo_error_halves() {
        let v = BirkhoffState::new(vec![[0.3, 0.1], [-0.2, 0.05]], SobolevIndex::ONE);
        let g = |w: &BirkhoffState| Ok(w.pairs()[0][0] * w.pairs()[1][1] + w.pairs()[0][1]);
        let mut errs = [0.0; 2];
        for (i, m) in [1000usize, 4000].into_iter().enumerate() {
            let cfg = AveragingConfig::new(2, m, QuadratureScheme::MonteCarlo).unwrap();
            errs[i] = (0..20).map(|s| average_first_n(g, &v, &cfg, s).unwrap().stderr).sum::<f64>() / 20.0;
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 2.0).abs() <= 0.6, "{ratio}");
    }

    #[test]
    fn averaged_field_of_fixed_profile_vanishes() {
        let cfg = AveragingConfig::new(3, 64, QuadratureScheme::LatticeQmc).unwrap();
        let j = ActionVector::new(vec![1e-4, 2e-5, 1e-6, 0.0], SobolevIndex::ONE).unwrap();
        let r = averaged_field(&j, &forcing(4), &cfg, 3).unwrap();
        // F_k is linear in the pair k; the lattice integrates first harmonics exactly
        assert!(r.rates.iter().all(|x| x.abs() < 1e-15), "{r:?}");
        let zero = averaged_field(&ActionVector::zeros(4, SobolevIndex::ONE), &PerturbationSpec::zero(4, 16).unwrap(), &cfg, 3).unwrap();
        assert!(zero.rates.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn averaged_smoothing_field_is_stationary_and_converges() {
        let prof = field(4, &[(1, 1.0)]);
        let f = PerturbationSpec::smoothing_map(prof, 5.0, 2.0).unwrap();
        let j = ActionVector::new(vec![2e-3, 1e-3, 0.0, 0.0], SobolevIndex::ONE).unwrap();
        let cfg = AveragingConfig::new(2, 512, QuadratureScheme::LatticeQmc).unwrap();
        let a = averaged_field(&j, &f, &cfg, 1).unwrap();
        let b = averaged_field(&j, &f, &cfg, 2).unwrap();
        for k in 0..2 {
            let tol = 3.0 * (a.stderr[k] + b.stderr[k]) + 1e-15;
            assert!((a.rates[k] - b.rates[k]).abs() <= tol);
        }
        let wide = AveragingConfig { n_angles: 3, ..cfg };
        let c = averaged_field(&j, &f, &wide, 1).unwrap();
        for k in 0..2 {
            assert!((a.rates[k] - c.rates[k]).abs() <= 3.0 * (a.stderr[k] + c.stderr[k]) + 1e-15);
        }
    }

    #[test]
    fn averaged_equation_constant_without_forcing() {
        let cfg = AveragingConfig::new(2, 64, QuadratureScheme::LatticeQmc).unwrap();
        let j0 = ActionVector::new(vec![1e-4, 2e-5], SobolevIndex::ONE).unwrap();
        let tr = integrate_averaged(&j0, 0.5, &PerturbationSpec::zero(2, 8).unwrap(), &cfg, 1, 1).unwrap();
        assert!(tr.j.iter().all(|j| j == &j0));
        assert!(tr.clips.is_empty());
    }

    #[test]
    fn averaged_equation_step_refinement() {
        let prof = field(4, &[(1, 1.0)]);
        let f = PerturbationSpec::smoothing_map(prof, 5.0, 2.0).unwrap();
        let cfg = AveragingConfig::new(2, 128, QuadratureScheme::LatticeQmc).unwrap();
        let j0 = ActionVector::new(vec![2e-3, 1e-3, 0.0, 0.0], SobolevIndex::ONE).unwrap();
        let a = integrate_averaged(&j0, 0.5, &f, &cfg, 1, 8).unwrap();
        let b = integrate_averaged(&j0, 0.5, &f, &cfg, 1, 16).unwrap();
        let (ea, eb) = (a.j.last().unwrap(), b.j.last().unwrap());
        assert!(ea.distance(eb, SobolevIndex::ONE) < 1e-6 * eb.norm());
        assert!(a.lipschitz.is_finite() && a.lipschitz > 0.0);
    }

    #[test]
    fn interpolation_and_range() {
        let j0 = ActionVector::new(vec![1.0], SobolevIndex::ZERO).unwrap();
        let j1 = ActionVector::new(vec![3.0], SobolevIndex::ZERO).unwrap();
        let tr = AveragedTrajectory { taus: vec![0.0, 1.0], j: vec![j0, j1], field_noise: vec![], clips: vec![], lipschitz: 0.0 };
        assert_eq!(tr.at(0.25).unwrap().get(1), 1.5);
        assert!(matches!(tr.at(1.5), Err(Error::RangeMismatch { .. })));
    }

    #[test]
    fn quasiperiodic_average_examples() {
        let one = time_average_quasiperiodic(|_| 1.0, &[0.0, 0.0], &[1.0, SQRT_2], 37.0, 3).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        let c = time_average_quasiperiodic(|x| x[0].cos(), &[0.0, 0.0], &[1.0, SQRT_2], 100.0, 1).unwrap();
        assert!(c.abs() <= 2.0 / 100.0 + 1e-12);
        assert!((c - 100f64.sin() / 100.0).abs() < 1e-13);
        assert!(matches!(
            time_average_quasiperiodic(|_| 0.0, &[0.0, 0.0], &[1.0, 2.0], 1.0, 3),
            Err(Error::Resonance { .. })
        ));
    }

    #[test]
    fn lattice_integrates_low_harmonics_exactly() {
        let lat = Lattice::korobov(61, 3);
        for k in harmonics(3, 3) {
            let s: Complex64 = (0..61)
                .map(|i| {
                    let th = lat.point(i, &[0.1, 0.2, 0.3]);
                    Complex64::from_polar(1.0, k.iter().zip(&th).map(|(k, t)| *k as f64 * t).sum())
                })
                .sum();
            assert!(s.norm() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn harmonic_enumeration() {
        let h = harmonics(3, 2);
        // |k|₁ ≤ 2 in ℤ³: 1 + 6 + 18 = 25 points, 24 nonzero, 12 up to sign
        assert_eq!(h.len(), 12);
        assert!(h.contains(&vec![1, -1, 0]) && !h.contains(&vec![-1, 1, 0]));
    }

    #[test]
    fn weyl_sum_examples() {
        let constant: Vec<AngleVector> = (0..50).map(|_| AngleVector::new(vec![0.7, 2.0])).collect();
        assert!((weyl_sum(&constant, &[1, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert!(weyl_sum(&constant, &[0, 0]).is_err());
        let mut rng = crate::rng::stream(42, 0, 0);
        let m = 10_000;
        let iid: Vec<AngleVector> =
            (0..m).map(|_| AngleVector::new(vec![TAU * rng.random::<f64>(), TAU * rng.random::<f64>()])).collect();
        for l in harmonics(2, 1) {
            assert!(weyl_sum(&iid, &l).unwrap() <= 3.0 / (m as f64).sqrt());
        }
        let s = weyl_sum(&[AngleVector::new(vec![0.0]), AngleVector::new(vec![PI])], &[1]).unwrap();
        assert!(s < 1e-15);
    }
}
