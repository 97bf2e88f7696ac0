//! Admissible Gaussian measures on `h^p` and their transport by the
//! slow-time Galerkin flow.
//!
//! Under the measure, each component of `v_j` is an independent
//! `N(0, σ_j (2πj)^{-(1+2p)})`. The flow is modelled in `v`-space with the
//! linearized Birkhoff map: `dv_j/dτ = ε⁻¹(2πj)³ v_j^⊥ + X_j(v)`, where
//! `X = dΨ(0) f(dΨ(0)⁻¹ v)` and `v^⊥ = (-v_{-j}, v_j)`.
//!
//! Liouville: for `b` the density of the measure and `V` the field,
//! `μ(S^τ A) = ∫_A exp(A(τ, v)) dμ` with `A = ∫₀^τ c(v(s)) ds` and
//! `c = ∇log b · V + div V = -Σ_j (2πj)^{2p+1} (v_j·X_j)/σ_j + div X`.
//! The rotation contributes nothing to `c`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::birkhoff::{linear_birkhoff, linear_birkhoff_inverse, weight, BirkhoffState};
use crate::flow::PerturbationSpec;
use crate::spectral::SobolevIndex;
use crate::{Error, Result, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaRule {
    /// `σ_j = scale · j^{-exponent}`.
    Power { exponent: f64, scale: f64 },
    Explicit,
}

/// Parameters `(p, ζ₀, σ)` of a diagonal Gaussian measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    p: SobolevIndex,
    zeta0: f64,
    sigma: Vec<f64>,
    rule: SigmaRule,
}

impl MeasureSpec {
    /// Bound on `sup_j j^{-ζ₀}/σ_j`.
    pub const RATIO_BOUND: f64 = 1e3;
    /// Allowed relative increment of the covariance trace at the last mode.
    pub const TAIL_TOL: f64 = 1e-6;

    pub fn new(p: SobolevIndex, zeta0: f64, sigma: Vec<f64>, rule: SigmaRule) -> Result<Self> {
        if !(zeta0 > 1.0 && zeta0.is_finite()) {
            return Err(Error::invalid("measure: zeta0 must be > 1"));
        }
        if sigma.is_empty() || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("measure: sigma must be nonempty and positive"));
        }
        let m = MeasureSpec { p, zeta0, sigma, rule };
        // summability surrogate on the covariance trace Σ σ_j (2πj)^{-(1+2p)}
        let n = m.n_modes();
        let trace = m.trace();
        let last = m.variance(n);
        if n > 1 && last > Self::TAIL_TOL * trace {
            return Err(Error::invalid(alloc::format!(
                "measure: covariance trace not converged at the truncation edge (last term {last:e} of {trace:e})"
            )));
        }
        let ratio = m
            .sigma
            .iter()
            .enumerate()
            .map(|(i, s)| ((i + 1) as f64).powf(-zeta0) / s)
            .fold(0.0, f64::max);
        if ratio > Self::RATIO_BOUND {
            return Err(Error::invalid(alloc::format!(
                "measure: sup j^-zeta0/sigma_j = {ratio:e} exceeds {}",
                Self::RATIO_BOUND
            )));
        }
        Ok(m)
    }

    pub fn power_law(n_modes: usize, p: SobolevIndex, zeta0: f64, exponent: f64, scale: f64) -> Result<Self> {
        let sigma = (1..=n_modes).map(|j| scale * (j as f64).powf(-exponent)).collect();
        Self::new(p, zeta0, sigma, SigmaRule::Power { exponent, scale })
    }

    /// `p = 3`, `ζ₀ = 2`, `σ_j = j^{-2}`.
    pub fn default_measure(n_modes: usize) -> Result<Self> {
        Self::power_law(n_modes, SobolevIndex::THREE, 2.0, 2.0, 1.0)
    }

    pub fn n_modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn p(&self) -> SobolevIndex {
        self.p
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rule(&self) -> SigmaRule {
        self.rule
    }

    /// Variance of each component of `v_j`, which is also `E[I_j]`.
    pub fn variance(&self, j: usize) -> f64 {
        self.sigma[j - 1] / weight(j, self.p)
    }

    /// `Σ_j σ_j (2πj)^{-(1+2p)} = ½ E‖v‖²_{h⁰}`.
    pub fn trace(&self) -> f64 {
        (1..=self.n_modes()).map(|j| self.variance(j)).sum()
    }

    /// `E|v|_p² = 2 Σ σ_j`.
    pub fn expected_norm_sq(&self) -> f64 {
        2.0 * self.sigma.iter().sum::<f64>()
    }

    /// Same law with every `σ_j` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let rule = match self.rule {
            SigmaRule::Power { exponent, scale } => SigmaRule::Power { exponent, scale: scale * c },
            SigmaRule::Explicit => SigmaRule::Explicit,
        };
        Self::new(self.p, self.zeta0, self.sigma.iter().map(|s| s * c).collect(), rule)
    }

    /// Marginal on the first `n` pairs.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.n_modes()).max(1);
        Ok(MeasureSpec { sigma: self.sigma[..n].to_vec(), ..self.clone() })
    }
}

/// One draw; identical to `sample_member(m, seed, 0)`.
pub fn sample(m: &MeasureSpec, seed: u64) -> BirkhoffState {
    sample_member(m, seed, 0)
}

/// Draw number `member`. Every `(member, mode)` has its own random stream,
/// so ensembles do not depend on evaluation order.
pub fn sample_member(m: &MeasureSpec, seed: u64, member: u64) -> BirkhoffState {
    let pairs = (1..=m.n_modes())
        .map(|j| {
            let mut rng = crate::rng::stream(seed, member, j as u64);
            let sd = m.variance(j).sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [sd * a, sd * b]
        })
        .collect();
    BirkhoffState::new(pairs, m.p)
}

/// Log of the density on the first `v.n_modes()` pairs.
pub fn log_density(m: &MeasureSpec, v: &BirkhoffState) -> Result<f64> {
    if v.n_modes() > m.n_modes() {
        return Err(Error::ModeMismatch(v.n_modes(), m.n_modes()));
    }
    Ok(v.pairs()
        .iter()
        .enumerate()
        .map(|(i, [a, b])| {
            let var = m.variance(i + 1);
            -(a * a + b * b) / (2.0 * var) - (TAU * var).ln()
        })
        .sum())
}

/// `X(v) = dΨ(0) f(dΨ(0)⁻¹ v)` on the pairs of `v`.
pub fn pushforward_field(v: &BirkhoffState, f: &PerturbationSpec) -> Result<BirkhoffState> {
    let u = linear_birkhoff_inverse(v)?;
    Ok(linear_birkhoff(&f.eval(&u)?, v.p()))
}

/// `-Σ_j (2πj)^{2p+1} (v_j·Y_j)/σ_j`, the `∇log b` part of the rate for a field `Y`.
fn gradient_part(m: &MeasureSpec, v: &BirkhoffState, y: &BirkhoffState) -> f64 {
    -v.pairs()
        .iter()
        .zip(y.pairs())
        .enumerate()
        .map(|(i, (a, b))| (a[0] * b[0] + a[1] * b[1]) / m.variance(i + 1))
        .sum::<f64>()
}

/// `div X` by central differences (exactly 0 for a fixed profile).
pub fn divergence(v: &BirkhoffState, f: &PerturbationSpec, fd_step: f64) -> Result<f64> {
    if f.kind() == crate::flow::PerturbationKind::FixedProfile {
        return Ok(0.0);
    }
    let h = fd_step * v.norm_sq_in(SobolevIndex::ZERO).sqrt().max(1.0);
    let mut total = 0.0;
    for i in 0..v.n_modes() {
        for c in 0..2 {
            let mut plus = v.clone();
            plus.pairs_mut()[i][c] += h;
            let mut minus = v.clone();
            minus.pairs_mut()[i][c] -= h;
            let d = pushforward_field(&plus, f)?.pairs()[i][c] - pushforward_field(&minus, f)?.pairs()[i][c];
            total += d / (2.0 * h);
        }
    }
    Ok(total)
}

/// The Liouville rate `cⁿ(v)` of the slow field on the pairs of `v`.
pub fn cn_divergence(v: &BirkhoffState, f: &PerturbationSpec, m: &MeasureSpec, fd_step: f64) -> Result<f64> {
    let x = pushforward_field(v, f)?;
    Ok(gradient_part(m, v, &x) + divergence(v, f, fd_step)?)
}

/// Rate of the rotation field `v ↦ Ω_j v_j^⊥` alone; vanishes identically.
pub fn rotation_rate(m: &MeasureSpec, v: &BirkhoffState, omega: &[f64]) -> f64 {
    let rot = rotation_field(v, omega);
    // div of (−Ω b, Ω a) is ∂(−Ω b)/∂a + ∂(Ω a)/∂b = 0
    gradient_part(m, v, &rot)
}

fn rotation_field(v: &BirkhoffState, omega: &[f64]) -> BirkhoffState {
    let pairs = v.pairs().iter().zip(omega).map(|([a, b], w)| [-w * b, w * a]).collect();
    BirkhoffState::new(pairs, v.p())
}

/// `Ω_j = (2πj)³/ε`.
pub fn slow_frequencies(n: usize, eps: f64) -> Vec<f64> {
    (1..=n).map(|j| (TAU * j as f64).powi(3) / eps).collect()
}

/// Finite-dimensional density record along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityRecord {
    pub tau: f64,
    pub log_b: f64,
    pub cn: f64,
    /// `A(τ) = ∫₀^τ cⁿ(v(s)) ds`.
    pub a: f64,
}

// constant field: v(s) = v* + R(Ωs)(v0 − v*), v* = J X / Ω
fn closed_form_state(v0: &[f64; 2], x: &[f64; 2], omega: f64, s: f64) -> [f64; 2] {
    let star = [-x[1] / omega, x[0] / omega];
    let d = [v0[0] - star[0], v0[1] - star[1]];
    let (sn, cs) = (omega * s).sin_cos();
    [star[0] + cs * d[0] - sn * d[1], star[1] + sn * d[0] + cs * d[1]]
}

// ∫₀^s v(r) dr for the same solution; ∫R(Ωr)dr = −(1/Ω) J (R(Ωs) − I)
fn closed_form_integral(v0: &[f64; 2], x: &[f64; 2], omega: f64, s: f64) -> [f64; 2] {
    let star = [-x[1] / omega, x[0] / omega];
    let d = [v0[0] - star[0], v0[1] - star[1]];
    let (sn, cs) = (omega * s).sin_cos();
    // (R − I) d
    let r = [(cs - 1.0) * d[0] - sn * d[1], sn * d[0] + (cs - 1.0) * d[1]];
    // −(1/Ω) J r with J(a, b) = (−b, a)
    let m = [r[1] / omega, -r[0] / omega];
    [star[0] * s + m[0], star[1] * s + m[1]]
}

/// Galerkin flow of `v` (on its pairs) over slow time `[0, tau_end]`,
/// reported at `n_records + 1` equispaced times. Fixed profiles use the exact
/// solution; state-dependent fields use IF-RK4 with step `0.2/max Ω`.
pub fn galerkin_v_flow(
    v0: &BirkhoffState,
    f: &PerturbationSpec,
    m: &MeasureSpec,
    eps: f64,
    tau_end: f64,
    n_records: usize,
    fd_step: f64,
) -> Result<(Vec<BirkhoffState>, Vec<DensityRecord>)> {
    if !(eps > 0.0) || !(tau_end.is_finite()) || n_records == 0 {
        return Err(Error::invalid("v-flow needs eps > 0, finite horizon and at least one record"));
    }
    let n = v0.n_modes();
    let omega = slow_frequencies(n, eps);
    let taus: Vec<f64> = (0..=n_records).map(|k| tau_end * k as f64 / n_records as f64).collect();
    if f.kind() == crate::flow::PerturbationKind::FixedProfile {
        let x = pushforward_field(v0, f)?;
        let mut states = Vec::with_capacity(taus.len());
        let mut records = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let mut pairs = Vec::with_capacity(n);
            let mut a = 0.0;
            for j in 0..n {
                let (vj, xj) = (&v0.pairs()[j], &x.pairs()[j]);
                pairs.push(closed_form_state(vj, xj, omega[j], tau));
                let iv = closed_form_integral(vj, xj, omega[j], tau);
                a -= (iv[0] * xj[0] + iv[1] * xj[1]) / m.variance(j + 1);
            }
            let v = BirkhoffState::new(pairs, v0.p());
            let cn = gradient_part(m, &v, &x);
            records.push(DensityRecord { tau, log_b: log_density(m, &v)?, cn, a });
            states.push(v);
        }
        return Ok((states, records));
    }
    general_v_flow(v0, f, m, &omega, &taus, fd_step)
}

// IF-RK4 on w = R(−Ωτ) v, with A and ∫div carried as extra components
fn general_v_flow(
    v0: &BirkhoffState,
    f: &PerturbationSpec,
    m: &MeasureSpec,
    omega: &[f64],
    taus: &[f64],
    fd_step: f64,
) -> Result<(Vec<BirkhoffState>, Vec<DensityRecord>)> {
    let n = v0.n_modes();
    let w_max = omega.iter().cloned().fold(0.0, f64::max);
    let rot = |v: &BirkhoffState, s: f64| -> BirkhoffState {
        let pairs = v
            .pairs()
            .iter()
            .zip(omega)
            .map(|([a, b], w)| {
                let (sn, cs) = (w * s).sin_cos();
                [cs * a - sn * b, sn * a + cs * b]
            })
            .collect();
        BirkhoffState::new(pairs, v.p())
    };
    // derivative of (w, A) at interaction time s
    let rhs = |w: &BirkhoffState, s: f64| -> Result<(BirkhoffState, f64)> {
        let v = rot(w, s);
        let x = pushforward_field(&v, f)?;
        let c = gradient_part(m, &v, &x) + divergence(&v, f, fd_step)?;
        Ok((rot(&x, -s), c))
    };
    let axpy = |w: &BirkhoffState, k: &BirkhoffState, h: f64| -> BirkhoffState {
        let pairs = w.pairs().iter().zip(k.pairs()).map(|(a, b)| [a[0] + h * b[0], a[1] + h * b[1]]).collect();
        BirkhoffState::new(pairs, w.p())
    };
    let mut w = v0.clone();
    let mut a = 0.0;
    let mut s = 0.0;
    let mut states = Vec::with_capacity(taus.len());
    let mut records = Vec::with_capacity(taus.len());
    let record = |w: &BirkhoffState, s: f64, a: f64| -> Result<(BirkhoffState, DensityRecord)> {
        let v = rot(w, s);
        let cn = cn_divergence(&v, f, m, fd_step)?;
        Ok((v.clone(), DensityRecord { tau: s, log_b: log_density(m, &v)?, cn, a }))
    };
    let (v, r) = record(&w, 0.0, 0.0)?;
    states.push(v);
    records.push(r);
    for win in taus.windows(2) {
        let span = win[1] - win[0];
        let steps = (span * w_max / 0.2).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            let (k1, c1) = rhs(&w, s)?;
            let (k2, c2) = rhs(&axpy(&w, &k1, 0.5 * h), s + 0.5 * h)?;
            let (k3, c3) = rhs(&axpy(&w, &k2, 0.5 * h), s + 0.5 * h)?;
            let (k4, c4) = rhs(&axpy(&w, &k3, h), s + h)?;
            let pairs = (0..n)
                .map(|j| {
                    let g = |c: usize| {
                        w.pairs()[j][c]
                            + h / 6.0
                                * (k1.pairs()[j][c] + 2.0 * (k2.pairs()[j][c] + k3.pairs()[j][c]) + k4.pairs()[j][c])
                    };
                    [g(0), g(1)]
                })
                .collect();
            w = BirkhoffState::new(pairs, w.p());
            a += h / 6.0 * (c1 + 2.0 * (c2 + c3) + c4);
            s += h;
        }
        let (v, r) = record(&w, win[1], a)?;
        states.push(v);
        records.push(r);
    }
    Ok((states, records))
}

/// Per-member result of the quasi-invariance probe.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberProbe {
    pub member: u64,
    pub records: Vec<DensityRecord>,
    pub max_abs_a: f64,
    pub max_abs_cn: f64,
    /// `max_τ |A(τ) − (log b(v(τ)) − log b(v(0)) + ∫div)|`, relative to
    /// `max(1, max|A|)`.
    pub identity_residual: f64,
    /// Rate of the rotation field alone at the initial point.
    pub rotation_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QiReport {
    pub n: usize,
    pub eps: f64,
    pub tau_end: f64,
    pub members: Vec<MemberProbe>,
    /// `Ĉ = max_members max_τ |A(τ)| / τ_end`.
    pub c_hat: f64,
    pub max_abs_cn: f64,
    pub max_identity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Galerkin dimension.
    pub n: usize,
    pub eps: f64,
    pub tau_end: f64,
    pub ensemble: usize,
    pub n_records: usize,
    pub fd_step: f64,
}

/// Integrates the `n`-pair Galerkin flow for `ensemble` draws of `m` and
/// tracks `A(τ)`; the density identity is checked per member.
pub fn quasi_invariance_probe(m: &MeasureSpec, f: &PerturbationSpec, cfg: &ProbeConfig, seed: u64) -> Result<QiReport> {
    let members = (0..cfg.ensemble as u64).map(|k| probe_member(m, f, cfg, seed, k)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, members))
}

/// One ensemble member of [`quasi_invariance_probe`]; members are
/// independent, so callers may evaluate them in any order.
pub fn probe_member(m: &MeasureSpec, f: &PerturbationSpec, cfg: &ProbeConfig, seed: u64, member: u64) -> Result<MemberProbe> {
    if cfg.n == 0 || cfg.n > m.n_modes() {
        return Err(Error::invalid("probe dimension must be in 1..=n_modes of the measure"));
    }
    let v0 = sample_member(m, seed, member).truncated(cfg.n);
    let (states, records) = galerkin_v_flow(&v0, f, m, cfg.eps, cfg.tau_end, cfg.n_records, cfg.fd_step)?;
    let lb0 = records[0].log_b;
    let max_abs_a = records.iter().map(|r| r.a.abs()).fold(0.0, f64::max);
    let max_abs_cn = records.iter().map(|r| r.cn.abs()).fold(0.0, f64::max);
    // ∫div along the path; zero for fixed profiles, trapezoid otherwise
    let mut div_int = vec![0.0; records.len()];
    if f.kind() != crate::flow::PerturbationKind::FixedProfile {
        let divs = states.iter().map(|v| divergence(v, f, cfg.fd_step)).collect::<Result<Vec<_>>>()?;
        for k in 1..records.len() {
            div_int[k] = div_int[k - 1] + 0.5 * (divs[k] + divs[k - 1]) * (records[k].tau - records[k - 1].tau);
        }
    }
    let scale = max_abs_a.max(1.0);
    let identity_residual = records
        .iter()
        .zip(&div_int)
        .map(|(r, d)| (r.a - (r.log_b - lb0 + d)).abs() / scale)
        .fold(0.0, f64::max);
    let rotation_rate = rotation_rate(m, &v0, &slow_frequencies(cfg.n, cfg.eps));
    Ok(MemberProbe { member, records, max_abs_a, max_abs_cn, identity_residual, rotation_rate })
}

/// Ordered reduction of member results.
pub fn summarize(cfg: &ProbeConfig, members: Vec<MemberProbe>) -> QiReport {
    let max_a = members.iter().map(|p| p.max_abs_a).fold(0.0, f64::max);
    QiReport {
        n: cfg.n,
        eps: cfg.eps,
        tau_end: cfg.tau_end,
        c_hat: if cfg.tau_end > 0.0 { max_a / cfg.tau_end } else { 0.0 },
        max_abs_cn: members.iter().map(|p| p.max_abs_cn).fold(0.0, f64::max),
        max_identity_residual: members.iter().map(|p| p.identity_residual).fold(0.0, f64::max),
        members,
    }
}

/// Monte Carlo estimate of `μ(S^τ B)/μ(B)` for a ball `B` in the `|·|_p`
/// norm of the first `n` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallRatio {
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Estimated `μ(B)`.
    pub mu_ball: f64,
    pub samples: usize,
}

impl BallRatio {
    /// Whether the 95% interval meets `[e^{-Ĉτ}, e^{Ĉτ}]`.
    pub fn consistent_with(&self, c_hat: f64, tau: f64) -> bool {
        let bound = (c_hat * tau).exp();
        self.ci_hi >= 1.0 / bound && self.ci_lo <= bound
    }
}

/// `μ(S^τ B) = P(S^{-τ} y ∈ B)` for `y ~ μ`; the two indicators are paired
/// on the same draws. `B` is centered at a draw of `μ` with the radius set
/// so that `μ(B)` is roughly `target_mass`. Fixed profiles only (the
/// backward flow is evaluated in closed form).
pub fn ball_measure_ratio(
    m: &MeasureSpec,
    f: &PerturbationSpec,
    cfg: &ProbeConfig,
    samples: usize,
    target_mass: f64,
    seed: u64,
) -> Result<BallRatio> {
    if f.kind() != crate::flow::PerturbationKind::FixedProfile {
        return Err(Error::invalid("ball test needs a fixed-profile perturbation"));
    }
    if samples < 100 || !(target_mass > 0.0 && target_mass < 1.0) {
        return Err(Error::invalid("ball test needs >= 100 samples and a mass in (0, 1)"));
    }
    let n = cfg.n;
    let draw = |k: u64| sample_member(m, seed, k).truncated(n);
    let center = draw(u64::MAX);
    let x = pushforward_field(&center, f)?;
    let omega = slow_frequencies(n, cfg.eps);
    let dist = |v: &BirkhoffState| -> f64 {
        v.pairs()
            .iter()
            .zip(center.pairs())
            .enumerate()
            .map(|(i, (a, c))| weight(i + 1, m.p()) * ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)))
            .sum::<f64>()
    };
    // radius from a pilot sample
    let pilot = 2000.min(samples);
    let mut d: Vec<f64> = (0..pilot as u64).map(|k| dist(&draw(1 << 40 | k))).collect();
    d.sort_by(f64::total_cmp);
    let r2 = d[((target_mass * pilot as f64) as usize).min(pilot - 1)];
    let (mut n1, mut n2, mut n12) = (0usize, 0usize, 0usize);
    for k in 0..samples as u64 {
        let y = draw(k);
        let back: Vec<[f64; 2]> = (0..n)
            .map(|j| closed_form_state(&y.pairs()[j], &x.pairs()[j], omega[j], -cfg.tau_end))
            .collect();
        let yb = BirkhoffState::new(back, y.p());
        let in_a = dist(&y) <= r2;
        let in_b = dist(&yb) <= r2;
        n1 += in_a as usize;
        n2 += in_b as usize;
        n12 += (in_a && in_b) as usize;
    }
    if n1 == 0 {
        return Err(Error::invalid("ball test: no sample fell in the ball"));
    }
    let nf = samples as f64;
    let (p1, p2, p12) = (n1 as f64 / nf, n2 as f64 / nf, n12 as f64 / nf);
    let ratio = p2 / p1;
    // delta method for a ratio of paired proportions
    let var = (p2 * (1.0 - p2) / (p1 * p1) + p2 * p2 * p1 * (1.0 - p1) / p1.powi(4)
        - 2.0 * p2 * (p12 - p1 * p2) / p1.powi(3))
        / nf;
    let half = 1.96 * var.max(0.0).sqrt();
    Ok(BallRatio { ratio, ci_lo: ratio - half, ci_hi: ratio + half, mu_ball: p1, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birkhoff::{actions, rotate};
    use crate::spectral::{default_grid, SpectralField};

    fn profile(n: usize) -> PerturbationSpec {
        let g = default_grid(n);
        PerturbationSpec::fixed_profile(SpectralField::from_modes(n, g, &[(1, 1.0), (-2, 0.5)]).unwrap(), 2.0).unwrap()
    }

    #[test]
    fn default_measure_is_admissible() {
        let m = MeasureSpec::default_measure(32).unwrap();
        assert_eq!(m.sigma()[1], 0.25);
        assert!((m.expected_norm_sq() - 2.0 * (1..=32).map(|j| 1.0 / (j * j) as f64).sum::<f64>()).abs() < 1e-14);
        assert!(MeasureSpec::new(SobolevIndex::ZERO, 2.0, vec![1.0, -1.0], SigmaRule::Explicit).is_err());
        assert!(MeasureSpec::new(SobolevIndex::ZERO, 0.5, vec![1.0], SigmaRule::Explicit).is_err());
        // flat sigma at p = 0 does not converge at 8 modes
        assert!(MeasureSpec::power_law(8, SobolevIndex::ZERO, 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = MeasureSpec::default_measure(8).unwrap();
        assert_eq!(sample(&m, 11), sample(&m, 11));
        assert_ne!(sample_member(&m, 11, 1), sample_member(&m, 11, 2));
    }

    #[test]
    fn log_density_conventions() {
        let m = MeasureSpec::default_measure(8).unwrap().truncated(4).unwrap();
        let zero = BirkhoffState::zeros(4, m.p());
        let norm: f64 = (1..=4).map(|j| -(TAU * m.variance(j)).ln()).sum();
        assert!((log_density(&m, &zero).unwrap() - norm).abs() < 1e-12);
        let v = sample(&m, 5);
        assert_eq!(v.n_modes(), 4);
        let r = rotate(&v, &[0.3, 1.0, -2.0, 4.0]);
        let d = log_density(&m, &v).unwrap() - log_density(&m, &r).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn rate_conventions_for_fixed_profile() {
        let m = MeasureSpec::default_measure(8).unwrap();
        let f = profile(8);
        assert_eq!(cn_divergence(&BirkhoffState::zeros(8, m.p()), &f, &m, 1e-4).unwrap(), 0.0);
        let v = sample(&m, 1);
        let c1 = cn_divergence(&v, &f, &m, 1e-4).unwrap();
        let mut v2 = v.clone();
        v2.pairs_mut().iter_mut().for_each(|p| *p = [2.0 * p[0], 2.0 * p[1]]);
        let c2 = cn_divergence(&v2, &f, &m, 1e-4).unwrap();
        assert!((c2 - 2.0 * c1).abs() < 1e-12 * c1.abs().max(1.0));
        assert_eq!(rotation_rate(&m, &v, &slow_frequencies(8, 0.1)), 0.0);
    }

    #[test]
    fn zero_forcing_keeps_a_at_zero() {
        let m = MeasureSpec::default_measure(8).unwrap();
        let f = PerturbationSpec::zero(8, 32).unwrap();
        let cfg = ProbeConfig { n: 4, eps: 0.1, tau_end: 0.5, ensemble: 4, n_records: 20, fd_step: 1e-4 };
        let rep = quasi_invariance_probe(&m, &f, &cfg, 9).unwrap();
        assert_eq!(rep.c_hat, 0.0);
        assert!(rep.max_identity_residual < 1e-12);
        for p in &rep.members {
            // pure rotation: actions are unchanged along the flow
            let (s, _) = galerkin_v_flow(&sample_member(&m, 9, p.member).truncated(4), &f, &m, 0.1, 0.5, 3, 1e-4).unwrap();
            for (a, b) in actions(&s[0]).actions().iter().zip(actions(&s[3]).actions()) {
                assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
            }
        }
    }

    #[test]
    fn closed_form_matches_rk4_path() {
        // smoothing map with zero gain has the RK4 code path but a constant field
        let m = MeasureSpec::default_measure(8).unwrap();
        let prof = profile(4).profile().clone();
        let fixed = PerturbationSpec::fixed_profile(prof.clone(), 2.0).unwrap();
        let mapped = PerturbationSpec::smoothing_map(prof, 0.0, 2.0).unwrap();
        let v0 = sample(&m, 2).truncated(3);
        let (sa, ra) = galerkin_v_flow(&v0, &fixed, &m, 50.0, 0.5, 5, 1e-4).unwrap();
        let (sb, rb) = galerkin_v_flow(&v0, &mapped, &m, 50.0, 0.5, 5, 1e-4).unwrap();
        for (a, b) in sa.iter().zip(&sb) {
            for (p, q) in a.pairs().iter().zip(b.pairs()) {
                assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            }
        }
        for (a, b) in ra.iter().zip(&rb) {
            assert!((a.a - b.a).abs() < 1e-6 * a.a.abs().max(1e-3), "{} {}", a.a, b.a);
        }
    }

    #[test]
    fn closed_form_solves_the_ode() {
        let (v0, x, w) = ([0.3, -0.2], [0.7, 0.1], 13.0);
        let s = 0.37;
        let h = 1e-5;
        let vp = closed_form_state(&v0, &x, w, s + h);
        let vm = closed_form_state(&v0, &x, w, s - h);
        let v = closed_form_state(&v0, &x, w, s);
        let dv = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
        assert!((dv[0] - (-w * v[1] + x[0])).abs() < 1e-6);
        assert!((dv[1] - (w * v[0] + x[1])).abs() < 1e-6);
        let ip = closed_form_integral(&v0, &x, w, s + h);
        let im = closed_form_integral(&v0, &x, w, s - h);
        assert!(((ip[0] - im[0]) / (2.0 * h) - v[0]).abs() < 1e-8);
        assert_eq!(closed_form_integral(&v0, &x, w, 0.0), [0.0, 0.0]);
    }
}
