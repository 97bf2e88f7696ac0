//! Action-angle layer.
//!
//! The linearization `dΨ(0): u_s ↦ v_s = |2πs|^{-1/2} u_s` of the Birkhoff
//! map gives approximate coordinates (and is invertible); [`hill`] computes
//! the exact KdV actions from the periodic spectrum of `-y'' + u y`.

pub mod hill;

use alloc::vec::Vec;

use crate::spectral::{default_grid, SobolevIndex, SpectralField};
use crate::{Error, Result, TAU};

pub use hill::{hill_actions, hill_discriminant, hill_gaps, HillOperator};

/// Pairs with `|v_j|` below this have no meaningful angle; their angle is 0.
pub const ANGLE_THRESHOLD: f64 = 1e-9;

/// `(2πj)^{2p+1}`, the weight of pair `j` in `|·|_p`.
pub fn weight(j: usize, p: SobolevIndex) -> f64 {
    (TAU * j as f64).powf(2.0 * p.value() + 1.0)
}

/// Truncated Birkhoff vector `v = (v_j, v_{-j})_{j=1..n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffState {
    pairs: Vec<[f64; 2]>,
    p: SobolevIndex,
}

impl BirkhoffState {
    pub fn new(pairs: Vec<[f64; 2]>, p: SobolevIndex) -> Self {
        BirkhoffState { pairs, p }
    }

    pub fn zeros(n_modes: usize, p: SobolevIndex) -> Self {
        BirkhoffState { pairs: alloc::vec![[0.0; 2]; n_modes], p }
    }

    pub fn n_modes(&self) -> usize {
        self.pairs.len()
    }

    pub fn p(&self) -> SobolevIndex {
        self.p
    }

    pub fn with_p(mut self, p: SobolevIndex) -> Self {
        self.p = p;
        self
    }

    pub fn pairs(&self) -> &[[f64; 2]] {
        &self.pairs
    }

    pub fn pairs_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.pairs
    }

    /// `|v|_p² = Σ_j (2πj)^{2p+1} |v_j|²`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq_in(self.p)
    }

    pub fn norm_sq_in(&self, p: SobolevIndex) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, v)| weight(i + 1, p) * (v[0] * v[0] + v[1] * v[1]))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// First `n` pairs (zero-padded if `n` exceeds the current length).
    pub fn truncated(&self, n: usize) -> Self {
        let mut pairs: Vec<[f64; 2]> = self.pairs.iter().take(n).copied().collect();
        pairs.resize(n, [0.0; 2]);
        BirkhoffState { pairs, p: self.p }
    }
}

/// Actions `I_j ≥ 0` with the weighted `l¹` norm of `h^p_I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    actions: Vec<f64>,
    p: SobolevIndex,
}

impl ActionVector {
    pub fn new(actions: Vec<f64>, p: SobolevIndex) -> Result<Self> {
        if let Some((i, &a)) = actions.iter().enumerate().find(|(_, a)| !(**a >= 0.0)) {
            return Err(Error::NegativeAction { index: i + 1, value: a });
        }
        Ok(ActionVector { actions, p })
    }

    pub fn zeros(n_modes: usize, p: SobolevIndex) -> Self {
        ActionVector { actions: alloc::vec![0.0; n_modes], p }
    }

    pub fn n_modes(&self) -> usize {
        self.actions.len()
    }

    pub fn p(&self) -> SobolevIndex {
        self.p
    }

    pub fn with_p(mut self, p: SobolevIndex) -> Self {
        self.p = p;
        self
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn get(&self, j: usize) -> f64 {
        self.actions.get(j - 1).copied().unwrap_or(0.0)
    }

    /// `|I|_p = 2 Σ_j (2πj)^{2p+1} |I_j|`.
    pub fn norm(&self) -> f64 {
        weighted_l1(&self.actions, self.p)
    }

    /// `|I - J|_q` over the longer of the two truncations.
    pub fn distance(&self, other: &ActionVector, q: SobolevIndex) -> f64 {
        let n = self.n_modes().max(other.n_modes());
        let diff: Vec<f64> = (1..=n).map(|j| self.get(j) - other.get(j)).collect();
        weighted_l1(&diff, q)
    }
}

/// `2 Σ_j (2πj)^{2p+1} |x_j|`.
pub fn weighted_l1(x: &[f64], p: SobolevIndex) -> f64 {
    2.0 * x.iter().enumerate().map(|(i, a)| weight(i + 1, p) * a.abs()).sum::<f64>()
}

/// Angles in `[0, 2π)`, plus the indices whose pair was below
/// [`ANGLE_THRESHOLD`] (angle set to 0).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector {
    angles: Vec<f64>,
    degenerate: Vec<usize>,
}

impl AngleVector {
    /// Wraps each entry into `[0, 2π)`.
    pub fn new(angles: Vec<f64>) -> Self {
        AngleVector { angles: angles.into_iter().map(wrap_angle).collect(), degenerate: Vec::new() }
    }

    pub fn zeros(n: usize) -> Self {
        AngleVector { angles: alloc::vec![0.0; n], degenerate: Vec::new() }
    }

    pub fn n_modes(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// 1-based indices of pairs too small to carry an angle.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU { 0.0 } else { r }
}

/// Frequencies `W_k` with per-mode fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub freqs: Vec<f64>,
    /// RMS residual of the linear phase fit, per mode.
    pub residuals: Vec<f64>,
}

impl FrequencyVector {
    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }
}

/// `v_s = |2πs|^{-1/2} u_s`.
pub fn linear_birkhoff(u: &SpectralField, p: SobolevIndex) -> BirkhoffState {
    let pairs = (1..=u.n_modes())
        .map(|j| {
            let c = (TAU * j as f64).powf(-0.5);
            let [a, b] = u.pair(j);
            [c * a, c * b]
        })
        .collect();
    BirkhoffState { pairs, p }
}

/// Inverse of [`linear_birkhoff`], on the default dealiasing grid.
pub fn linear_birkhoff_inverse(v: &BirkhoffState) -> Result<SpectralField> {
    linear_birkhoff_inverse_on(v, default_grid(v.n_modes().max(1)))
}

pub fn linear_birkhoff_inverse_on(v: &BirkhoffState, grid_size: usize) -> Result<SpectralField> {
    let coeffs = v
        .pairs
        .iter()
        .enumerate()
        .flat_map(|(i, pr)| {
            let c = (TAU * (i + 1) as f64).sqrt();
            [c * pr[0], c * pr[1]]
        })
        .collect();
    SpectralField::from_coeffs(v.n_modes(), grid_size, coeffs)
}

/// `I_j = ½(v_j² + v_{-j}²)`.
pub fn actions(v: &BirkhoffState) -> ActionVector {
    ActionVector {
        actions: v.pairs.iter().map(|[a, b]| 0.5 * (a * a + b * b)).collect(),
        p: v.p,
    }
}

/// Full-quadrant angle of each pair; exactly 0 for pairs below the threshold.
pub fn angles(v: &BirkhoffState) -> AngleVector {
    let mut degenerate = Vec::new();
    let angles = v
        .pairs
        .iter()
        .enumerate()
        .map(|(i, &[a, b])| {
            if a.hypot(b) < ANGLE_THRESHOLD {
                degenerate.push(i + 1);
                0.0
            } else {
                wrap_angle(b.atan2(a))
            }
        })
        .collect();
    AngleVector { angles, degenerate }
}

/// `v_j = √(2I_j)(cos φ_j, sin φ_j)`.
pub fn assemble(actions: &ActionVector, phi: &AngleVector) -> Result<BirkhoffState> {
    if actions.n_modes() != phi.n_modes() {
        return Err(Error::ModeMismatch(actions.n_modes(), phi.n_modes()));
    }
    let pairs = actions
        .actions
        .iter()
        .zip(&phi.angles)
        .enumerate()
        .map(|(i, (&a, &f))| {
            if !(a >= 0.0) {
                return Err(Error::NegativeAction { index: i + 1, value: a });
            }
            let r = (2.0 * a).sqrt();
            Ok([r * f.cos(), r * f.sin()])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BirkhoffState { pairs, p: actions.p })
}

/// `Φ_θ`: rotates pair `j` by `θ_j` (pairs beyond `θ` are left alone).
pub fn rotate(v: &BirkhoffState, theta: &[f64]) -> BirkhoffState {
    let mut out = v.clone();
    for (pr, &t) in out.pairs.iter_mut().zip(theta) {
        let (s, c) = t.sin_cos();
        *pr = [c * pr[0] - s * pr[1], s * pr[0] + c * pr[1]];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    fn field(n: usize, coeffs: Vec<f64>) -> SpectralField {
        SpectralField::from_coeffs(n, default_grid(n), coeffs).unwrap()
    }

    #[test]
    fn linear_map_of_e1() {
        let u = SpectralField::from_modes(4, 16, &[(1, 1.0)]).unwrap();
        let v = linear_birkhoff(&u, SobolevIndex::ZERO);
        assert!((v.pairs()[0][0] - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert_eq!(v.pairs()[0][1], 0.0);
        assert!(v.pairs()[1..].iter().all(|p| *p == [0.0, 0.0]));
        // I_1 = 1/(4π)
        assert!((actions(&v).get(1) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let zero = linear_birkhoff(&SpectralField::zeros(4, 16).unwrap(), SobolevIndex::ONE);
        assert!(zero.pairs().iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn inverse_of_single_pair() {
        let mut v = BirkhoffState::zeros(3, SobolevIndex::ZERO);
        v.pairs_mut()[1] = [0.3, -0.2];
        let u = linear_birkhoff_inverse(&v).unwrap();
        let c = (4.0 * PI).sqrt();
        assert!((u.get(2) - 0.3 * c).abs() < 1e-15);
        assert!((u.get(-2) + 0.2 * c).abs() < 1e-15);
        assert_eq!(l2(&u) - u.get(2).powi(2) - u.get(-2).powi(2), 0.0);
        let zero = linear_birkhoff_inverse(&BirkhoffState::zeros(3, SobolevIndex::ZERO)).unwrap();
        assert!(zero.coeffs().iter().all(|c| *c == 0.0));
    }

    fn l2(u: &SpectralField) -> f64 {
        crate::spectral::l2_sq(u)
    }

    #[test]
    fn action_and_angle_conventions() {
        let v = BirkhoffState::new(alloc::vec![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [-1.0, -1e-12]], SobolevIndex::ZERO);
        let a = actions(&v);
        assert_eq!(a.get(1), 0.5);
        let phi = angles(&v);
        assert_eq!(phi.angles()[0], 0.0);
        assert!((phi.angles()[1] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(phi.angles()[2], 0.0);
        assert_eq!(phi.degenerate(), &[3]);
        assert!((phi.angles()[3] - (PI + 1e-12)).abs() < 1e-9);
    }

    #[test]
    fn assemble_examples() {
        let v = assemble(
            &ActionVector::new(alloc::vec![0.5], SobolevIndex::ZERO).unwrap(),
            &AngleVector::zeros(1),
        )
        .unwrap();
        assert_eq!(v.pairs(), &[[1.0, 0.0]]);
        let zero = assemble(&ActionVector::zeros(3, SobolevIndex::ZERO), &AngleVector::new(alloc::vec![1.0, 2.0, 3.0])).unwrap();
        assert!(zero.pairs().iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
        assert!(matches!(
            ActionVector::new(alloc::vec![0.1, -1e-3], SobolevIndex::ZERO),
            Err(Error::NegativeAction { index: 2, .. })
        ));
    }

    #[test]
    fn rotation_by_pi_negates() {
        let v = BirkhoffState::new(alloc::vec![[0.3, -0.4], [1.0, 2.0]], SobolevIndex::ONE);
        let r = rotate(&v, &[PI, 0.0]);
        assert!((r.pairs()[0][0] + 0.3).abs() < 1e-15 && (r.pairs()[0][1] - 0.4).abs() < 1e-15);
        assert_eq!(r.pairs()[1], [1.0, 2.0]);
        assert_eq!(rotate(&v, &[0.0, 0.0]), v);
    }

    #[test]
    fn angles_wrap_into_range() {
        let a = AngleVector::new(alloc::vec![-1e-20, 7.0, -PI, TAU]);
        for x in a.angles() {
            assert!((0.0..TAU).contains(x));
        }
    }

    proptest! {
        #[test]
        fn linear_map_is_isometry(coeffs in proptest::collection::vec(-1.0f64..1.0, 2 * 12), pi in 0usize..3) {
            let p = SobolevIndex::new([0.0, 1.0, 3.0][pi]).unwrap();
            let u = field(12, coeffs);
            let v = linear_birkhoff(&u, p);
            let lhs = v.norm();
            let rhs = crate::spectral::sobolev_norm(&u, p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            // |I|_p = |v|_p²
            let i_norm = actions(&v).norm();
            prop_assert!((i_norm - v.norm_sq()).abs() <= 1e-12 * v.norm_sq().max(1e-300));
            let back = linear_birkhoff_inverse(&v).unwrap();
            for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-13);
            }
        }

        #[test]
        fn actions_invariant_under_rotation(
            pairs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            theta in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let v = BirkhoffState::new(pairs.iter().map(|&(a, b)| [a, b]).collect(), SobolevIndex::THREE);
            let r = rotate(&v, &theta);
            for (a, b) in actions(&v).actions().iter().zip(actions(&r).actions()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300) * 4.0);
            }
            prop_assert!((v.norm_sq() - r.norm_sq()).abs() <= 1e-13 * v.norm_sq());
        }

        #[test]
        fn assemble_round_trip(
            acts in proptest::collection::vec(1e-6f64..1.0, 5),
            phis in proptest::collection::vec(0.0f64..TAU, 5),
        ) {
            let i = ActionVector::new(acts.clone(), SobolevIndex::ZERO).unwrap();
            let v = assemble(&i, &AngleVector::new(phis.clone())).unwrap();
            for (a, b) in actions(&v).actions().iter().zip(&acts) {
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
            }
            for (a, b) in angles(&v).angles().iter().zip(&phis) {
                let d = (a - b).abs();
                prop_assert!(d.min(TAU - d) <= 1e-12);
            }
        }
    }
}
