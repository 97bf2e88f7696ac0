use kdvlab_core::birkhoff::{actions, hill_actions, linear_birkhoff};
use kdvlab_core::flow::{integrate, FlowParams, PerturbationSpec};
use kdvlab_core::spectral::{SobolevIndex, SpectralField};

fn field(modes: &[(i64, f64)]) -> SpectralField {
    SpectralField::from_modes(32, 128, modes).unwrap()
}

fn gap_to_linear(u: &SpectralField) -> f64 {
    let p = SobolevIndex::ONE;
    let hill = hill_actions(u, 4, p).unwrap();
    let lin = actions(&linear_birkhoff(u, p));
    (1..=4).map(|j| 2.0 * (2.0 * std::f64::consts::PI * j as f64).powi(3) * (hill.get(j) - lin.get(j)).abs()).sum()
}

#[test]
fn hill_actions_are_conserved_by_the_unperturbed_flow() {
    let u0 = field(&[(1, 0.05), (-2, 0.025)]);
    let p = FlowParams::new(0.0, 1e-4, 1.0, 2500).unwrap();
    let traj = integrate(&u0, &p, &PerturbationSpec::zero(32, 128).unwrap()).unwrap();
    let i0 = hill_actions(&u0, 4, SobolevIndex::ONE).unwrap();
    for s in &traj.states {
        let i = hill_actions(s, 4, SobolevIndex::ONE).unwrap();
        assert!(i.distance(&i0, SobolevIndex::ONE) <= 1e-5 * i0.norm());
    }
    // the linear actions are not conserved at this amplitude
    let lin0 = actions(&linear_birkhoff(&u0, SobolevIndex::ONE));
    let lin1 = actions(&linear_birkhoff(traj.last().unwrap(), SobolevIndex::ONE));
    assert!(lin1.distance(&lin0, SobolevIndex::ONE) > 1e-3 * lin0.norm());
}

#[test]
fn backend_difference_is_cubic_for_a_generic_potential() {
    let u = |a: f64| field(&[(1, a), (2, 0.5 * a)]);
    let r = gap_to_linear(&u(0.05)) / gap_to_linear(&u(0.025));
    assert!((6.0..=10.0).contains(&r), "{r}");
}

#[test]
fn backend_difference_is_even_for_a_shift_odd_potential() {
    // u(x + ¼) is odd, so u and −u are isospectral and the cubic term drops out
    let u = |a: f64| field(&[(1, a), (-2, 0.5 * a)]);
    let r = gap_to_linear(&u(0.05)) / gap_to_linear(&u(0.025));
    assert!((14.0..=18.0).contains(&r), "{r}");
    let plus = hill_actions(&u(0.05), 4, SobolevIndex::ONE).unwrap();
    let minus = hill_actions(&u(-0.05), 4, SobolevIndex::ONE).unwrap();
    assert!(plus.distance(&minus, SobolevIndex::ONE) < 1e-9 * plus.norm());
}
