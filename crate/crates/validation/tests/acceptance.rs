//! Acceptance criteria 1–10; each test prints one PASS/FAIL line.

use kdvlab::acceptance::{self, Criterion};

fn verdict(c: Criterion) {
    println!("{c}");
    assert!(c.pass, "{c}");
}

#[test]
fn criterion_01_unperturbed_conservation() {
    verdict(acceptance::criterion_1());
}

#[test]
fn criterion_02_reversibility() {
    verdict(acceptance::criterion_2());
}

#[test]
fn criterion_03_airy_limit() {
    verdict(acceptance::criterion_3());
}

#[test]
fn criterion_04_backend_cross_validation() {
    verdict(acceptance::criterion_4());
}

#[test]
fn criterion_05_averaging_error_decreases() {
    verdict(acceptance::criterion_5());
}

#[test]
fn criterion_06_angle_equidistribution() {
    verdict(acceptance::criterion_6());
}

#[test]
fn criterion_07_energy_bound() {
    verdict(acceptance::criterion_7());
}

#[test]
fn criterion_08_quasiperiodic_rate() {
    verdict(acceptance::criterion_8());
}

#[test]
fn criterion_09_quasi_invariance() {
    verdict(acceptance::criterion_9());
}

#[test]
fn criterion_10_averaging_layer() {
    verdict(acceptance::criterion_10());
}
