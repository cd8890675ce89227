//! Full verification suite: one test per criterion, each printing its
//! pass/fail line (visible with --nocapture).

use pjipm_core::acceptance::{run_criterion, CriterionResult};

fn check(id: u32) {
    let r: CriterionResult = run_criterion(id);
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_01_explicit_blowup_reproduction() {
    check(1);
}

#[test]
fn criterion_02_steady_state_drift() {
    check(2);
}

#[test]
fn criterion_03_eigen_identities() {
    check(3);
}

#[test]
fn criterion_04_asymptotic_stability_decay() {
    check(4);
}

#[test]
fn criterion_05_modulation_identities() {
    check(5);
}

#[test]
fn criterion_06_transported_quantities() {
    check(6);
}

#[test]
fn criterion_07_weighted_linear_damping() {
    check(7);
}

#[test]
fn criterion_08_nonlocal_contraction() {
    check(8);
}

#[test]
fn criterion_09_instability_mechanism() {
    check(9);
}

#[test]
fn criterion_10_blowup_stability_bridge() {
    check(10);
}

#[test]
fn criterion_11_nu_ode_consistency() {
    check(11);
}

#[test]
fn criterion_12_classification_oracle() {
    check(12);
}
