//! Acceptance suite: one test per quantitative claim, each printing a
//! pass/fail line with its runtime (visible with `--nocapture`).
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! for a sequential, timed report.

use hypokinetic::solver::Scenario;
use hypokinetic::verify::{self, CriterionResult};

fn bgk() -> Scenario<f64> {
    Scenario::default_bgk()
}

fn aniso() -> Scenario<f64> {
    Scenario::default_anisotropic()
}

fn assert_criterion(result: CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn criterion_01_assumption_certification() {
    assert_criterion(verify::criterion_assumptions(&bgk(), &aniso()));
}

#[test]
fn criterion_02_rate_bound_domination() {
    assert_criterion(verify::criterion_bound_domination::<f64>());
}

#[test]
fn criterion_03_kn_uniformity() {
    assert_criterion(verify::criterion_kn_uniformity::<f64>());
}

#[test]
fn criterion_04_hypocoercive_decay() {
    assert_criterion(verify::criterion_hypocoercive_decay(&bgk()));
}

#[test]
fn criterion_05_uniform_in_kn_decay() {
    assert_criterion(verify::criterion_uniform_in_kn_decay(&bgk()));
}

#[test]
fn criterion_06_entropy_dissipation_consistency() {
    assert_criterion(verify::criterion_entropy_consistency(&bgk()));
}

#[test]
fn criterion_07_mass_conservation() {
    assert_criterion(verify::criterion_mass_conservation(&bgk(), &aniso()));
}

#[test]
fn criterion_08_cascade_oracles() {
    assert_criterion(verify::criterion_cascade_oracles::<f64>());
}

#[test]
fn criterion_09_derivative_bounds() {
    assert_criterion(verify::criterion_derivative_bounds(&bgk()));
}

#[test]
fn criterion_10_radius_proxy() {
    assert_criterion(verify::criterion_radius_proxy(&bgk()));
}

#[test]
fn criterion_11_collocation_crosscheck() {
    assert_criterion(verify::criterion_collocation_crosscheck(&bgk()));
}

#[test]
fn random_field_invariants_hold_on_both_models() {
    assert!(verify::random_field_invariants(&bgk(), 100).unwrap());
    assert!(verify::random_field_invariants(&aniso(), 100).unwrap());
}
