//! Analytic gradients against central finite differences.

mod common;

use common::checks::{covariance_gradient_check, phase_gradient_check, rate_gradient_check};

const NEEDED: usize = 20;

#[test]
fn covariance_gradient_matches_finite_differences() {
    covariance_gradient_check(NEEDED, 1e-5).unwrap();
}

#[test]
fn phase_gradient_matches_finite_differences() {
    phase_gradient_check(NEEDED, 1e-5).unwrap();
}

#[test]
fn rate_gradient_matches_finite_differences() {
    rate_gradient_check(NEEDED, 1e-5).unwrap();
}
