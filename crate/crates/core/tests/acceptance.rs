//! Acceptance battery, one test per criterion. Each test prints a PASS/FAIL
//! line with the measured values and fails when its criterion fails.

use taildep::theory::Convention;
use taildep::verify::{run_criterion, Level, VerifyOptions};

fn criterion(id: u8) {
    let r = run_criterion(id, &VerifyOptions { level: Level::Full, convention: Convention::Adopted });
    println!("{}", r.line());
    for d in &r.details {
        println!("    {d}");
    }
    assert!(r.passed, "criterion {id} failed:\n{}", r.details.join("\n"));
}

#[test]
fn criterion_01_qp_against_brute_force() {
    criterion(1);
}

#[test]
fn criterion_02_trivariate_closed_form() {
    criterion(2);
}

#[test]
fn criterion_03_scaling_law() {
    criterion(3);
}

#[test]
fn criterion_04_regular_variation_index() {
    criterion(4);
}

#[test]
fn criterion_05_limit_function() {
    criterion(5);
}

#[test]
fn criterion_06_expansions() {
    criterion(6);
}

#[test]
fn criterion_07_convention_discrimination() {
    criterion(7);
}

#[test]
fn criterion_08_theta_zero() {
    criterion(8);
}

#[test]
fn criterion_09_divergent_case() {
    criterion(9);
}

#[test]
fn criterion_10_estimators() {
    criterion(10);
}

#[test]
fn criterion_11_algorithmic_equivalences() {
    criterion(11);
}

#[test]
fn criterion_12_deep_tail_robustness() {
    criterion(12);
}

#[test]
fn literal_convention_fails_discrimination() {
    let r = run_criterion(7, &VerifyOptions { level: Level::Full, convention: Convention::PaperLiteral });
    println!("{} (literal convention, expected FAIL)", r.line());
    assert!(!r.passed);
}
