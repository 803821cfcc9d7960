//! The release gate. One test per criterion; each prints its one-line report
//! and fails with the same line so the measured numbers are always visible.

use bcomd_core::acceptance;

fn check(report: acceptance::CriterionReport) {
    let line = report.line();
    println!("{line}");
    assert!(report.passed, "{line}");
}

#[test]
fn criterion_01_estimator_unbiasedness() {
    check(acceptance::criterion_1());
}

#[test]
fn criterion_02_projection_optimality() {
    check(acceptance::criterion_2());
}

#[test]
fn criterion_03_dual_boundedness() {
    check(acceptance::criterion_3());
}

#[test]
fn criterion_04_regret_slope() {
    check(acceptance::criterion_4());
}

#[test]
fn criterion_05_violation_slope() {
    check(acceptance::criterion_5());
}

#[test]
fn criterion_06_constraint_control_vs_baseline() {
    check(acceptance::criterion_6());
}

#[test]
fn criterion_07_mixer_phase_regret() {
    check(acceptance::criterion_7());
}

#[test]
fn criterion_08_phased_policy_end_to_end() {
    check(acceptance::criterion_8());
}

#[test]
fn criterion_09_comparator_solver_equivalence() {
    check(acceptance::criterion_9());
}

#[test]
fn criterion_10_fixture_measures_exact() {
    check(acceptance::criterion_10());
}

#[test]
fn criterion_11_run_determinism() {
    check(acceptance::criterion_11());
}
