//! Structural properties checked on random inputs and across systems.

mod common;

use common::*;
use nonres::asymptotics::{build_rho1, build_rho2, build_rho3, build_rhom};
use nonres::averaging::compute_normal_form;
use nonres::regime::classify_regimes;
use nonres::tol;

#[test]
fn series_algebra_obeys_the_ring_axioms() {
    ring_axioms_hold(100, 1e-12);
}

#[test]
fn homological_solutions_solve_their_equations() {
    homological_solutions_substitute_back(100, 1e-10);
}

#[test]
fn low_order_reexpansions_match_their_closed_forms() {
    reexpansions_match_the_explicit_formulas(&ex1_default(), 5, 1e-10);
    reexpansions_match_the_explicit_formulas(&integer_scale_system(), 3, 1e-10);
    reexpansions_match_the_explicit_formulas(&ex2_default(), 5, 1e-10);
}

#[test]
fn averaging_transform_round_trips() {
    let avg = compute_normal_form(&ex1_default(), 5, tol::ZERO_COEFF).unwrap();
    transform_round_trips(&avg, 100, 1e-10);
    let avg = compute_normal_form(&ex2_default(), 5, tol::ZERO_COEFF).unwrap();
    transform_round_trips(&avg, 100, 1e-10);
}

#[test]
fn defect_exponents_improve_with_more_correction_orders() {
    let avg = compute_normal_form(&ex1_default(), 5, tol::ZERO_COEFF).unwrap();
    defect_exponent_improves(
        "decaying branch",
        &avg,
        &|m| build_rho1(&avg, 2, m).unwrap(),
        &[0, 1, 2, 3],
        0.2,
    );

    let avg = compute_normal_form(&q2_system(), 3, tol::ZERO_COEFF).unwrap();
    let rho0 = classify_regimes(&avg, None).unwrap().equilibria[0].rho0;
    defect_exponent_improves(
        "equilibrium branch",
        &avg,
        &|m| build_rho2(&avg, rho0, m).unwrap(),
        &[0, 1, 2, 3],
        0.2,
    );

    let avg = compute_normal_form(&drift_system(), 3, tol::ZERO_COEFF).unwrap();
    defect_exponent_improves(
        "drift branch",
        &avg,
        &|m| build_rho3(&avg, 0.1, 2, m).unwrap(),
        &[0, 1, 2],
        0.4,
    );

    let avg = compute_normal_form(&ex2_default(), 5, tol::ZERO_COEFF).unwrap();
    let report = classify_regimes(&avg, None).unwrap();
    let nl = report.nonlinear.unwrap();
    let z = nl.roots.iter().find(|r| r.z > 0.0).unwrap().z;
    defect_exponent_improves(
        "nonlinear balance branch",
        &avg,
        &|m| build_rhom(&avg, z, report.n, nl.d, nl.m, m).unwrap(),
        &[0, 1, 2, 3],
        0.08,
    );
}

#[test]
fn drive_means_agree_with_quadrature() {
    drive_mean_matches_quadrature(&ex1_default(), 1e-8);
    drive_mean_matches_quadrature(&ex2_default(), 1e-8);
    drive_mean_matches_quadrature(&integer_scale_system(), 1e-8);
}
