//! End-to-end solves of the compiled benchmark programs.
//!
//! Expected statuses were cross-checked against an independent solver; the
//! degree-3 polynomial program for the curves at order 4 sits on the
//! feasibility boundary (neither a clean solution nor a verifiable ray
//! exists in double precision), so UNKNOWN is the honest outcome there.

use polysep::corpus;
use polysep::formula::parse_problem;
use polysep::rat::{self, frac};
use polysep::sdp::{solve, SdpStatus, SolverSettings};
use polysep::sos::{build_program, compile_to_sdp, Mode};

fn margin() -> polysep::rat::Rat {
    frac(1, 100)
}

#[test]
fn motzkin_direct_is_infeasible() {
    let sdp = compile_to_sdp(&corpus::motzkin_direct_program(3));
    let sol = solve(&sdp, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
    assert!(sol.infeasibility_certificate.is_some());
}

#[test]
fn motzkin_homogenized_is_feasible_at_order_4() {
    let sdp = compile_to_sdp(&corpus::motzkin_homogenized_program(4));
    let sol = solve(&sdp, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
    assert!(sol.metrics.primal_residual <= 1e-8);
}

#[test]
fn torus_degree2_is_feasible() {
    let inst = parse_problem(corpus::TORUS).unwrap();
    let prog = build_program(&inst, 2, 2, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
}

#[test]
fn torus_degree1_is_infeasible() {
    let inst = parse_problem(corpus::TORUS).unwrap();
    let prog = build_program(&inst, 1, 2, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn halfline_degree1_is_feasible() {
    let inst = parse_problem(corpus::HALFLINE).unwrap();
    let prog = build_program(&inst, 1, 1, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
}

#[test]
fn curves_semialgebraic_d3_succeeds_at_order_3() {
    let inst = parse_problem(corpus::CURVES).unwrap();
    let prog = build_program(&inst, 3, 3, Mode::Semialgebraic, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
}

#[test]
fn curves_polynomial_d3_has_no_certificate() {
    let inst = parse_problem(corpus::CURVES).unwrap();
    let prog = build_program(&inst, 3, 3, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
    // at order 4 the program sits on the boundary: no status claim beyond
    // "not feasible within tolerance"
    let prog = build_program(&inst, 3, 4, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_ne!(sol.status, SdpStatus::Feasible);
}

#[test]
fn curves_polynomial_d4_is_feasible() {
    let inst = parse_problem(corpus::CURVES).unwrap();
    let prog = build_program(&inst, 4, 3, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
}

#[test]
fn ovals_degree7_order4_is_feasible() {
    let inst = parse_problem(corpus::OVALS).unwrap();
    let prog = build_program(&inst, 7, 4, Mode::Polynomial, margin(), rat::zero()).unwrap();
    let t = std::time::Instant::now();
    let sol = solve(&compile_to_sdp(&prog), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Feasible);
    assert!(sol.metrics.primal_residual <= 1e-8);
    assert!(t.elapsed().as_secs() < 120);
}
