//! Craig interpolant synthesis for polynomial formulas over unbounded domains.
//!
//! Given two mutually exclusive formulas `phi(x, y)` and `psi(x, z)` in
//! disjunctive normal form over non-strict polynomial inequalities, this crate
//! searches for a function `h(x)` over the shared variables such that
//! `h > 0` holds on `phi` and `h < 0` holds on `psi`. The search lifts every
//! constraint to homogeneous coordinates, restricts the lifted sets to the
//! unit sphere (which restores boundedness even when the original domains are
//! unbounded), and encodes the separation as a sum-of-squares program that is
//! compiled to a semidefinite feasibility problem and solved by an embedded
//! interior-point method.
//!
//! Two interpolant shapes are supported: plain polynomials `h(x)`, and
//! semialgebraic functions `h1(x) + sqrt(||x||^2 + 1) * h2(x)` obtained by
//! adjoining a fresh variable `w` with `w^2 = ||x||^2 + 1`, `w >= 0`.
//!
//! Pipeline stages, one module each:
//!
//! * [`poly`] — exact sparse multivariate polynomial arithmetic,
//!   homogenization, top-degree parts and the projective substitution that
//!   maps a homogeneous separator back to a semialgebraic function.
//! * [`formula`] — problem-file parsing, DNF normalization and validation of
//!   the shared/private variable partition.
//! * [`sos`] — construction of the sum-of-squares identities and their
//!   compilation, by exact coefficient matching, to a semidefinite program.
//! * [`sdp`] — the semidefinite problem representation, the embedded
//!   primal-dual interior-point solver, and SDPA-format interchange.
//! * [`extract`] — recovery of the interpolant and its positivity
//!   certificate from a feasible solution.
//! * [`verify`] — seeded sampling of the input sets and numeric verification
//!   of the sign conditions.
//! * [`corpus`] — small named problems exercised by the test suite.

pub mod corpus;
pub mod extract;
pub mod formula;
pub mod poly;
pub mod rat;
pub mod sdp;
pub mod sos;
pub mod verify;

pub use extract::{extract, certificate_residual, Certificate, Interpolant, InterpolantKind};
pub use formula::{parse_problem, Atom, Clause, Formula, ProblemInstance};
pub use poly::{Monomial, PolyError, Polynomial, SqrtPair, VarId, VarTable};
pub use sdp::{SdpError, SdpProblem, SdpSolution, SdpStatus, SolverSettings};
pub use sos::{build_program, compile_to_sdp, monomial_basis, Mode, SosProgram};
pub use verify::{sample_clause, verify, SampleBox, SampleReport};
