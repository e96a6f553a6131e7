//! Benchmark problems and the shared solver test corpus.
//!
//! Three separation problems exercised throughout the test suite: a pair of
//! quartic oval chains, two curve regions outside the unit circle, and the
//! interior of a torus with uncertain radii against a quartic bowl. The
//! functions at the bottom compile a named list of SDP instances used by
//! round-trip, scaling and certificate tests.

use std::sync::Arc;

use crate::formula::{parse_problem, MultKind};
use crate::poly::{Monomial, Polynomial, VarTable};
use crate::rat::{self, Rat};
use crate::sdp::{BlockEntries, Equality, SdpProblem};
use crate::sos::{build_program, build_sos_feasibility, compile_to_sdp, Mode};

/// Two chains of quartic ovals separated along the sign of `y^3`.
pub const OVALS: &str = "\
shared x y;
phi := (11 - x^4 + 0.1*y^4 >= 0 & y^3 >= 0 & (x - 1)^4 + y^4 - 0.09 >= 0 & (x + 1)^4 + y^4 - 1.1025 >= 0)
     | (0.9025 - (x - 1)^4 - y^4 >= 0 & (x - 1)^4 + y^4 - 0.09 >= 0 & (x + 1)^4 + y^4 - 1.1025 >= 0)
     | (0.04 - (x + 1)^4 - y^4 >= 0);
psi := (11 - x^4 + 0.1*y^4 >= 0 & -y^3 >= 0 & (x + 1)^4 + y^4 - 0.09 >= 0 & (x - 1)^4 + y^4 - 1.1025 >= 0)
     | (0.9025 - (x + 1)^4 - y^4 >= 0 & (x + 1)^4 + y^4 - 0.09 >= 0 & (x - 1)^4 + y^4 - 1.1025 >= 0)
     | (0.04 - (x - 1)^4 - y^4 >= 0);
";

/// Two unbounded curve regions outside the unit circle.
pub const CURVES: &str = "\
shared x y;
phi := 8*x*y - (x^2 - y^3)^2 >= 0 & x^2 + y^2 - 1 >= 0;
psi := -12.5*x*y - (x^2 + y^2)^2 >= 0 & x^2 + y^2 - 1 >= 0;
";

/// A quartic bowl around the z-axis against the interior of a torus with
/// minor radius r in [0.5, 1] and major radius R in [4, 6].
pub const TORUS: &str = "\
shared x y z;
psi_only r R;
phi := 1 + 0.1*z^4 - x^4 - y^4 >= 0 & 10*z^4 - x^4 - y^4 >= 0;
psi := 4*R^2*(x^2 + y^2) - (x^2 + y^2 + z^2 + R^2 - r^2)^2 >= 0 & 4 <= R <= 6 & 0.5 <= r <= 1;
";

/// A linearly separable toy problem (`x >= 1` vs `x <= -1`).
pub const HALFLINE: &str = "\
shared x;
phi := x - 1 >= 0;
psi := -x - 1 >= 0;
";

/// `x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 + c` over a two-variable table.
pub fn motzkin_plus(table: &Arc<VarTable>, c: Rat) -> Polynomial {
    let n = table.len();
    let x1 = table.ids().next().unwrap();
    let x2 = table.ids().nth(1).unwrap();
    Polynomial::from_terms(
        table.clone(),
        [
            (
                Monomial::var(n, x1, 4).mul(&Monomial::var(n, x2, 2)),
                rat::one(),
            ),
            (
                Monomial::var(n, x1, 2).mul(&Monomial::var(n, x2, 4)),
                rat::one(),
            ),
            (
                Monomial::var(n, x1, 2).mul(&Monomial::var(n, x2, 2)),
                rat::int(-3),
            ),
            (Monomial::unit(n), c),
        ],
    )
}

/// The direct representability check `motzkin + 2 = sigma_0` at order `s`.
pub fn motzkin_direct_program(s: u32) -> crate::sos::SosProgram {
    let table = Arc::new(VarTable::from_names(["x1", "x2"]));
    let lhs = motzkin_plus(&table, rat::int(2));
    let vars: Vec<_> = table.ids().collect();
    build_sos_feasibility(lhs, vec![], vars, s).expect("degree fits")
}

/// The homogenized representability check with generators `x0` and
/// `1 - x0^2 - x1^2 - x2^2` at order `s`: the lifted Motzkin witness.
pub fn motzkin_homogenized_program(s: u32) -> crate::sos::SosProgram {
    let mut vt = VarTable::from_names(["x1", "x2"]);
    let x0 = vt.add("x0");
    let table = Arc::new(vt);
    let n = table.len();
    let x1 = table.lookup("x1").unwrap();
    let x2 = table.lookup("x2").unwrap();
    // homogenization of motzkin + 1 to degree 6
    let lhs = Polynomial::from_terms(
        table.clone(),
        [
            (
                Monomial::var(n, x1, 4).mul(&Monomial::var(n, x2, 2)),
                rat::one(),
            ),
            (
                Monomial::var(n, x1, 2).mul(&Monomial::var(n, x2, 4)),
                rat::one(),
            ),
            (
                Monomial::var(n, x1, 2)
                    .mul(&Monomial::var(n, x2, 2))
                    .mul(&Monomial::var(n, x0, 2)),
                rat::int(-3),
            ),
            (Monomial::var(n, x0, 6), rat::int(2)),
        ],
    );
    let ball = Polynomial::from_terms(
        table.clone(),
        [
            (Monomial::unit(n), rat::one()),
            (Monomial::var(n, x0, 2), -rat::one()),
            (Monomial::var(n, x1, 2), -rat::one()),
            (Monomial::var(n, x2, 2), -rat::one()),
        ],
    );
    let gens = vec![
        (Polynomial::variable(table.clone(), x0), MultKind::Sos),
        (ball, MultKind::Free),
    ];
    let vars: Vec<_> = table.ids().collect();
    build_sos_feasibility(lhs, gens, vars, s).expect("degree fits")
}

/// Named SDP instances used by interchange, scaling and certificate tests.
pub fn sdp_corpus() -> Vec<(String, SdpProblem)> {
    let mut out: Vec<(String, SdpProblem)> = Vec::new();

    let unit = |rhs: f64| SdpProblem {
        block_dims: vec![1],
        nfree: 0,
        equalities: vec![Equality {
            blocks: vec![BlockEntries {
                block: 0,
                entries: vec![(0, 0, 1.0)],
            }],
            free: vec![],
            rhs,
        }],
        objective: None,
    };
    out.push(("unit-feasible".into(), unit(1.0)));
    out.push(("unit-infeasible".into(), unit(-1.0)));

    out.push((
        "free-pair".into(),
        SdpProblem {
            block_dims: vec![1],
            nfree: 1,
            equalities: vec![
                Equality {
                    blocks: vec![BlockEntries {
                        block: 0,
                        entries: vec![(0, 0, 1.0)],
                    }],
                    free: vec![(0, 1.0)],
                    rhs: 3.0,
                },
                Equality {
                    blocks: vec![BlockEntries {
                        block: 0,
                        entries: vec![(0, 0, 1.0)],
                    }],
                    free: vec![(0, -1.0)],
                    rhs: 1.0,
                },
            ],
            objective: None,
        },
    ));

    let sos_check = |p: Polynomial, vars: Vec<crate::poly::VarId>, s: u32| {
        compile_to_sdp(&build_sos_feasibility(p, vec![], vars, s).unwrap())
    };
    let t = Arc::new(VarTable::from_names(["x"]));
    let x = t.lookup("x").unwrap();
    let x2_plus_1 = Polynomial::from_terms(
        t.clone(),
        [
            (Monomial::var(1, x, 2), rat::one()),
            (Monomial::unit(1), rat::one()),
        ],
    );
    out.push(("sos-x2-plus-1".into(), sos_check(x2_plus_1, vec![x], 1)));

    out.push((
        "motzkin-direct".into(),
        compile_to_sdp(&motzkin_direct_program(3)),
    ));
    out.push((
        "motzkin-homogenized".into(),
        compile_to_sdp(&motzkin_homogenized_program(3)),
    ));

    let margin = rat::frac(1, 100);
    let torus = parse_problem(TORUS).unwrap();
    out.push((
        "torus-d2-s2".into(),
        compile_to_sdp(
            &build_program(&torus, 2, 2, Mode::Polynomial, margin.clone(), rat::zero()).unwrap(),
        ),
    ));

    let curves = parse_problem(CURVES).unwrap();
    out.push((
        "curves-d3-s2-semialgebraic".into(),
        compile_to_sdp(
            &build_program(&curves, 3, 2, Mode::Semialgebraic, margin.clone(), rat::zero())
                .unwrap(),
        ),
    ));
    out.push((
        "curves-d3-s3-semialgebraic".into(),
        compile_to_sdp(
            &build_program(&curves, 3, 3, Mode::Semialgebraic, margin.clone(), rat::zero())
                .unwrap(),
        ),
    ));

    let halfline = parse_problem(HALFLINE).unwrap();
    out.push((
        "halfline-d1-s1".into(),
        compile_to_sdp(
            &build_program(&halfline, 1, 1, Mode::Polynomial, margin, rat::zero()).unwrap(),
        ),
    ));

    out
}
