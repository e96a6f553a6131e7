//! Property suites for the polynomial core: the projective-substitution
//! identity, the sphere correspondence, and algebraic invariants.

use std::sync::Arc;

use polysep::poly::{Monomial, Polynomial, VarId, VarTable};
use polysep::rat::{self, Rat};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_poly(
    rng: &mut StdRng,
    table: &Arc<VarTable>,
    vars: &[VarId],
    max_deg: u32,
    max_terms: usize,
) -> Polynomial {
    let nterms = rng.gen_range(1..=max_terms);
    let mut p = Polynomial::zero(table.clone());
    for _ in 0..nterms {
        let mut exps = vec![0u32; table.len()];
        let mut budget = rng.gen_range(0..=max_deg);
        while budget > 0 {
            let v = vars[rng.gen_range(0..vars.len())];
            exps[v.index()] += 1;
            budget -= 1;
        }
        let coeff = rat::frac(rng.gen_range(-20i64..=20), rng.gen_range(1i64..=9));
        p.add_term(Monomial::from_exps(exps), coeff);
    }
    p
}

/// 200 random polynomials g in (x0, x), 100 random points each: the pair
/// returned by the projective substitution evaluates to
/// `(sqrt(||x||^2+1))^deg(g) * g(1/sqrt(..), x/sqrt(..))`.
#[test]
fn projective_substitution_identity_suite() {
    let mut rng = StdRng::seed_from_u64(0x12e);
    let mut checked = 0usize;
    while checked < 200 {
        let r = rng.gen_range(1..=3usize);
        let mut names = vec!["x0".to_string()];
        for i in 1..=r {
            names.push(format!("x{i}"));
        }
        let table = Arc::new(VarTable::from_names(names));
        let x0 = table.lookup("x0").unwrap();
        let shared: Vec<VarId> = (1..=r).map(|i| VarId(i as u32)).collect();
        let all: Vec<VarId> = table.ids().collect();
        let g = random_poly(&mut rng, &table, &all, 5, 6);
        if g.is_zero() {
            continue;
        }
        let d = g.degree().unwrap();
        let pair = g.projective_substitute(x0, &shared).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..r).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            let u = 1.0 / (norm_sq + 1.0).sqrt();
            let mut full = vec![0.0; table.len()];
            full[x0.index()] = u;
            for (i, &xi) in x.iter().enumerate() {
                full[shared[i].index()] = xi * u;
            }
            let direct = g.evaluate(&full).unwrap() / u.powi(d as i32);
            let via_pair = pair.eval(&x).unwrap();
            let scale = direct.abs().max(via_pair.abs()).max(1.0);
            assert!(
                (direct - via_pair).abs() <= 1e-9 * scale,
                "mismatch {direct} vs {via_pair} for g = {g}"
            );
        }
        checked += 1;
    }
}

/// 1000 random (set, point) pairs: x satisfies all p_i >= 0 exactly iff the
/// mapped unit-sphere point satisfies all homogenizations with x0 > 0.
#[test]
fn sphere_correspondence_suite() {
    let mut rng = StdRng::seed_from_u64(0xcafe);
    let mut checked = 0usize;
    while checked < 1000 {
        let r = rng.gen_range(1..=3usize);
        let mut names: Vec<String> = (1..=r).map(|i| format!("x{i}")).collect();
        names.push("x0".to_string());
        let table = Arc::new(VarTable::from_names(names));
        let x0 = table.lookup("x0").unwrap();
        let shared: Vec<VarId> = (0..r).map(|i| VarId(i as u32)).collect();
        let m = rng.gen_range(1..=3usize);
        let polys: Vec<Polynomial> = (0..m)
            .map(|_| {
                loop {
                    let p = random_poly(&mut rng, &table, &shared, 4, 5);
                    if !p.is_zero() {
                        return p;
                    }
                }
            })
            .collect();
        let point: Vec<Rat> = (0..r)
            .map(|_| rat::frac(rng.gen_range(-12i64..=12), rng.gen_range(1i64..=5)))
            .collect();
        let mut full_exact = point.clone();
        full_exact.push(rat::zero()); // x0 slot unused in the originals

        // exact membership and a guard against sign decisions below the
        // numeric tolerance
        let values: Vec<Rat> = polys
            .iter()
            .map(|p| p.evaluate_exact(&full_exact).unwrap())
            .collect();
        let norm_sq: f64 = point.iter().map(|q| rat::to_f64(q).powi(2)).sum();
        let u = 1.0 / (norm_sq + 1.0).sqrt();
        let too_close = polys.iter().zip(&values).any(|(p, v)| {
            let scaled = rat::to_f64(v).abs() * u.powi(p.degree().unwrap() as i32);
            scaled < 1e-7
        });
        if too_close {
            continue;
        }
        let member = values.iter().all(|v| *v >= rat::zero());

        // mapped sphere point
        let mut mapped = vec![0.0; table.len()];
        mapped[x0.index()] = u;
        for (i, q) in point.iter().enumerate() {
            mapped[i] = rat::to_f64(q) * u;
        }
        let sphere_residual: f64 =
            (mapped.iter().map(|v| v * v).sum::<f64>() - 1.0).abs();
        assert!(sphere_residual <= 1e-9);
        assert!(u > 0.0);
        let mapped_member = polys.iter().all(|p| {
            let lifted = p.homogenize(x0).unwrap();
            lifted.evaluate(&mapped).unwrap() >= -1e-9
        });
        assert_eq!(
            member, mapped_member,
            "correspondence failed for point {point:?}"
        );
        // and per-polynomial sign agreement away from the tolerance band
        for (p, v) in polys.iter().zip(&values) {
            let lifted_val = p.homogenize(x0).unwrap().evaluate(&mapped).unwrap();
            if *v >= rat::zero() {
                assert!(lifted_val >= -1e-9);
            } else {
                assert!(lifted_val <= 1e-9);
            }
        }
        checked += 1;
    }
}

fn arb_poly(nvars: usize) -> impl Strategy<Value = Polynomial> {
    let names: Vec<String> = (0..nvars).map(|i| format!("v{i}")).collect();
    let table = Arc::new(VarTable::from_names(names));
    prop::collection::vec(
        (
            prop::collection::vec(0u32..4, nvars),
            -30i64..30,
            1i64..7,
        ),
        1..6,
    )
    .prop_map(move |terms| {
        let mut p = Polynomial::zero(table.clone());
        for (exps, n, d) in terms {
            p.add_term(Monomial::from_exps(exps), rat::frac(n, d));
        }
        p
    })
}

proptest! {
    /// Exact identity: evaluating the homogenization at (1, x) recovers f(x).
    #[test]
    fn homogenize_eval_identity(f in arb_poly(3), xs in prop::collection::vec((-9i64..9, 1i64..5), 3)) {
        prop_assume!(!f.is_zero());
        let mut vt = (*f.table().clone()).clone();
        let x0 = vt.add("x0");
        let table = Arc::new(vt);
        let f = f.extended(table.clone());
        let lifted = f.homogenize(x0).unwrap();
        prop_assert!(lifted.is_homogeneous());
        prop_assert_eq!(lifted.degree(), f.degree());
        let mut point: Vec<Rat> = xs.iter().map(|&(n, d)| rat::frac(n, d)).collect();
        point.push(rat::one()); // x0 = 1
        prop_assert_eq!(
            lifted.evaluate_exact(&point).unwrap(),
            f.evaluate_exact(&point).unwrap()
        );
    }

    /// Top parts are multiplicative: top(p*q) = top(p)*top(q).
    #[test]
    fn top_part_multiplicative(p in arb_poly(3), q in arb_poly(3)) {
        prop_assume!(!p.is_zero() && !q.is_zero());
        let q = Polynomial::from_terms(
            p.table().clone(),
            q.terms().map(|(m, c)| (m.clone(), c.clone())),
        );
        let prod = p.mul(&q);
        prop_assume!(!prod.is_zero());
        prop_assert_eq!(
            prod.top_part().unwrap(),
            p.top_part().unwrap().mul(&q.top_part().unwrap())
        );
    }

    /// The canonical rendering re-parses to the same polynomial.
    #[test]
    fn render_parse_round_trip(p in arb_poly(3)) {
        let text = p.to_string();
        let parsed = polysep::formula::parse_polynomial(&text, p.table()).unwrap();
        prop_assert_eq!(parsed, p);
    }
}
