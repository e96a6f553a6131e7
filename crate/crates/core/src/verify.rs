//! Numeric verification of the sign conditions on sampled points.
//!
//! Every clause of each formula is sampled by rejection inside a finite box
//! (the domains themselves may be unbounded): draw uniform points, keep
//! those satisfying every atom with slack >= 0. Variables bounded by
//! univariate linear atoms (`6 - R >= 0`) get their box clipped to those
//! bounds; everything else defaults to [-10, 10] unless overridden. Thin
//! sets fall back to a penalty descent that walks rejected draws onto the
//! set. The interpolant is then evaluated on the shared coordinates of each
//! sample; the verdict is PASS when it stays above `pos_tol` on every
//! phi-sample and below `-pos_tol` on every psi-sample, vacuously for a
//! side that produced no samples.
//!
//! Sampling is deterministic: clause `k` (numbered across phi then psi)
//! draws from a stream seeded with `seed ^ k`, so clauses can be sampled in
//! parallel without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Clause, ProblemInstance};
use crate::poly::{Polynomial, SqrtPair, VarId};
use crate::rat;

/// Default positivity cut separating "strictly positive" from noise.
pub const DEFAULT_POS_TOL: f64 = 1e-7;

/// Rejection draws before declaring a clause empty.
const ZERO_ACCEPT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("no samples found (set may be empty or box ill-chosen)")]
    NoSamples,
    #[error("sampling box is empty for variable '{0}'")]
    EmptyBox(String),
    #[error("interpolant uses variable '{0}' that is not shared in the problem")]
    VariableMismatch(String),
}

/// Per-variable sampling bounds over the instance's variable table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub bounds: Vec<(f64, f64)>,
}

impl SampleBox {
    /// The default window: [-10, 10] for every variable.
    pub fn default_for(nvars: usize) -> Self {
        Self {
            bounds: vec![(-10.0, 10.0); nvars],
        }
    }

    pub fn set(&mut self, v: VarId, lo: f64, hi: f64) {
        self.bounds[v.index()] = (lo, hi);
    }

    /// Clip to the bounds implied by a clause's univariate linear atoms.
    fn clipped_to(&self, clause: &Clause) -> Self {
        let mut out = self.clone();
        for (v, lo, hi) in clause.linear_bounds() {
            let b = &mut out.bounds[v.index()];
            if let Some(lo) = lo {
                b.0 = b.0.max(rat::to_f64(&lo));
            }
            if let Some(hi) = hi {
                b.1 = b.1.min(rat::to_f64(&hi));
            }
        }
        out
    }
}

/// Result of sampling one clause.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub points: Vec<Vec<f64>>,
    pub draws: usize,
    pub acceptance_rate: f64,
    pub used_fallback: bool,
}

fn satisfies(clause: &Clause, point: &[f64]) -> bool {
    clause
        .atoms
        .iter()
        .all(|a| a.poly.evaluate(point).map(|v| v >= 0.0).unwrap_or(false))
}

/// Penalty descent used when rejection finds nothing: walk a draw towards
/// the set by minimizing the squared violation of the failing atoms.
fn descend_to_set(
    clause: &Clause,
    gradients: &[Vec<Polynomial>],
    start: &[f64],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    let mut p = start.to_vec();
    let penalty = |pt: &[f64]| -> f64 {
        clause
            .atoms
            .iter()
            .map(|a| {
                let v = a.poly.evaluate(pt).unwrap_or(f64::INFINITY);
                if v < 0.0 {
                    v * v
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut f = penalty(&p);
    for _ in 0..120 {
        if f == 0.0 {
            return Some(p);
        }
        // gradient of the penalty: sum of 2 v grad(atom) over violated atoms
        let mut grad = vec![0.0; p.len()];
        for (atom, atom_grad) in clause.atoms.iter().zip(gradients) {
            let v = atom.poly.evaluate(&p).unwrap_or(0.0);
            if v < 0.0 {
                for (gi, g) in atom_grad.iter().enumerate() {
                    grad[gi] += 2.0 * v * g.evaluate(&p).unwrap_or(0.0);
                }
            }
        }
        let norm_sq: f64 = grad.iter().map(|g| g * g).sum();
        if norm_sq <= 1e-300 {
            return None;
        }
        let mut step = f / norm_sq;
        let mut improved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = p
                .iter()
                .zip(&grad)
                .zip(bounds)
                .map(|((pi, gi), &(lo, hi))| (pi - step * gi).clamp(lo, hi))
                .collect();
            let fc = penalty(&cand);
            if fc < f {
                p = cand;
                f = fc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    if penalty(&p) == 0.0 {
        Some(p)
    } else {
        None
    }
}

/// Rejection-sample `n` points of a clause inside `box_`, deterministically
/// from `seed`. Bounds implied by the clause clip the box first.
pub fn sample_clause(
    clause: &Clause,
    n: usize,
    box_: &SampleBox,
    seed: u64,
) -> Result<SampleOutcome, VerifyError> {
    assert!(n > 0, "sample count must be positive");
    let nvars = clause.atoms[0].poly.nvars();
    assert_eq!(box_.bounds.len(), nvars, "box does not match variable table");
    let table = clause.atoms[0].poly.table().clone();
    let eff = box_.clipped_to(clause);
    for (i, &(lo, hi)) in eff.bounds.iter().enumerate() {
        if !(lo <= hi) {
            return Err(VerifyError::EmptyBox(table.name(VarId(i as u32)).to_string()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut draws = 0usize;
    let hard_cap = ZERO_ACCEPT_BUDGET.max(1000 * n);
    let mut rejected_pool: Vec<Vec<f64>> = Vec::new();
    while points.len() < n && draws < hard_cap {
        draws += 1;
        let point: Vec<f64> = eff
            .bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect();
        if satisfies(clause, &point) {
            points.push(point);
        } else if rejected_pool.len() < 256 {
            rejected_pool.push(point);
        }
        if points.is_empty() && draws == ZERO_ACCEPT_BUDGET {
            break;
        }
    }
    let mut used_fallback = false;
    if points.is_empty() {
        // boundary-biased fallback for thin sets
        let gradients: Vec<Vec<Polynomial>> = clause
            .atoms
            .iter()
            .map(|a| table.ids().map(|v| a.poly.partial(v)).collect())
            .collect();
        for start in &rejected_pool {
            if let Some(p) = descend_to_set(clause, &gradients, start, &eff.bounds) {
                points.push(p);
                used_fallback = true;
                if points.len() >= n.min(rejected_pool.len()) {
                    break;
                }
            }
        }
        if points.is_empty() {
            return Err(VerifyError::NoSamples);
        }
    }
    let acceptance_rate = if used_fallback {
        0.0
    } else {
        points.len() as f64 / draws as f64
    };
    Ok(SampleOutcome {
        points,
        draws,
        acceptance_rate,
        used_fallback,
    })
}

/// One sign violation: side, sampled point (full coordinates), value of h.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub side: String,
    pub clause: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

/// A clause that produced no samples, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseFailure {
    pub side: String,
    pub clause: usize,
    pub reason: String,
}

/// Sign-condition report over sampled points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleReport {
    pub n_phi: usize,
    pub n_psi: usize,
    pub min_on_phi: Option<f64>,
    pub max_on_psi: Option<f64>,
    /// First violations encountered (capped), plus the total count.
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    pub clause_failures: Vec<ClauseFailure>,
    /// Variable name with the bounds actually used (before per-clause clipping).
    pub box_used: Vec<(String, f64, f64)>,
    pub pos_tol: f64,
    pub seed: u64,
    pub pass: bool,
}

impl SampleReport {
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "verdict: {}", if self.pass { "PASS" } else { "FAIL" }).unwrap();
        writeln!(out, "samples: phi {}  psi {}", self.n_phi, self.n_psi).unwrap();
        match self.min_on_phi {
            Some(v) => writeln!(out, "min h on phi: {v:.9e}").unwrap(),
            None => writeln!(out, "min h on phi: (no samples)").unwrap(),
        }
        match self.max_on_psi {
            Some(v) => writeln!(out, "max h on psi: {v:.9e}").unwrap(),
            None => writeln!(out, "max h on psi: (no samples)").unwrap(),
        }
        writeln!(out, "violations: {}", self.violation_count).unwrap();
        for v in self.violations.iter().take(10) {
            writeln!(
                out,
                "  {} clause {}: h = {:.6e} at {:?}",
                v.side, v.clause, v.value, v.point
            )
            .unwrap();
        }
        for cf in &self.clause_failures {
            writeln!(out, "note: {} clause {}: {}", cf.side, cf.clause, cf.reason).unwrap();
        }
        out
    }
}

/// Sample every clause of both formulas and check the interpolant's sign.
///
/// Private variables participate in sampling and are dropped when `h` is
/// evaluated (the interpolant ranges over shared variables only).
pub fn verify(
    interp: &SqrtPair,
    instance: &ProblemInstance,
    n: usize,
    box_: &SampleBox,
    seed: u64,
    pos_tol: f64,
) -> SampleReport {
    let jobs: Vec<(&'static str, usize, usize, &Clause)> = instance
        .phi
        .clauses
        .iter()
        .enumerate()
        .map(|(i, c)| ("phi", i, i, c))
        .chain(
            instance
                .psi
                .clauses
                .iter()
                .enumerate()
                .map(|(i, c)| ("psi", i, instance.phi.clauses.len() + i, c)),
        )
        .collect();

    struct ClauseResult {
        side: &'static str,
        clause: usize,
        outcome: Result<(usize, f64, f64, Vec<(Vec<f64>, f64)>), String>,
    }

    let results: Vec<ClauseResult> = jobs
        .par_iter()
        .map(|&(side, clause_idx, global_idx, clause)| {
            let outcome = sample_clause(clause, n, box_, seed ^ global_idx as u64)
                .map(|sampled| {
                    let mut min_v = f64::INFINITY;
                    let mut max_v = f64::NEG_INFINITY;
                    let mut violations = Vec::new();
                    for point in &sampled.points {
                        let v = interp.eval_full(point).expect("shared coords in range");
                        min_v = min_v.min(v);
                        max_v = max_v.max(v);
                        let bad = if side == "phi" {
                            v <= pos_tol
                        } else {
                            v >= -pos_tol
                        };
                        if bad {
                            violations.push((point.clone(), v));
                        }
                    }
                    (sampled.points.len(), min_v, max_v, violations)
                })
                .map_err(|e| e.to_string());
            ClauseResult {
                side,
                clause: clause_idx,
                outcome,
            }
        })
        .collect();

    let mut report = SampleReport {
        n_phi: 0,
        n_psi: 0,
        min_on_phi: None,
        max_on_psi: None,
        violations: Vec::new(),
        violation_count: 0,
        clause_failures: Vec::new(),
        box_used: instance
            .table
            .names()
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), box_.bounds[i].0, box_.bounds[i].1))
            .collect(),
        pos_tol,
        seed,
        pass: false,
    };
    for r in results {
        match r.outcome {
            Err(reason) => report.clause_failures.push(ClauseFailure {
                side: r.side.into(),
                clause: r.clause,
                reason,
            }),
            Ok((count, min_v, max_v, violations)) => {
                if r.side == "phi" {
                    report.n_phi += count;
                    report.min_on_phi =
                        Some(report.min_on_phi.map_or(min_v, |m: f64| m.min(min_v)));
                } else {
                    report.n_psi += count;
                    report.max_on_psi =
                        Some(report.max_on_psi.map_or(max_v, |m: f64| m.max(max_v)));
                }
                report.violation_count += violations.len();
                for (point, value) in violations {
                    if report.violations.len() < 100 {
                        report.violations.push(Violation {
                            side: r.side.into(),
                            clause: r.clause,
                            point,
                            value,
                        });
                    }
                }
            }
        }
    }
    let phi_ok = report.min_on_phi.map_or(true, |m| m > pos_tol);
    let psi_ok = report.max_on_psi.map_or(true, |m| m < -pos_tol);
    report.pass = phi_ok && psi_ok && report.violation_count == 0;
    report
}

/// Build the sampling box for an instance from optional per-variable and
/// uniform overrides, defaulting to [-10, 10].
pub fn resolve_box(
    instance: &ProblemInstance,
    uniform: Option<(f64, f64)>,
    per_var: &[(String, f64, f64)],
) -> Result<SampleBox, VerifyError> {
    let mut b = SampleBox::default_for(instance.table.len());
    if let Some((lo, hi)) = uniform {
        for v in b.bounds.iter_mut() {
            *v = (lo, hi);
        }
    }
    for (name, lo, hi) in per_var {
        let v = instance
            .table
            .lookup(name)
            .ok_or_else(|| VerifyError::VariableMismatch(name.clone()))?;
        b.set(v, *lo, *hi);
    }
    for (i, &(lo, hi)) in b.bounds.iter().enumerate() {
        if !(lo <= hi) {
            return Err(VerifyError::EmptyBox(
                instance.table.name(VarId(i as u32)).to_string(),
            ));
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_problem;
    use crate::poly::VarTable;
    use crate::rat::int;
    use std::sync::Arc;

    fn disc_instance() -> ProblemInstance {
        parse_problem("shared x y;\nphi := 1 - x^2 - y^2 >= 0;\npsi := -1 >= 0;\n").unwrap()
    }

    #[test]
    fn disc_acceptance_rate_matches_area_ratio() {
        let inst = disc_instance();
        let mut b = SampleBox::default_for(2);
        for v in b.bounds.iter_mut() {
            *v = (-2.0, 2.0);
        }
        let out = sample_clause(&inst.phi.clauses[0], 2000, &b, 7).unwrap();
        assert_eq!(out.points.len(), 2000);
        for p in &out.points {
            assert!(p[0] * p[0] + p[1] * p[1] <= 1.0);
        }
        let expected = std::f64::consts::PI / 16.0;
        assert!(
            (out.acceptance_rate - expected).abs() < 0.02,
            "rate {} vs {}",
            out.acceptance_rate,
            expected
        );
    }

    #[test]
    fn empty_clause_reports_no_samples() {
        let inst = disc_instance();
        let b = SampleBox::default_for(2);
        assert!(matches!(
            sample_clause(&inst.psi.clauses[0], 10, &b, 1),
            Err(VerifyError::NoSamples)
        ));
    }

    #[test]
    fn trivially_true_clause_accepts_everything() {
        let inst =
            parse_problem("shared x;\nphi := 1 >= 0;\npsi := -1 >= 0;\n").unwrap();
        let b = SampleBox::default_for(1);
        let out = sample_clause(&inst.phi.clauses[0], 50, &b, 3).unwrap();
        assert_eq!(out.acceptance_rate, 1.0);
    }

    #[test]
    fn thin_set_uses_fallback() {
        // the circle x^2 + y^2 = 1 has measure zero for rejection, but the
        // two-sided inequalities leave slack 0 only at exact solutions;
        // widen slightly so the set is thin but nonempty
        let inst = parse_problem(
            "shared x y;\nphi := 0.0001 - (x^2 + y^2 - 1)^2 >= 0;\npsi := -1 >= 0;\n",
        )
        .unwrap();
        let mut b = SampleBox::default_for(2);
        for v in b.bounds.iter_mut() {
            *v = (-1.5, 1.5);
        }
        let out = sample_clause(&inst.phi.clauses[0], 5, &b, 11).unwrap();
        assert!(!out.points.is_empty());
        for p in &out.points {
            let r2 = p[0] * p[0] + p[1] * p[1];
            assert!((r2 - 1.0).abs() <= 0.011);
        }
    }

    #[test]
    fn vacuous_pass_and_sign_flip() {
        let inst =
            parse_problem("shared x;\nphi := 1 >= 0;\npsi := -1 >= 0;\n").unwrap();
        let table = inst.table.clone();
        let one = Polynomial::constant(table.clone(), int(1));
        let h = SqrtPair::new(one, Polynomial::zero(table.clone()), inst.shared.clone());
        let b = SampleBox::default_for(1);
        let report = verify(&h, &inst, 100, &b, 5, DEFAULT_POS_TOL);
        assert!(report.pass);
        assert_eq!(report.min_on_phi, Some(1.0));
        assert_eq!(report.max_on_psi, None);
        assert_eq!(report.clause_failures.len(), 1);

        let neg = SqrtPair::new(
            Polynomial::constant(table.clone(), int(-1)),
            Polynomial::zero(table.clone()),
            inst.shared.clone(),
        );
        let report = verify(&neg, &inst, 100, &b, 5, DEFAULT_POS_TOL);
        assert!(!report.pass);
        assert!(report.violation_count > 0);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let inst = disc_instance();
        let b = SampleBox::default_for(2);
        let h = SqrtPair::new(
            Polynomial::constant(inst.table.clone(), int(1)),
            Polynomial::zero(inst.table.clone()),
            inst.shared.clone(),
        );
        let r1 = verify(&h, &inst, 500, &b, 99, DEFAULT_POS_TOL);
        let r2 = verify(&h, &inst, 500, &b, 99, DEFAULT_POS_TOL);
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn private_coordinates_do_not_affect_h() {
        let inst = parse_problem(
            "shared x;\npsi_only r;\nphi := x >= 0;\npsi := r - x >= 0 & 1 <= r <= 2;\n",
        )
        .unwrap();
        let t = inst.table.clone();
        let x = t.lookup("x").unwrap();
        let h = SqrtPair::new(
            Polynomial::variable(t.clone(), x),
            Polynomial::constant(t.clone(), int(1)),
            inst.shared.clone(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let xval: f64 = rng.gen_range(-3.0..3.0);
            let base = h.eval_full(&[xval, rng.gen_range(-5.0..5.0)]).unwrap();
            let perturbed = h.eval_full(&[xval, rng.gen_range(-5.0..5.0)]).unwrap();
            assert_eq!(base, perturbed);
        }
    }

    #[test]
    fn torus_bounds_are_clipped_from_atoms() {
        let inst = parse_problem(crate::corpus::TORUS).unwrap();
        let b = SampleBox::default_for(inst.table.len());
        let clause = &inst.psi.clauses[0];
        let eff = b.clipped_to(clause);
        let t = &inst.table;
        let rid = t.lookup("R").unwrap().index();
        let rr = t.lookup("r").unwrap().index();
        assert_eq!(eff.bounds[rid], (4.0, 6.0));
        assert_eq!(eff.bounds[rr], (0.5, 1.0));
        // torus interior sampling works inside the default window
        let out = sample_clause(clause, 200, &b, 23).unwrap();
        assert_eq!(out.points.len(), 200);
    }

    #[test]
    fn resolve_box_overrides() {
        let inst = disc_instance();
        let b = resolve_box(
            &inst,
            Some((-3.0, 3.0)),
            &[("y".to_string(), 0.0, 1.0)],
        )
        .unwrap();
        assert_eq!(b.bounds[0], (-3.0, 3.0));
        assert_eq!(b.bounds[1], (0.0, 1.0));
        assert!(matches!(
            resolve_box(&inst, None, &[("q".to_string(), 0.0, 1.0)]),
            Err(VerifyError::VariableMismatch(_))
        ));
        assert!(matches!(
            resolve_box(&inst, Some((2.0, -2.0)), &[]),
            Err(VerifyError::EmptyBox(_))
        ));
    }

    #[test]
    fn unused_var_table_helpers() {
        // SampleBox::set and VarTable interplay
        let t = Arc::new(VarTable::from_names(["a", "b"]));
        let mut b = SampleBox::default_for(t.len());
        b.set(t.lookup("b").unwrap(), -1.0, 1.0);
        assert_eq!(b.bounds[1], (-1.0, 1.0));
    }
}
