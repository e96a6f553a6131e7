//! Exact sparse multivariate polynomial arithmetic.
//!
//! Polynomials carry arbitrary-precision rational coefficients and are kept
//! in a canonical sparse form: a map from monomials to nonzero coefficients,
//! ordered graded-lexicographically (total degree first, ties broken
//! lexicographically on variable index). The module also provides the two
//! degree-preserving lifts the pipeline is built on — homogenization and the
//! top-degree part — and the projective substitution that converts a
//! homogeneous separator `g(x0, x)` back into a semialgebraic function
//! `h1(x) + sqrt(||x||^2 + 1) * h2(x)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{self, Rat};

/// Index of a variable in a [`VarTable`]; stable across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered set of named variables.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VarTable {
    names: Vec<String>,
}

impl VarTable {
    pub fn new() -> Self {
        Self { names: Vec::new() }
    }

    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// Add a variable, returning its id. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>) -> VarId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate variable name {name:?}"
        );
        self.names.push(name);
        VarId(self.names.len() as u32 - 1)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| VarId(i as u32))
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.names.len() as u32).map(VarId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A power product of variables, stored as one exponent per table slot.
///
/// The ordering is graded lexicographic: compare total degree first, then the
/// exponent vectors lexicographically (higher power on an earlier variable
/// wins). This makes monomial bases and rendered polynomials deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn unit(nvars: usize) -> Self {
        Self {
            exps: vec![0; nvars],
        }
    }

    pub fn from_exps(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn var(nvars: usize, v: VarId, power: u32) -> Self {
        let mut exps = vec![0; nvars];
        exps[v.index()] = power;
        Self { exps }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn exp(&self, v: VarId) -> u32 {
        self.exps[v.index()]
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Variables with nonzero exponent.
    pub fn support(&self) -> impl Iterator<Item = VarId> + '_ {
        self.exps
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(i, _)| VarId(i as u32))
    }

    /// Pad the exponent vector to a larger table.
    pub fn extended(&self, nvars: usize) -> Monomial {
        debug_assert!(nvars >= self.exps.len());
        let mut exps = self.exps.clone();
        exps.resize(nvars, 0);
        Monomial { exps }
    }

    fn render(&self, table: &VarTable) -> String {
        let mut parts = Vec::new();
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 1 {
                parts.push(table.name(VarId(i as u32)).to_string());
            } else if e > 1 {
                parts.push(format!("{}^{}", table.name(VarId(i as u32)), e));
            }
        }
        parts.join("*")
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

/// Errors from polynomial operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("operation undefined for the zero polynomial")]
    ZeroPolynomial,
    #[error("point dimension {got} does not match variable count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("homogenizing variable {0} already occurs in the polynomial")]
    HomogenizingVarOccurs(String),
}

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Invariants: no stored zero coefficients; `degree()` is `None` exactly for
/// the zero polynomial; all arithmetic is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    table: Arc<VarTable>,
    terms: BTreeMap<Monomial, Rat>,
}

impl Polynomial {
    pub fn zero(table: Arc<VarTable>) -> Self {
        Self {
            table,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(table: Arc<VarTable>, c: Rat) -> Self {
        let mut p = Self::zero(table);
        if !c.is_zero() {
            let unit = Monomial::unit(p.table.len());
            p.terms.insert(unit, c);
        }
        p
    }

    pub fn variable(table: Arc<VarTable>, v: VarId) -> Self {
        let nvars = table.len();
        let mut p = Self::zero(table);
        p.terms.insert(Monomial::var(nvars, v, 1), rat::one());
        p
    }

    pub fn from_terms(
        table: Arc<VarTable>,
        terms: impl IntoIterator<Item = (Monomial, Rat)>,
    ) -> Self {
        let mut p = Self::zero(table);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.table
    }

    pub fn nvars(&self) -> usize {
        self.table.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(rat::zero)
    }

    /// Variables that actually occur.
    pub fn support(&self) -> Vec<VarId> {
        let mut present = vec![false; self.table.len()];
        for m in self.terms.keys() {
            for v in m.support() {
                present[v.index()] = true;
            }
        }
        present
            .iter()
            .enumerate()
            .filter(|(_, p)| **p)
            .map(|(i, _)| VarId(i as u32))
            .collect()
    }

    pub fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(m.nvars(), self.table.len());
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.table.len(), other.table.len());
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            table: self.table.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.table.clone());
        }
        Polynomial {
            table: self.table.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.table.len(), other.table.len());
        let mut out = Polynomial::zero(self.table.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rat) -> Polynomial {
        let mut out = Polynomial::zero(self.table.clone());
        for (ma, ca) in &self.terms {
            out.add_term(ma.mul(m), ca * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.table.clone(), rat::one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to `v`.
    pub fn partial(&self, v: VarId) -> Polynomial {
        let mut out = Polynomial::zero(self.table.clone());
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e > 0 {
                let mut exps = m.exps().to_vec();
                exps[v.index()] = e - 1;
                out.add_term(Monomial::from_exps(exps), c * rat::int(e as i64));
            }
        }
        out
    }

    /// Floating-point evaluation at a full-dimensional point.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.table.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.table.len(),
                got: point.len(),
            });
        }
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat::to_f64(c);
            for (i, &e) in m.exps().iter().enumerate() {
                if e > 0 {
                    t *= point[i].powi(e as i32);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Exact rational evaluation.
    pub fn evaluate_exact(&self, point: &[Rat]) -> Result<Rat, PolyError> {
        if point.len() != self.table.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.table.len(),
                got: point.len(),
            });
        }
        let mut acc = rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exps().iter().enumerate() {
                for _ in 0..e {
                    t *= &point[i];
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Homogenization: pad every term with powers of `x0` up to the total
    /// degree. Substituting `x0 = 1` recovers the input. The zero polynomial
    /// is rejected (its degree is undefined) and `x0` must be fresh.
    pub fn homogenize(&self, x0: VarId) -> Result<Polynomial, PolyError> {
        let d = self.degree().ok_or(PolyError::ZeroPolynomial)?;
        if self.terms.keys().any(|m| m.exp(x0) > 0) {
            return Err(PolyError::HomogenizingVarOccurs(
                self.table.name(x0).to_string(),
            ));
        }
        let mut out = Polynomial::zero(self.table.clone());
        for (m, c) in &self.terms {
            let mut exps = m.exps().to_vec();
            exps[x0.index()] = d - m.degree();
            out.add_term(Monomial::from_exps(exps), c.clone());
        }
        Ok(out)
    }

    /// Substitute `v = 1` (drop the variable's powers).
    pub fn substitute_one(&self, v: VarId) -> Polynomial {
        let mut out = Polynomial::zero(self.table.clone());
        for (m, c) in &self.terms {
            let mut exps = m.exps().to_vec();
            exps[v.index()] = 0;
            out.add_term(Monomial::from_exps(exps), c.clone());
        }
        out
    }

    /// The top-degree homogeneous part. Rejects the zero polynomial.
    pub fn top_part(&self) -> Result<Polynomial, PolyError> {
        let d = self.degree().ok_or(PolyError::ZeroPolynomial)?;
        Ok(Polynomial {
            table: self.table.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        })
    }

    /// Whether every term has the same total degree.
    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(Monomial::degree);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// Largest absolute coefficient; zero for the zero polynomial.
    pub fn max_abs_coeff(&self) -> Rat {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(rat::zero)
    }

    /// Reinterpret over a larger table whose first variables coincide.
    pub fn extended(&self, table: Arc<VarTable>) -> Polynomial {
        assert!(table.len() >= self.table.len());
        debug_assert!(self
            .table
            .names()
            .iter()
            .zip(table.names())
            .all(|(a, b)| a == b));
        let n = table.len();
        Polynomial {
            table,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.extended(n), c.clone()))
                .collect(),
        }
    }

    /// `1 + sum of squares` of the given variables.
    pub fn one_plus_norm_sq(table: Arc<VarTable>, vars: &[VarId]) -> Polynomial {
        let mut p = Polynomial::constant(table.clone(), rat::one());
        for &v in vars {
            p.add_term(Monomial::var(table.len(), v, 2), rat::one());
        }
        p
    }

    /// Projective substitution along `x0`: maps a nonzero `g(x0, x)` to the
    /// pair `(h1, h2)` with
    /// `h1(x) + sqrt(||x||^2+1) * h2(x)
    ///    = (sqrt(||x||^2+1))^deg(g) * g(1/sqrt(||x||^2+1), x/sqrt(||x||^2+1))`
    /// where `||x||^2` ranges over `shared`. Each term of total degree `k` is
    /// multiplied by `(1+||x||^2)^floor((deg g - k)/2)` after setting
    /// `x0 = 1`; terms with odd `deg g - k` route into `h2`.
    pub fn projective_substitute(
        &self,
        x0: VarId,
        shared: &[VarId],
    ) -> Result<SqrtPair, PolyError> {
        let d = self.degree().ok_or(PolyError::ZeroPolynomial)?;
        let u = Polynomial::one_plus_norm_sq(self.table.clone(), shared);
        // powers of (1 + ||x||^2) up to floor(d/2), computed once
        let mut upows = vec![Polynomial::constant(self.table.clone(), rat::one())];
        for k in 1..=(d / 2) as usize {
            upows.push(upows[k - 1].mul(&u));
        }
        let mut h1 = Polynomial::zero(self.table.clone());
        let mut h2 = Polynomial::zero(self.table.clone());
        for (m, c) in &self.terms {
            let mut exps = m.exps().to_vec();
            exps[x0.index()] = 0;
            let stripped = Polynomial::from_terms(
                self.table.clone(),
                [(Monomial::from_exps(exps), c.clone())],
            );
            let t = d - m.degree();
            let lifted = stripped.mul(&upows[(t / 2) as usize]);
            if t % 2 == 0 {
                h1 = h1.add(&lifted);
            } else {
                h2 = h2.add(&lifted);
            }
        }
        Ok(SqrtPair {
            h1,
            h2,
            shared: shared.to_vec(),
        })
    }
}

impl fmt::Display for Polynomial {
    /// Canonical rendering: terms in graded-lex descending order, exact
    /// rational coefficients, explicit `*`, `^` for powers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            let sign = c.is_negative();
            if i == 0 {
                if sign {
                    write!(f, "-")?;
                }
            } else if sign {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mono = m.render(&self.table);
            if mono.is_empty() {
                write!(f, "{}", rat::render(&mag))?;
            } else if mag == rat::one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{}*{}", rat::render(&mag), mono)?;
            }
        }
        Ok(())
    }
}

/// A semialgebraic value `h1(x) + sqrt(||x||^2 + 1) * h2(x)` over the shared
/// variables; `h2 = 0` exactly when the value is a polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqrtPair {
    pub h1: Polynomial,
    pub h2: Polynomial,
    shared: Vec<VarId>,
}

impl SqrtPair {
    pub fn new(h1: Polynomial, h2: Polynomial, shared: Vec<VarId>) -> Self {
        Self { h1, h2, shared }
    }

    pub fn shared(&self) -> &[VarId] {
        &self.shared
    }

    pub fn is_polynomial(&self) -> bool {
        self.h2.is_zero()
    }

    /// Evaluate at a point given in shared-variable coordinates.
    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.shared.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.shared.len(),
                got: point.len(),
            });
        }
        let mut full = vec![0.0; self.h1.nvars()];
        for (&v, &x) in self.shared.iter().zip(point) {
            full[v.index()] = x;
        }
        let norm_sq: f64 = point.iter().map(|x| x * x).sum();
        Ok(self.h1.evaluate(&full)? + (norm_sq + 1.0).sqrt() * self.h2.evaluate(&full)?)
    }

    /// Evaluate at a full-dimensional point (non-shared coordinates ignored).
    pub fn eval_full(&self, point: &[f64]) -> Result<f64, PolyError> {
        let projected: Vec<f64> = self.shared.iter().map(|v| point[v.index()]).collect();
        self.eval(&projected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    fn xy_table() -> Arc<VarTable> {
        Arc::new(VarTable::from_names(["x0", "x1", "x2"]))
    }

    /// p = x1^3 + 2*x1*x2 + 3*x2 + 4 over (x0, x1, x2).
    fn sample_poly(t: &Arc<VarTable>) -> Polynomial {
        let x1 = t.lookup("x1").unwrap();
        let x2 = t.lookup("x2").unwrap();
        Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::var(3, x1, 3), int(1)),
                (
                    Monomial::from_exps(vec![0, 1, 1]),
                    int(2),
                ),
                (Monomial::var(3, x2, 1), int(3)),
                (Monomial::unit(3), int(4)),
            ],
        )
    }

    #[test]
    fn grlex_order() {
        // degree dominates, then lex on exponents (earlier variable wins)
        let m = |e: [u32; 3]| Monomial::from_exps(e.to_vec());
        assert!(m([2, 0, 0]) > m([1, 1, 0]));
        assert!(m([1, 1, 0]) > m([0, 2, 0]));
        assert!(m([0, 0, 2]) > m([1, 0, 0]));
        assert!(m([0, 0, 0]) < m([1, 0, 0]));
    }

    #[test]
    fn evaluate_examples() {
        let t = xy_table();
        let p = sample_poly(&t);
        assert_eq!(p.evaluate(&[0.0, 1.0, 1.0]).unwrap(), 10.0);
        let z = Polynomial::zero(t.clone());
        assert_eq!(z.evaluate(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            p.evaluate(&[1.0, 1.0]),
            Err(PolyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn motzkin_vanishes_at_one_one() {
        // x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1 at (1,1): 1 + 1 - 3 + 1 = 0
        let t = xy_table();
        let p = Polynomial::from_terms(
            t,
            [
                (Monomial::from_exps(vec![0, 4, 2]), int(1)),
                (Monomial::from_exps(vec![0, 2, 4]), int(1)),
                (Monomial::from_exps(vec![0, 2, 2]), int(-3)),
                (Monomial::unit(3), int(1)),
            ],
        );
        assert_eq!(p.evaluate(&[0.0, 1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn homogenize_golden() {
        let t = xy_table();
        let x0 = t.lookup("x0").unwrap();
        let p = sample_poly(&t);
        let h = p.homogenize(x0).unwrap();
        // x1^3 + 2*x0*x1*x2 + 3*x0^2*x2 + 4*x0^3
        let expected = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 3, 0]), int(1)),
                (Monomial::from_exps(vec![1, 1, 1]), int(2)),
                (Monomial::from_exps(vec![2, 0, 1]), int(3)),
                (Monomial::from_exps(vec![3, 0, 0]), int(4)),
            ],
        );
        assert_eq!(h, expected);
        assert!(h.is_homogeneous());
        assert_eq!(h.substitute_one(x0), p);
    }

    #[test]
    fn homogenize_constant_and_low_degree() {
        let t = xy_table();
        let x0 = t.lookup("x0").unwrap();
        let five = Polynomial::constant(t.clone(), int(5));
        assert_eq!(five.homogenize(x0).unwrap(), five);

        // x1^2 + x2 -> x1^2 + x0*x2
        let p = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 2, 0]), int(1)),
                (Monomial::from_exps(vec![0, 0, 1]), int(1)),
            ],
        );
        let expected = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 2, 0]), int(1)),
                (Monomial::from_exps(vec![1, 0, 1]), int(1)),
            ],
        );
        assert_eq!(p.homogenize(x0).unwrap(), expected);
    }

    #[test]
    fn homogenize_rejects_zero_and_occupied_var() {
        let t = xy_table();
        let x0 = t.lookup("x0").unwrap();
        let z = Polynomial::zero(t.clone());
        assert_eq!(z.homogenize(x0), Err(PolyError::ZeroPolynomial));
        let p = Polynomial::variable(t.clone(), x0);
        assert!(matches!(
            p.homogenize(x0),
            Err(PolyError::HomogenizingVarOccurs(_))
        ));
    }

    #[test]
    fn top_part_golden() {
        let t = xy_table();
        // x1^2 + 2*x1*x2 + 3*x2^2 + 4*x1 + 5*x2
        let p = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 2, 0]), int(1)),
                (Monomial::from_exps(vec![0, 1, 1]), int(2)),
                (Monomial::from_exps(vec![0, 0, 2]), int(3)),
                (Monomial::from_exps(vec![0, 1, 0]), int(4)),
                (Monomial::from_exps(vec![0, 0, 1]), int(5)),
            ],
        );
        let top = p.top_part().unwrap();
        let expected = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 2, 0]), int(1)),
                (Monomial::from_exps(vec![0, 1, 1]), int(2)),
                (Monomial::from_exps(vec![0, 0, 2]), int(3)),
            ],
        );
        assert_eq!(top, expected);
        // homogeneous input is a fixed point
        assert_eq!(top.top_part().unwrap(), top);
        // single top term
        let q = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::from_exps(vec![0, 1, 0]), int(4)),
                (Monomial::unit(3), int(5)),
            ],
        );
        assert_eq!(
            q.top_part().unwrap(),
            Polynomial::from_terms(t.clone(), [(Monomial::from_exps(vec![0, 1, 0]), int(4))])
        );
        assert_eq!(
            Polynomial::zero(t).top_part(),
            Err(PolyError::ZeroPolynomial)
        );
    }

    #[test]
    fn projective_substitute_examples() {
        let t = xy_table();
        let x0 = t.lookup("x0").unwrap();
        let x1 = t.lookup("x1").unwrap();
        let shared = [x1];

        let g = Polynomial::variable(t.clone(), x0);
        let s = g.projective_substitute(x0, &shared).unwrap();
        assert_eq!(s.h1, Polynomial::constant(t.clone(), int(1)));
        assert!(s.h2.is_zero());

        let g = Polynomial::variable(t.clone(), x1);
        let s = g.projective_substitute(x0, &shared).unwrap();
        assert_eq!(s.h1, Polynomial::variable(t.clone(), x1));
        assert!(s.h2.is_zero());

        // g = x0 + x1^2  ->  (x1^2, 1), i.e. x1^2 + sqrt(||x||^2 + 1)
        let g = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::var(3, x0, 1), int(1)),
                (Monomial::var(3, x1, 2), int(1)),
            ],
        );
        let s = g.projective_substitute(x0, &shared).unwrap();
        assert_eq!(
            s.h1,
            Polynomial::from_terms(t.clone(), [(Monomial::var(3, x1, 2), int(1))])
        );
        assert_eq!(s.h2, Polynomial::constant(t.clone(), int(1)));

        assert_eq!(
            Polynomial::zero(t).projective_substitute(x0, &shared),
            Err(PolyError::ZeroPolynomial)
        );
    }

    #[test]
    fn sqrtpair_eval_examples() {
        let t = xy_table();
        let x1 = t.lookup("x1").unwrap();
        let h1 = Polynomial::from_terms(t.clone(), [(Monomial::var(3, x1, 2), int(1))]);
        let h2 = Polynomial::constant(t.clone(), int(1));
        let s = SqrtPair::new(h1, h2, vec![x1]);
        assert_eq!(s.eval(&[0.0]).unwrap(), 1.0);

        let c = SqrtPair::new(
            Polynomial::constant(t.clone(), frac(7, 2)),
            Polynomial::zero(t.clone()),
            vec![x1],
        );
        assert_eq!(c.eval(&[123.0]).unwrap(), 3.5);

        let s2 = SqrtPair::new(
            Polynomial::zero(t.clone()),
            Polynomial::constant(t.clone(), int(1)),
            vec![x1],
        );
        assert!((s2.eval(&[1.0]).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            s2.eval(&[1.0, 2.0]),
            Err(PolyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn canonical_rendering() {
        let t = xy_table();
        let p = sample_poly(&t);
        assert_eq!(p.to_string(), "x1^3 + 2*x1*x2 + 3*x2 + 4");
        let h = p.homogenize(t.lookup("x0").unwrap()).unwrap();
        assert_eq!(h.to_string(), "4*x0^3 + 3*x0^2*x2 + 2*x0*x1*x2 + x1^3");
        assert_eq!(Polynomial::zero(t.clone()).to_string(), "0");
        let q = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::var(3, t.lookup("x1").unwrap(), 1), frac(-361, 400)),
                (Monomial::unit(3), int(1)),
            ],
        );
        assert_eq!(q.to_string(), "-361/400*x1 + 1");
    }
}
