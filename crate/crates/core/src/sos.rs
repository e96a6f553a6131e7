//! Construction of sum-of-squares programs and their compilation to
//! semidefinite feasibility problems.
//!
//! A program consists of one polynomial identity per clause of each side:
//!
//! ```text
//!   +l(..) - margin + eps = slot_0 + sum_i slot_i * gen_i     (phi clauses)
//!   -l(..) - margin + eps = slot_0 + sum_i slot_i * gen_i     (psi clauses)
//! ```
//!
//! where `l` is a coefficient template for the interpolant (homogenized with
//! `x0`, and paired with the fresh variable `w` in semialgebraic mode), the
//! generators come from [`clause_extension`], SOS slots carry Gram matrices
//! over a monomial basis and free slots carry unconstrained coefficient
//! vectors. The relaxation order `s` bounds every product degree by `2s`.
//! Compilation matches coefficients monomial by monomial in exact rational
//! arithmetic; floats appear only in the emitted [`SdpProblem`].
//!
//! Margin: the plain identities admit the all-zero solution, so the builder
//! subtracts `margin * x0^deg(l)` from the left side (margin 1 by default at
//! the CLI). On the unit sphere with `x0 > 0` this is the same as asking for
//! `l >= margin` on one side and `l <= -margin` on the other, and it vanishes
//! on the `x0 = 0` directions at infinity.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{clause_extension, ExtensionMode, MultKind, ProblemInstance};
use crate::poly::{Monomial, Polynomial, VarId, VarTable};
use crate::rat::{self, Rat};
use crate::sdp::{BlockEntries, Equality, SdpProblem};

/// Which identities to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Homogenized identities for a polynomial interpolant `h(x)`.
    Polynomial,
    /// Homogenized identities with `w^2 = x0^2 + ||x||^2` for an interpolant
    /// `h1(x) + sqrt(||x||^2 + 1) * h2(x)`.
    Semialgebraic,
    /// Baseline identities without homogenization; sound only when the
    /// input sets are bounded.
    Archimedean,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Polynomial => write!(f, "polynomial"),
            Mode::Semialgebraic => write!(f, "semialgebraic"),
            Mode::Archimedean => write!(f, "archimedean"),
        }
    }
}

/// Errors from program construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("relaxation order too small: 2s = {two_s} < {needed} required by the template")]
    OrderTooSmall { two_s: u32, needed: u32 },
    #[error("generator '{generator}' has degree {degree} > 2s = {two_s}")]
    DegreeBound {
        generator: String,
        degree: u32,
        two_s: u32,
    },
    #[error("left-hand side '{lhs}' has degree {degree} > 2s = {two_s}")]
    LhsDegree {
        lhs: String,
        degree: u32,
        two_s: u32,
    },
}

/// Which half of a semialgebraic template a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplatePart {
    H1,
    H2,
}

/// One unknown template coefficient `c_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateCoeff {
    pub part: TemplatePart,
    /// Power product over the shared variables.
    pub alpha: Monomial,
}

/// The interpolant template `sum c_alpha x^alpha` (doubled in semialgebraic
/// mode: separate coefficient sets for `h1` and `h2`, same degree).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Template {
    pub degree: u32,
    pub coeffs: Vec<TemplateCoeff>,
}

/// One multiplier: a Gram matrix (SOS) or an unconstrained coefficient
/// vector (free) over `basis`, attached to `generator`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSlot {
    pub kind: MultKind,
    pub generator: Polynomial,
    pub basis: Vec<Monomial>,
}

/// Which side of the problem an identity certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Phi,
    Psi,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Phi => 1,
            Side::Psi => -1,
        }
    }
}

/// One polynomial identity
/// `sign * template + lhs_known = sum_j slot_j * gen_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosIdentity {
    pub side: Side,
    pub clause_index: usize,
    /// Variables the identity ranges over (for the slot bases).
    pub vars: Vec<VarId>,
    /// Template-independent part of the left side (margin, epsilon, or a
    /// fixed polynomial in representability programs).
    pub lhs_known: Polynomial,
    pub slots: Vec<MultiplierSlot>,
}

/// A full program: template plus one identity per clause.
#[derive(Debug, Clone, PartialEq)]
pub struct SosProgram {
    pub table: Arc<VarTable>,
    pub shared: Vec<VarId>,
    pub mode: Mode,
    pub degree: u32,
    pub order: u32,
    pub margin: Rat,
    pub epsilon: Rat,
    pub x0: Option<VarId>,
    pub w: Option<VarId>,
    pub template: Template,
    pub identities: Vec<SosIdentity>,
}

/// Deterministic variable layout of the compiled SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpLayout {
    /// Free scalars `0..template_len` are the template coefficients.
    pub template_len: usize,
    pub nfree: usize,
    /// `(identity, slot)` per PSD block, in block order.
    pub blocks: Vec<(usize, usize)>,
    pub block_dims: Vec<usize>,
    /// `(identity, slot, offset)` per free slot; the slot's coefficients
    /// occupy `offset..offset + basis_len`.
    pub free_slots: Vec<(usize, usize, usize)>,
}

impl SosProgram {
    /// The monomial a template coefficient multiplies inside an identity
    /// (before the side sign).
    pub fn template_monomial(&self, coeff: &TemplateCoeff) -> Monomial {
        let n = self.table.len();
        let a = coeff.alpha.degree();
        match self.mode {
            Mode::Archimedean => coeff.alpha.clone(),
            Mode::Polynomial => {
                let x0 = self.x0.expect("homogenized mode has x0");
                coeff.alpha.mul(&Monomial::var(n, x0, self.degree - a))
            }
            Mode::Semialgebraic => {
                let x0 = self.x0.expect("homogenized mode has x0");
                match coeff.part {
                    TemplatePart::H1 => coeff
                        .alpha
                        .mul(&Monomial::var(n, x0, self.degree + 1 - a)),
                    TemplatePart::H2 => {
                        let w = self.w.expect("semialgebraic mode has w");
                        coeff
                            .alpha
                            .mul(&Monomial::var(n, x0, self.degree - a))
                            .mul(&Monomial::var(n, w, 1))
                    }
                }
            }
        }
    }

    /// Deterministic block and free-scalar layout.
    pub fn layout(&self) -> SdpLayout {
        let template_len = self.template.coeffs.len();
        let mut blocks = Vec::new();
        let mut block_dims = Vec::new();
        let mut free_slots = Vec::new();
        let mut offset = template_len;
        for (k, id) in self.identities.iter().enumerate() {
            for (j, slot) in id.slots.iter().enumerate() {
                match slot.kind {
                    MultKind::Sos => {
                        blocks.push((k, j));
                        block_dims.push(slot.basis.len());
                    }
                    MultKind::Free => {
                        free_slots.push((k, j, offset));
                        offset += slot.basis.len();
                    }
                }
            }
        }
        SdpLayout {
            template_len,
            nfree: offset,
            blocks,
            block_dims,
            free_slots,
        }
    }
}

impl fmt::Display for SosProgram {
    /// Human-readable dump: one identity per line, canonical rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sos program: mode={} degree={} order={} margin={} epsilon={} unknowns={}",
            self.mode,
            self.degree,
            self.order,
            rat::render(&self.margin),
            rat::render(&self.epsilon),
            self.template.coeffs.len()
        )?;
        for (k, id) in self.identities.iter().enumerate() {
            let sign = if id.side.sign() > 0 { "+" } else { "-" };
            let lhs = if self.template.coeffs.is_empty() {
                format!("{}", id.lhs_known)
            } else {
                format!("{sign}l + {}", id.lhs_known)
            };
            let rhs = id
                .slots
                .iter()
                .map(|slot| {
                    let kind = match slot.kind {
                        MultKind::Sos => "sos",
                        MultKind::Free => "free",
                    };
                    let bd = slot.basis.last().map(Monomial::degree).unwrap_or(0);
                    format!("[{kind} deg<={bd}]*({})", slot.generator)
                })
                .collect::<Vec<_>>()
                .join(" + ");
            writeln!(f, "  identity {k} ({:?} clause {}): {lhs} = {rhs}", id.side, id.clause_index)?;
        }
        Ok(())
    }
}

/// All monomials over `vars` of total degree at most `maxdeg`, in ascending
/// graded-lex order. Length is `C(|vars| + maxdeg, maxdeg)`.
pub fn monomial_basis(vars: &[VarId], nvars: usize, maxdeg: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::unit(nvars)];
    let mut current = vec![Monomial::unit(nvars)];
    for _ in 0..maxdeg {
        let mut next = Vec::new();
        for m in &current {
            // extend by variables at or after the last used one to
            // enumerate each power product exactly once
            let last_used = vars
                .iter()
                .rposition(|&v| m.exp(v) > 0)
                .unwrap_or(0);
            for (vi, &v) in vars.iter().enumerate() {
                if vi < last_used && m.degree() > 0 {
                    continue;
                }
                next.push(m.mul(&Monomial::var(nvars, v, 1)));
            }
        }
        out.extend(next.iter().cloned());
        current = next;
    }
    out.sort();
    out.dedup();
    out
}

fn sos_basis_degree(two_s: u32, gen_degree: u32) -> Option<u32> {
    two_s.checked_sub(gen_degree).map(|r| r / 2)
}

fn free_basis_degree(two_s: u32, gen_degree: u32) -> Option<u32> {
    two_s.checked_sub(gen_degree)
}

fn slots_for_generators(
    generators: Vec<(Polynomial, MultKind)>,
    vars: &[VarId],
    nvars: usize,
    s: u32,
    truncate_overdegree: bool,
) -> Result<Vec<MultiplierSlot>, BuildError> {
    let two_s = 2 * s;
    let mut slots = Vec::with_capacity(generators.len() + 1);
    let table = generators
        .first()
        .map(|(g, _)| g.table().clone())
        .expect("at least one generator");
    // slot 0: plain SOS term with generator 1
    slots.push(MultiplierSlot {
        kind: MultKind::Sos,
        generator: Polynomial::constant(table, rat::one()),
        basis: monomial_basis(vars, nvars, s),
    });
    for (gen, kind) in generators {
        let gd = gen.degree().expect("nonzero generator");
        let basis_deg = match kind {
            MultKind::Sos => sos_basis_degree(two_s, gd),
            MultKind::Free => free_basis_degree(two_s, gd),
        };
        let basis_deg = match basis_deg {
            Some(d) => d,
            None if truncate_overdegree => continue,
            None => {
                return Err(BuildError::DegreeBound {
                    generator: gen.to_string(),
                    degree: gd,
                    two_s,
                })
            }
        };
        slots.push(MultiplierSlot {
            kind,
            generator: gen,
            basis: monomial_basis(vars, nvars, basis_deg),
        });
    }
    Ok(slots)
}

/// Build the SOS program for an instance.
///
/// `d` is the template degree and `s` the relaxation order (`2s >= d`; in
/// semialgebraic mode `2s >= d + 1` because the lifted template carries an
/// extra power). Polynomial and semialgebraic modes homogenize every atom
/// and extend clauses with the sphere generators; archimedean mode keeps
/// the original atoms and fixes the margin at 1. Atoms that are identically
/// zero contribute nothing and are skipped. In semialgebraic mode a
/// generator whose degree exceeds `2s` is given no multiplier (its slot is
/// dropped, which never affects soundness); the other modes reject such
/// generators.
pub fn build_program(
    instance: &ProblemInstance,
    d: u32,
    s: u32,
    mode: Mode,
    margin: Rat,
    epsilon: Rat,
) -> Result<SosProgram, BuildError> {
    let two_s = 2 * s;
    let template_degree = match mode {
        Mode::Semialgebraic => d + 1,
        _ => d,
    };
    if two_s < template_degree {
        return Err(BuildError::OrderTooSmall {
            two_s,
            needed: template_degree,
        });
    }

    // extend the variable table with x0 (and w)
    let mut vt = (*instance.table).clone();
    let (x0, w) = match mode {
        Mode::Archimedean => (None, None),
        Mode::Polynomial => (Some(vt.add(fresh_name(&vt, "x0"))), None),
        Mode::Semialgebraic => {
            let x0 = vt.add(fresh_name(&vt, "x0"));
            let w = vt.add(fresh_name(&vt, "w"));
            (Some(x0), Some(w))
        }
    };
    let table = Arc::new(vt);
    let nvars = table.len();

    let template = build_template(instance, &table, d, mode);

    let mut identities = Vec::new();
    let sides = [
        (Side::Phi, &instance.phi, &instance.phi_private),
        (Side::Psi, &instance.psi, &instance.psi_private),
    ];
    for (side, formula, private) in sides {
        for (clause_index, clause) in formula.clauses.iter().enumerate() {
            let atoms: Vec<Polynomial> = clause
                .atoms
                .iter()
                .filter(|a| !a.poly.is_zero())
                .map(|a| a.poly.extended(table.clone()))
                .collect();
            let (vars, generators, lhs_known) = match mode {
                Mode::Archimedean => {
                    let vars: Vec<VarId> =
                        instance.shared.iter().chain(private).copied().collect();
                    let gens: Vec<(Polynomial, MultKind)> =
                        atoms.into_iter().map(|p| (p, MultKind::Sos)).collect();
                    // margin fixed at 1 for the bounded-domain baseline
                    let lhs = Polynomial::constant(table.clone(), epsilon.clone() - rat::one());
                    (vars, gens, lhs)
                }
                Mode::Polynomial | Mode::Semialgebraic => {
                    let x0 = x0.unwrap();
                    let homogenized: Vec<Polynomial> = atoms
                        .iter()
                        .map(|p| p.homogenize(x0).expect("nonzero atom"))
                        .collect();
                    let hclause = crate::formula::Clause::new(
                        homogenized
                            .into_iter()
                            .map(crate::formula::Atom::new)
                            .collect::<Vec<_>>(),
                    );
                    let ext_mode = if mode == Mode::Semialgebraic {
                        ExtensionMode::Semialgebraic
                    } else {
                        ExtensionMode::Polynomial
                    };
                    let gens =
                        clause_extension(&hclause, ext_mode, x0, w, &instance.shared, private);
                    let mut vars: Vec<VarId> = vec![x0];
                    vars.extend(instance.shared.iter().copied());
                    vars.extend(private.iter().copied());
                    if let Some(w) = w {
                        vars.push(w);
                    }
                    vars.sort_unstable();
                    // lhs = -margin * x0^deg(l) + epsilon
                    let mut lhs = Polynomial::constant(table.clone(), epsilon.clone());
                    lhs.add_term(
                        Monomial::var(nvars, x0, template_degree),
                        -margin.clone(),
                    );
                    (vars, gens, lhs)
                }
            };
            // empty-atom clauses still get the auxiliary generators in
            // homogenized modes; in archimedean mode they reduce to slot 0
            let slots = if generators.is_empty() {
                vec![MultiplierSlot {
                    kind: MultKind::Sos,
                    generator: Polynomial::constant(table.clone(), rat::one()),
                    basis: monomial_basis(&vars, nvars, s),
                }]
            } else {
                slots_for_generators(
                    generators,
                    &vars,
                    nvars,
                    s,
                    mode == Mode::Semialgebraic,
                )?
            };
            identities.push(SosIdentity {
                side,
                clause_index,
                vars,
                lhs_known,
                slots,
            });
        }
    }

    Ok(SosProgram {
        table,
        shared: instance.shared.clone(),
        mode,
        degree: d,
        order: s,
        margin,
        epsilon,
        x0,
        w,
        template,
        identities,
    })
}

fn fresh_name(vt: &VarTable, base: &str) -> String {
    if vt.lookup(base).is_none() {
        return base.to_string();
    }
    let mut k = 0;
    loop {
        let cand = format!("{base}_{k}");
        if vt.lookup(&cand).is_none() {
            return cand;
        }
        k += 1;
    }
}

fn build_template(
    instance: &ProblemInstance,
    table: &Arc<VarTable>,
    d: u32,
    mode: Mode,
) -> Template {
    let nvars = table.len();
    let alphas = monomial_basis(&instance.shared, nvars, d);
    let mut coeffs: Vec<TemplateCoeff> = alphas
        .iter()
        .map(|a| TemplateCoeff {
            part: TemplatePart::H1,
            alpha: a.clone(),
        })
        .collect();
    if mode == Mode::Semialgebraic {
        coeffs.extend(alphas.into_iter().map(|a| TemplateCoeff {
            part: TemplatePart::H2,
            alpha: a,
        }));
    }
    Template { degree: d, coeffs }
}

/// Build a representability program with a fixed left-hand side: find
/// multipliers with `lhs = slot_0 + sum_i slot_i * gen_i`. Used to probe
/// whether a given polynomial lies in the module generated by `generators`.
pub fn build_sos_feasibility(
    lhs: Polynomial,
    generators: Vec<(Polynomial, MultKind)>,
    vars: Vec<VarId>,
    s: u32,
) -> Result<SosProgram, BuildError> {
    let two_s = 2 * s;
    let table = lhs.table().clone();
    let nvars = table.len();
    if let Some(d) = lhs.degree() {
        if d > two_s {
            return Err(BuildError::LhsDegree {
                lhs: lhs.to_string(),
                degree: d,
                two_s,
            });
        }
    }
    let slots = if generators.is_empty() {
        vec![MultiplierSlot {
            kind: MultKind::Sos,
            generator: Polynomial::constant(table.clone(), rat::one()),
            basis: monomial_basis(&vars, nvars, s),
        }]
    } else {
        slots_for_generators(generators, &vars, nvars, s, false)?
    };
    Ok(SosProgram {
        table: table.clone(),
        shared: vars.clone(),
        mode: Mode::Polynomial,
        degree: 0,
        order: s,
        margin: rat::zero(),
        epsilon: rat::zero(),
        x0: None,
        w: None,
        template: Template::default(),
        identities: vec![SosIdentity {
            side: Side::Phi,
            clause_index: 0,
            vars,
            lhs_known: lhs,
            slots,
        }],
    })
}

/// Exact-rational image of one compiled equality.
#[derive(Debug, Clone)]
pub struct ExactRow {
    pub identity: usize,
    pub monomial: Monomial,
    /// `(block, lower-triangular entries)` with exact coefficients.
    pub blocks: Vec<(usize, Vec<(usize, usize, Rat)>)>,
    pub free: Vec<(usize, Rat)>,
    pub rhs: Rat,
}

/// Exactly compiled program: rows in (identity, graded-lex) order.
#[derive(Debug, Clone)]
pub struct ExactSdp {
    pub layout: SdpLayout,
    pub rows: Vec<ExactRow>,
}

/// Compile by exact coefficient matching: one equality per monomial
/// appearing in an identity (on either side).
pub fn compile_exact(prog: &SosProgram) -> ExactSdp {
    use std::collections::BTreeMap;

    let layout = prog.layout();
    let mut rows = Vec::new();
    for (k, id) in prog.identities.iter().enumerate() {
        #[derive(Default)]
        struct Accum {
            blocks: BTreeMap<usize, Vec<(usize, usize, Rat)>>,
            free: BTreeMap<usize, Rat>,
            rhs: Rat,
        }
        let mut map: BTreeMap<Monomial, Accum> = BTreeMap::new();

        // right-hand side slots
        let mut block_iter = layout.blocks.iter().enumerate();
        let mut free_iter = layout.free_slots.iter();
        for (j, slot) in id.slots.iter().enumerate() {
            match slot.kind {
                MultKind::Sos => {
                    let (block_idx, _) = block_iter
                        .find(|(_, &(ki, ji))| ki == k && ji == j)
                        .expect("layout covers slot");
                    let n = slot.basis.len();
                    for p in 0..n {
                        for q in 0..=p {
                            let base = slot.basis[p].mul(&slot.basis[q]);
                            for (gm, gc) in slot.generator.terms() {
                                let target = base.mul(gm);
                                map.entry(target)
                                    .or_default()
                                    .blocks
                                    .entry(block_idx)
                                    .or_default()
                                    .push((p, q, gc.clone()));
                            }
                        }
                    }
                }
                MultKind::Free => {
                    let &(_, _, offset) = free_iter
                        .find(|&&(ki, ji, _)| ki == k && ji == j)
                        .expect("layout covers slot");
                    for (t, beta) in slot.basis.iter().enumerate() {
                        for (gm, gc) in slot.generator.terms() {
                            let target = beta.mul(gm);
                            let entry = map
                                .entry(target)
                                .or_default()
                                .free
                                .entry(offset + t)
                                .or_insert_with(rat::zero);
                            *entry += gc.clone();
                        }
                    }
                }
            }
        }

        // left-hand side: sign * template + lhs_known
        let sign = rat::int(id.side.sign() as i64);
        for (j, coeff) in prog.template.coeffs.iter().enumerate() {
            let target = prog.template_monomial(coeff);
            let entry = map
                .entry(target)
                .or_default()
                .free
                .entry(j)
                .or_insert_with(rat::zero);
            // moved to the right-hand side of the equality
            *entry -= sign.clone();
        }
        for (m, c) in id.lhs_known.terms() {
            map.entry(m.clone()).or_default().rhs += c.clone();
        }

        for (monomial, acc) in map {
            rows.push(ExactRow {
                identity: k,
                monomial,
                blocks: acc.blocks.into_iter().collect(),
                free: acc
                    .free
                    .into_iter()
                    .filter(|(_, c)| *c != rat::zero())
                    .collect(),
                rhs: acc.rhs,
            });
        }
    }
    ExactSdp { layout, rows }
}

/// Compile to the floating-point SDP solved by the embedded engine.
pub fn compile_to_sdp(prog: &SosProgram) -> SdpProblem {
    let exact = compile_exact(prog);
    let mut equalities = Vec::with_capacity(exact.rows.len());
    for row in &exact.rows {
        equalities.push(Equality {
            blocks: row
                .blocks
                .iter()
                .map(|(b, entries)| BlockEntries {
                    block: *b,
                    entries: entries
                        .iter()
                        .map(|(p, q, c)| (*p, *q, rat::to_f64(c)))
                        .collect(),
                })
                .collect(),
            free: row
                .free
                .iter()
                .map(|(j, c)| (*j, rat::to_f64(c)))
                .collect(),
            rhs: rat::to_f64(&row.rhs),
        });
    }
    SdpProblem {
        block_dims: exact.layout.block_dims.clone(),
        nfree: exact.layout.nfree,
        equalities,
        objective: None,
    }
}

/// Re-expand one identity with a concrete assignment and return
/// `RHS - LHS` as an exact polynomial. `grams` are indexed by layout block
/// (dense row-major), `free` by layout free index.
pub fn identity_mismatch(
    prog: &SosProgram,
    identity: usize,
    grams: &[Vec<Rat>],
    free: &[Rat],
) -> Polynomial {
    let (lhs, rhs) = identity_sides(prog, identity, grams, free, &rat::one());
    rhs.sub(&lhs)
}

/// Both sides of an identity under a concrete assignment, with the
/// template-independent left part scaled by `lhs_scale` (certificates store
/// a rescaled copy of the identity).
pub fn identity_sides(
    prog: &SosProgram,
    identity: usize,
    grams: &[Vec<Rat>],
    free: &[Rat],
    lhs_scale: &Rat,
) -> (Polynomial, Polynomial) {
    let layout = prog.layout();
    let id = &prog.identities[identity];
    let table = prog.table.clone();
    let mut rhs = Polynomial::zero(table.clone());
    let mut block_iter = layout.blocks.iter().enumerate();
    let mut free_iter = layout.free_slots.iter();
    for (j, slot) in id.slots.iter().enumerate() {
        match slot.kind {
            MultKind::Sos => {
                let (block_idx, _) = block_iter
                    .find(|(_, &(ki, ji))| ki == identity && ji == j)
                    .expect("layout covers slot");
                let n = slot.basis.len();
                let q = &grams[block_idx];
                let mut sigma = Polynomial::zero(table.clone());
                for p in 0..n {
                    for r in 0..=p {
                        let c = &q[p * n + r];
                        if *c == rat::zero() {
                            continue;
                        }
                        let factor = if p == r {
                            c.clone()
                        } else {
                            c.clone() * rat::int(2)
                        };
                        sigma.add_term(slot.basis[p].mul(&slot.basis[r]), factor);
                    }
                }
                rhs = rhs.add(&sigma.mul(&slot.generator));
            }
            MultKind::Free => {
                let &(_, _, offset) = free_iter
                    .find(|&&(ki, ji, _)| ki == identity && ji == j)
                    .expect("layout covers slot");
                let mut v = Polynomial::zero(table.clone());
                for (t, beta) in slot.basis.iter().enumerate() {
                    v.add_term(beta.clone(), free[offset + t].clone());
                }
                rhs = rhs.add(&v.mul(&slot.generator));
            }
        }
    }
    let mut lhs = id.lhs_known.scale(lhs_scale);
    let sign = rat::int(id.side.sign() as i64);
    for (j, coeff) in prog.template.coeffs.iter().enumerate() {
        lhs.add_term(prog.template_monomial(coeff), sign.clone() * free[j].clone());
    }
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_problem;
    use crate::rat::{frac, int};
    use num_integer::binomial;
    use num_traits::ToPrimitive;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn basis_count(nvars: u64, deg: u64) -> usize {
        binomial(nvars + deg, deg).to_usize().unwrap()
    }

    #[test]
    fn monomial_basis_examples() {
        let t = Arc::new(VarTable::from_names(["x"]));
        let x = t.lookup("x").unwrap();
        let b = monomial_basis(&[x], 1, 2);
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], Monomial::unit(1));
        assert_eq!(b[1], Monomial::var(1, x, 1));
        assert_eq!(b[2], Monomial::var(1, x, 2));

        let t2 = Arc::new(VarTable::from_names(["x1", "x2"]));
        let ids: Vec<VarId> = t2.ids().collect();
        let b = monomial_basis(&ids, 2, 1);
        assert_eq!(b.len(), 3);

        let t3 = Arc::new(VarTable::from_names(["a", "b", "c"]));
        let ids: Vec<VarId> = t3.ids().collect();
        assert_eq!(monomial_basis(&ids, 3, 4).len(), 35);
        assert_eq!(basis_count(3, 4), 35);
    }

    #[test]
    fn monomial_basis_counts_match_binomial_oracle() {
        for nvars in 1..=4usize {
            let names: Vec<String> = (0..nvars).map(|i| format!("v{i}")).collect();
            let t = Arc::new(VarTable::from_names(names));
            let ids: Vec<VarId> = t.ids().collect();
            for deg in 0..=5u32 {
                let b = monomial_basis(&ids, nvars, deg);
                assert_eq!(b.len(), basis_count(nvars as u64, deg as u64));
                // ascending graded-lex and unique
                for w in b.windows(2) {
                    assert!(w[0] < w[1]);
                }
            }
        }
    }

    fn motzkin_instance() -> ProblemInstance {
        parse_problem("shared x1 x2;\nphi := 1 >= 0;\npsi := -1 >= 0;\n").unwrap()
    }

    #[test]
    fn motzkin_template_program_generators() {
        let inst = motzkin_instance();
        let prog = build_program(
            &inst,
            6,
            3,
            Mode::Polynomial,
            rat::zero(),
            rat::zero(),
        )
        .unwrap();
        assert_eq!(prog.identities.len(), 2);
        let phi = &prog.identities[0];
        // slot 0 plus three generators: the atom 1, x0, and the sphere
        assert_eq!(phi.slots.len(), 4);
        let gens: Vec<String> = phi
            .slots
            .iter()
            .skip(1)
            .map(|s| s.generator.to_string())
            .collect();
        assert_eq!(gens[0], "1");
        assert_eq!(gens[1], "x0");
        assert_eq!(gens[2], "x1^2 + x2^2 + x0^2 - 1");
        let kinds: Vec<MultKind> = phi.slots.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![MultKind::Sos, MultKind::Sos, MultKind::Sos, MultKind::Free]
        );
        // bases: sigma_0 degree 3 over three variables, x0 slot floor(5/2)=2,
        // sphere slot 2s - 2 = 4
        assert_eq!(phi.slots[0].basis.len(), basis_count(3, 3));
        assert_eq!(phi.slots[2].basis.len(), basis_count(3, 2));
        assert_eq!(phi.slots[3].basis.len(), basis_count(3, 4));
        // template: 28 coefficients of degree <= 6 in two shared variables
        assert_eq!(prog.template.coeffs.len(), basis_count(2, 6));
    }

    #[test]
    fn ovals_program_has_six_identities() {
        let inst = parse_problem(crate::corpus::OVALS).unwrap();
        let prog =
            build_program(&inst, 7, 4, Mode::Polynomial, rat::one(), rat::zero()).unwrap();
        assert_eq!(prog.identities.len(), 6);
        assert_eq!(
            prog.identities
                .iter()
                .filter(|id| id.side == Side::Phi)
                .count(),
            3
        );
    }

    #[test]
    fn degree_bound_violation_is_an_error() {
        let inst =
            parse_problem("shared x;\nphi := 1 - x^4 >= 0;\npsi := x - 9 >= 0;\n").unwrap();
        let err = build_program(&inst, 2, 1, Mode::Polynomial, rat::one(), rat::zero())
            .unwrap_err();
        match err {
            BuildError::DegreeBound { degree, two_s, .. } => {
                assert_eq!(degree, 4);
                assert_eq!(two_s, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // semialgebraic mode drops the over-degree slot instead
        let prog =
            build_program(&inst, 1, 1, Mode::Semialgebraic, rat::one(), rat::zero()).unwrap();
        let phi = &prog.identities[0];
        assert!(phi
            .slots
            .iter()
            .all(|s| s.generator.degree().unwrap_or(0) <= 2));
    }

    #[test]
    fn semialgebraic_template_doubles() {
        let inst = parse_problem("shared x;\nphi := x >= 1;\npsi := -x >= 1;\n").unwrap();
        let prog =
            build_program(&inst, 3, 2, Mode::Semialgebraic, rat::one(), rat::zero()).unwrap();
        assert_eq!(prog.template.coeffs.len(), 2 * basis_count(1, 3));
        // h1 coefficients map to x0^(d+1-|a|) x^a, h2 to w x0^(d-|a|) x^a
        let c0 = &prog.template.coeffs[0];
        assert_eq!(c0.part, TemplatePart::H1);
        let m = prog.template_monomial(c0);
        assert_eq!(m.exp(prog.x0.unwrap()), 4);
        let h2_last = prog.template.coeffs.last().unwrap();
        assert_eq!(h2_last.part, TemplatePart::H2);
        let m = prog.template_monomial(h2_last);
        assert_eq!(m.exp(prog.w.unwrap()), 1);
        assert_eq!(m.exp(prog.x0.unwrap()), 0);
    }

    #[test]
    fn compile_counts_for_plain_sos_checks() {
        // x^2 + 1 = sigma_0 with sigma_0 of degree <= 2
        let t = Arc::new(VarTable::from_names(["x"]));
        let x = t.lookup("x").unwrap();
        let p = Polynomial::from_terms(
            t.clone(),
            [
                (Monomial::var(1, x, 2), int(1)),
                (Monomial::unit(1), int(1)),
            ],
        );
        let prog = build_sos_feasibility(p, vec![], vec![x], 1).unwrap();
        let sdp = compile_to_sdp(&prog);
        assert_eq!(sdp.block_dims, vec![2]);
        assert_eq!(sdp.nfree, 0);
        assert_eq!(sdp.equalities.len(), 3);

        // direct Motzkin check at s = 3: block C(5,2) = 10, C(8,2) = 28 rows
        let t = Arc::new(VarTable::from_names(["x1", "x2"]));
        let m = crate::corpus::motzkin_plus(&t, int(2));
        let ids: Vec<VarId> = t.ids().collect();
        let prog = build_sos_feasibility(m, vec![], ids, 3).unwrap();
        let sdp = compile_to_sdp(&prog);
        assert_eq!(sdp.block_dims, vec![10]);
        assert_eq!(sdp.equalities.len(), 28);
    }

    #[test]
    fn torus_compile_counts() {
        let inst = parse_problem(crate::corpus::TORUS).unwrap();
        let prog =
            build_program(&inst, 2, 2, Mode::Polynomial, rat::one(), rat::zero()).unwrap();
        let sdp = compile_to_sdp(&prog);
        // phi identity over (x0,x,y,z): C(8,4) = 70 monomials; psi identity
        // over (x0,x,y,z,r,R): C(10,4) = 210
        assert_eq!(sdp.equalities.len(), 70 + 210);
        for eq in &sdp.equalities {
            assert!(!eq.blocks.is_empty());
        }
    }

    #[test]
    fn template_rows_sit_in_degree_d_monomials() {
        let inst = parse_problem(crate::corpus::CURVES).unwrap();
        let prog =
            build_program(&inst, 4, 3, Mode::Polynomial, rat::one(), rat::zero()).unwrap();
        let exact = compile_exact(&prog);
        for row in &exact.rows {
            if row
                .free
                .iter()
                .any(|(j, _)| *j < exact.layout.template_len)
            {
                assert_eq!(row.monomial.degree(), 4);
            }
        }
    }

    #[test]
    fn reconstruction_identity_for_random_assignments() {
        let inst = parse_problem(crate::corpus::TORUS).unwrap();
        let prog =
            build_program(&inst, 2, 2, Mode::Polynomial, rat::one(), frac(1, 7)).unwrap();
        let exact = compile_exact(&prog);
        let layout = &exact.layout;
        let mut rng = StdRng::seed_from_u64(42);
        let rand_rat = |rng: &mut StdRng| frac(rng.gen_range(-12i64..=12), rng.gen_range(1i64..=6));
        // random symmetric rational Grams and free scalars
        let grams: Vec<Vec<Rat>> = layout
            .block_dims
            .iter()
            .map(|&n| {
                let mut g = vec![rat::zero(); n * n];
                for p in 0..n {
                    for q in 0..=p {
                        let v = rand_rat(&mut rng);
                        g[p * n + q] = v.clone();
                        g[q * n + p] = v;
                    }
                }
                g
            })
            .collect();
        let free: Vec<Rat> = (0..layout.nfree).map(|_| rand_rat(&mut rng)).collect();

        for k in 0..prog.identities.len() {
            let mismatch = identity_mismatch(&prog, k, &grams, &free);
            // predicted residual per row: <A, X> + c'f - rhs, exactly
            let rows: Vec<&ExactRow> =
                exact.rows.iter().filter(|r| r.identity == k).collect();
            let mut predicted: std::collections::BTreeMap<Monomial, Rat> = Default::default();
            for row in &rows {
                let mut acc = -row.rhs.clone();
                for (b, entries) in &row.blocks {
                    let n = layout.block_dims[*b];
                    for (p, q, c) in entries {
                        let factor = if p == q { rat::one() } else { rat::int(2) };
                        acc += c.clone() * factor * grams[*b][p * n + q].clone();
                    }
                }
                for (j, c) in &row.free {
                    acc += c.clone() * free[*j].clone();
                }
                predicted.insert(row.monomial.clone(), acc);
            }
            // the re-expansion must agree coefficient for coefficient and
            // produce no monomials outside the compiled rows
            for (m, c) in mismatch.terms() {
                let want = predicted
                    .get(m)
                    .unwrap_or_else(|| panic!("unexpected monomial {m:?}"));
                assert_eq!(c, want);
            }
            for (m, c) in &predicted {
                if *c != rat::zero() {
                    assert_eq!(&mismatch.coeff(m), c);
                }
            }
        }
    }

    #[test]
    fn compilation_is_deterministic() {
        let inst = parse_problem(crate::corpus::CURVES).unwrap();
        let build = || {
            let prog =
                build_program(&inst, 3, 2, Mode::Semialgebraic, rat::one(), rat::zero())
                    .unwrap();
            serde_json::to_string(&compile_to_sdp(&prog)).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn order_too_small_for_template() {
        let inst = parse_problem("shared x;\nphi := x >= 1;\npsi := -x >= 1;\n").unwrap();
        assert!(matches!(
            build_program(&inst, 4, 1, Mode::Polynomial, rat::one(), rat::zero()),
            Err(BuildError::OrderTooSmall { .. })
        ));
        // semialgebraic template needs 2s >= d + 1
        assert!(matches!(
            build_program(&inst, 4, 2, Mode::Semialgebraic, rat::one(), rat::zero()),
            Err(BuildError::OrderTooSmall { .. })
        ));
    }

    #[test]
    fn debug_dump_mentions_generators() {
        let inst = motzkin_instance();
        let prog =
            build_program(&inst, 6, 3, Mode::Polynomial, rat::zero(), rat::zero()).unwrap();
        let dump = prog.to_string();
        assert!(dump.contains("x0"));
        assert!(dump.contains("sos"));
        assert!(dump.contains("free"));
    }
}
