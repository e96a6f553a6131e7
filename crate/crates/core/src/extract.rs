//! Recover an interpolant and a checkable certificate from a feasible
//! solution.
//!
//! The template coefficients are read off the solution's free scalars and
//! rescaled so the largest absolute coefficient is 1; the Gram matrices and
//! free multiplier vectors are rescaled by the same factor so the rescaled
//! identity still holds and can be re-verified later. The certificate
//! residual re-expands every identity in exact arithmetic (every finite
//! double is a dyadic rational) and reports the worst coefficient mismatch
//! relative to the identity's own magnitude.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::MultKind;
use crate::poly::{Polynomial, SqrtPair};
use crate::rat::{self, Rat};
use crate::sdp::{SdpSolution, SdpStatus};
use crate::sos::{identity_sides, Mode, SosProgram};

/// Threshold below which an unscaled interpolant counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("solution status is {0:?}, not feasible")]
    NotFeasible(SdpStatus),
    #[error("degenerate (near-zero) interpolant; increase margin")]
    Degenerate,
    #[error("certificate shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed certificate: {0}")]
    Malformed(String),
}

/// Shape of an extracted interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpolantKind {
    Polynomial,
    Semialgebraic,
}

/// An interpolant function over the shared variables: `h1(x)` alone, or
/// `h1(x) + sqrt(||x||^2 + 1) * h2(x)`. The largest absolute coefficient is
/// 1 after scaling; `h2 = 0` exactly when the kind is polynomial.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub kind: InterpolantKind,
    pub value: SqrtPair,
    /// Factor applied to the raw solver coefficients.
    pub scale: f64,
}

impl Interpolant {
    pub fn h1(&self) -> &Polynomial {
        &self.value.h1
    }

    pub fn h2(&self) -> &Polynomial {
        &self.value.h2
    }
}

/// One multiplier of a certificate identity: a Gram matrix or a free
/// coefficient vector over the slot's monomial basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CertSlot {
    #[serde(rename = "sos")]
    Gram {
        generator: String,
        /// Canonical renderings of the basis monomials; Gram entries are
        /// indexed against this list.
        basis: Vec<String>,
        /// Lower-triangular nonzero entries `(i, j, value)` with `i >= j`.
        entries: Vec<(usize, usize, f64)>,
    },
    #[serde(rename = "free")]
    Coeffs {
        generator: String,
        basis: Vec<String>,
        coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertIdentity {
    pub slots: Vec<CertSlot>,
}

/// A positivity certificate: per identity one Gram matrix per SOS slot and
/// one coefficient vector per free slot, together with the program
/// parameters needed to rebuild the identities and the scale applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: Mode,
    pub degree: u32,
    pub order: u32,
    /// Exact rational renderings.
    pub margin: String,
    pub epsilon: String,
    pub scale: f64,
    /// Digest of the problem file this certificate belongs to.
    pub problem_digest: String,
    pub identities: Vec<CertIdentity>,
}

impl Certificate {
    pub fn margin_rat(&self) -> Option<Rat> {
        rat::parse_literal(&self.margin)
    }

    pub fn epsilon_rat(&self) -> Option<Rat> {
        rat::parse_literal(&self.epsilon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExtractError> {
        serde_json::from_str(text).map_err(|e| ExtractError::Malformed(e.to_string()))
    }
}

/// Read the interpolant off a feasible solution and assemble its
/// certificate, rescaling everything so the largest absolute template
/// coefficient is 1. `problem_digest` is recorded in the certificate.
pub fn extract(
    sol: &SdpSolution,
    prog: &SosProgram,
    problem_digest: &str,
) -> Result<(Interpolant, Certificate), ExtractError> {
    if sol.status != SdpStatus::Feasible {
        return Err(ExtractError::NotFeasible(sol.status));
    }
    let layout = prog.layout();
    if sol.free.len() != layout.nfree || sol.gram.len() != layout.block_dims.len() {
        return Err(ExtractError::ShapeMismatch(format!(
            "solution has {} blocks / {} free scalars, layout wants {} / {}",
            sol.gram.len(),
            sol.free.len(),
            layout.block_dims.len(),
            layout.nfree
        )));
    }
    let coeffs = &sol.free[..layout.template_len];
    let scale = if layout.template_len == 0 {
        1.0
    } else {
        let max = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if max < DEGENERACY_TOL {
            return Err(ExtractError::Degenerate);
        }
        1.0 / max
    };

    let nvars = prog.table.len();
    let mut h1 = Polynomial::zero(prog.table.clone());
    let mut h2 = Polynomial::zero(prog.table.clone());
    for (coeff, &value) in prog.template.coeffs.iter().zip(coeffs) {
        let c = rat::from_f64(value * scale);
        match coeff.part {
            crate::sos::TemplatePart::H1 => h1.add_term(coeff.alpha.clone(), c),
            crate::sos::TemplatePart::H2 => h2.add_term(coeff.alpha.clone(), c),
        }
    }
    let _ = nvars;
    let kind = if h2.is_zero() {
        InterpolantKind::Polynomial
    } else {
        InterpolantKind::Semialgebraic
    };
    let interp = Interpolant {
        kind,
        value: SqrtPair::new(h1, h2, prog.shared.clone()),
        scale,
    };

    let mut identities = Vec::with_capacity(prog.identities.len());
    let mut block_iter = layout.blocks.iter().enumerate();
    let mut free_iter = layout.free_slots.iter();
    for (k, id) in prog.identities.iter().enumerate() {
        let mut slots = Vec::with_capacity(id.slots.len());
        for (j, slot) in id.slots.iter().enumerate() {
            let basis: Vec<String> = slot
                .basis
                .iter()
                .map(|m| {
                    Polynomial::from_terms(prog.table.clone(), [(m.clone(), rat::one())])
                        .to_string()
                })
                .collect();
            match slot.kind {
                MultKind::Sos => {
                    let (block_idx, _) = block_iter
                        .find(|(_, &(ki, ji))| ki == k && ji == j)
                        .expect("layout covers slot");
                    let g = &sol.gram[block_idx];
                    let mut entries = Vec::new();
                    for r in 0..g.dim {
                        for c in 0..=r {
                            let v = g.get(r, c) * scale;
                            if v != 0.0 {
                                entries.push((r, c, v));
                            }
                        }
                    }
                    slots.push(CertSlot::Gram {
                        generator: slot.generator.to_string(),
                        basis,
                        entries,
                    });
                }
                MultKind::Free => {
                    let &(_, _, offset) = free_iter
                        .find(|&&(ki, ji, _)| ki == k && ji == j)
                        .expect("layout covers slot");
                    let coeffs = sol.free[offset..offset + slot.basis.len()]
                        .iter()
                        .map(|v| v * scale)
                        .collect();
                    slots.push(CertSlot::Coeffs {
                        generator: slot.generator.to_string(),
                        basis,
                        coeffs,
                    });
                }
            }
        }
        identities.push(CertIdentity { slots });
    }
    let cert = Certificate {
        mode: prog.mode,
        degree: prog.degree,
        order: prog.order,
        margin: rat::render(&prog.margin),
        epsilon: rat::render(&prog.epsilon),
        scale,
        problem_digest: problem_digest.to_string(),
        identities,
    };
    Ok((interp, cert))
}

/// Re-expand every certificate identity symbolically and return the largest
/// absolute coefficient mismatch, normalized by the largest coefficient
/// magnitude on either side of the worst identity.
pub fn certificate_residual(
    cert: &Certificate,
    prog: &SosProgram,
    interp: &Interpolant,
) -> Result<f64, ExtractError> {
    let layout = prog.layout();
    if cert.identities.len() != prog.identities.len() {
        return Err(ExtractError::ShapeMismatch(format!(
            "certificate has {} identities, program has {}",
            cert.identities.len(),
            prog.identities.len()
        )));
    }
    // template coefficients from the (scaled) interpolant
    let mut free = vec![rat::zero(); layout.nfree];
    for (j, coeff) in prog.template.coeffs.iter().enumerate() {
        let src = match coeff.part {
            crate::sos::TemplatePart::H1 => &interp.value.h1,
            crate::sos::TemplatePart::H2 => &interp.value.h2,
        };
        free[j] = src.coeff(&coeff.alpha);
    }
    // slot values from the certificate
    let mut grams: Vec<Vec<Rat>> = layout
        .block_dims
        .iter()
        .map(|&d| vec![rat::zero(); d * d])
        .collect();
    let mut block_iter = layout.blocks.iter().enumerate();
    let mut free_iter = layout.free_slots.iter();
    for (k, (cid, id)) in cert.identities.iter().zip(&prog.identities).enumerate() {
        if cid.slots.len() != id.slots.len() {
            return Err(ExtractError::ShapeMismatch(format!(
                "identity {k}: certificate has {} slots, program has {}",
                cid.slots.len(),
                id.slots.len()
            )));
        }
        for (j, (cslot, slot)) in cid.slots.iter().zip(&id.slots).enumerate() {
            match (cslot, slot.kind) {
                (CertSlot::Gram { entries, basis, .. }, MultKind::Sos) => {
                    if basis.len() != slot.basis.len() {
                        return Err(ExtractError::ShapeMismatch(format!(
                            "identity {k} slot {j}: basis length {} vs {}",
                            basis.len(),
                            slot.basis.len()
                        )));
                    }
                    let (block_idx, _) = block_iter
                        .find(|(_, &(ki, ji))| ki == k && ji == j)
                        .expect("layout covers slot");
                    let n = slot.basis.len();
                    let g = &mut grams[block_idx];
                    for &(r, c, v) in entries {
                        if r >= n || c > r {
                            return Err(ExtractError::Malformed(format!(
                                "identity {k} slot {j}: entry ({r},{c}) out of range"
                            )));
                        }
                        let q = rat::from_f64(v);
                        g[r * n + c] = q.clone();
                        g[c * n + r] = q;
                    }
                }
                (CertSlot::Coeffs { coeffs, .. }, MultKind::Free) => {
                    let &(_, _, offset) = free_iter
                        .find(|&&(ki, ji, _)| ki == k && ji == j)
                        .expect("layout covers slot");
                    if coeffs.len() != slot.basis.len() {
                        return Err(ExtractError::ShapeMismatch(format!(
                            "identity {k} slot {j}: {} coefficients for basis of {}",
                            coeffs.len(),
                            slot.basis.len()
                        )));
                    }
                    for (t, &v) in coeffs.iter().enumerate() {
                        free[offset + t] = rat::from_f64(v);
                    }
                }
                _ => {
                    return Err(ExtractError::ShapeMismatch(format!(
                        "identity {k} slot {j}: multiplier kind differs"
                    )));
                }
            }
        }
    }
    let lhs_scale = rat::from_f64(cert.scale);
    let mut worst = rat::zero();
    for k in 0..prog.identities.len() {
        let (lhs, rhs) = identity_sides(prog, k, &grams, &free, &lhs_scale);
        let magnitude = lhs.max_abs_coeff().max(rhs.max_abs_coeff());
        if magnitude == rat::zero() {
            continue;
        }
        let mismatch = rhs.sub(&lhs).max_abs_coeff() / magnitude;
        if mismatch > worst {
            worst = mismatch;
        }
    }
    Ok(rat::to_f64(&worst))
}

/// Canonical interpolant file: variable list, kind, scale, and the two
/// component polynomials with exact coefficients, plus a rounded preview.
pub fn render_interpolant(interp: &Interpolant) -> String {
    use std::fmt::Write;
    let table = interp.value.h1.table();
    let vars: Vec<&str> = interp
        .value
        .shared()
        .iter()
        .map(|&v| table.name(v))
        .collect();
    let mut out = String::new();
    writeln!(out, "# interpolant").unwrap();
    writeln!(out, "# h ~ {}", display_rounded(&interp.value.h1, 8)).unwrap();
    if !interp.value.h2.is_zero() {
        writeln!(
            out,
            "#   + sqrt(||x||^2 + 1) * ({})",
            display_rounded(&interp.value.h2, 8)
        )
        .unwrap();
    }
    writeln!(out, "vars: {}", vars.join(" ")).unwrap();
    writeln!(
        out,
        "kind: {}",
        match interp.kind {
            InterpolantKind::Polynomial => "polynomial",
            InterpolantKind::Semialgebraic => "semialgebraic",
        }
    )
    .unwrap();
    writeln!(out, "scale: {}", interp.scale).unwrap();
    writeln!(out, "h1: {}", interp.value.h1).unwrap();
    writeln!(out, "h2: {}", interp.value.h2).unwrap();
    out
}

/// Round coefficients to `digits` significant digits for display.
pub fn display_rounded(p: &Polynomial, digits: usize) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let table = p.table();
    let mut parts = String::new();
    for (i, (m, c)) in p.terms().collect::<Vec<_>>().into_iter().rev().enumerate() {
        let v = rat::to_f64(c);
        let mag = format!("{:.*}", digits.saturating_sub(1), FmtSig(v.abs()));
        let mono = Polynomial::from_terms(table.clone(), [(m.clone(), rat::one())]).to_string();
        if i == 0 {
            if v < 0.0 {
                parts.push('-');
            }
        } else {
            parts.push_str(if v < 0.0 { " - " } else { " + " });
        }
        if mono == "1" {
            parts.push_str(&mag);
        } else {
            parts.push_str(&format!("{mag}*{mono}"));
        }
    }
    parts
}

struct FmtSig(f64);

impl std::fmt::Display for FmtSig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let digits = f.precision().unwrap_or(7) + 1;
        if self.0 == 0.0 {
            return write!(f, "0");
        }
        let exp = self.0.abs().log10().floor() as i32;
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        write!(f, "{:.*}", decimals, self.0)
    }
}

/// Parsed interpolant file: variable names and the two components over a
/// fresh table of exactly those variables.
#[derive(Debug, Clone)]
pub struct InterpolantFile {
    pub vars: Vec<String>,
    pub kind: InterpolantKind,
    pub scale: f64,
    pub h1: Polynomial,
    pub h2: Polynomial,
}

/// Parse the canonical interpolant file format.
pub fn parse_interpolant(text: &str) -> Result<InterpolantFile, ExtractError> {
    use std::sync::Arc;
    let mut vars: Option<Vec<String>> = None;
    let mut kind = InterpolantKind::Polynomial;
    let mut scale = 1.0f64;
    let mut h1_text: Option<String> = None;
    let mut h2_text: Option<String> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| ExtractError::Malformed(format!("expected 'key: value', got '{line}'")))?;
        let value = value.trim();
        match key.trim() {
            "vars" => vars = Some(value.split_whitespace().map(String::from).collect()),
            "kind" => {
                kind = match value {
                    "polynomial" => InterpolantKind::Polynomial,
                    "semialgebraic" => InterpolantKind::Semialgebraic,
                    other => {
                        return Err(ExtractError::Malformed(format!(
                            "unknown interpolant kind '{other}'"
                        )))
                    }
                }
            }
            "scale" => {
                scale = value
                    .parse()
                    .map_err(|_| ExtractError::Malformed(format!("bad scale '{value}'")))?
            }
            "h1" => h1_text = Some(value.to_string()),
            "h2" => h2_text = Some(value.to_string()),
            other => {
                return Err(ExtractError::Malformed(format!("unknown field '{other}'")));
            }
        }
    }
    let vars = vars.ok_or_else(|| ExtractError::Malformed("missing 'vars' line".into()))?;
    let h1_text = h1_text.ok_or_else(|| ExtractError::Malformed("missing 'h1' line".into()))?;
    let h2_text = h2_text.unwrap_or_else(|| "0".into());
    let table = Arc::new(crate::poly::VarTable::from_names(vars.clone()));
    let parse = |text: &str| {
        crate::formula::parse_polynomial(text, &table)
            .map_err(|e| ExtractError::Malformed(e.to_string()))
    };
    let h1 = parse(&h1_text)?;
    let h2 = parse(&h2_text)?;
    if (kind == InterpolantKind::Polynomial) != h2.is_zero() {
        return Err(ExtractError::Malformed(
            "kind does not match h2 (h2 must be 0 exactly for polynomial kind)".into(),
        ));
    }
    Ok(InterpolantFile {
        vars,
        kind,
        scale,
        h1,
        h2,
    })
}
