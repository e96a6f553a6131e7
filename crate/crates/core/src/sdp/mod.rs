//! Semidefinite feasibility problems: representation, solving, interchange.
//!
//! A problem is a list of positive-semidefinite matrix blocks plus a vector
//! of free scalars, constrained by linear equalities
//! `sum_b <A_{i,b}, X_b> + c_i' f = b_i` with an optional linear objective
//! (zero for every problem this pipeline produces). Solving is done by the
//! embedded primal-dual interior-point method in [`solver`]; problems can
//! also be exported in the sparse SDPA format and solutions imported back
//! (see [`sdpa`]).

mod sdpa;
mod solver;

pub use sdpa::{export_sdpa, import_sdpa, import_solution, write_solution_sdpa};
pub use solver::solve;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the SDP engine.
#[derive(Debug, Error)]
pub enum SdpError {
    #[error("problem too large: {what} = {got} exceeds limit {limit}")]
    DimensionLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("nothing to export: problem has no blocks and no free variables")]
    NothingToExport,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("structural mismatch: {0}")]
    StructureMismatch(String),
    #[error("equality {index} references {what} out of range")]
    BadEquality { index: usize, what: &'static str },
}

/// Dense symmetric matrix, full row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self {
            dim: m.nrows(),
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue (0 for an empty matrix).
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let eig = self.to_dmatrix().symmetric_eigenvalues();
        eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sparse symmetric coefficient entries for one block of one equality;
/// entries stored lower-triangular (`row >= col`) with the matrix value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntries {
    pub block: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// One linear equality `sum_b <A_b, X_b> + sum_j c_j f_j = rhs`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Equality {
    pub blocks: Vec<BlockEntries>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Equality {
    /// `<A, X> + c'f` for the given assignment.
    pub fn eval(&self, grams: &[SymMatrix], free: &[f64]) -> f64 {
        let mut acc = 0.0;
        for be in &self.blocks {
            let x = &grams[be.block];
            for &(r, c, v) in &be.entries {
                acc += v * x.get(r, c) * if r == c { 1.0 } else { 2.0 };
            }
        }
        for &(j, v) in &self.free {
            acc += v * free[j];
        }
        acc
    }

    /// Largest absolute coefficient, including the right-hand side.
    pub fn max_abs(&self) -> f64 {
        let mut m = self.rhs.abs();
        for be in &self.blocks {
            for &(_, _, v) in &be.entries {
                m = m.max(v.abs());
            }
        }
        for &(_, v) in &self.free {
            m = m.max(v.abs());
        }
        m
    }
}

/// Block-diagonal PSD variables plus free scalars under linear equalities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub nfree: usize,
    pub equalities: Vec<Equality>,
    /// Linear objective to minimize; `None` means pure feasibility.
    pub objective: Option<Equality>,
}

impl SdpProblem {
    pub fn total_psd_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// Check that every equality references only declared blocks/scalars.
    pub fn validate_shape(&self) -> Result<(), SdpError> {
        for (index, eq) in self.equalities.iter().enumerate() {
            for be in &eq.blocks {
                if be.block >= self.block_dims.len() {
                    return Err(SdpError::BadEquality {
                        index,
                        what: "block",
                    });
                }
                let d = self.block_dims[be.block];
                if be.entries.iter().any(|&(r, c, _)| r >= d || c >= d || r < c) {
                    return Err(SdpError::BadEquality {
                        index,
                        what: "matrix entry",
                    });
                }
            }
            if eq.free.iter().any(|&(j, _)| j >= self.nfree) {
                return Err(SdpError::BadEquality {
                    index,
                    what: "free scalar",
                });
            }
        }
        Ok(())
    }

    /// Max absolute equality violation for an assignment.
    pub fn primal_residual(&self, grams: &[SymMatrix], free: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|eq| (eq.eval(grams, free) - eq.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Unknown,
}

/// Residual metrics, always recomputed from the returned matrices rather
/// than trusted from solver internals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveMetrics {
    /// `max_i |<A_i, X> + c_i' f - b_i|` on the original problem.
    pub primal_residual: f64,
    /// Max dual equation violation of the normalized dual point.
    pub dual_residual: f64,
    /// Smallest eigenvalue per block of the returned point.
    pub min_block_eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub termination: String,
}

/// Result of a solve: status, per-block Gram matrices, free scalars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub gram: Vec<SymMatrix>,
    pub free: Vec<f64>,
    /// Dual multipliers per equality.
    pub dual: Vec<f64>,
    pub metrics: SolveMetrics,
    /// Improving ray `y` scaled to `b'y = 1`, present iff infeasible.
    pub infeasibility_certificate: Option<Vec<f64>>,
}

/// Interior-point settings.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub psd_tol: f64,
    /// Tolerance at which an infeasibility certificate is accepted.
    pub cert_tol: f64,
    pub max_iter: usize,
    pub max_psd_dim: usize,
    pub max_equalities: usize,
    pub time_limit: Option<std::time::Duration>,
    /// Print one diagnostic line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            psd_tol: 1e-8,
            cert_tol: 1e-6,
            max_iter: 200,
            max_psd_dim: 1000,
            max_equalities: 20000,
            time_limit: None,
            verbose: false,
        }
    }
}

/// Validate a claimed feasible point against the problem.
pub fn validate_solution(
    p: &SdpProblem,
    grams: &[SymMatrix],
    free: &[f64],
    feas_tol: f64,
    psd_tol: f64,
) -> Result<(), String> {
    if grams.len() != p.block_dims.len()
        || grams.iter().zip(&p.block_dims).any(|(g, &d)| g.dim != d)
        || free.len() != p.nfree
    {
        return Err("shape mismatch".into());
    }
    let res = p.primal_residual(grams, free);
    if res > feas_tol {
        return Err(format!("primal residual {res:.3e} exceeds {feas_tol:.3e}"));
    }
    for (b, g) in grams.iter().enumerate() {
        let ev = g.min_eigenvalue();
        if ev < -psd_tol {
            return Err(format!(
                "block {b} has eigenvalue {ev:.3e} below -{psd_tol:.3e}"
            ));
        }
    }
    Ok(())
}

/// Validate an improving ray `y`: `b'y > 0`, `sum_i y_i A_{i,b}` negative
/// semidefinite per block, and `A_f' y = 0`, all to `tol` after normalizing
/// `b'y = 1`.
pub fn validate_infeasibility_certificate(
    p: &SdpProblem,
    y: &[f64],
    tol: f64,
) -> Result<(), String> {
    if y.len() != p.equalities.len() {
        return Err("certificate length mismatch".into());
    }
    let by: f64 = p
        .equalities
        .iter()
        .zip(y)
        .map(|(eq, &yi)| eq.rhs * yi)
        .sum();
    if !(by > 0.0) {
        return Err(format!("b'y = {by:.3e} is not positive"));
    }
    let scale = 1.0 / by;
    // accumulate Z_b = sum_i y_i A_{i,b}
    let mut z: Vec<DMatrix<f64>> = p
        .block_dims
        .iter()
        .map(|&d| DMatrix::zeros(d, d))
        .collect();
    let mut afree = vec![0.0; p.nfree];
    for (eq, &yi) in p.equalities.iter().zip(y) {
        let yi = yi * scale;
        for be in &eq.blocks {
            for &(r, c, v) in &be.entries {
                z[be.block][(r, c)] += yi * v;
                if r != c {
                    z[be.block][(c, r)] += yi * v;
                }
            }
        }
        for &(j, v) in &eq.free {
            afree[j] += yi * v;
        }
    }
    for (b, zb) in z.iter().enumerate() {
        if zb.nrows() == 0 {
            continue;
        }
        let max_ev = zb
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max_ev > tol {
            return Err(format!(
                "block {b}: sum_i y_i A_i has eigenvalue {max_ev:.3e} above {tol:.3e}"
            ));
        }
    }
    let worst_free = afree.iter().copied().map(f64::abs).fold(0.0, f64::max);
    if worst_free > tol {
        return Err(format!(
            "free-variable column residual {worst_free:.3e} above {tol:.3e}"
        ));
    }
    Ok(())
}
