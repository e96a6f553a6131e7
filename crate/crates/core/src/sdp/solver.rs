//! Embedded primal-dual interior-point solver.
//!
//! Solves the feasibility problem `A(X) + C f = b, X >= 0 blockwise, f free`
//! on the homogeneous self-dual embedding
//!
//! ```text
//!   A x - b tau           = 0
//!   A' y + s - c tau      = 0      (s = 0 on free components)
//!   b' y - c' x - kappa   = 0
//!   x in K, s in K*, tau >= 0, kappa >= 0
//! ```
//!
//! driven to complementarity by Mehrotra-style predictor-corrector steps
//! with Nesterov-Todd scaling on the PSD blocks. A solution with `tau > 0`
//! yields the feasible point `x / tau`; a solution with `kappa > 0` and
//! `b'y > 0` yields an improving ray proving infeasibility. The ray is
//! re-verified against the original data before INFEASIBLE is reported;
//! anything else ends as UNKNOWN with diagnostics.
//!
//! Free variables are kept in the KKT system rather than split into
//! differences of nonnegative variables (the split is used only for SDPA
//! export). Each iteration eliminates the block variables with the scaling
//! and solves the saddle system
//!
//! ```text
//!   [ M    Af ] [dy]   [r1]         M = A (T . T) A'
//!   [ Af'  0  ] [df] = [r2]
//! ```
//!
//! per connected component of the constraint/block incidence graph, with a
//! Schur complement on the free columns; a dense factorization of the full
//! saddle matrix is kept as a fallback for problems whose rows touch no
//! block. Rows are scaled to unit max coefficient on entry; all reported
//! residuals are recomputed against the original, unscaled problem.

use nalgebra::{DMatrix, DVector};

use super::{
    validate_infeasibility_certificate, SdpError, SdpProblem, SdpSolution, SdpStatus,
    SolveMetrics, SolverSettings, SymMatrix,
};

struct Row {
    /// (block index, lower-triangular entries)
    blocks: Vec<(usize, Vec<(usize, usize, f64)>)>,
    free: Vec<(usize, f64)>,
}

struct Component {
    rows: Vec<usize>,
    blocks: Vec<usize>,
}

struct Prep {
    dims: Vec<usize>,
    rows: Vec<Row>,
    /// internal row = original row * row_scale
    row_scale: Vec<f64>,
    /// map internal row -> original equality index
    row_origin: Vec<usize>,
    b: DVector<f64>,
    nf: usize,
    c_blocks: Option<Vec<DMatrix<f64>>>,
    c_free: DVector<f64>,
    comps: Vec<Component>,
    /// all rows touch at least one block: component path usable
    clean: bool,
    block_rows: Vec<Vec<usize>>,
}

impl Prep {
    fn new(p: &SdpProblem) -> (Self, Option<SdpSolution>) {
        let mut rows = Vec::new();
        let mut row_scale = Vec::new();
        let mut row_origin = Vec::new();
        let mut b = Vec::new();
        // detect trivially contradictory rows and drop vacuous ones
        for (i, eq) in p.equalities.iter().enumerate() {
            let has_entries =
                eq.blocks.iter().any(|be| !be.entries.is_empty()) || !eq.free.is_empty();
            if !has_entries {
                if eq.rhs != 0.0 {
                    // 0 = rhs with rhs != 0: certified infeasible by the unit ray
                    let mut y = vec![0.0; p.equalities.len()];
                    y[i] = eq.rhs.signum() / eq.rhs.abs();
                    let sol = package_infeasible(p, y, 0, "contradictory constant equality");
                    if let Some(sol) = sol {
                        return (
                            Prep {
                                dims: vec![],
                                rows: vec![],
                                row_scale: vec![],
                                row_origin: vec![],
                                b: DVector::zeros(0),
                                nf: 0,
                                c_blocks: None,
                                c_free: DVector::zeros(0),
                                comps: vec![],
                                clean: true,
                                block_rows: vec![],
                            },
                            Some(sol),
                        );
                    }
                }
                continue; // 0 = 0 carries no information
            }
            let scale = 1.0 / eq.max_abs().max(1e-300);
            let blocks = eq
                .blocks
                .iter()
                .filter(|be| !be.entries.is_empty())
                .map(|be| {
                    (
                        be.block,
                        be.entries
                            .iter()
                            .map(|&(r, c, v)| (r, c, v * scale))
                            .collect(),
                    )
                })
                .collect();
            let free = eq.free.iter().map(|&(j, v)| (j, v * scale)).collect();
            rows.push(Row { blocks, free });
            row_scale.push(scale);
            row_origin.push(i);
            b.push(eq.rhs * scale);
        }
        let m = rows.len();
        let nblocks = p.block_dims.len();
        let mut block_rows = vec![Vec::new(); nblocks];
        for (i, row) in rows.iter().enumerate() {
            for (bidx, _) in &row.blocks {
                block_rows[*bidx].push(i);
            }
        }
        // union-find over rows joined through shared blocks
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = i;
            while parent[c] != r {
                let next = parent[c];
                parent[c] = r;
                c = next;
            }
            r
        }
        for rows_of_block in &block_rows {
            for w in rows_of_block.windows(2) {
                let a = find(&mut parent, w[0]);
                let bb = find(&mut parent, w[1]);
                if a != bb {
                    parent[a] = bb;
                }
            }
        }
        let mut comp_of_root: std::collections::BTreeMap<usize, usize> = Default::default();
        let mut comps: Vec<Component> = Vec::new();
        let mut clean = true;
        for i in 0..m {
            if rows[i].blocks.is_empty() {
                clean = false;
            }
            let root = find(&mut parent, i);
            let idx = *comp_of_root.entry(root).or_insert_with(|| {
                comps.push(Component {
                    rows: vec![],
                    blocks: vec![],
                });
                comps.len() - 1
            });
            comps[idx].rows.push(i);
        }
        for (bidx, rows_of_block) in block_rows.iter().enumerate() {
            if let Some(&first) = rows_of_block.first() {
                let root = find(&mut parent, first);
                let idx = comp_of_root[&root];
                comps[idx].blocks.push(bidx);
            }
        }
        let c_blocks = p.objective.as_ref().map(|obj| {
            let mut mats: Vec<DMatrix<f64>> = p
                .block_dims
                .iter()
                .map(|&d| DMatrix::zeros(d, d))
                .collect();
            for be in &obj.blocks {
                for &(r, c, v) in &be.entries {
                    mats[be.block][(r, c)] = v;
                    mats[be.block][(c, r)] = v;
                }
            }
            mats
        });
        let mut c_free = DVector::zeros(p.nfree);
        if let Some(obj) = &p.objective {
            for &(j, v) in &obj.free {
                c_free[j] = v;
            }
        }
        (
            Prep {
                dims: p.block_dims.clone(),
                rows,
                row_scale,
                row_origin,
                b: DVector::from_vec(b),
                nf: p.nfree,
                c_blocks,
                c_free,
                comps,
                clean,
                block_rows,
            },
            None,
        )
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    /// `<A_i, X>` over internal rows.
    fn apply_a(&self, x: &[DMatrix<f64>], f: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (bidx, entries) in &row.blocks {
                let xb = &x[*bidx];
                for &(r, c, v) in entries {
                    acc += v * xb[(r, c)] * if r == c { 1.0 } else { 2.0 };
                }
            }
            for &(j, v) in &row.free {
                acc += v * f[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `sum_i y_i A_{i,b}` as dense symmetric blocks.
    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (bidx, entries) in &row.blocks {
                let zb = &mut out[*bidx];
                for &(r, c, v) in entries {
                    zb[(r, c)] += yi * v;
                    if r != c {
                        zb[(c, r)] += yi * v;
                    }
                }
            }
        }
        out
    }

    /// `A_f' y`.
    fn apply_aft(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nf);
        for (i, row) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for &(j, v) in &row.free {
                out[j] += yi * v;
            }
        }
        out
    }

    /// `A_f df` accumulated into per-row scalars.
    fn apply_af(&self, df: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in &row.free {
                acc += v * df[j];
            }
            out[i] = acc;
        }
        out
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `T A T` for a sparse symmetric `A` given by lower-triangular entries.
fn t_a_t(t: &DMatrix<f64>, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let n = t.nrows();
    let mut out = DMatrix::zeros(n, n);
    for &(r, c, v) in entries {
        let tr = t.column(r).clone_owned();
        let tc = t.column(c).clone_owned();
        out.ger(v, &tr, &tc, 1.0);
        if r != c {
            out.ger(v, &tc, &tr, 1.0);
        }
    }
    symmetrize(&mut out);
    out
}

fn sparse_dot(w: &DMatrix<f64>, entries: &[(usize, usize, f64)]) -> f64 {
    let mut acc = 0.0;
    for &(r, c, v) in entries {
        acc += v * w[(r, c)] * if r == c { 1.0 } else { 2.0 };
    }
    acc
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Cholesky with an escalating diagonal shift; returns the factor and shift.
fn chol_with_jitter(m: &DMatrix<f64>) -> Option<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(ch) = nalgebra::Cholesky::new(m.clone()) {
        return Some((ch, 0.0));
    }
    let base = 1.0 + m.diagonal().amax();
    let mut jitter = 1e-12 * base;
    while jitter <= 1e-4 * base {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::Cholesky::new(shifted) {
            return Some((ch, jitter));
        }
        jitter *= 100.0;
    }
    None
}

/// Largest step `alpha` with `X + alpha dX` staying PSD, given `X = L L'`.
fn max_step_psd(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let li_dx = l.solve_lower_triangular(dx)?;
    let mut inner = l.solve_lower_triangular(&li_dx.transpose())?.transpose();
    symmetrize(&mut inner);
    let lam_min = inner
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lam_min >= -1e-300 {
        Some(f64::INFINITY)
    } else {
        Some(-1.0 / lam_min)
    }
}

fn max_step_scalar(v: f64, dv: f64) -> f64 {
    if dv >= 0.0 {
        f64::INFINITY
    } else {
        -v / dv
    }
}

struct KktFactor {
    /// per component: unfactored M and its Cholesky
    comp_m: Vec<DMatrix<f64>>,
    comp_chol: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    f_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    /// dense fallback for unclean structures
    dense_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl KktFactor {
    fn build(prep: &Prep, t: &[DMatrix<f64>]) -> Option<Self> {
        let m = prep.m();
        let nf = prep.nf;
        if !prep.clean {
            // dense [M Af; Af' 0]
            let mut big = DMatrix::zeros(m + nf, m + nf);
            let mm = build_m_dense(prep, t);
            big.view_mut((0, 0), (m, m)).copy_from(&mm);
            for (i, row) in prep.rows.iter().enumerate() {
                for &(j, v) in &row.free {
                    big[(i, m + j)] = v;
                    big[(m + j, i)] = v;
                }
            }
            let lu = nalgebra::LU::new(big);
            return Some(KktFactor {
                comp_m: vec![],
                comp_chol: vec![],
                f_chol: None,
                dense_lu: Some(lu),
            });
        }
        let mut comp_m = Vec::with_capacity(prep.comps.len());
        let mut comp_chol = Vec::with_capacity(prep.comps.len());
        let mut f_mat = DMatrix::zeros(nf, nf);
        for comp in &prep.comps {
            let k = comp.rows.len();
            let mut local = DMatrix::zeros(k, k);
            // position of each global row inside the component
            let pos: std::collections::HashMap<usize, usize> = comp
                .rows
                .iter()
                .enumerate()
                .map(|(a, &r)| (r, a))
                .collect();
            for &bidx in &comp.blocks {
                let tb = &t[bidx];
                for &gi in &prep.block_rows[bidx] {
                    let entries_i = prep.rows[gi]
                        .blocks
                        .iter()
                        .find(|(bb, _)| *bb == bidx)
                        .map(|(_, e)| e.as_slice())
                        .unwrap();
                    let w = t_a_t(tb, entries_i);
                    let pi = pos[&gi];
                    for &gj in &prep.block_rows[bidx] {
                        let pj = pos[&gj];
                        if pj > pi {
                            continue;
                        }
                        let entries_j = prep.rows[gj]
                            .blocks
                            .iter()
                            .find(|(bb, _)| *bb == bidx)
                            .map(|(_, e)| e.as_slice())
                            .unwrap();
                        let v = sparse_dot(&w, entries_j);
                        local[(pi, pj)] += v;
                        if pi != pj {
                            local[(pj, pi)] += v;
                        }
                    }
                }
            }
            let (chol, _) = chol_with_jitter(&local)?;
            // accumulate Af' M^{-1} Af via the component's free columns
            let active: Vec<usize> = {
                let mut cols: Vec<usize> = comp
                    .rows
                    .iter()
                    .flat_map(|&r| prep.rows[r].free.iter().map(|&(j, _)| j))
                    .collect();
                cols.sort_unstable();
                cols.dedup();
                cols
            };
            if !active.is_empty() {
                let mut af_local = DMatrix::zeros(k, active.len());
                for (a, &r) in comp.rows.iter().enumerate() {
                    for &(j, v) in &prep.rows[r].free {
                        let cj = active.binary_search(&j).unwrap();
                        af_local[(a, cj)] = v;
                    }
                }
                let minv_af = chol.solve(&af_local);
                let contrib = af_local.transpose() * &minv_af;
                for (ci, &gi) in active.iter().enumerate() {
                    for (cj, &gj) in active.iter().enumerate() {
                        f_mat[(gi, gj)] += contrib[(ci, cj)];
                    }
                }
            }
            comp_m.push(local);
            comp_chol.push(chol);
        }
        let f_chol = if nf > 0 {
            Some(chol_with_jitter(&f_mat)?.0)
        } else {
            None
        };
        Some(KktFactor {
            comp_m,
            comp_chol,
            f_chol,
            dense_lu: None,
        })
    }

    /// Solve `[M Af; Af' 0] [dy; df] = [r1; r2]`, iteratively refined
    /// against the unfactored system until the residual stops improving.
    fn solve(&self, prep: &Prep, r1: &DVector<f64>, r2: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut dy, mut df) = self.solve_once(prep, r1, r2)?;
        if self.dense_lu.is_some() {
            // refinement needs the unfactored M, which only the component
            // path keeps around
            return Some((dy, df));
        }
        let scale = r1.amax().max(r2.amax()).max(1.0);
        let residual = |dy: &DVector<f64>, df: &DVector<f64>| {
            let res1 = r1 - &(self.apply_m(prep, dy) + prep.apply_af(df));
            let res2 = r2 - prep.apply_aft(dy);
            (res1, res2)
        };
        let (mut res1, mut res2) = residual(&dy, &df);
        let mut err = res1.amax().max(res2.amax());
        for _ in 0..4 {
            if err <= 1e-13 * scale {
                break;
            }
            let (cy, cf) = match self.solve_once(prep, &res1, &res2) {
                Some(v) => v,
                None => break,
            };
            let ty = &dy + &cy;
            let tf = &df + &cf;
            let (t1, t2) = residual(&ty, &tf);
            let terr = t1.amax().max(t2.amax());
            if terr >= err {
                break;
            }
            dy = ty;
            df = tf;
            res1 = t1;
            res2 = t2;
            err = terr;
        }
        Some((dy, df))
    }

    fn apply_m(&self, prep: &Prep, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(prep.m());
        for (comp, local) in prep.comps.iter().zip(&self.comp_m) {
            let k = comp.rows.len();
            let mut v = DVector::zeros(k);
            for (a, &r) in comp.rows.iter().enumerate() {
                v[a] = y[r];
            }
            let w = local * v;
            for (a, &r) in comp.rows.iter().enumerate() {
                out[r] = w[a];
            }
        }
        out
    }

    fn solve_once(
        &self,
        prep: &Prep,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let m = prep.m();
        let nf = prep.nf;
        if let Some(lu) = &self.dense_lu {
            let mut rhs = DVector::zeros(m + nf);
            rhs.rows_mut(0, m).copy_from(r1);
            rhs.rows_mut(m, nf).copy_from(r2);
            let sol = lu.solve(&rhs)?;
            return Some((sol.rows(0, m).clone_owned(), sol.rows(m, nf).clone_owned()));
        }
        // t = M^{-1} r1 per component
        let mut t_vec = DVector::zeros(m);
        for (comp, chol) in prep.comps.iter().zip(&self.comp_chol) {
            let k = comp.rows.len();
            let mut local = DVector::zeros(k);
            for (a, &r) in comp.rows.iter().enumerate() {
                local[a] = r1[r];
            }
            let sol = chol.solve(&local);
            for (a, &r) in comp.rows.iter().enumerate() {
                t_vec[r] = sol[a];
            }
        }
        let df = if nf > 0 {
            let rhs_f = prep.apply_aft(&t_vec) - r2;
            self.f_chol.as_ref()?.solve(&rhs_f)
        } else {
            DVector::zeros(0)
        };
        // dy = M^{-1} (r1 - Af df)
        let r1_adj = r1 - prep.apply_af(&df);
        let mut dy = DVector::zeros(m);
        for (comp, chol) in prep.comps.iter().zip(&self.comp_chol) {
            let k = comp.rows.len();
            let mut local = DVector::zeros(k);
            for (a, &r) in comp.rows.iter().enumerate() {
                local[a] = r1_adj[r];
            }
            let sol = chol.solve(&local);
            for (a, &r) in comp.rows.iter().enumerate() {
                dy[r] = sol[a];
            }
        }
        Some((dy, df))
    }
}

/// Least-norm projection onto the equality subspace, used to polish a
/// near-feasible interior point to machine-precision feasibility. The row
/// Gram matrix does not depend on the iterate and is factored once.
struct Polisher {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Polisher {
    fn build(prep: &Prep) -> Option<Self> {
        let m = prep.m();
        let mut g = DMatrix::zeros(m, m);
        for (bidx, rows_of_block) in prep.block_rows.iter().enumerate() {
            for (ai, &gi) in rows_of_block.iter().enumerate() {
                let entries_i = prep.rows[gi]
                    .blocks
                    .iter()
                    .find(|(bb, _)| *bb == bidx)
                    .map(|(_, e)| e.as_slice())
                    .unwrap();
                for &gj in rows_of_block.iter().skip(ai) {
                    let entries_j = prep.rows[gj]
                        .blocks
                        .iter()
                        .find(|(bb, _)| *bb == bidx)
                        .map(|(_, e)| e.as_slice())
                        .unwrap();
                    // inner product of two sparse symmetric matrices with
                    // off-diagonal entries counted twice
                    let mut acc = 0.0;
                    for &(r1, c1, v1) in entries_i {
                        for &(r2, c2, v2) in entries_j {
                            if r1 == r2 && c1 == c2 {
                                acc += v1 * v2 * if r1 == c1 { 1.0 } else { 2.0 };
                            }
                        }
                    }
                    g[(gi, gj)] += acc;
                    if gi != gj {
                        g[(gj, gi)] += acc;
                    }
                }
            }
        }
        for (i, row) in prep.rows.iter().enumerate() {
            for &(jf, v) in &row.free {
                for (i2, row2) in prep.rows.iter().enumerate().skip(i) {
                    for &(jf2, v2) in &row2.free {
                        if jf == jf2 {
                            g[(i, i2)] += v * v2;
                            if i != i2 {
                                g[(i2, i)] += v * v2;
                            }
                        }
                    }
                }
            }
        }
        let (chol, _) = chol_with_jitter(&g)?;
        Some(Polisher { chol })
    }

    /// One least-norm correction onto the equality subspace.
    fn project_affine(
        &self,
        prep: &Prep,
        grams: &mut [DMatrix<f64>],
        free: &mut DVector<f64>,
    ) {
        let ax = prep.apply_a(grams, free);
        let r = &prep.b - &ax;
        let lam = self.chol.solve(&r);
        for (i, row) in prep.rows.iter().enumerate() {
            let li = lam[i];
            if li == 0.0 {
                continue;
            }
            for (bidx, entries) in &row.blocks {
                let g = &mut grams[*bidx];
                for &(rr, cc, v) in entries {
                    g[(rr, cc)] += li * v;
                    if rr != cc {
                        g[(cc, rr)] += li * v;
                    }
                }
            }
            for &(jf, v) in &row.free {
                free[jf] += li * v;
            }
        }
    }

    /// Alternate affine projection with eigenvalue clipping so a point that
    /// sits on a flat face of the cone still polishes to a feasible PSD
    /// point, then finish with affine corrections.
    fn polish(
        &self,
        prep: &Prep,
        grams: &mut [DMatrix<f64>],
        free: &mut DVector<f64>,
    ) {
        for _ in 0..3 {
            self.project_affine(prep, grams, free);
            for g in grams.iter_mut() {
                let eig = nalgebra::SymmetricEigen::new(g.clone());
                if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
                    continue;
                }
                let mut clipped = DMatrix::zeros(g.nrows(), g.ncols());
                for (ci, &l) in eig.eigenvalues.iter().enumerate() {
                    if l > 0.0 {
                        let v = eig.eigenvectors.column(ci);
                        clipped.ger(l, &v.clone_owned(), &v.clone_owned(), 1.0);
                    }
                }
                symmetrize(&mut clipped);
                *g = clipped;
            }
        }
        self.project_affine(prep, grams, free);
        self.project_affine(prep, grams, free);
    }
}

fn build_m_dense(prep: &Prep, t: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = prep.m();
    let mut out = DMatrix::zeros(m, m);
    for (bidx, rows_of_block) in prep.block_rows.iter().enumerate() {
        let tb = &t[bidx];
        for &gi in rows_of_block {
            let entries_i = prep.rows[gi]
                .blocks
                .iter()
                .find(|(bb, _)| *bb == bidx)
                .map(|(_, e)| e.as_slice())
                .unwrap();
            let w = t_a_t(tb, entries_i);
            for &gj in rows_of_block {
                if gj > gi {
                    continue;
                }
                let entries_j = prep.rows[gj]
                    .blocks
                    .iter()
                    .find(|(bb, _)| *bb == bidx)
                    .map(|(_, e)| e.as_slice())
                    .unwrap();
                let v = sparse_dot(&w, entries_j);
                out[(gi, gj)] += v;
                if gi != gj {
                    out[(gj, gi)] += v;
                }
            }
        }
    }
    out
}

fn package_infeasible(
    p: &SdpProblem,
    y: Vec<f64>,
    iterations: usize,
    reason: &str,
) -> Option<SdpSolution> {
    validate_infeasibility_certificate(p, &y, 1e-6).ok()?;
    let by: f64 = p
        .equalities
        .iter()
        .zip(&y)
        .map(|(eq, &yi)| eq.rhs * yi)
        .sum();
    let y: Vec<f64> = y.iter().map(|v| v / by).collect();
    Some(SdpSolution {
        status: SdpStatus::Infeasible,
        gram: p.block_dims.iter().map(|&d| SymMatrix::zeros(d)).collect(),
        free: vec![0.0; p.nfree],
        dual: y.clone(),
        metrics: SolveMetrics {
            primal_residual: f64::INFINITY,
            dual_residual: 0.0,
            min_block_eigenvalues: vec![0.0; p.block_dims.len()],
            iterations,
            mu: 0.0,
            tau: 0.0,
            kappa: 1.0,
            termination: format!("infeasible: {reason}"),
        },
        infeasibility_certificate: Some(y),
    })
}

/// Solve an SDP feasibility problem with the embedded interior-point method.
pub fn solve(p: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution, SdpError> {
    p.validate_shape()?;
    let total_dim = p.total_psd_dim();
    if total_dim > settings.max_psd_dim {
        return Err(SdpError::DimensionLimit {
            what: "total PSD dimension",
            got: total_dim,
            limit: settings.max_psd_dim,
        });
    }
    if p.equalities.len() > settings.max_equalities {
        return Err(SdpError::DimensionLimit {
            what: "equalities",
            got: p.equalities.len(),
            limit: settings.max_equalities,
        });
    }
    let started = std::time::Instant::now();
    let (prep, early) = Prep::new(p);
    if let Some(sol) = early {
        return Ok(sol);
    }

    let m = prep.m();
    let nu: usize = prep.dims.iter().sum();
    if m == 0 {
        // no constraints: identity blocks are feasible
        let gram: Vec<SymMatrix> = prep.dims.iter().map(|&d| SymMatrix::identity(d)).collect();
        let free = vec![0.0; prep.nf];
        return Ok(SdpSolution {
            status: SdpStatus::Feasible,
            metrics: SolveMetrics {
                primal_residual: 0.0,
                dual_residual: 0.0,
                min_block_eigenvalues: gram.iter().map(|_| 1.0).collect(),
                iterations: 0,
                mu: 0.0,
                tau: 1.0,
                kappa: 0.0,
                termination: "no equalities".into(),
            },
            gram,
            free,
            dual: vec![0.0; p.equalities.len()],
            infeasibility_certificate: None,
        });
    }

    // iterates
    let mut x: Vec<DMatrix<f64>> = prep.dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let mut s: Vec<DMatrix<f64>> = prep.dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let mut f = DVector::zeros(prep.nf);
    let mut y = DVector::zeros(m);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let has_obj = prep.c_blocks.is_some() || prep.c_free.amax() > 0.0;
    let zero_blocks: Vec<DMatrix<f64>> = prep.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let c_blocks = prep.c_blocks.clone().unwrap_or_else(|| zero_blocks.clone());

    let mut iterations = 0usize;
    let mut pres_initial: Option<f64> = None;
    let mut polisher: Option<Option<Polisher>> = None;
    let mut last_polish_at = f64::INFINITY;

    let unknown = |x: &Vec<DMatrix<f64>>,
                   f: &DVector<f64>,
                   y: &DVector<f64>,
                   tau: f64,
                   kappa: f64,
                   mu: f64,
                   iterations: usize,
                   reason: String| {
        let t = tau.max(1e-300);
        let gram: Vec<SymMatrix> = x
            .iter()
            .map(|xb| SymMatrix::from_dmatrix(&(xb / t)))
            .collect();
        let free: Vec<f64> = f.iter().map(|v| v / t).collect();
        let mut dual = vec![0.0; p.equalities.len()];
        for (i, &orig) in prep.row_origin.iter().enumerate() {
            dual[orig] = y[i] * prep.row_scale[i] / t;
        }
        let primal_residual = p.primal_residual(&gram, &free);
        SdpSolution {
            status: SdpStatus::Unknown,
            metrics: SolveMetrics {
                primal_residual,
                dual_residual: f64::NAN,
                min_block_eigenvalues: gram.iter().map(SymMatrix::min_eigenvalue).collect(),
                iterations,
                mu,
                tau,
                kappa,
                termination: reason,
            },
            gram,
            free,
            dual,
            infeasibility_certificate: None,
        }
    };

    let termination: String = loop {
        if iterations >= settings.max_iter {
            break format!("iteration limit {} reached", settings.max_iter);
        }
        if let Some(limit) = settings.time_limit {
            if started.elapsed() > limit {
                break "time limit reached".into();
            }
        }

        // residuals of the embedding
        let ax = prep.apply_a(&x, &f);
        let r_p = &ax - &prep.b * tau;
        let aty = prep.apply_at(&y);
        let mut r_dc: Vec<DMatrix<f64>> = Vec::with_capacity(x.len());
        for bi in 0..x.len() {
            let mut rb = &aty[bi] + &s[bi];
            if has_obj {
                rb -= &c_blocks[bi] * tau;
            }
            r_dc.push(rb);
        }
        let r_f = prep.apply_aft(&y) - &prep.c_free * tau;
        let cx: f64 = if has_obj {
            x.iter()
                .zip(&c_blocks)
                .map(|(xb, cb)| frob_dot(xb, cb))
                .sum::<f64>()
                + prep.c_free.dot(&f)
        } else {
            0.0
        };
        let by = prep.b.dot(&y);
        let r_g = by - cx - kappa;
        let xs: f64 = x.iter().zip(&s).map(|(xb, sb)| frob_dot(xb, sb)).sum();
        let mu = (xs + tau * kappa) / (nu as f64 + 1.0);
        let pres_int = r_p.amax();
        let pres0 = *pres_initial.get_or_insert(pres_int.max(1e-300));
        let dres_int = r_dc
            .iter()
            .map(|rb| rb.amax())
            .fold(r_f.amax(), f64::max);
        // relative distance still to cover, with mu starting at exactly 1
        let res_rel = (pres_int / pres0).max(dres_int).max(r_g.abs());
        if mu < 1e-250 {
            break "numerical breakdown: complementarity underflow".into();
        }
        if tau > 1e10 || x.iter().map(|xb| xb.amax()).fold(0.0, f64::max) > 1e14 {
            break "iterate diverged without certificate".into();
        }
        if settings.verbose {
            let pres_orig = prep
                .rows
                .iter()
                .enumerate()
                .map(|(i, _)| ((ax[i] - prep.b[i] * tau) / (tau.max(1e-300) * prep.row_scale[i])).abs())
                .fold(0.0, f64::max);
            let xmax = x.iter().map(|xb| xb.amax()).fold(0.0, f64::max);
            eprintln!(
                "  it {iterations:3}  mu {mu:9.2e}  pres {pres_orig:9.2e}  tau {tau:9.2e}  kappa {kappa:9.2e}  |X| {xmax:9.2e}  |y| {:9.2e}",
                y.amax()
            );
        }

        // feasibility test on the original problem, with a least-norm
        // polish once the iterate is near-feasible
        if tau > 1e-10 {
            let worst = prep
                .rows
                .iter()
                .enumerate()
                .map(|(i, _)| ((ax[i] - prep.b[i] * tau) / (tau * prep.row_scale[i])).abs())
                .fold(0.0, f64::max);
            if worst > 0.5 * settings.feas_tol && worst <= 1e-3 && worst < 0.7 * last_polish_at {
                last_polish_at = worst;
                let pol = polisher.get_or_insert_with(|| Polisher::build(&prep));
                if let Some(pol) = pol {
                    let mut grams: Vec<DMatrix<f64>> = x.iter().map(|xb| xb / tau).collect();
                    let mut frees = &f / tau;
                    pol.polish(&prep, &mut grams, &mut frees);
                    let gram: Vec<SymMatrix> =
                        grams.iter().map(SymMatrix::from_dmatrix).collect();
                    let free: Vec<f64> = frees.iter().copied().collect();
                    let primal_residual = p.primal_residual(&gram, &free);
                    let min_eigs: Vec<f64> =
                        gram.iter().map(SymMatrix::min_eigenvalue).collect();
                    if primal_residual <= 0.5 * settings.feas_tol
                        && min_eigs.iter().all(|&e| e >= -settings.psd_tol)
                    {
                        let mut dual = vec![0.0; p.equalities.len()];
                        for (i, &orig) in prep.row_origin.iter().enumerate() {
                            dual[orig] = y[i] * prep.row_scale[i] / tau;
                        }
                        let dual_residual = r_dc
                            .iter()
                            .map(|rb| rb.amax() / tau)
                            .fold(r_f.amax() / tau, f64::max);
                        return Ok(SdpSolution {
                            status: SdpStatus::Feasible,
                            metrics: SolveMetrics {
                                primal_residual,
                                dual_residual,
                                min_block_eigenvalues: min_eigs,
                                iterations,
                                mu,
                                tau,
                                kappa,
                                termination: "primal feasible point found (polished)".into(),
                            },
                            gram,
                            free,
                            dual,
                            infeasibility_certificate: None,
                        });
                    }
                }
            }
            if worst <= 0.5 * settings.feas_tol {
                let gram: Vec<SymMatrix> = x
                    .iter()
                    .map(|xb| SymMatrix::from_dmatrix(&(xb / tau)))
                    .collect();
                let free: Vec<f64> = f.iter().map(|v| v / tau).collect();
                let mut dual = vec![0.0; p.equalities.len()];
                for (i, &orig) in prep.row_origin.iter().enumerate() {
                    dual[orig] = y[i] * prep.row_scale[i] / tau;
                }
                let dual_residual = r_dc
                    .iter()
                    .map(|rb| rb.amax() / tau)
                    .fold(r_f.amax() / tau, f64::max);
                let primal_residual = p.primal_residual(&gram, &free);
                return Ok(SdpSolution {
                    status: SdpStatus::Feasible,
                    metrics: SolveMetrics {
                        primal_residual,
                        dual_residual,
                        min_block_eigenvalues: gram
                            .iter()
                            .map(SymMatrix::min_eigenvalue)
                            .collect(),
                        iterations,
                        mu,
                        tau,
                        kappa,
                        termination: "primal feasible point found".into(),
                    },
                    gram,
                    free,
                    dual,
                    infeasibility_certificate: None,
                });
            }
        }

        // infeasibility certificate attempt (original-row multipliers),
        // gated on the embedding actually collapsing towards kappa > 0 = tau
        // so that transient rays of feasible problems are not accepted
        let infeasibility_suspected = kappa > 1e3 * tau || (kappa > 10.0 * tau && mu < 1e-9);
        if infeasibility_suspected && by > 1e-12 * (1.0 + y.amax()) {
            let mut cand = vec![0.0; p.equalities.len()];
            for (i, &orig) in prep.row_origin.iter().enumerate() {
                cand[orig] = y[i] * prep.row_scale[i];
            }
            if validate_infeasibility_certificate(p, &cand, settings.cert_tol).is_ok() {
                let scale: f64 = p
                    .equalities
                    .iter()
                    .zip(&cand)
                    .map(|(eq, &yi)| eq.rhs * yi)
                    .sum();
                let cand: Vec<f64> = cand.iter().map(|v| v / scale).collect();
                let t = tau.max(1e-300);
                let gram: Vec<SymMatrix> = x
                    .iter()
                    .map(|xb| SymMatrix::from_dmatrix(&(xb / t)))
                    .collect();
                let free: Vec<f64> = f.iter().map(|v| v / t).collect();
                return Ok(SdpSolution {
                    status: SdpStatus::Infeasible,
                    metrics: SolveMetrics {
                        primal_residual: p.primal_residual(&gram, &free),
                        dual_residual: 0.0,
                        min_block_eigenvalues: gram
                            .iter()
                            .map(SymMatrix::min_eigenvalue)
                            .collect(),
                        iterations,
                        mu,
                        tau,
                        kappa,
                        termination: "improving ray verified".into(),
                    },
                    gram,
                    free,
                    dual: cand.clone(),
                    infeasibility_certificate: Some(cand),
                });
            }
        }

        // NT scaling per block: W with T = W W', chosen so that the scaled
        // point lambda = W^{-1} X W^{-T} = W' S W comes out diagonal
        let mut chol_x = Vec::with_capacity(x.len());
        let mut chol_s = Vec::with_capacity(x.len());
        let mut t_scal: Vec<DMatrix<f64>> = Vec::with_capacity(x.len());
        let mut s_inv: Vec<DMatrix<f64>> = Vec::with_capacity(x.len());
        let mut w_fac: Vec<DMatrix<f64>> = Vec::with_capacity(x.len());
        let mut w_inv: Vec<DMatrix<f64>> = Vec::with_capacity(x.len());
        let mut lam_diag: Vec<Vec<f64>> = Vec::with_capacity(x.len());
        let mut scaling_ok = true;
        for bi in 0..x.len() {
            let cx = match nalgebra::Cholesky::new(x[bi].clone()) {
                Some(c) => c,
                None => {
                    scaling_ok = false;
                    break;
                }
            };
            let cs = match nalgebra::Cholesky::new(s[bi].clone()) {
                Some(c) => c,
                None => {
                    scaling_ok = false;
                    break;
                }
            };
            let l = cx.l();
            let mut mid = l.transpose() * &s[bi] * &l;
            symmetrize(&mut mid);
            let eig = nalgebra::SymmetricEigen::new(mid);
            let mut w = &l * &eig.eigenvectors;
            let mut lam = Vec::with_capacity(eig.eigenvalues.len());
            for (ci, ev) in eig.eigenvalues.iter().enumerate() {
                let ev = ev.max(1e-300);
                w.column_mut(ci).scale_mut(ev.powf(-0.25));
                lam.push(ev.sqrt());
            }
            let mut t = &w * w.transpose();
            symmetrize(&mut t);
            // W^{-1} = diag(ev^{1/4}) U' L^{-1}
            let linv = match l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows())) {
                Some(v) => v,
                None => {
                    scaling_ok = false;
                    break;
                }
            };
            let mut winv = eig.eigenvectors.transpose() * linv;
            for (ri, ev) in eig.eigenvalues.iter().enumerate() {
                let ev = ev.max(1e-300);
                let sc = ev.powf(0.25);
                winv.row_mut(ri).scale_mut(sc);
            }
            s_inv.push(cs.inverse());
            t_scal.push(t);
            w_fac.push(w);
            w_inv.push(winv);
            lam_diag.push(lam);
            chol_x.push(cx);
            chol_s.push(cs);
        }
        if !scaling_ok {
            break "numerical breakdown: iterate left the cone".into();
        }

        // KKT factorization for this iteration
        let factor = match KktFactor::build(&prep, &t_scal) {
            Some(fct) => fct,
            None => {
                break "numerical breakdown: singular KKT system".into();
            }
        };

        // objective-dependent quantities
        let (u_c, w_c) = if has_obj {
            let tct: Vec<DMatrix<f64>> = t_scal
                .iter()
                .zip(&c_blocks)
                .map(|(t, cb)| {
                    let mut v = t * cb * t;
                    symmetrize(&mut v);
                    v
                })
                .collect();
            let mut u = DVector::zeros(m);
            for (i, row) in prep.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (bidx, entries) in &row.blocks {
                    acc += sparse_dot(&tct[*bidx], entries);
                }
                u[i] = acc;
            }
            let w: f64 = c_blocks
                .iter()
                .zip(&tct)
                .map(|(cb, tb)| frob_dot(cb, tb))
                .sum();
            (u, w)
        } else {
            (DVector::zeros(m), 0.0)
        };

        // tau-column solve (shared by predictor and corrector)
        let rhs_tau_1 = &prep.b + &u_c;
        let rhs_tau_2 = prep.c_free.clone_owned();
        let (y2, f2) = match factor.solve(&prep, &rhs_tau_1, &rhs_tau_2) {
            Some(v) => v,
            None => {
                break "numerical breakdown: singular KKT system".into();
            }
        };

        // per-iteration row images used to assemble right-hand sides
        let a_sinv = {
            let mut v = DVector::zeros(m);
            for (i, row) in prep.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (bidx, entries) in &row.blocks {
                    acc += sparse_dot(&s_inv[*bidx], entries);
                }
                v[i] = acc;
            }
            v
        };
        let a_x = prep.apply_a(&x, &DVector::zeros(prep.nf));
        let v_rd = {
            let trdt: Vec<DMatrix<f64>> = t_scal
                .iter()
                .zip(&r_dc)
                .map(|(t, rb)| {
                    let mut v = t * rb * t;
                    symmetrize(&mut v);
                    v
                })
                .collect();
            let mut v = DVector::zeros(m);
            for (i, row) in prep.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (bidx, entries) in &row.blocks {
                    acc += sparse_dot(&trdt[*bidx], entries);
                }
                v[i] = acc;
            }
            v
        };

        // direction for a centering sigma, tau-kappa target, and optional
        // second-order correction per block (subtracted from the NT target)
        let compute_direction = |sigma: f64,
                                 r_tk: f64,
                                 corr: Option<&Vec<DMatrix<f64>>>|
         -> Option<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>, f64, f64)> {
            let eta = 1.0 - sigma;
            let mut r1 = -&r_p * eta - &a_sinv * (sigma * mu) + &a_x - &v_rd * eta;
            if let Some(corr) = corr {
                for (i, row) in prep.rows.iter().enumerate() {
                    let mut acc = 0.0;
                    for (bidx, entries) in &row.blocks {
                        acc += sparse_dot(&corr[*bidx], entries);
                    }
                    r1[i] += acc;
                }
            }
            let r2 = -&r_f * eta;
            let (y1, f1) = factor.solve(&prep, &r1, &r2)?;
            // d0 = <c, R> + eta <c, T r_d T>
            let d0 = if has_obj {
                let mut acc = 0.0;
                for bi in 0..x.len() {
                    let mut r_b = &s_inv[bi] * (sigma * mu) - &x[bi];
                    if let Some(corr) = corr {
                        r_b -= &corr[bi];
                    }
                    acc += frob_dot(&c_blocks[bi], &r_b);
                    let mut trdt = &t_scal[bi] * &r_dc[bi] * &t_scal[bi];
                    symmetrize(&mut trdt);
                    acc += eta * frob_dot(&c_blocks[bi], &trdt);
                }
                acc
            } else {
                0.0
            };
            let bu = &prep.b - &u_c;
            let den = bu.dot(&y2) - prep.c_free.dot(&f2) + w_c + kappa / tau;
            if !(den.is_finite() && den.abs() > 1e-300) {
                return None;
            }
            let num = -eta * r_g + d0 - bu.dot(&y1) + prep.c_free.dot(&f1) + r_tk / tau;
            let dtau = num / den;
            let dy = &y1 + &y2 * dtau;
            let df = &f1 + &f2 * dtau;
            let dkappa = (r_tk - kappa * dtau) / tau;
            let at_dy = prep.apply_at(&dy);
            let mut ds = Vec::with_capacity(x.len());
            let mut dx = Vec::with_capacity(x.len());
            for bi in 0..x.len() {
                let mut dsb = -&at_dy[bi] - &r_dc[bi] * eta;
                if has_obj {
                    dsb += &c_blocks[bi] * dtau;
                }
                symmetrize(&mut dsb);
                let mut r_b = &s_inv[bi] * (sigma * mu) - &x[bi];
                if let Some(corr) = corr {
                    r_b -= &corr[bi];
                }
                let mut dxb = &r_b - &(&t_scal[bi] * &dsb * &t_scal[bi]);
                symmetrize(&mut dxb);
                if dxb.iter().any(|v| !v.is_finite()) || dsb.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                ds.push(dsb);
                dx.push(dxb);
            }
            if !dtau.is_finite() || !dkappa.is_finite() {
                return None;
            }
            Some((dx, ds, dy, df, dtau, dkappa))
        };

        let step_bound = |dx: &[DMatrix<f64>], ds: &[DMatrix<f64>], dtau: f64, dkappa: f64| -> Option<f64> {
            let mut alpha = f64::INFINITY;
            for bi in 0..x.len() {
                alpha = alpha.min(max_step_psd(&chol_x[bi].l(), &dx[bi])?);
                alpha = alpha.min(max_step_psd(&chol_s[bi].l(), &ds[bi])?);
            }
            alpha = alpha.min(max_step_scalar(tau, dtau));
            alpha = alpha.min(max_step_scalar(kappa, dkappa));
            Some(alpha)
        };

        // predictor
        let aff = compute_direction(0.0, -tau * kappa, None);
        let (adx, ads, _ady, _adf, adtau, adkappa) = match aff {
            Some(v) => v,
            None => {
                break "numerical breakdown: predictor failed".into();
            }
        };
        let alpha_aff = match step_bound(&adx, &ads, adtau, adkappa) {
            Some(a) => a.min(1.0),
            None => {
                break "numerical breakdown: step computation failed".into();
            }
        };
        let mut xs_aff = 0.0;
        for bi in 0..x.len() {
            let xn = &x[bi] + &adx[bi] * alpha_aff;
            let sn = &s[bi] + &ads[bi] * alpha_aff;
            xs_aff += frob_dot(&xn, &sn);
        }
        let mu_aff = (xs_aff + (tau + alpha_aff * adtau) * (kappa + alpha_aff * adkappa))
            / (nu as f64 + 1.0);
        let mut sigma = (mu_aff / mu).max(0.0).powi(3).clamp(1e-8, 1.0 - 1e-8);
        // keep complementarity from outrunning the linear residuals: once mu
        // is far below the remaining (relative) residual, recenter instead
        // of pushing mu further down
        if mu < 1e-2 * res_rel {
            sigma = sigma.max(0.9);
        }

        // second-order correction: in the W basis lambda is diagonal, so
        // the Lyapunov solve against sym(dXaff_scaled * dSaff_scaled) is an
        // elementwise divide by (lambda_i + lambda_j)
        let corr: Vec<DMatrix<f64>> = (0..x.len())
            .map(|bi| {
                let dxs = &w_inv[bi] * &adx[bi] * w_inv[bi].transpose();
                let dss = w_fac[bi].transpose() * &ads[bi] * &w_fac[bi];
                let mut prod = &dxs * &dss;
                symmetrize(&mut prod);
                let lam = &lam_diag[bi];
                let n = prod.nrows();
                for i in 0..n {
                    for j in 0..n {
                        prod[(i, j)] *= 2.0 / (lam[i] + lam[j]);
                    }
                }
                let mut out = &w_fac[bi] * prod * w_fac[bi].transpose();
                symmetrize(&mut out);
                out
            })
            .collect();

        // corrector
        let r_tk = sigma * mu - tau * kappa - adtau * adkappa;
        let dir = compute_direction(sigma, r_tk, Some(&corr));
        let (dx, ds, dy, df, dtau, dkappa) = match dir {
            Some(v) => v,
            None => {
                break "numerical breakdown: corrector failed".into();
            }
        };
        let alpha_max = match step_bound(&dx, &ds, dtau, dkappa) {
            Some(a) => a,
            None => {
                break "numerical breakdown: step computation failed".into();
            }
        };
        let mut alpha = (0.99 * alpha_max).min(1.0);

        // cone-preserving backtracking: accept the largest halving of alpha
        // whose trial point factorizes
        let mut stepped = false;
        for _ in 0..30 {
            if alpha < 1e-12 {
                break;
            }
            let trial_tau = tau + alpha * dtau;
            let trial_kappa = kappa + alpha * dkappa;
            if trial_tau <= 0.0 || trial_kappa <= 0.0 {
                alpha *= 0.5;
                continue;
            }
            let mut ok = true;
            let mut xt = Vec::with_capacity(x.len());
            let mut st = Vec::with_capacity(x.len());
            for bi in 0..x.len() {
                let mut xn = &x[bi] + &dx[bi] * alpha;
                let mut sn = &s[bi] + &ds[bi] * alpha;
                symmetrize(&mut xn);
                symmetrize(&mut sn);
                if nalgebra::Cholesky::new(xn.clone()).is_none()
                    || nalgebra::Cholesky::new(sn.clone()).is_none()
                {
                    ok = false;
                    break;
                }
                xt.push(xn);
                st.push(sn);
            }
            if !ok {
                alpha *= 0.5;
                continue;
            }
            x = xt;
            s = st;
            y += &dy * alpha;
            f += &df * alpha;
            tau = trial_tau;
            kappa = trial_kappa;
            stepped = true;
            break;
        }
        if !stepped {
            break "numerical breakdown: step collapsed".into();
        }
        iterations += 1;

        if mu.is_nan() || tau <= 0.0 || kappa < 0.0 {
            break "numerical breakdown: invalid iterate".into();
        }
    };

    let xs: f64 = x.iter().zip(&s).map(|(xb, sb)| frob_dot(xb, sb)).sum();
    let mu = (xs + tau * kappa) / (nu as f64 + 1.0);
    Ok(unknown(&x, &f, &y, tau, kappa, mu, iterations, termination))
}

#[cfg(test)]
mod tests {
    use super::super::*;

    fn one_by_one(rhs: f64) -> SdpProblem {
        SdpProblem {
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
        }
    }

    /// Coefficient matching for "x^2 + 1 is a sum of squares" over [1, x]:
    /// Q00 = 1, 2*Q10 = 0, Q11 = 1.
    fn sos_x2_plus_1() -> SdpProblem {
        let eq = |entries: Vec<(usize, usize, f64)>, rhs: f64| Equality {
            blocks: vec![BlockEntries { block: 0, entries }],
            free: vec![],
            rhs,
        };
        SdpProblem {
            block_dims: vec![2],
            nfree: 0,
            equalities: vec![
                eq(vec![(0, 0, 1.0)], 1.0),
                eq(vec![(1, 0, 1.0)], 0.0),
                eq(vec![(1, 1, 1.0)], 1.0),
            ],
            objective: None,
        }
    }

    #[test]
    fn unit_feasible() {
        let p = one_by_one(1.0);
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert!((sol.gram[0].get(0, 0) - 1.0).abs() < 1e-6);
        assert!(sol.metrics.primal_residual <= 1e-8);
        assert!(sol.metrics.min_block_eigenvalues[0] >= -1e-8);
    }

    #[test]
    fn unit_infeasible_with_certificate() {
        let p = one_by_one(-1.0);
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        let cert = sol.infeasibility_certificate.unwrap();
        validate_infeasibility_certificate(&p, &cert, 1e-6).unwrap();
    }

    #[test]
    fn sos_gram_is_identity() {
        let p = sos_x2_plus_1();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        // the equality manifold pins the Gram to the identity
        assert!((sol.gram[0].get(0, 0) - 1.0).abs() < 1e-6);
        assert!((sol.gram[0].get(1, 1) - 1.0).abs() < 1e-6);
        assert!(sol.gram[0].get(1, 0).abs() < 1e-6);
        assert!(sol.metrics.primal_residual <= 1e-8);
    }

    #[test]
    fn off_diagonal_too_large_is_infeasible() {
        // X00 = 1, X11 = 1, X10 = 5 cannot be PSD
        let eq = |entries: Vec<(usize, usize, f64)>, rhs: f64| Equality {
            blocks: vec![BlockEntries { block: 0, entries }],
            free: vec![],
            rhs,
        };
        let p = SdpProblem {
            block_dims: vec![2],
            nfree: 0,
            equalities: vec![
                eq(vec![(0, 0, 1.0)], 1.0),
                eq(vec![(1, 1, 1.0)], 1.0),
                eq(vec![(1, 0, 1.0)], 10.0),
            ],
            objective: None,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        validate_infeasibility_certificate(&p, &sol.infeasibility_certificate.unwrap(), 1e-6)
            .unwrap();
    }

    #[test]
    fn free_variables_in_kkt() {
        // X (1x1) with X + f = 3 and X - f = 1: X = 2, f = 1
        let p = SdpProblem {
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
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert!((sol.gram[0].get(0, 0) - 2.0).abs() < 1e-6);
        assert!((sol.free[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_only_rows_use_dense_path() {
        // f1 + f2 = 3, f1 - f2 = 1 with one unconstrained block alongside
        let p = SdpProblem {
            block_dims: vec![],
            nfree: 2,
            equalities: vec![
                Equality {
                    blocks: vec![],
                    free: vec![(0, 1.0), (1, 1.0)],
                    rhs: 3.0,
                },
                Equality {
                    blocks: vec![],
                    free: vec![(0, 1.0), (1, -1.0)],
                    rhs: 1.0,
                },
            ],
            objective: None,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert!((sol.free[0] - 2.0).abs() < 1e-6);
        assert!((sol.free[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contradictory_constant_row() {
        let p = SdpProblem {
            block_dims: vec![1],
            nfree: 0,
            equalities: vec![Equality {
                blocks: vec![],
                free: vec![],
                rhs: 5.0,
            }],
            objective: None,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_reports_unknown() {
        let mut settings = SolverSettings::default();
        settings.max_iter = 0;
        let sol = solve(&sos_x2_plus_1(), &settings).unwrap();
        assert_eq!(sol.status, SdpStatus::Unknown);
        assert!(sol.metrics.termination.contains("iteration limit"));
    }

    #[test]
    fn dimension_limits_enforced() {
        let mut settings = SolverSettings::default();
        settings.max_psd_dim = 1;
        let err = solve(&sos_x2_plus_1(), &settings).unwrap_err();
        assert!(matches!(err, SdpError::DimensionLimit { .. }));
    }

    #[test]
    fn deterministic_solutions() {
        let p = sos_x2_plus_1();
        let s1 = solve(&p, &SolverSettings::default()).unwrap();
        let s2 = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
    }

    #[test]
    fn row_scaling_does_not_change_status() {
        for base in [one_by_one(1.0), one_by_one(-1.0), sos_x2_plus_1()] {
            let mut scaled = base.clone();
            for eq in &mut scaled.equalities {
                eq.rhs *= 1e3;
                for be in &mut eq.blocks {
                    for e in &mut be.entries {
                        e.2 *= 1e3;
                    }
                }
                for f in &mut eq.free {
                    f.1 *= 1e3;
                }
            }
            let a = solve(&base, &SolverSettings::default()).unwrap();
            let b = solve(&scaled, &SolverSettings::default()).unwrap();
            assert_eq!(a.status, b.status);
        }
    }

    #[test]
    fn feasible_and_infeasible_witnesses_exclude_each_other() {
        // a feasible problem admits no valid improving ray
        let p = one_by_one(1.0);
        for cand in [vec![1.0], vec![-1.0], vec![0.5]] {
            assert!(validate_infeasibility_certificate(&p, &cand, 1e-6).is_err());
        }
        // an infeasible problem's certificate validates, while claimed
        // feasible points do not
        let q = one_by_one(-1.0);
        validate_infeasibility_certificate(&q, &[-1.0], 1e-6).unwrap();
        let claimed = [SymMatrix::identity(1)];
        assert!(validate_solution(&q, &claimed, &[], 1e-8, 1e-8).is_err());
    }
}
