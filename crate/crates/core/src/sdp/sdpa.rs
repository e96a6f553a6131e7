//! Sparse SDPA interchange: problem export/import and solution import.
//!
//! Problems are written in the sparse `.dat-s` format with our PSD variables
//! on the SDPA dual side: constraint matrices are the equality coefficient
//! matrices and the right-hand side becomes the SDPA cost vector. Free
//! scalars are exported with the standard split `f = u - v`, `u, v >= 0`,
//! encoded as one trailing diagonal block of size `2 * nfree`; the embedded
//! solver never sees that split. Importing a `.dat-s` file yields a problem
//! whose diagonal blocks reappear as 1x1 blocks, equivalent to the original
//! up to the split. Solution files use the SDPA output layout (`xVec`,
//! `yMat`); residual metrics are recomputed from scratch on import.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    BlockEntries, Equality, SdpError, SdpProblem, SdpSolution, SdpStatus, SolveMetrics,
    SolverSettings, SymMatrix,
};

fn fmt_val(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

/// Write `p` in sparse SDPA format (`.dat-s`).
pub fn export_sdpa(p: &SdpProblem, path: &Path) -> Result<(), SdpError> {
    let text = render_sdpa(p)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Render the sparse SDPA text for `p`.
pub fn render_sdpa(p: &SdpProblem) -> Result<String, SdpError> {
    if p.block_dims.is_empty() && p.nfree == 0 {
        return Err(SdpError::NothingToExport);
    }
    p.validate_shape().map_err(|e| SdpError::StructureMismatch(e.to_string()))?;
    let mut out = String::new();
    let m = p.equalities.len();
    let nblocks = p.block_dims.len() + usize::from(p.nfree > 0);
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{nblocks}").unwrap();
    let mut sizes: Vec<String> = p.block_dims.iter().map(|d| d.to_string()).collect();
    if p.nfree > 0 {
        sizes.push(format!("-{}", 2 * p.nfree));
    }
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let rhs: Vec<String> = p.equalities.iter().map(|eq| fmt_val(eq.rhs)).collect();
    writeln!(out, "{}", rhs.join(" ")).unwrap();
    let write_entries = |matno: usize, eq: &Equality, out: &mut String| {
        for be in &eq.blocks {
            for &(r, c, v) in &be.entries {
                // upper triangle, 1-based
                let (i, j) = (c + 1, r + 1);
                writeln!(out, "{matno} {} {i} {j} {}", be.block + 1, fmt_val(v)).unwrap();
            }
        }
        let diag_block = p.block_dims.len() + 1;
        for &(j, v) in &eq.free {
            writeln!(out, "{matno} {diag_block} {} {} {}", j + 1, j + 1, fmt_val(v)).unwrap();
            writeln!(
                out,
                "{matno} {diag_block} {} {} {}",
                p.nfree + j + 1,
                p.nfree + j + 1,
                fmt_val(-v)
            )
            .unwrap();
        }
    };
    if let Some(obj) = &p.objective {
        write_entries(0, obj, &mut out);
    }
    for (i, eq) in p.equalities.iter().enumerate() {
        write_entries(i + 1, eq, &mut out);
    }
    Ok(out)
}

struct TokStream<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> TokStream<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    /// Next whitespace/comma/brace-separated token, skipping comment lines.
    fn next_tok(&mut self) -> Option<(&'a str, usize)> {
        let bytes = self.text.as_bytes();
        loop {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_whitespace()
                    || matches!(bytes[self.pos], b',' | b'{' | b'}' | b'(' | b')'))
            {
                self.pos += 1;
            }
            if self.pos >= bytes.len() {
                return None;
            }
            if bytes[self.pos] == b'*' || bytes[self.pos] == b'"' {
                while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            let start = self.pos;
            while self.pos < bytes.len()
                && !bytes[self.pos].is_ascii_whitespace()
                && !matches!(bytes[self.pos], b',' | b'{' | b'}' | b'(' | b')')
            {
                self.pos += 1;
            }
            return Some((&self.text[start..self.pos], start));
        }
    }

    fn next_int(&mut self, what: &str) -> Result<(i64, usize), SdpError> {
        let end = self.text.len();
        let (tok, off) = self.next_tok().ok_or(SdpError::Parse {
            offset: end,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        tok.parse().map(|v| (v, off)).map_err(|_| SdpError::Parse {
            offset: off,
            msg: format!("expected {what}, found '{tok}'"),
        })
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, SdpError> {
        let end = self.text.len();
        let (tok, off) = self.next_tok().ok_or(SdpError::Parse {
            offset: end,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        tok.parse().map_err(|_| SdpError::Parse {
            offset: off,
            msg: format!("expected {what}, found '{tok}'"),
        })
    }
}

/// Read a sparse SDPA problem file. Diagonal blocks become 1x1 PSD blocks.
pub fn import_sdpa(path: &Path) -> Result<SdpProblem, SdpError> {
    let text = std::fs::read_to_string(path)?;
    parse_sdpa(&text)
}

/// Parse sparse SDPA text.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let mut ts = TokStream::new(text);
    let (m, off) = ts.next_int("constraint count")?;
    if m < 0 {
        return Err(SdpError::Parse {
            offset: off,
            msg: "negative constraint count".into(),
        });
    }
    let m = m as usize;
    let (nblocks, off) = ts.next_int("block count")?;
    if nblocks <= 0 {
        return Err(SdpError::Parse {
            offset: off,
            msg: "block count must be positive".into(),
        });
    }
    // expand each declared block into contiguous 1x1 blocks when diagonal
    let mut block_dims: Vec<usize> = Vec::new();
    let mut block_base: Vec<(usize, bool)> = Vec::new(); // (first index, is_diagonal)
    for _ in 0..nblocks {
        let (size, off) = ts.next_int("block size")?;
        if size == 0 {
            return Err(SdpError::Parse {
                offset: off,
                msg: "zero block size".into(),
            });
        }
        if size > 0 {
            block_base.push((block_dims.len(), false));
            block_dims.push(size as usize);
        } else {
            block_base.push((block_dims.len(), true));
            for _ in 0..(-size) as usize {
                block_dims.push(1);
            }
        }
    }
    let mut equalities: Vec<Equality> = (0..m)
        .map(|_| Equality {
            blocks: Vec::new(),
            free: Vec::new(),
            rhs: 0.0,
        })
        .collect();
    for eq in equalities.iter_mut() {
        eq.rhs = ts.next_f64("right-hand side value")?;
    }
    let mut objective = Equality::default();
    let mut has_objective = false;
    loop {
        let (matno, off) = match ts.next_tok() {
            None => break,
            Some((tok, off)) => (
                tok.parse::<usize>().map_err(|_| SdpError::Parse {
                    offset: off,
                    msg: format!("expected matrix number, found '{tok}'"),
                })?,
                off,
            ),
        };
        if matno > m {
            return Err(SdpError::Parse {
                offset: off,
                msg: format!("matrix number {matno} out of range 0..={m}"),
            });
        }
        let (blkno, boff) = ts.next_int("block number")?;
        if blkno < 1 || blkno as usize > block_base.len() {
            return Err(SdpError::Parse {
                offset: boff,
                msg: format!("block number {blkno} out of range"),
            });
        }
        let (i, ioff) = ts.next_int("row index")?;
        let (j, _joff) = ts.next_int("column index")?;
        let v = ts.next_f64("entry value")?;
        let (base, is_diag) = block_base[blkno as usize - 1];
        let (block, entry) = if is_diag {
            if i != j {
                return Err(SdpError::Parse {
                    offset: ioff,
                    msg: "off-diagonal entry in a diagonal block".into(),
                });
            }
            (base + (i as usize) - 1, (0usize, 0usize, v))
        } else {
            let d = block_dims[base] as i64;
            if i < 1 || j < 1 || i > d || j > d {
                return Err(SdpError::Parse {
                    offset: ioff,
                    msg: "matrix entry out of range".into(),
                });
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            (base, ((r as usize) - 1, (c as usize) - 1, v))
        };
        let target = if matno == 0 {
            has_objective = true;
            &mut objective
        } else {
            &mut equalities[matno - 1]
        };
        match target.blocks.iter_mut().find(|be| be.block == block) {
            Some(be) => be.entries.push(entry),
            None => target.blocks.push(BlockEntries {
                block,
                entries: vec![entry],
            }),
        }
    }
    Ok(SdpProblem {
        block_dims,
        nfree: 0,
        equalities,
        objective: has_objective.then_some(objective),
    })
}

/// Write a solution in the SDPA output layout: `xVec` carries the equality
/// multipliers, `yMat` the block matrices with free scalars split into the
/// trailing diagonal block.
pub fn write_solution_sdpa(
    p: &SdpProblem,
    sol: &SdpSolution,
    path: &Path,
) -> Result<(), SdpError> {
    let mut out = String::new();
    let xvec: Vec<String> = sol.dual.iter().map(|v| fmt_val(*v)).collect();
    writeln!(out, "xVec = {{{}}}", xvec.join(", ")).unwrap();
    writeln!(out, "yMat = {{").unwrap();
    for g in &sol.gram {
        let rows: Vec<String> = (0..g.dim)
            .map(|r| {
                let cols: Vec<String> = (0..g.dim).map(|c| fmt_val(g.get(r, c))).collect();
                format!("{{ {} }}", cols.join(", "))
            })
            .collect();
        writeln!(out, "{{ {} }}", rows.join(", ")).unwrap();
    }
    if p.nfree > 0 {
        let mut diag = Vec::with_capacity(2 * p.nfree);
        for &v in &sol.free {
            diag.push(fmt_val(v.max(0.0)));
        }
        for &v in &sol.free {
            diag.push(fmt_val((-v).max(0.0)));
        }
        writeln!(out, "{{ {} }}", diag.join(", ")).unwrap();
    }
    writeln!(out, "}}").unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// Nested-brace values: a number or a group.
enum BraceTree {
    Leaf(f64),
    Group(Vec<BraceTree>),
}

fn parse_brace_group(text: &str, pos: &mut usize) -> Result<BraceTree, SdpError> {
    let bytes = text.as_bytes();
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(SdpError::Parse {
            offset: bytes.len(),
            msg: "unexpected end of file in value group".into(),
        });
    }
    if bytes[*pos] == b'{' {
        *pos += 1;
        let mut items = Vec::new();
        loop {
            while *pos < bytes.len()
                && (bytes[*pos].is_ascii_whitespace() || bytes[*pos] == b',')
            {
                *pos += 1;
            }
            if *pos >= bytes.len() {
                return Err(SdpError::Parse {
                    offset: bytes.len(),
                    msg: "unbalanced '{' in value group".into(),
                });
            }
            if bytes[*pos] == b'}' {
                *pos += 1;
                return Ok(BraceTree::Group(items));
            }
            items.push(parse_brace_group(text, pos)?);
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !matches!(bytes[*pos], b',' | b'}' | b'{') && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let tok = &text[start..*pos];
    tok.parse::<f64>()
        .map(BraceTree::Leaf)
        .map_err(|_| SdpError::Parse {
            offset: start,
            msg: format!("expected a number, found '{tok}'"),
        })
}

fn flatten(tree: &BraceTree, out: &mut Vec<f64>) {
    match tree {
        BraceTree::Leaf(v) => out.push(*v),
        BraceTree::Group(items) => {
            for it in items {
                flatten(it, out);
            }
        }
    }
}

/// Read a solution in SDPA output layout and reconstitute it against `p`,
/// re-merging split free-variable pairs and recomputing all metrics.
pub fn import_solution(
    path: &Path,
    p: &SdpProblem,
    settings: &SolverSettings,
) -> Result<SdpSolution, SdpError> {
    let text = std::fs::read_to_string(path)?;
    parse_solution(&text, p, settings)
}

/// Parse an SDPA-layout solution against the problem's block structure.
pub fn parse_solution(
    text: &str,
    p: &SdpProblem,
    settings: &SolverSettings,
) -> Result<SdpSolution, SdpError> {
    let dual = match text.find("xVec") {
        Some(ix) => {
            let eq = text[ix..].find('=').map(|o| ix + o + 1).ok_or(SdpError::Parse {
                offset: ix,
                msg: "expected '=' after xVec".into(),
            })?;
            let mut pos = eq;
            let tree = parse_brace_group(text, &mut pos)?;
            let mut vals = Vec::new();
            flatten(&tree, &mut vals);
            vals
        }
        None => vec![0.0; p.equalities.len()],
    };
    if dual.len() != p.equalities.len() {
        return Err(SdpError::StructureMismatch(format!(
            "xVec has {} entries, problem has {} equalities",
            dual.len(),
            p.equalities.len()
        )));
    }
    let ymat_ix = text.find("yMat").ok_or(SdpError::Parse {
        offset: text.len(),
        msg: "missing yMat section".into(),
    })?;
    let eq = text[ymat_ix..]
        .find('=')
        .map(|o| ymat_ix + o + 1)
        .ok_or(SdpError::Parse {
            offset: ymat_ix,
            msg: "expected '=' after yMat".into(),
        })?;
    let mut pos = eq;
    let tree = parse_brace_group(text, &mut pos)?;
    let blocks = match tree {
        BraceTree::Group(items) => items,
        BraceTree::Leaf(_) => {
            return Err(SdpError::Parse {
                offset: eq,
                msg: "yMat must be a brace group".into(),
            })
        }
    };
    let expected = p.block_dims.len() + usize::from(p.nfree > 0);
    if blocks.len() != expected {
        return Err(SdpError::StructureMismatch(format!(
            "yMat has {} blocks, expected {expected}",
            blocks.len()
        )));
    }
    let mut gram = Vec::with_capacity(p.block_dims.len());
    for (bi, &d) in p.block_dims.iter().enumerate() {
        let mut vals = Vec::new();
        flatten(&blocks[bi], &mut vals);
        let mut mat = SymMatrix::zeros(d);
        if vals.len() == d * d {
            for r in 0..d {
                for c in 0..d {
                    mat.data[r * d + c] = vals[r * d + c];
                }
            }
            // enforce symmetry of the stored values
            for r in 0..d {
                for c in 0..r {
                    let v = 0.5 * (mat.get(r, c) + mat.get(c, r));
                    mat.set(r, c, v);
                }
            }
        } else if vals.len() == d * (d + 1) / 2 {
            let mut k = 0;
            for r in 0..d {
                for c in 0..=r {
                    mat.set(r, c, vals[k]);
                    k += 1;
                }
            }
        } else {
            return Err(SdpError::StructureMismatch(format!(
                "block {bi} has {} values, expected {} or {}",
                vals.len(),
                d * d,
                d * (d + 1) / 2
            )));
        }
        gram.push(mat);
    }
    let mut free = vec![0.0; p.nfree];
    if p.nfree > 0 {
        let mut vals = Vec::new();
        flatten(&blocks[p.block_dims.len()], &mut vals);
        if vals.len() != 2 * p.nfree {
            return Err(SdpError::StructureMismatch(format!(
                "free-variable block has {} values, expected {}",
                vals.len(),
                2 * p.nfree
            )));
        }
        for j in 0..p.nfree {
            free[j] = vals[j] - vals[p.nfree + j];
        }
    }
    let primal_residual = p.primal_residual(&gram, &free);
    let min_eigs: Vec<f64> = gram.iter().map(SymMatrix::min_eigenvalue).collect();
    let feasible = primal_residual <= settings.feas_tol
        && min_eigs.iter().all(|&e| e >= -settings.psd_tol);
    Ok(SdpSolution {
        status: if feasible {
            SdpStatus::Feasible
        } else {
            SdpStatus::Unknown
        },
        gram,
        free,
        dual,
        metrics: SolveMetrics {
            primal_residual,
            dual_residual: f64::NAN,
            min_block_eigenvalues: min_eigs,
            iterations: 0,
            mu: f64::NAN,
            tau: 1.0,
            kappa: f64::NAN,
            termination: "imported".into(),
        },
        infeasibility_certificate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{solve, SolverSettings};
    use super::*;

    fn unit_problem(rhs: f64) -> SdpProblem {
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

    #[test]
    fn export_golden_unit() {
        let text = render_sdpa(&unit_problem(1.0)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "1");
        assert_eq!(lines[1], "1");
        assert_eq!(lines[2], "1");
        assert_eq!(lines[3], "1.0");
        assert_eq!(lines[4], "1 1 1 1 1.0");
    }

    #[test]
    fn empty_problem_rejected() {
        let p = SdpProblem::default();
        assert!(matches!(render_sdpa(&p), Err(SdpError::NothingToExport)));
    }

    #[test]
    fn problem_round_trip_up_to_free_split() {
        for (name, p) in crate::corpus::sdp_corpus() {
            let text = render_sdpa(&p).unwrap();
            let q = parse_sdpa(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let mut expected_dims = p.block_dims.clone();
            for _ in 0..2 * p.nfree {
                expected_dims.push(1);
            }
            assert_eq!(q.block_dims, expected_dims, "{name}");
            assert_eq!(q.nfree, 0, "{name}");
            assert_eq!(q.equalities.len(), p.equalities.len(), "{name}");
            for (a, b) in p.equalities.iter().zip(&q.equalities) {
                assert_eq!(a.rhs, b.rhs, "{name}");
                let nnz_a: usize =
                    a.blocks.iter().map(|be| be.entries.len()).sum::<usize>() + 2 * a.free.len();
                let nnz_b: usize = b.blocks.iter().map(|be| be.entries.len()).sum();
                assert_eq!(nnz_a, nnz_b, "{name}");
            }
        }
    }

    #[test]
    fn solution_round_trip_recomputes_metrics() {
        let p = unit_problem(1.0);
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        let dir = std::env::temp_dir().join("polysep-sdpa-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("unit.out");
        write_solution_sdpa(&p, &sol, &path).unwrap();
        let imported = import_solution(&path, &p, &SolverSettings::default()).unwrap();
        assert_eq!(imported.status, SdpStatus::Feasible);
        assert!(imported.metrics.primal_residual <= 1e-8);
        assert!((imported.gram[0].get(0, 0) - sol.gram[0].get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn free_variables_remerge() {
        let p = SdpProblem {
            block_dims: vec![1],
            nfree: 2,
            equalities: vec![Equality {
                blocks: vec![BlockEntries {
                    block: 0,
                    entries: vec![(0, 0, 1.0)],
                }],
                free: vec![(0, 1.0), (1, -2.0)],
                rhs: 0.0,
            }],
            objective: None,
        };
        let text = "xVec = {0.25}\nyMat = {\n{ 1.5 }\n{ 0.5, 0.0, 0.0, 1.25 }\n}\n";
        let sol = parse_solution(text, &p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.free, vec![0.5, -1.25]);
        assert_eq!(sol.dual, vec![0.25]);
        // residual recomputed from scratch: 1.5 + 0.5 + 2.5 - 0 = 4.5
        assert!((sol.metrics.primal_residual - 4.5).abs() < 1e-12);
        assert_eq!(sol.status, SdpStatus::Unknown);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let good = render_sdpa(&unit_problem(1.0)).unwrap();
        let truncated = &good[..good.len() - 8];
        match parse_sdpa(truncated) {
            Err(SdpError::Parse { offset, .. }) => assert!(offset <= truncated.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
        let sol_text = "xVec = {1.0}\nyMat = { { 1.0";
        match parse_solution(sol_text, &unit_problem(1.0), &SolverSettings::default()) {
            Err(SdpError::Parse { offset, .. }) => assert!(offset <= sol_text.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_structure_rejected() {
        let p = unit_problem(1.0);
        // two blocks where the problem has one
        let text = "xVec = {1.0}\nyMat = { { 1.0 } { 2.0 } }\n";
        assert!(matches!(
            parse_solution(text, &p, &SolverSettings::default()),
            Err(SdpError::StructureMismatch(_))
        ));
        // xVec length mismatch
        let text = "xVec = {1.0, 2.0}\nyMat = { { 1.0 } }\n";
        assert!(matches!(
            parse_solution(text, &p, &SolverSettings::default()),
            Err(SdpError::StructureMismatch(_))
        ));
    }

    #[test]
    fn objective_entries_round_trip() {
        let mut p = unit_problem(1.0);
        p.objective = Some(Equality {
            blocks: vec![BlockEntries {
                block: 0,
                entries: vec![(0, 0, 2.5)],
            }],
            free: vec![],
            rhs: 0.0,
        });
        let text = render_sdpa(&p).unwrap();
        assert!(text.lines().any(|l| l.starts_with("0 1 1 1 ")));
        let q = parse_sdpa(&text).unwrap();
        let obj = q.objective.unwrap();
        assert_eq!(obj.blocks[0].entries, vec![(0, 0, 2.5)]);
    }
}
