//! Lowers a copositive program to a conic program by replacing every
//! membership `V ∈ COP(K)` with an inner approximation.
//!
//! With [`Structure::Decomposed`] the coordinates of `u` are first split
//! into independent blocks (coordinates linked by a row of `P̂`, an SOC
//! block or a `Ĉ_i`). A membership whose matrix has no entries linking two
//! blocks is split into one membership per block, coupled through free
//! scalars `c_B` with `Σ c_B = 0` added to the `(K+1,K+1)` entries. Blocks
//! whose matrix is affine in `u` over a polyhedral cone without `Ĉ` terms
//! are certified with Farkas multipliers. Both steps are exact for the
//! copositive program and are applied identically for IA and AS.

use super::builder::{ProgramBuilder, VarRef};
use super::{solve, ConicProgram, Solution, SolveOptions, Status};
pub use crate::cones::Approx;
use crate::cones::{as_expand, farkas_expand, ia_compose, ia_expand, AffineMatrix, Certificate, IaParts};
use crate::error::{Error, Result};
use crate::linalg::{smat, svec_len, symmetrize, Mat};
use crate::model::ConeK;
use crate::reformulate::{CopositiveProgram, VarKind};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    Full,
    Decomposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub approx: Approx,
    pub structure: Structure,
}

impl AssembleOptions {
    pub fn new(approx: Approx) -> Self {
        AssembleOptions { approx, structure: Structure::Decomposed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceMethod {
    IA,
    AS,
    Farkas,
}

/// One approximated membership.
#[derive(Clone, Debug)]
pub struct Piece {
    pub constraint: usize,
    /// Global coordinates in local order; the homogenization is last.
    pub coords: Vec<usize>,
    pub cone: ConeK,
    pub method: PieceMethod,
    pub cert: Certificate,
    pub split: Option<VarRef>,
}

#[derive(Clone, Debug)]
pub struct Assembled {
    pub program: ConicProgram,
    /// Column of each copositive variable; `None` for variables that occur
    /// nowhere and are fixed to zero.
    pub var_cols: Vec<Option<usize>>,
    pub pieces: Vec<Piece>,
    pub blocks: Vec<Vec<usize>>,
}

impl Assembled {
    pub fn values(&self, z: &[f64]) -> Vec<f64> {
        self.var_cols.iter().map(|c| c.map_or(0.0, |i| z[i])).collect()
    }

    pub fn value_of(&self, z: &[f64], v: VarRef) -> f64 {
        z[self.program.col(v)]
    }

    /// The PSD matrix `W` of a piece.
    pub fn w_matrix(&self, piece: &Piece, z: &[f64]) -> Option<Mat> {
        let b = piece.cert.psd_block?;
        let off = self.program.psd_offset(b);
        let n = self.program.psd_dims[b];
        Some(smat(&z[off..off + svec_len(n)], n))
    }

    /// IA certificate of a piece read from `z` and pushed onto the cones it
    /// must lie in (PSD part clipped, multipliers made nonnegative, each
    /// `Φ` row projected onto its second-order cone). `None` for AS and
    /// Farkas pieces.
    pub fn ia_parts(&self, piece: &Piece, z: &[f64]) -> Option<IaParts> {
        if piece.method != PieceMethod::IA {
            return None;
        }
        let w = psd_projection(&self.w_matrix(piece, z)?);
        let np = piece.cone.n_p();
        let mut sigma = Mat::zeros(np, np);
        for &((r, q), v) in &piece.cert.sigma {
            let x = self.value_of(z, v).max(0.0);
            sigma[(r, q)] = x;
            sigma[(q, r)] = x;
        }
        let tau = piece.cert.tau.iter().map(|&v| self.value_of(z, v).max(0.0)).collect();
        let phi = piece
            .cert
            .phi
            .iter()
            .zip(&piece.cone.soc_blocks)
            .map(|(rows, block)| {
                let m = block.nrows();
                let mut ph = Mat::zeros(np, m);
                for (r, &blk) in rows.iter().enumerate() {
                    let off = self.program.soc_offset(blk);
                    let raw = soc_projection(&z[off..off + m]);
                    for q in 0..m {
                        // radius stored first, it multiplies the last row of R̂
                        ph[(r, q)] = if q == m - 1 { raw[0] } else { raw[q + 1] };
                    }
                }
                ph
            })
            .collect();
        Some(IaParts { w, sigma, tau, phi })
    }

    /// `V` composed from every IA certificate in the solution, with the
    /// piece it belongs to.
    pub fn ia_certified(&self, z: &[f64]) -> Vec<(&Piece, Mat)> {
        self.pieces
            .iter()
            .filter_map(|pc| self.ia_parts(pc, z).map(|parts| (pc, ia_compose(&pc.cone, &parts))))
            .collect()
    }
}

fn psd_projection(a: &Mat) -> Mat {
    let e = nalgebra::SymmetricEigen::new(symmetrize(a));
    let d = Mat::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0)));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Euclidean projection onto `{(t, x): ‖x‖ ≤ t}`.
fn soc_projection(v: &[f64]) -> Vec<f64> {
    let t = v[0];
    let nx = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nx <= t {
        return v.to_vec();
    }
    if nx <= -t {
        return vec![0.0; v.len()];
    }
    let a = 0.5 * (t + nx);
    let mut out = vec![a];
    out.extend(v[1..].iter().map(|x| a * x / nx));
    out
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
    fn link(&mut self, items: &[usize]) {
        for w in items.windows(2) {
            self.union(w[0], w[1]);
        }
    }
}

fn row_support(m: &Mat, r: usize, h: usize) -> Vec<usize> {
    (0..h).filter(|&c| m[(r, c)] != 0.0).collect()
}

fn mat_support(m: &Mat, h: usize) -> Vec<usize> {
    (0..h).filter(|&a| (0..m.ncols()).any(|b| m[(a, b)] != 0.0 || m[(b, a)] != 0.0)).collect()
}

struct Partition {
    /// Block of each non-homogenization coordinate.
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    quad_block: Vec<Option<usize>>,
}

fn partition(cone: &ConeK, quad: &[Mat]) -> Partition {
    let h = cone.homog();
    let mut uf = UnionFind::new(h);
    for r in 0..cone.n_p() {
        uf.link(&row_support(&cone.p_rows, r, h));
    }
    for blk in &cone.soc_blocks {
        let cols: Vec<usize> = (0..h).filter(|&c| (0..blk.nrows()).any(|r| blk[(r, c)] != 0.0)).collect();
        uf.link(&cols);
    }
    for q in quad {
        uf.link(&mat_support(q, h));
    }
    let mut root_id = vec![usize::MAX; h];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![0; h];
    for a in 0..h {
        let r = uf.find(a);
        if root_id[r] == usize::MAX {
            root_id[r] = blocks.len();
            blocks.push(Vec::new());
        }
        block_of[a] = root_id[r];
        blocks[root_id[r]].push(a);
    }
    let quad_block = quad.iter().map(|q| mat_support(q, h).first().map(|&a| block_of[a])).collect();
    Partition { block_of, blocks, quad_block }
}

/// Restriction of `cone` to `coords` (homogenization last). Rows touching
/// other coordinates are dropped; callers only pass unions of blocks.
fn sub_cone(cone: &ConeK, coords: &[usize]) -> ConeK {
    let h = cone.homog();
    let inside = |r: &dyn Fn(usize) -> f64| (0..h).all(|c| r(c) == 0.0 || coords.contains(&c));
    let touches = |r: &dyn Fn(usize) -> f64| coords.iter().any(|&c| c != h && r(c) != 0.0);
    let prows: Vec<usize> = (0..cone.n_p()).filter(|&r| inside(&|c| cone.p_rows[(r, c)])).collect();
    let p = Mat::from_fn(prows.len(), coords.len(), |i, j| cone.p_rows[(prows[i], coords[j])]);
    let socs = cone
        .soc_blocks
        .iter()
        .filter(|b| {
            let any = |c: usize| (0..b.nrows()).map(|r| b[(r, c)]).fold(0.0_f64, |m, v| m.max(v.abs()));
            inside(&any) && (touches(&any) || (0..h).all(|c| any(c) == 0.0))
        })
        .map(|b| Mat::from_fn(b.nrows(), coords.len(), |i, j| b[(i, coords[j])]))
        .collect();
    ConeK { dim: coords.len(), p_rows: p, soc_blocks: socs }
}

/// Builds the conic program for one approximation.
pub fn assemble(cp: &CopositiveProgram, opts: &AssembleOptions) -> Result<Assembled> {
    let cone = cp.cone();
    let h = cone.homog();
    if cp.constraints.iter().any(|c| c.dim != cone.dim) {
        return Err(Error::Dimension("membership dimension differs from the cone".into()));
    }
    let part = match opts.structure {
        Structure::Decomposed => partition(cone, &cp.quad_mats),
        Structure::Full => Partition {
            block_of: vec![0; h],
            blocks: if h > 0 { vec![(0..h).collect()] } else { vec![] },
            quad_block: cp.quad_mats.iter().map(|_| if h > 0 { Some(0) } else { None }).collect(),
        },
    };
    let nb = part.blocks.len();
    let soc_block: Vec<bool> = {
        let mut v = vec![false; nb];
        for blk in &cone.soc_blocks {
            for c in 0..h {
                if (0..blk.nrows()).any(|r| blk[(r, c)] != 0.0) {
                    v[part.block_of[c]] = true;
                }
            }
        }
        v
    };
    let quad_in_block: Vec<bool> = {
        let mut v = vec![false; nb];
        for b in part.quad_block.iter().flatten() {
            v[*b] = true;
        }
        v
    };
    let entry_block = |i: usize, j: usize| -> Option<usize> {
        if i < h {
            Some(part.block_of[i])
        } else if j < h {
            Some(part.block_of[j])
        } else {
            None
        }
    };

    // per constraint: kept term indices and components (lists of blocks)
    struct Plan {
        terms: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }
    let mut plans = Vec::with_capacity(cp.constraints.len());
    for con in &cp.constraints {
        let mut uf = UnionFind::new(nb);
        let mut touched = vec![false; nb];
        let core = con.terms.iter().filter(|t| t.quad.is_none()).map(|t| &t.mat).chain(std::iter::once(&con.base));
        for m in core {
            for &(i, j, _) in &m.entries {
                if let Some(b) = entry_block(i, j) {
                    touched[b] = true;
                }
                if i < h && j < h {
                    uf.union(part.block_of[i], part.block_of[j]);
                }
            }
        }
        let terms: Vec<usize> = (0..con.terms.len())
            .filter(|&k| match con.terms[k].quad {
                None => true,
                Some(q) => match part.quad_block[q] {
                    None => true,
                    Some(b) => touched[b],
                },
            })
            .collect();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut comp_of_root = vec![usize::MAX; nb];
        for b in 0..nb {
            if touched[b] {
                let r = uf.find(b);
                if comp_of_root[r] == usize::MAX {
                    comp_of_root[r] = comps.len();
                    comps.push(Vec::new());
                }
                comps[comp_of_root[r]].push(b);
            }
        }
        if comps.is_empty() {
            comps.push(Vec::new());
        }
        plans.push(Plan { terms, comps });
    }

    // variables that occur anywhere
    let nv = cp.n_vars();
    let mut used = vec![false; nv];
    for (k, &c) in cp.objective.iter().enumerate() {
        if c != 0.0 {
            used[k] = true;
        }
    }
    for (row, _) in &cp.linear {
        for &(v, _) in row {
            used[v] = true;
        }
    }
    for (con, plan) in cp.constraints.iter().zip(&plans) {
        for &k in &plan.terms {
            used[con.terms[k].var] = true;
        }
    }

    let mut b = ProgramBuilder::new();
    let mut refs: Vec<Option<VarRef>> = vec![None; nv];
    for v in 0..nv {
        if used[v] {
            let r = match cp.vars[v].kind {
                VarKind::Free => b.free(),
                VarKind::Nonneg => b.nonneg(),
            };
            b.name(r, cp.vars[v].name.clone());
            refs[v] = Some(r);
        }
    }
    for (v, &c) in cp.objective.iter().enumerate() {
        if c != 0.0 {
            b.objective(refs[v].unwrap(), c);
        }
    }
    for (row, rhs) in &cp.linear {
        let s = b.nonneg();
        let mut coefs: Vec<(VarRef, f64)> = row.iter().map(|&(v, a)| (refs[v].unwrap(), a)).collect();
        coefs.push((s, -1.0));
        b.row(coefs, *rhs);
    }

    let mut pieces = Vec::new();
    for (ci, (con, plan)) in cp.constraints.iter().zip(&plans).enumerate() {
        let ncomp = plan.comps.len();
        let mut comp_of_block = vec![usize::MAX; nb];
        for (k, comp) in plan.comps.iter().enumerate() {
            for &bb in comp {
                comp_of_block[bb] = k;
            }
        }
        let coords: Vec<Vec<usize>> = plan
            .comps
            .iter()
            .map(|comp| {
                let mut c: Vec<usize> = comp.iter().flat_map(|&bb| part.blocks[bb].iter().copied()).collect();
                c.sort_unstable();
                c.push(h);
                c
            })
            .collect();
        let mut local = vec![usize::MAX; cone.dim];
        for cs in &coords {
            for (li, &g) in cs.iter().enumerate() {
                local[g] = li;
            }
        }
        let mut mats: Vec<AffineMatrix> = coords.iter().map(|c| AffineMatrix::new(c.len())).collect();
        let mut has_quad = vec![false; ncomp];
        let target = |i: usize, j: usize| entry_block(i, j).map_or(0, |bb| comp_of_block[bb]);
        for &(i, j, v) in &con.base.entries {
            let k = target(i, j);
            mats[k].add_const(local[i], local[j], v);
        }
        for &t in &plan.terms {
            let term = &con.terms[t];
            let r = refs[term.var].expect("kept variable");
            for &(i, j, v) in &term.mat.entries {
                let k = target(i, j);
                if term.quad.is_some() {
                    has_quad[k] = true;
                }
                mats[k].add_var(local[i], local[j], r, v);
            }
        }
        let splits: Vec<Option<VarRef>> = if ncomp > 1 {
            let s: Vec<VarRef> = (0..ncomp).map(|_| b.free()).collect();
            b.row(s.iter().map(|&v| (v, 1.0)).collect(), 0.0);
            s.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        for k in 0..ncomp {
            let n = coords[k].len();
            if let Some(s) = splits[k] {
                mats[k].add_var(n - 1, n - 1, s, 1.0);
            }
            let sub = if opts.structure == Structure::Full { cone.clone() } else { sub_cone(cone, &coords[k]) };
            let comp = &plan.comps[k];
            let farkas = opts.structure == Structure::Decomposed
                && mats[k].is_affine()
                && !has_quad[k]
                && comp.iter().all(|&bb| !soc_block[bb] && !quad_in_block[bb])
                && sub.soc_blocks.is_empty();
            let (method, cert) = if farkas {
                (PieceMethod::Farkas, farkas_expand(&mut b, &mats[k], &sub))
            } else {
                match opts.approx {
                    Approx::IA => (PieceMethod::IA, ia_expand(&mut b, &mats[k], &sub)),
                    Approx::AS => (PieceMethod::AS, as_expand(&mut b, &mats[k], &sub)),
                }
            };
            pieces.push(Piece { constraint: ci, coords: coords[k].clone(), cone: sub, method, cert, split: splits[k] });
        }
    }

    let program = b.finish();
    program.check()?;
    let var_cols = refs.iter().map(|r| r.map(|v| program.col(v))).collect();
    Ok(Assembled { program, var_cols, pieces, blocks: part.blocks })
}

/// Result of approximating and solving a copositive program.
#[derive(Clone, Debug)]
pub struct CopSolution {
    pub status: Status,
    /// Bound in the problem's own sense.
    pub value: f64,
    /// Optimal value of the minimization form.
    pub min_value: f64,
    pub vals: Vec<f64>,
    pub solution: Solution,
    pub assemble_seconds: f64,
}

pub fn solve_copositive(
    cp: &CopositiveProgram,
    opts: &AssembleOptions,
    sopts: &SolveOptions,
) -> Result<(Assembled, CopSolution)> {
    let t0 = Instant::now();
    let asm = assemble(cp, opts)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let solution = solve(&asm.program, sopts);
    let vals = if solution.z.len() == asm.program.n_vars() { asm.values(&solution.z) } else { vec![0.0; cp.n_vars()] };
    let min_value = match solution.status {
        Status::Optimal => solution.objective,
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => f64::NAN,
    };
    let sol = CopSolution {
        status: solution.status,
        value: cp.report(min_value),
        min_value,
        vals,
        solution,
        assemble_seconds,
    };
    Ok((asm, sol))
}
