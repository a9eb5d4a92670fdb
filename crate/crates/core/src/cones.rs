//! Semidefinite inner approximations of `COP(K)`.
//!
//! For `K = {u : P̂u ≥ 0, R̂_b u ∈ SOC}`:
//!
//! ```text
//! IA: V = W + Σ_b τ_b Ŝ_b + P̂ᵀΣP̂ + Σ_b ½(P̂ᵀΦ_bR̂_b + R̂_bᵀΦ_bᵀP̂),
//!     W ⪰ 0, Σ ≥ 0, τ ≥ 0, rows(Φ_b) ∈ SOC
//! AS: V = W + Σ_b τ_b Ŝ_b + ½(P̂ᵀθ eᵀ + e θᵀP̂),  W ⪰ 0, θ ≥ 0, τ ≥ 0
//! ```
//!
//! With several SOC blocks each block gets its own `(Ŝ_b, τ_b, Φ_b)` and
//! products between different blocks are left out.

use crate::conic::builder::{ProgramBuilder, VarRef};
use crate::conic::lp::{minimize, LinOutcome};
use crate::error::{Error, Result};
use crate::linalg::{svec_index, svec_len, Mat, SQRT2};
use crate::model::ConeK;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approx {
    IA,
    AS,
}

/// `Ŝ = R̂ᵀe_last e_lastᵀR̂ − Σ_{ℓ<last} R̂ᵀe_ℓe_ℓᵀR̂`.
pub fn build_shat(r: &Mat) -> Result<Mat> {
    let m = r.nrows();
    if m < 2 {
        return Err(Error::Invalid("Ŝ needs a block with at least 2 rows".into()));
    }
    let n = r.ncols();
    let mut s = Mat::zeros(n, n);
    for l in 0..m {
        let sign = if l == m - 1 { 1.0 } else { -1.0 };
        for a in 0..n {
            let ra = r[(l, a)];
            if ra == 0.0 {
                continue;
            }
            for b in 0..n {
                s[(a, b)] += sign * ra * r[(l, b)];
            }
        }
    }
    Ok(s)
}

/// One entry of an affine matrix map: `constant + Σ coef·var`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Entry {
    pub constant: f64,
    pub vars: Vec<(VarRef, f64)>,
}

/// Affine symmetric matrix map on `n` local coordinates, keyed by `(i, j)`
/// with `i <= j`. The homogenization coordinate is `n − 1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineMatrix {
    pub n: usize,
    pub entries: BTreeMap<(usize, usize), Entry>,
}

impl AffineMatrix {
    pub fn new(n: usize) -> Self {
        AffineMatrix { n, entries: BTreeMap::new() }
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn add_const(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.entry(Self::key(i, j)).or_default().constant += v;
        }
    }

    pub fn add_var(&mut self, i: usize, j: usize, var: VarRef, v: f64) {
        if v != 0.0 {
            self.entries.entry(Self::key(i, j)).or_default().vars.push((var, v));
        }
    }

    /// True when every entry outside the last row/column vanishes.
    pub fn is_affine(&self) -> bool {
        let h = self.n - 1;
        self.entries.keys().all(|&(_, j)| j == h)
    }
}

/// Auxiliary variables created for one membership; enough to rebuild the
/// certificate from a solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certificate {
    pub psd_block: Option<usize>,
    pub sigma: Vec<((usize, usize), VarRef)>,
    pub tau: Vec<VarRef>,
    /// `phi[b][r]` is the SOC variable block for row `r` of `Φ_b`.
    pub phi: Vec<Vec<usize>>,
    pub theta: Vec<VarRef>,
}

fn sparse_row(m: &Mat, r: usize) -> Vec<(usize, f64)> {
    (0..m.ncols()).filter(|&c| m[(r, c)] != 0.0).map(|c| (c, m[(r, c)])).collect()
}

/// Accumulates `coef·var` on the symmetric pair `(a,b)` as if adding
/// `coef·½(x yᵀ + y xᵀ)` one ordered product at a time.
struct Rows {
    acc: Vec<Vec<(VarRef, f64)>>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Rows { acc: vec![Vec::new(); svec_len(n)] }
    }

    /// Adds `v` to the stored upper entry `(a,b)` of a symmetric matrix.
    fn put(&mut self, a: usize, b: usize, var: VarRef, v: f64) {
        if v != 0.0 {
            let scale = if a == b { 1.0 } else { SQRT2 };
            self.acc[svec_index(a, b)].push((var, scale * v));
        }
    }

    /// Adds `var·(x yᵀ + y xᵀ)/2`.
    fn put_sym_outer(&mut self, x: &[(usize, f64)], y: &[(usize, f64)], var: VarRef, s: f64) {
        for &(a, xa) in x {
            for &(b, yb) in y {
                let v = s * xa * yb;
                if a == b {
                    self.put(a, a, var, v);
                } else {
                    self.put(a, b, var, 0.5 * v);
                }
            }
        }
    }
}

fn emit(b: &mut ProgramBuilder, v: &AffineMatrix, mut rows: Rows, psd: usize) {
    // svec(V) − svec(aux) − svec(W) = 0
    let n = v.n;
    let mut rhs = vec![0.0; svec_len(n)];
    for (&(i, j), e) in &v.entries {
        let k = svec_index(i, j);
        let s = if i == j { 1.0 } else { SQRT2 };
        rhs[k] = -s * e.constant;
        for &(var, c) in &e.vars {
            rows.acc[k].push((var, s * c));
        }
    }
    for (k, mut coefs) in rows.acc.into_iter().enumerate() {
        coefs.push((VarRef::Psd(psd, k), -1.0));
        b.row(coefs, rhs[k]);
    }
}

fn add_shat_terms(b: &mut ProgramBuilder, rows: &mut Rows, cone: &ConeK, cert: &mut Certificate) {
    for block in &cone.soc_blocks {
        let shat = build_shat(block).expect("validated SOC block");
        let tau = b.nonneg();
        cert.tau.push(tau);
        for j in 0..shat.ncols() {
            for i in 0..=j {
                rows.put(i, j, tau, -shat[(i, j)]);
            }
        }
    }
}

/// Expands `V ∈ IA(K)` into builder rows and returns the certificate layout.
pub fn ia_expand(b: &mut ProgramBuilder, v: &AffineMatrix, cone: &ConeK) -> Certificate {
    assert_eq!(v.n, cone.dim, "cone dimension mismatch");
    let n = v.n;
    let mut cert = Certificate::default();
    let mut rows = Rows::new(n);
    let prow: Vec<Vec<(usize, f64)>> = (0..cone.n_p()).map(|r| sparse_row(&cone.p_rows, r)).collect();
    for q in 0..prow.len() {
        for r in 0..=q {
            let sig = b.nonneg();
            cert.sigma.push(((r, q), sig));
            // σ_rq contributes (p_r p_qᵀ + p_q p_rᵀ) for r < q and p_r p_rᵀ for r = q
            let s = if r == q { -1.0 } else { -2.0 };
            rows.put_sym_outer(&prow[r], &prow[q], sig, s);
        }
    }
    add_shat_terms(b, &mut rows, cone, &mut cert);
    for block in &cone.soc_blocks {
        let m = block.nrows();
        let rrow: Vec<Vec<(usize, f64)>> = (0..m).map(|q| sparse_row(block, q)).collect();
        let mut per_row = Vec::with_capacity(prow.len());
        for pr in &prow {
            let blk = b.soc(m);
            per_row.push(blk);
            for (q, rq) in rrow.iter().enumerate() {
                // radius entry of row q of Φ sits at position 0
                let pos = if q == m - 1 { 0 } else { q + 1 };
                rows.put_sym_outer(pr, rq, VarRef::Soc(blk, pos), -1.0);
            }
        }
        cert.phi.push(per_row);
    }
    let psd = b.psd(n);
    cert.psd_block = Some(psd);
    emit(b, v, rows, psd);
    cert
}

/// Expands `V ∈ AS(K)`.
pub fn as_expand(b: &mut ProgramBuilder, v: &AffineMatrix, cone: &ConeK) -> Certificate {
    assert_eq!(v.n, cone.dim, "cone dimension mismatch");
    let n = v.n;
    let h = n - 1;
    let mut cert = Certificate::default();
    let mut rows = Rows::new(n);
    for r in 0..cone.n_p() {
        let th = b.nonneg();
        cert.theta.push(th);
        rows.put_sym_outer(&sparse_row(&cone.p_rows, r), &[(h, 1.0)], th, -1.0);
    }
    add_shat_terms(b, &mut rows, cone, &mut cert);
    let psd = b.psd(n);
    cert.psd_block = Some(psd);
    emit(b, v, rows, psd);
    cert
}

/// For an affine map `V = ½(a eᵀ + e aᵀ)` over a polyhedral cone,
/// `V ∈ COP(K)` iff `a = P̂ᵀθ` for some `θ ≥ 0`.
pub fn farkas_expand(b: &mut ProgramBuilder, v: &AffineMatrix, cone: &ConeK) -> Certificate {
    assert!(v.is_affine() && cone.soc_blocks.is_empty());
    let n = v.n;
    let h = n - 1;
    let theta: Vec<VarRef> = (0..cone.n_p()).map(|_| b.nonneg()).collect();
    for a in 0..n {
        let mut coefs: Vec<(VarRef, f64)> = Vec::new();
        let mut rhs = 0.0;
        if let Some(e) = v.entries.get(&(a.min(h), h)) {
            let s = if a == h { 1.0 } else { 2.0 };
            rhs = -s * e.constant;
            coefs.extend(e.vars.iter().map(|&(var, c)| (var, s * c)));
        }
        for (r, &th) in theta.iter().enumerate() {
            let p = cone.p_rows[(r, a)];
            if p != 0.0 {
                coefs.push((th, -p));
            }
        }
        b.row(coefs, rhs);
    }
    Certificate { theta, ..Certificate::default() }
}

/// Dense IA certificate matrices read back from variable values.
#[derive(Clone, Debug)]
pub struct IaParts {
    pub w: Mat,
    pub sigma: Mat,
    pub tau: Vec<f64>,
    pub phi: Vec<Mat>,
}

/// Maps an AS certificate to the IA certificate `Σ = ½(θeᵀ + eθᵀ)`, `Ψ = 0`
/// on the same cone, where `e` selects the row `e_{K+1}ᵀ` of `P̂`.
pub fn as_to_ia(cone: &ConeK, w: &Mat, theta: &[f64], tau: &[f64]) -> Result<IaParts> {
    let np = cone.n_p();
    let h = cone.homog();
    let e_row = (0..np)
        .find(|&r| (0..h).all(|c| cone.p_rows[(r, c)] == 0.0) && cone.p_rows[(r, h)] == 1.0)
        .ok_or_else(|| Error::Invalid("cone lacks the e_{K+1} row".into()))?;
    let mut sigma = Mat::zeros(np, np);
    for r in 0..np {
        sigma[(r, e_row)] += 0.5 * theta[r];
        sigma[(e_row, r)] += 0.5 * theta[r];
    }
    Ok(IaParts {
        w: w.clone(),
        sigma,
        tau: tau.to_vec(),
        phi: cone.soc_blocks.iter().map(|bl| Mat::zeros(np, bl.nrows())).collect(),
    })
}

/// `W + Σ τ_bŜ_b + P̂ᵀΣP̂ + Σ_b ½(P̂ᵀΦ_bR̂_b + R̂_bᵀΦ_bᵀP̂)`.
pub fn ia_compose(cone: &ConeK, parts: &IaParts) -> Mat {
    let p = &cone.p_rows;
    let mut v = parts.w.clone() + p.transpose() * &parts.sigma * p;
    for (bi, block) in cone.soc_blocks.iter().enumerate() {
        v += build_shat(block).expect("SOC block") * parts.tau[bi];
        let psi = p.transpose() * &parts.phi[bi] * block;
        v += (&psi + psi.transpose()) * 0.5;
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExactnessFlags {
    pub pure_soc: bool,
    pub facet_disjoint: bool,
}

/// Detects the two settings in which `IA(K) = COP(K)`: a single
/// second-order cone, or one second-order cone whose polyhedral facets
/// never meet inside it.
pub fn exactness_flags(cone: &ConeK) -> ExactnessFlags {
    let h = cone.homog();
    let is_e = |r: usize| (0..h).all(|c| cone.p_rows[(r, c)] == 0.0) && cone.p_rows[(r, h)] > 0.0;
    let facets: Vec<usize> = (0..cone.n_p()).filter(|&r| !is_e(r)).collect();
    let single_soc = cone.soc_blocks.len() == 1;
    let pure_soc = single_soc && facets.is_empty();
    if !single_soc {
        return ExactnessFlags { pure_soc, facet_disjoint: false };
    }
    let ball = ConeK { dim: cone.dim, p_rows: Mat::zeros(0, cone.dim), soc_blocks: cone.soc_blocks.clone() };
    let mut disjoint = true;
    'outer: for &l in &facets {
        let pl: Vec<f64> = cone.p_rows.row(l).iter().copied().collect();
        for tau in [1.0, -1.0] {
            for r in 0..cone.n_p() {
                if r == l {
                    continue;
                }
                let pr: Vec<f64> = cone.p_rows.row(r).iter().copied().collect();
                match minimize(&ball, &pr, tau, &[(pl.clone(), 0.0)]) {
                    LinOutcome::Optimal { value, .. } if value < -1e-7 => {
                        disjoint = false;
                        break 'outer;
                    }
                    LinOutcome::Unbounded => {
                        disjoint = false;
                        break 'outer;
                    }
                    _ => {}
                }
            }
        }
    }
    ExactnessFlags { pure_soc, facet_disjoint: disjoint }
}
