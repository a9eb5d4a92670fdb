//! Piecewise-linear liftings of the uncertainty set.
//!
//! A fold `F_ℓ(u) = max{0, f_ℓᵀu}` with `f_ℓ = (g_ℓ, −h_ℓ)` is encoded exactly by
//! `0 ≤ w_ℓ ≤ w̄_ℓ`, `w_ℓ ≥ f_ℓᵀu` and the complementarity `w_ℓ(w_ℓ − f_ℓᵀu) = 0`.
//! Axial segmentations additionally get the two convex outer sets `U**`
//! (linear) and `U*` (linear plus 3×3 moment blocks) used to compare
//! against the copositive route.

use crate::conic::assemble::CopSolution;
use crate::conic::builder::{ProgramBuilder, VarRef};
use crate::conic::lp::{maximize, minimize, LinOutcome};
use crate::conic::{solve, ConicProgram, SolveOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::{dot, min_eig, svec_index, svec_len, Mat, SQRT2};
use crate::model::{ConeK, MsroProblem, Stage, UncertaintySet};
use crate::reformulate::{CopositiveProgram, VarKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub g: Vec<f64>,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxialSpec {
    pub breakpoints: Vec<Vec<f64>>,
}

/// `{"folds": [...]}` or `{"axial": {"breakpoints": [...]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LiftSpec {
    Folds(Vec<Fold>),
    Axial(AxialSpec),
}

pub fn lift_spec_from_json(s: &str) -> Result<LiftSpec> {
    serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))
}

#[derive(Clone, Debug)]
pub struct Lifting {
    pub l: usize,
    /// `f_ℓ = (g_ℓ, −h_ℓ)`, length `K+1`.
    pub f_vecs: Vec<Vec<f64>>,
    pub w_upper: Vec<f64>,
    /// `Ĉ_ℓ` over `v = (w, u, 1)`.
    pub comp_mats: Vec<Mat>,
    /// Lifted set over `v = (w, u, 1)`.
    pub set: UncertaintySet,
}

impl Lifting {
    /// `v = (max{0, f_ℓᵀu}, u)` for a point `u` with homogenization.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = self.f_vecs.iter().map(|f| dot(f, u).max(0.0)).collect();
        v.extend_from_slice(u);
        v
    }
}

/// Builds the lifted cone `K′`, the complementarity matrices and the
/// bounds `w̄_ℓ = max_{u ∈ U⁰} f_ℓᵀu`.
pub fn make_lifting(u: &UncertaintySet, folds: &[Fold]) -> Result<Lifting> {
    let k = u.k;
    let cone = &u.cone;
    let mut f_vecs = Vec::with_capacity(folds.len());
    let mut w_upper = Vec::with_capacity(folds.len());
    for (l, fold) in folds.iter().enumerate() {
        if fold.g.len() != k {
            return Err(Error::Dimension(format!("fold {l} has {} entries, expected K={k}", fold.g.len())));
        }
        let mut f = fold.g.clone();
        f.push(-fold.h);
        let wbar = match maximize(cone, &f, 1.0, &[]) {
            LinOutcome::Optimal { value, .. } => value.max(0.0),
            LinOutcome::Unbounded => {
                return Err(Error::Unbounded(format!("fold {l}: f_ℓᵀu is unbounded above on U⁰")))
            }
            LinOutcome::Infeasible => return Err(Error::Invalid("uncertainty set is empty".into())),
            LinOutcome::Failed(s) => return Err(Error::Solver(format!("fold {l}: bound LP ended with {s:?}"))),
        };
        f_vecs.push(f);
        w_upper.push(wbar);
    }
    let l = folds.len();
    let n = l + k + 1;
    let h = n - 1;
    let map: Vec<usize> = (0..=k).map(|i| l + i).collect();
    let base = cone.embed(n, &map);
    let mut rows: Vec<Vec<f64>> = (0..base.n_p()).map(|r| base.p_rows.row(r).iter().copied().collect()).collect();
    for (i, f) in f_vecs.iter().enumerate() {
        let mut r0 = vec![0.0; n];
        r0[i] = 1.0;
        rows.push(r0);
        let mut r1 = vec![0.0; n];
        r1[i] = -1.0;
        r1[h] = w_upper[i];
        rows.push(r1);
        let mut r2 = vec![0.0; n];
        r2[i] = 1.0;
        for (c, &fc) in f.iter().enumerate() {
            r2[l + c] -= fc;
        }
        rows.push(r2);
    }
    let p = Mat::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let lifted_cone = ConeK::new(n, p, base.soc_blocks.clone())?;
    let comp_mats: Vec<Mat> = f_vecs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut c = Mat::zeros(n, n);
            c[(i, i)] = 1.0;
            for (j, &fj) in f.iter().enumerate() {
                c[(i, l + j)] -= 0.5 * fj;
                c[(l + j, i)] -= 0.5 * fj;
            }
            c
        })
        .collect();
    let mut quads: Vec<Mat> = u
        .quad_mats
        .iter()
        .map(|q| {
            let mut m = Mat::zeros(n, n);
            for a in 0..=k {
                for b in 0..=k {
                    m[(l + a, l + b)] = q[(a, b)];
                }
            }
            m
        })
        .collect();
    quads.extend(comp_mats.iter().cloned());
    let set = UncertaintySet::new(lifted_cone, quads)?;
    Ok(Lifting { l, f_vecs, w_upper, comp_mats, set })
}

/// A problem over the lifted parameters together with the coordinate
/// permutation from `(w, u, 1)` order to the stage-interleaved order.
#[derive(Clone, Debug)]
pub struct LiftedProblem {
    pub problem: MsroProblem,
    pub lifting: Lifting,
    /// `order[p]` is the `(w, u, 1)` index placed at position `p`.
    pub order: Vec<usize>,
}

impl LiftedProblem {
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        let v = self.lifting.lift(u);
        self.order.iter().map(|&o| v[o]).collect()
    }
}

/// Stage of a fold: the latest stage whose coordinates its direction touches.
fn fold_stage(p: &MsroProblem, f: &[f64]) -> usize {
    let mut stage = 0;
    let mut start = 0;
    for (t, st) in p.stages.iter().enumerate() {
        if (start..start + st.k).any(|c| f[c] != 0.0) {
            stage = t;
        }
        start += st.k;
    }
    stage
}

/// Replaces `U` by the lifted set; problem data do not depend on `w`.
pub fn lifted_problem(p: &MsroProblem, lf: &Lifting) -> Result<LiftedProblem> {
    p.check_dims()?;
    let k = p.k_total();
    if lf.set.k != k + lf.l {
        return Err(Error::Dimension("lifting was built for a different uncertainty dimension".into()));
    }
    let l = lf.l;
    let n = l + k + 1;
    let stage_of: Vec<usize> = lf.f_vecs.iter().map(|f| fold_stage(p, f)).collect();
    let mut order = Vec::with_capacity(n);
    let mut new_k = Vec::with_capacity(p.n_stages());
    let mut start = 0;
    for (t, st) in p.stages.iter().enumerate() {
        let before = order.len();
        order.extend((0..l).filter(|&i| stage_of[i] == t));
        order.extend((start..start + st.k).map(|c| l + c));
        new_k.push(order.len() - before);
        start += st.k;
    }
    order.push(n - 1);
    let mut pos = vec![0; n];
    for (q, &o) in order.iter().enumerate() {
        pos[o] = q;
    }
    let cone = lf.set.cone.embed(n, &pos);
    let quads: Vec<Mat> = lf.set.quad_mats.iter().map(|m| Mat::from_fn(n, n, |a, b| m[(order[a], order[b])])).collect();
    let set = UncertaintySet::new(cone, quads)?;

    // original u^t position of lifted position q (None for folds)
    let orig_pos = |q: usize, kt: usize| -> Option<usize> {
        let o = order[q];
        if o == n - 1 {
            Some(kt)
        } else if o >= l {
            Some(o - l)
        } else {
            None
        }
    };
    let mut stages = Vec::with_capacity(p.n_stages());
    for (t, st) in p.stages.iter().enumerate() {
        let kt = p.k_upto(t);
        let nkt: usize = new_k[..=t].iter().sum();
        let coords: Vec<usize> = (0..nkt).chain(std::iter::once(n - 1)).collect();
        let b_hat = if st.b_hat.len() == kt + 1 {
            coords
                .iter()
                .map(|&q| orig_pos(q, kt).map_or_else(|| Mat::zeros(p.j, st.n), |o| st.b_hat[o].clone()))
                .collect()
        } else {
            (0..n).map(|q| orig_pos(q, k).map_or_else(|| Mat::zeros(p.j, st.n), |o| st.b_hat[o].clone())).collect()
        };
        let d_hat = Mat::from_fn(st.n, nkt + 1, |r, c| orig_pos(coords[c], kt).map_or(0.0, |o| st.d_hat[(r, o)]));
        stages.push(Stage { k: new_k[t], n: st.n, b_hat, d_hat });
    }
    let k1 = p.stages[0].k;
    let a_coords: Vec<usize> = (0..new_k[0]).chain(std::iter::once(n - 1)).collect();
    let a_hat = a_coords
        .iter()
        .map(|&q| orig_pos(q, k1).map_or_else(|| Mat::zeros(p.j, p.m), |o| p.a_hat[o].clone()))
        .collect();
    let h_hat = Mat::from_fn(p.j, n, |r, c| {
        let o = order[c];
        if o >= l {
            p.h_hat[(r, o - l)]
        } else {
            0.0
        }
    });
    let problem = MsroProblem {
        stages,
        j: p.j,
        m: p.m,
        c: p.c.clone(),
        a_hat,
        h_hat,
        x_set: p.x_set.clone(),
        uncertainty: set,
        sense: p.sense,
    };
    problem.check_dims()?;
    Ok(LiftedProblem { problem, lifting: lf.clone(), order })
}

/// Per-axis breakpoints `h_{k,1} = u̲_k < h_{k,2} < … < h_{k,L} < ū_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxialSegmentation {
    pub breakpoints: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Marginal support `[u̲_k, ū_k]` of every coordinate over `U⁰`.
pub fn marginal_bounds(u: &UncertaintySet) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = u.dim();
    let mut lo = Vec::with_capacity(u.k);
    let mut hi = Vec::with_capacity(u.k);
    for c in 0..u.k {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let get = |o: LinOutcome| match o {
            LinOutcome::Optimal { value, .. } => Ok(value),
            LinOutcome::Unbounded => Err(Error::Unbounded(format!("coordinate {c} is unbounded on U⁰"))),
            LinOutcome::Infeasible => Err(Error::Invalid("uncertainty set is empty".into())),
            LinOutcome::Failed(s) => Err(Error::Solver(format!("marginal bound LP ended with {s:?}"))),
        };
        lo.push(get(minimize(&u.cone, &e, 1.0, &[]))?);
        hi.push(get(maximize(&u.cone, &e, 1.0, &[]))?);
    }
    Ok((lo, hi))
}

impl AxialSegmentation {
    /// Validates breakpoints against the marginal support of `u`. The
    /// first breakpoint of each axis must equal its lower bound.
    pub fn new(u: &UncertaintySet, breakpoints: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != u.k {
            return Err(Error::Dimension(format!("{} breakpoint lists for K={}", breakpoints.len(), u.k)));
        }
        let (lower, upper) = marginal_bounds(u)?;
        for (k, bp) in breakpoints.iter().enumerate() {
            let first = *bp.first().ok_or_else(|| Error::Invalid(format!("axis {k}: no breakpoints")))?;
            if (first - lower[k]).abs() > 1e-7 * (1.0 + lower[k].abs()) {
                return Err(Error::Invalid(format!(
                    "axis {k}: first breakpoint {first} differs from the marginal lower bound {}",
                    lower[k]
                )));
            }
            if bp.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invalid(format!("axis {k}: breakpoints must increase strictly")));
            }
            if bp.len() > 1 && *bp.last().unwrap() >= upper[k] {
                return Err(Error::Invalid(format!("axis {k}: breakpoints outside the marginal support")));
            }
        }
        Ok(AxialSegmentation { breakpoints, lower, upper })
    }

    /// `h_{k,ℓ}` for `ℓ = 1..=L+1` (1-based), with `h_{k,L+1} = ū_k`.
    pub fn h(&self, k: usize, l: usize) -> f64 {
        let bp = &self.breakpoints[k];
        if l <= bp.len() {
            bp[l - 1]
        } else {
            self.upper[k]
        }
    }

    pub fn pieces(&self, k: usize) -> usize {
        self.breakpoints[k].len()
    }

    /// Folds `(e_k, −h_{k,ℓ})` for `ℓ = 2..L`, axis by axis.
    pub fn folds(&self) -> Vec<Fold> {
        let kk = self.breakpoints.len();
        let mut out = Vec::new();
        for (k, bp) in self.breakpoints.iter().enumerate() {
            for &h in &bp[1..] {
                let mut g = vec![0.0; kk];
                g[k] = 1.0;
                out.push(Fold { g, h });
            }
        }
        out
    }

    /// Index in `w` of the fold for `z_{k,ℓ}`, `ℓ ∈ 2..=L`.
    fn fold_index(&self, k: usize, l: usize) -> usize {
        self.breakpoints[..k].iter().map(|b| b.len() - 1).sum::<usize>() + (l - 2)
    }

    /// `z_{k,ℓ}` (1-based `ℓ ∈ 1..=L+1`) as an affine form over `(w, u, 1)`.
    pub fn z_form(&self, k: usize, l: usize) -> Vec<(usize, f64)> {
        let nl: usize = self.breakpoints.iter().map(|b| b.len() - 1).sum();
        let kk = self.breakpoints.len();
        let lk = self.pieces(k);
        if l == 1 {
            vec![(nl + k, 1.0), (nl + kk, -self.lower[k])]
        } else if l <= lk {
            vec![(self.fold_index(k, l), 1.0)]
        } else {
            vec![]
        }
    }

    /// `(w̃, z)` of one axis at `u_k`: `z_ℓ = max{0, u_k − h_ℓ}` with
    /// `z_{L+1} = 0` and `w̃_ℓ = z_ℓ − z_{ℓ+1}`.
    pub fn axis_point(&self, k: usize, uk: f64) -> (Vec<f64>, Vec<f64>) {
        let lk = self.pieces(k);
        let mut z: Vec<f64> = (1..=lk).map(|l| (uk - self.h(k, l)).max(0.0)).collect();
        z.push(0.0);
        let w = (0..lk).map(|l| z[l] - z[l + 1]).collect();
        (w, z)
    }
}

/// Lifting of an axial segmentation; coordinates `z_{k,ℓ}`, `ℓ = 2..L`.
pub fn axial_lift(u: &UncertaintySet, seg: &AxialSegmentation) -> Result<Lifting> {
    make_lifting(u, &seg.folds())
}

/// Convex set over `(v, a)` where `v` are lifted coordinates (last one the
/// homogenization, fixed to 1) and `a` are auxiliary scalars. Affine forms
/// index `v` by `0..dim` and `a` by `dim..dim+n_aux`.
#[derive(Clone, Debug, Default)]
pub struct OuterSet {
    pub dim: usize,
    pub n_aux: usize,
    pub ineq: Vec<Vec<(usize, f64)>>,
    /// Second-order cone rows, radius last.
    pub soc: Vec<Vec<Vec<(usize, f64)>>>,
    /// `(side, entries)` with entries in packed upper-triangular order.
    pub psd: Vec<(usize, Vec<Vec<(usize, f64)>>)>,
}

impl OuterSet {
    /// `U⁰` embedded in the lifted coordinates via `map`.
    fn from_cone(cone: &ConeK, dim: usize, map: &[usize]) -> Self {
        let row = |m: &Mat, r: usize| -> Vec<(usize, f64)> {
            (0..m.ncols()).filter(|&c| m[(r, c)] != 0.0).map(|c| (map[c], m[(r, c)])).collect()
        };
        OuterSet {
            dim,
            n_aux: 0,
            ineq: (0..cone.n_p()).map(|r| row(&cone.p_rows, r)).collect(),
            soc: cone.soc_blocks.iter().map(|b| (0..b.nrows()).map(|r| row(b, r)).collect()).collect(),
            psd: vec![],
        }
    }

    /// Relabels lifted coordinate `i` as `pos[i]`; auxiliaries keep their slots.
    pub fn permuted(&self, pos: &[usize]) -> OuterSet {
        let dim = self.dim;
        let map = |f: &Vec<(usize, f64)>| f.iter().map(|&(i, a)| (if i < dim { pos[i] } else { i }, a)).collect();
        OuterSet {
            dim,
            n_aux: self.n_aux,
            ineq: self.ineq.iter().map(map).collect(),
            soc: self.soc.iter().map(|rows| rows.iter().map(map).collect()).collect(),
            psd: self.psd.iter().map(|(s, e)| (*s, e.iter().map(map).collect())).collect(),
        }
    }

    fn eval(form: &[(usize, f64)], x: &[f64]) -> f64 {
        form.iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Membership of `(v, a)` within `tol`.
    pub fn contains(&self, v: &[f64], aux: &[f64], tol: f64) -> bool {
        let mut x = v.to_vec();
        x.extend_from_slice(aux);
        let ok_lin = self.ineq.iter().all(|f| Self::eval(f, &x) >= -tol);
        let ok_soc = self.soc.iter().all(|rows| {
            let vals: Vec<f64> = rows.iter().map(|f| Self::eval(f, &x)).collect();
            let (r, rest) = vals.split_last().unwrap();
            *r >= -tol && *r - rest.iter().map(|v| v * v).sum::<f64>().sqrt() >= -tol
        });
        let ok_psd = self.psd.iter().all(|(side, entries)| {
            let mut m = Mat::zeros(*side, *side);
            for j in 0..*side {
                for i in 0..=j {
                    let v = Self::eval(&entries[svec_index(i, j)], &x);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            min_eig(&m) >= -tol
        });
        ok_lin && ok_soc && ok_psd
    }
}

impl OuterSet {
    /// `sup { objᵀv : (v, a) ∈ S, v_h = 1 }` by a direct conic program.
    pub fn support(&self, obj: &[f64], sopts: &SolveOptions) -> Result<(Status, f64)> {
        if obj.len() != self.dim {
            return Err(Error::Dimension(format!("objective has {} entries, set {}", obj.len(), self.dim)));
        }
        let mut b = ProgramBuilder::new();
        let x: Vec<VarRef> = (0..self.dim + self.n_aux).map(|_| b.free()).collect();
        let lin = |form: &[(usize, f64)]| -> Vec<(VarRef, f64)> { form.iter().map(|&(i, a)| (x[i], a)).collect() };
        for (i, &c) in obj.iter().enumerate() {
            if c != 0.0 {
                b.objective(x[i], -c);
            }
        }
        b.row(vec![(x[self.dim - 1], 1.0)], 1.0);
        for form in &self.ineq {
            let s = b.nonneg();
            let mut coefs = lin(form);
            coefs.push((s, -1.0));
            b.row(coefs, 0.0);
        }
        for rows in &self.soc {
            let blk = b.soc(rows.len());
            let last = rows.len() - 1;
            for (r, form) in rows.iter().enumerate() {
                let mut coefs = lin(form);
                coefs.push((VarRef::Soc(blk, if r == last { 0 } else { r + 1 }), -1.0));
                b.row(coefs, 0.0);
            }
        }
        for (side, entries) in &self.psd {
            let blk = b.psd(*side);
            for jj in 0..*side {
                for ii in 0..=jj {
                    let k = svec_index(ii, jj);
                    let sc = if ii == jj { 1.0 } else { SQRT2 };
                    let mut coefs: Vec<(VarRef, f64)> = lin(&entries[k]).into_iter().map(|(v, a)| (v, sc * a)).collect();
                    coefs.push((VarRef::Psd(blk, k), -1.0));
                    b.row(coefs, 0.0);
                }
            }
        }
        let program = b.finish();
        let sol = solve(&program, sopts);
        Ok((sol.status, -sol.objective))
    }
}

/// Lifted-coordinate map of the original `u` for a `(w, u, 1)` lifting.
fn u_map(lf: &Lifting) -> Vec<usize> {
    (0..lf.set.k - lf.l + 1).map(|c| lf.l + c).collect()
}

/// Outer approximation `U**` over `(w, u, 1)`: `u ∈ U⁰` plus, per axis,
/// `h_{k,2} − u̲_k ≥ w̃_{k,1}` and
/// `(h_{k,ℓ+1} − h_{k,ℓ}) w̃_{k,ℓ−1} ≥ (h_{k,ℓ} − h_{k,ℓ−1}) w̃_{k,ℓ}`, `ℓ = 2..L`.
/// The identity `u_k − u̲_k = Σ_ℓ w̃_{k,ℓ}` holds by construction of `z`.
pub fn build_gwk_outer(u: &UncertaintySet, seg: &AxialSegmentation, lf: &Lifting) -> OuterSet {
    let mut set = OuterSet::from_cone(&u.cone, lf.set.dim(), &u_map(lf));
    let h_idx = lf.set.dim() - 1;
    let nl = lf.l;
    for k in 0..seg.breakpoints.len() {
        let lk = seg.pieces(k);
        if lk < 2 {
            continue;
        }
        // h_2 − u̲ − (z_1 − z_2) ≥ 0
        let mut f: BTreeMap<usize, f64> = BTreeMap::new();
        add_form(&mut f, &[(h_idx, seg.h(k, 2) - seg.lower[k])], 1.0);
        add_form(&mut f, &seg.z_form(k, 1), -1.0);
        add_form(&mut f, &seg.z_form(k, 2), 1.0);
        set.ineq.push(finish_form(f));
        for l in 2..=lk {
            let a = seg.h(k, l + 1) - seg.h(k, l);
            let b = seg.h(k, l) - seg.h(k, l - 1);
            let mut f = BTreeMap::new();
            add_form(&mut f, &seg.z_form(k, l - 1), a);
            add_form(&mut f, &seg.z_form(k, l), -a - b);
            add_form(&mut f, &seg.z_form(k, l + 1), b);
            set.ineq.push(finish_form(f));
        }
    }
    debug_assert_eq!(nl, seg.folds().len());
    set
}

/// Outer approximation `U*`: bounds on every `z_{k,ℓ}` and, for each
/// `ℓ = 2..L`, a 3×3 PSD moment block `Z` of `(z_{ℓ−1}, z_ℓ, z_{ℓ+1})` tied
/// by five linear inequalities.
pub fn build_ustar(u: &UncertaintySet, seg: &AxialSegmentation, lf: &Lifting) -> OuterSet {
    let dim = lf.set.dim();
    let h_idx = dim - 1;
    let mut set = OuterSet::from_cone(&u.cone, dim, &u_map(lf));
    let nl: usize = lf.l;
    let kk = seg.breakpoints.len();
    for k in 0..kk {
        let lk = seg.pieces(k);
        let uk = nl + k;
        for l in 1..=lk + 1 {
            let z = seg.z_form(k, l);
            set.ineq.push(z.clone());
            // z ≥ u − h
            let mut f = BTreeMap::new();
            add_form(&mut f, &z, 1.0);
            add_form(&mut f, &[(uk, -1.0), (h_idx, seg.h(k, l))], 1.0);
            set.ineq.push(finish_form(f));
            // ū − u̲ ≥ z (the bound on a shifted axis)
            let mut f = BTreeMap::new();
            add_form(&mut f, &[(h_idx, seg.upper[k] - seg.lower[k])], 1.0);
            add_form(&mut f, &z, -1.0);
            set.ineq.push(finish_form(f));
        }
        for l in 2..=lk {
            let base = dim + set.n_aux;
            set.n_aux += 6;
            // Z entries in packed order: 11, 12, 22, 13, 23, 33
            let zi = |i: usize, j: usize| base + svec_index(i.min(j), i.max(j));
            let (z1, z2, z3) = (seg.z_form(k, l - 1), seg.z_form(k, l), seg.z_form(k, l + 1));
            let (hm, h0, hp) = (seg.h(k, l - 1), seg.h(k, l), seg.h(k, l + 1));
            let ineq = |zs: &[(usize, f64)], lin: &[(&Vec<(usize, f64)>, f64)]| {
                let mut f = BTreeMap::new();
                add_form(&mut f, zs, 1.0);
                for &(form, s) in lin {
                    add_form(&mut f, form, s);
                }
                finish_form(f)
            };
            set.ineq.push(ineq(&[(zi(0, 2), 1.0), (zi(2, 2), -1.0)], &[(&z3, hm - hp)]));
            set.ineq.push(ineq(&[(zi(1, 2), 1.0), (zi(2, 2), -1.0)], &[(&z3, h0 - hp)]));
            set.ineq.push(ineq(
                &[(zi(0, 2), 1.0), (zi(0, 0), -1.0), (zi(1, 1), 1.0), (zi(1, 2), -1.0)],
                &[(&z1, hp - hm), (&z2, h0 - hp)],
            ));
            set.ineq.push(ineq(
                &[(zi(2, 2), 1.0), (zi(0, 2), -1.0), (zi(0, 1), 1.0), (zi(1, 1), -1.0)],
                &[(&z3, hp - hm), (&z2, hm - h0)],
            ));
            set.ineq.push(ineq(&[(zi(1, 2), 1.0), (zi(1, 1), -1.0)], &[(&z2, hp - h0)]));
            set.psd.push((3, (0..6).map(|p| vec![(base + p, 1.0)]).collect()));
        }
    }
    set
}

fn add_form(acc: &mut BTreeMap<usize, f64>, form: &[(usize, f64)], s: f64) {
    for &(i, a) in form {
        *acc.entry(i).or_insert(0.0) += s * a;
    }
}

fn finish_form(acc: BTreeMap<usize, f64>) -> Vec<(usize, f64)> {
    acc.into_iter().filter(|&(_, a)| a != 0.0).collect()
}

/// Exact moment completion of a lifted point for [`build_ustar`]:
/// `Z = ζζᵀ` with `ζ = (z_{ℓ−1}, z_ℓ, z_{ℓ+1})`.
pub fn ustar_aux(seg: &AxialSegmentation, v: &[f64]) -> Vec<f64> {
    let mut aux = Vec::new();
    for k in 0..seg.breakpoints.len() {
        for l in 2..=seg.pieces(k) {
            let zeta: Vec<f64> = (l - 1..=l + 1).map(|q| OuterSet::eval(&seg.z_form(k, q), v)).collect();
            for j in 0..3 {
                for i in 0..=j {
                    aux.push(zeta[i] * zeta[j]);
                }
            }
        }
    }
    aux
}

/// Robust counterpart of a linear-rule copositive program with every
/// membership affine in `v`, taken over the convex set `set` by conic
/// duality: `inf_{(v,a) ∈ S} l(y)ᵀv ≥ 0` iff some `λ ∈ S*` has `Gᵀλ = l`
/// and `l_h − gᵀλ ≥ 0`.
pub fn robust_program(cp: &CopositiveProgram, set: &OuterSet) -> Result<(ConicProgram, Vec<Option<usize>>)> {
    let dim = cp.cone().dim;
    if set.dim != dim {
        return Err(Error::Dimension(format!("outer set has dimension {}, program {dim}", set.dim)));
    }
    let h = dim - 1;
    let nv = cp.n_vars();
    let mut used = vec![false; nv];
    for (k, &c) in cp.objective.iter().enumerate() {
        used[k] |= c != 0.0;
    }
    for (row, _) in &cp.linear {
        for &(v, _) in row {
            used[v] = true;
        }
    }
    for con in &cp.constraints {
        for t in con.terms.iter().filter(|t| t.quad.is_none()) {
            used[t.var] = true;
            if t.mat.entries.iter().any(|&(i, j, _)| i != h && j != h) {
                return Err(Error::Invalid(format!(
                    "{}: outer-set pipelines need memberships affine in the uncertainty",
                    con.label
                )));
            }
        }
        if con.base.entries.iter().any(|&(i, j, _)| i != h && j != h) {
            return Err(Error::Invalid(format!("{}: base matrix is not affine", con.label)));
        }
    }
    let mut b = ProgramBuilder::new();
    let mut refs = vec![None; nv];
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
    let width = dim + set.n_aux;
    for con in &cp.constraints {
        // l_i = 2V_ih (i < h), l_h = V_hh
        let mut l_const = vec![0.0; dim];
        let mut l_vars: Vec<Vec<(VarRef, f64)>> = vec![Vec::new(); dim];
        let scale = |i: usize, j: usize| if i == j { 1.0 } else { 2.0 };
        for &(i, j, a) in &con.base.entries {
            let c = if i == h { j } else { i };
            l_const[c] += scale(i, j) * a;
        }
        for t in con.terms.iter().filter(|t| t.quad.is_none()) {
            for &(i, j, a) in &t.mat.entries {
                let c = if i == h { j } else { i };
                l_vars[c].push((refs[t.var].unwrap(), scale(i, j) * a));
            }
        }
        // Gᵀλ per coordinate
        let mut g_cols: Vec<Vec<(VarRef, f64)>> = vec![Vec::new(); width];
        for form in &set.ineq {
            let lam = b.nonneg();
            for &(i, a) in form {
                g_cols[i].push((lam, a));
            }
        }
        for rows in &set.soc {
            let blk = b.soc(rows.len());
            let last = rows.len() - 1;
            for (r, form) in rows.iter().enumerate() {
                let slot = if r == last { 0 } else { r + 1 };
                for &(i, a) in form {
                    g_cols[i].push((VarRef::Soc(blk, slot), a));
                }
            }
        }
        for (side, entries) in &set.psd {
            let blk = b.psd(*side);
            for jj in 0..*side {
                for ii in 0..=jj {
                    let k = svec_index(ii, jj);
                    let s = if ii == jj { 1.0 } else { SQRT2 };
                    for &(i, a) in &entries[k] {
                        g_cols[i].push((VarRef::Psd(blk, k), s * a));
                    }
                }
            }
            debug_assert_eq!(entries.len(), svec_len(*side));
        }
        for i in 0..width {
            if i == h {
                continue;
            }
            let mut coefs: Vec<(VarRef, f64)> = if i < dim { l_vars[i].clone() } else { Vec::new() };
            coefs.extend(g_cols[i].iter().map(|&(v, a)| (v, -a)));
            let rhs = if i < dim { -l_const[i] } else { 0.0 };
            if !coefs.is_empty() || rhs != 0.0 {
                b.row(coefs, rhs);
            }
        }
        let slack = b.nonneg();
        let mut coefs = l_vars[h].clone();
        coefs.extend(g_cols[h].iter().map(|&(v, a)| (v, -a)));
        coefs.push((slack, -1.0));
        b.row(coefs, -l_const[h]);
    }
    let program = b.finish();
    program.check()?;
    let cols = refs.iter().map(|r| r.map(|v| program.col(v))).collect();
    Ok((program, cols))
}

/// Solves the robust counterpart of [`robust_program`].
pub fn solve_outer(cp: &CopositiveProgram, set: &OuterSet, sopts: &SolveOptions) -> Result<CopSolution> {
    let t0 = std::time::Instant::now();
    let (program, cols) = robust_program(cp, set)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let solution = solve(&program, sopts);
    let vals = if solution.z.len() == program.n_vars() {
        cols.iter().map(|c| c.map_or(0.0, |i| solution.z[i])).collect()
    } else {
        vec![0.0; cp.n_vars()]
    };
    let min_value = match solution.status {
        Status::Optimal => solution.objective,
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => f64::NAN,
    };
    Ok(CopSolution { status: solution.status, value: cp.report(min_value), min_value, vals, solution, assemble_seconds })
}

/// The 3×3 certificate of the `U* ⊆ U**` argument for breakpoints
/// `h1 < h2 < h3`: PSD within 1e-9 and the three linear equalities.
pub fn check_dual_certificate(h1: f64, h2: f64, h3: f64) -> Result<bool> {
    if !(h1 < h2 && h2 < h3) {
        return Err(Error::Invalid(format!("breakpoints must increase strictly: {h1}, {h2}, {h3}")));
    }
    let (s, hi, lo) = (h3 - h1, h3 - h2, h2 - h1);
    let a = hi / s;
    let c = a;
    let b = s / hi;
    let d = 2.0;
    let e = lo * lo / (s * hi);
    let m = Mat::from_row_slice(
        3,
        3,
        &[
            c,
            -d / 2.0,
            (d - a - c) / 2.0,
            -d / 2.0,
            -c + d + e,
            (-b + c - e) / 2.0,
            (d - a - c) / 2.0,
            (-b + c - e) / 2.0,
            a + b - d,
        ],
    );
    let tol = 1e-9;
    let scale = 1.0 + m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let psd = min_eig(&m) >= -tol * scale;
    let eq1 = (s * c - hi).abs() <= tol * (1.0 + s);
    let eq2 = (lo * d + hi * c - s - hi * e).abs() <= tol * (1.0 + s);
    let eq3 = (lo + s * a + hi * b - s * d).abs() <= tol * (1.0 + s);
    Ok(psd && eq1 && eq2 && eq3 && [a, b, c, d, e].iter().all(|&x| x >= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cone_from_polytope;

    fn box_set(k: usize) -> UncertaintySet {
        let mut p = Mat::zeros(2 * k, k);
        let mut q = vec![0.0; 2 * k];
        for i in 0..k {
            p[(2 * i, i)] = 1.0;
            p[(2 * i + 1, i)] = -1.0;
            q[2 * i] = -1.0;
            q[2 * i + 1] = -1.0;
        }
        // [−1, 1]^k as {u : Pu ≥ q}
        UncertaintySet::from_cone(cone_from_polytope(&p, &q).unwrap())
    }

    #[test]
    fn one_fold_on_interval() {
        let lf = make_lifting(&box_set(1), &[Fold { g: vec![1.0], h: 0.0 }]).unwrap();
        assert!((lf.w_upper[0] - 1.0).abs() < 1e-7);
        assert_eq!(lf.set.dim(), 3);
        let v = lf.lift(&[-0.4, 1.0]);
        assert_eq!(v, vec![0.0, -0.4, 1.0]);
        assert!(lf.set.contains(&v, 1e-9));
    }

    #[test]
    fn complementarity_matrix_shape() {
        let lf = make_lifting(&box_set(2), &[Fold { g: vec![0.0, 1.0], h: 0.5 }]).unwrap();
        let c = &lf.comp_mats[0];
        // w² − w·(u₂ − ½)
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 2)], -0.5);
        assert_eq!(c[(0, 3)], 0.25);
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c, &c.transpose());
    }

    #[test]
    fn axial_point_example() {
        let seg = AxialSegmentation::new(&box_set(1), vec![vec![-1.0, 0.0]]).unwrap();
        let (w, z) = seg.axis_point(0, 0.5);
        assert_eq!(w, vec![1.0, 0.5]);
        assert_eq!(z, vec![1.5, 0.5, 0.0]);
    }

    #[test]
    fn axial_rejects_bad_breakpoints() {
        assert!(AxialSegmentation::new(&box_set(1), vec![vec![-0.5, 0.0]]).is_err());
        assert!(AxialSegmentation::new(&box_set(1), vec![vec![-1.0, 1.5]]).is_err());
        assert!(AxialSegmentation::new(&box_set(1), vec![vec![-1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn gwk_excludes_inconsistent_point() {
        let u = box_set(1);
        let seg = AxialSegmentation::new(&u, vec![vec![-1.0, 0.0]]).unwrap();
        let lf = axial_lift(&u, &seg).unwrap();
        let set = build_gwk_outer(&u, &seg, &lf);
        // lifted coordinates (z₂, u, 1); w̃ = (1.2, 0.9) with u = 1.1 breaks
        // u − u̲ = w̃₁ + w̃₂ and lies outside the box
        assert!(!set.contains(&[0.9, 1.1, 1.0], &[], 1e-9));
        assert!(set.contains(&[0.5, 0.5, 1.0], &[], 1e-9));
    }

    #[test]
    fn dual_certificate_examples() {
        assert!(check_dual_certificate(-1.0, 0.0, 1.0).unwrap());
        assert!(check_dual_certificate(0.0, 1.0, 10.0).unwrap());
        assert!(check_dual_certificate(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lift_spec_parsing() {
        let f = lift_spec_from_json(r#"{"folds":[{"g":[1,0],"h":0.5}]}"#).unwrap();
        assert_eq!(f, LiftSpec::Folds(vec![Fold { g: vec![1.0, 0.0], h: 0.5 }]));
        let a = lift_spec_from_json(r#"{"axial":{"breakpoints":[[-1,0]]}}"#).unwrap();
        assert_eq!(a, LiftSpec::Axial(AxialSpec { breakpoints: vec![vec![-1.0, 0.0]] }));
        assert!(lift_spec_from_json(r#"{"bogus":1}"#).is_err());
    }
}
