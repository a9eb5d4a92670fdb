//! Problem data in homogenized standard form.
//!
//! Every uncertainty vector carries its homogenization coordinate last:
//! `u = (u_1, …, u_K, 1)`. Stage truncations `uᵗ` keep the first `Kᵗ`
//! primitive coordinates followed by the same scalar.

pub mod schema;
mod validate;

pub use validate::{recession_trivial, validate, Assumption2, ValidationReport};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{max_asymmetry, psd_factor, quad_form, row_dot, symmetrize, Mat};
use serde::{Deserialize, Serialize};

/// Cone `K = {u : P̂u ≥ 0, R̂_b u ∈ SOC ∀b}`. SOC blocks store the radius
/// row last.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeK {
    pub dim: usize,
    pub p_rows: Mat,
    pub soc_blocks: Vec<Mat>,
}

impl ConeK {
    /// Builds a cone, appending `e_{K+1}ᵀ` to the polyhedral rows when no
    /// row of that exact form is present.
    pub fn new(dim: usize, p_rows: Mat, soc_blocks: Vec<Mat>) -> Result<Self> {
        if dim == 0 {
            return dim_err("cone dimension must be at least 1");
        }
        if p_rows.ncols() != dim && p_rows.nrows() > 0 {
            return dim_err(format!("P rows have {} columns, expected {dim}", p_rows.ncols()));
        }
        for (b, r) in soc_blocks.iter().enumerate() {
            if r.ncols() != dim {
                return dim_err(format!("SOC block {b} has {} columns, expected {dim}", r.ncols()));
            }
            if r.nrows() < 2 {
                return Err(Error::Invalid(format!("SOC block {b} has fewer than 2 rows")));
            }
        }
        let p_rows = if p_rows.nrows() == 0 { Mat::zeros(0, dim) } else { p_rows };
        let has_e = (0..p_rows.nrows()).any(|r| {
            (0..dim - 1).all(|c| p_rows[(r, c)] == 0.0) && p_rows[(r, dim - 1)] == 1.0
        });
        let p_rows = if has_e {
            p_rows
        } else {
            let nr = p_rows.nrows();
            let mut p = p_rows.insert_row(nr, 0.0);
            let last = p.nrows() - 1;
            p[(last, dim - 1)] = 1.0;
            p
        };
        Ok(ConeK { dim, p_rows, soc_blocks })
    }

    pub fn k(&self) -> usize {
        self.dim - 1
    }

    pub fn homog(&self) -> usize {
        self.dim - 1
    }

    pub fn n_p(&self) -> usize {
        self.p_rows.nrows()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        if u.len() != self.dim {
            return false;
        }
        (0..self.n_p()).all(|r| row_dot(&self.p_rows, r, u) >= -tol)
            && self.soc_blocks.iter().all(|b| soc_residual(b, u) >= -tol)
    }

    /// Embeds the cone into a larger coordinate system via `map[i]` = new
    /// index of old coordinate `i`.
    pub fn embed(&self, new_dim: usize, map: &[usize]) -> ConeK {
        let scatter = |m: &Mat| {
            let mut out = Mat::zeros(m.nrows(), new_dim);
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    out[(r, map[c])] = m[(r, c)];
                }
            }
            out
        };
        ConeK {
            dim: new_dim,
            p_rows: scatter(&self.p_rows),
            soc_blocks: self.soc_blocks.iter().map(scatter).collect(),
        }
    }
}

/// `radius − ‖rest‖` for a block whose last row is the radius.
pub fn soc_residual(block: &Mat, u: &[f64]) -> f64 {
    let m = block.nrows();
    let t = row_dot(block, m - 1, u);
    let n2: f64 = (0..m - 1).map(|r| row_dot(block, r, u).powi(2)).sum();
    t - n2.sqrt()
}

/// Cone of the polytope `{u : P u ≥ q}`: rows `[P | −q]` plus `e_{K+1}`.
pub fn cone_from_polytope(p: &Mat, q: &[f64]) -> Result<ConeK> {
    if p.nrows() != q.len() {
        return dim_err(format!("P has {} rows but q has length {}", p.nrows(), q.len()));
    }
    let k = p.ncols();
    let mut rows = Mat::zeros(p.nrows(), k + 1);
    for r in 0..p.nrows() {
        for c in 0..k {
            rows[(r, c)] = p[(r, c)];
        }
        rows[(r, k)] = -q[r];
    }
    ConeK::new(k + 1, rows, Vec::new())
}

/// Cone of the intersection of ellipsoids `ξᵀF_ℓξ + 2g_ℓᵀξ ≤ h_ℓ`.
pub fn cone_from_ellipsoids(f: &[Mat], g: &[Vec<f64>], h: &[f64]) -> Result<ConeK> {
    if f.is_empty() || f.len() != g.len() || f.len() != h.len() {
        return dim_err("ellipsoid lists must be nonempty and of equal length");
    }
    let k = f[0].nrows();
    let mut blocks = Vec::with_capacity(f.len());
    for (l, ((fl, gl), &hl)) in f.iter().zip(g).zip(h).enumerate() {
        if fl.nrows() != k || fl.ncols() != k || gl.len() != k {
            return dim_err(format!("ellipsoid {l} has inconsistent dimensions"));
        }
        let ev = crate::linalg::min_eig(fl);
        if ev < -1e-10 {
            return Err(Error::Invalid(format!("F_{l} is not PSD (min eigenvalue {ev:e})")));
        }
        let pl = psd_factor(fl, 1e-12);
        let mut block = Mat::zeros(pl.nrows() + 2, k + 1);
        for c in 0..k {
            block[(0, c)] = gl[c];
            block[(pl.nrows() + 1, c)] = -gl[c];
        }
        block[(0, k)] = 0.5 * (1.0 - hl);
        block[(pl.nrows() + 1, k)] = 0.5 * (1.0 + hl);
        for r in 0..pl.nrows() {
            for c in 0..k {
                block[(r + 1, c)] = pl[(r, c)];
            }
        }
        blocks.push(block);
    }
    ConeK::new(k + 1, Mat::zeros(0, k + 1), blocks)
}

/// `U = {u ∈ K : u_{K+1} = 1, uᵀĈ_i u = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySet {
    pub cone: ConeK,
    pub quad_mats: Vec<Mat>,
    pub k: usize,
}

impl UncertaintySet {
    pub fn new(cone: ConeK, quad_mats: Vec<Mat>) -> Result<Self> {
        let n = cone.dim;
        for (i, c) in quad_mats.iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return dim_err(format!("quadratic matrix {i} is not {n}×{n}"));
            }
            if max_asymmetry(c) > 1e-12 {
                return Err(Error::Invalid(format!("quadratic matrix {i} is not symmetric")));
            }
        }
        let quad_mats = quad_mats.iter().map(symmetrize).collect();
        Ok(UncertaintySet { k: n - 1, cone, quad_mats })
    }

    pub fn from_cone(cone: ConeK) -> Self {
        UncertaintySet { k: cone.dim - 1, cone, quad_mats: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.cone.dim
    }

    /// Membership of a homogenized point (last entry must be 1).
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim()
            && (u[self.k] - 1.0).abs() <= tol
            && self.cone.contains(u, tol)
            && self.quad_mats.iter().all(|c| quad_form(c, u).abs() <= tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// `{x : G x ≥ g}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    pub g: Mat,
    pub rhs: Vec<f64>,
}

impl Polyhedron {
    pub fn free(m: usize) -> Self {
        Polyhedron { g: Mat::zeros(0, m), rhs: Vec::new() }
    }

    pub fn nonneg(m: usize) -> Self {
        Polyhedron { g: Mat::identity(m, m), rhs: vec![0.0; m] }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.g.nrows()).all(|r| row_dot(&self.g, r, x) >= self.rhs[r] - tol)
    }
}

/// Recourse data of one stage. `b_hat[k]` is `J×N_t` for `k ≤ Kᵗ`
/// (index `Kᵗ` multiplies the homogenization scalar) and `d_hat` is
/// `N_t×(Kᵗ+1)`. `b_hat` may instead hold `K+1` slices over the whole of
/// `u`, for recourse whose constraint coefficients are revealed later than
/// the decision itself (the rule stays a function of `uᵗ`).
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub k: usize,
    pub n: usize,
    pub b_hat: Vec<Mat>,
    pub d_hat: Mat,
}

/// Multi-stage robust linear program
///
/// ```text
/// min  cᵀx + sup_u Σ_t d_t(uᵗ)ᵀ y_t(uᵗ)
/// s.t. A(u¹)x + Σ_t B_t(uᵗ) y_t(uᵗ) ≥ h(u)   ∀u ∈ U,   x ∈ X
/// ```
///
/// with `A(u¹) = Σ_k Â_k u¹_k`, `B_t(uᵗ) = Σ_k B̂_{k,t} uᵗ_k`,
/// `d_t(uᵗ) = D̂_t uᵗ`, `h(u) = Ĥu`. A `Max` problem reads
/// `max cᵀx + inf_u Σ_t d_tᵀy_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MsroProblem {
    pub stages: Vec<Stage>,
    pub j: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a_hat: Vec<Mat>,
    pub h_hat: Mat,
    pub x_set: Polyhedron,
    pub uncertainty: UncertaintySet,
    pub sense: Sense,
}

impl MsroProblem {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn k_total(&self) -> usize {
        self.stages.iter().map(|s| s.k).sum()
    }

    /// `Kᵗ` for the 0-based stage `t`.
    pub fn k_upto(&self, t: usize) -> usize {
        self.stages[..=t].iter().map(|s| s.k).sum()
    }

    /// Coordinates of `uᵗ` inside `u`: the first `Kᵗ` primitive indices
    /// followed by the homogenization index `K`. `t` is 0-based.
    pub fn stage_coords(&self, t: usize) -> Result<Vec<usize>> {
        if t >= self.stages.len() {
            return Err(Error::Invalid(format!(
                "stage {t} out of range (problem has {} stages)",
                self.stages.len()
            )));
        }
        let kt = self.k_upto(t);
        let mut idx: Vec<usize> = (0..kt).collect();
        idx.push(self.k_total());
        Ok(idx)
    }

    pub fn truncate(&self, u: &[f64], t: usize) -> Vec<f64> {
        let kt = self.k_upto(t);
        let mut v = u[..kt].to_vec();
        v.push(u[self.k_total()]);
        v
    }

    pub fn check_dims(&self) -> Result<()> {
        let kk = self.k_total();
        if self.stages.is_empty() {
            return dim_err("at least one recourse stage is required");
        }
        if self.uncertainty.k != kk {
            return dim_err(format!("uncertainty has K={} but stages sum to {kk}", self.uncertainty.k));
        }
        if self.c.len() != self.m {
            return dim_err(format!("c has length {} but M={}", self.c.len(), self.m));
        }
        let k1 = self.stages[0].k;
        if self.a_hat.len() != k1 + 1 {
            return dim_err(format!("A_hat must have K¹+1={} slices, found {}", k1 + 1, self.a_hat.len()));
        }
        for (k, a) in self.a_hat.iter().enumerate() {
            if a.nrows() != self.j || a.ncols() != self.m {
                return dim_err(format!("A_hat[{k}] is {}×{}, expected {}×{}", a.nrows(), a.ncols(), self.j, self.m));
            }
        }
        if self.h_hat.nrows() != self.j || self.h_hat.ncols() != kk + 1 {
            return dim_err(format!("H_hat must be {}×{}", self.j, kk + 1));
        }
        if self.x_set.g.ncols() != self.m || self.x_set.g.nrows() != self.x_set.rhs.len() {
            return dim_err("X polyhedron dimensions are inconsistent");
        }
        for (t, st) in self.stages.iter().enumerate() {
            let kt = self.k_upto(t);
            if st.b_hat.len() != kt + 1 && st.b_hat.len() != kk + 1 {
                return dim_err(format!("stage {t}: B_hat must have {} or {} slices", kt + 1, kk + 1));
            }
            for (k, b) in st.b_hat.iter().enumerate() {
                if b.nrows() != self.j || b.ncols() != st.n {
                    return dim_err(format!("stage {t}: B_hat[{k}] must be {}×{}", self.j, st.n));
                }
            }
            if st.d_hat.nrows() != st.n || st.d_hat.ncols() != kt + 1 {
                return dim_err(format!("stage {t}: D_hat must be {}×{}", st.n, kt + 1));
            }
        }
        Ok(())
    }

    /// Recourse variable `(t, n)` is fixed when neither its constraint
    /// column nor its cost depends on the primitive uncertainty.
    pub fn var_fixed(&self, t: usize, n: usize) -> bool {
        let st = &self.stages[t];
        let kb = st.b_hat.len() - 1;
        let b_const = (0..kb).all(|k| (0..self.j).all(|r| st.b_hat[k][(r, n)] == 0.0));
        let d_const = (0..st.d_hat.ncols() - 1).all(|k| st.d_hat[(n, k)] == 0.0);
        b_const && d_const
    }

    pub fn fixed_recourse(&self, t: usize) -> bool {
        (0..self.stages[t].n).all(|n| self.var_fixed(t, n))
    }

    pub fn all_fixed(&self) -> bool {
        (0..self.stages.len()).all(|t| self.fixed_recourse(t))
    }

    pub fn eval_a(&self, u: &[f64]) -> Mat {
        let k1 = self.stages[0].k;
        let u1 = self.truncate(u, 0);
        let mut a = Mat::zeros(self.j, self.m);
        for k in 0..=k1 {
            if u1[k] != 0.0 {
                a += &self.a_hat[k] * u1[k];
            }
        }
        a
    }

    /// Coordinates of `u` multiplying each slice of stage `t`'s `B̂`.
    pub fn b_coords(&self, t: usize) -> Vec<usize> {
        let kk = self.k_total();
        if self.stages[t].b_hat.len() == kk + 1 {
            (0..=kk).collect()
        } else {
            let mut c: Vec<usize> = (0..self.k_upto(t)).collect();
            c.push(kk);
            c
        }
    }

    /// `B_t` at the full parameter vector `u`.
    pub fn eval_b(&self, t: usize, u: &[f64]) -> Mat {
        let st = &self.stages[t];
        let mut b = Mat::zeros(self.j, st.n);
        for (bk, c) in st.b_hat.iter().zip(self.b_coords(t)) {
            if u[c] != 0.0 {
                b += bk * u[c];
            }
        }
        b
    }

    pub fn eval_d(&self, t: usize, ut: &[f64]) -> Vec<f64> {
        let d = &self.stages[t].d_hat;
        (0..d.nrows()).map(|r| row_dot(d, r, ut)).collect()
    }

    pub fn eval_h(&self, u: &[f64]) -> Vec<f64> {
        (0..self.j).map(|r| row_dot(&self.h_hat, r, u)).collect()
    }

    /// Equivalent minimization problem (objective data negated for `Max`).
    pub fn to_min_form(&self) -> MsroProblem {
        let mut p = self.clone();
        if self.sense == Sense::Max {
            p.c.iter_mut().for_each(|v| *v = -*v);
            for st in &mut p.stages {
                st.d_hat = -&st.d_hat;
            }
            p.sense = Sense::Min;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: &Mat, r: usize) -> Vec<f64> {
        m.row(r).iter().copied().collect()
    }

    #[test]
    fn half_box_cone_rows() {
        let c = cone_from_polytope(&Mat::identity(2, 2), &[-1.0, -1.0]).unwrap();
        assert_eq!(c.n_p(), 3);
        assert_eq!(row(&c.p_rows, 0), vec![1.0, 0.0, 1.0]);
        assert_eq!(row(&c.p_rows, 1), vec![0.0, 1.0, 1.0]);
        assert_eq!(row(&c.p_rows, 2), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn box_cone_has_five_rows() {
        let mut p = Mat::zeros(4, 2);
        p[(0, 0)] = 1.0;
        p[(1, 1)] = 1.0;
        p[(2, 0)] = -1.0;
        p[(3, 1)] = -1.0;
        let c = cone_from_polytope(&p, &[-1.0; 4]).unwrap();
        assert_eq!(c.n_p(), 5);
        assert!(c.soc_blocks.is_empty());
    }

    #[test]
    fn partition_polytope_rows_by_hand() {
        // box rows ±u_k ≥ −1, then cᵀu ≥ 0 and −cᵀu ≥ 0
        let cvec = [2.0, 2.0, 3.0];
        let mut p = Mat::zeros(8, 3);
        for k in 0..3 {
            p[(k, k)] = 1.0;
            p[(3 + k, k)] = -1.0;
            p[(6, k)] = cvec[k];
            p[(7, k)] = -cvec[k];
        }
        let q = [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 0.0, 0.0];
        let cone = cone_from_polytope(&p, &q).unwrap();
        assert_eq!(cone.n_p(), 9);
        let expected_rows: [[f64; 4]; 9] = [
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 1.0],
            [-1.0, 0.0, 0.0, 1.0],
            [0.0, -1.0, 0.0, 1.0],
            [0.0, 0.0, -1.0, 1.0],
            [2.0, 2.0, 3.0, 0.0],
            [-2.0, -2.0, -3.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for (r, e) in expected_rows.iter().enumerate() {
            assert_eq!(row(&cone.p_rows, r), e.to_vec());
        }
        // (0.5, 1, 1) has cᵀu = 6 ≠ 0 and lies outside
        assert!(!cone.contains(&[0.5, 1.0, 1.0, 1.0], 1e-12));
        // (0.5, 1, −1) has cᵀu = 0
        assert!(cone.contains(&[0.5, 1.0, -1.0, 1.0], 1e-12));
    }

    #[test]
    fn polytope_dimension_mismatch() {
        assert!(cone_from_polytope(&Mat::identity(2, 2), &[1.0]).is_err());
    }

    #[test]
    fn unit_ball_block() {
        let c = cone_from_ellipsoids(&[Mat::identity(2, 2)], &[vec![0.0, 0.0]], &[1.0]).unwrap();
        let b = &c.soc_blocks[0];
        assert_eq!(b.nrows(), 4);
        // ½(1−h)τ row vanishes for h = 1
        assert!(row(b, 0).iter().all(|&v| v == 0.0));
        assert_eq!(row(b, 3), vec![0.0, 0.0, 1.0]);
        assert!(c.contains(&[0.6, 0.8, 1.0], 1e-12));
        assert!(!c.contains(&[0.6, 0.81, 1.0], 1e-12));
        assert_eq!(c.n_p(), 1);
    }

    #[test]
    fn degenerate_halfspace_block() {
        let c = cone_from_ellipsoids(&[Mat::zeros(1, 1)], &[vec![1.0]], &[0.0]).unwrap();
        assert_eq!(c.soc_blocks[0].nrows(), 2);
        assert!(c.contains(&[-0.3, 1.0], 1e-12));
        assert!(!c.contains(&[0.01, 1.0], 1e-12));
    }

    #[test]
    fn ellipse_membership_matches_quadratic() {
        let f = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let c = cone_from_ellipsoids(&[f], &[vec![0.0, 0.0]], &[4.0]).unwrap();
        assert!(c.contains(&[2.0, 0.0, 1.0], 1e-9));
        assert!(!c.contains(&[0.0, 1.01, 1.0], 1e-9));
    }

    #[test]
    fn non_psd_ellipsoid_rejected() {
        let f = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(cone_from_ellipsoids(&[f], &[vec![0.0, 0.0]], &[1.0]).is_err());
    }

    #[test]
    fn soc_block_needs_two_rows() {
        assert!(ConeK::new(2, Mat::zeros(0, 2), vec![Mat::zeros(1, 2)]).is_err());
    }
}
