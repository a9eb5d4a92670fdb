//! Standard-form conic programs
//!
//! ```text
//! min  cᵀz + c0   s.t.  A z = b,   z ∈ F^{n_f} × ℝ₊^{n_l} × Q^{q_1} × … × S₊^{s_1} × …
//! ```
//!
//! Variables are laid out block by block in that order. Second-order cone
//! blocks put the radius first; PSD blocks use the √2-scaled upper
//! triangular packing of [`crate::linalg::svec`].

pub mod assemble;
pub mod builder;
pub mod cbf;
pub mod lp;
pub mod sdpa;
mod solve;

pub use assemble::{assemble, Approx, AssembleOptions, Assembled, Structure};
pub use solve::{residuals, solve, Method, Residuals, Solution, SolveOptions, Status};

use crate::linalg::svec_len;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_free: usize,
    pub n_nonneg: usize,
    pub soc_dims: Vec<usize>,
    pub psd_dims: Vec<usize>,
    /// Row count of `A`.
    pub m: usize,
    /// Triplets `(row, col, value)`; duplicates are summed.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub c0: f64,
    /// Optional human-readable names for selected variables.
    #[serde(default)]
    pub names: Vec<(usize, String)>,
}

impl ConicProgram {
    pub fn new(n_free: usize, n_nonneg: usize, soc_dims: Vec<usize>, psd_dims: Vec<usize>) -> Self {
        let mut p = ConicProgram {
            n_free,
            n_nonneg,
            soc_dims,
            psd_dims,
            m: 0,
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            c0: 0.0,
            names: Vec::new(),
        };
        p.c = vec![0.0; p.n_vars()];
        p
    }

    pub fn n_soc(&self) -> usize {
        self.soc_dims.iter().sum()
    }

    pub fn n_psd(&self) -> usize {
        self.psd_dims.iter().map(|&d| svec_len(d)).sum()
    }

    pub fn n_vars(&self) -> usize {
        self.n_free + self.n_nonneg + self.n_soc() + self.n_psd()
    }

    pub fn nonneg_offset(&self) -> usize {
        self.n_free
    }

    pub fn soc_offset(&self, block: usize) -> usize {
        self.n_free + self.n_nonneg + self.soc_dims[..block].iter().sum::<usize>()
    }

    pub fn psd_offset(&self, block: usize) -> usize {
        self.n_free
            + self.n_nonneg
            + self.n_soc()
            + self.psd_dims[..block].iter().map(|&d| svec_len(d)).sum::<usize>()
    }

    /// Column of a builder reference in this program's layout.
    pub fn col(&self, v: builder::VarRef) -> usize {
        match v {
            builder::VarRef::Free(i) => i,
            builder::VarRef::Nonneg(i) => self.n_free + i,
            builder::VarRef::Soc(b, i) => self.soc_offset(b) + i,
            builder::VarRef::Psd(b, i) => self.psd_offset(b) + i,
        }
    }

    /// Appends one equality row `Σ coef·z = rhs` and returns its index.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.m;
        for &(j, v) in coefs {
            if v != 0.0 {
                self.a.push((r, j, v));
            }
        }
        self.b.push(rhs);
        self.m += 1;
        r
    }

    /// Merges duplicate triplets, drops zeros and sorts by (row, col).
    pub fn canonical_a(&self) -> Vec<(usize, usize, f64)> {
        let mut t = self.a.clone();
        t.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match out.last_mut() {
                Some(l) if l.0 == r && l.1 == c => l.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        out
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c0 + crate::linalg::dot(&self.c, z)
    }

    /// Dimension check used before solving or exporting.
    pub fn check(&self) -> crate::error::Result<()> {
        let n = self.n_vars();
        if self.c.len() != n {
            return crate::error::dim_err(format!("c has length {} but program has {n} variables", self.c.len()));
        }
        if self.b.len() != self.m {
            return crate::error::dim_err(format!("b has length {} but A has {} rows", self.b.len(), self.m));
        }
        if let Some(&(r, c, _)) = self.a.iter().find(|&&(r, c, _)| r >= self.m || c >= n) {
            return crate::error::dim_err(format!("A entry ({r}, {c}) out of range"));
        }
        if self.soc_dims.iter().any(|&d| d == 0) || self.psd_dims.iter().any(|&d| d == 0) {
            return crate::error::dim_err("cone blocks must be nonempty");
        }
        Ok(())
    }
}
