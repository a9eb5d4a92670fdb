//! Incremental construction of a [`ConicProgram`] when the number of
//! variables of each cone type is not known up front.

use super::ConicProgram;
use crate::linalg::svec_len;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Free(usize),
    Nonneg(usize),
    /// `(block, position)` with the radius at position 0.
    Soc(usize, usize),
    /// `(block, svec position)`.
    Psd(usize, usize),
}

#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    pub n_free: usize,
    pub n_nonneg: usize,
    pub soc_dims: Vec<usize>,
    pub psd_dims: Vec<usize>,
    rows: Vec<(Vec<(VarRef, f64)>, f64)>,
    obj: Vec<(VarRef, f64)>,
    pub c0: f64,
    names: Vec<(VarRef, String)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn free(&mut self) -> VarRef {
        self.n_free += 1;
        VarRef::Free(self.n_free - 1)
    }

    pub fn nonneg(&mut self) -> VarRef {
        self.n_nonneg += 1;
        VarRef::Nonneg(self.n_nonneg - 1)
    }

    pub fn soc(&mut self, dim: usize) -> usize {
        self.soc_dims.push(dim);
        self.soc_dims.len() - 1
    }

    pub fn psd(&mut self, side: usize) -> usize {
        self.psd_dims.push(side);
        self.psd_dims.len() - 1
    }

    pub fn name(&mut self, v: VarRef, name: impl Into<String>) {
        self.names.push((v, name.into()));
    }

    pub fn row(&mut self, coefs: Vec<(VarRef, f64)>, rhs: f64) {
        self.rows.push((coefs, rhs));
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&mut self, v: VarRef, coef: f64) {
        self.obj.push((v, coef));
    }

    /// Final column index of every reference.
    pub fn index_fn(&self) -> impl Fn(VarRef) -> usize {
        let nf = self.n_free;
        let nl = self.n_nonneg;
        let mut soc_off = Vec::with_capacity(self.soc_dims.len());
        let mut acc = nf + nl;
        for &d in &self.soc_dims {
            soc_off.push(acc);
            acc += d;
        }
        let mut psd_off = Vec::with_capacity(self.psd_dims.len());
        for &d in &self.psd_dims {
            psd_off.push(acc);
            acc += svec_len(d);
        }
        move |v| match v {
            VarRef::Free(i) => i,
            VarRef::Nonneg(i) => nf + i,
            VarRef::Soc(b, i) => soc_off[b] + i,
            VarRef::Psd(b, i) => psd_off[b] + i,
        }
    }

    pub fn finish(self) -> ConicProgram {
        let idx = self.index_fn();
        let mut cp = ConicProgram::new(self.n_free, self.n_nonneg, self.soc_dims.clone(), self.psd_dims.clone());
        let total: usize = self.rows.iter().map(|r| r.0.len()).sum();
        cp.a.reserve(total);
        for (r, (coefs, rhs)) in self.rows.iter().enumerate() {
            for &(v, a) in coefs {
                if a != 0.0 {
                    cp.a.push((r, idx(v), a));
                }
            }
            cp.b.push(*rhs);
        }
        cp.m = self.rows.len();
        for &(v, a) in &self.obj {
            cp.c[idx(v)] += a;
        }
        cp.c0 = self.c0;
        cp.names = self.names.iter().map(|(v, s)| (idx(*v), s.clone())).collect();
        cp
    }
}
