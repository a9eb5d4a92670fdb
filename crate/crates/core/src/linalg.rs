//! Small dense and sparse symmetric helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Position of entry `(i, j)` in the upper-triangular column-major packing
/// used by every PSD block (`i <= j` after sorting).
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Scaled packing: off-diagonals carry a factor √2 so that
/// `svec(A)·svec(B) = <A, B>`.
pub fn svec(a: &Mat) -> Vec<f64> {
    let n = a.nrows();
    let mut out = vec![0.0; svec_len(n)];
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j { a[(i, i)] } else { SQRT2 * 0.5 * (a[(i, j)] + a[(j, i)]) };
            out[svec_index(i, j)] = v;
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> Mat {
    let mut a = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                a[(i, i)] = x;
            } else {
                a[(i, j)] = x / SQRT2;
                a[(j, i)] = x / SQRT2;
            }
        }
    }
    a
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn max_asymmetry(a: &Mat) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

pub fn eigenvalues(a: &Mat) -> Vec<f64> {
    let e = SymmetricEigen::new(symmetrize(a));
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

pub fn min_eig(a: &Mat) -> f64 {
    eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_eig(a: &Mat) -> f64 {
    eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Returns `P` with `F = PᵀP`, dropping eigen-directions below `clip`.
pub fn psd_factor(f: &Mat, clip: f64) -> Mat {
    let e = SymmetricEigen::new(symmetrize(f));
    let n = f.nrows();
    let keep: Vec<usize> = (0..n).filter(|&i| e.eigenvalues[i] > clip).collect();
    let mut p = Mat::zeros(keep.len(), n);
    for (r, &i) in keep.iter().enumerate() {
        let s = e.eigenvalues[i].sqrt();
        for c in 0..n {
            p[(r, c)] = s * e.eigenvectors[(c, i)];
        }
    }
    p
}

pub fn quad_form(a: &Mat, u: &[f64]) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        if u[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)] * u[j];
        }
        s += u[i] * row;
    }
    s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn row_dot(m: &Mat, r: usize, u: &[f64]) -> f64 {
    (0..m.ncols()).map(|c| m[(r, c)] * u[c]).sum()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Sparse symmetric matrix kept as upper-triangular triplets `(i, j, a_ij)`
/// with `i <= j`. Duplicates are merged by [`SparseSym::compress`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(n: usize) -> Self {
        SparseSym { n, entries: Vec::new() }
    }

    /// Adds `v` to the symmetric entry pair `(i, j)`/`(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            self.entries.push((i, j, v));
        }
    }

    /// Adds `s·½(a bᵀ + b aᵀ)` for sparse vectors `a`, `b`.
    pub fn add_sym_outer(&mut self, s: f64, a: &[(usize, f64)], b: &[(usize, f64)]) {
        for &(i, x) in a {
            for &(j, y) in b {
                if i == j {
                    self.add(i, i, s * x * y);
                } else {
                    // each unordered off-diagonal pair receives half from a_i b_j
                    self.add(i, j, 0.5 * s * x * y);
                }
            }
        }
    }

    pub fn add_dense(&mut self, m: &Mat, s: f64) {
        for j in 0..m.ncols() {
            for i in 0..=j {
                let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
                self.add(i, j, s * v);
            }
        }
    }

    pub fn from_dense(m: &Mat) -> Self {
        let mut s = SparseSym::new(m.nrows());
        s.add_dense(m, 1.0);
        s.compress();
        s
    }

    pub fn compress(&mut self) {
        self.entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    pub fn quad(&self, u: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * u[i] * u[i] } else { 2.0 * v * u[i] * u[j] })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
