//! JSON problem files (`"schema": "copodr-v1"`). Matrices are row-major
//! nested arrays; every dimension is stated explicitly and checked.

use super::{ConeK, MsroProblem, Polyhedron, Sense, Stage, UncertaintySet};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "copodr-v1";

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: String,
    pub sense: Sense,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub c: Vec<f64>,
    #[serde(rename = "A_hat")]
    pub a_hat: Vec<Rows>,
    #[serde(rename = "H_hat")]
    pub h_hat: Rows,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<PolyFile>,
    pub stages: Vec<StageFile>,
    pub uncertainty: UncertaintyFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFile {
    #[serde(rename = "G")]
    pub g: Rows,
    pub g_rhs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "B_hat")]
    pub b_hat: Vec<Rows>,
    #[serde(rename = "D_hat")]
    pub d_hat: Rows,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P_rows")]
    pub p_rows: Rows,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soc_blocks: Vec<Rows>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quad_mats: Vec<Rows>,
}

pub(crate) fn to_mat(rows: &Rows, nrows: usize, ncols: usize, what: &str) -> Result<Mat> {
    if rows.len() != nrows {
        return Err(Error::Schema(format!("{what}: expected {nrows} rows, found {}", rows.len())));
    }
    let mut m = Mat::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Schema(format!("{what}: row {r} has {} entries, expected {ncols}", row.len())));
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Schema(format!("{what}: non-finite entry at ({r}, {c})")));
            }
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// Reads a matrix whose row count is taken from the data itself.
fn to_mat_any_rows(rows: &Rows, ncols: usize, what: &str) -> Result<Mat> {
    to_mat(rows, rows.len(), ncols, what)
}

pub(crate) fn from_mat(m: &Mat) -> Rows {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

impl UncertaintyFile {
    pub fn build(&self) -> Result<UncertaintySet> {
        let n = self.k + 1;
        let p = to_mat_any_rows(&self.p_rows, n, "uncertainty.P_rows")?;
        let socs = self
            .soc_blocks
            .iter()
            .enumerate()
            .map(|(b, r)| to_mat_any_rows(r, n, &format!("uncertainty.soc_blocks[{b}]")))
            .collect::<Result<Vec<_>>>()?;
        let quads = self
            .quad_mats
            .iter()
            .enumerate()
            .map(|(i, r)| to_mat(r, n, n, &format!("uncertainty.quad_mats[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let cone = ConeK::new(n, p, socs).map_err(|e| Error::Schema(e.to_string()))?;
        UncertaintySet::new(cone, quads).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_set(u: &UncertaintySet) -> Self {
        UncertaintyFile {
            k: u.k,
            p_rows: from_mat(&u.cone.p_rows),
            soc_blocks: u.cone.soc_blocks.iter().map(from_mat).collect(),
            quad_mats: u.quad_mats.iter().map(from_mat).collect(),
        }
    }
}

impl ProblemFile {
    pub fn build(&self) -> Result<MsroProblem> {
        if self.schema != SCHEMA {
            return Err(Error::Schema(format!("unsupported schema tag {:?}, expected {SCHEMA:?}", self.schema)));
        }
        if self.stages.is_empty() {
            return Err(Error::Schema("at least one stage is required".into()));
        }
        let k1 = self.stages[0].k;
        if self.a_hat.len() != k1 + 1 {
            return Err(Error::Schema(format!("A_hat must have K¹+1 = {} slices", k1 + 1)));
        }
        let a_hat = self
            .a_hat
            .iter()
            .enumerate()
            .map(|(k, r)| to_mat(r, self.j, self.m, &format!("A_hat[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut stages = Vec::new();
        let mut kt = 0;
        let k_total: usize = self.stages.iter().map(|s| s.k).sum();
        for (t, s) in self.stages.iter().enumerate() {
            kt += s.k;
            if s.b_hat.len() != kt + 1 && s.b_hat.len() != k_total + 1 {
                return Err(Error::Schema(format!(
                    "stages[{t}].B_hat must have {} (or {}) slices",
                    kt + 1,
                    k_total + 1
                )));
            }
            let b_hat = s
                .b_hat
                .iter()
                .enumerate()
                .map(|(k, r)| to_mat(r, self.j, s.n, &format!("stages[{t}].B_hat[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            let d_hat = to_mat(&s.d_hat, s.n, kt + 1, &format!("stages[{t}].D_hat"))?;
            stages.push(Stage { k: s.k, n: s.n, b_hat, d_hat });
        }
        let h_hat = to_mat(&self.h_hat, self.j, kt + 1, "H_hat")?;
        if self.c.len() != self.m {
            return Err(Error::Schema(format!("c has length {}, expected M = {}", self.c.len(), self.m)));
        }
        let x_set = match &self.x {
            None => Polyhedron::free(self.m),
            Some(p) => {
                let g = to_mat_any_rows(&p.g, self.m, "X.G")?;
                if p.g_rhs.len() != g.nrows() {
                    return Err(Error::Schema("X.g_rhs length must match X.G rows".into()));
                }
                Polyhedron { g, rhs: p.g_rhs.clone() }
            }
        };
        let uncertainty = self.uncertainty.build()?;
        if uncertainty.k != kt {
            return Err(Error::Schema(format!("uncertainty.K = {} but stages sum to {kt}", uncertainty.k)));
        }
        let p = MsroProblem {
            stages,
            j: self.j,
            m: self.m,
            c: self.c.clone(),
            a_hat,
            h_hat,
            x_set,
            uncertainty,
            sense: self.sense,
        };
        p.check_dims().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(p)
    }

    pub fn from_problem(p: &MsroProblem) -> Self {
        ProblemFile {
            schema: SCHEMA.to_string(),
            sense: p.sense,
            j: p.j,
            m: p.m,
            c: p.c.clone(),
            a_hat: p.a_hat.iter().map(from_mat).collect(),
            h_hat: from_mat(&p.h_hat),
            x: if p.x_set.g.nrows() == 0 {
                None
            } else {
                Some(PolyFile { g: from_mat(&p.x_set.g), g_rhs: p.x_set.rhs.clone() })
            },
            stages: p
                .stages
                .iter()
                .map(|s| StageFile {
                    k: s.k,
                    n: s.n,
                    b_hat: s.b_hat.iter().map(from_mat).collect(),
                    d_hat: from_mat(&s.d_hat),
                })
                .collect(),
            uncertainty: UncertaintyFile::from_set(&p.uncertainty),
        }
    }
}

pub fn problem_from_json(text: &str) -> Result<MsroProblem> {
    let f: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    f.build()
}

pub fn problem_to_json(p: &MsroProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_problem(p)).expect("problem serialization")
}
