//! Exact copositive programs for linear, quadratic and mixed decision rules.
//!
//! Every program is stated in minimization form: objective `cᵀx + λ`,
//! one objective-epigraph membership and one membership per semi-infinite
//! constraint row, each of the form `base + Σ v_i M_i ∈ COP(K)`.

use crate::error::{Error, Result};
use crate::linalg::{quad_form, Mat, SparseSym};
use crate::model::{ConeK, MsroProblem, Sense};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Free,
    Nonneg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

/// One summand `v·M`. `quad` marks multipliers of the set's quadratic
/// equalities (`α_i`, `β_{j,i}`), which carry no problem data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var: usize,
    pub mat: SparseSym,
    pub quad: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopConstraint {
    pub label: String,
    pub dim: usize,
    pub base: SparseSym,
    pub terms: Vec<Term>,
}

impl CopConstraint {
    pub fn eval(&self, vals: &[f64]) -> Mat {
        let mut m = self.base.to_dense();
        for t in &self.terms {
            let v = vals[t.var];
            if v != 0.0 {
                for &(i, j, a) in &t.mat.entries {
                    m[(i, j)] += v * a;
                    if i != j {
                        m[(j, i)] += v * a;
                    }
                }
            }
        }
        m
    }

    pub fn quad_value(&self, vals: &[f64], u: &[f64]) -> f64 {
        self.base.quad(u) + self.terms.iter().map(|t| vals[t.var] * t.mat.quad(u)).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Linear,
    Quadratic,
}

/// Location of one recourse variable's coefficients among the program
/// variables. Linear rules own `Kᵗ+1` consecutive variables; quadratic
/// rules own the upper triangle of a `(Kᵗ+1)×(Kᵗ+1)` matrix, column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSlot {
    pub kind: RuleKind,
    pub first: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLayout {
    /// Indices of `uᵗ` inside `u`.
    pub coords: Vec<usize>,
    pub slots: Vec<RuleSlot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopositiveProgram {
    pub vars: Vec<VarInfo>,
    pub objective: Vec<f64>,
    pub constraints: Vec<CopConstraint>,
    /// Rows `Σ a·v ≥ b` (the first-stage polyhedron).
    pub linear: Vec<(Vec<(usize, f64)>, f64)>,
    #[serde(skip)]
    pub cone: Option<ConeK>,
    #[serde(skip)]
    pub quad_mats: Vec<Mat>,
    pub x_vars: Vec<usize>,
    pub lambda: usize,
    pub stages: Vec<StageLayout>,
    pub sense: Sense,
}

impl CopositiveProgram {
    pub fn cone(&self) -> &ConeK {
        self.cone.as_ref().expect("copositive program without cone")
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    /// Bound in the problem's own sense from the min-form optimum.
    pub fn report(&self, min_value: f64) -> f64 {
        match self.sense {
            Sense::Min => min_value,
            Sense::Max => -min_value,
        }
    }
}

fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn tri_pos(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    b * (b + 1) / 2 + a
}

/// `(Θ̂_j, Λ̂_{j,t})`: row `k` of `Θ̂_j` is row `j` of `Â_k` and row `k` of
/// `Λ̂_{j,t}` is row `j` of `B̂_{k,t}`.
pub fn theta_lambda(p: &MsroProblem, j: usize, t: usize) -> Result<(Mat, Mat)> {
    if j >= p.j || t >= p.stages.len() {
        return Err(Error::Invalid(format!("index (j={j}, t={t}) out of range")));
    }
    let theta = Mat::from_fn(p.a_hat.len(), p.m, |k, m| p.a_hat[k][(j, m)]);
    let st = &p.stages[t];
    let lambda = Mat::from_fn(st.b_hat.len(), st.n, |k, n| st.b_hat[k][(j, n)]);
    Ok((theta, lambda))
}

struct Builder {
    vars: Vec<VarInfo>,
}

impl Builder {
    fn add(&mut self, name: String, kind: VarKind) -> usize {
        self.vars.push(VarInfo { name, kind });
        self.vars.len() - 1
    }
}

/// Builds the copositive program for a per-variable choice of rule kind.
pub fn build_with(p: &MsroProblem, choose: &dyn Fn(usize, usize) -> RuleKind) -> Result<CopositiveProgram> {
    p.check_dims()?;
    let orig_sense = p.sense;
    let p = p.to_min_form();
    let kk = p.k_total();
    let dim = kk + 1;
    let h = kk;
    let ni = p.uncertainty.quad_mats.len();
    let mut b = Builder { vars: Vec::new() };

    // rows g·x_m ≥ 0 with g > 0 become variable domains, so x ≥ 0 holds
    // exactly in the solver's cone rather than up to an equality residual
    let is_sign_row = |r: usize| {
        let nz: Vec<usize> = (0..p.m).filter(|&m| p.x_set.g[(r, m)] != 0.0).collect();
        (nz.len() == 1 && p.x_set.g[(r, nz[0])] > 0.0 && p.x_set.rhs[r] == 0.0).then(|| nz[0])
    };
    let sign_rows: Vec<Option<usize>> = (0..p.x_set.g.nrows()).map(is_sign_row).collect();
    let x_vars: Vec<usize> = (0..p.m)
        .map(|m| {
            let kind = if sign_rows.contains(&Some(m)) { VarKind::Nonneg } else { VarKind::Free };
            b.add(format!("x[{m}]"), kind)
        })
        .collect();
    let lambda = b.add("lambda".into(), VarKind::Free);
    let alpha: Vec<usize> = (0..ni).map(|i| b.add(format!("alpha[{i}]"), VarKind::Free)).collect();

    let mut stages = Vec::with_capacity(p.stages.len());
    for (t, st) in p.stages.iter().enumerate() {
        let coords = p.stage_coords(t)?;
        let width = coords.len();
        let mut slots = Vec::with_capacity(st.n);
        for n in 0..st.n {
            let kind = choose(t, n);
            if kind == RuleKind::Quadratic && !p.var_fixed(t, n) {
                return Err(Error::Invalid(format!(
                    "recourse variable ({t}, {n}) has uncertainty-dependent recourse and cannot use a quadratic rule"
                )));
            }
            let first = b.vars.len();
            match kind {
                RuleKind::Linear => {
                    for k in 0..width {
                        b.add(format!("Y[{t}][{n},{k}]"), VarKind::Free);
                    }
                }
                RuleKind::Quadratic => {
                    for bb in 0..width {
                        for a in 0..=bb {
                            b.add(format!("Q[{t}][{n}][{a},{bb}]"), VarKind::Free);
                        }
                    }
                }
            }
            debug_assert!(kind == RuleKind::Linear || b.vars.len() - first == tri_len(width));
            slots.push(RuleSlot { kind, first });
        }
        stages.push(StageLayout { coords, slots });
    }
    let pi: Vec<usize> = (0..p.j).map(|j| b.add(format!("pi[{j}]"), VarKind::Nonneg)).collect();
    let beta: Vec<Vec<usize>> = (0..p.j)
        .map(|j| (0..ni).map(|i| b.add(format!("beta[{j}][{i}]"), VarKind::Free)).collect())
        .collect();

    let quad_sparse: Vec<SparseSym> = p.uncertainty.quad_mats.iter().map(SparseSym::from_dense).collect();
    let mut e_mat = SparseSym::new(dim);
    e_mat.add(h, h, 1.0);

    let mut objective = vec![0.0; b.vars.len()];
    for (m, &xv) in x_vars.iter().enumerate() {
        objective[xv] = p.c[m];
    }
    objective[lambda] = 1.0;

    // objective epigraph: λE − Σ_t ½Π_tᵀ(D̂_tᵀY_t + Y_tᵀD̂_t)Π_t − Σ d̂ Π_tᵀQΠ_t + Σα_iĈ_i
    let mut obj_terms = vec![Term { var: lambda, mat: e_mat.clone(), quad: None }];
    for (i, &a) in alpha.iter().enumerate() {
        obj_terms.push(Term { var: a, mat: quad_sparse[i].clone(), quad: Some(i) });
    }
    for (t, st) in p.stages.iter().enumerate() {
        let lay = &stages[t];
        let width = lay.coords.len();
        for n in 0..st.n {
            let slot = &lay.slots[n];
            match slot.kind {
                RuleKind::Linear => {
                    let d: Vec<(usize, f64)> = (0..width)
                        .filter(|&a| st.d_hat[(n, a)] != 0.0)
                        .map(|a| (lay.coords[a], st.d_hat[(n, a)]))
                        .collect();
                    if d.is_empty() {
                        continue;
                    }
                    for k in 0..width {
                        let mut m = SparseSym::new(dim);
                        m.add_sym_outer(-1.0, &d, &[(lay.coords[k], 1.0)]);
                        m.compress();
                        obj_terms.push(Term { var: slot.first + k, mat: m, quad: None });
                    }
                }
                RuleKind::Quadratic => {
                    let dn = st.d_hat[(n, width - 1)];
                    if dn == 0.0 {
                        continue;
                    }
                    push_quadratic_terms(&mut obj_terms, slot.first, &lay.coords, -dn, dim);
                }
            }
        }
    }
    let mut constraints = vec![CopConstraint {
        label: "objective".into(),
        dim,
        base: SparseSym::new(dim),
        terms: obj_terms,
    }];

    let k1 = p.stages[0].k;
    let coords1 = &stages[0].coords;
    let b_coords: Vec<Vec<usize>> = (0..p.n_stages()).map(|t| p.b_coords(t)).collect();
    for j in 0..p.j {
        let mut terms = Vec::new();
        for m in 0..p.m {
            let th: Vec<(usize, f64)> = (0..=k1)
                .filter(|&k| p.a_hat[k][(j, m)] != 0.0)
                .map(|k| (coords1[k], p.a_hat[k][(j, m)]))
                .collect();
            if th.is_empty() {
                continue;
            }
            let mut mm = SparseSym::new(dim);
            mm.add_sym_outer(1.0, &th, &[(h, 1.0)]);
            mm.compress();
            terms.push(Term { var: x_vars[m], mat: mm, quad: None });
        }
        for (t, st) in p.stages.iter().enumerate() {
            let lay = &stages[t];
            let width = lay.coords.len();
            for n in 0..st.n {
                let slot = &lay.slots[n];
                match slot.kind {
                    RuleKind::Linear => {
                        let lam: Vec<(usize, f64)> = (0..st.b_hat.len())
                            .filter(|&k| st.b_hat[k][(j, n)] != 0.0)
                            .map(|k| (b_coords[t][k], st.b_hat[k][(j, n)]))
                            .collect();
                        if lam.is_empty() {
                            continue;
                        }
                        for k in 0..width {
                            let mut mm = SparseSym::new(dim);
                            mm.add_sym_outer(1.0, &lam, &[(lay.coords[k], 1.0)]);
                            mm.compress();
                            terms.push(Term { var: slot.first + k, mat: mm, quad: None });
                        }
                    }
                    RuleKind::Quadratic => {
                        let bn = st.b_hat[st.b_hat.len() - 1][(j, n)];
                        if bn != 0.0 {
                            push_quadratic_terms(&mut terms, slot.first, &lay.coords, bn, dim);
                        }
                    }
                }
            }
        }
        let hj: Vec<(usize, f64)> = (0..dim).filter(|&a| p.h_hat[(j, a)] != 0.0).map(|a| (a, p.h_hat[(j, a)])).collect();
        let mut base = SparseSym::new(dim);
        base.add_sym_outer(-1.0, &hj, &[(h, 1.0)]);
        base.compress();
        let mut neg_e = e_mat.clone();
        neg_e.entries[0].2 = -1.0;
        terms.push(Term { var: pi[j], mat: neg_e, quad: None });
        for (i, &bv) in beta[j].iter().enumerate() {
            let mut m = quad_sparse[i].clone();
            m.entries.iter_mut().for_each(|e| e.2 = -e.2);
            terms.push(Term { var: bv, mat: m, quad: Some(i) });
        }
        constraints.push(CopConstraint { label: format!("row[{j}]"), dim, base, terms });
    }

    let linear = (0..p.x_set.g.nrows())
        .filter(|&r| sign_rows[r].is_none())
        .map(|r| {
            let row: Vec<(usize, f64)> = (0..p.m)
                .filter(|&m| p.x_set.g[(r, m)] != 0.0)
                .map(|m| (x_vars[m], p.x_set.g[(r, m)]))
                .collect();
            (row, p.x_set.rhs[r])
        })
        .collect();

    Ok(CopositiveProgram {
        vars: b.vars,
        objective,
        constraints,
        linear,
        cone: Some(p.uncertainty.cone.clone()),
        quad_mats: p.uncertainty.quad_mats.clone(),
        x_vars,
        lambda,
        stages,
        sense: orig_sense,
    })
}

fn push_quadratic_terms(terms: &mut Vec<Term>, first: usize, coords: &[usize], scale: f64, dim: usize) {
    let w = coords.len();
    for bb in 0..w {
        for a in 0..=bb {
            let mut m = SparseSym::new(dim);
            m.add(coords[a], coords[bb], scale);
            m.compress();
            terms.push(Term { var: first + tri_pos(a, bb), mat: m, quad: None });
        }
    }
}

pub fn build_ms_ldr(p: &MsroProblem) -> Result<CopositiveProgram> {
    build_with(p, &|_, _| RuleKind::Linear)
}

/// Quadratic rules for every recourse variable with fixed recourse, linear
/// rules for the rest.
pub fn build_ms_qdr(p: &MsroProblem) -> Result<CopositiveProgram> {
    build_with(p, &|t, n| if p.var_fixed(t, n) { RuleKind::Quadratic } else { RuleKind::Linear })
}

pub fn build_ldr(p: &MsroProblem) -> Result<CopositiveProgram> {
    if p.stages.len() != 1 {
        return Err(Error::Invalid("build_ldr expects a two-stage problem".into()));
    }
    build_ms_ldr(p)
}

pub fn build_qdr(p: &MsroProblem) -> Result<CopositiveProgram> {
    if p.stages.len() != 1 {
        return Err(Error::Invalid("build_qdr expects a two-stage problem".into()));
    }
    if !p.all_fixed() {
        return Err(Error::Invalid("quadratic decision rules require fixed recourse".into()));
    }
    build_with(p, &|_, _| RuleKind::Quadratic)
}

/// Coefficients of one recourse variable's rule over `uᵗ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VarRule {
    Linear(Vec<f64>),
    Quadratic(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRule {
    pub coords: Vec<usize>,
    pub rules: Vec<VarRule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub x: Vec<f64>,
    pub stages: Vec<StageRule>,
}

impl DecisionRule {
    /// `y_t(uᵗ)` for a full homogenized `u`.
    pub fn eval(&self, t: usize, u: &[f64]) -> Vec<f64> {
        let st = &self.stages[t];
        let ut: Vec<f64> = st.coords.iter().map(|&c| u[c]).collect();
        st.rules
            .iter()
            .map(|r| match r {
                VarRule::Linear(y) => crate::linalg::dot(y, &ut),
                VarRule::Quadratic(q) => {
                    let n = q.len();
                    quad_form(&Mat::from_fn(n, n, |a, b| q[a][b]), &ut)
                }
            })
            .collect()
    }

    /// Zero rule with the stage structure of `cp`.
    pub fn zero(cp: &CopositiveProgram) -> Self {
        extract_rule(cp, &vec![0.0; cp.n_vars()]).expect("zero rule")
    }
}

/// Reads the decision rule out of a vector of program-variable values.
pub fn extract_rule(cp: &CopositiveProgram, vals: &[f64]) -> Result<DecisionRule> {
    if vals.len() != cp.n_vars() {
        return Err(Error::Dimension(format!("expected {} values, found {}", cp.n_vars(), vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("solution contains non-finite values".into()));
    }
    let x = cp.x_vars.iter().map(|&i| vals[i]).collect();
    let stages = cp
        .stages
        .iter()
        .map(|lay| {
            let w = lay.coords.len();
            let rules = lay
                .slots
                .iter()
                .map(|s| match s.kind {
                    RuleKind::Linear => VarRule::Linear(vals[s.first..s.first + w].to_vec()),
                    RuleKind::Quadratic => VarRule::Quadratic(
                        (0..w).map(|a| (0..w).map(|bb| vals[s.first + tri_pos(a, bb)]).collect()).collect(),
                    ),
                })
                .collect();
            StageRule { coords: lay.coords.clone(), rules }
        })
        .collect();
    Ok(DecisionRule { x, stages })
}
