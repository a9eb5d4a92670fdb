//! Instance generators for the newsvendor, inventory and index-tracking
//! families, the partition instance, and the scheme-comparison suite.

use crate::conic::{SolveOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{cone_from_polytope, MsroProblem, Polyhedron, Sense, Stage, UncertaintySet};
use crate::pipeline::{run, Bound, Rule, Run, Scheme};
use crate::verify::gap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// One semi-infinite row `A(u)x + Σ_t B_t(u)y_t ≥ h(u)`, coefficients
/// keyed by global coordinate of `u` (`K` is the homogenization).
#[derive(Default)]
struct RowData {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, usize, f64)>,
    h: Vec<(usize, f64)>,
}

impl RowData {
    fn a(mut self, coord: usize, m: usize, v: f64) -> Self {
        self.a.push((coord, m, v));
        self
    }
    fn b(mut self, t: usize, coord: usize, n: usize, v: f64) -> Self {
        self.b.push((t, coord, n, v));
        self
    }
    fn h(mut self, coord: usize, v: f64) -> Self {
        self.h.push((coord, v));
        self
    }
    /// Adds `s·(affine form)` to `h`.
    fn h_form(mut self, form: &[(usize, f64)], s: f64) -> Self {
        self.h.extend(form.iter().map(|&(c, v)| (c, s * v)));
        self
    }
    fn negated(&self) -> Self {
        RowData {
            a: self.a.iter().map(|&(c, m, v)| (c, m, -v)).collect(),
            b: self.b.iter().map(|&(t, c, n, v)| (t, c, n, -v)).collect(),
            h: self.h.iter().map(|&(c, v)| (c, -v)).collect(),
        }
    }
}

struct Layout {
    stage_k: Vec<usize>,
    stage_n: Vec<usize>,
    /// Stage whose `B̂` spans all of `u`.
    full_b: Vec<bool>,
    m: usize,
}

impl Layout {
    fn k(&self) -> usize {
        self.stage_k.iter().sum()
    }
    fn offset(&self, t: usize) -> usize {
        self.stage_k[..t].iter().sum()
    }
}

fn build_problem(
    lay: &Layout,
    rows: &[RowData],
    d_hat: Vec<Mat>,
    c: Vec<f64>,
    x_set: Polyhedron,
    uncertainty: UncertaintySet,
    sense: Sense,
) -> Result<MsroProblem> {
    let kk = lay.k();
    let j = rows.len();
    let k1 = lay.stage_k[0];
    let mut a_hat = vec![Mat::zeros(j, lay.m); k1 + 1];
    let mut stages: Vec<Stage> = Vec::with_capacity(lay.stage_k.len());
    for (t, &n) in lay.stage_n.iter().enumerate() {
        let kt = lay.offset(t) + lay.stage_k[t];
        let slices = if lay.full_b[t] { kk + 1 } else { kt + 1 };
        stages.push(Stage { k: lay.stage_k[t], n, b_hat: vec![Mat::zeros(j, n); slices], d_hat: d_hat[t].clone() });
    }
    let mut h_hat = Mat::zeros(j, kk + 1);
    let slice = |coord: usize, kt: usize| -> Result<usize> {
        if coord == kk {
            Ok(kt)
        } else if coord < kt {
            Ok(coord)
        } else {
            Err(Error::Invalid(format!("coordinate {coord} is not observed by stage data with Kᵗ={kt}")))
        }
    };
    for (r, row) in rows.iter().enumerate() {
        for &(coord, m, v) in &row.a {
            a_hat[slice(coord, k1)?][(r, m)] += v;
        }
        for &(t, coord, n, v) in &row.b {
            let s = if lay.full_b[t] { coord } else { slice(coord, lay.offset(t) + lay.stage_k[t])? };
            stages[t].b_hat[s][(r, n)] += v;
        }
        for &(coord, v) in &row.h {
            h_hat[(r, coord)] += v;
        }
    }
    let p = MsroProblem { stages, j, m: lay.m, c, a_hat, h_hat, x_set, uncertainty, sense };
    p.check_dims()?;
    Ok(p)
}

/// Cone of `{u : a_rᵀu + b_r ≥ 0}` over `K` coordinates.
fn polytope_set(k: usize, rows: &[(Vec<(usize, f64)>, f64)]) -> Result<UncertaintySet> {
    let mut p = Mat::zeros(rows.len(), k);
    let mut q = vec![0.0; rows.len()];
    for (r, (a, b)) in rows.iter().enumerate() {
        for &(c, v) in a {
            p[(r, c)] += v;
        }
        q[r] = -b;
    }
    Ok(UncertaintySet::from_cone(cone_from_polytope(&p, &q)?))
}

/// Rows of `{ζ = ζ⁺ − ζ⁻ : ‖ζ‖∞ ≤ 1, ‖ζ‖₁ ≤ ρ}` with `ζ± ≥ 0` stored at
/// `off..off+n` and `off+n..off+2n`.
fn factor_rows(off: usize, n: usize, rho: f64) -> Vec<(Vec<(usize, f64)>, f64)> {
    let mut rows = Vec::new();
    for i in 0..2 * n {
        rows.push((vec![(off + i, 1.0)], 0.0));
    }
    for i in 0..n {
        rows.push((vec![(off + i, -1.0), (off + n + i, -1.0)], 1.0));
    }
    rows.push(((0..2 * n).map(|i| (off + i, -1.0)).collect(), rho));
    rows
}

/// Worst-case `Σ|u_ℓ|` over `{u ∈ [−1,1]^K : cᵀu = 0}` as a robust problem
/// with recourse `y_ℓ ≥ ±u_ℓ`; the answer is `K` iff `c` admits a
/// balanced partition.
pub fn partition_problem(c: &[f64]) -> Result<MsroProblem> {
    let k = c.len();
    if k == 0 {
        return Err(Error::Invalid("partition vector is empty".into()));
    }
    let mut urows = Vec::new();
    for i in 0..k {
        urows.push((vec![(i, 1.0)], 1.0));
        urows.push((vec![(i, -1.0)], 1.0));
    }
    urows.push((c.iter().enumerate().map(|(i, &v)| (i, v)).collect(), 0.0));
    urows.push((c.iter().enumerate().map(|(i, &v)| (i, -v)).collect(), 0.0));
    let u = polytope_set(k, &urows)?;
    let lay = Layout { stage_k: vec![k], stage_n: vec![k], full_b: vec![false], m: 0 };
    let mut rows = Vec::new();
    for l in 0..k {
        rows.push(RowData::default().b(0, k, l, 1.0).h(l, 1.0));
        rows.push(RowData::default().b(0, k, l, 1.0).h(l, -1.0));
    }
    let mut d = Mat::zeros(k, k + 1);
    d.column_mut(k).fill(1.0);
    build_problem(&lay, &rows, vec![d], vec![], Polyhedron::free(0), u, Sense::Min)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Multi-item newsvendor: `N = 5`, `r = 80`, shortage cost `s = 60`,
/// `c ~ U[40,60]`, demand `ξ = 60 + Diag(ξ̂)Fζ` with `ξ̂ ~ U[50,60]` and
/// the rows of `F` scaled to sum to one, `‖ζ‖∞ ≤ 1`, `‖ζ‖₁ ≤ 4`.
pub fn gen_newsvendor(seed: u64) -> Result<MsroProblem> {
    const N: usize = 5;
    let (r, s, xi_bar, rho) = (80.0, 60.0, 60.0, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost: Vec<f64> = (0..N).map(|_| uniform(&mut rng, 40.0, 60.0)).collect();
    let xi_hat: Vec<f64> = (0..N).map(|_| uniform(&mut rng, 50.0, 60.0)).collect();
    let mut f = Mat::from_fn(N, N, |_, _| uniform(&mut rng, -1.0, 1.0));
    for i in 0..N {
        let sum: f64 = f.row(i).sum();
        f.row_mut(i).scale_mut(1.0 / sum);
    }
    let k = 2 * N;
    let u = polytope_set(k, &factor_rows(0, N, rho))?;
    // ξ_n as an affine form over u
    let xi: Vec<Vec<(usize, f64)>> = (0..N)
        .map(|n| {
            let mut form = vec![(k, xi_bar)];
            for q in 0..N {
                form.push((q, xi_hat[n] * f[(n, q)]));
                form.push((N + q, -xi_hat[n] * f[(n, q)]));
            }
            form
        })
        .collect();
    let lay = Layout { stage_k: vec![k], stage_n: vec![N], full_b: vec![false], m: N };
    let mut rows = Vec::new();
    for n in 0..N {
        // y ≤ rξ − cx
        rows.push(RowData::default().b(0, k, n, -1.0).a(k, n, -cost[n]).h_form(&xi[n], -r));
    }
    for n in 0..N {
        // y ≤ (r − c + s)x − sξ
        rows.push(RowData::default().b(0, k, n, -1.0).a(k, n, r - cost[n] + s).h_form(&xi[n], s));
    }
    let mut d = Mat::zeros(N, k + 1);
    d.column_mut(k).fill(1.0);
    build_problem(&lay, &rows, vec![d], vec![0.0; N], Polyhedron::nonneg(N), u, Sense::Max)
}

/// Multi-stage inventory control with `P = 4` products, `ξ_t ∈ [−1,1]⁴`,
/// price `4 + αᵀξ_t`, seasonal demand `2 + sin|cos(2πt/12) + ½βᵀξ_t`,
/// `C_b = C_h = 0.2`, `I₀ = 0`, `Ī = 24`. Orders `o_{t+1}` are chosen with
/// stage `t`; the first order is the here-and-now decision.
pub fn gen_inventory(seed: u64, t_stages: usize) -> Result<MsroProblem> {
    const P: usize = 4;
    const Q: usize = 4;
    let (cb, ch, cap) = (0.2, 0.2, 24.0);
    if t_stages == 0 {
        return Err(Error::Invalid("T must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = Mat::from_fn(Q, P, |_, _| uniform(&mut rng, -1.0, 1.0));
    let beta = Mat::from_fn(Q, P, |_, _| uniform(&mut rng, -1.0, 1.0));
    let k = Q * t_stages;
    let mut urows = Vec::new();
    for c in 0..k {
        urows.push((vec![(c, 1.0)], 1.0));
        urows.push((vec![(c, -1.0)], 1.0));
    }
    let u = polytope_set(k, &urows)?;
    let stage_n: Vec<usize> = (0..t_stages).map(|t| if t + 1 < t_stages { 4 * P } else { 3 * P }).collect();
    let lay = Layout { stage_k: vec![Q; t_stages], stage_n: stage_n.clone(), full_b: vec![false; t_stages], m: P };
    let (s_i, b_i, i_i, o_i) = (0, P, 2 * P, 3 * P);
    let mut rows = Vec::new();
    let mut d_hat = Vec::new();
    for t in 0..t_stages {
        let off = lay.offset(t);
        let kt = off + Q;
        let season = 2.0 * std::f64::consts::PI * t as f64 / 12.0;
        for p in 0..P {
            let base = 2.0 + if p < P / 2 { season.sin() } else { season.cos() };
            let mut demand = vec![(k, base)];
            demand.extend((0..Q).map(|q| (off + q, 0.5 * beta[(q, p)])));
            // I_t − I_{t−1} − o_t + s_t = 0
            let mut inv = RowData::default().b(t, k, i_i + p, 1.0).b(t, k, s_i + p, 1.0);
            inv = if t == 0 { inv.a(k, p, -1.0) } else { inv.b(t - 1, k, i_i + p, -1.0).b(t - 1, k, o_i + p, -1.0) };
            rows.push(inv.negated());
            rows.push(inv);
            // b_t − b_{t−1} + s_t = D_t
            let mut back = RowData::default().b(t, k, b_i + p, 1.0).b(t, k, s_i + p, 1.0).h_form(&demand, 1.0);
            if t > 0 {
                back = back.b(t - 1, k, b_i + p, -1.0);
            }
            rows.push(back.negated());
            rows.push(back);
            for v in [s_i, b_i, i_i] {
                rows.push(RowData::default().b(t, k, v + p, 1.0));
            }
            rows.push(RowData::default().b(t, k, i_i + p, -1.0).h(k, -cap));
            if t + 1 < t_stages {
                rows.push(RowData::default().b(t, k, o_i + p, 1.0));
            }
        }
        let mut d = Mat::zeros(stage_n[t], kt + 1);
        for p in 0..P {
            d[(s_i + p, kt)] = 4.0;
            for q in 0..Q {
                d[(s_i + p, off + q)] = alpha[(q, p)];
            }
            d[(b_i + p, kt)] = -cb;
            d[(i_i + p, kt)] = -ch;
        }
        d_hat.push(d);
    }
    build_problem(&lay, &rows, d_hat, vec![0.0; P], Polyhedron::nonneg(P), u, Sense::Max)
}

/// Default budget of the index-tracking factor set.
pub const INDEX_RHO: f64 = 2.0;

pub fn gen_index(seed: u64, t_stages: usize) -> Result<MsroProblem> {
    gen_index_with(seed, t_stages, INDEX_RHO)
}

/// Dynamic index tracking: four instruments track a fifth index, returns
/// `ξ_t = 𝟙 + Fζ_t` with `F ∈ ℝ^{5×3}` (rows of unit absolute sum),
/// `‖ζ_t‖∞ ≤ 1`, `‖ζ_t‖₁ ≤ ρ`; minimizes `Σ_t |ξ_{t,5} − s_t|`. The
/// allocation after the last stage does not affect the objective and is
/// omitted.
pub fn gen_index_with(seed: u64, t_stages: usize, rho: f64) -> Result<MsroProblem> {
    const A: usize = 4;
    const NF: usize = 3;
    if t_stages == 0 {
        return Err(Error::Invalid("T must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Mat::from_fn(A + 1, NF, |_, _| uniform(&mut rng, -1.0, 1.0));
    for i in 0..=A {
        let sum: f64 = f.row(i).iter().map(|v| v.abs()).sum();
        f.row_mut(i).scale_mut(1.0 / sum);
    }
    let kt = 2 * NF;
    let k = kt * t_stages;
    let mut urows = Vec::new();
    for t in 0..t_stages {
        urows.extend(factor_rows(t * kt, NF, rho));
    }
    let u = polytope_set(k, &urows)?;
    let stage_n: Vec<usize> = (0..t_stages).map(|t| if t + 1 < t_stages { 2 + A } else { 2 }).collect();
    let full_b: Vec<bool> = (0..t_stages).map(|t| t + 1 < t_stages).collect();
    let lay = Layout { stage_k: vec![kt; t_stages], stage_n: stage_n.clone(), full_b, m: A };
    let (s_i, w_i, x_i) = (0, 1, 2);
    // ξ_{t,i} as an affine form
    let xi = |t: usize, i: usize| -> Vec<(usize, f64)> {
        let off = t * kt;
        let mut form = vec![(k, 1.0)];
        for q in 0..NF {
            form.push((off + q, f[(i, q)]));
            form.push((off + NF + q, -f[(i, q)]));
        }
        form
    };
    let mut rows = Vec::new();
    let mut d_hat = Vec::new();
    for t in 0..t_stages {
        // s_t = ξ_tᵀ x_{t−1}
        let mut bal = RowData::default().b(t, k, s_i, 1.0);
        for i in 0..A {
            for (c, v) in xi(t, i) {
                bal = if t == 0 { bal.a(c, i, -v) } else { bal.b(t - 1, c, x_i + i, -v) };
            }
        }
        rows.push(bal.negated());
        rows.push(bal);
        if t + 1 < t_stages {
            let mut budget = RowData::default().b(t, k, s_i, 1.0);
            for i in 0..A {
                budget = budget.b(t, k, x_i + i, -1.0);
                rows.push(RowData::default().b(t, k, x_i + i, 1.0));
            }
            rows.push(budget);
        }
        // w_t ≥ |ξ_{t,5} − s_t|
        let target = xi(t, A);
        rows.push(RowData::default().b(t, k, w_i, 1.0).b(t, k, s_i, 1.0).h_form(&target, 1.0));
        rows.push(RowData::default().b(t, k, w_i, 1.0).b(t, k, s_i, -1.0).h_form(&target, -1.0));
        let mut d = Mat::zeros(stage_n[t], (t + 1) * kt + 1);
        d[(w_i, (t + 1) * kt)] = 1.0;
        d_hat.push(d);
    }
    let mut g = Mat::zeros(A + 1, A);
    let mut rhs = vec![0.0; A + 1];
    for i in 0..A {
        g[(i, i)] = 1.0;
        g[(A, i)] = -1.0;
    }
    rhs[A] = -1.0;
    build_problem(&lay, &rows, d_hat, vec![0.0; A], Polyhedron { g, rhs }, u, Sense::Min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Newsvendor,
    Inventory,
    Index,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newsvendor" => Ok(Family::Newsvendor),
            "inventory" => Ok(Family::Inventory),
            "index" => Ok(Family::Index),
            _ => Err(Error::Invalid(format!("unknown family '{s}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Newsvendor => "newsvendor",
            Family::Inventory => "inventory",
            Family::Index => "index",
        })
    }
}

impl Family {
    /// Reference scheme gaps are measured against.
    pub fn baseline(self) -> Scheme {
        match self {
            Family::Newsvendor => Scheme::new(Rule::Qdr, Bound::Ia),
            Family::Inventory => Scheme::new(Rule::Pldr, Bound::Ia),
            Family::Index => Scheme::new(Rule::Lqdr, Bound::Ia),
        }
    }

    /// The same rule over the `AS` cone.
    pub fn bggn(self) -> Scheme {
        Scheme::new(self.baseline().rule, Bound::As)
    }

    pub fn default_schemes(self) -> Vec<Scheme> {
        let mut v = vec![self.baseline(), self.bggn()];
        if self != Family::Inventory {
            v.push(Scheme::new(Rule::Ldr, Bound::Ia));
        }
        v
    }

    pub fn generate(self, seed: u64, t: usize) -> Result<MsroProblem> {
        match self {
            Family::Newsvendor => gen_newsvendor(seed),
            Family::Inventory => gen_inventory(seed, t),
            Family::Index => gen_index(seed, t),
        }
    }
}

/// Independent per-instance seed derived from the master seed.
pub fn instance_seed(master: u64, instance: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(instance as u64 + 1);
    rng.random()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_instances: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(family: Family, t: usize, n_instances: usize, seed: u64) -> Self {
        ExperimentConfig { family, t, n_instances, seed, schemes: family.default_schemes(), jobs: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance_id: usize,
    pub scheme: String,
    pub value: f64,
    pub gap_pct: f64,
    pub solve_seconds: f64,
    pub status: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeStats {
    pub scheme: String,
    pub p10: f64,
    pub mean: f64,
    pub p90: f64,
    pub mean_seconds: f64,
    pub solved: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatTable {
    pub family: Family,
    #[serde(rename = "T")]
    pub t: usize,
    pub baseline: String,
    pub rows: Vec<InstanceResult>,
    pub stats: Vec<SchemeStats>,
}

/// Nearest-rank percentile of the finite entries; NaN when there are none.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn mean(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
        Status::MaxIter => "max_iter",
        Status::Numerical => "numerical",
    }
}

/// Solves every scheme on every instance and aggregates gaps against the
/// family baseline. Failures become NaN rows.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<StatTable> {
    run_suite_with(cfg, &|_, _, _| {})
}

/// [`run_suite`] that also hands every successful run, with its instance
/// index and problem, to `inspect` (called from the worker threads).
pub fn run_suite_with(cfg: &ExperimentConfig, inspect: &(dyn Fn(usize, &MsroProblem, &Run) + Sync)) -> Result<StatTable> {
    if cfg.n_instances == 0 || cfg.t == 0 {
        return Err(Error::Invalid("n_instances and T must be at least 1".into()));
    }
    let baseline = cfg.family.baseline();
    let mut schemes = cfg.schemes.clone();
    if !schemes.contains(&baseline) {
        schemes.insert(0, baseline);
    }
    let sopts = SolveOptions::default();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Vec<(f64, f64, String)>>>> = Mutex::new(vec![None; cfg.n_instances]);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= cfg.n_instances {
            break;
        }
        let out: Vec<(f64, f64, String)> = match cfg.family.generate(instance_seed(cfg.seed, i), cfg.t) {
            Ok(p) => schemes
                .iter()
                .map(|&s| match run(&p, s, None, &sopts) {
                    Ok(r) if r.status() == Status::Optimal => {
                        inspect(i, &p, &r);
                        (r.value(), r.seconds, "optimal".to_string())
                    }
                    Ok(r) => (f64::NAN, r.seconds, status_name(r.status()).to_string()),
                    Err(e) => (f64::NAN, 0.0, format!("error: {e}")),
                })
                .collect(),
            Err(e) => schemes.iter().map(|_| (f64::NAN, 0.0, format!("error: {e}"))).collect(),
        };
        slots.lock().unwrap()[i] = Some(out);
    };
    std::thread::scope(|sc| {
        for _ in 0..cfg.jobs.max(1).min(cfg.n_instances) {
            sc.spawn(&work);
        }
    });
    let results: Vec<Vec<(f64, f64, String)>> = slots.into_inner().unwrap().into_iter().map(Option::unwrap).collect();
    let sense = cfg.family.generate(instance_seed(cfg.seed, 0), cfg.t)?.sense;
    let base_idx = schemes.iter().position(|&s| s == baseline).unwrap();
    let mut rows = Vec::new();
    for (i, res) in results.iter().enumerate() {
        let reference = res[base_idx].0;
        for (s, (value, secs, status)) in schemes.iter().zip(res) {
            let g = if value.is_finite() && reference.is_finite() { gap(*value, reference, sense).unwrap_or(f64::NAN) } else { f64::NAN };
            rows.push(InstanceResult {
                instance_id: i,
                scheme: s.to_string(),
                value: *value,
                gap_pct: g,
                solve_seconds: *secs,
                status: status.clone(),
            });
        }
    }
    let stats = schemes
        .iter()
        .map(|s| {
            let name = s.to_string();
            let mine: Vec<&InstanceResult> = rows.iter().filter(|r| r.scheme == name).collect();
            let gaps: Vec<f64> = mine.iter().map(|r| r.gap_pct).collect();
            let secs: Vec<f64> = mine.iter().map(|r| r.solve_seconds).collect();
            SchemeStats {
                scheme: name,
                p10: percentile(&gaps, 10.0),
                mean: mean(&gaps),
                p90: percentile(&gaps, 90.0),
                mean_seconds: mean(&secs),
                solved: mine.iter().filter(|r| r.status == "optimal").count(),
            }
        })
        .collect();
    Ok(StatTable { family: cfg.family, t: cfg.t, baseline: baseline.to_string(), rows, stats })
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

impl StatTable {
    /// `instance_id,scheme,value,gap_pct,solve_seconds,status`. With
    /// `timings = false` the seconds column is left empty, making the file
    /// a function of the configuration alone.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("instance_id,scheme,value,gap_pct,solve_seconds,status\n");
        for r in &self.rows {
            let secs = if timings { format!("{:.6}", r.solve_seconds) } else { String::new() };
            let status = r.status.replace([',', '\n'], ";");
            let _ = writeln!(out, "{},{},{},{},{},{}", r.instance_id, r.scheme, num(r.value), num(r.gap_pct), secs, status);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Relative gaps (%) vs {} ({}, T={})\n", self.baseline, self.family, self.t);
        out.push_str("| Scheme | 10th pct | Mean | 90th pct | Mean time (s) | Solved |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        let f = |v: f64| if v.is_finite() { format!("{v:.1}") } else { "–".into() };
        for s in &self.stats {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.2} | {} |",
                s.scheme,
                f(s.p10),
                f(s.mean),
                f(s.p90),
                s.mean_seconds,
                s.solved
            );
        }
        out
    }

    pub fn stats_for(&self, scheme: Scheme) -> Option<&SchemeStats> {
        let name = scheme.to_string();
        self.stats.iter().find(|s| s.scheme == name)
    }

    pub fn gaps_for(&self, scheme: Scheme) -> Vec<f64> {
        let name = scheme.to_string();
        self.rows.iter().filter(|r| r.scheme == name).map(|r| r.gap_pct).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 10.0), 1.0);
        assert_eq!(percentile(&v, 90.0), 9.0);
        assert_eq!(percentile(&v, 100.0), 10.0);
        assert_eq!(percentile(&[5.0, f64::NAN], 50.0), 5.0);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn instance_seeds_differ() {
        assert_ne!(instance_seed(1, 0), instance_seed(1, 1));
        assert_eq!(instance_seed(7, 3), instance_seed(7, 3));
    }

    #[test]
    fn partition_structure() {
        let p = partition_problem(&[2.0, 2.0, 3.0]).unwrap();
        assert_eq!((p.j, p.m, p.k_total()), (6, 0, 3));
        assert!(p.all_fixed());
        assert!(p.uncertainty.contains(&[0.5, 1.0, -1.0, 1.0], 1e-12));
        assert!(!p.uncertainty.contains(&[0.5, 1.0, 1.0, 1.0], 1e-12));
    }

    #[test]
    fn newsvendor_shape() {
        let p = gen_newsvendor(3).unwrap();
        assert_eq!(p.j, 10);
        assert!(p.all_fixed());
        assert_eq!(p, gen_newsvendor(3).unwrap());
        // ζ = 0: demand is ξ̄ in both rows
        let mut u = vec![0.0; 11];
        u[10] = 1.0;
        let h = p.eval_h(&u);
        assert!((h[0] + 80.0 * 60.0).abs() < 1e-9);
        assert!((h[5] - 60.0 * 60.0).abs() < 1e-9);
    }

    #[test]
    fn inventory_shape_and_demand() {
        let p = gen_inventory(5, 1).unwrap();
        assert_eq!(p.k_total(), 4);
        assert!(!p.fixed_recourse(0));
        let mut u = vec![0.0; 5];
        u[4] = 1.0;
        let h = p.eval_h(&u);
        // rows per product: inv−, inv+, back−, back+, ...
        assert!((h[3] - 2.0).abs() < 1e-12);
        let per = 8;
        assert!((h[2 * per + 3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn index_structure() {
        let p = gen_index(2, 3).unwrap();
        assert_eq!(p.k_total(), 18);
        assert!(!p.var_fixed(0, 2));
        assert!(p.var_fixed(0, 0) && p.var_fixed(0, 1));
        assert_eq!(p.stages[2].n, 2);
        assert_eq!(p.stages[0].b_hat.len(), 19);
        assert_eq!(p.stages[2].b_hat.len(), 19);
    }
}
