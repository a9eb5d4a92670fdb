//! Oracles independent of the conic route: pointwise evaluation of
//! decision rules on sampled or enumerated parameters, grid search for
//! small sets, and relative gaps.

use crate::conic::lp::{maximize, minimize, LinOutcome};
use crate::error::{Error, Result};
use crate::linalg::{dot, quad_form, row_dot, Mat};
use crate::model::{ConeK, MsroProblem, Sense, UncertaintySet};
use crate::reformulate::DecisionRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// `100·(a − b)/|b|`, signed so that a positive gap means `a` is the worse
/// bound for the problem's sense.
pub fn gap(a: f64, b: f64, sense: Sense) -> Result<f64> {
    if b == 0.0 || !b.is_finite() {
        return Err(Error::Invalid(format!("relative gap against reference {b}")));
    }
    let d = match sense {
        Sense::Min => a - b,
        Sense::Max => b - a,
    };
    Ok(100.0 * d / b.abs())
}

/// Constraint violation and objective of a rule at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEval {
    /// Largest `h_j(u) − row_j(u)`, each scaled by `1 + max(|h_j|, |row_j|)`.
    pub violation: f64,
    pub objective: f64,
}

pub fn eval_point(p: &MsroProblem, rule: &DecisionRule, u: &[f64]) -> PointEval {
    let mut lhs: Vec<f64> = {
        let a = p.eval_a(u);
        (0..p.j).map(|r| row_dot(&a, r, &rule.x)).collect()
    };
    let mut objective = dot(&p.c, &rule.x);
    for t in 0..p.n_stages() {
        let y = rule.eval(t, u);
        let b = p.eval_b(t, u);
        for (r, l) in lhs.iter_mut().enumerate() {
            *l += row_dot(&b, r, &y);
        }
        objective += dot(&p.eval_d(t, &p.truncate(u, t)), &y);
    }
    let h = p.eval_h(u);
    let violation = lhs
        .iter()
        .zip(&h)
        .map(|(l, hj)| (hj - l) / (1.0 + hj.abs().max(l.abs())))
        .fold(f64::NEG_INFINITY, f64::max);
    let xv = (0..p.x_set.g.nrows())
        .map(|r| {
            let g = row_dot(&p.x_set.g, r, &rule.x);
            (p.x_set.rhs[r] - g) / (1.0 + g.abs().max(p.x_set.rhs[r].abs()))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    PointEval { violation: violation.max(xv).max(0.0), objective }
}

/// Verdict of a worst-case evaluation, emitted as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub violation: f64,
    /// Worst sampled objective (sup for min problems, inf for max).
    pub realized: f64,
    pub bound: f64,
    pub verdict: bool,
    pub samples: usize,
}

pub const VIOLATION_TOL: f64 = 1e-6;

/// Evaluates a rule on the given points of its parameter space. The
/// verdict holds when no constraint is violated beyond 1e-6 (relative) and
/// the realized worst case does not exceed the reported bound by more than
/// `1e-6·(1 + |bound|)`.
pub fn worst_case_eval(p: &MsroProblem, rule: &DecisionRule, points: &[Vec<f64>], bound: f64) -> Verdict {
    let mut violation = 0.0_f64;
    let mut realized = match p.sense {
        Sense::Min => f64::NEG_INFINITY,
        Sense::Max => f64::INFINITY,
    };
    for u in points {
        let e = eval_point(p, rule, u);
        violation = violation.max(e.violation);
        realized = match p.sense {
            Sense::Min => realized.max(e.objective),
            Sense::Max => realized.min(e.objective),
        };
    }
    let slack = VIOLATION_TOL * (1.0 + bound.abs());
    let within = match p.sense {
        Sense::Min => realized <= bound + slack,
        Sense::Max => realized >= bound - slack,
    };
    Verdict { violation, realized, bound, verdict: !points.is_empty() && violation <= VIOLATION_TOL && within, samples: points.len() }
}

/// Vertices of the `u_{K+1} = 1` slice of a polyhedral cone, by solving
/// every `K`-subset of rows. `None` when the cone has SOC blocks, `K > 10`,
/// or the subset count exceeds `max_subsets`.
pub fn polytope_vertices(cone: &ConeK, max_subsets: usize) -> Option<Vec<Vec<f64>>> {
    let k = cone.k();
    if !cone.soc_blocks.is_empty() || k == 0 || k > 10 {
        return None;
    }
    let rows: Vec<usize> = (0..cone.n_p()).filter(|&r| (0..k).any(|c| cone.p_rows[(r, c)] != 0.0)).collect();
    let m = rows.len();
    if m < k || binomial(m, k) > max_subsets as f64 {
        return None;
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a = Mat::from_fn(k, k, |i, j| cone.p_rows[(rows[idx[i]], j)]);
        let rhs = nalgebra::DVector::from_fn(k, |i, _| -cone.p_rows[(rows[idx[i]], k)]);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() > 1e-10 * smax.max(1.0) {
            if let Ok(sol) = svd.solve(&rhs, 1e-14) {
                let mut u: Vec<f64> = sol.iter().copied().collect();
                u.push(1.0);
                if cone.contains(&u, 1e-9) {
                    let key: Vec<i64> = u.iter().map(|v| (v * 1e8).round() as i64).collect();
                    if seen.insert(key) {
                        out.push(u);
                    }
                }
            }
        }
        // next combination
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Some(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Extreme points of `U⁰` along the coordinate axes and `n_random` random
/// directions.
fn extreme_points(u: &UncertaintySet, n_random: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let n = u.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for c in 0..u.k {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[c] = s;
            dirs.push(d);
        }
    }
    for _ in 0..n_random {
        let mut d: Vec<f64> = (0..u.k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        d.push(0.0);
        dirs.push(d);
    }
    let mut pts = Vec::with_capacity(dirs.len());
    for d in dirs {
        match maximize(&u.cone, &d, 1.0, &[]) {
            LinOutcome::Optimal { mut point, .. } => {
                point[n - 1] = 1.0;
                pts.push(point);
            }
            LinOutcome::Unbounded => return Err(Error::Unbounded("uncertainty set is unbounded".into())),
            LinOutcome::Infeasible => return Err(Error::Invalid("uncertainty set is empty".into())),
            LinOutcome::Failed(s) => return Err(Error::Solver(format!("extreme-point LP ended with {s:?}"))),
        }
    }
    Ok(pts)
}

/// Points of `U`: every vertex when `U⁰` is a polytope with `K ≤ 10`
/// (otherwise LP extreme points along axes and random directions), plus
/// random convex combinations of at most `K + 1` of them. Points violating
/// a quadratic equality of `U` are dropped; the caller sees the count.
pub fn sample_points(u: &UncertaintySet, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = match polytope_vertices(&u.cone, 200_000) {
        Some(v) if !v.is_empty() => v,
        _ => extreme_points(u, 4 * u.k + 8, &mut rng)?,
    };
    if pool.is_empty() {
        return Err(Error::Invalid("uncertainty set is empty".into()));
    }
    let dim = u.dim();
    let mut out: Vec<Vec<f64>> = pool.clone();
    while out.len() < n.max(pool.len()) {
        let m = rng.random_range(1..=(u.k + 1).min(pool.len()));
        let mut w: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let mut p = vec![0.0; dim];
        for wi in w {
            let v = &pool[rng.random_range(0..pool.len())];
            for (a, b) in p.iter_mut().zip(v) {
                *a += wi * b;
            }
        }
        p[dim - 1] = 1.0;
        out.push(p);
    }
    pool.clear();
    Ok(out.into_iter().filter(|p| u.quad_mats.iter().all(|c| quad_form(c, p).abs() <= 1e-9)).collect())
}

/// Grid step used by [`brute_force_sup`]: 1e-3 up to two dimensions,
/// 1e-2 in three.
pub fn default_step(k: usize) -> f64 {
    if k <= 2 {
        1e-3
    } else {
        1e-2
    }
}

/// `sup_{u ∈ U} f(u)` for `K ≤ 3` by a grid over the marginal box, the
/// vertices of a polyhedral `U⁰`, and (for curved sets) boundary points
/// along directions from the centroid of the axis extremes.
pub fn brute_force_sup(u: &UncertaintySet, f: &dyn Fn(&[f64]) -> f64, step: f64) -> Result<f64> {
    let k = u.k;
    if k == 0 || k > 3 {
        return Err(Error::Invalid(format!("brute force supports 1 ≤ K ≤ 3, got K={k}")));
    }
    let n = u.dim();
    let mut lo = vec![0.0; k];
    let mut hi = vec![0.0; k];
    for c in 0..k {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let get = |o: LinOutcome| o.value().ok_or_else(|| Error::Invalid("uncertainty set is empty or unbounded".into()));
        lo[c] = get(minimize(&u.cone, &e, 1.0, &[]))?;
        hi[c] = get(maximize(&u.cone, &e, 1.0, &[]))?;
    }
    let feasible = |p: &[f64]| u.contains(p, 1e-9);
    let mut best = f64::NEG_INFINITY;
    let counts: Vec<usize> = (0..k).map(|c| ((hi[c] - lo[c]) / step).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut p = vec![0.0; n];
    p[n - 1] = 1.0;
    for flat in 0..total {
        let mut r = flat;
        for c in 0..k {
            let i = r % counts[c];
            r /= counts[c];
            p[c] = (lo[c] + i as f64 * step).min(hi[c]);
        }
        if feasible(&p) {
            best = best.max(f(&p));
        }
    }
    if let Some(vs) = polytope_vertices(&u.cone, 1_000_000) {
        for v in vs {
            if feasible(&v) {
                best = best.max(f(&v));
            }
        }
    }
    if !u.cone.soc_blocks.is_empty() {
        let mut center = vec![0.0; n];
        for c in 0..k {
            center[c] = 0.5 * (lo[c] + hi[c]);
        }
        center[n - 1] = 1.0;
        if u.cone.contains(&center, 0.0) {
            let diam: f64 = (0..k).map(|c| (hi[c] - lo[c]).powi(2)).sum::<f64>().sqrt() + 1.0;
            for d in sphere_dirs(k, 200_000) {
                let at = |s: f64| -> Vec<f64> {
                    let mut q = center.clone();
                    for c in 0..k {
                        q[c] += s * d[c];
                    }
                    q
                };
                let (mut a, mut b) = (0.0, diam);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if u.cone.contains(&at(mid), 0.0) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let q = at(a);
                if feasible(&q) {
                    best = best.max(f(&q));
                }
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Invalid("no feasible grid point".into()));
    }
    Ok(best)
}

fn sphere_dirs(k: usize, n: usize) -> Vec<Vec<f64>> {
    match k {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

/// Worst-case objective of a fixed rule over `U` by [`brute_force_sup`];
/// the rule must be written in the problem's own parameters.
pub fn brute_force_small(p: &MsroProblem, rule: &DecisionRule) -> Result<f64> {
    let s = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let f = |u: &[f64]| s * eval_point(p, rule, u).objective;
    Ok(s * brute_force_sup(&p.uncertainty, &f, default_step(p.k_total()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cone_from_ellipsoids, cone_from_polytope};

    fn simplex() -> UncertaintySet {
        // u ≥ 0, 1 − u₁ − u₂ ≥ 0
        let p = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        UncertaintySet::from_cone(cone_from_polytope(&p, &[0.0, 0.0, -1.0]).unwrap())
    }

    #[test]
    fn gap_conventions() {
        assert_eq!(gap(2.0, 2.0, Sense::Min).unwrap(), 0.0);
        assert!((gap(1.52, 1.0, Sense::Min).unwrap() - 52.0).abs() < 1e-9);
        assert!((gap(0.8, 1.0, Sense::Max).unwrap() - 20.0).abs() < 1e-9);
        assert!(gap(1.0, 0.0, Sense::Min).is_err());
        let (a, b) = (3.0, 2.0);
        assert!(gap(a, b, Sense::Min).unwrap() * gap(b, a, Sense::Min).unwrap() < 0.0);
    }

    #[test]
    fn simplex_vertices() {
        let v = polytope_vertices(&simplex().cone, 1000).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.contains(&vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn product_on_simplex() {
        let s = brute_force_sup(&simplex(), &|u| u[0] * u[1], 1e-3).unwrap();
        assert!((s - 0.25).abs() < 1e-9);
    }

    #[test]
    fn curved_boundary_is_reached() {
        let u = UncertaintySet::from_cone(
            cone_from_ellipsoids(&[Mat::identity(2, 2)], &[vec![0.0, 0.0]], &[1.0]).unwrap(),
        );
        let s = brute_force_sup(&u, &|p| p[0] + p[1], 1e-3).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn samples_stay_inside() {
        let u = simplex();
        let pts = sample_points(&u, 500, 1).unwrap();
        assert!(pts.len() >= 500);
        assert!(pts.iter().all(|p| u.contains(p, 1e-9)));
    }
}
