//! Linear optimization over slices `{u ∈ K : u_{K+1} = τ}` of a cone,
//! used for marginal bounds, fold upper bounds and validation.

use super::{solve, ConicProgram, SolveOptions, Status};
use crate::model::ConeK;

#[derive(Clone, Debug, PartialEq)]
pub enum LinOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Unbounded,
    Infeasible,
    Failed(Status),
}

impl LinOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LinOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Conic program over `u ∈ K` with `u_{K+1} = tau` and extra equalities
/// `aᵀu = β`; variable `i < dim` of the result is `u_i`.
pub fn slice_program(cone: &ConeK, tau: f64, eqs: &[(Vec<f64>, f64)]) -> ConicProgram {
    let n = cone.dim;
    let np = cone.n_p();
    let soc: Vec<usize> = cone.soc_blocks.iter().map(|b| b.nrows()).collect();
    let mut cp = ConicProgram::new(n, np, soc.clone(), vec![]);
    for r in 0..np {
        let mut row: Vec<(usize, f64)> = (0..n).map(|c| (c, cone.p_rows[(r, c)])).collect();
        row.push((n + r, -1.0));
        cp.add_row(&row, 0.0);
    }
    for (b, block) in cone.soc_blocks.iter().enumerate() {
        let off = cp.soc_offset(b);
        let last = block.nrows() - 1;
        for r in 0..block.nrows() {
            // radius row goes first in the solver's cone layout
            let slot = if r == last { 0 } else { r + 1 };
            let mut row: Vec<(usize, f64)> = (0..n).map(|c| (c, block[(r, c)])).collect();
            row.push((off + slot, -1.0));
            cp.add_row(&row, 0.0);
        }
    }
    cp.add_row(&[(n - 1, 1.0)], tau);
    for (a, beta) in eqs {
        let row: Vec<(usize, f64)> = a.iter().enumerate().map(|(c, &v)| (c, v)).collect();
        cp.add_row(&row, *beta);
    }
    cp
}

pub fn maximize(cone: &ConeK, obj: &[f64], tau: f64, eqs: &[(Vec<f64>, f64)]) -> LinOutcome {
    let mut cp = slice_program(cone, tau, eqs);
    for (i, &v) in obj.iter().enumerate() {
        cp.c[i] = -v;
    }
    let opts = SolveOptions { tol: 1e-10, accept_tol: 1e-7, ..SolveOptions::default() };
    let sol = solve(&cp, &opts);
    match sol.status {
        Status::Optimal => LinOutcome::Optimal { value: -sol.objective, point: sol.z[..cone.dim].to_vec() },
        Status::Unbounded => LinOutcome::Unbounded,
        Status::Infeasible => LinOutcome::Infeasible,
        s => LinOutcome::Failed(s),
    }
}

pub fn minimize(cone: &ConeK, obj: &[f64], tau: f64, eqs: &[(Vec<f64>, f64)]) -> LinOutcome {
    let neg: Vec<f64> = obj.iter().map(|v| -v).collect();
    match maximize(cone, &neg, tau, eqs) {
        LinOutcome::Optimal { value, point } => LinOutcome::Optimal { value: -value, point },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{cone_from_ellipsoids, cone_from_polytope};

    #[test]
    fn box_maximum() {
        let mut p = Mat::zeros(4, 2);
        p[(0, 0)] = 1.0;
        p[(1, 1)] = 1.0;
        p[(2, 0)] = -1.0;
        p[(3, 1)] = -1.0;
        let cone = cone_from_polytope(&p, &[-1.0; 4]).unwrap();
        let v = maximize(&cone, &[1.0, 2.0, 0.0], 1.0, &[]).value().unwrap();
        assert!((v - 3.0).abs() < 1e-7);
    }

    #[test]
    fn ball_maximum() {
        let cone = cone_from_ellipsoids(&[Mat::identity(2, 2)], &[vec![0.0, 0.0]], &[1.0]).unwrap();
        let v = maximize(&cone, &[3.0, 4.0, 0.0], 1.0, &[]).value().unwrap();
        assert!((v - 5.0).abs() < 1e-6);
    }

    #[test]
    fn halfline_is_unbounded() {
        let cone = cone_from_polytope(&Mat::identity(1, 1), &[0.0]).unwrap();
        assert_eq!(maximize(&cone, &[1.0, 0.0], 1.0, &[]), LinOutcome::Unbounded);
    }
}
