//! End-to-end bounds: decision-rule family plus cone (or outer set) to a
//! solved conic program, with the data needed to verify the result.

use crate::conic::assemble::{solve_copositive, CopSolution};
use crate::conic::{Approx, AssembleOptions, Assembled, SolveOptions, Status};
use crate::error::{Error, Result};
use crate::lifting::{
    axial_lift, build_gwk_outer, build_ustar, lifted_problem, make_lifting, marginal_bounds, solve_outer,
    AxialSegmentation, LiftSpec, LiftedProblem,
};
use crate::model::MsroProblem;
use crate::reformulate::{build_ms_ldr, build_ms_qdr, build_qdr, extract_rule, CopositiveProgram, DecisionRule};
use crate::verify::{sample_points, worst_case_eval, Verdict};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Ldr,
    Qdr,
    Pldr,
    Pqdr,
    Lqdr,
}

impl Rule {
    pub fn lifted(self) -> bool {
        matches!(self, Rule::Pldr | Rule::Pqdr)
    }
}

/// How the copositive constraints are replaced: an inner cone, or a convex
/// outer set of the lifted uncertainty (piecewise linear rules only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Ia,
    As,
    Gwk,
    Ustar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheme {
    pub rule: Rule,
    pub bound: Bound,
}

impl Scheme {
    pub const fn new(rule: Rule, bound: Bound) -> Self {
        Scheme { rule, bound }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Ldr => "LDR",
            Rule::Qdr => "QDR",
            Rule::Pldr => "PLDR",
            Rule::Pqdr => "PQDR",
            Rule::Lqdr => "LQDR",
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rule, self.bound) {
            (Rule::Pldr, Bound::Gwk) => f.write_str("GWK"),
            (r, Bound::Ia) => write!(f, "{r}-IA"),
            (r, Bound::As) => write!(f, "{r}-AS"),
            (r, Bound::Gwk) => write!(f, "{r}-GWK"),
            (r, Bound::Ustar) => write!(f, "{r}-USTAR"),
        }
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ldr" => Ok(Rule::Ldr),
            "qdr" => Ok(Rule::Qdr),
            "pldr" => Ok(Rule::Pldr),
            "pqdr" => Ok(Rule::Pqdr),
            "lqdr" => Ok(Rule::Lqdr),
            _ => Err(Error::Invalid(format!("unknown rule '{s}'"))),
        }
    }
}

impl FromStr for Bound {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ia" => Ok(Bound::Ia),
            "as" => Ok(Bound::As),
            "gwk" => Ok(Bound::Gwk),
            "ustar" | "u*" => Ok(Bound::Ustar),
            _ => Err(Error::Invalid(format!("unknown cone '{s}'"))),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("gwk") {
            return Ok(Scheme::new(Rule::Pldr, Bound::Gwk));
        }
        let (r, b) = t.split_once('-').ok_or_else(|| Error::Invalid(format!("scheme '{s}' is not RULE-CONE")))?;
        Ok(Scheme::new(r.parse()?, b.parse()?))
    }
}

/// Breakpoints `{u̲_k, (u̲_k + ū_k)/2}` on every axis: one fold per
/// coordinate at the midpoint of its marginal support.
pub fn midpoint_breakpoints(p: &MsroProblem) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = marginal_bounds(&p.uncertainty)?;
    Ok(lo.iter().zip(&hi).map(|(&l, &h)| vec![l, 0.5 * (l + h)]).collect())
}

/// The copositive program a scheme is built on.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub cp: CopositiveProgram,
    pub lifted: Option<LiftedProblem>,
    pub segmentation: Option<AxialSegmentation>,
}

impl Prepared {
    /// Problem whose parameters the decision rule is written in.
    pub fn problem<'a>(&'a self, original: &'a MsroProblem) -> &'a MsroProblem {
        self.lifted.as_ref().map_or(original, |l| &l.problem)
    }

    /// Maps a point of the original set to the rule's parameter space.
    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        self.lifted.as_ref().map_or_else(|| u.to_vec(), |l| l.lift(u))
    }
}

pub fn prepare(p: &MsroProblem, rule: Rule, lift: Option<&LiftSpec>) -> Result<Prepared> {
    if !rule.lifted() {
        let cp = match rule {
            Rule::Ldr => build_ms_ldr(p)?,
            Rule::Qdr if p.n_stages() == 1 => build_qdr(p)?,
            Rule::Qdr => {
                if !p.all_fixed() {
                    return Err(Error::Invalid("quadratic decision rules require fixed recourse".into()));
                }
                build_ms_qdr(p)?
            }
            _ => build_ms_qdr(p)?,
        };
        return Ok(Prepared { cp, lifted: None, segmentation: None });
    }
    let (lf, seg) = match lift {
        Some(LiftSpec::Folds(folds)) => (make_lifting(&p.uncertainty, folds)?, None),
        Some(LiftSpec::Axial(a)) => {
            let seg = AxialSegmentation::new(&p.uncertainty, a.breakpoints.clone())?;
            (axial_lift(&p.uncertainty, &seg)?, Some(seg))
        }
        None => {
            let seg = AxialSegmentation::new(&p.uncertainty, midpoint_breakpoints(p)?)?;
            (axial_lift(&p.uncertainty, &seg)?, Some(seg))
        }
    };
    let lp = lifted_problem(p, &lf)?;
    let cp = match rule {
        Rule::Pldr => build_ms_ldr(&lp.problem)?,
        _ => build_ms_qdr(&lp.problem)?,
    };
    Ok(Prepared { cp, lifted: Some(lp), segmentation: seg })
}

/// A solved scheme.
#[derive(Clone, Debug)]
pub struct Run {
    pub scheme: Scheme,
    pub prepared: Prepared,
    pub solution: CopSolution,
    pub assembled: Option<Assembled>,
    /// Wall-clock of assembly plus solve.
    pub seconds: f64,
    /// Wall-clock including rule construction and lifting LPs.
    pub total_seconds: f64,
}

impl Run {
    pub fn status(&self) -> Status {
        self.solution.status
    }

    pub fn value(&self) -> f64 {
        self.solution.value
    }

    pub fn rule(&self) -> Result<DecisionRule> {
        extract_rule(&self.prepared.cp, &self.solution.vals)
    }

    /// Checks the extracted rule on `n` sampled points of the original set,
    /// lifted where the rule needs it.
    pub fn verify(&self, p: &MsroProblem, n: usize, seed: u64) -> Result<Verdict> {
        let rule = self.rule()?;
        let pts: Vec<Vec<f64>> =
            sample_points(&p.uncertainty, n, seed)?.iter().map(|u| self.prepared.point(u)).collect();
        Ok(worst_case_eval(self.prepared.problem(p), &rule, &pts, self.value()))
    }
}

pub fn run(p: &MsroProblem, scheme: Scheme, lift: Option<&LiftSpec>, sopts: &SolveOptions) -> Result<Run> {
    let t0 = Instant::now();
    let prepared = prepare(p, scheme.rule, lift)?;
    let (solution, assembled) = match scheme.bound {
        Bound::Ia | Bound::As => {
            let approx = if scheme.bound == Bound::Ia { Approx::IA } else { Approx::AS };
            let (asm, sol) = solve_copositive(&prepared.cp, &AssembleOptions::new(approx), sopts)?;
            (sol, Some(asm))
        }
        Bound::Gwk | Bound::Ustar => {
            if scheme.rule != Rule::Pldr {
                return Err(Error::Invalid(format!("{scheme}: outer sets apply to piecewise linear rules only")));
            }
            let seg = prepared
                .segmentation
                .as_ref()
                .ok_or_else(|| Error::Invalid(format!("{scheme} needs an axial segmentation")))?;
            let lp = prepared.lifted.as_ref().expect("lifted");
            let set = if scheme.bound == Bound::Gwk {
                build_gwk_outer(&p.uncertainty, seg, &lp.lifting)
            } else {
                build_ustar(&p.uncertainty, seg, &lp.lifting)
            };
            let mut pos = vec![0; lp.order.len()];
            for (q, &o) in lp.order.iter().enumerate() {
                pos[o] = q;
            }
            (solve_outer(&prepared.cp, &set.permuted(&pos), sopts)?, None)
        }
    };
    let seconds = solution.assemble_seconds + solution.solution.seconds;
    Ok(Run { scheme, prepared, solution, assembled, seconds, total_seconds: t0.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in ["LDR-IA", "QDR-AS", "PLDR-IA", "GWK", "LQDR-AS", "PLDR-USTAR", "PQDR-IA"] {
            let parsed: Scheme = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!("pldr-gwk".parse::<Scheme>().unwrap().to_string(), "GWK");
        assert!("ldr".parse::<Scheme>().is_err());
        assert!("ldr-xx".parse::<Scheme>().is_err());
    }
}
