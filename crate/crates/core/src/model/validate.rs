use super::UncertaintySet;
use crate::conic::lp::{maximize, minimize, LinOutcome};
use crate::linalg::quad_form;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Assumption2 {
    /// Sampled minimum of `uᵀĈu` is nonnegative and (numerically) attained at 0.
    Ok,
    /// Sampling could not confirm the assumption; the value is the sampled minimum.
    Unverified(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub nonempty: bool,
    pub bounded: bool,
    /// Per-coordinate `(min, max)` over `U⁰`; infinite where unbounded.
    pub bounds: Vec<(f64, f64)>,
    pub assumption2: Vec<Assumption2>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn compact_nonempty(&self) -> bool {
        self.nonempty && self.bounded
    }
}

/// Checks nonemptiness and boundedness of `U⁰` by linear optimization and
/// probes the minimum-zero condition on each quadratic heuristically. The
/// report never rejects.
pub fn validate(u: &UncertaintySet) -> ValidationReport {
    let cone = &u.cone;
    let n = cone.dim;
    let mut notes = Vec::new();
    let zero = vec![0.0; n];
    let nonempty = !matches!(maximize(cone, &zero, 1.0, &[]), LinOutcome::Infeasible);
    if !nonempty {
        notes.push("U⁰ is empty".to_string());
    }
    let mut bounds = Vec::with_capacity(u.k);
    let mut bounded = nonempty;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    if nonempty {
        for i in 0..u.k {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let hi = maximize(cone, &e, 1.0, &[]);
            let lo = minimize(cone, &e, 1.0, &[]);
            let mut pair = (f64::NEG_INFINITY, f64::INFINITY);
            for (out, slot) in [(lo, 0), (hi, 1)] {
                match out {
                    LinOutcome::Optimal { value, point } => {
                        if slot == 0 {
                            pair.0 = value;
                        } else {
                            pair.1 = value;
                        }
                        samples.push(point);
                    }
                    LinOutcome::Unbounded => {
                        bounded = false;
                        notes.push(format!("coordinate {i} is unbounded"));
                    }
                    other => {
                        bounded = false;
                        notes.push(format!("bound LP for coordinate {i} failed: {other:?}"));
                    }
                }
            }
            bounds.push(pair);
        }
    }

    let mut assumption2 = Vec::with_capacity(u.quad_mats.len());
    if !u.quad_mats.is_empty() && bounded {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..(2 * u.k + 8) {
            let dir: Vec<f64> = (0..n).map(|i| if i < u.k { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            if let LinOutcome::Optimal { point, .. } = maximize(cone, &dir, 1.0, &[]) {
                samples.push(point);
            }
        }
        let base = samples.len();
        for _ in 0..(20 * base.max(1)) {
            let a = rng.random_range(0..base);
            let b = rng.random_range(0..base);
            let t: f64 = rng.random();
            let p: Vec<f64> = samples[a].iter().zip(&samples[b]).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            samples.push(p);
        }
        for c in &u.quad_mats {
            let m = samples.iter().map(|p| quad_form(c, p)).fold(f64::INFINITY, f64::min);
            if m >= -1e-8 && m <= 1e-8 {
                assumption2.push(Assumption2::Ok);
            } else {
                assumption2.push(Assumption2::Unverified(m));
            }
        }
    } else {
        assumption2.extend(u.quad_mats.iter().map(|_| Assumption2::Unverified(f64::NAN)));
    }
    ValidationReport { nonempty, bounded, bounds, assumption2, notes }
}

/// True when the slice `τ = 0` of the cone is `{0}` (Lemma 2's recession
/// condition for compact sets).
pub fn recession_trivial(cone: &crate::model::ConeK) -> bool {
    let n = cone.dim;
    (0..n - 1).all(|i| {
        [1.0, -1.0].iter().all(|&s| {
            let mut e = vec![0.0; n];
            e[i] = s;
            matches!(maximize(cone, &e, 0.0, &[]), LinOutcome::Optimal { value, .. } if value <= 1e-8)
        })
    })
}
