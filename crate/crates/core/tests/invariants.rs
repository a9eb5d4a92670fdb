use copodr::cones::{as_to_ia, build_shat, ia_compose, IaParts};
use copodr::conic::{cbf, sdpa, ConicProgram};
use copodr::linalg::{quad_form, smat, svec, Mat};
use copodr::model::{cone_from_ellipsoids, soc_residual, ConeK};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit ball in dimension `k` cut by `facets` random half-spaces through
/// a neighbourhood of the origin.
fn random_cone(rng: &mut ChaCha8Rng, k: usize, facets: usize) -> ConeK {
    let ball = cone_from_ellipsoids(&[Mat::identity(k, k)], &[vec![0.0; k]], &[1.0]).unwrap();
    let p = Mat::from_fn(facets, k + 1, |_, c| if c < k { rng.random_range(-1.0..1.0) } else { rng.random_range(0.1..1.0) });
    ConeK::new(k + 1, p, ball.soc_blocks).unwrap()
}

fn cone_points(rng: &mut ChaCha8Rng, cone: &ConeK, n: usize) -> Vec<Vec<f64>> {
    let k = cone.k();
    let mut out = Vec::new();
    while out.len() < n {
        let mut u: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        u.push(1.0);
        if cone.contains(&u, 0.0) {
            let t = rng.random_range(0.1..3.0);
            out.push(u.iter().map(|x| x * t).collect());
        }
    }
    out
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose()
}

/// Row vector in the second-order cone with the radius last.
fn soc_row(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.push(n + rng.random_range(0.0..0.5));
    v
}

fn random_ia_parts(rng: &mut ChaCha8Rng, cone: &ConeK) -> IaParts {
    let np = cone.n_p();
    let mut sigma = Mat::zeros(np, np);
    for i in 0..np {
        for j in i..np {
            let v = if rng.random_bool(0.5) { rng.random_range(0.0..2.0) } else { 0.0 };
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    let phi = cone
        .soc_blocks
        .iter()
        .map(|bl| {
            let m = bl.nrows();
            let mut f = Mat::zeros(np, m);
            for r in 0..np {
                for (c, v) in soc_row(rng, m).into_iter().enumerate() {
                    f[(r, c)] = v;
                }
            }
            f
        })
        .collect();
    IaParts {
        w: random_psd(rng, cone.dim),
        sigma,
        tau: cone.soc_blocks.iter().map(|_| rng.random_range(0.0..2.0)).collect(),
        phi,
    }
}

fn scale(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ia_certificates_are_copositive(seed in any::<u64>(), k in 1usize..5, facets in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = random_cone(&mut rng, k, facets);
        let v = ia_compose(&cone, &random_ia_parts(&mut rng, &cone));
        for u in cone_points(&mut rng, &cone, 200) {
            prop_assert!(quad_form(&v, &u) >= -1e-10 * scale(&u), "uᵀVu = {}", quad_form(&v, &u));
        }
    }

    #[test]
    fn shat_is_copositive_on_its_block(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = random_cone(&mut rng, k, 0);
        let s = build_shat(&cone.soc_blocks[0]).unwrap();
        for u in cone_points(&mut rng, &cone, 100) {
            prop_assert!(soc_residual(&cone.soc_blocks[0], &u) >= -1e-12);
            prop_assert!(quad_form(&s, &u) >= -1e-10 * scale(&u));
        }
    }

    #[test]
    fn as_certificate_embeds_in_ia(seed in any::<u64>(), k in 1usize..5, facets in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = random_cone(&mut rng, k, facets);
        let np = cone.n_p();
        let w = random_psd(&mut rng, cone.dim);
        let theta: Vec<f64> = (0..np).map(|_| rng.random_range(0.0..2.0)).collect();
        let tau: Vec<f64> = cone.soc_blocks.iter().map(|_| rng.random_range(0.0..2.0)).collect();
        // W + ½(P̂ᵀθeᵀ + eθᵀP̂) + Σ τŜ with e the last unit vector
        let mut direct = w.clone();
        let pt = cone.p_rows.transpose() * Mat::from_column_slice(np, 1, &theta);
        let h = cone.dim - 1;
        for i in 0..cone.dim {
            direct[(i, h)] += 0.5 * pt[(i, 0)];
            direct[(h, i)] += 0.5 * pt[(i, 0)];
        }
        for (bl, t) in cone.soc_blocks.iter().zip(&tau) {
            direct += build_shat(bl).unwrap() * *t;
        }
        let parts = as_to_ia(&cone, &w, &theta, &tau).unwrap();
        prop_assert!(parts.sigma.iter().all(|&s| s >= 0.0));
        let composed = ia_compose(&cone, &parts);
        prop_assert!((composed - direct).amax() <= 1e-12);
    }

    #[test]
    fn svec_round_trips_and_preserves_inner_products(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_psd(&mut rng, n) - random_psd(&mut rng, n);
        let b = random_psd(&mut rng, n);
        prop_assert!((smat(&svec(&a), n) - &a).amax() <= 1e-12);
        let lhs: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        prop_assert!((lhs - a.component_mul(&b).sum()).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn exported_programs_read_back(seed in any::<u64>(), with_soc in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let soc = if with_soc { vec![rng.random_range(2..5)] } else { vec![] };
        let psd = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..4)).collect();
        let mut cp = ConicProgram::new(rng.random_range(0..3), rng.random_range(1..4), soc, psd);
        let n = cp.n_vars();
        cp.c = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        cp.c0 = rng.random_range(-1.0..1.0);
        for _ in 0..rng.random_range(1..6) {
            let mut coefs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.5) {
                    coefs.push((j, rng.random_range(-3.0..3.0)));
                }
            }
            cp.add_row(&coefs, rng.random_range(-2.0..2.0));
        }
        let mut back = vec![cbf::read_cbf(&cbf::write_cbf(&cp).unwrap()).unwrap()];
        if !with_soc {
            back.push(sdpa::read_sdpa(&sdpa::write_sdpa(&cp).unwrap()).unwrap());
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-15 * x.abs().max(1.0);
        for q in back {
            prop_assert_eq!((q.n_free, q.n_nonneg, &q.soc_dims, &q.psd_dims, q.m), (cp.n_free, cp.n_nonneg, &cp.soc_dims, &cp.psd_dims, cp.m));
            let (ta, tb) = (cp.canonical_a(), q.canonical_a());
            prop_assert_eq!(ta.len(), tb.len());
            for (x, y) in ta.iter().zip(&tb) {
                prop_assert!((x.0, x.1) == (y.0, y.1) && close(x.2, y.2));
            }
            prop_assert!(cp.b.iter().zip(&q.b).all(|(x, y)| close(*x, *y)));
            prop_assert!(cp.c.iter().zip(&q.c).all(|(x, y)| close(*x, *y)));
            prop_assert!(close(cp.c0, q.c0));
        }
    }
}
