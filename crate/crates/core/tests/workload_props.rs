use conecontrol::cost::RunningCostForm;
use conecontrol::workload::{dual_vertices, effective_cost, lift_problem, reduce, BcpSpec, REDUCTION_TOL};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random instance with Gaussian `R`, `K` and uniform positive costs.
fn instance(seed: u64) -> BcpSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=6);
    let n = rng.random_range(1..=6);
    let p = rng.random_range(1..=n);
    let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let r = gauss(m, n);
    let k = gauss(p, n);
    let w: Vec<f64> = (0..m).map(|_| 0.1 + rng.random::<f64>()).collect();
    BcpSpec {
        r,
        k,
        cost: RunningCostForm::Linear { w, c: 0.0 },
        h: DVector::from_element(p, 1.0),
        b: DVector::zeros(m),
        sigma: DMatrix::identity(m, m),
        z: DVector::zeros(m),
        beta: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduction_identities(seed in any::<u64>()) {
        let bcp = instance(seed);
        let Ok(wp) = reduce(&bcp, false) else {
            // Only the no-workload case may fail on a full-rank instance.
            prop_assume!(false);
            unreachable!()
        };
        prop_assert!((&wp.m_mat * &bcp.r - &wp.g * &bcp.k).amax() <= REDUCTION_TOL);
        if wp.q() > 0 {
            prop_assert!((&wp.m_mat * &bcp.r * &wp.null_k).amax() <= REDUCTION_TOL);
            prop_assert!((&wp.m_mat * &wp.n_basis).amax() <= REDUCTION_TOL);
        }
        let gram = &wp.m_mat * wp.m_mat.transpose();
        prop_assert!((gram - DMatrix::identity(wp.k(), wp.k())).amax() <= REDUCTION_TOL);
        prop_assert_eq!(wp.k() + wp.q(), bcp.m());
    }

    #[test]
    fn effective_cost_homogeneous_and_convex(seed in any::<u64>(), alpha in 0.0..5.0f64, lambda in 0.0..1.0f64) {
        let bcp = instance(seed);
        let Ok(wp) = reduce(&bcp, false) else { prop_assume!(false); unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let m = bcp.m();
        let z1 = DVector::from_fn(m, |_, _| rng.random::<f64>());
        let z2 = DVector::from_fn(m, |_, _| rng.random::<f64>());
        let x1 = &wp.m_mat * &z1;
        let x2 = &wp.m_mat * &z2;
        let (v1, _) = effective_cost(&wp, &bcp, &x1).unwrap();
        let (v2, _) = effective_cost(&wp, &bcp, &x2).unwrap();
        let (va, _) = effective_cost(&wp, &bcp, &(&x1 * alpha)).unwrap();
        prop_assert!((va - alpha * v1).abs() <= 1e-8 * (1.0 + va.abs()));
        let (vm, _) = effective_cost(&wp, &bcp, &(&x1 * lambda + &x2 * (1.0 - lambda))).unwrap();
        prop_assert!(vm <= lambda * v1 + (1.0 - lambda) * v2 + 1e-8 * (1.0 + vm.abs()));
        // Weak duality on the dual vertices, with equality at the max.
        let verts = dual_vertices(&wp, &bcp).unwrap();
        let best = verts.iter().map(|l| l.dot(&x1)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((best - v1).abs() <= 1e-7 * (1.0 + v1.abs()), "{} vs {}", best, v1);
    }

    #[test]
    fn minimiser_scales_along_rays(seed in any::<u64>(), alpha in 0.1..5.0f64) {
        let bcp = instance(seed);
        let Ok(wp) = reduce(&bcp, false) else { prop_assume!(false); unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdef);
        let z = DVector::from_fn(bcp.m(), |_, _| rng.random::<f64>());
        let x = &wp.m_mat * &z;
        let (_, z1) = effective_cost(&wp, &bcp, &x).unwrap();
        let (_, z2) = effective_cost(&wp, &bcp, &(&x * alpha)).unwrap();
        prop_assert!((&z2 - &z1 * alpha).amax() <= 1e-7 * (1.0 + z2.amax()));
        // Nearby points on the ray give nearby minimisers.
        let (_, z3) = effective_cost(&wp, &bcp, &(&x * (alpha * (1.0 + 1e-6)))).unwrap();
        prop_assert!((&z3 - &z2).amax() <= 1e-4 * (1.0 + z2.amax()));
    }
}

#[test]
fn lifted_single_server_validates() {
    let bcp = BcpSpec::from_json(
        r#"{"R": [[1.0]], "K": [[1.0]], "cost": {"form": "linear", "w": [2.0], "c": 0.0},
            "h": [0.5], "b": [-0.2], "Sigma": [[1.0]]}"#,
    )
    .unwrap();
    let wp = reduce(&bcp, true).unwrap();
    let spec = lift_problem(&wp, &bcp).unwrap();
    let report = spec.validate().unwrap();
    assert!((report.vectors.u0_hat[0] - 1.0).abs() < 1e-12);
    assert!((spec.running_cost.eval(&[1.5]) - 3.0).abs() < 1e-12);
    assert!((spec.push_cost.eval(&[2.0]) - 1.0).abs() < 1e-12);
    assert_eq!(spec.g, DMatrix::from_element(1, 1, 1.0));
}
