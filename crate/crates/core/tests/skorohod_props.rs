mod common;

use common::{random_path, v};
use conecontrol::cone::ConeSpec;
use conecontrol::skorohod::SkorohodMap;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(dim: usize) -> (ConeSpec, SkorohodMap) {
    let cone = ConeSpec::orthant(dim);
    let u0 = DVector::from_element(dim, 1.0).normalize();
    let map = SkorohodMap::new(&cone, &u0).unwrap();
    (cone, map)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lipschitz_bound(seed in any::<u64>(), dim in 1usize..=2, linear in any::<bool>()) {
        let (cone, map) = setup(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = cone.sample_point(&mut rng, 1.0);
        let b = cone.sample_point(&mut rng, 1.0);
        let z1 = random_path(&mut rng, a, 60, 0.05, 1.0, 0.1, linear);
        let z2 = random_path(&mut rng, b, 60, 0.05, 1.0, 0.1, linear);
        let t = 3.0;
        let (v1, x1) = map.gamma(&z1).unwrap();
        let (v2, x2) = map.gamma(&z2).unwrap();
        let lhs = v1.sup_distance(&v2, t).unwrap() + x1.sup_distance(&x2, t).unwrap();
        let rhs = map.kappa_hat() * z1.sup_distance(&z2, t).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn nonanticipative(seed in any::<u64>(), dim in 1usize..=2, linear in any::<bool>()) {
        let (cone, map) = setup(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = cone.sample_point(&mut rng, 1.0);
        let z = random_path(&mut rng, start, 40, 0.1, 1.0, 0.2, linear);
        let full = map.gamma_hat(&z).unwrap();
        for _ in 0..5 {
            let t = rng.random::<f64>() * 4.0;
            let cut = map.gamma_hat(&z.truncate(t).unwrap()).unwrap();
            prop_assert_eq!(cut, full.truncate(t).unwrap());
        }
    }

    #[test]
    fn pushing_is_nondecreasing_and_keeps_state_in_cone(seed in any::<u64>(), dim in 1usize..=2, linear in any::<bool>()) {
        let (cone, map) = setup(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = cone.sample_point(&mut rng, 1.0);
        let z = random_path(&mut rng, start, 40, 0.1, 2.0, 0.2, linear);
        let (vp, x) = map.gamma(&z).unwrap();
        prop_assert!(vp.value(0)[0] >= 0.0);
        for i in 1..vp.len() {
            prop_assert!(vp.left_limit(i)[0] >= vp.value(i - 1)[0]);
            prop_assert!(vp.value(i)[0] >= vp.left_limit(i)[0]);
            prop_assert!(cone.margin(x.value(i)) >= -1e-12 * (1.0 + x.value(i).norm()));
            prop_assert!(cone.margin(x.left_limit(i)) >= -1e-12 * (1.0 + x.left_limit(i).norm()));
        }
    }

    #[test]
    fn identity_on_paths_in_the_cone(seed in any::<u64>(), dim in 1usize..=2, linear in any::<bool>()) {
        let (cone, map) = setup(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = cone.sample_point(&mut rng, 1.0) + DVector::from_element(dim, 100.0);
        let z = random_path(&mut rng, start, 40, 0.1, 1.0, 0.1, linear);
        let (vp, x) = map.gamma(&z).unwrap();
        prop_assert!(vp.values().iter().all(|s| s[0] == 0.0));
        prop_assert_eq!(x, z);
    }
}

#[test]
fn reflected_ramp_matches_running_maximum() {
    let (_, map) = setup(1);
    let z = conecontrol::PathRCLL::sampled(0.01, 400, |t| v(&[1.0 - t])).unwrap();
    let (vp, x) = map.gamma(&z).unwrap();
    for i in 0..z.len() {
        let t = z.times()[i];
        assert!((vp.value(i)[0] - (t - 1.0).max(0.0)).abs() < 1e-12);
        assert!((x.value(i)[0] - (1.0 - t).max(0.0)).abs() < 1e-12);
    }
}
