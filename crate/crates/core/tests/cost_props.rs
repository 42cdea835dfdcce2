mod common;

use common::{random_control, random_path, v};
use conecontrol::cost::{h_integral, running_integral, PushCost, RunningCost, RunningCostForm, TimeInterval};
use conecontrol::path::PathRCLL;
use conecontrol::ControlPath;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn forms() -> Vec<PushCost> {
    vec![
        PushCost::zero(),
        PushCost::linear(vec![1.0, 0.5]),
        PushCost::max_linear(vec![vec![1.0, 0.0], vec![0.3, 2.0], vec![-0.5, 1.0]]),
    ]
}

fn nonneg2() -> impl Strategy<Value = DVector<f64>> {
    (0.0..10.0f64, 0.0..10.0f64).prop_map(|(a, b)| v(&[a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn push_cost_subadditive(y in nonneg2(), z in nonneg2()) {
        for h in forms() {
            let lhs = h.eval((&y + &z).as_slice());
            let rhs = h.eval(y.as_slice()) + h.eval(z.as_slice());
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn push_cost_homogeneous(y in nonneg2(), a in 0.0..10.0f64) {
        for h in forms() {
            let lhs = h.eval((&y * a).as_slice());
            prop_assert!((lhs - a * h.eval(y.as_slice())).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn splitting_inequality(seed in any::<u64>(), beta in 0.1..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y1 = random_control(&mut rng, 2, 30, 0.1, |_| true);
        let y2 = random_control(&mut rng, 2, 30, 0.1, |_| true);
        let y = ControlPath::new(y1.path().combine(1.0, y2.path(), 1.0).unwrap()).unwrap();
        for h in forms() {
            let whole = h_integral(&h, &y, beta, TimeInterval::whole());
            let parts = h_integral(&h, &y1, beta, TimeInterval::whole()) + h_integral(&h, &y2, beta, TimeInterval::whole());
            prop_assert!(whole <= parts + 1e-9);
        }
    }

    #[test]
    fn splitting_is_exact_on_disjoint_supports(seed in any::<u64>(), beta in 0.1..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y1 = random_control(&mut rng, 2, 30, 0.1, |i| i % 2 == 0);
        let y2 = random_control(&mut rng, 2, 30, 0.1, |i| i % 2 == 1);
        let y = ControlPath::new(y1.path().combine(1.0, y2.path(), 1.0).unwrap()).unwrap();
        for h in forms() {
            let whole = h_integral(&h, &y, beta, TimeInterval::whole());
            let parts = h_integral(&h, &y1, beta, TimeInterval::whole()) + h_integral(&h, &y2, beta, TimeInterval::whole());
            prop_assert!((whole - parts).abs() <= 1e-9);
        }
    }

    #[test]
    fn h_integral_scales(seed in any::<u64>(), a in 0.0..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_control(&mut rng, 2, 30, 0.1, |_| true);
        let scaled = ControlPath::new(y.path().map(|x| x * a).unwrap()).unwrap();
        for h in forms() {
            let base = h_integral(&h, &y, 1.0, TimeInterval::whole());
            let s = h_integral(&h, &scaled, 1.0, TimeInterval::whole());
            prop_assert!((s - a * base).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn h_integral_adds_over_intervals(seed in any::<u64>(), cut in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_control(&mut rng, 2, 30, 0.1, |_| true);
        let t = cut as f64 * 0.1;
        for h in forms() {
            let whole = h_integral(&h, &y, 1.0, TimeInterval::closed(0.0, 3.0));
            let split = h_integral(&h, &y, 1.0, TimeInterval::closed(0.0, t)) + h_integral(&h, &y, 1.0, TimeInterval::left_open(t, 3.0));
            prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
        }
    }

    #[test]
    fn running_integral_monotone_and_additive(seed in any::<u64>(), cut in 1usize..40, beta in 0.1..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = v(&[rand::Rng::random::<f64>(&mut rng) * 3.0]);
        let x = random_path(&mut rng, start, 40, 0.05, 1.0, 0.1, true).map(|p| p.map(f64::abs)).unwrap();
        let low = RunningCost::new(RunningCostForm::Linear { w: vec![1.0], c: 0.5 }, 1.0, [1.0, 1.0, 2.0]);
        let high = RunningCost::new(RunningCostForm::Linear { w: vec![2.0], c: 1.0 }, 1.0, [1.0, 1.0, 2.0]);
        let horizon = 2.0;
        prop_assert!(running_integral(&low, &x, beta, horizon) <= running_integral(&high, &x, beta, horizon));
        // [0, T] splits at a grid time into [0, t] plus the shifted tail.
        let k = cut;
        let t = x.times()[k];
        let head = running_integral(&low, &x, beta, t);
        let tail_times: Vec<f64> = x.times()[k..].iter().map(|s| s - t).collect();
        let tail_values: Vec<DVector<f64>> = (k..x.len()).map(|i| x.value(i).clone()).collect();
        let tail_lefts: Vec<DVector<f64>> = std::iter::once(x.value(k).clone())
            .chain((k + 1..x.len()).map(|i| x.left_limit(i).clone()))
            .collect();
        let tail = PathRCLL::from_parts(tail_times, tail_values, tail_lefts, x.interpolation()).unwrap();
        let rest = (-beta * t).exp() * running_integral(&low, &tail, beta, horizon - t);
        let whole = running_integral(&low, &x, beta, horizon);
        prop_assert!((whole - head - rest).abs() <= 1e-12 * (1.0 + whole.abs()));
    }
}
