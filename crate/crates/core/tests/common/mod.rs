#![allow(dead_code)]

use conecontrol::ProblemSpec;
use nalgebra::DVector;

pub fn constant_cost() -> ProblemSpec {
    ProblemSpec::from_json(include_str!("../../../../specs/constant_cost.json")).unwrap()
}

pub fn linear_drift() -> ProblemSpec {
    ProblemSpec::from_json(include_str!("../../../../specs/linear_drift.json")).unwrap()
}

pub fn reflected_bm() -> ProblemSpec {
    ProblemSpec::from_json(include_str!("../../../../specs/reflected_bm.json")).unwrap()
}

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Unit vector at angle `t` in the plane.
pub fn polar(t: f64) -> DVector<f64> {
    v(&[t.cos(), t.sin()])
}

use conecontrol::path::{Interpolation, Jump, PathRCLL};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random RCLL path on `n + 1` grid points of step `dt`: Gaussian steps of
/// size `scale·√dt`, a jump of size `scale` with probability `jump_prob`
/// per step, piecewise-linear or piecewise-constant between grid times.
pub fn random_path<R: Rng>(
    rng: &mut R,
    start: DVector<f64>,
    n: usize,
    dt: f64,
    scale: f64,
    jump_prob: f64,
    linear: bool,
) -> PathRCLL {
    let k = start.len();
    let mut values = vec![start];
    let mut jumps = Vec::new();
    for i in 1..=n {
        let step = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal) * scale * dt.sqrt());
        let pre = &values[i - 1] + step;
        if rng.random::<f64>() < jump_prob {
            let jump = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
            let post = &pre + jump;
            if linear {
                jumps.push(Jump { index: i, pre });
            }
            values.push(post);
        } else {
            values.push(pre);
        }
    }
    let times = (0..=n).map(|i| i as f64 * dt).collect();
    if linear {
        PathRCLL::new(times, values, jumps, Interpolation::PiecewiseLinear).unwrap()
    } else {
        let first = values[0].clone();
        PathRCLL::piecewise_constant(times, values, first).unwrap()
    }
}

/// Nondecreasing piecewise-constant control in the orthant with `Y(0−) = 0`;
/// increments land only on indices where `allow(i)` holds.
pub fn random_control<R: Rng>(rng: &mut R, p: usize, n: usize, dt: f64, allow: impl Fn(usize) -> bool) -> conecontrol::ControlPath {
    let mut cur = DVector::zeros(p);
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if allow(i) && rng.random::<f64>() < 0.5 {
            cur += DVector::from_fn(p, |_, _| rng.random::<f64>());
        }
        values.push(cur.clone());
    }
    let times = (0..=n).map(|i| i as f64 * dt).collect();
    conecontrol::ControlPath::new(PathRCLL::piecewise_constant(times, values, DVector::zeros(p)).unwrap()).unwrap()
}
