//! Running and push costs, control decomposition, and discounted cost
//! functionals on sampled paths.
//!
//! Stieltjes integrals `∫ f h(dY)` follow the convention that an interval
//! closed at 0 charges the initial jump `Y(0) − Y(0−)`, with `Y(0−) = 0`.
//! Running-cost integrals use exact exponential weights against the linear
//! interpolant of `ℓ(X)` between grid times, so `∫ e^{−βs} ds` and any
//! integrand linear in time are integrated without quadrature error.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{check_dim, Error, Result};
use crate::path::{Interpolation, PathRCLL};
use crate::problem::ProblemSpec;

const VALIDATION_SAMPLES: usize = 2000;
const VALIDATION_SEED: u64 = 0xc057;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RunningCostForm {
    Constant { c: f64 },
    Linear { w: Vec<f64>, c: f64 },
    Power { a: f64, m: f64, c: f64 },
    MaxLinear { w: Vec<Vec<f64>>, c: Vec<f64> },
}

/// Running cost `ℓ` with declared growth exponent and bound constants
/// `c₁|x|^m − c₂ ≤ ℓ(x) ≤ c₃(|x|^m + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningCost {
    #[serde(flatten)]
    pub form: RunningCostForm,
    pub m_ell: f64,
    pub bounds: [f64; 3],
}

impl RunningCost {
    pub fn new(form: RunningCostForm, m_ell: f64, bounds: [f64; 3]) -> Self {
        Self { form, m_ell, bounds }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.form {
            RunningCostForm::Constant { c } => *c,
            RunningCostForm::Linear { w, c } => dot(w, x) + c,
            RunningCostForm::Power { a, m, c } => a * norm(x).powf(*m) + c,
            RunningCostForm::MaxLinear { w, c } => w
                .iter()
                .zip(c)
                .map(|(wj, cj)| dot(wj, x) + cj)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Upper-bound constant `c₃`.
    pub fn c3(&self) -> f64 {
        self.bounds[2]
    }

    /// Checks dimensions, nonnegativity and the declared growth bounds on
    /// generators and a seeded sample of the state cone.
    pub fn validate(&self, x_cone: &ConeSpec) -> Result<()> {
        let k = x_cone.dim();
        match &self.form {
            RunningCostForm::Linear { w, .. } => check_dim(k, w.len())?,
            RunningCostForm::MaxLinear { w, c } => {
                if w.is_empty() || w.len() != c.len() {
                    return Err(Error::InvalidSpec("max_linear running cost needs matching w and c".into()));
                }
                for wj in w {
                    check_dim(k, wj.len())?;
                }
            }
            _ => {}
        }
        if !(self.m_ell >= 0.0) {
            return Err(Error::InvalidSpec("m_ell must be nonnegative".into()));
        }
        if !self.bounds.iter().all(|b| *b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidSpec("bound constants must be positive".into()));
        }
        let [c1, c2, c3] = self.bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let mut points: Vec<DVector<f64>> = vec![DVector::zeros(k)];
        points.extend(x_cone.generators().iter().cloned());
        points.extend((0..VALIDATION_SAMPLES).map(|_| x_cone.sample_point(&mut rng, 100.0)));
        for x in &points {
            let l = self.eval(x.as_slice());
            let r = x.norm().powf(self.m_ell);
            let slack = 1e-9 * (1.0 + l.abs());
            if l < -slack {
                return Err(Error::InvalidSpec(format!("running cost negative at {:?}", x.as_slice())));
            }
            if c1 * r - c2 > l + slack || l > c3 * (r + 1.0) + slack {
                return Err(Error::InvalidSpec(format!(
                    "running cost violates declared growth bounds at {:?}",
                    x.as_slice()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PushCostForm {
    Zero,
    Linear { h0: Vec<f64> },
    MaxLinear { branches: Vec<Vec<f64>> },
}

/// Positively homogeneous convex push cost `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushCost {
    #[serde(flatten)]
    pub form: PushCostForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_h: Option<f64>,
}

impl PushCost {
    pub fn zero() -> Self {
        Self {
            form: PushCostForm::Zero,
            c_h: None,
        }
    }

    pub fn linear(h0: Vec<f64>) -> Self {
        Self {
            form: PushCostForm::Linear { h0 },
            c_h: None,
        }
    }

    pub fn max_linear(branches: Vec<Vec<f64>>) -> Self {
        Self {
            form: PushCostForm::MaxLinear { branches },
            c_h: None,
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match &self.form {
            PushCostForm::Zero => 0.0,
            PushCostForm::Linear { h0 } => dot(h0, y),
            PushCostForm::MaxLinear { branches } => branches
                .iter()
                .map(|b| dot(b, y))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Global Lipschitz constant: the largest branch norm.
    pub fn lipschitz(&self) -> f64 {
        match &self.form {
            PushCostForm::Zero => 0.0,
            PushCostForm::Linear { h0 } => norm(h0),
            PushCostForm::MaxLinear { branches } => branches.iter().map(|b| norm(b)).fold(0.0, f64::max),
        }
    }

    fn branches(&self) -> Vec<&[f64]> {
        match &self.form {
            PushCostForm::Zero => Vec::new(),
            PushCostForm::Linear { h0 } => vec![h0.as_slice()],
            PushCostForm::MaxLinear { branches } => branches.iter().map(|b| b.as_slice()).collect(),
        }
    }

    /// Largest `c` for which some single branch satisfies `h_j·g ≥ c|g|` on
    /// every generator; since `h ≥ h_j`, this certifies `h(y) ≥ c|y|` on Y.
    pub fn certified_lower_bound(&self, y_cone: &ConeSpec) -> f64 {
        self.branches()
            .iter()
            .map(|b| {
                y_cone
                    .generators()
                    .iter()
                    .map(|g| dot(b, g.as_slice()) / g.norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Checks dimensions, that every branch is nonnegative on Y, and a
    /// declared `c_h` against the generators.
    pub fn validate(&self, y_cone: &ConeSpec) -> Result<()> {
        let p = y_cone.dim();
        let branches = self.branches();
        if matches!(self.form, PushCostForm::MaxLinear { .. }) && branches.is_empty() {
            return Err(Error::InvalidSpec("max_linear push cost needs a branch".into()));
        }
        for b in &branches {
            check_dim(p, b.len())?;
            for g in y_cone.generators() {
                if dot(b, g.as_slice()) < -1e-12 * g.norm() {
                    return Err(Error::InvalidSpec(format!(
                        "push-cost branch {b:?} is negative on generator {:?}",
                        g.as_slice()
                    )));
                }
            }
        }
        if let Some(c_h) = self.c_h {
            if !(c_h > 0.0) {
                return Err(Error::InvalidSpec("declared c_h must be positive".into()));
            }
            for g in y_cone.generators() {
                if self.eval(g.as_slice()) < c_h * g.norm() - 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "h(y) ≥ c_h|y| fails on generator {:?}",
                        g.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A control path: `Y(0−) = 0`, increments meant to lie in Y.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    path: PathRCLL,
}

impl ControlPath {
    pub fn new(path: PathRCLL) -> Result<Self> {
        if path.left_limit(0).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidPath("controls start from Y(0−) = 0".into()));
        }
        Ok(Self { path })
    }

    /// Identically zero control on the given grid.
    pub fn zero(times: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        Self::new(PathRCLL::piecewise_constant(
            times,
            vec![DVector::zeros(dim); n],
            DVector::zeros(dim),
        )?)
    }

    pub fn path(&self) -> &PathRCLL {
        &self.path
    }

    pub fn into_path(self) -> PathRCLL {
        self.path
    }

    /// Every jump and every linear segment increment must lie in `y_cone`.
    pub fn check_increments(&self, y_cone: &ConeSpec, tol: f64) -> Result<()> {
        check_dim(y_cone.dim(), self.path.dim())?;
        let p = &self.path;
        for i in 0..p.len() {
            let jump = p.jump_at(i);
            if y_cone.margin(&jump) < -tol * jump.norm().max(1.0) {
                return Err(Error::Inadmissible(format!("jump at index {i} leaves Y")));
            }
            if i > 0 && p.interpolation() == Interpolation::PiecewiseLinear {
                let seg = p.left_limit(i) - p.value(i - 1);
                if y_cone.margin(&seg) < -tol * seg.norm().max(1.0) {
                    return Err(Error::Inadmissible(format!("segment ending at index {i} leaves Y")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Jump,
    /// Linear segment on `(t_{i−1}, t_i)`.
    Segment,
}

/// One atom of the variation measure: a direction `Y°` with its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationPiece {
    pub index: usize,
    pub kind: PieceKind,
    pub direction: DVector<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Running total variation `|Y|`, same grid and interpolation as `Y`.
    pub total_variation: PathRCLL,
    pub pieces: Vec<VariationPiece>,
}

/// Total variation and unit directions of a control path.
pub fn decompose(y: &ControlPath) -> Decomposition {
    let p = y.path();
    let mut pieces = Vec::new();
    let mut tv_values = Vec::with_capacity(p.len());
    let mut tv_lefts = Vec::with_capacity(p.len());
    let mut tv = 0.0;
    for i in 0..p.len() {
        if i > 0 && p.interpolation() == Interpolation::PiecewiseLinear {
            let seg = p.left_limit(i) - p.value(i - 1);
            let mass = seg.norm();
            if mass > 0.0 {
                pieces.push(VariationPiece {
                    index: i,
                    kind: PieceKind::Segment,
                    direction: seg / mass,
                    mass,
                });
                tv += mass;
            }
        }
        tv_lefts.push(DVector::from_element(1, tv));
        let jump = p.jump_at(i);
        let mass = jump.norm();
        if mass > 0.0 {
            pieces.push(VariationPiece {
                index: i,
                kind: PieceKind::Jump,
                direction: jump / mass,
                mass,
            });
            tv += mass;
        }
        tv_values.push(DVector::from_element(1, tv));
    }
    let total_variation = PathRCLL::from_parts(p.times().to_vec(), tv_values, tv_lefts, p.interpolation())
        .expect("variation path inherits a valid grid");
    Decomposition {
        total_variation,
        pieces,
    }
}

/// Time set for Stieltjes integrals: `[start, end]` or `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
    pub include_start: bool,
}

impl TimeInterval {
    /// `[0, ∞)`.
    pub fn whole() -> Self {
        Self::closed(0.0, f64::INFINITY)
    }

    pub fn closed(start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            include_start: true,
        }
    }

    pub fn left_open(start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            include_start: false,
        }
    }

    fn contains(&self, t: f64) -> bool {
        t <= self.end && (t > self.start || (self.include_start && t == self.start))
    }
}

/// `∫_a^b e^{−βs} ds`.
pub fn discount_mass(beta: f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    if b.is_infinite() {
        return (-beta * a).exp() / beta;
    }
    (-beta * a).exp() * -(-beta * (b - a)).exp_m1() / beta
}

/// Weights `(w_l, w_r)` with `∫_a^{a+dt} e^{−βs} f(s) ds = w_l f(a) + w_r f(a+dt)`
/// for every `f` linear on the interval.
pub fn exp_weights(beta: f64, a: f64, dt: f64) -> (f64, f64) {
    let x = beta * dt;
    let ea = (-beta * a).exp();
    let total = -(-x).exp_m1() / beta;
    // (1 − e^{−x}(1 + x)) / (β x), with a series for tiny x.
    let right = if x < 1e-4 {
        dt * (0.5 - x / 3.0 + x * x / 8.0)
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (beta * x)
    };
    (ea * (total - right), ea * right)
}

/// `∫_{interval} e^{−βs} h(dY(s))` for a sampled control.
pub fn h_integral(h: &PushCost, y: &ControlPath, beta: f64, interval: TimeInterval) -> f64 {
    let p = y.path();
    let times = p.times();
    let mut total = 0.0;
    for i in 0..p.len() {
        if i > 0 && p.interpolation() == Interpolation::PiecewiseLinear {
            let (a, b) = (times[i - 1], times[i]);
            let lo = a.max(interval.start);
            let hi = b.min(interval.end);
            if hi > lo {
                let seg = p.left_limit(i) - p.value(i - 1);
                let rate = h.eval(seg.as_slice()) / (b - a);
                if rate != 0.0 {
                    total += rate * discount_mass(beta, lo, hi);
                }
            }
        }
        if interval.contains(times[i]) && p.has_jump(i) {
            let jump = p.jump_at(i);
            total += (-beta * times[i]).exp() * h.eval(jump.as_slice());
        }
    }
    total
}

/// `∫_0^T e^{−βs} ℓ(X_s) ds` using exact exponential weights on the linear
/// interpolant of `ℓ(X)` between grid times.
pub fn running_integral(ell: &RunningCost, x: &PathRCLL, beta: f64, horizon: f64) -> f64 {
    let times = x.times();
    let mut total = 0.0;
    for i in 1..x.len() {
        let (a, b) = (times[i - 1], times[i]);
        if a >= horizon {
            break;
        }
        let la = ell.eval(x.value(i - 1).as_slice());
        let lb_full = match x.interpolation() {
            Interpolation::PiecewiseConstant => la,
            Interpolation::PiecewiseLinear => ell.eval(x.left_limit(i).as_slice()),
        };
        if b <= horizon {
            let (wl, wr) = exp_weights(beta, a, b - a);
            total += wl * la + wr * lb_full;
        } else {
            let frac = (horizon - a) / (b - a);
            let end = match x.interpolation() {
                Interpolation::PiecewiseConstant => x.value(i - 1).clone(),
                Interpolation::PiecewiseLinear => x.value(i - 1) + (x.left_limit(i) - x.value(i - 1)) * frac,
            };
            let (wl, wr) = exp_weights(beta, a, horizon - a);
            total += wl * la + wr * ell.eval(end.as_slice());
        }
    }
    total
}

/// A cost value with an estimate of the discarded tail beyond the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// Tail estimate `e^{−βT}(c₃(1 + |X_T|^m) + Lip(h)·|Y|_T/T)/β`.
pub fn tail_bound(problem: &ProblemSpec, x_end: &[f64], variation: f64, horizon: f64) -> f64 {
    let beta = problem.beta;
    let growth = problem.running_cost.c3() * (1.0 + norm(x_end).powf(problem.running_cost.m_ell));
    let rate = if horizon > 0.0 { variation / horizon } else { 0.0 };
    (-beta * horizon).exp() * (growth + problem.push_cost.lipschitz() * rate) / beta
}

/// Discounted cost of a sampled pair `(X, Y)` on `[0, T]`.
pub fn discounted_cost(problem: &ProblemSpec, x: &PathRCLL, y: &ControlPath, horizon: f64) -> Result<CostEstimate> {
    if x.times() != y.path().times() {
        return Err(Error::InvalidPath("X and Y must share the grid".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidPath("horizon must be positive and finite".into()));
    }
    let beta = problem.beta;
    let running = running_integral(&problem.running_cost, x, beta, horizon);
    let push = h_integral(&problem.push_cost, y, beta, TimeInterval::closed(0.0, horizon));
    let last = x.times().partition_point(|&t| t <= horizon) - 1;
    let tv = decompose(y).total_variation.value(last)[0];
    Ok(CostEstimate {
        value: running + push,
        tail_bound: tail_bound(problem, x.value(last).as_slice(), tv, horizon),
    })
}

/// First grid index at which a path reaches `{x·û₁ ≥ r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub index: usize,
    pub time: f64,
    pub state: Vec<f64>,
}

impl ExitRecord {
    pub fn find(x: &PathRCLL, u1_hat: &DVector<f64>, r: f64) -> Option<Self> {
        (0..x.len()).find(|&i| x.value(i).dot(u1_hat) >= r - 1e-12 * r.abs().max(1.0)).map(|i| Self {
            index: i,
            time: x.times()[i],
            state: x.value(i).as_slice().to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedCost {
    pub value: f64,
    pub exit: Option<ExitRecord>,
    /// Tail estimate when no exit was observed, zero otherwise.
    pub tail_bound: f64,
}

/// Cost on the truncated domain `X_r`: running and push costs up to the
/// exit time `σ` plus `e^{−βσ}φ(X_σ)`; no exit payoff when the path never
/// reaches `∂_r` on the grid.
pub fn bounded_cost(
    problem: &ProblemSpec,
    u1_hat: &DVector<f64>,
    x: &PathRCLL,
    y: &ControlPath,
    r: f64,
    phi: &dyn Fn(&DVector<f64>) -> f64,
    exit: Option<ExitRecord>,
) -> Result<BoundedCost> {
    if x.times() != y.path().times() {
        return Err(Error::InvalidPath("X and Y must share the grid".into()));
    }
    let exit = exit.or_else(|| ExitRecord::find(x, u1_hat, r));
    let stop = exit.as_ref().map_or(x.len() - 1, |e| e.index);
    for i in 0..=stop {
        let scale = x.value(i).norm().max(1.0);
        if problem.x_cone.margin(x.value(i)) < -crate::cone::TOL_GEOM * scale {
            return Err(Error::Inadmissible(format!(
                "path leaves X through a face other than ∂_r at index {i}"
            )));
        }
    }
    let beta = problem.beta;
    let t_stop = x.times()[stop];
    let mut value = 0.0;
    if t_stop > 0.0 {
        value += running_integral(&problem.running_cost, x, beta, t_stop);
    }
    value += h_integral(&problem.push_cost, y, beta, TimeInterval::closed(0.0, t_stop));
    let tail = match &exit {
        Some(e) => {
            value += (-beta * e.time).exp() * phi(&DVector::from_column_slice(&e.state));
            0.0
        }
        None => {
            let tv = decompose(y).total_variation.value(stop)[0];
            tail_bound(problem, x.value(stop).as_slice(), tv, t_stop)
        }
    };
    Ok(BoundedCost {
        value,
        exit,
        tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn decompose_examples() {
        let ramp = ControlPath::new(PathRCLL::sampled(0.5, 4, |t| s(t)).unwrap()).unwrap();
        let d = decompose(&ramp);
        assert!((d.total_variation.value(4)[0] - 2.0).abs() < 1e-15);
        assert!(d.pieces.iter().all(|p| p.direction[0] == 1.0));

        let v = |a: f64, b: f64| DVector::from_column_slice(&[a, b]);
        let jump = ControlPath::new(
            PathRCLL::piecewise_constant(vec![0.0, 1.0], vec![v(0.0, 0.0), v(3.0, 4.0)], v(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        let d = decompose(&jump);
        assert_eq!(d.pieces.len(), 1);
        assert_eq!(d.pieces[0].mass, 5.0);
        assert!((&d.pieces[0].direction - v(0.6, 0.8)).norm() < 1e-15);

        // Staircase alternating e1/e2 unit steps: segment-length oracle.
        let vals: Vec<DVector<f64>> = [(0., 0.), (1., 0.), (1., 1.), (2., 1.), (2., 2.)]
            .iter()
            .map(|&(a, b)| v(a, b))
            .collect();
        let stair = ControlPath::new(
            PathRCLL::piecewise_constant((0..5).map(|i| i as f64).collect(), vals.clone(), v(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        let oracle: f64 = vals.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
        assert_eq!(decompose(&stair).total_variation.value(4)[0], oracle);
        assert_eq!(oracle, 4.0);
    }

    #[test]
    fn h_integral_examples() {
        let h = PushCost::linear(vec![1.0]);
        let jump0 = ControlPath::new(
            PathRCLL::piecewise_constant(vec![0.0, 1.0], vec![s(2.0), s(2.0)], s(0.0)).unwrap(),
        )
        .unwrap();
        assert_eq!(h_integral(&h, &jump0, 1.0, TimeInterval::whole()), 2.0);
        assert_eq!(h_integral(&h, &jump0, 1.0, TimeInterval::left_open(0.0, 5.0)), 0.0);

        // Y(t) = t on a long grid, then the tail beyond is exact too.
        let ramp = ControlPath::new(PathRCLL::sampled(0.01, 5000, |t| s(t)).unwrap()).unwrap();
        let v = h_integral(&h, &ramp, 1.0, TimeInterval::whole());
        assert!((v - (1.0 - (-50.0f64).exp())).abs() < 1e-12);

        let hm = PushCost::max_linear(vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        let diag = ControlPath::new(
            PathRCLL::sampled(0.01, 5000, |t| DVector::from_column_slice(&[t, t])).unwrap(),
        )
        .unwrap();
        let branch_max = [1.0f64, 2.0].into_iter().fold(0.0, f64::max);
        let v = h_integral(&hm, &diag, 1.0, TimeInterval::whole());
        assert!((v - branch_max * (1.0 - (-50.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn exp_weights_integrate_linear_exactly() {
        // Composite Simpson oracle for ∫ e^{−βs} f(s) ds.
        let simpson = |beta: f64, a: f64, dt: f64, f: &dyn Fn(f64) -> f64| {
            let n = 2000;
            let h = dt / n as f64;
            let g = |s: f64| (-beta * s).exp() * f(s);
            let mut acc = g(a) + g(a + dt);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
            }
            acc * h / 3.0
        };
        for &(beta, a, dt) in &[(1.0, 0.0, 1e-3), (2.0, 3.0, 0.5), (0.3, 1.0, 1e-7)] {
            let (wl, wr) = exp_weights(beta, a, dt);
            let exact0 = simpson(beta, a, dt, &|_| 1.0);
            let exact1 = simpson(beta, a, dt, &|s| (s - a) / dt);
            assert!(((wl + wr) - exact0).abs() <= 1e-10 * exact0);
            assert!((wr - exact1).abs() <= 1e-10 * exact1, "{beta} {a} {dt}: {wr:e} vs {exact1:e}");
        }
    }

    #[test]
    fn push_cost_validation() {
        let y = ConeSpec::orthant(2);
        let mut h = PushCost::linear(vec![1.0, 2.0]);
        h.c_h = Some(1.0);
        h.validate(&y).unwrap();
        assert_eq!(h.certified_lower_bound(&y), 1.0);
        h.c_h = Some(1.5);
        assert!(h.validate(&y).is_err());
        assert!(PushCost::linear(vec![-1.0, 1.0]).validate(&y).is_err());
        assert_eq!(PushCost::zero().certified_lower_bound(&y), 0.0);
    }

    #[test]
    fn running_cost_validation() {
        let x = ConeSpec::orthant(1);
        let ok = RunningCost::new(RunningCostForm::Linear { w: vec![1.0], c: 1.0 }, 1.0, [1.0, 1.0, 1.0]);
        ok.validate(&x).unwrap();
        let wrong_growth = RunningCost::new(RunningCostForm::Power { a: 1.0, m: 2.0, c: 0.0 }, 1.0, [1.0, 1.0, 1.0]);
        assert!(wrong_growth.validate(&x).is_err());
        let negative = RunningCost::new(RunningCostForm::Linear { w: vec![-1.0], c: 0.0 }, 1.0, [1.0, 1.0, 1.0]);
        assert!(negative.validate(&x).is_err());
    }

    #[test]
    fn control_must_start_at_zero() {
        let p = PathRCLL::sampled(0.1, 3, |t| s(1.0 + t)).unwrap();
        assert!(ControlPath::new(p).is_err());
    }
}
