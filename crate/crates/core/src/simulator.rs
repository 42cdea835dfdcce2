//! Monte Carlo simulation of controlled paths `X = x + B + G·Y`.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, index)`:
//! stream `2i` feeds the Gaussian increments, stream `2i + 1` the uniforms
//! of the Brownian-bridge correction. Estimates therefore do not depend on
//! how paths are scheduled, and the reduction sums per-path costs in index
//! order with pairwise summation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeVectors, Projector, TOL_GEOM};
use crate::cost::{exp_weights, tail_bound, ControlPath, ExitRecord};
use crate::error::{check_dim, Error, Result};
use crate::hjb::{PushTable, ValueField};
use crate::linalg::{pairwise_sum, psd_cholesky};
use crate::path::{Interpolation, PathRCLL};
use crate::problem::ProblemSpec;
use crate::skorohod::{admissible_from, state_path};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Endpoint products above this multiple of the step variance make a
/// bridge excursion to the boundary negligible (probability `< e^{−40}`).
const BRIDGE_SKIP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(with = "crate::linalg::serde_vector")]
    pub b: DVector<f64>,
    #[serde(rename = "Sigma", with = "crate::linalg::serde_rows")]
    pub sigma: DMatrix<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
    /// Sample the running maximum of the boundary excursion inside each
    /// step instead of only at grid times.
    #[serde(default = "yes")]
    pub bridge: bool,
    /// Truncation radius for exit detection.
    #[serde(default)]
    pub exit_radius: Option<f64>,
}

fn yes() -> bool {
    true
}

impl SystemConfig {
    pub fn from_spec(spec: &ProblemSpec, dt: f64, horizon: f64, seed: u64, n_paths: usize) -> Self {
        Self {
            b: spec.b.clone(),
            sigma: spec.sigma.clone(),
            dt,
            horizon,
            seed,
            n_paths,
            bridge: true,
            exit_radius: None,
        }
    }

    pub fn steps(&self) -> usize {
        let n = self.horizon / self.dt;
        if (n - n.round()).abs() < 1e-9 * n.max(1.0) {
            n.round() as usize
        } else {
            n.ceil() as usize
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| i as f64 * self.dt).collect()
    }

    fn check(&self) -> Result<DMatrix<f64>> {
        check_dim(self.b.len(), self.sigma.nrows())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec("dt must be positive".into()));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidSpec("horizon must be at least one step".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidSpec("n_paths must be positive".into()));
        }
        psd_cholesky(&self.sigma, 1e-12)
    }
}

fn rngs(seed: u64, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut normals = ChaCha8Rng::seed_from_u64(seed);
    normals.set_stream(2 * index as u64);
    let mut uniforms = ChaCha8Rng::seed_from_u64(seed);
    uniforms.set_stream(2 * index as u64 + 1);
    (normals, uniforms)
}

/// Path `index` of the `(b, Σ)` Brownian motion, piecewise linear.
pub fn sample_brownian(cfg: &SystemConfig, index: usize) -> Result<PathRCLL> {
    let l = cfg.check()?;
    let k = cfg.b.len();
    let (mut rng, _) = rngs(cfg.seed, index);
    let sq = cfg.dt.sqrt();
    let mut cur = DVector::zeros(k);
    let mut values = vec![cur.clone()];
    let mut z = DVector::zeros(k);
    for _ in 0..cfg.steps() {
        for zi in z.iter_mut() {
            *zi = rng.sample::<f64, _>(StandardNormal);
        }
        cur += &cfg.b * cfg.dt + &l * &z * sq;
        values.push(cur.clone());
    }
    PathRCLL::piecewise_linear(cfg.times(), values)
}

#[derive(Debug, Clone)]
pub enum Policy {
    /// `Y ≡ 0`; an exit from X is an error.
    Null,
    /// Reflection along `û₀` with control `ŷ₀Γ̂(x + B)`.
    Reflect,
    /// A user control, corrected into admissibility by reflection.
    Scripted(ControlPath),
    /// Reflection plus the push table of a solved field.
    ValueDriven(Box<PushTable>),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Null => "null",
            Policy::Reflect => "reflect",
            Policy::Scripted(_) => "scripted",
            Policy::ValueDriven(_) => "value_driven",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub x: PathRCLL,
    pub y: ControlPath,
    pub exit: Option<ExitRecord>,
}

/// One grid step as seen by an observer: the state before the step, the
/// left limit at the new time, the new state and the two control parts.
struct StepView<'a> {
    index: usize,
    x_prev: &'a [f64],
    x_left: &'a [f64],
    x: &'a [f64],
    y_cont: &'a [f64],
    y_jump: Option<&'a [f64]>,
}

struct Stepper<'a> {
    spec: &'a ProblemSpec,
    vecs: &'a ConeVectors,
    projector: Projector,
    chol: DMatrix<f64>,
    cfg: &'a SystemConfig,
    bridge_var: Vec<f64>,
    reflect: bool,
    table: Option<&'a PushTable>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ProblemSpec, vecs: &'a ConeVectors, cfg: &'a SystemConfig, policy: &'a Policy) -> Result<Self> {
        let chol = cfg.check()?;
        check_dim(spec.k(), cfg.b.len())?;
        let projector = Projector::new(&spec.x_cone, &vecs.u0_hat)?;
        let bridge_var = projector
            .normals()
            .iter()
            .zip(projector.inv_depths())
            .map(|(n, w)| (n.transpose() * &cfg.sigma * n)[(0, 0)] * w * w * cfg.dt)
            .collect();
        let (reflect, table) = match policy {
            Policy::Null => (false, None),
            Policy::Reflect => (true, None),
            Policy::ValueDriven(t) => (true, Some(t.as_ref())),
            Policy::Scripted(_) => unreachable!("scripted policies run on whole paths"),
        };
        Ok(Self {
            spec,
            vecs,
            projector,
            chol,
            cfg,
            bridge_var,
            reflect,
            table,
        })
    }

    /// Runs path `index` for `steps` steps, stopping early when `observe`
    /// returns false.
    fn run(&self, x0: &DVector<f64>, index: usize, steps: usize, mut observe: impl FnMut(StepView) -> Result<bool>) -> Result<()> {
        let k = x0.len();
        let p = self.vecs.y0_hat.len();
        let (mut normals, mut uniforms) = rngs(self.cfg.seed, index);
        let sq = self.cfg.dt.sqrt();
        let mut x = x0.as_slice().to_vec();
        let zero_p = vec![0.0; p];
        let mut jump = vec![0.0; p];

        // Initial push at time 0.
        let has_jump = self.table_push(&mut x, &mut jump);
        let keep = observe(StepView {
            index: 0,
            x_prev: x0.as_slice(),
            x_left: x0.as_slice(),
            x: &x,
            y_cont: &zero_p,
            y_jump: has_jump.then_some(jump.as_slice()),
        })?;
        if !keep {
            return Ok(());
        }
        let mut z = DVector::zeros(k);
        let mut pre = vec![0.0; k];
        let mut y_cont = vec![0.0; p];
        let mut x_prev = x.clone();
        for i in 1..=steps {
            for zi in z.iter_mut() {
                *zi = normals.sample::<f64, _>(StandardNormal);
            }
            let noise = &self.chol * &z;
            for j in 0..k {
                pre[j] = x[j] + self.cfg.b[j] * self.cfg.dt + noise[j] * sq;
            }
            let mut dv: f64 = 0.0;
            if self.reflect {
                for (f, (n, w)) in self.projector.normals().iter().zip(self.projector.inv_depths()).enumerate() {
                    let a = -w * dot(n.as_slice(), &x);
                    let b = -w * dot(n.as_slice(), &pre);
                    let s2 = self.bridge_var[f];
                    let m = if !self.cfg.bridge || s2 <= 0.0 || (a < 0.0 && b < 0.0 && a * b > BRIDGE_SKIP * s2) {
                        a.max(b)
                    } else {
                        let u: f64 = 1.0 - uniforms.random::<f64>();
                        0.5 * (a + b + ((b - a) * (b - a) - 2.0 * s2 * u.ln()).sqrt())
                    };
                    dv = dv.max(m);
                }
                for j in 0..k {
                    pre[j] += self.vecs.u0_hat[j] * dv;
                }
            } else if self.spec.x_cone.margin_slice(&pre) < -TOL_GEOM * norm(&pre).max(1.0) {
                return Err(Error::Inadmissible(format!(
                    "null control leaves X at step {i} ({pre:?})"
                )));
            }
            for j in 0..p {
                y_cont[j] = self.vecs.y0_hat[j] * dv;
            }
            x_prev.copy_from_slice(&x);
            x.copy_from_slice(&pre);
            let has_jump = self.table_push(&mut x, &mut jump);
            let keep = observe(StepView {
                index: i,
                x_prev: &x_prev,
                x_left: &pre,
                x: &x,
                y_cont: &y_cont,
                y_jump: has_jump.then_some(jump.as_slice()),
            })?;
            if !keep {
                break;
            }
        }
        Ok(())
    }

    fn table_push(&self, x: &mut [f64], jump: &mut [f64]) -> bool {
        let Some(table) = self.table else { return false };
        let xv = DVector::from_column_slice(x);
        let Some((j, s)) = table.push(&xv, &self.spec.x_cone) else { return false };
        let y = &table.directions()[j];
        let gy = &table.images()[j];
        for (ji, yi) in jump.iter_mut().zip(y.iter()) {
            *ji = s * yi;
        }
        for (xi, gi) in x.iter_mut().zip(gy.iter()) {
            *xi += s * gi;
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Discounted running and push cost accumulated step by step.
struct CostAccumulator<'a> {
    spec: &'a ProblemSpec,
    dt: f64,
    /// `∫_0^dt e^{−βs}(1 − s/dt) ds` and `∫_0^dt e^{−βs}(s/dt) ds`.
    w: (f64, f64),
    cost: f64,
    variation: f64,
    t: f64,
}

impl<'a> CostAccumulator<'a> {
    fn new(spec: &'a ProblemSpec, dt: f64) -> Self {
        Self {
            spec,
            dt,
            w: exp_weights(spec.beta, 0.0, dt),
            cost: 0.0,
            variation: 0.0,
            t: 0.0,
        }
    }

    fn add(&mut self, s: &StepView) {
        let beta = self.spec.beta;
        let t = s.index as f64 * self.dt;
        if s.index > 0 {
            let disc = (-beta * (t - self.dt)).exp();
            let ell = &self.spec.running_cost;
            self.cost += disc * (self.w.0 * ell.eval(s.x_prev) + self.w.1 * ell.eval(s.x_left));
            let h = self.spec.push_cost.eval(s.y_cont);
            if h != 0.0 {
                self.cost += disc * h * (self.w.0 + self.w.1);
            }
            self.variation += norm(s.y_cont);
        }
        if let Some(j) = s.y_jump {
            self.cost += (-beta * t).exp() * self.spec.push_cost.eval(j);
            self.variation += norm(j);
        }
        self.t = t;
    }
}

/// Paths `(X, Y)` for path `index` under `policy` from `x`.
pub fn simulate(
    spec: &ProblemSpec,
    vecs: &ConeVectors,
    cfg: &SystemConfig,
    x: &DVector<f64>,
    policy: &Policy,
    index: usize,
) -> Result<SimulatedPath> {
    check_dim(spec.k(), x.len())?;
    if !spec.x_cone.contains(x, TOL_GEOM)? {
        return Err(Error::NotInCone(format!("start {:?} is outside X", x.as_slice())));
    }
    let (xp, yp) = match policy {
        Policy::Scripted(y) => {
            let times = cfg.times();
            if y.path().times() != times.as_slice() {
                return Err(Error::InvalidPath("scripted control must live on the simulation grid".into()));
            }
            let b = sample_brownian(cfg, index)?;
            let y = admissible_from(&spec.x_cone, vecs, &spec.g, x, &b, y)?;
            (state_path(x, &b, &spec.g, &y)?, y)
        }
        _ => {
            let stepper = Stepper::new(spec, vecs, cfg, policy)?;
            let n = cfg.steps() + 1;
            let p = spec.p();
            let mut xs = Vec::with_capacity(n);
            let mut xl = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            let mut yl = Vec::with_capacity(n);
            let mut y = vec![0.0; p];
            stepper.run(x, index, cfg.steps(), |s| {
                for (yi, ci) in y.iter_mut().zip(s.y_cont) {
                    *yi += ci;
                }
                yl.push(DVector::from_column_slice(&y));
                if let Some(j) = s.y_jump {
                    for (yi, ji) in y.iter_mut().zip(j) {
                        *yi += ji;
                    }
                }
                ys.push(DVector::from_column_slice(&y));
                xl.push(DVector::from_column_slice(if s.index == 0 { s.x_prev } else { s.x_left }));
                xs.push(DVector::from_column_slice(s.x));
                Ok(true)
            })?;
            yl[0] = DVector::zeros(p);
            let times = cfg.times();
            let xp = PathRCLL::from_parts(times.clone(), xs, xl, Interpolation::PiecewiseLinear)?;
            let yp = ControlPath::new(PathRCLL::from_parts(times, ys, yl, Interpolation::PiecewiseLinear)?)?;
            (xp, yp)
        }
    };
    check_admissible(spec, &xp, &yp)?;
    let exit = cfg
        .exit_radius
        .and_then(|r| ExitRecord::find(&xp, &vecs.u1_hat, r));
    Ok(SimulatedPath { x: xp, y: yp, exit })
}

fn check_admissible(spec: &ProblemSpec, x: &PathRCLL, y: &ControlPath) -> Result<()> {
    for i in 0..x.len() {
        for v in [x.value(i), x.left_limit(i)] {
            if spec.x_cone.margin(v) < -TOL_GEOM * v.norm().max(1.0) {
                return Err(Error::Inadmissible(format!("X leaves the state cone at index {i}")));
            }
        }
    }
    y.check_increments(&spec.y_cone, 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    /// Half-width of the 95% normal confidence interval.
    pub ci: f64,
    pub std_dev: f64,
    /// Mean per-path estimate of the discarded tail beyond the horizon.
    pub tail_bound: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
}

fn summarize(samples: &[f64], tails: &[f64], cfg: &SystemConfig) -> ValueEstimate {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
    let var = if samples.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    let std_dev = var.sqrt();
    ValueEstimate {
        mean,
        ci: Z95 * std_dev / n.sqrt(),
        std_dev,
        tail_bound: pairwise_sum(tails) / n,
        n_paths: samples.len(),
        seed: cfg.seed,
        dt: cfg.dt,
        horizon: cfg.horizon,
    }
}

/// Discounted cost on `[0, horizon]` of one path, with its tail estimate.
fn path_cost(
    spec: &ProblemSpec,
    vecs: &ConeVectors,
    cfg: &SystemConfig,
    x: &DVector<f64>,
    policy: &Policy,
    index: usize,
) -> Result<(f64, f64)> {
    if let Policy::Scripted(_) = policy {
        let sim = simulate(spec, vecs, cfg, x, policy, index)?;
        let c = crate::cost::discounted_cost(spec, &sim.x, &sim.y, cfg.horizon)?;
        return Ok((c.value, c.tail_bound));
    }
    let stepper = Stepper::new(spec, vecs, cfg, policy)?;
    let mut acc = CostAccumulator::new(spec, cfg.dt);
    let mut last = x.as_slice().to_vec();
    stepper.run(x, index, cfg.steps(), |s| {
        acc.add(&s);
        last.copy_from_slice(s.x);
        Ok(true)
    })?;
    let tail = tail_bound(spec, &last, acc.variation, acc.t);
    Ok((acc.cost, tail))
}

/// Monte Carlo estimate of the discounted cost of `policy` from `x`.
pub fn estimate_value(
    spec: &ProblemSpec,
    vecs: &ConeVectors,
    cfg: &SystemConfig,
    x: &DVector<f64>,
    policy: &Policy,
) -> Result<ValueEstimate> {
    check_dim(spec.k(), x.len())?;
    if !spec.x_cone.contains(x, TOL_GEOM)? {
        return Err(Error::NotInCone(format!("start {:?} is outside X", x.as_slice())));
    }
    cfg.check()?;
    let results: Vec<(f64, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| path_cost(spec, vecs, cfg, x, policy, i))
        .collect::<Result<_>>()?;
    let (costs, tails): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(summarize(&costs, &tails, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppEstimate {
    /// Mean of `∫_0^θ e^{−βs}(ℓ ds + h(dY)) + e^{−βθ}V(X_θ)`, `θ = t ∧ τ`.
    pub functional: f64,
    pub ci: f64,
    pub v_at_x: f64,
    pub gap: f64,
    /// Fraction of paths that left the ball before `t`.
    pub exited_ball: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Dynamic-programming functional stopped at the first grid time the path
/// leaves the ball `B_ε(x)` or at `t`, compared with `V(x)`.
pub fn dpp_check(
    spec: &ProblemSpec,
    vecs: &ConeVectors,
    cfg: &SystemConfig,
    x: &DVector<f64>,
    policy: &Policy,
    value: &ValueField,
    eps: f64,
    t: f64,
) -> Result<DppEstimate> {
    check_dim(spec.k(), x.len())?;
    if !(eps > 0.0 && t > 0.0) {
        return Err(Error::InvalidSpec("eps and t must be positive".into()));
    }
    let v_at_x = value.interpolate(x.as_slice())?;
    let steps = ((t / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let beta = spec.beta;
    let one = |i: usize| -> Result<(f64, bool)> {
        let (cost, state, theta, exited) = match policy {
            Policy::Scripted(_) => {
                let sim = simulate(spec, vecs, cfg, x, policy, i)?;
                let last = steps.min(sim.x.len() - 1);
                let stop = (0..=last)
                    .find(|&j| (sim.x.value(j) - x).norm() >= eps)
                    .unwrap_or(last);
                let theta = sim.x.times()[stop];
                let mut c = crate::cost::h_integral(
                    &spec.push_cost,
                    &sim.y,
                    beta,
                    crate::cost::TimeInterval::closed(0.0, theta),
                );
                if theta > 0.0 {
                    c += crate::cost::running_integral(&spec.running_cost, &sim.x, beta, theta);
                }
                (c, sim.x.value(stop).as_slice().to_vec(), theta, stop < last || (sim.x.value(stop) - x).norm() >= eps)
            }
            _ => {
                let stepper = Stepper::new(spec, vecs, cfg, policy)?;
                let mut acc = CostAccumulator::new(spec, cfg.dt);
                let mut state = x.as_slice().to_vec();
                let mut exited = false;
                stepper.run(x, i, steps.min(cfg.steps()), |s| {
                    acc.add(&s);
                    state.copy_from_slice(s.x);
                    exited = norm(&s.x.iter().zip(x.iter()).map(|(a, b)| a - b).collect::<Vec<_>>()) >= eps;
                    Ok(!exited)
                })?;
                (acc.cost, state, acc.t, exited)
            }
        };
        let v = value.interpolate(&state)?;
        Ok((cost + (-beta * theta).exp() * v, exited))
    };
    let results: Vec<(f64, bool)> = (0..cfg.n_paths).into_par_iter().map(one).collect::<Result<_>>()?;
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let exited = results.iter().filter(|r| r.1).count() as f64 / results.len() as f64;
    let est = summarize(&samples, &vec![0.0; samples.len()], cfg);
    Ok(DppEstimate {
        functional: est.mean,
        ci: est.ci,
        v_at_x,
        gap: est.mean - v_at_x,
        exited_ball: exited,
        n_paths: est.n_paths,
        seed: cfg.seed,
    })
}
