use nalgebra::DVector;
use serde::Serialize;

use super::field::{FieldMeta, ValueField};
use super::grid::{Grid, NodeClass};
use super::hamiltonian::DiscreteHamiltonian;
use super::scheme::{elliptic_stencil, push_stencils, PushStencil, Scheme, Stencil};
use super::{DirichletMode, Method, SchemeParams};
use crate::error::{Error, Result};
use crate::linalg::BandedMatrix;
use crate::problem::{ProblemSpec, UniquenessClass, ValidationReport};

const CALIBRATION_TOL: f64 = 1e-10;
const CALIBRATION_MAX: usize = 50;
/// Banded LU work `n·l·(l+u)` above which Howard hands over to Jacobi.
const MAX_BANDED_WORK: f64 = 4e9;
const HISTORY_CAP: usize = 1000;
const TIE_TOL: f64 = 1e-12;

/// Starting values for the iteration; Dirichlet nodes always start at `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `φ` evaluated at every node.
    Boundary,
    Zero,
    Values(Vec<f64>),
}

/// Validated problem plus everything the scheme needs that does not
/// depend on `r`.
#[derive(Debug, Clone)]
pub struct Solver {
    spec: ProblemSpec,
    params: SchemeParams,
    report: ValidationReport,
    stencil: Stencil,
    hamiltonian: DiscreteHamiltonian,
    pushes: Vec<PushStencil>,
    displacements: Vec<Vec<f64>>,
}

impl Solver {
    pub fn new(spec: &ProblemSpec, params: SchemeParams) -> Result<Self> {
        params.check()?;
        let report = spec.validate()?;
        let stencil = elliptic_stencil(&spec.b, &spec.sigma, params.mesh)?;
        let hamiltonian = DiscreteHamiltonian::new(spec, params.refine_directions)?;
        let pushes = push_stencils(&hamiltonian, params.delta(), params.mesh);
        let mut displacements: Vec<Vec<f64>> = stencil
            .offsets
            .iter()
            .map(|o| o.iter().map(|&v| v as f64).collect())
            .collect();
        displacements.extend(pushes.iter().map(|p| p.displacement.clone()));
        Ok(Self {
            spec: spec.clone(),
            params,
            report,
            stencil,
            hamiltonian,
            pushes,
            displacements,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn hamiltonian(&self) -> &DiscreteHamiltonian {
        &self.hamiltonian
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn discretize(&self, r: f64) -> Result<Grid> {
        Grid::build(
            &self.spec.x_cone,
            &self.report.vectors.u1_hat,
            r,
            self.params.mesh,
            &self.displacements,
            &self.stencil.offsets,
        )
    }

    pub fn scheme_on(&self, grid: Grid) -> Result<Scheme> {
        Scheme::assemble(
            grid,
            &self.spec,
            &self.stencil,
            &self.pushes,
            &self.hamiltonian,
            self.params.delta(),
        )
    }

    pub fn scheme(&self, r: f64) -> Result<Scheme> {
        self.scheme_on(self.discretize(r)?)
    }

    pub(crate) fn blank_meta(&self, r: f64) -> FieldMeta {
        FieldMeta {
            spec_hash: self.spec.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            r,
            params: self.params.clone(),
            method: self.params.method,
            iterations: 0,
            update_history: Vec::new(),
            final_residual: f64::NAN,
            growth_constant: None,
            uniqueness: self.report.uniqueness,
            uniqueness_caveat: self.report.uniqueness_caveat,
            warnings: self.report.warnings.clone(),
        }
    }

    /// `1 + |x|^{m_ℓ}`.
    pub fn growth(&self, x: &DVector<f64>) -> f64 {
        1.0 + x.norm().powf(self.spec.running_cost.m_ell)
    }

    /// Point on the `û₀` ray at half the truncation height.
    pub fn calibration_point(&self, r: f64) -> DVector<f64> {
        let v = &self.report.vectors;
        &v.u0_hat * (0.5 * r / v.u0_hat.dot(&v.u1_hat))
    }

    /// Fixed point of `C ↦ V̂_C(x_c)/(1 + |x_c|^m)` on the given scheme,
    /// starting from `c_{ℓ,3}/β`. Returns the constant and the number of
    /// solves used.
    pub fn calibrate(&self, scheme: &Scheme) -> Result<(f64, usize, bool)> {
        let xc = self.calibration_point(scheme.grid().r());
        let gc = self.growth(&xc);
        let mut c = self.spec.running_cost.c3() / self.spec.beta;
        let mut init = InitialGuess::Boundary;
        for it in 1..=CALIBRATION_MAX {
            let field = self.solve_with(scheme, &|x| c * self.growth(x), &init)?;
            let v = match field.interpolate(xc.as_slice()) {
                Ok(v) => v,
                Err(_) => {
                    let n = scheme
                        .grid()
                        .nearest(xc.as_slice())
                        .ok_or_else(|| Error::Grid("calibration point lies outside the grid".into()))?;
                    field.value(n)
                }
            };
            let next = v / gc;
            if (next - c).abs() <= CALIBRATION_TOL * c.abs().max(1.0) {
                return Ok((next, it, true));
            }
            c = next;
            init = InitialGuess::Values(field.values().to_vec());
        }
        Ok((c, CALIBRATION_MAX, false))
    }

    /// Solve on `𝕏_r` with growth-matched boundary data calibrated on the
    /// same domain.
    pub fn solve(&self, r: f64) -> Result<ValueField> {
        let scheme = self.scheme(r)?;
        let (c, _, converged) = self.calibrate(&scheme)?;
        let mut field = self.solve_with(&scheme, &|x| c * self.growth(x), &InitialGuess::Boundary)?;
        field.meta.growth_constant = Some(c);
        if !converged {
            field
                .meta
                .warnings
                .push("growth constant calibration hit its iteration limit".into());
        }
        Ok(field)
    }

    /// Solves the discrete system with Dirichlet data `phi`.
    pub fn solve_with(
        &self,
        scheme: &Scheme,
        phi: &dyn Fn(&DVector<f64>) -> f64,
        init: &InitialGuess,
    ) -> Result<ValueField> {
        let grid = scheme.grid();
        let n = grid.len();
        let mut meta = self.blank_meta(grid.r());
        let mut boundary = vec![f64::NAN; n];
        for i in 0..n {
            if grid.class(i) == NodeClass::Dirichlet || matches!(init, InitialGuess::Boundary) {
                let v = phi(&grid.coords(i));
                if !v.is_finite() || (grid.class(i) == NodeClass::Dirichlet && v < 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "boundary data {v} at {:?} must be finite and nonnegative",
                        grid.coords(i).as_slice()
                    )));
                }
                boundary[i] = v;
            }
        }
        let mut f: Vec<f64> = match init {
            InitialGuess::Boundary => boundary.clone(),
            InitialGuess::Zero => vec![0.0; n],
            InitialGuess::Values(v) => {
                crate::error::check_dim(n, v.len())?;
                v.clone()
            }
        };
        for i in 0..n {
            if grid.class(i) == NodeClass::Dirichlet {
                f[i] = boundary[i];
            }
        }

        let mut method = self.params.method;
        if method == Method::Howard && banded_work(scheme) > MAX_BANDED_WORK {
            method = Method::Jacobi;
            meta.warnings
                .push("stencil bandwidth too large for a direct solve; used Jacobi sweeps".into());
        }
        meta.method = method;
        let (iterations, history) = match method {
            Method::Howard => howard(scheme, &mut f, &boundary, &self.params)?,
            Method::Jacobi => jacobi(scheme, &mut f, &boundary, &self.params)?,
        };
        meta.iterations = iterations;
        meta.final_residual = (0..n)
            .filter_map(|i| scheme.node_residual(i, &f))
            .fold(0.0, |a: f64, r| a.max(r.abs()));
        let start = history.len().saturating_sub(HISTORY_CAP);
        meta.update_history = history[start..].to_vec();
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -self.params.tol {
            meta.warnings.push(format!("field takes the negative value {min:e}"));
        }
        ValueField::new(grid.clone(), f, meta)
    }
}

fn banded_work(scheme: &Scheme) -> f64 {
    let mut lower = 0usize;
    let mut upper = 0usize;
    for i in 0..scheme.grid().len() {
        for row in scheme.rows(i) {
            for (j, _) in scheme.neighbors(row) {
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
    }
    scheme.grid().len() as f64 * lower as f64 * (lower + upper) as f64
}

/// Row of the largest branch residual; a previous choice within `TIE_TOL`
/// of the maximum is kept, otherwise the lowest branch wins.
fn choose(scheme: &Scheme, f: &[f64], prev: Option<&[usize]>) -> Vec<usize> {
    let n = scheme.grid().len();
    let mut out = vec![usize::MAX; n];
    for i in 0..n {
        let rows = scheme.rows(i);
        if rows.is_empty() {
            continue;
        }
        let res: Vec<f64> = rows.clone().map(|r| scheme.residual(r, i, f)).collect();
        let best = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cut = best - TIE_TOL * best.abs().max(1.0);
        let keep = prev.map(|p| p[i]).filter(|&r| rows.contains(&r) && res[r - rows.start] >= cut);
        out[i] = keep.unwrap_or_else(|| rows.start + res.iter().position(|&v| v >= cut).expect("nonempty"));
    }
    out
}

fn howard(scheme: &Scheme, f: &mut Vec<f64>, boundary: &[f64], params: &SchemeParams) -> Result<(usize, Vec<f64>)> {
    let n = scheme.grid().len();
    let mut policy = choose(scheme, f, None);
    let mut history = Vec::new();
    for it in 1..=params.max_iterations {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let r = policy[i];
            if r == usize::MAX {
                rows.push(vec![(i, 1.0)]);
                rhs[i] = boundary[i];
                continue;
            }
            let mut row = vec![(i, scheme.diag(r))];
            row.extend(scheme.neighbors(r).map(|(j, w)| (j, -w)));
            rows.push(row);
            rhs[i] = scheme.rhs(r);
        }
        let mut next = BandedMatrix::from_rows(&rows).solve(&rhs)?;
        for i in 0..n {
            if policy[i] == usize::MAX {
                next[i] = boundary[i];
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: it,
                last_update: f64::INFINITY,
                history,
            });
        }
        let update = f.iter().zip(&next).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        *f = next;
        history.push(update);
        let new_policy = choose(scheme, f, Some(&policy));
        if new_policy == policy || update < params.tol {
            return Ok((it, history));
        }
        policy = new_policy;
    }
    Err(Error::NoConvergence {
        iterations: params.max_iterations,
        last_update: history.last().copied().unwrap_or(f64::INFINITY),
        history,
    })
}

/// Nodewise update to the smallest branch root (each branch is increasing
/// in the node value, so this zeroes the max), damped by `ω`, with `ω`
/// halved whenever the sup update grows.
fn jacobi(scheme: &Scheme, f: &mut [f64], boundary: &[f64], params: &SchemeParams) -> Result<(usize, Vec<f64>)> {
    let n = scheme.grid().len();
    let mut omega = params.damping;
    let mut prev = f64::INFINITY;
    let mut history = Vec::new();
    let mut g = vec![0.0; n];
    for it in 1..=params.max_iterations {
        for i in 0..n {
            let rows = scheme.rows(i);
            g[i] = if rows.is_empty() {
                boundary[i]
            } else {
                rows.map(|r| scheme.local_root(r, f)).fold(f64::INFINITY, f64::min)
            };
        }
        let update = f.iter().zip(&g).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        for i in 0..n {
            f[i] += omega * (g[i] - f[i]);
        }
        history.push(update);
        if !update.is_finite() {
            break;
        }
        if update < params.tol {
            return Ok((it, history));
        }
        if update > prev {
            omega = (omega * 0.5).max(1e-6);
        }
        prev = update;
    }
    Err(Error::NoConvergence {
        iterations: history.len(),
        last_update: history.last().copied().unwrap_or(f64::INFINITY),
        history: history[history.len().saturating_sub(HISTORY_CAP)..].to_vec(),
    })
}

/// Grid for `spec` on `𝕏_r`.
pub fn discretize(spec: &ProblemSpec, r: f64, params: &SchemeParams) -> Result<Grid> {
    Solver::new(spec, params.clone())?.discretize(r)
}

/// Solve on `𝕏_r` with the given Dirichlet data, starting from `φ`.
pub fn solve(
    spec: &ProblemSpec,
    r: f64,
    params: &SchemeParams,
    phi: &dyn Fn(&DVector<f64>) -> f64,
) -> Result<ValueField> {
    let solver = Solver::new(spec, params.clone())?;
    let scheme = solver.scheme(r)?;
    solver.solve_with(&scheme, phi, &InitialGuess::Boundary)
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedReport {
    #[serde(skip)]
    pub fields: Vec<ValueField>,
    pub r_list: Vec<f64>,
    pub dirichlet_mode: DirichletMode,
    pub growth_constant: f64,
    /// Nodes of the smallest grid with `x·û₁` at most this height form the
    /// comparison core.
    pub core_height: f64,
    /// Sup change on the core between consecutive solves.
    pub discrepancies: Vec<f64>,
    pub decreasing: bool,
    pub uniqueness: UniquenessClass,
    pub uniqueness_caveat: bool,
    pub warnings: Vec<String>,
}

/// Values for a larger domain from a solved field: inside the old unknown
/// region the field itself, elsewhere the field at the point scaled down to
/// half the old height, rescaled by the growth ratio.
fn extend_previous(solver: &Solver, prev: &ValueField, x: &DVector<f64>) -> f64 {
    let grid = prev.grid();
    let height = x.dot(grid.u1_hat());
    if height <= grid.r() - grid.band() {
        if let Ok(v) = prev.interpolate(x.as_slice()) {
            return v;
        }
    }
    let target = 0.5 * grid.r();
    let xs = if height > target { x * (target / height) } else { x.clone() };
    let v = prev
        .interpolate(xs.as_slice())
        .ok()
        .or_else(|| grid.nearest(xs.as_slice()).map(|n| prev.value(n)))
        .unwrap_or(0.0);
    v * solver.growth(x) / solver.growth(&xs)
}

/// Solves on each `𝕏_r` in increasing order and reports the sup change of
/// consecutive solutions on the core of the smallest domain.
pub fn solve_nested(spec: &ProblemSpec, r_list: &[f64], params: &SchemeParams) -> Result<NestedReport> {
    if r_list.is_empty() {
        return Err(Error::InvalidSpec("r_list is empty".into()));
    }
    if r_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSpec("r_list must be strictly increasing".into()));
    }
    let solver = Solver::new(spec, params.clone())?;
    let first = solver.scheme(r_list[0])?;
    let (c, _, converged) = solver.calibrate(&first)?;
    let mut warnings = solver.report().warnings.clone();
    if !converged {
        warnings.push("growth constant calibration hit its iteration limit".into());
    }
    let growth_phi = |x: &DVector<f64>| c * solver.growth(x);
    let mut fields: Vec<ValueField> = Vec::with_capacity(r_list.len());
    for (idx, &r) in r_list.iter().enumerate() {
        let scheme = if idx == 0 { first.clone() } else { solver.scheme(r)? };
        let mut field = match (params.dirichlet_mode, fields.last()) {
            (DirichletMode::ExtendPrevious, Some(prev)) => {
                let phi = |x: &DVector<f64>| extend_previous(&solver, prev, x);
                let g = scheme.grid();
                let init: Vec<f64> = (0..g.len()).map(|i| phi(&g.coords(i))).collect();
                solver.solve_with(&scheme, &phi, &InitialGuess::Values(init))?
            }
            _ => solver.solve_with(&scheme, &growth_phi, &InitialGuess::Boundary)?,
        };
        field.meta.growth_constant = Some(c);
        fields.push(field);
    }
    let core_height = 0.5 * r_list[0];
    let mut discrepancies = Vec::new();
    for w in fields.windows(2) {
        discrepancies.push(restrict_difference(&fields[0], &w[0], &w[1], core_height)?);
    }
    let decreasing = discrepancies.windows(2).all(|d| d[1] < d[0]);
    Ok(NestedReport {
        fields,
        r_list: r_list.to_vec(),
        dirichlet_mode: params.dirichlet_mode,
        growth_constant: c,
        core_height,
        discrepancies,
        decreasing,
        uniqueness: solver.report().uniqueness,
        uniqueness_caveat: solver.report().uniqueness_caveat,
        warnings,
    })
}

/// Sup of `|a − b|` over the core nodes of `base`.
fn restrict_difference(base: &ValueField, a: &ValueField, b: &ValueField, core: f64) -> Result<f64> {
    let g = base.grid();
    let mut d: f64 = 0.0;
    for i in 0..g.len() {
        if g.height(i) <= core + 1e-9 * g.mesh() {
            let x = g.coords(i);
            d = d.max((a.interpolate(x.as_slice())? - b.interpolate(x.as_slice())?).abs());
        }
    }
    Ok(d)
}
