//! Discrete viscosity checks on a candidate field.
//!
//! With `F(x)` the max over available branch residuals, interior nodes must
//! satisfy both `F ≤ tol` (subsolution) and `F ≥ −tol` (supersolution);
//! cone-boundary nodes only the supersolution side.

use serde::{Deserialize, Serialize};

use super::field::ValueField;
use super::grid::NodeClass;
use super::solve::Solver;
use crate::error::Result;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub nodes: usize,
    /// `max(F, 0)`; not checked on cone-boundary nodes.
    pub max_sub_violation: f64,
    /// `max(−F, 0)`.
    pub max_super_violation: f64,
    pub worst_sub_node: Option<Vec<f64>>,
    pub worst_super_node: Option<Vec<f64>>,
}

impl ClassReport {
    fn record(&mut self, x: Vec<f64>, res: f64) {
        self.nodes += 1;
        if res > self.max_sub_violation {
            self.max_sub_violation = res;
            self.worst_sub_node = Some(x.clone());
        }
        if -res > self.max_super_violation {
            self.max_super_violation = -res;
            self.worst_super_node = Some(x);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub spec_hash: String,
    pub tol: f64,
    pub interior: ClassReport,
    pub cone_boundary: ClassReport,
    pub subsolution_pass: bool,
    pub supersolution_pass: bool,
    pub pass: bool,
    /// Largest checked violation.
    pub max_violation: f64,
}

/// Residual report for `field` against `spec` at tolerance `tol`
/// (default: ten times the field's solver tolerance).
pub fn viscosity_residual(spec: &ProblemSpec, field: &ValueField, tol: Option<f64>) -> Result<ResidualReport> {
    let solver = Solver::new(spec, field.meta.params.clone())?;
    let scheme = solver.scheme_on(field.grid().clone())?;
    let tol = tol.unwrap_or(10.0 * field.meta.params.tol);
    let f = field.values();
    let mut interior = ClassReport::default();
    let mut cone_boundary = ClassReport::default();
    for i in 0..f.len() {
        let Some(res) = scheme.node_residual(i, f) else { continue };
        let x = field.grid().coords(i).as_slice().to_vec();
        match field.grid().class(i) {
            NodeClass::Interior => interior.record(x, res),
            NodeClass::ConeBoundary => cone_boundary.record(x, res),
            NodeClass::Dirichlet => {}
        }
    }
    let sub = interior.max_sub_violation;
    let sup = interior.max_super_violation.max(cone_boundary.max_super_violation);
    Ok(ResidualReport {
        spec_hash: spec.hash(),
        tol,
        subsolution_pass: sub <= tol,
        supersolution_pass: sup <= tol,
        pass: sub <= tol && sup <= tol,
        max_violation: sub.max(sup),
        interior,
        cone_boundary,
    })
}

/// Smallest slack `I[V](x + δGy) + δh(y) − V(x)` over all nodes and push
/// directions whose interpolation cell lies in the grid.
pub fn gradient_monotonicity(spec: &ProblemSpec, field: &ValueField) -> Result<f64> {
    let solver = Solver::new(spec, field.meta.params.clone())?;
    let delta = field.meta.params.delta();
    let h = solver.hamiltonian();
    let grid = field.grid();
    let mut worst = f64::INFINITY;
    for i in 0..grid.len() {
        let x = grid.coords(i);
        for (gy, c) in h.images.iter().zip(&h.costs) {
            let target = &x + gy * delta;
            if let Ok(v) = field.interpolate(target.as_slice()) {
                worst = worst.min(v + delta * c - field.value(i));
            }
        }
    }
    Ok(worst)
}
