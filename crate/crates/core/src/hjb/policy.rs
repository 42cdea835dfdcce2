//! Push region and push directions read off a solved field.

use nalgebra::DVector;

use super::field::ValueField;
use super::grid::Grid;
use super::scheme::Branch;
use super::solve::Solver;
use crate::cone::{ConeSpec, TOL_GEOM};
use crate::error::Result;
use crate::problem::ProblemSpec;

/// Per-node push flag and direction index into the stored direction list.
#[derive(Debug, Clone)]
pub struct PushTable {
    grid: Grid,
    active: Vec<bool>,
    direction: Vec<usize>,
    directions: Vec<DVector<f64>>,
    images: Vec<DVector<f64>>,
}

impl PushTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn direction_index(&self, node: usize) -> Option<usize> {
        self.active[node].then_some(self.direction[node])
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn images(&self) -> &[DVector<f64>] {
        &self.images
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Multilinear interpolation of the 0/1 push flag; `None` off the grid.
    pub fn indicator(&self, x: &[f64]) -> Option<f64> {
        let w = self.grid.locate(x).ok()?;
        Some(w.iter().map(|&(i, w)| if self.active[i] { w } else { 0.0 }).sum())
    }

    /// Direction of the heaviest active interpolation corner.
    pub fn direction_at(&self, x: &[f64]) -> Option<usize> {
        let w = self.grid.locate(x).ok()?;
        w.iter()
            .filter(|(i, _)| self.active[*i])
            .fold(None, |best: Option<(usize, f64)>, &(i, wi)| match best {
                Some((_, bw)) if bw >= wi => best,
                _ => Some((i, wi)),
            })
            .map(|(i, _)| self.direction[i])
    }

    /// When `x` lies in the push region, the direction and the length `s`
    /// taking `x + s·Gy` to where the interpolated flag drops below ½,
    /// capped so the path stays in `x_cone` and on the grid.
    pub fn push(&self, x: &DVector<f64>, x_cone: &ConeSpec) -> Option<(usize, f64)> {
        if self.indicator(x.as_slice())? < 0.5 {
            return None;
        }
        let j = self.direction_at(x.as_slice())?;
        let gy = &self.images[j];
        let step = 0.5 * self.grid.mesh();
        let max_steps = (4.0 * self.grid.r() / step).ceil() as usize + 4;
        let mut s = 0.0;
        let mut ind = self.indicator(x.as_slice())?;
        for _ in 0..max_steps {
            let next = s + step;
            let p = x + gy * next;
            if x_cone.margin(&p) < -TOL_GEOM * p.norm().max(1.0) {
                break;
            }
            let Some(q) = self.indicator(p.as_slice()) else { break };
            if q < 0.5 {
                s += step * (ind - 0.5) / (ind - q);
                break;
            }
            s = next;
            ind = q;
        }
        (s > 0.0).then_some((j, s))
    }
}

/// Marks a node as pushing when its largest push residual is at least
/// `−tol_active`; the direction is the argmax, lowest index on ties.
pub fn extract_policy(spec: &ProblemSpec, field: &ValueField) -> Result<PushTable> {
    let solver = Solver::new(spec, field.meta.params.clone())?;
    let scheme = solver.scheme_on(field.grid().clone())?;
    let tol_active = field.meta.params.tol_active;
    let f = field.values();
    let n = f.len();
    let mut active = vec![false; n];
    let mut direction = vec![0usize; n];
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for row in scheme.rows(i) {
            if let Branch::Push(d) = scheme.branch(row) {
                let res = scheme.residual(row, i, f);
                if best.is_none_or(|(_, b)| res > b + 1e-12 * b.abs().max(1.0)) {
                    best = Some((d, res));
                }
            }
        }
        if let Some((d, res)) = best {
            if res >= -tol_active {
                active[i] = true;
                direction[i] = d;
            }
        }
    }
    let h = solver.hamiltonian();
    Ok(PushTable {
        grid: field.grid().clone(),
        active,
        direction,
        directions: h.directions.clone(),
        images: h.images.clone(),
    })
}
