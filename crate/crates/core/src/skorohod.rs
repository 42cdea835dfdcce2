//! The reflection maps `Γ̂` and `Γ` pushing a path into the state cone along
//! the fixed direction `û₀`.
//!
//! `v(t) = 0 ∨ sup_{s≤t} α(z(s))` and `x = z + û₀ v`. On a grid the running
//! supremum is exact: `α` is convex, so on a linear segment it peaks at an
//! endpoint, and at a jump both one-sided values are visited.

use nalgebra::{DMatrix, DVector};

use crate::cone::{ConeSpec, ConeVectors, Projector, TOL_GEOM};
use crate::cost::ControlPath;
use crate::error::{check_dim, Error, Result};
use crate::path::PathRCLL;

/// `Γ̂` and `Γ` for one cone and push direction.
#[derive(Debug, Clone)]
pub struct SkorohodMap {
    projector: Projector,
    x_cone: ConeSpec,
}

impl SkorohodMap {
    pub fn new(x_cone: &ConeSpec, u0_hat: &DVector<f64>) -> Result<Self> {
        Ok(Self {
            projector: Projector::new(x_cone, u0_hat)?,
            x_cone: x_cone.clone(),
        })
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Bound `κ̂ = (1 + |û₀|)·max_n 1/(û₀·n) + 1` on the joint Lipschitz
    /// constant of `(Γ̂, Γ)` in the sup norm.
    pub fn kappa_hat(&self) -> f64 {
        (1.0 + self.projector.u0_hat().norm()) * self.projector.lipschitz() + 1.0
    }

    /// Scalar pushing process `v = Γ̂(z)`, with `v(0−) = 0`.
    pub fn gamma_hat(&self, z: &PathRCLL) -> Result<PathRCLL> {
        check_dim(self.x_cone.dim(), z.dim())?;
        let z0 = z.value(0);
        if self.x_cone.margin(z0) < -TOL_GEOM * z0.norm().max(1.0) {
            return Err(Error::NotInCone(format!("z(0) = {:?} lies outside X", z0.as_slice())));
        }
        let alpha = |x: &DVector<f64>| self.projector.alpha(x.as_slice());
        let n = z.len();
        let mut values = Vec::with_capacity(n);
        let mut lefts = Vec::with_capacity(n);
        let mut v = alpha(z0).max(0.0);
        lefts.push(DVector::from_element(1, 0.0));
        values.push(DVector::from_element(1, v));
        for i in 1..n {
            let left = v.max(alpha(z.left_limit(i)));
            v = left.max(alpha(z.value(i)));
            lefts.push(DVector::from_element(1, left));
            values.push(DVector::from_element(1, v));
        }
        PathRCLL::from_parts(z.times().to_vec(), values, lefts, z.interpolation())
    }

    /// `(v, x)` with `x = Γ(z) = z + û₀ v`.
    pub fn gamma(&self, z: &PathRCLL) -> Result<(PathRCLL, PathRCLL)> {
        let v = self.gamma_hat(z)?;
        let u0 = self.projector.u0_hat();
        let push = v.map(|s| u0 * s[0])?;
        let x = z.combine(1.0, &push, 1.0)?;
        Ok((v, x))
    }
}

/// `Γ̂(z)` for cone `x_cone` and direction `u0_hat`.
pub fn gamma_hat(x_cone: &ConeSpec, u0_hat: &DVector<f64>, z: &PathRCLL) -> Result<PathRCLL> {
    SkorohodMap::new(x_cone, u0_hat)?.gamma_hat(z)
}

/// `Γ(z) = z + û₀ Γ̂(z)`.
pub fn gamma(x_cone: &ConeSpec, u0_hat: &DVector<f64>, z: &PathRCLL) -> Result<PathRCLL> {
    Ok(SkorohodMap::new(x_cone, u0_hat)?.gamma(z)?.1)
}

/// `x + B + G·Y` on the common grid.
pub fn state_path(x: &DVector<f64>, b: &PathRCLL, g: &DMatrix<f64>, y: &ControlPath) -> Result<PathRCLL> {
    check_dim(b.dim(), x.len())?;
    check_dim(g.ncols(), y.path().dim())?;
    let gy = y.path().map(|v| g * v)?;
    b.map(|v| v + x)?.combine(1.0, &gy, 1.0)
}

/// Corrects `Y` into an admissible control from `x_new`:
/// `Ỹ = Y + ŷ₀·Γ̂(x_new + B + G·Y)`.
pub fn admissible_from(
    x_cone: &ConeSpec,
    vecs: &ConeVectors,
    g: &DMatrix<f64>,
    x_new: &DVector<f64>,
    b: &PathRCLL,
    y: &ControlPath,
) -> Result<ControlPath> {
    let map = SkorohodMap::new(x_cone, &vecs.u0_hat)?;
    let z = state_path(x_new, b, g, y)?;
    let v = map.gamma_hat(&z)?;
    let correction = v.map(|s| &vecs.y0_hat * s[0])?;
    ControlPath::new(y.path().combine(1.0, &correction, 1.0)?)
}
