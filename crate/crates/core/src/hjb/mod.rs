//! Finite-difference solver for the constrained HJB variational inequality
//! `((𝓛 + β)ψ − ℓ) ∨ ℋ(Dψ) = 0` on truncated cones.

mod field;
mod grid;
mod hamiltonian;
mod policy;
mod residual;
mod scheme;
mod solve;

use serde::{Deserialize, Serialize};

pub use field::{FieldMeta, ValueField};
pub use grid::{Grid, NodeClass};
pub use hamiltonian::{hamiltonian, DiscreteHamiltonian};
pub use policy::{extract_policy, PushTable};
pub use residual::{gradient_monotonicity, viscosity_residual, ClassReport, ResidualReport};
pub use scheme::{elliptic_stencil, Branch, PushStencil, Scheme, Stencil};
pub use solve::{discretize, solve, solve_nested, InitialGuess, NestedReport, Solver};

/// Boundary data on the truncation surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletMode {
    /// `φ(x) = C(1 + |x|^m)` with `C` calibrated on the smallest domain.
    GrowthMatched,
    /// `φ` read off the previous solve of a nested sequence.
    ExtendPrevious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Policy iteration with a direct banded solve per policy.
    Howard,
    /// Damped nodewise Jacobi sweeps.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeParams {
    pub mesh: f64,
    /// Push step; defaults to `mesh`.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub dirichlet_mode: DirichletMode,
    pub method: Method,
    /// Add pairwise midpoints to the push directions.
    pub refine_directions: bool,
    /// Threshold on the push branch for marking a node as pushing.
    pub tol_active: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            mesh: 0.01,
            delta: None,
            tol: 1e-8,
            max_iterations: 10_000,
            damping: 1.0,
            dirichlet_mode: DirichletMode::GrowthMatched,
            method: Method::Howard,
            refine_directions: false,
            tol_active: 1e-6,
        }
    }
}

impl SchemeParams {
    pub fn with_mesh(mesh: f64) -> Self {
        Self {
            mesh,
            ..Self::default()
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.mesh)
    }

    pub fn check(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.mesh > 0.0 && self.mesh.is_finite()) {
            return Err(Error::Grid("mesh must be positive".into()));
        }
        if self.delta() < self.mesh * (1.0 - 1e-12) {
            return Err(Error::Grid("push step must be at least the mesh".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Grid("tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Grid("damping must lie in (0, 1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Grid("max_iterations must be positive".into()));
        }
        Ok(())
    }
}
