//! Monotone discretisation of the two branches of the variational
//! inequality.
//!
//! Every branch at a node is an affine row `d·f(x) − Σ wⱼ f(xⱼ) − c` with
//! `d > 0` and `wⱼ ≥ 0`:
//!
//! * elliptic: `β f(x) − Σ a(f(x+o) − f(x)) − ℓ(x)` with upwind drift and
//!   central (split) diffusion coefficients `a ≥ 0`;
//! * push along `y`: `(f(x) − I[f](x + δGy))/δ − h(y)` with `I` multilinear.
//!
//! A branch is available at a node only when all its points are nodes, which
//! is how the state constraint enters at `∂X`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::grid::{corner_weights, Grid, NodeClass};
use super::hamiltonian::DiscreteHamiltonian;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Generator coefficients `a_o` at lattice offsets `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<Vec<i64>>,
    pub coefs: Vec<f64>,
}

/// Upwind drift and split diffusion on a lattice of spacing `h`.
///
/// Off-diagonal covariance uses the seven-point splitting, which stays
/// monotone only when `Σᵢᵢ ≥ Σ_{j≠i} |Σᵢⱼ|` for every `i`.
pub fn elliptic_stencil(b: &DVector<f64>, sigma: &DMatrix<f64>, h: f64) -> Result<Stencil> {
    let k = b.len();
    let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let unit = |i: usize, s: i64| {
        let mut o = vec![0i64; k];
        o[i] = s;
        o
    };
    let h2 = 2.0 * h * h;
    for i in 0..k {
        let off_sum: f64 = (0..k).filter(|&j| j != i).map(|j| sigma[(i, j)].abs()).sum();
        let axis = (sigma[(i, i)] - off_sum) / h2;
        if axis < -1e-12 * (sigma[(i, i)].abs() + off_sum).max(1e-300) / h2 {
            return Err(Error::NotPsd(format!(
                "Sigma is not diagonally dominant in row {i}; the split stencil is not monotone"
            )));
        }
        let axis = axis.max(0.0);
        *acc.entry(unit(i, 1)).or_default() += axis;
        *acc.entry(unit(i, -1)).or_default() += axis;
        if b[i] > 0.0 {
            *acc.entry(unit(i, 1)).or_default() += b[i] / h;
        } else if b[i] < 0.0 {
            *acc.entry(unit(i, -1)).or_default() += -b[i] / h;
        }
        for j in (i + 1)..k {
            let s = sigma[(i, j)];
            if s == 0.0 {
                continue;
            }
            let sign = if s > 0.0 { 1 } else { -1 };
            let mut plus = vec![0i64; k];
            plus[i] = 1;
            plus[j] = sign;
            let minus: Vec<i64> = plus.iter().map(|v| -v).collect();
            *acc.entry(plus).or_default() += s.abs() / h2;
            *acc.entry(minus).or_default() += s.abs() / h2;
        }
    }
    let (offsets, coefs) = acc.into_iter().filter(|(_, a)| *a > 0.0).unzip();
    Ok(Stencil { offsets, coefs })
}

/// Interpolation corners of `x + δGy` relative to `x`, in lattice units.
#[derive(Debug, Clone, PartialEq)]
pub struct PushStencil {
    pub displacement: Vec<f64>,
    pub corners: Vec<(Vec<i64>, f64)>,
}

pub fn push_stencils(h: &DiscreteHamiltonian, delta: f64, mesh: f64) -> Vec<PushStencil> {
    h.images
        .iter()
        .map(|gy| {
            let displacement: Vec<f64> = gy.iter().map(|v| v * delta / mesh).collect();
            let corners = corner_weights(&displacement);
            PushStencil {
                displacement,
                corners,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Elliptic,
    Push(usize),
}

/// All available branch rows of every unknown node, in compressed form.
#[derive(Debug, Clone)]
pub struct Scheme {
    grid: Grid,
    node_rows: Vec<usize>,
    kind: Vec<Branch>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    nb_start: Vec<usize>,
    nb: Vec<u32>,
    w: Vec<f64>,
}

impl Scheme {
    pub fn assemble(
        grid: Grid,
        spec: &ProblemSpec,
        stencil: &Stencil,
        pushes: &[PushStencil],
        hamiltonian: &DiscreteHamiltonian,
        delta: f64,
    ) -> Result<Self> {
        let n = grid.len();
        let mut s = Scheme {
            node_rows: Vec::with_capacity(n + 1),
            kind: Vec::new(),
            diag: Vec::new(),
            rhs: Vec::new(),
            nb_start: vec![0],
            nb: Vec::new(),
            w: Vec::new(),
            grid,
        };
        let total_a: f64 = stencil.coefs.iter().sum();
        let mut scratch: Vec<(u32, f64)> = Vec::new();
        for i in 0..n {
            s.node_rows.push(s.kind.len());
            if s.grid.class(i) == NodeClass::Dirichlet {
                continue;
            }
            scratch.clear();
            let ok = stencil.offsets.iter().zip(&stencil.coefs).all(|(o, &a)| match s.grid.neighbor(i, o) {
                Some(j) => {
                    scratch.push((j as u32, a));
                    true
                }
                None => false,
            });
            if ok {
                let x = s.grid.coords(i);
                s.push_row(Branch::Elliptic, spec.beta + total_a, spec.running_cost.eval(x.as_slice()), &scratch);
            }
            for (d, ps) in pushes.iter().enumerate() {
                scratch.clear();
                let mut self_w = 0.0;
                let ok = ps.corners.iter().all(|(o, wgt)| {
                    if o.iter().all(|&v| v == 0) {
                        self_w += wgt;
                        return true;
                    }
                    match s.grid.neighbor(i, o) {
                        Some(j) => {
                            scratch.push((j as u32, wgt / delta));
                            true
                        }
                        None => false,
                    }
                });
                if ok {
                    s.push_row(Branch::Push(d), (1.0 - self_w) / delta, hamiltonian.costs[d], &scratch);
                }
            }
            if s.kind.len() == s.node_rows[i] {
                return Err(Error::Grid(format!(
                    "node {:?} has neither a complete stencil nor an admissible push",
                    s.grid.coords(i).as_slice()
                )));
            }
        }
        s.node_rows.push(s.kind.len());
        Ok(s)
    }

    fn push_row(&mut self, kind: Branch, diag: f64, rhs: f64, nbs: &[(u32, f64)]) {
        self.kind.push(kind);
        self.diag.push(diag);
        self.rhs.push(rhs);
        for &(j, w) in nbs {
            self.nb.push(j);
            self.w.push(w);
        }
        self.nb_start.push(self.nb.len());
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    /// Row indices belonging to node `i` (empty for Dirichlet nodes).
    pub fn rows(&self, i: usize) -> std::ops::Range<usize> {
        self.node_rows[i]..self.node_rows[i + 1]
    }

    pub fn branch(&self, row: usize) -> Branch {
        self.kind[row]
    }

    pub fn row_node(&self, row: usize) -> usize {
        self.node_rows.partition_point(|&s| s <= row) - 1
    }

    pub fn diag(&self, row: usize) -> f64 {
        self.diag[row]
    }

    pub fn rhs(&self, row: usize) -> f64 {
        self.rhs[row]
    }

    pub fn neighbors(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.nb_start[row]..self.nb_start[row + 1];
        self.nb[r.clone()].iter().zip(&self.w[r]).map(|(&j, &w)| (j as usize, w))
    }

    /// Branch residual at its node.
    pub fn residual(&self, row: usize, node: usize, f: &[f64]) -> f64 {
        let mut s = self.diag[row] * f[node] - self.rhs[row];
        for (j, w) in self.neighbors(row) {
            s -= w * f[j];
        }
        s
    }

    /// Node value zeroing the branch with neighbours held fixed.
    pub fn local_root(&self, row: usize, f: &[f64]) -> f64 {
        let mut s = self.rhs[row];
        for (j, w) in self.neighbors(row) {
            s += w * f[j];
        }
        s / self.diag[row]
    }

    /// `max` over available branches, or `None` at Dirichlet nodes.
    pub fn node_residual(&self, i: usize, f: &[f64]) -> Option<f64> {
        let rows = self.rows(i);
        if rows.is_empty() {
            return None;
        }
        Some(rows.map(|r| self.residual(r, i, f)).fold(f64::NEG_INFINITY, f64::max))
    }
}
