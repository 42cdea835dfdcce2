//! Lattice discretisation of the truncated cone `{x ∈ X : x·û₁ ≤ r}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{check_dim, Error, Result};

const MAX_BOX: usize = 50_000_000;
const SNAP: f64 = 1e-9;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    ConeBoundary,
    Dirichlet,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::ConeBoundary => "cone_boundary",
            NodeClass::Dirichlet => "dirichlet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(NodeClass::Interior),
            "cone_boundary" => Some(NodeClass::ConeBoundary),
            "dirichlet" => Some(NodeClass::Dirichlet),
            _ => None,
        }
    }
}

/// Nodes are the lattice points `mesh·ℤᵏ` inside the truncated cone.
///
/// A node is Dirichlet when some stencil or interpolation point could reach
/// past `∂_r`, i.e. `x·û₁ > r − band`. Among the others, nodes off `∂X`
/// whose full elliptic stencil is present are interior; the rest are
/// cone-boundary nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    mesh: f64,
    r: f64,
    band: f64,
    u1_hat: DVector<f64>,
    lo: Vec<i64>,
    shape: Vec<usize>,
    lookup: Vec<u32>,
    index: Vec<i64>,
    classes: Vec<NodeClass>,
}

fn snapped_floor_ceil(c: f64) -> (f64, f64) {
    let r = c.round();
    if (c - r).abs() <= SNAP {
        (r, r)
    } else {
        (c.floor(), c.ceil())
    }
}

/// Largest `û₁`-height, in lattice units, of an interpolation corner of
/// `x + d` relative to `x`.
pub(crate) fn reach(u1_hat: &DVector<f64>, d: &[f64]) -> f64 {
    d.iter()
        .zip(u1_hat.iter())
        .map(|(&di, &ui)| {
            let (f, c) = snapped_floor_ceil(di);
            (ui * f).max(ui * c)
        })
        .sum()
}

impl Grid {
    /// `displacements` are every stencil offset and push step in lattice
    /// units; `elliptic` are the offsets an interior node must have.
    pub(crate) fn build(
        x_cone: &ConeSpec,
        u1_hat: &DVector<f64>,
        r: f64,
        mesh: f64,
        displacements: &[Vec<f64>],
        elliptic: &[Vec<i64>],
    ) -> Result<Self> {
        let k = x_cone.dim();
        check_dim(k, u1_hat.len())?;
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::Grid("mesh must be positive".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Grid("r must be positive".into()));
        }
        if mesh > r {
            return Err(Error::Grid(format!("mesh {mesh} exceeds r = {r}")));
        }
        let band_units = displacements
            .iter()
            .map(|d| reach(u1_hat, d))
            .fold(0.0, f64::max);
        let band = band_units * mesh;

        // Bounding box of the truncated cone: apex plus generator exits.
        let mut lo_f = vec![0.0f64; k];
        let mut hi_f = vec![0.0f64; k];
        for g in x_cone.generators() {
            let h = g.dot(u1_hat);
            if !(h > 0.0) {
                return Err(Error::Grid("a generator does not reach the truncation surface".into()));
            }
            for i in 0..k {
                let v = r * g[i] / h;
                lo_f[i] = lo_f[i].min(v);
                hi_f[i] = hi_f[i].max(v);
            }
        }
        let lo: Vec<i64> = lo_f.iter().map(|v| (v / mesh - SNAP).floor() as i64).collect();
        let hi: Vec<i64> = hi_f.iter().map(|v| (v / mesh + SNAP).ceil() as i64).collect();
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let total = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let total = match total {
            Some(t) if t <= MAX_BOX => t,
            _ => return Err(Error::Grid("grid too large for this mesh".into())),
        };

        let tol = SNAP * mesh;
        let mut lookup = vec![NONE; total];
        let mut index = Vec::new();
        let mut heights = Vec::new();
        let mut on_boundary = Vec::new();
        let mut idx = lo.clone();
        let mut x = DVector::zeros(k);
        for lin in 0..total {
            for i in 0..k {
                x[i] = idx[i] as f64 * mesh;
            }
            let height = x.dot(u1_hat);
            let margin = x_cone.margin(&x);
            if margin >= -tol && height <= r + tol {
                lookup[lin] = (heights.len()) as u32;
                index.extend_from_slice(&idx);
                heights.push(height);
                on_boundary.push(margin <= tol);
            }
            for i in 0..k {
                idx[i] += 1;
                if idx[i] <= hi[i] {
                    break;
                }
                idx[i] = lo[i];
            }
        }
        if heights.len() > NONE as usize {
            return Err(Error::Grid("too many nodes".into()));
        }
        let mut grid = Grid {
            dim: k,
            mesh,
            r,
            band,
            u1_hat: u1_hat.clone(),
            lo,
            shape,
            lookup,
            index,
            classes: Vec::new(),
        };
        let n = heights.len();
        let mut classes = Vec::with_capacity(n);
        for i in 0..n {
            let class = if heights[i] > r - band + tol {
                NodeClass::Dirichlet
            } else if !on_boundary[i] && elliptic.iter().all(|o| grid.neighbor(i, o).is_some()) {
                NodeClass::Interior
            } else {
                NodeClass::ConeBoundary
            };
            classes.push(class);
        }
        grid.classes = classes;
        if !grid.classes.contains(&NodeClass::Interior) && !grid.classes.contains(&NodeClass::ConeBoundary) {
            return Err(Error::Grid(format!("no unknown nodes: mesh {mesh} too coarse for r = {r}")));
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Width of the Dirichlet layer below `∂_r`.
    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn u1_hat(&self) -> &DVector<f64> {
        &self.u1_hat
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.classes[i]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn lattice_index(&self, i: usize) -> &[i64] {
        &self.index[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.lattice_index(i).iter().map(|&v| v as f64 * self.mesh))
    }

    pub fn height(&self, i: usize) -> f64 {
        self.coords(i).dot(&self.u1_hat)
    }

    pub fn node_at(&self, idx: &[i64]) -> Option<usize> {
        let mut lin = 0usize;
        let mut stride = 1usize;
        for i in 0..self.dim {
            let off = idx[i] - self.lo[i];
            if off < 0 || off as usize >= self.shape[i] {
                return None;
            }
            lin += off as usize * stride;
            stride *= self.shape[i];
        }
        match self.lookup[lin] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    pub fn neighbor(&self, i: usize, offset: &[i64]) -> Option<usize> {
        let base = self.lattice_index(i);
        let idx: Vec<i64> = base.iter().zip(offset).map(|(a, b)| a + b).collect();
        self.node_at(&idx)
    }

    /// Multilinear interpolation weights at `x`; every corner with weight
    /// above `1e-14` must be a node.
    pub fn locate(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_dim(self.dim, x.len())?;
        let c: Vec<f64> = x.iter().map(|v| v / self.mesh).collect();
        let corners = corner_weights(&c);
        let mut out = Vec::with_capacity(corners.len());
        for (idx, w) in corners {
            match self.node_at(&idx) {
                Some(n) => out.push((n, w)),
                None => return Err(Error::OutsideGrid(x.to_vec())),
            }
        }
        Ok(out)
    }

    /// Nearest node by lattice rounding, if it exists.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let idx: Vec<i64> = x.iter().map(|v| (v / self.mesh).round() as i64).collect();
        self.node_at(&idx)
    }
}

/// Corners and multilinear weights for a point in lattice units. Weights
/// below `1e-14` are dropped; near-integer coordinates snap.
pub(crate) fn corner_weights(c: &[f64]) -> Vec<(Vec<i64>, f64)> {
    let mut out: Vec<(Vec<i64>, f64)> = vec![(Vec::with_capacity(c.len()), 1.0)];
    for &ci in c {
        let (f, cl) = snapped_floor_ceil(ci);
        let mut next = Vec::with_capacity(out.len() * 2);
        for (idx, w) in out {
            if f == cl {
                let mut a = idx;
                a.push(f as i64);
                next.push((a, w));
            } else {
                let t = ci - f;
                let mut a = idx.clone();
                a.push(f as i64);
                next.push((a, w * (1.0 - t)));
                let mut b = idx;
                b.push(cl as i64);
                next.push((b, w * t));
            }
        }
        out = next;
    }
    out.retain(|(_, w)| *w > 1e-14);
    out
}
