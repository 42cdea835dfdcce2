use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, NodeClass};
use super::solve::Solver;
use super::{Method, SchemeParams};
use crate::error::{check_dim, Error, Result};
use crate::problem::{ProblemSpec, UniquenessClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub spec_hash: String,
    pub version: String,
    pub r: f64,
    pub params: SchemeParams,
    /// Solver actually used (Howard falls back to Jacobi on wide bands).
    pub method: Method,
    pub iterations: usize,
    pub update_history: Vec<f64>,
    /// Sup of the discrete residual over unknown nodes at exit.
    pub final_residual: f64,
    pub growth_constant: Option<f64>,
    pub uniqueness: UniquenessClass,
    pub uniqueness_caveat: bool,
    pub warnings: Vec<String>,
}

/// Node values of a candidate solution on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: Grid,
    values: Vec<f64>,
    pub meta: FieldMeta,
}

impl ValueField {
    pub fn new(grid: Grid, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Inconsistent("non-finite field value".into()));
        }
        Ok(Self { grid, values, meta })
    }

    /// Constant field `c` on the grid of `spec` at radius `r`.
    pub fn constant(spec: &ProblemSpec, r: f64, params: &SchemeParams, c: f64) -> Result<Self> {
        let solver = Solver::new(spec, params.clone())?;
        let grid = solver.discretize(r)?;
        let n = grid.len();
        let meta = solver.blank_meta(r);
        Self::new(grid, vec![c; n], meta)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Multilinear interpolation; points whose cell is not fully in the
    /// grid are an error, never clamped.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.grid.locate(x)?.iter().map(|&(i, w)| w * self.values[i]).sum())
    }

    /// Sup distance to `other` over this field's nodes with `x·û₁ ≤ h_max`.
    pub fn sup_difference(&self, other: &ValueField, h_max: f64) -> Result<f64> {
        let mut d: f64 = 0.0;
        for i in 0..self.grid.len() {
            if self.grid.height(i) <= h_max + 1e-9 * self.grid.mesh() {
                let x = self.grid.coords(i);
                d = d.max((self.values[i] - other.interpolate(x.as_slice())?).abs());
            }
        }
        Ok(d)
    }

    /// CSV rows `x1..xk,value,node_class` in node order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for c in 0..self.grid.dim() {
            write!(w, "x{},", c + 1)?;
        }
        writeln!(w, "value,node_class")?;
        for i in 0..self.grid.len() {
            for v in self.grid.coords(i).iter() {
                write!(w, "{v:?},")?;
            }
            writeln!(w, "{:?},{}", self.values[i], self.grid.class(i).as_str())?;
        }
        Ok(())
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV and its JSON metadata sidecar.
    pub fn write(&self, csv: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(Self::sidecar_path(csv), meta + "\n")?;
        Ok(())
    }

    /// Reads a field written by [`ValueField::write`], rebuilding its grid
    /// from `spec` and the sidecar parameters.
    pub fn read(csv: &Path, spec: &ProblemSpec) -> Result<Self> {
        let meta: FieldMeta = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(csv))?)?;
        let grid = Solver::new(spec, meta.params.clone())?.discretize(meta.r)?;
        let reader = BufReader::new(std::fs::File::open(csv)?);
        let values = read_values(reader, &grid)?;
        Self::new(grid, values, meta)
    }
}

fn read_values<R: BufRead>(r: R, grid: &Grid) -> Result<Vec<f64>> {
    let k = grid.dim();
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Inconsistent("empty field CSV".into()))??;
    if header.trim().split(',').count() != k + 2 {
        return Err(Error::Inconsistent(format!("field header {header:?} does not match dimension {k}")));
    }
    let mut values = vec![f64::NAN; grid.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != k + 2 {
            return Err(Error::Inconsistent(format!("bad field row {line:?}")));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Inconsistent(format!("bad number {s:?}: {e}")))
        };
        let x: Vec<f64> = cols[..k].iter().map(|s| parse(s)).collect::<Result<_>>()?;
        let v = parse(cols[k])?;
        let node = grid
            .nearest(&x)
            .filter(|&n| (grid.coords(n) - DVector::from_column_slice(&x)).norm() <= 1e-6 * grid.mesh())
            .ok_or_else(|| Error::Inconsistent(format!("row {x:?} is not a grid node")))?;
        if NodeClass::parse(cols[k + 1].trim()) != Some(grid.class(node)) {
            return Err(Error::Inconsistent(format!("node class mismatch at {x:?}")));
        }
        values[node] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Inconsistent("field CSV does not cover every node".into()));
    }
    Ok(values)
}
