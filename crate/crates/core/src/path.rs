//! Sampled right-continuous paths with explicit jump records.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// How a path behaves strictly between grid times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Constant on `[tᵢ, tᵢ₊₁)`; every change is a jump at a grid time.
    PiecewiseConstant,
    /// Linear from the value at `tᵢ` to the left limit at `tᵢ₊₁`.
    PiecewiseLinear,
}

/// A jump at grid index `index`, with the value just before it.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub index: usize,
    pub pre: DVector<f64>,
}

/// RCLL path on a finite grid. `values[i]` is the value at `times[i]`
/// (the right limit); left limits come from the jump list or, for
/// piecewise-constant paths, from the previous value. The left limit at
/// index 0 is the value at `0−`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRCLL {
    dim: usize,
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    jumps: Vec<Jump>,
    interpolation: Interpolation,
}

impl PathRCLL {
    /// Validating constructor. Jumps must be sorted by index, unique, and
    /// must actually change the value. For piecewise-constant paths only an
    /// index-0 jump may be given explicitly; the others are implied.
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>, jumps: Vec<Jump>, interpolation: Interpolation) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPath("empty grid".into()));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath("grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("times must be strictly increasing".into()));
        }
        let dim = values[0].len();
        for v in &values {
            check_dim(dim, v.len())?;
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidPath("non-finite value".into()));
            }
        }
        let mut last = None;
        for j in &jumps {
            check_dim(dim, j.pre.len())?;
            if j.index >= times.len() {
                return Err(Error::InvalidPath(format!("jump index {} out of range", j.index)));
            }
            if last.is_some_and(|l| j.index <= l) {
                return Err(Error::InvalidPath("jumps must be sorted and unique".into()));
            }
            if j.pre == values[j.index] {
                return Err(Error::InvalidPath(format!("jump at {} does not change the value", j.index)));
            }
            if interpolation == Interpolation::PiecewiseConstant && j.index != 0 {
                return Err(Error::InvalidPath(
                    "piecewise-constant paths take only an index-0 jump explicitly".into(),
                ));
            }
            last = Some(j.index);
        }
        Ok(Self {
            dim,
            times,
            values,
            jumps,
            interpolation,
        })
    }

    /// Builds a path from values and left limits, recording a jump wherever
    /// the two differ. For piecewise-constant paths the left limits at
    /// `i > 0` must equal the previous value and are not stored.
    pub fn from_parts(
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
        lefts: Vec<DVector<f64>>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if lefts.len() != values.len() {
            return Err(Error::InvalidPath("left limits and values differ in length".into()));
        }
        let mut jumps = Vec::new();
        for (i, left) in lefts.into_iter().enumerate() {
            if interpolation == Interpolation::PiecewiseConstant && i > 0 {
                continue;
            }
            if left != values[i] {
                jumps.push(Jump { index: i, pre: left });
            }
        }
        Self::new(times, values, jumps, interpolation)
    }

    /// Piecewise-linear path without jumps.
    pub fn piecewise_linear(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        Self::new(times, values, Vec::new(), Interpolation::PiecewiseLinear)
    }

    /// Piecewise-constant path with value `start` at `0−`.
    pub fn piecewise_constant(times: Vec<f64>, values: Vec<DVector<f64>>, start: DVector<f64>) -> Result<Self> {
        let jumps = match values.first() {
            Some(v0) if *v0 != start => vec![Jump { index: 0, pre: start }],
            _ => Vec::new(),
        };
        Self::new(times, values, jumps, Interpolation::PiecewiseConstant)
    }

    /// Uniform grid `0, dt, …, n·dt` with values from `f(t)`, linear in between.
    pub fn sampled(dt: f64, n: usize, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::piecewise_linear(times, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &DVector<f64> {
        &self.values[i]
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    fn recorded_jump(&self, i: usize) -> Option<&DVector<f64>> {
        self.jumps
            .binary_search_by_key(&i, |j| j.index)
            .ok()
            .map(|k| &self.jumps[k].pre)
    }

    /// Value just before `times[i]`.
    pub fn left_limit(&self, i: usize) -> &DVector<f64> {
        if let Some(pre) = self.recorded_jump(i) {
            return pre;
        }
        match self.interpolation {
            Interpolation::PiecewiseConstant if i > 0 => &self.values[i - 1],
            _ => &self.values[i],
        }
    }

    /// `Δ` at grid index `i` (zero when continuous there).
    pub fn jump_at(&self, i: usize) -> DVector<f64> {
        &self.values[i] - self.left_limit(i)
    }

    pub fn has_jump(&self, i: usize) -> bool {
        self.left_limit(i) != &self.values[i]
    }

    /// Prefix of the path on `[0, T]` (grid times `≤ T`).
    pub fn truncate(&self, t: f64) -> Result<Self> {
        let n = self.times.partition_point(|&s| s <= t);
        if n == 0 {
            return Err(Error::InvalidPath("truncation before time 0".into()));
        }
        let jumps = self.jumps.iter().filter(|j| j.index < n).cloned().collect();
        Ok(Self {
            dim: self.dim,
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
            jumps,
            interpolation: self.interpolation,
        })
    }

    /// Componentwise combination `a·self + b·other` on a shared grid. The
    /// result is piecewise-linear unless both inputs are piecewise-constant.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        if self.times != other.times {
            return Err(Error::InvalidPath("paths live on different grids".into()));
        }
        let values: Vec<DVector<f64>> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x * a + y * b)
            .collect();
        let lefts = (0..self.len()).map(|i| self.left_limit(i) * a + other.left_limit(i) * b);
        self.rebuild(values, lefts, self.interpolation == Interpolation::PiecewiseConstant && other.interpolation == Interpolation::PiecewiseConstant)
    }

    /// Applies `f` to every value and left limit.
    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        let values: Vec<DVector<f64>> = self.values.iter().map(&f).collect();
        let lefts = (0..self.len()).map(|i| f(self.left_limit(i)));
        self.rebuild(values, lefts, self.interpolation == Interpolation::PiecewiseConstant)
    }

    fn rebuild(
        &self,
        values: Vec<DVector<f64>>,
        lefts: impl Iterator<Item = DVector<f64>>,
        constant: bool,
    ) -> Result<Self> {
        let interpolation = if constant {
            Interpolation::PiecewiseConstant
        } else {
            Interpolation::PiecewiseLinear
        };
        Self::from_parts(self.times.clone(), values, lefts.collect(), interpolation)
    }

    /// Sup over grid values and left limits of `|self − other|`, on `[0, T]`.
    pub fn sup_distance(&self, other: &Self, t: f64) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        if self.times != other.times {
            return Err(Error::InvalidPath("paths live on different grids".into()));
        }
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            if self.times[i] > t {
                break;
            }
            d = d.max((self.value(i) - other.value(i)).norm());
            if i > 0 {
                d = d.max((self.left_limit(i) - other.left_limit(i)).norm());
            }
        }
        Ok(d)
    }

    /// CSV with header `time,x1..xk,is_jump`. A jump at a grid time is
    /// written as a row holding the left limit with `is_jump = 1`, followed
    /// by the regular row for that time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time")?;
        for c in 0..self.dim {
            write!(w, ",x{}", c + 1)?;
        }
        writeln!(w, ",is_jump")?;
        let row = |w: &mut W, t: f64, v: &DVector<f64>, flag: u8| -> Result<()> {
            write!(w, "{t:?}")?;
            for x in v.iter() {
                write!(w, ",{x:?}")?;
            }
            writeln!(w, ",{flag}")?;
            Ok(())
        };
        for i in 0..self.len() {
            if self.has_jump(i) {
                row(&mut w, self.times[i], self.left_limit(i), 1)?;
            }
            row(&mut w, self.times[i], &self.values[i], 0)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, interpolation: Interpolation) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidPath("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "time" || cols[cols.len() - 1] != "is_jump" {
            return Err(Error::InvalidPath(format!("unexpected header {header:?}")));
        }
        let dim = cols.len() - 2;
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut jumps = Vec::new();
        let mut pending: Option<(f64, DVector<f64>)> = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .trim()
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidPath(format!("bad CSV row {line:?}: {e}")))?;
            if fields.len() != dim + 2 {
                return Err(Error::InvalidPath(format!("bad CSV row {line:?}")));
            }
            let t = fields[0];
            let v = DVector::from_column_slice(&fields[1..=dim]);
            if fields[dim + 1] != 0.0 {
                pending = Some((t, v));
                continue;
            }
            if let Some((tp, pre)) = pending.take() {
                if tp != t {
                    return Err(Error::InvalidPath(format!("jump row at {tp} not followed by its value")));
                }
                let index = times.len();
                if interpolation == Interpolation::PiecewiseLinear || index == 0 {
                    jumps.push(Jump { index, pre });
                }
            }
            times.push(t);
            values.push(v);
        }
        if pending.is_some() {
            return Err(Error::InvalidPath("dangling jump row".into()));
        }
        Self::new(times, values, jumps, interpolation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn constant_path_left_limits() {
        let p = PathRCLL::piecewise_constant(vec![0.0, 1.0, 2.0], vec![s(2.0), s(2.0), s(5.0)], s(0.0)).unwrap();
        assert_eq!(p.left_limit(0), &s(0.0));
        assert_eq!(p.jump_at(0), s(2.0));
        assert!(!p.has_jump(1));
        assert_eq!(p.jump_at(2), s(3.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PathRCLL::piecewise_linear(vec![0.0, 0.0], vec![s(0.0), s(1.0)]).is_err());
        assert!(PathRCLL::piecewise_linear(vec![0.5], vec![s(0.0)]).is_err());
        let fake = Jump { index: 1, pre: s(1.0) };
        assert!(PathRCLL::new(vec![0.0, 1.0], vec![s(0.0), s(1.0)], vec![fake], Interpolation::PiecewiseLinear).is_err());
    }

    #[test]
    fn csv_round_trip_with_jumps() {
        let jumps = vec![Jump { index: 0, pre: s(-1.0) }, Jump { index: 2, pre: s(4.0) }];
        let p = PathRCLL::new(
            vec![0.0, 0.5, 1.0],
            vec![s(0.0), s(0.25), s(7.0)],
            jumps,
            Interpolation::PiecewiseLinear,
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = PathRCLL::read_csv(buf.as_slice(), Interpolation::PiecewiseLinear).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let p = PathRCLL::sampled(0.1, 10, |t| s(t * t)).unwrap();
        let q = p.truncate(0.55).unwrap();
        assert_eq!(q.len(), 6);
        assert_eq!(q.value(5), p.value(5));
    }
}
