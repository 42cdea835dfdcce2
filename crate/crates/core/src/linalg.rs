//! Small dense and banded linear-algebra helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Lower-triangular `L` with `L Lᵀ = sigma` for a symmetric PSD matrix.
///
/// Zero pivots (up to `tol` times the largest diagonal entry) are accepted as
/// long as the remaining column vanishes as well, so rank-deficient
/// covariances factor without error.
pub fn psd_cholesky(sigma: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::NotPsd("matrix is not square".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let scale = 1.0 + sigma[(i, j)].abs().max(sigma[(j, i)].abs());
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotPsd("matrix is not symmetric".into()));
            }
        }
    }
    let scale = (0..n).map(|i| sigma[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let pivot_tol = tol * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = sigma[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -pivot_tol {
            return Err(Error::NotPsd(format!("negative pivot {d:e} at {j}")));
        }
        if d <= pivot_tol {
            // Zero pivot: the rest of the Schur column must vanish too.
            for i in (j + 1)..n {
                let mut s = sigma[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > pivot_tol.sqrt() * scale.sqrt() + pivot_tol {
                    return Err(Error::NotPsd(format!(
                        "zero pivot at {j} with nonzero coupling {s:e}"
                    )));
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = sigma[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Numerical rank with a cutoff relative to the largest singular value.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        None => 0,
        Some(&smax) if smax == 0.0 => 0,
        Some(&smax) => s.iter().filter(|&&v| v > rel_tol * smax).count(),
    }
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to at least n rows so the SVD returns a full set of right vectors.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::<f64>::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= rel_tol * smax)
        .map(|i| v_t.row(i).transpose())
        .collect();
    columns_to_matrix(n, &cols)
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn column_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let m = a.nrows();
    if a.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    columns_to_matrix(m, &cols)
}

pub fn columns_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Moore–Penrose pseudo-inverse with the crate rank cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let smax = singular_values(a).first().copied().unwrap_or(0.0);
    a.clone()
        .pseudo_inverse(RANK_TOL * smax.max(1e-300))
        .expect("non-negative epsilon")
}

/// Gram–Schmidt over `candidates` (in order), keeping vectors whose
/// orthogonal residual exceeds `tol`. Two passes of orthogonalisation.
pub fn gram_schmidt(candidates: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in candidates {
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / norm);
        }
    }
    basis
}

/// Square banded matrix factored by LU without pivoting.
///
/// Only used for the M-matrices produced by the monotone scheme, whose
/// leading principal minors are positive, so no pivoting is required.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // Row i stores columns i-lower ..= i+upper.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    /// Bandwidths required to hold the given sparse rows.
    pub fn bandwidths(rows: &[Vec<(usize, f64)>]) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for (i, row) in rows.iter().enumerate() {
            for &(j, _) in row {
                if j < i {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
        (lower, upper)
    }

    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let (lower, upper) = Self::bandwidths(rows);
        let mut m = Self::new(rows.len(), lower, upper);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                m.add(i, j, v);
            }
        }
        m
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper);
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Solves `A x = rhs`, consuming the matrix.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::Inconsistent(format!("zero pivot in banded solve at row {k}")));
            }
            let imax = (k + self.lower).min(n - 1);
            let jmax = (k + self.upper).min(n - 1);
            for i in (k + 1)..=imax {
                let sik = self.slot(i, k);
                let factor = self.data[sik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[sik] = factor;
                for j in (k + 1)..=jmax {
                    let skj = self.slot(k, j);
                    let sij = self.slot(i, j);
                    self.data[sij] -= factor * self.data[skj];
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + self.upper).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=jmax {
                s -= self.data[self.slot(k, j)] * x[j];
            }
            x[k] = s / self.data[self.slot(k, k)];
        }
        Ok(x)
    }
}

/// Pairwise summation; the result does not depend on how the inputs were
/// produced, only on their order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_handles_rank_deficient() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_cholesky(&s, 1e-12).unwrap();
        assert!((&l * l.transpose() - &s).abs().max() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_cholesky(&bad, 1e-12).is_err());
        let zero = DMatrix::<f64>::zeros(1, 1);
        assert_eq!(psd_cholesky(&zero, 1e-12).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn null_space_of_row() {
        let k = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let n = null_space(&k, RANK_TOL);
        assert_eq!(n.ncols(), 1);
        assert!((&k * &n).abs().max() < 1e-14);
        let full = DMatrix::<f64>::identity(2, 2);
        assert_eq!(null_space(&full, RANK_TOL).ncols(), 0);
    }

    #[test]
    fn banded_matches_dense() {
        let rows = vec![
            vec![(0, 4.0), (1, -1.0)],
            vec![(0, -1.0), (1, 4.0), (2, -1.0)],
            vec![(1, -1.0), (2, 4.0), (3, -2.0)],
            vec![(3, 1.0)],
        ];
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = BandedMatrix::from_rows(&rows).solve(&b).unwrap();
        let mut dense = DMatrix::<f64>::zeros(4, 4);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                dense[(i, j)] += v;
            }
        }
        let r = &dense * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.abs().max() < 1e-13);
    }
}

/// Serde adapter writing a vector as a plain JSON array.
pub mod serde_vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Serde adapter writing a matrix as a list of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        crate::problem::matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        crate::problem::matrix_from_rows(&rows, "matrix").map_err(D::Error::custom)
    }
}
