//! Reduction of a Brownian control problem `(R, K, ℓ̃, h)` to its workload
//! problem on `𝕏 = M·ℝ₊^m`.
//!
//! `𝒩 = R·ker K` is the part of the state the controls can move for free;
//! `M` projects onto its orthocomplement, and `G` is the unique solution of
//! `MR = GK` when `K` has full row rank. The effective cost
//! `ℓ(x) = min{ℓ̃(z) : Mz = x, z ≥ 0}` is a linear program; for linear `ℓ̃`
//! its dual vertices give an exact max-of-linear representation.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cone::ConeSpec;
use crate::cost::{PushCost, RunningCost, RunningCostForm};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{column_space, gram_schmidt, null_space, pinv, rank, RANK_TOL};
use crate::problem::{matrix_from_rows, matrix_to_rows, DeclaredConditions, ProblemSpec};

/// Residual tolerance for `MR = GK` and `M ⟂ 𝒩`.
pub const REDUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BcpJson", into = "BcpJson")]
pub struct BcpSpec {
    pub r: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Linear `ℓ̃(z) = w·z + c`.
    pub cost: RunningCostForm,
    pub h: DVector<f64>,
    pub b: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub z: DVector<f64>,
    pub beta: f64,
}

#[derive(Serialize, Deserialize)]
struct BcpJson {
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    cost: RunningCostForm,
    h: Vec<f64>,
    b: Vec<f64>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    #[serde(default)]
    z: Option<Vec<f64>>,
    #[serde(default = "unit_beta")]
    beta: f64,
}

fn unit_beta() -> f64 {
    1.0
}

impl TryFrom<BcpJson> for BcpSpec {
    type Error = Error;

    fn try_from(j: BcpJson) -> Result<Self> {
        let r = matrix_from_rows(&j.r, "R")?;
        let m = r.nrows();
        let bcp = BcpSpec {
            k: matrix_from_rows(&j.k, "K")?,
            cost: j.cost,
            h: DVector::from_vec(j.h),
            b: DVector::from_vec(j.b),
            sigma: matrix_from_rows(&j.sigma, "Sigma")?,
            z: DVector::from_vec(j.z.unwrap_or_else(|| vec![0.0; m])),
            beta: j.beta,
            r,
        };
        bcp.check()?;
        Ok(bcp)
    }
}

impl From<BcpSpec> for BcpJson {
    fn from(s: BcpSpec) -> Self {
        BcpJson {
            r: matrix_to_rows(&s.r),
            k: matrix_to_rows(&s.k),
            cost: s.cost,
            h: s.h.as_slice().to_vec(),
            b: s.b.as_slice().to_vec(),
            sigma: matrix_to_rows(&s.sigma),
            z: Some(s.z.as_slice().to_vec()),
            beta: s.beta,
        }
    }
}

impl BcpSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn n(&self) -> usize {
        self.r.ncols()
    }

    pub fn p(&self) -> usize {
        self.k.nrows()
    }

    /// Linear cost coefficients `(w, c)`.
    pub fn linear_cost(&self) -> Result<(&[f64], f64)> {
        match &self.cost {
            RunningCostForm::Linear { w, c } => Ok((w, *c)),
            _ => Err(Error::InvalidSpec("workload reduction needs a linear cost".into())),
        }
    }

    pub fn check(&self) -> Result<()> {
        let (m, n, p) = (self.m(), self.n(), self.p());
        if m == 0 || n == 0 || p == 0 {
            return Err(Error::InvalidSpec("R and K must be nonempty".into()));
        }
        check_dim(n, self.k.ncols())?;
        check_dim(p, self.h.len())?;
        check_dim(m, self.b.len())?;
        check_dim(m, self.z.len())?;
        if self.sigma.nrows() != m || self.sigma.ncols() != m {
            return Err(Error::InvalidSpec(format!("Sigma must be {m}×{m}")));
        }
        let (w, c) = self.linear_cost()?;
        check_dim(m, w.len())?;
        if w.iter().any(|&v| v < 0.0) || c < 0.0 {
            return Err(Error::InvalidSpec("cost must be nonnegative".into()));
        }
        if self.h.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("h must be nonnegative".into()));
        }
        if self.z.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("initial inventory must be nonnegative".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec("beta must be positive".into()));
        }
        let rk = rank(&self.k, RANK_TOL);
        if rk < p {
            return Err(Error::RankDeficient(format!("K has rank {rk} < {p}")));
        }
        crate::linalg::psd_cholesky(&self.sigma, 1e-12)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonnegBasis {
    NotRequested,
    AlreadyNonnegative,
    Rebased,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadProblem {
    /// Orthonormal basis of `ker K`, as columns.
    pub null_k: DMatrix<f64>,
    /// Orthonormal basis of `𝒩 = R·ker K`, as columns.
    pub n_basis: DMatrix<f64>,
    /// `k×m`; rows span `𝒩^⊥`.
    pub m_mat: DMatrix<f64>,
    /// `k×p` with `MR = GK`.
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub nonneg: NonnegBasis,
    /// `‖MR − GK‖_∞`.
    pub residual: f64,
    /// `max |M·n|` over the basis of `𝒩`.
    pub orthogonality: f64,
    /// Dimension of the affine family of solutions `G` (0 for full-rank `K`).
    pub g_alternatives: usize,
    pub warnings: Vec<String>,
}

impl WorkloadProblem {
    pub fn k(&self) -> usize {
        self.m_mat.nrows()
    }

    pub fn q(&self) -> usize {
        self.n_basis.ncols()
    }

    /// `{M·eᵢ}`.
    pub fn generators(&self) -> Vec<DVector<f64>> {
        (0..self.m_mat.ncols()).map(|i| self.m_mat.column(i).into_owned()).collect()
    }

    /// `𝕏 = M·ℝ₊^m`; fails when the image is not a pointed solid cone.
    pub fn x_cone(&self) -> Result<ConeSpec> {
        ConeSpec::from_generators(self.k(), self.generators())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "k": self.k(),
            "q": self.q(),
            "M": matrix_to_rows(&self.m_mat),
            "G": matrix_to_rows(&self.g),
            "b": self.b.as_slice(),
            "Sigma": matrix_to_rows(&self.sigma),
            "null_K": matrix_to_rows(&self.null_k),
            "N": matrix_to_rows(&self.n_basis),
            "generators": self.generators().iter().map(|g| g.as_slice().to_vec()).collect::<Vec<_>>(),
            "nonneg_basis": self.nonneg,
            "residual": self.residual,
            "orthogonality": self.orthogonality,
            "g_alternatives": self.g_alternatives,
            "warnings": self.warnings,
        })
    }
}

pub fn reduce(bcp: &BcpSpec, prefer_nonneg: bool) -> Result<WorkloadProblem> {
    bcp.check()?;
    let m = bcp.m();
    let null_k = null_space(&bcp.k, RANK_TOL);
    let n_basis = if null_k.ncols() == 0 {
        DMatrix::zeros(m, 0)
    } else {
        column_space(&(&bcp.r * &null_k), RANK_TOL)
    };
    let q = n_basis.ncols();
    if q == m {
        return Err(Error::Inconsistent("R·ker K is all of the state space; no workload remains".into()));
    }
    // Canonical basis: project the unit vectors onto 𝒩^⊥ and orthonormalise.
    let proj = DMatrix::identity(m, m) - &n_basis * n_basis.transpose();
    let units: Vec<DVector<f64>> = (0..m).map(|i| proj.column(i).into_owned()).collect();
    let rows = gram_schmidt(&units, 1e-8);
    if rows.len() != m - q {
        return Err(Error::Inconsistent(format!(
            "found {} workload directions, expected {}",
            rows.len(),
            m - q
        )));
    }
    let mut m_mat = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let mut warnings = Vec::new();
    let nonneg = if !prefer_nonneg {
        NonnegBasis::NotRequested
    } else if m_mat.iter().all(|&v| v >= -REDUCTION_TOL) {
        m_mat.apply(|v| *v = v.max(0.0));
        NonnegBasis::AlreadyNonnegative
    } else if let Some(rebased) = nonneg_rebase(&m_mat) {
        m_mat = rebased;
        NonnegBasis::Rebased
    } else {
        warnings.push("no nonnegative basis of the workload space found; keeping the orthonormal one".into());
        NonnegBasis::Failed
    };
    let mr = &m_mat * &bcp.r;
    let g = &mr * pinv(&bcp.k);
    let residual = (&mr - &g * &bcp.k).amax();
    let scale = mr.amax().max(1.0);
    if residual > REDUCTION_TOL * scale {
        return Err(Error::Inconsistent(format!("MR = GK fails with residual {residual:e}")));
    }
    let orthogonality = if q == 0 { 0.0 } else { (&m_mat * &n_basis).amax() };
    if orthogonality > REDUCTION_TOL {
        return Err(Error::Inconsistent(format!("M is not orthogonal to R·ker K ({orthogonality:e})")));
    }
    Ok(WorkloadProblem {
        b: &m_mat * &bcp.b,
        sigma: &m_mat * &bcp.sigma * m_mat.transpose(),
        g_alternatives: bcp.p() - rank(&bcp.k, RANK_TOL),
        null_k,
        n_basis,
        m_mat,
        g,
        nonneg,
        residual,
        orthogonality,
        warnings,
    })
}

/// Searches the row space of `m` for `k` independent nonnegative rows: for
/// each coordinate `i`, the nonnegative combination of least mass with unit
/// weight on `i`. Rows are normalised to unit length.
fn nonneg_rebase(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (k, cols) = m.shape();
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    for i in 0..cols {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let col_sums: Vec<f64> = (0..k).map(|r| m.row(r).sum()).collect();
        let vars: Vec<_> = col_sums
            .iter()
            .map(|&s| lp.add_var(s, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        for j in 0..cols {
            let expr: Vec<_> = vars.iter().enumerate().map(|(r, &v)| (v, m[(r, j)])).collect();
            let (op, rhs) = if j == i { (ComparisonOp::Eq, 1.0) } else { (ComparisonOp::Ge, 0.0) };
            lp.add_constraint(expr.as_slice(), op, rhs);
        }
        let Ok(sol) = lp.solve() else { continue };
        let c = DVector::from_iterator(k, vars.iter().map(|&v| sol[v]));
        let mut row = (c.transpose() * m).transpose();
        row.apply(|v| {
            if v.abs() < 1e-12 {
                *v = 0.0
            }
        });
        if row.iter().any(|&v| v < 0.0) {
            continue;
        }
        let row = &row / row.norm();
        let mut trial = chosen.clone();
        trial.push(row.clone());
        if gram_schmidt(&trial, 1e-8).len() == trial.len() {
            chosen = trial;
        }
        if chosen.len() == k {
            return Some(DMatrix::from_fn(k, cols, |r, j| chosen[r][j]));
        }
    }
    None
}

/// `min{ℓ̃(z) : Mz = x, z ≥ 0}` and one minimiser.
pub fn effective_cost(wp: &WorkloadProblem, bcp: &BcpSpec, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    check_dim(wp.k(), x.len())?;
    let (w, c) = bcp.linear_cost()?;
    let m = bcp.m();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = w.iter().map(|&wi| lp.add_var(wi, (0.0, f64::INFINITY))).collect();
    for r in 0..wp.k() {
        let expr: Vec<_> = vars.iter().enumerate().map(|(j, &v)| (v, wp.m_mat[(r, j)])).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, x[r]);
    }
    let sol = lp.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::Infeasible(format!("{:?} is outside M·R₊^m", x.as_slice())),
        minilp::Error::Unbounded => Error::Inconsistent("effective cost LP is unbounded".into()),
    })?;
    let z = DVector::from_iterator(m, vars.iter().map(|&v| sol[v].max(0.0)));
    Ok((sol.objective() + c, z))
}

/// Vertices of the dual polyhedron `{λ : Mᵀλ ≤ w}`. By LP duality
/// `ℓ(x) = c + max_v λ_v·x` on `M·ℝ₊^m`.
pub fn dual_vertices(wp: &WorkloadProblem, bcp: &BcpSpec) -> Result<Vec<DVector<f64>>> {
    let (w, _) = bcp.linear_cost()?;
    let mt = wp.m_mat.transpose();
    let (m, k) = mt.shape();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for subset in subsets(m, k) {
        let a = DMatrix::from_fn(k, k, |i, j| mt[(subset[i], j)]);
        let rhs = DVector::from_iterator(k, subset.iter().map(|&i| w[i]));
        let Some(lambda) = a.lu().solve(&rhs) else { continue };
        if !lambda.iter().all(|v| v.is_finite()) {
            continue;
        }
        let slack = &mt * &lambda;
        let feasible = (0..m).all(|i| slack[i] <= w[i] + 1e-9 * (1.0 + w[i].abs()));
        let tight = (0..k).all(|i| (slack[subset[i]] - w[subset[i]]).abs() <= 1e-9 * (1.0 + w[subset[i]].abs()));
        if feasible && tight && !out.iter().any(|v| (v - &lambda).amax() < 1e-9) {
            out.push(lambda);
        }
    }
    if out.is_empty() {
        return Err(Error::Infeasible("dual of the effective cost LP has no vertex".into()));
    }
    Ok(out)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// The workload problem as a [`ProblemSpec`]: `𝕐 = ℝ₊^p`, `h(y) = h·y`,
/// `ℓ` in max-of-linear form with declared linear growth.
pub fn lift_problem(wp: &WorkloadProblem, bcp: &BcpSpec) -> Result<ProblemSpec> {
    let x_cone = wp.x_cone()?;
    let (_, c) = bcp.linear_cost()?;
    let vertices = dual_vertices(wp, bcp)?;
    let form = RunningCostForm::MaxLinear {
        w: vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
        c: vec![c; vertices.len()],
    };
    let upper = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max) + c;
    // Lower slope from the cost per unit length along generators and
    // seeded interior samples, halved for margin.
    let probe = RunningCost::new(form.clone(), 1.0, [1.0, 1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(0x3017);
    let mut slope = f64::INFINITY;
    let mut points = x_cone.generators().to_vec();
    points.extend((0..500).map(|_| x_cone.sample_point(&mut rng, 1.0)));
    for x in points.iter().filter(|x| x.norm() > 1e-9) {
        slope = slope.min((probe.eval(x.as_slice()) - c) / x.norm());
    }
    let c1 = (0.5 * slope).max(1e-9);
    let running_cost = RunningCost::new(form, 1.0, [c1, 1.0, upper.max(1e-9)]);
    let spec = ProblemSpec {
        x_cone,
        y_cone: ConeSpec::orthant(bcp.p()),
        g: wp.g.clone(),
        b: wp.b.clone(),
        sigma: wp.sigma.clone(),
        beta: bcp.beta,
        running_cost,
        push_cost: PushCost::linear(bcp.h.as_slice().to_vec()),
        conditions: DeclaredConditions::default(),
    };
    spec.check_shapes()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bcp(r: &[&[f64]], k: &[&[f64]], w: &[f64], h: &[f64]) -> BcpSpec {
        let rows = |a: &[&[f64]]| a.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let m = r.len();
        let text = json!({
            "R": rows(r),
            "K": rows(k),
            "cost": {"form": "linear", "w": w, "c": 0.0},
            "h": h,
            "b": vec![0.0; m],
            "Sigma": vec![vec![0.0; m]; m],
        });
        BcpSpec::from_json(&text.to_string()).unwrap()
    }

    #[test]
    fn single_server() {
        let s = bcp(&[&[1.0]], &[&[1.0]], &[1.0], &[0.5]);
        let wp = reduce(&s, false).unwrap();
        assert_eq!((wp.k(), wp.q()), (1, 0));
        assert_abs_diff_eq!(wp.m_mat[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wp.g[(0, 0)], 1.0, epsilon = 1e-12);
        let spec = lift_problem(&wp, &s).unwrap();
        assert_eq!(spec.k(), 1);
        assert_abs_diff_eq!(spec.running_cost.eval(&[3.0]), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn two_queues_one_server() {
        let s = bcp(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[1.0, 1.0]], &[1.0, 2.0], &[1.0]);
        let wp = reduce(&s, true).unwrap();
        let r2 = 0.5f64.sqrt();
        assert_eq!(wp.k(), 1);
        assert_abs_diff_eq!(wp.m_mat[(0, 0)], r2, epsilon = 1e-12);
        assert_abs_diff_eq!(wp.m_mat[(0, 1)], r2, epsilon = 1e-12);
        assert_abs_diff_eq!(wp.g[(0, 0)], r2, epsilon = 1e-12);
        assert_eq!(wp.nonneg, NonnegBasis::AlreadyNonnegative);
        // z₁ + z₂ = √2·x, cheapest on the first queue.
        let (v, z) = effective_cost(&wp, &s, &DVector::from_element(1, 1.5)).unwrap();
        assert_abs_diff_eq!(v, 1.5 * 2f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(z[0], 1.5 * 2f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn identity_capacity_keeps_dimension() {
        let s = bcp(&[&[1.0, 0.5], &[0.0, 1.0]], &[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0], &[0.0, 0.0]);
        let wp = reduce(&s, false).unwrap();
        assert_eq!((wp.k(), wp.q()), (2, 0));
        assert_abs_diff_eq!((&wp.m_mat - DMatrix::identity(2, 2)).amax(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((&wp.g - &s.r).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_capacity() {
        let text = json!({
            "R": [[1.0, 0.0], [0.0, 1.0]],
            "K": [[1.0, 1.0], [2.0, 2.0]],
            "cost": {"form": "linear", "w": [1.0, 1.0], "c": 0.0},
            "h": [0.0, 0.0], "b": [0.0, 0.0], "Sigma": [[0.0, 0.0], [0.0, 0.0]],
        });
        let err = BcpSpec::from_json(&text.to_string()).unwrap_err();
        assert!(err.to_string().contains("rank"), "{err}");
    }

    #[test]
    fn negative_workload_is_infeasible() {
        let s = bcp(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[1.0, 1.0]], &[1.0, 2.0], &[1.0]);
        let wp = reduce(&s, false).unwrap();
        assert!(matches!(
            effective_cost(&wp, &s, &DVector::from_element(1, -1.0)),
            Err(Error::Infeasible(_))
        ));
        let (v, z) = effective_cost(&wp, &s, &DVector::zeros(1)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn rebases_to_nonnegative_rows() {
        // ker K = span(1, −1, 0) and R = I, so M spans {x : x₁ = x₂}ᵀ rows.
        let s = bcp(
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
            &[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
            &[1.0, 1.0, 1.0],
            &[0.0, 0.0],
        );
        let mut wp = reduce(&s, true).unwrap();
        assert!(wp.m_mat.iter().all(|&v| v >= 0.0));
        // A rotated basis of the same space must be rebased.
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        wp.m_mat = &rot * &wp.m_mat;
        assert!(wp.m_mat.iter().any(|&v| v < -0.1));
        let rebased = nonneg_rebase(&wp.m_mat).unwrap();
        assert!(rebased.iter().all(|&v| v >= 0.0));
        assert_eq!(rank(&rebased, RANK_TOL), 2);
    }
}
