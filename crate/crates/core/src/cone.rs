//! Polyhedral cones and the geometric primitives built on them.
//!
//! A [`ConeSpec`] carries both a generator list and inward unit facet normals.
//! The projection along `û₀` onto the boundary, the exit scalar `γ_r` and
//! the linear lift `ϱ` from push directions back to controls all live here.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Assumption, Error, Result};
use crate::linalg::{self, RANK_TOL};

/// Default tolerance for every geometric membership test.
pub const TOL_GEOM: f64 = 1e-9;

/// Number of random unit directions tried when searching for `û₀`, `û₁`, `ŷ₁`.
pub const SPHERE_SAMPLES: usize = 1000;

const SEARCH_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConeJson {
    dim: usize,
    generators: Vec<Vec<f64>>,
    facet_normals: Vec<Vec<f64>>,
}

/// Closed convex polyhedral cone with nonempty interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeJson", into = "ConeJson")]
pub struct ConeSpec {
    dim: usize,
    generators: Vec<DVector<f64>>,
    normals: Vec<DVector<f64>>,
}

impl TryFrom<ConeJson> for ConeSpec {
    type Error = Error;

    fn try_from(j: ConeJson) -> Result<Self> {
        let gens = j.generators.into_iter().map(DVector::from_vec).collect();
        let normals = j.facet_normals.into_iter().map(DVector::from_vec).collect();
        ConeSpec::new(j.dim, gens, normals)
    }
}

impl From<ConeSpec> for ConeJson {
    fn from(c: ConeSpec) -> Self {
        ConeJson {
            dim: c.dim,
            generators: c.generators.iter().map(|g| g.as_slice().to_vec()).collect(),
            facet_normals: c.normals.iter().map(|n| n.as_slice().to_vec()).collect(),
        }
    }
}

impl ConeSpec {
    /// Builds a cone from both representations. Normals are rescaled to unit
    /// length; the representations must agree and the cone must have interior.
    pub fn new(dim: usize, generators: Vec<DVector<f64>>, normals: Vec<DVector<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateCone("dimension must be positive".into()));
        }
        if generators.is_empty() {
            return Err(Error::DegenerateCone("no generators".into()));
        }
        for g in &generators {
            check_dim(dim, g.len())?;
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::DegenerateCone("non-finite generator".into()));
            }
        }
        let mut unit_normals = Vec::with_capacity(normals.len());
        for n in normals {
            check_dim(dim, n.len())?;
            let norm = n.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::DegenerateCone("zero or non-finite facet normal".into()));
            }
            unit_normals.push(n / norm);
        }
        for g in &generators {
            for n in &unit_normals {
                if n.dot(g) < -TOL_GEOM * g.norm().max(1.0) {
                    return Err(Error::DegenerateCone(format!(
                        "generator {:?} violates facet normal {:?}",
                        g.as_slice(),
                        n.as_slice()
                    )));
                }
            }
        }
        let cone = Self {
            dim,
            generators,
            normals: unit_normals,
        };
        let probe = cone.generator_mean();
        let margin = cone.margin(&probe);
        if !(margin > TOL_GEOM) {
            return Err(Error::DegenerateCone(format!(
                "no interior point found (margin {margin:e})"
            )));
        }
        Ok(cone)
    }

    /// The nonnegative orthant `ℝ₊^d`.
    pub fn orthant(dim: usize) -> Self {
        let basis: Vec<DVector<f64>> = (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        Self::new(dim, basis.clone(), basis).expect("orthant is a valid cone")
    }

    /// Cone generated by `generators`, with facet normals found by brute-force
    /// enumeration over `(dim−1)`-subsets. Intended for the small dimensions
    /// this crate targets (at most a handful of generators).
    pub fn from_generators(dim: usize, generators: Vec<DVector<f64>>) -> Result<Self> {
        let mut gens: Vec<DVector<f64>> = Vec::new();
        for g in generators {
            check_dim(dim, g.len())?;
            let norm = g.norm();
            if norm <= TOL_GEOM {
                continue;
            }
            let unit = &g / norm;
            if !gens.iter().any(|h| (h - &unit).norm() < 1e-12) {
                gens.push(unit);
            }
        }
        if gens.is_empty() {
            return Err(Error::DegenerateCone("all generators vanish".into()));
        }
        let normals = facet_normals(dim, &gens);
        Self::new(dim, gens, normals)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    pub fn facet_normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    /// `min_n n·x`; nonnegative exactly on the cone.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.normals.iter().map(|n| n.dot(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn margin_slice(&self, x: &[f64]) -> f64 {
        self.normals
            .iter()
            .map(|n| n.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership up to `tol` on every facet.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.margin(x) >= -tol)
    }

    /// Normalised mean of the unit generators, an interior point when the
    /// generators include all extreme rays.
    pub fn generator_mean(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.dim);
        for g in &self.generators {
            let n = g.norm();
            if n > 0.0 {
                s += g / n;
            }
        }
        let n = s.norm();
        if n > 0.0 {
            s / n
        } else {
            s
        }
    }

    /// Image `G·C` of the cone under a linear map.
    pub fn image(&self, g: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.dim, g.ncols())?;
        let gens = self.generators.iter().map(|y| g * y).collect();
        Self::from_generators(g.nrows(), gens)
    }

    /// Random point of the cone: a nonnegative combination of generators with
    /// its norm spread over several orders of magnitude.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, max_norm: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim);
        for g in &self.generators {
            let w: f64 = rng.random::<f64>();
            x += g * (w * w);
        }
        let n = x.norm();
        if n == 0.0 {
            return x;
        }
        let radius = max_norm * rng.random::<f64>().powi(2);
        x * (radius / n)
    }
}

fn facet_normals(dim: usize, gens: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if dim == 1 {
        let pos = gens.iter().any(|g| g[0] > 0.0);
        let neg = gens.iter().any(|g| g[0] < 0.0);
        return match (pos, neg) {
            (true, false) => vec![DVector::from_element(1, 1.0)],
            (false, true) => vec![DVector::from_element(1, -1.0)],
            _ => Vec::new(),
        };
    }
    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut subset = Vec::with_capacity(dim - 1);
    combinations(gens.len(), dim - 1, &mut subset, 0, &mut |idx| {
        let mut a = DMatrix::<f64>::zeros(dim - 1, dim);
        for (r, &i) in idx.iter().enumerate() {
            a.set_row(r, &gens[i].transpose());
        }
        let ns = linalg::null_space(&a, RANK_TOL);
        if ns.ncols() != 1 {
            return;
        }
        let mut n: DVector<f64> = ns.column(0).into_owned();
        let total: f64 = gens.iter().map(|g| n.dot(g)).sum();
        if total < 0.0 {
            n = -n;
        }
        if gens.iter().all(|g| n.dot(g) >= -1e-12) && !normals.iter().any(|m| (m - &n).norm() < 1e-9) {
            normals.push(n);
        }
    });
    normals
}

fn combinations(n: usize, k: usize, cur: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, k, cur, i + 1, f);
        cur.pop();
    }
}

/// Fixed vectors of the standing assumptions: `û₀` strictly inside both the
/// push cone and the state cone with `G·ŷ₀ = û₀`, and the growth direction
/// `û₁` (and `ŷ₁` for controls) with margin `a₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeVectors {
    #[serde(with = "crate::linalg::serde_vector")]
    pub u0_hat: DVector<f64>,
    #[serde(with = "crate::linalg::serde_vector")]
    pub y0_hat: DVector<f64>,
    #[serde(with = "crate::linalg::serde_vector")]
    pub u1_hat: DVector<f64>,
    #[serde(with = "crate::linalg::serde_vector")]
    pub y1_hat: DVector<f64>,
    pub a0: f64,
}

/// Maximises `min_i rows_i · u` over unit vectors `u`.
///
/// Tries the supplied candidates, a seeded sample of the unit sphere, and a
/// shrinking pattern search from the best point. Improvements below `1e-12`
/// are ignored so exact candidates are not perturbed by rounding.
pub fn best_unit_direction(dim: usize, rows: &[DVector<f64>], candidates: &[DVector<f64>]) -> (DVector<f64>, f64) {
    let score = |u: &DVector<f64>| rows.iter().map(|r| r.dot(u)).fold(f64::INFINITY, f64::min);
    let mut best = DVector::from_element(dim, 0.0);
    best[0] = 1.0;
    let mut best_score = f64::NEG_INFINITY;
    let consider = |u: DVector<f64>, best: &mut DVector<f64>, best_score: &mut f64| {
        let n = u.norm();
        if !(n > 0.0) || !n.is_finite() {
            return;
        }
        let u = u / n;
        let s = score(&u);
        if s > *best_score + 1e-12 {
            *best_score = s;
            *best = u;
        }
    };
    for c in candidates {
        consider(c.clone(), &mut best, &mut best_score);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEARCH_SEED);
    for _ in 0..SPHERE_SAMPLES {
        let u = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        consider(u, &mut best, &mut best_score);
    }
    let mut step = 0.25;
    while step > 1e-9 {
        let mut improved = false;
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut u = best.clone();
                u[j] += sign * step;
                let before = best_score;
                consider(u, &mut best, &mut best_score);
                improved |= best_score > before;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_score)
}

fn unit_rows(vs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    vs.iter().filter(|v| v.norm() > 0.0).map(|v| v / v.norm()).collect()
}

fn normalized_sum(vs: &[DVector<f64>], dim: usize) -> DVector<f64> {
    let mut s = DVector::zeros(dim);
    for v in vs {
        s += v;
    }
    s
}

/// Checks the interior-push and growth assumptions for state cone `x`,
/// control cone `y` and push matrix `g` (k×p), returning the fixed vectors.
pub fn validate_assumptions(x: &ConeSpec, y: &ConeSpec, g: &DMatrix<f64>) -> Result<ConeVectors> {
    let k = x.dim();
    let p = y.dim();
    if g.nrows() != k || g.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: k * p,
            got: g.nrows() * g.ncols(),
        });
    }
    if k > p || linalg::rank(g, RANK_TOL) != k {
        return Err(Error::AssumptionViolated {
            which: Assumption::Rank,
            detail: format!("G must have rank k = {k} with k ≤ p = {p}"),
        });
    }
    let u = y.image(g).map_err(|e| Error::AssumptionViolated {
        which: Assumption::Rank,
        detail: format!("push cone G·Y is degenerate: {e}"),
    })?;

    // û₀: deepest unit vector inside both U and X.
    let mut interior_rows: Vec<DVector<f64>> = u.facet_normals().to_vec();
    interior_rows.extend(x.facet_normals().iter().cloned());
    let cands = vec![
        normalized_sum(&interior_rows, k),
        normalized_sum(u.facet_normals(), k),
        normalized_sum(x.facet_normals(), k),
        u.generator_mean(),
        x.generator_mean(),
        u.generator_mean() + x.generator_mean(),
    ];
    let (u0_hat, depth) = best_unit_direction(k, &interior_rows, &cands);
    if !(depth > TOL_GEOM) {
        return Err(Error::AssumptionViolated {
            which: Assumption::InteriorPush,
            detail: format!("best interior margin {depth:e}"),
        });
    }

    let y0_hat = lift_into(y, g, &u0_hat)?;

    // û₁ shared by U and X, ŷ₁ for Y.
    let u_rows = unit_rows(u.generators());
    let x_rows = unit_rows(x.generators());
    let mut ux_rows = u_rows.clone();
    ux_rows.extend(x_rows.iter().cloned());
    let mut cands = vec![
        normalized_sum(&interior_rows, k),
        normalized_sum(x.facet_normals(), k),
        normalized_sum(u.facet_normals(), k),
        normalized_sum(&ux_rows, k),
    ];
    cands.push(u0_hat.clone());
    let (u1_hat, a_ux) = best_unit_direction(k, &ux_rows, &cands);
    if !(a_ux > TOL_GEOM) {
        let (_, a_u) = best_unit_direction(k, &u_rows, &cands);
        let which = if a_u > TOL_GEOM {
            Assumption::GrowthState
        } else {
            Assumption::GrowthPush
        };
        return Err(Error::AssumptionViolated {
            which,
            detail: format!("best growth margin {a_ux:e}"),
        });
    }
    let y_rows = unit_rows(y.generators());
    let y_cands = vec![
        normalized_sum(y.facet_normals(), p),
        normalized_sum(&y_rows, p),
        y.generator_mean(),
    ];
    let (y1_hat, a_y) = best_unit_direction(p, &y_rows, &y_cands);
    if !(a_y > TOL_GEOM) {
        return Err(Error::AssumptionViolated {
            which: Assumption::GrowthControl,
            detail: format!("best growth margin {a_y:e}"),
        });
    }
    Ok(ConeVectors {
        u0_hat,
        y0_hat,
        u1_hat,
        y1_hat,
        a0: a_ux.min(a_y),
    })
}

/// Finds `y ∈ Y` with `G y = u` for `u` in the push cone: least squares
/// first, then a nonnegative combination of generators when the
/// least-squares answer leaves `Y`.
pub fn lift_into(y: &ConeSpec, g: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    let ls = linalg::pinv(g) * u;
    let scale = ls.norm().max(1.0);
    if y.margin(&ls) >= -TOL_GEOM * scale && (g * &ls - u).norm() <= TOL_GEOM * scale {
        return Ok(ls);
    }
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = y.generators().iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let images: Vec<DVector<f64>> = y.generators().iter().map(|gen| g * gen).collect();
    for row in 0..g.nrows() {
        let mut e = LinearExpr::empty();
        for (v, im) in vars.iter().zip(&images) {
            e.add(*v, im[row]);
        }
        lp.add_constraint(e, ComparisonOp::Eq, u[row]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::NotInCone(format!("no control maps onto {:?}: {e}", u.as_slice())))?;
    let mut out = DVector::zeros(y.dim());
    for (v, gen) in vars.iter().zip(y.generators()) {
        out += gen * *sol.var_value(*v);
    }
    Ok(out)
}

/// Projection onto `∂X` along `û₀`, `π(ξ) = ξ + α(ξ)û₀` with
/// `α(ξ) = max_n (−ξ·n)/(û₀·n)` over the facet normals.
#[derive(Debug, Clone)]
pub struct Projector {
    normals: Vec<DVector<f64>>,
    inv_depth: Vec<f64>,
    u0_hat: DVector<f64>,
}

impl Projector {
    pub fn new(x: &ConeSpec, u0_hat: &DVector<f64>) -> Result<Self> {
        check_dim(x.dim(), u0_hat.len())?;
        if x.facet_normals().is_empty() {
            return Err(Error::DegenerateCone("cone has no facets".into()));
        }
        let mut inv_depth = Vec::with_capacity(x.facet_normals().len());
        for n in x.facet_normals() {
            let d = n.dot(u0_hat);
            if !(d > 0.0) {
                return Err(Error::DegenerateCone(format!(
                    "û0 is not interior: n·û0 = {d:e} for n = {:?}",
                    n.as_slice()
                )));
            }
            inv_depth.push(1.0 / d);
        }
        Ok(Self {
            normals: x.facet_normals().to_vec(),
            inv_depth,
            u0_hat: u0_hat.clone(),
        })
    }

    pub fn u0_hat(&self) -> &DVector<f64> {
        &self.u0_hat
    }

    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    /// `1/(û₀·n)` per facet.
    pub fn inv_depths(&self) -> &[f64] {
        &self.inv_depth
    }

    pub fn alpha(&self, xi: &[f64]) -> f64 {
        self.normals
            .iter()
            .zip(&self.inv_depth)
            .map(|(n, w)| -n.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() * w)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn project(&self, xi: &DVector<f64>) -> (f64, DVector<f64>) {
        let a = self.alpha(xi.as_slice());
        (a, xi + &self.u0_hat * a)
    }

    /// Lipschitz constant of `α`: `max_n 1/(û₀·n)` for unit normals.
    pub fn lipschitz(&self) -> f64 {
        self.inv_depth.iter().copied().fold(0.0, f64::max)
    }
}

/// `(α(ξ), π(ξ))` for a single point.
pub fn alpha_projection(x: &ConeSpec, u0_hat: &DVector<f64>, xi: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    check_dim(x.dim(), xi.len())?;
    Ok(Projector::new(x, u0_hat)?.project(xi))
}

/// Step length `ρ` at which `x + ρv` reaches the truncation surface
/// `{ξ : ξ·û₁ = r}`.
pub fn gamma_r(x: &DVector<f64>, v: &DVector<f64>, r: f64, u1_hat: &DVector<f64>) -> Result<f64> {
    check_dim(x.len(), v.len())?;
    check_dim(x.len(), u1_hat.len())?;
    let rate = v.dot(u1_hat);
    if !(rate > 0.0) {
        return Err(Error::NoExit);
    }
    Ok((r - x.dot(u1_hat)) / rate)
}

/// Linear map `ϱ` on `cone(u₁..u_k)` sending each `uᵢ` to a control
/// `yᵢ ∈ Y` with `G yᵢ = uᵢ`.
#[derive(Debug, Clone)]
pub struct RhoMap {
    u_inverse: DMatrix<f64>,
    y_basis: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

impl RhoMap {
    pub fn new(
        u_cone: &ConeSpec,
        y_cone: &ConeSpec,
        g: &DMatrix<f64>,
        u_basis: &[DVector<f64>],
        y_basis: &[DVector<f64>],
    ) -> Result<Self> {
        let k = g.nrows();
        let p = g.ncols();
        if u_basis.len() != k || y_basis.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: u_basis.len().min(y_basis.len()),
            });
        }
        for (u, y) in u_basis.iter().zip(y_basis) {
            check_dim(k, u.len())?;
            check_dim(p, y.len())?;
            if !u_cone.contains(u, TOL_GEOM)? {
                return Err(Error::NotInCone(format!("basis vector {:?} not in U", u.as_slice())));
            }
            if !y_cone.contains(y, TOL_GEOM)? {
                return Err(Error::NotInCone(format!("lift {:?} not in Y", y.as_slice())));
            }
            if (g * y - u).norm() > TOL_GEOM * u.norm().max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "G·y ≠ u for u = {:?}",
                    u.as_slice()
                )));
            }
        }
        let u_mat = linalg::columns_to_matrix(k, u_basis);
        let y_mat = linalg::columns_to_matrix(p, y_basis);
        let u_inverse = u_mat
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("u_basis is not linearly independent".into()))?;
        let matrix = &y_mat * &u_inverse;
        Ok(Self {
            u_inverse,
            y_basis: y_mat,
            matrix,
        })
    }

    /// Basis coordinates of `u`; all must be nonnegative for `u` in the cone.
    pub fn coordinates(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.u_inverse * u
    }

    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.u_inverse.ncols(), u.len())?;
        let alpha = self.coordinates(u);
        let scale = u.norm().max(1.0);
        if alpha.iter().any(|&a| a < -TOL_GEOM * scale) {
            return Err(Error::NotInCone(format!(
                "coordinates {:?} are not nonnegative",
                alpha.as_slice()
            )));
        }
        Ok(&self.y_basis * alpha)
    }

    /// Spectral norm `|ϱ|`.
    pub fn operator_norm(&self) -> f64 {
        linalg::singular_values(&self.matrix).first().copied().unwrap_or(0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn membership_examples() {
        let q = ConeSpec::orthant(2);
        assert!(q.contains(&v(&[1.0, 1.0]), 1e-12).unwrap());
        assert!(!q.contains(&v(&[-1.0, 1.0]), 1e-12).unwrap());
        assert!(ConeSpec::orthant(1).contains(&v(&[0.0]), 1e-12).unwrap());
        assert!(matches!(
            q.contains(&v(&[1.0]), 1e-12),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_cones() {
        // A ray in the plane has no interior.
        let ray = ConeSpec::new(2, vec![v(&[1.0, 0.0])], vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0])]);
        assert!(matches!(ray, Err(Error::DegenerateCone(_))));
        let inconsistent = ConeSpec::new(1, vec![v(&[-1.0])], vec![v(&[1.0])]);
        assert!(inconsistent.is_err());
    }

    #[test]
    fn facet_enumeration_recovers_wedge() {
        let c = ConeSpec::from_generators(2, vec![v(&[1.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert_eq!(c.facet_normals().len(), 2);
        assert!(c.contains(&v(&[2.0, 1.0]), 1e-12).unwrap());
        assert!(!c.contains(&v(&[1.0, 2.0]), 1e-12).unwrap());
        assert!(!c.contains(&v(&[1.0, -0.1]), 1e-12).unwrap());
    }

    #[test]
    fn one_dimensional_assumptions() {
        let h = ConeSpec::orthant(1);
        let g = DMatrix::from_element(1, 1, 1.0);
        let cv = validate_assumptions(&h, &h, &g).unwrap();
        assert_eq!(cv.u0_hat[0], 1.0);
        assert_eq!(cv.y0_hat[0], 1.0);
        assert_eq!(cv.u1_hat[0], 1.0);
        assert_eq!(cv.y1_hat[0], 1.0);
        assert!((cv.a0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthant_growth_direction() {
        let q = ConeSpec::orthant(2);
        let cv = validate_assumptions(&q, &q, &DMatrix::identity(2, 2)).unwrap();
        let d = v(&[1.0, 1.0]) / SQRT_2;
        assert!((&cv.u1_hat - &d).norm() < 1e-9);
        assert!((cv.a0 - 1.0 / SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn disjoint_push_cone_is_rejected() {
        let q = ConeSpec::orthant(2);
        let g = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        match validate_assumptions(&q, &q, &g) {
            Err(Error::AssumptionViolated { which, .. }) => assert_eq!(which, Assumption::InteriorPush),
            other => panic!("unexpected {other:?}"),
        }
        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match validate_assumptions(&q, &q, &flat) {
            Err(Error::AssumptionViolated { which, .. }) => assert_eq!(which, Assumption::Rank),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_projection_examples() {
        let h = ConeSpec::orthant(1);
        let (a, p) = alpha_projection(&h, &v(&[1.0]), &v(&[-3.0])).unwrap();
        assert_eq!(a, 3.0);
        assert_eq!(p[0], 0.0);

        let q = ConeSpec::orthant(2);
        let u0 = v(&[1.0, 1.0]) / SQRT_2;
        let (a, p) = alpha_projection(&q, &u0, &v(&[-1.0, 2.0])).unwrap();
        assert!((a - SQRT_2).abs() < 1e-12);
        assert!((p - v(&[0.0, 3.0])).norm() < 1e-12);

        // Line-search oracle: bisection for the first boundary point along −û₀.
        let xi = v(&[2.0, 3.0]);
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q.margin(&(&xi - &u0 * mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, p) = alpha_projection(&q, &u0, &xi).unwrap();
        assert!((a + lo).abs() < 1e-9);
        assert!((a + 2.0 * SQRT_2).abs() < 1e-12);
        assert!((p - v(&[0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn projector_rejects_boundary_direction() {
        let q = ConeSpec::orthant(2);
        assert!(matches!(
            Projector::new(&q, &v(&[1.0, 0.0])),
            Err(Error::DegenerateCone(_))
        ));
    }

    #[test]
    fn gamma_r_examples() {
        let one = v(&[1.0]);
        assert_eq!(gamma_r(&v(&[0.0]), &one, 2.0, &one).unwrap(), 2.0);
        let u1 = v(&[1.0, 1.0]) / SQRT_2;
        let x = &u1 * 2.0;
        let step = &u1 * 1.0;
        let rho = gamma_r(&x, &step, 3.0, &u1).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!(matches!(gamma_r(&v(&[0.5]), &v(&[-1.0]), 1.0, &one), Err(Error::NoExit)));
    }

    #[test]
    fn rho_map_examples() {
        let h = ConeSpec::orthant(1);
        let one = DMatrix::from_element(1, 1, 1.0);
        let rho = RhoMap::new(&h, &h, &one, &[v(&[1.0])], &[v(&[1.0])]).unwrap();
        assert_eq!(rho.apply(&v(&[5.0])).unwrap()[0], 5.0);

        let q = ConeSpec::orthant(2);
        let id = DMatrix::identity(2, 2);
        let e = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let rho = RhoMap::new(&q, &q, &id, &e, &e).unwrap();
        assert_eq!(rho.apply(&v(&[2.0, 3.0])).unwrap(), v(&[2.0, 3.0]));
        assert!(matches!(rho.apply(&v(&[-1.0, 3.0])), Err(Error::NotInCone(_))));

        let g = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y3 = ConeSpec::orthant(3);
        let u_cone = y3.image(&g).unwrap();
        let rho = RhoMap::new(&u_cone, &y3, &g, &e, &[v(&[1.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0])]).unwrap();
        let y = rho.apply(&v(&[4.0, 2.0])).unwrap();
        assert_eq!(y, v(&[4.0, 0.0, 2.0]));
        // Matrix-multiplication oracle.
        let gy = DVector::from_fn(2, |i, _| (0..3).map(|j| g[(i, j)] * y[j]).sum::<f64>());
        assert_eq!(gy, v(&[4.0, 2.0]));
        assert!((rho.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lift_falls_back_to_generators() {
        // Least squares gives a vector with a negative entry; the LP lift must stay in Y.
        let g = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let y = ConeSpec::orthant(2);
        let lifted = lift_into(&y, &g, &v(&[1.0])).unwrap();
        assert!(y.contains(&lifted, 1e-12).unwrap());
        assert!(((&g * &lifted)[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let q = ConeSpec::orthant(2);
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.contains("facet_normals"));
        let back: ConeSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let bad = r#"{"dim":2,"generators":[[1,0]],"facet_normals":[[1,0],[0,1],[0,-1]]}"#;
        assert!(serde_json::from_str::<ConeSpec>(bad).is_err());
    }
}
