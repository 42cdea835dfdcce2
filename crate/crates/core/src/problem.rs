//! Problem data: cones, push matrix, Brownian coefficients, costs and
//! discount, with the validation report shared by every consumer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cone::{validate_assumptions, ConeSpec, ConeVectors};
use crate::cost::{PushCost, RunningCost};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::skorohod::SkorohodMap;

/// Threshold for `û₁·b > 0` when `Σ` is singular.
pub const DRIFT_TOL: f64 = 1e-9;
/// Margins in `(DRIFT_TOL, DRIFT_WARN]` pass but draw a warning.
pub const DRIFT_WARN: f64 = 1e-6;

/// Conditions a spec author may declare; the computed checks take
/// precedence and a disagreement produces a warning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConditions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nondegenerate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercive_push: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemJson {
    #[serde(rename = "X")]
    x: ConeSpec,
    #[serde(rename = "Y")]
    y: ConeSpec,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    beta: f64,
    running_cost: RunningCost,
    push_cost: PushCost,
    #[serde(default)]
    conditions: DeclaredConditions,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidSpec(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// The singular control problem on a cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct ProblemSpec {
    pub x_cone: ConeSpec,
    pub y_cone: ConeSpec,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: f64,
    pub running_cost: RunningCost,
    pub push_cost: PushCost,
    pub conditions: DeclaredConditions,
}

impl TryFrom<ProblemJson> for ProblemSpec {
    type Error = Error;

    fn try_from(j: ProblemJson) -> Result<Self> {
        let spec = ProblemSpec {
            x_cone: j.x,
            y_cone: j.y,
            g: matrix_from_rows(&j.g, "G")?,
            b: DVector::from_vec(j.b),
            sigma: matrix_from_rows(&j.sigma, "Sigma")?,
            beta: j.beta,
            running_cost: j.running_cost,
            push_cost: j.push_cost,
            conditions: j.conditions,
        };
        spec.check_shapes()?;
        Ok(spec)
    }
}

impl From<ProblemSpec> for ProblemJson {
    fn from(s: ProblemSpec) -> Self {
        ProblemJson {
            x: s.x_cone,
            y: s.y_cone,
            g: matrix_to_rows(&s.g),
            b: s.b.as_slice().to_vec(),
            sigma: matrix_to_rows(&s.sigma),
            beta: s.beta,
            running_cost: s.running_cost,
            push_cost: s.push_cost,
            conditions: s.conditions,
        }
    }
}

impl ProblemSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Compact JSON with fixed field order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialises")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }

    pub fn k(&self) -> usize {
        self.x_cone.dim()
    }

    pub fn p(&self) -> usize {
        self.y_cone.dim()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (k, p) = (self.k(), self.p());
        if self.g.nrows() != k || self.g.ncols() != p {
            return Err(Error::InvalidSpec(format!(
                "G is {}×{} but the cones need {k}×{p}",
                self.g.nrows(),
                self.g.ncols()
            )));
        }
        check_dim(k, self.b.len())?;
        if self.sigma.nrows() != k || self.sigma.ncols() != k {
            return Err(Error::InvalidSpec(format!("Sigma must be {k}×{k}")));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec("beta must be positive".into()));
        }
        let finite = self.g.iter().chain(self.b.iter()).chain(self.sigma.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        linalg::psd_cholesky(&self.sigma, 1e-12)?;
        Ok(())
    }

    /// Full validation: shapes, cone assumptions, cost forms, and the two
    /// conditions that govern uniqueness.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.check_shapes()?;
        let vectors = validate_assumptions(&self.x_cone, &self.y_cone, &self.g)?;
        self.running_cost.validate(&self.x_cone)?;
        self.push_cost.validate(&self.y_cone)?;
        let kappa_hat = SkorohodMap::new(&self.x_cone, &vectors.u0_hat)?.kappa_hat();
        let mut warnings = Vec::new();

        let eig_min = self.sigma.clone().symmetric_eigen().eigenvalues.min();
        let scale = self.sigma.abs().max().max(1.0);
        let sigma_nondegenerate = eig_min > 1e-10 * scale;
        let drift = vectors.u1_hat.dot(&self.b);
        let nondegeneracy = if sigma_nondegenerate {
            ConditionReport::new(true, format!("Sigma nondegenerate (smallest eigenvalue {eig_min:.6e})"))
        } else {
            if drift > DRIFT_TOL && drift <= DRIFT_WARN {
                warnings.push(format!("û1·b = {drift:e} is positive but within the warning band"));
            }
            ConditionReport::new(
                drift > DRIFT_TOL,
                format!("Sigma singular; û1·b = {drift:.6e} (threshold {DRIFT_TOL:e})"),
            )
        };
        if !nondegeneracy.holds {
            warnings.push("Sigma is singular and û1·b ≤ 0: uniqueness is not guaranteed".into());
        }

        let certified_c_h = self.push_cost.certified_lower_bound(&self.y_cone);
        let push_coercivity = ConditionReport::new(
            certified_c_h > 0.0,
            format!("certified h(y) ≥ c_h|y| with c_h = {certified_c_h:.6e}"),
        );
        if !push_coercivity.holds {
            warnings.push("push cost is not bounded below by c_h|y| with c_h > 0".into());
        }
        for (declared, computed, name) in [
            (self.conditions.nondegenerate, nondegeneracy.holds, "nondegenerate"),
            (self.conditions.coercive_push, push_coercivity.holds, "coercive_push"),
        ] {
            if let Some(d) = declared {
                if d != computed {
                    warnings.push(format!("declared {name} = {d} but the check gives {computed}"));
                }
            }
        }

        let m_ell = self.running_cost.m_ell;
        let uniqueness = UniquenessClass::classify(nondegeneracy.holds, push_coercivity.holds, m_ell);
        let uniqueness_caveat = uniqueness != UniquenessClass::UniquePolynomial;
        if uniqueness_caveat {
            warnings.push(uniqueness.caveat().to_string());
        }
        Ok(ValidationReport {
            vectors,
            kappa_hat,
            nondegeneracy,
            push_coercivity,
            certified_c_h,
            uniqueness,
            uniqueness_caveat,
            warnings,
        })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub detail: String,
}

impl ConditionReport {
    fn new(holds: bool, detail: String) -> Self {
        Self { holds, detail }
    }
}

/// What the theory guarantees about the HJB solution set for this data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessClass {
    /// Nondegeneracy fails: no uniqueness statement applies.
    NotGuaranteed,
    /// Unique among nonnegative solutions of polynomial growth.
    UniquePolynomial,
    /// Unique only among polynomial-growth solutions with compact level sets.
    UniqueCompactLevelSets,
    /// `m_ℓ = 0` without coercive push cost: the value is the maximal solution.
    Maximal,
}

impl UniquenessClass {
    pub fn classify(nondegenerate: bool, coercive_push: bool, m_ell: f64) -> Self {
        if !nondegenerate {
            UniquenessClass::NotGuaranteed
        } else if coercive_push {
            UniquenessClass::UniquePolynomial
        } else if m_ell > 0.0 {
            UniquenessClass::UniqueCompactLevelSets
        } else {
            UniquenessClass::Maximal
        }
    }

    pub fn caveat(self) -> &'static str {
        match self {
            UniquenessClass::NotGuaranteed => "uniqueness not guaranteed: the solver may select one of several solutions",
            UniquenessClass::UniquePolynomial => "unique among polynomial-growth solutions",
            UniquenessClass::UniqueCompactLevelSets => {
                "unique only among solutions with compact level sets; bounded solutions such as constants may also solve"
            }
            UniquenessClass::Maximal => "the value function is the maximal solution; smaller solutions may exist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub vectors: ConeVectors,
    pub kappa_hat: f64,
    pub nondegeneracy: ConditionReport,
    pub push_coercivity: ConditionReport,
    pub certified_c_h: f64,
    pub uniqueness: UniquenessClass,
    pub uniqueness_caveat: bool,
    pub warnings: Vec<String>,
}
