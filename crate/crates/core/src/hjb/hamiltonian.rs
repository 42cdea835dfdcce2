use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Finite set of push directions `y ∈ Y` with `|Gy| = 1` and their costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHamiltonian {
    pub directions: Vec<DVector<f64>>,
    pub images: Vec<DVector<f64>>,
    pub costs: Vec<f64>,
}

impl DiscreteHamiltonian {
    /// Generators of Y rescaled to `|Gy| = 1`. With `refine`, the rescaled
    /// normalised sum of every generator pair is added as well.
    pub fn new(spec: &ProblemSpec, refine: bool) -> Result<Self> {
        let mut raw: Vec<DVector<f64>> = spec.y_cone.generators().to_vec();
        if refine {
            let gens = spec.y_cone.generators();
            for i in 0..gens.len() {
                for j in (i + 1)..gens.len() {
                    raw.push(&gens[i] / gens[i].norm() + &gens[j] / gens[j].norm());
                }
            }
        }
        let mut directions = Vec::new();
        let mut images = Vec::new();
        let mut costs = Vec::new();
        for y in raw {
            let gy = &spec.g * &y;
            let n = gy.norm();
            if !(n > 1e-12) {
                continue;
            }
            let y = y / n;
            let gy = gy / n;
            if directions.iter().any(|d: &DVector<f64>| (d - &y).norm() < 1e-12) {
                continue;
            }
            costs.push(spec.push_cost.eval(y.as_slice()));
            images.push(gy);
            directions.push(y);
        }
        if directions.is_empty() {
            return Err(Error::InvalidSpec("no push direction with G·y ≠ 0".into()));
        }
        Ok(Self {
            directions,
            images,
            costs,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// `max_j −(G yⱼ·p + h(yⱼ))`.
pub fn hamiltonian(h: &DiscreteHamiltonian, p: &DVector<f64>) -> f64 {
    h.images
        .iter()
        .zip(&h.costs)
        .map(|(gy, c)| -(gy.dot(p) + c))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(images: Vec<Vec<f64>>, costs: Vec<f64>) -> DiscreteHamiltonian {
        let images: Vec<DVector<f64>> = images.into_iter().map(DVector::from_vec).collect();
        DiscreteHamiltonian {
            directions: images.clone(),
            images,
            costs,
        }
    }

    #[test]
    fn examples() {
        let one = table(vec![vec![1.0]], vec![0.0]);
        assert_eq!(hamiltonian(&one, &DVector::from_element(1, 3.0)), -3.0);
        let costly = table(vec![vec![1.0]], vec![2.0]);
        assert_eq!(hamiltonian(&costly, &DVector::from_element(1, -1.0)), -1.0);
        let planar = table(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        let p = DVector::from_column_slice(&[1.0, -2.0]);
        let brute = planar
            .images
            .iter()
            .map(|g| -g.dot(&p))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(hamiltonian(&planar, &p), brute);
        assert_eq!(brute, 2.0);
    }
}
