use serde::{Deserialize, Serialize};

use super::maps::MapSpec;
use super::probs::ProbabilityField;
use crate::error::{Error, Result};
use crate::geometry::OpenSet;
use crate::point::Point;

/// The triple `(R^d, h_i, p_i)`. Immutable once built; maps are indexed `0..k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsSystem {
    dim: usize,
    maps: Vec<MapSpec>,
    probs: ProbabilityField,
    declared_domain: Option<OpenSet>,
}

impl IfsSystem {
    pub fn new(maps: Vec<MapSpec>, probs: ProbabilityField) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidMap("a system needs at least one map".into()))?;
        let dim = first.dim();
        if let Some(bad) = maps.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        if probs.k() != maps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} maps but {} probabilities",
                maps.len(),
                probs.k()
            )));
        }
        Ok(IfsSystem {
            dim,
            maps,
            probs,
            declared_domain: None,
        })
    }

    pub fn with_domain(mut self, domain: OpenSet) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: domain.dim(),
            });
        }
        self.declared_domain = Some(domain);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[MapSpec] {
        &self.maps
    }

    pub fn probs(&self) -> &ProbabilityField {
        &self.probs
    }

    pub fn declared_domain(&self) -> Option<&OpenSet> {
        self.declared_domain.as_ref()
    }

    pub fn map(&self, i: usize) -> Result<&MapSpec> {
        self.maps.get(i).ok_or(Error::OutOfRangeSymbol {
            index: i,
            k: self.maps.len(),
        })
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinitePoint(x.to_vec()));
        }
        Ok(())
    }

    /// `h_i(x)`.
    pub fn eval_map(&self, i: usize, x: &Point) -> Result<Point> {
        let map = self.map(i)?;
        self.check_point(x.coords())?;
        let mut out = vec![0.0; self.dim];
        map.apply(x.coords(), &mut out);
        Point::new(out)
    }

    /// Unchecked hot-path evaluation of `h_i(x)` into `out`.
    #[inline]
    pub fn apply_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.maps[i].apply(x, out);
    }

    /// `||Dh_i(x)||`.
    pub fn derivative_norm(&self, i: usize, x: &Point) -> Result<f64> {
        let map = self.map(i)?;
        self.check_point(x.coords())?;
        map.derivative_norm(x.coords())
    }

    /// Upper bound on `sup_z log[d(h_i y, h_i z) / d(y, z)]`.
    pub fn lipschitz_log_bound(&self, i: usize, y: &Point) -> Result<f64> {
        let map = self.map(i)?;
        self.check_point(y.coords())?;
        map.lipschitz_log_bound(y.coords())
    }

    pub fn probability_vector(&self, x: &Point) -> Result<Vec<f64>> {
        self.check_point(x.coords())?;
        Ok(self.probs.eval(x.coords()))
    }

    pub fn is_globally_affine(&self) -> bool {
        self.maps.iter().all(|m| m.affine_parts().is_some())
    }
}
