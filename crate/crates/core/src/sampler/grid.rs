use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IfsSystem;

/// Histogram of a measure on `[a, b]` plus the mass that left the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub a: f64,
    pub b: f64,
    pub mass: Vec<f64>,
    pub overflow_mass: f64,
}

impl GridMeasure {
    pub fn uniform(a: f64, b: f64, bins: usize) -> Result<Self> {
        GridMeasure::from_mass(a, b, vec![1.0 / bins.max(1) as f64; bins])
    }

    /// Normalizes `mass` to total one.
    pub fn from_mass(a: f64, b: f64, mut mass: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!("bad window [{a}, {b}]")));
        }
        if mass.len() < 2 {
            return Err(Error::InvalidArgument("a grid needs at least 2 bins".into()));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidArgument("bin masses must be nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("grid has no mass".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(GridMeasure {
            a,
            b,
            mass,
            overflow_mass: 0.0,
        })
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.b - self.a) / self.bins() as f64
    }

    pub fn bin_center(&self, j: usize) -> f64 {
        self.a + (j as f64 + 0.5) * self.bin_width()
    }

    /// Bin holding `y`, with `b` itself in the last bin.
    pub fn bin_of(&self, y: f64) -> Option<usize> {
        if !(y >= self.a && y <= self.b) {
            return None;
        }
        Some((((y - self.a) / self.bin_width()) as usize).min(self.bins() - 1))
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.overflow_mass
    }

    /// Mass of the bins lying entirely inside `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let w = self.bin_width();
        (0..self.bins())
            .filter(|&j| {
                let left = self.a + j as f64 * w;
                left >= lo && left + w <= hi
            })
            .map(|j| self.mass[j])
            .sum()
    }

    /// L1 distance of the binned parts plus the overflow difference.
    pub fn l1_distance(&self, other: &GridMeasure) -> Result<f64> {
        if self.bins() != other.bins() || self.a != other.a || self.b != other.b {
            return Err(Error::ShapeMismatch("grids differ".into()));
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            + (self.overflow_mass - other.overflow_mass).abs())
    }
}

/// `n_iters` applications of `F ν = Σ_i h_{i*}(p_i ν)`, pushing each bin's
/// mass forward from its center. Mass leaving the window is added to
/// `overflow_mass` and not followed further.
pub fn transfer_iterate_1d(system: &IfsSystem, init: &GridMeasure, n_iters: usize) -> Result<GridMeasure> {
    if system.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: system.dim(),
        });
    }
    if init.bins() < 2 {
        return Err(Error::InvalidArgument("a grid needs at least 2 bins".into()));
    }
    let k = system.k();
    let bins = init.bins();
    // Every bin maps to the same targets on every iteration.
    let mut targets: Vec<(Option<usize>, f64)> = Vec::with_capacity(bins * k);
    let mut p = vec![0.0; k];
    let mut y = [0.0];
    for j in 0..bins {
        let c = [init.bin_center(j)];
        system.probs().eval_into(&c, &mut p);
        for (i, pi) in p.iter().enumerate() {
            system.apply_into(i, &c, &mut y);
            targets.push((init.bin_of(y[0]), *pi));
        }
    }
    let mut cur = init.clone();
    for _ in 0..n_iters {
        let mut next = vec![0.0; bins];
        let mut overflow = cur.overflow_mass;
        for (j, m) in cur.mass.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            for &(target, pi) in &targets[j * k..(j + 1) * k] {
                match target {
                    Some(t) => next[t] += pi * m,
                    None => overflow += pi * m,
                }
            }
        }
        cur.mass = next;
        cur.overflow_mass = overflow;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MapSpec, ProbabilityField};

    fn cantor() -> IfsSystem {
        IfsSystem::new(
            vec![
                MapSpec::affine_1d(1.0 / 3.0, 0.0),
                MapSpec::affine_1d(1.0 / 3.0, 2.0 / 3.0),
            ],
            ProbabilityField::uniform(2),
        )
        .unwrap()
    }

    #[test]
    fn halving_concentrates_at_zero() {
        let s = IfsSystem::new(vec![MapSpec::affine_1d(0.5, 0.0)], ProbabilityField::uniform(1)).unwrap();
        let g = transfer_iterate_1d(&s, &GridMeasure::uniform(0.0, 1.0, 4096).unwrap(), 60).unwrap();
        assert!(g.mass[0] >= 0.999);
    }

    #[test]
    fn mass_is_conserved_with_overflow() {
        let s = IfsSystem::new(
            vec![MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(2.0, 0.5)],
            ProbabilityField::uniform(2),
        )
        .unwrap();
        let mut g = GridMeasure::uniform(0.0, 1.0, 100).unwrap();
        for _ in 0..5 {
            g = transfer_iterate_1d(&s, &g, 1).unwrap();
            assert!((g.total_mass() - 1.0).abs() < 1e-12);
        }
        assert!(g.overflow_mass > 0.0);
    }

    #[test]
    fn cantor_grid_avoids_middle_third() {
        let s = cantor();
        let g29 = transfer_iterate_1d(&s, &GridMeasure::uniform(0.0, 1.0, 4096).unwrap(), 29).unwrap();
        let g30 = transfer_iterate_1d(&s, &g29, 1).unwrap();
        assert!(g30.l1_distance(&g29).unwrap() < 1e-3);
        assert!(g30.mass_between(1.0 / 3.0, 2.0 / 3.0) < 1e-3);
    }

    #[test]
    fn rejects_two_dimensional_systems() {
        let m = MapSpec::affine_nd(crate::model::Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let s = IfsSystem::new(vec![m], ProbabilityField::uniform(1)).unwrap();
        let g = GridMeasure::uniform(0.0, 1.0, 4).unwrap();
        assert!(matches!(transfer_iterate_1d(&s, &g, 1), Err(Error::DimensionMismatch { .. })));
    }
}
