//! Chaos-game trajectories, empirical measures and the grid transfer
//! operator.

mod grid;
pub mod io;
mod measure;

pub use grid::{transfer_iterate_1d, GridMeasure};
pub use measure::EmpiricalMeasure;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IfsSystem;
use crate::point::Point;
use crate::seed;

pub const DEFAULT_BURN_IN: usize = 10_000;

/// Stored part of an orbit `x_0, x_1, ...` (after burn-in).
///
/// Step `n` applies `symbols[n]` at `point(n)`; `log_deriv[n]` and
/// `log_prob[n]` are evaluated at `point(n)` and `point(n + 1)` equals
/// `h_{symbols[n]}(point(n))`. The point reached after the last step is
/// `final_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub symbols: Vec<usize>,
    pub log_deriv: Vec<f64>,
    pub log_prob: Vec<f64>,
    pub final_point: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.coords[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Inverse-CDF draw: cumulative sums left to right, last entry taken as 1.
#[inline]
fn draw_symbol(p: &[f64], u: f64) -> usize {
    let last = p.len() - 1;
    let mut acc = 0.0;
    for (i, v) in p[..last].iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    last
}

/// Runs `burn_in + n_steps` steps of `x_{n+1} = h_ω(x_n)`, `ω ~ p(x_n)`,
/// keeping the last `n_steps`.
pub fn chaos_game(
    system: &IfsSystem,
    x0: &Point,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    system.check_point(x0.coords())?;
    let d = system.dim();
    let k = system.k();
    let mut rng = seed::rng(seed);
    let mut p = vec![0.0; k];
    let constant = system.probs().constant_values().map(<[f64]>::to_vec);
    let log_const: Option<Vec<f64>> = constant.as_ref().map(|c| c.iter().map(|v| v.ln()).collect());
    let mut x = x0.coords().to_vec();
    let mut y = vec![0.0; d];
    let mut traj = Trajectory {
        dim: d,
        coords: Vec::with_capacity(n_steps * d),
        symbols: Vec::with_capacity(n_steps),
        log_deriv: Vec::with_capacity(n_steps),
        log_prob: Vec::with_capacity(n_steps),
        final_point: Vec::new(),
        seed,
        burn_in,
    };
    for step in 0..burn_in + n_steps {
        let u: f64 = rng.random();
        let i = match &constant {
            Some(c) => draw_symbol(c, u),
            None => {
                system.probs().eval_into(&x, &mut p);
                draw_symbol(&p, u)
            }
        };
        if step >= burn_in {
            traj.coords.extend_from_slice(&x);
            traj.symbols.push(i);
            traj.log_deriv.push(system.maps()[i].derivative_norm_right(&x).ln());
            traj.log_prob.push(match &log_const {
                Some(l) => l[i],
                None => p[i].ln(),
            });
        }
        system.apply_into(i, &x, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOrbit { step });
        }
        std::mem::swap(&mut x, &mut y);
    }
    traj.final_point = x;
    Ok(traj)
}

/// `count` independent trajectories, trajectory `i` seeded with
/// `split_seed(master_seed, i)`, generated in parallel and returned in
/// index order.
pub fn simulate_many(
    system: &IfsSystem,
    x0: &Point,
    count: usize,
    n_steps: usize,
    burn_in: usize,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    if count == 0 {
        return Err(Error::EmptyInput("trajectory count"));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| chaos_game(system, x0, n_steps, burn_in, seed::split_seed(master_seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MapSpec, ProbabilityField};

    #[test]
    fn inverse_cdf_is_left_to_right() {
        assert_eq!(draw_symbol(&[0.7, 0.3], 0.0), 0);
        assert_eq!(draw_symbol(&[0.7, 0.3], 0.6999), 0);
        assert_eq!(draw_symbol(&[0.7, 0.3], 0.7), 1);
        assert_eq!(draw_symbol(&[0.5, 0.5], 0.999_999_999_999), 1);
    }

    #[test]
    fn contraction_reaches_zero() {
        let s = IfsSystem::new(vec![MapSpec::affine_1d(0.5, 0.0)], ProbabilityField::uniform(1)).unwrap();
        let t = chaos_game(&s, &Point::scalar(1024.0).unwrap(), 5, 20, 0).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.points().all(|p| p[0].abs() <= 1024.0 * 2f64.powi(-20)));
        for n in 0..4 {
            assert_eq!(t.point(n + 1)[0], t.point(n)[0] * 0.5);
        }
    }

    #[test]
    fn expanding_orbit_is_reported() {
        let s = IfsSystem::new(vec![MapSpec::affine_1d(1e200, 0.0)], ProbabilityField::uniform(1)).unwrap();
        let err = chaos_game(&s, &Point::scalar(1.0).unwrap(), 10, 0, 0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteOrbit { step: 1 }));
    }
}
