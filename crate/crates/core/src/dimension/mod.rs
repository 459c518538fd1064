//! Dimension of the empirical invariant measure: local mass scaling,
//! Frostman-type checks and a cover-based upper bound.

mod cover;

pub use cover::{auto_epsilon, cover_upper_bound, cover_upper_bound_with, default_t_grid, DEFAULT_BAND_WIDTH, CoverOptions, CoverReport, DiameterStats};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::EmpiricalMeasure;
use crate::seed;

/// Balls holding fewer than this many sample points are too noisy to use.
pub const MASS_FLOOR_POINTS: f64 = 50.0;
/// Balls holding more than this mass are saturated.
pub const MASS_CAP: f64 = 0.5;
pub const MIN_LEVELS: usize = 4;
pub const MIN_CENTERS: usize = 10;
/// Number of smallest usable radii whose trend decides a Frostman check.
pub const FROSTMAN_WINDOW: usize = 8;
/// Fraction of centers that must pass a Frostman check.
pub const FROSTMAN_PASS_FRACTION: f64 = 0.9;

/// `ν(B(x, r))` for the closed ball.
pub fn ball_mass(measure: &EmpiricalMeasure, x: &[f64], r: f64) -> f64 {
    measure.ball_mass(x, r)
}

/// `diam / 8`, the default largest radius.
pub fn default_r0(measure: &EmpiricalMeasure) -> f64 {
    let d = measure.diameter();
    if d > 0.0 {
        d / 8.0
    } else {
        1.0
    }
}

/// Levels running from `r0` down past the smallest positive gap between
/// first coordinates, below which no ball holds more than one point.
/// Clamped to `[MIN_LEVELS, 200]`.
pub fn auto_levels(measure: &EmpiricalMeasure, r0: f64) -> usize {
    let mut xs: Vec<f64> = (0..measure.len()).map(|i| measure.point(i)[0]).collect();
    xs.sort_by(f64::total_cmp);
    let gap = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(gap.is_finite() && r0 > gap) {
        return MIN_LEVELS;
    }
    ((r0 / gap).log2().ceil() as usize + 2).clamp(MIN_LEVELS, 200)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDimEstimate {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub log_masses: Vec<f64>,
    /// Which radii entered the regression.
    pub used: Vec<bool>,
    pub slope: f64,
    pub r2: f64,
}

fn dyadic_radii(r0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| r0 * 0.5f64.powi(k as i32)).collect()
}

/// Least-squares slope and coefficient of determination.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

fn check_radius_args(r0: f64, levels: usize) -> Result<()> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
    }
    if levels < MIN_LEVELS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_LEVELS} levels")));
    }
    Ok(())
}

/// Slope of `log ν(B(x, r))` against `log r` over `r = r0 2^-k`,
/// `k < levels`, keeping radii whose mass lies in `[50/N, 1/2]`.
///
/// A mass profile that is constant over every radius is an atom and gets
/// slope 0.
pub fn local_dimension(measure: &EmpiricalMeasure, x: &[f64], r0: f64, levels: usize) -> Result<LocalDimEstimate> {
    check_radius_args(r0, levels)?;
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let radii = dyadic_radii(r0, levels);
    let masses: Vec<f64> = radii.iter().map(|r| measure.ball_mass(x, *r)).collect();
    let log_masses: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    if masses[0] > 0.0 && masses.iter().all(|m| *m == masses[0]) {
        return Ok(LocalDimEstimate {
            center: x.to_vec(),
            radii,
            log_masses,
            used: vec![true; levels],
            slope: 0.0,
            r2: 1.0,
        });
    }
    let floor = MASS_FLOOR_POINTS / measure.len() as f64;
    let used: Vec<bool> = masses.iter().map(|m| *m >= floor && *m <= MASS_CAP).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&log_masses)
        .zip(&used)
        .filter(|(_, u)| **u)
        .map(|((r, m), _)| (r.ln(), *m))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientRange(xs.len()));
    }
    let (slope, r2) = fit_line(&xs, &ys);
    Ok(LocalDimEstimate {
        center: x.to_vec(),
        radii,
        log_masses,
        used,
        slope,
        r2,
    })
}

/// Draws `n` point indices with probability proportional to weight.
fn sample_centers(measure: &EmpiricalMeasure, n: usize, seed: u64) -> Vec<usize> {
    let mut cum = Vec::with_capacity(measure.len());
    let mut acc = 0.0;
    for w in measure.raw_weights() {
        acc += w;
        cum.push(acc);
    }
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cum.partition_point(|c| *c <= u).min(measure.len() - 1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSlope {
    pub center: Vec<f64>,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub valid: usize,
    pub discarded: usize,
    pub centers: Vec<CenterSlope>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Local dimensions at `n_centers` ν-sampled centers, summarized by
/// quantiles. Centers whose radius window is too short are discarded.
pub fn measure_dimension(
    measure: &EmpiricalMeasure,
    n_centers: usize,
    r0: f64,
    levels: usize,
    seed: u64,
) -> Result<DimensionSummary> {
    if n_centers < MIN_CENTERS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_CENTERS} centers")));
    }
    check_radius_args(r0, levels)?;
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let ids = sample_centers(measure, n_centers, seed);
    let centers: Vec<CenterSlope> = ids
        .par_iter()
        .map(|&i| {
            let x = measure.point(i);
            match local_dimension(measure, x, r0, levels) {
                Ok(est) => CenterSlope {
                    center: x.to_vec(),
                    slope: Some(est.slope),
                    r2: Some(est.r2),
                },
                Err(_) => CenterSlope {
                    center: x.to_vec(),
                    slope: None,
                    r2: None,
                },
            }
        })
        .collect();
    let mut slopes: Vec<f64> = centers.iter().filter_map(|c| c.slope).collect();
    if slopes.is_empty() {
        return Err(Error::AllCentersDiscarded(n_centers));
    }
    slopes.sort_by(f64::total_cmp);
    Ok(DimensionSummary {
        median: quantile(&slopes, 0.5),
        q10: quantile(&slopes, 0.1),
        q90: quantile(&slopes, 0.9),
        valid: slopes.len(),
        discarded: n_centers - slopes.len(),
        centers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub s_test: f64,
    pub passes: bool,
    pub pass_fraction: f64,
    /// Largest `ν(B(x, r)) / (2r)^s` seen over all centers and usable radii.
    pub worst_ratio: f64,
    pub worst_center: Vec<f64>,
    pub centers_checked: usize,
    pub centers_skipped: usize,
}

/// Finite-sample proxy for `ν(B(x, r)) / (2r)^s → 0`: at each ν-sampled
/// center the log-ratio is regressed on `log r` over the
/// [`FROSTMAN_WINDOW`] smallest radii holding at least 50 points; the center
/// passes when the ratio does not grow as `r` shrinks (slope ≥ 0). The check
/// passes when at least 90% of centers pass.
pub fn frostman_check(
    measure: &EmpiricalMeasure,
    s_test: f64,
    n_centers: usize,
    r0: f64,
    levels: usize,
    seed: u64,
) -> Result<FrostmanReport> {
    if !(s_test > 0.0 && s_test.is_finite()) {
        return Err(Error::InvalidArgument(format!("s_test must be positive, got {s_test}")));
    }
    if n_centers == 0 {
        return Err(Error::InvalidArgument("need at least one center".into()));
    }
    check_radius_args(r0, levels)?;
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let floor = MASS_FLOOR_POINTS / measure.len() as f64;
    let radii = dyadic_radii(r0, levels);
    let ids = sample_centers(measure, n_centers, seed);
    // (passes, worst log-ratio) per center; None when too few radii remain.
    let results: Vec<Option<(bool, f64)>> = ids
        .par_iter()
        .map(|&i| {
            let x = measure.point(i);
            let (xs, ys): (Vec<f64>, Vec<f64>) = radii
                .iter()
                .filter_map(|&r| {
                    let m = measure.ball_mass(x, r);
                    (m >= floor).then(|| (r.ln(), m.ln() - s_test * (2.0 * r).ln()))
                })
                .unzip();
            if xs.len() < 3 {
                return None;
            }
            let worst = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let from = xs.len().saturating_sub(FROSTMAN_WINDOW);
            let (slope, _) = fit_line(&xs[from..], &ys[from..]);
            Some((slope >= 0.0 || ys[from..].iter().all(|y| *y == ys[from]), worst))
        })
        .collect();
    let checked: Vec<(usize, (bool, f64))> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .collect();
    if checked.is_empty() {
        return Err(Error::InsufficientRange(0));
    }
    let passed = checked.iter().filter(|(_, (p, _))| *p).count();
    let (worst_i, worst) = checked
        .iter()
        .map(|(i, (_, w))| (*i, *w))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let pass_fraction = passed as f64 / checked.len() as f64;
    Ok(FrostmanReport {
        s_test,
        passes: pass_fraction >= FROSTMAN_PASS_FRACTION,
        pass_fraction,
        worst_ratio: worst.exp(),
        worst_center: measure.point(ids[worst_i]).to_vec(),
        centers_checked: checked.len(),
        centers_skipped: n_centers - checked.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_has_dimension_zero() {
        let m = EmpiricalMeasure::from_points(1, vec![0.0; 1000]).unwrap();
        let est = local_dimension(&m, &[0.0], 1.0, 8).unwrap();
        assert_eq!(est.slope, 0.0);
        let f = frostman_check(&m, 0.1, 20, 1.0, 8, 0).unwrap();
        assert!(!f.passes);
    }

    #[test]
    fn evenly_spaced_points_have_dimension_one() {
        let n = 100_000;
        let m = EmpiricalMeasure::from_points(1, (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()).unwrap();
        let est = local_dimension(&m, &[0.5], 0.5, 20).unwrap();
        assert!((est.slope - 1.0).abs() < 0.02, "{}", est.slope);
        assert!(est.used.iter().filter(|u| **u).count() >= 3);
    }

    #[test]
    fn too_few_levels_is_an_error() {
        let m = EmpiricalMeasure::from_points(1, vec![0.0, 1.0]).unwrap();
        assert!(local_dimension(&m, &[0.0], 1.0, 3).is_err());
        assert!(matches!(
            local_dimension(&m, &[0.0], 1.0, 6),
            Err(Error::InsufficientRange(_))
        ));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.1), 0.4);
    }
}
