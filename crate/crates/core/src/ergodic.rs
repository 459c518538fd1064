//! Orbit averages: the Lyapunov exponent `λ`, the entropy `η`, their ratio
//! `s = η/λ`, a Chebyshev tail diagnostic and the `log⁺` moment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IfsSystem;
use crate::point::distance;
use crate::sampler::{EmpiricalMeasure, Trajectory};

/// Block length for batch-means standard errors.
pub const BLOCK_LEN: usize = 100;
pub const MIN_TRAJECTORY_LEN: usize = 100;
pub const MIN_TAIL_TRAJECTORIES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64, n_samples: usize) -> Self {
        EstimateWithError {
            value,
            stderr: 0.0,
            n_samples,
        }
    }

    /// Weighted mean of `(value, weight)` pairs with the standard error
    /// `sqrt(Σ w² (f - mean)²)` for normalized weights.
    pub fn weighted(values: &[(f64, f64)]) -> Self {
        let n = values.len();
        if let Some(&(first, _)) = values.first() {
            if values.iter().all(|(v, _)| *v == first) {
                return EstimateWithError::exact(first, n);
            }
        }
        let total: f64 = values.iter().map(|(_, w)| w).sum();
        let mean = values.iter().map(|(v, w)| v * w).sum::<f64>() / total;
        let var = values
            .iter()
            .map(|(v, w)| (w / total).powi(2) * (v - mean).powi(2))
            .sum::<f64>();
        EstimateWithError {
            value: mean,
            stderr: var.sqrt(),
            n_samples: n,
        }
    }

    /// Mean of the concatenated series with a batch-means standard error:
    /// each series is cut into blocks of [`BLOCK_LEN`] (blocks never span
    /// two series, a short remainder is dropped from the error estimate)
    /// and the spread of block means gives the error.
    pub fn batch_means(series: &[&[f64]]) -> Self {
        let n: usize = series.iter().map(|s| s.len()).sum();
        let first = series.iter().find_map(|s| s.first().copied());
        let Some(first) = first else {
            return EstimateWithError::exact(f64::NAN, 0);
        };
        if series.iter().all(|s| s.iter().all(|v| *v == first)) {
            return EstimateWithError::exact(first, n);
        }
        let mean = series.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;
        let blocks: Vec<f64> = series
            .iter()
            .flat_map(|s| s.chunks_exact(BLOCK_LEN))
            .map(|b| b.iter().sum::<f64>() / BLOCK_LEN as f64)
            .collect();
        let stderr = if blocks.len() >= 2 {
            let bm = blocks.iter().sum::<f64>() / blocks.len() as f64;
            let var = blocks.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (blocks.len() - 1) as f64;
            (var / blocks.len() as f64).sqrt()
        } else {
            let var = series
                .iter()
                .flat_map(|s| s.iter())
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / (n.max(2) - 1) as f64;
            (var / n as f64).sqrt()
        };
        EstimateWithError {
            value: mean,
            stderr,
            n_samples: n,
        }
    }
}

fn check_len(t: &Trajectory) -> Result<()> {
    if t.len() < MIN_TRAJECTORY_LEN {
        return Err(Error::TooShort {
            needed: MIN_TRAJECTORY_LEN,
            got: t.len(),
        });
    }
    Ok(())
}

/// `λ̂`: mean of `log ||Dh_ω(x)||` along the orbit.
pub fn lyapunov_exponent(traj: &Trajectory) -> Result<EstimateWithError> {
    check_len(traj)?;
    Ok(EstimateWithError::batch_means(&[&traj.log_deriv]))
}

/// `η̂`: mean of `log p_ω(x)` along the orbit.
pub fn entropy_rate(traj: &Trajectory) -> Result<EstimateWithError> {
    check_len(traj)?;
    Ok(EstimateWithError::batch_means(&[&traj.log_prob]))
}

fn pooled(trajs: &[Trajectory], pick: impl Fn(&Trajectory) -> &[f64]) -> Result<EstimateWithError> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput("no trajectories"));
    }
    trajs.iter().try_for_each(check_len)?;
    let series: Vec<&[f64]> = trajs.iter().map(pick).collect();
    Ok(EstimateWithError::batch_means(&series))
}

pub fn lyapunov_exponent_pooled(trajs: &[Trajectory]) -> Result<EstimateWithError> {
    pooled(trajs, |t| &t.log_deriv)
}

pub fn entropy_rate_pooled(trajs: &[Trajectory]) -> Result<EstimateWithError> {
    pooled(trajs, |t| &t.log_prob)
}

/// `s = η/λ`.
pub fn dimension_formula(eta: f64, lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::NonNegativeLyapunov(lambda));
    }
    if !(eta <= 0.0) {
        return Err(Error::InvalidArgument(format!("entropy must be <= 0, got {eta}")));
    }
    Ok(eta / lambda)
}

/// `λ`, `η` and `s` with their errors, as printed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicSummary {
    pub lambda: f64,
    pub eta: f64,
    pub s: f64,
    pub stderr_lambda: f64,
    pub stderr_eta: f64,
    pub n: usize,
}

pub fn summarize(trajs: &[Trajectory]) -> Result<ErgodicSummary> {
    let lambda = lyapunov_exponent_pooled(trajs)?;
    let eta = entropy_rate_pooled(trajs)?;
    Ok(ErgodicSummary {
        lambda: lambda.value,
        eta: eta.value,
        s: dimension_formula(eta.value, lambda.value)?,
        stderr_lambda: lambda.stderr,
        stderr_eta: eta.stderr,
        n: lambda.n_samples,
    })
}

/// `(η, λ)` as integrals `∫ Σ_j p_j log p_j dν` and
/// `∫ Σ_j p_j log ||Dh_j|| dν` over a point cloud.
pub fn integrated_exponents(system: &IfsSystem, measure: &EmpiricalMeasure) -> Result<(f64, f64)> {
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut p = vec![0.0; system.k()];
    let (mut eta, mut lambda) = (0.0, 0.0);
    for (x, w) in measure.iter() {
        system.probs().eval_into(x, &mut p);
        for (j, pj) in p.iter().enumerate() {
            if *pj > 0.0 {
                eta += w * pj * pj.ln();
                lambda += w * pj * system.maps()[j].derivative_norm_right(x).ln();
            }
        }
    }
    Ok((eta, lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub log_k: f64,
    pub empirical_tail: f64,
    pub chebyshev_bound: f64,
    /// `v̂ · n`, the variance estimate of `S_n`.
    pub variance_estimate: f64,
    pub n: usize,
    pub trajectories: usize,
    /// `empirical_tail <= chebyshev_bound + 3 · binomial stderr`.
    pub passes: bool,
}

/// Chebyshev check on `S_n = Σ (log ||Dh|| - λ̂)` over independent
/// trajectories of equal length `n`: the fraction with `S_n > log K` is
/// compared with `v̂ n / (log K)²`, `v̂` the pooled per-step variance.
pub fn deviation_diagnostic(trajs: &[Trajectory], log_k_grid: &[f64]) -> Result<Vec<TailReport>> {
    if trajs.len() < MIN_TAIL_TRAJECTORIES {
        return Err(Error::TooFewTrajectories {
            needed: MIN_TAIL_TRAJECTORIES,
            got: trajs.len(),
        });
    }
    let n = trajs[0].len();
    if trajs.iter().any(|t| t.len() != n) {
        return Err(Error::ShapeMismatch("trajectories differ in length".into()));
    }
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if let Some(bad) = log_k_grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("log K must be positive, got {bad}")));
    }
    let series: Vec<&[f64]> = trajs.iter().map(|t| t.log_deriv.as_slice()).collect();
    let lambda = EstimateWithError::batch_means(&series).value;
    let total = n * trajs.len();
    let v_step = if total > 1 {
        series
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| (v - lambda).powi(2))
            .sum::<f64>()
            / (total - 1) as f64
    } else {
        0.0
    };
    let sums: Vec<f64> = series.iter().map(|s| s.iter().map(|v| v - lambda).sum()).collect();
    let m = trajs.len() as f64;
    Ok(log_k_grid
        .iter()
        .map(|&log_k| {
            let tail = sums.iter().filter(|s| **s > log_k).count() as f64 / m;
            let variance = v_step * n as f64;
            let bound = variance / (log_k * log_k);
            let q = bound.min(1.0);
            let slack = 3.0 * (q * (1.0 - q) / m).sqrt();
            TailReport {
                log_k,
                empirical_tail: tail,
                chebyshev_bound: bound,
                variance_estimate: variance,
                n,
                trajectories: trajs.len(),
                passes: tail <= bound + slack,
            }
        })
        .collect())
}

/// `∫ log⁺ d(x, x0) dν(x)`.
pub fn log_moment(measure: &EmpiricalMeasure, x0: &[f64]) -> Result<EstimateWithError> {
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if x0.len() != measure.dim() {
        return Err(Error::DimensionMismatch {
            expected: measure.dim(),
            got: x0.len(),
        });
    }
    let values: Vec<(f64, f64)> = measure
        .iter()
        .map(|(x, w)| (distance(x, x0).ln().max(0.0), w))
        .collect();
    Ok(EstimateWithError::weighted(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_are_exact() {
        let v = vec![(1.0f64 / 3.0).ln(); 1000];
        let e = EstimateWithError::batch_means(&[&v]);
        assert_eq!(e.value, (1.0f64 / 3.0).ln());
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn batch_means_of_alternating_series() {
        let v: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let e = EstimateWithError::batch_means(&[&v]);
        assert_eq!(e.value, 0.5);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn formula() {
        let s = dimension_formula(-(2f64.ln()), -(3f64.ln())).unwrap();
        assert!((s - 0.630_930).abs() < 1e-6);
        assert_eq!(dimension_formula(-(2f64.ln()), -(2f64.ln())).unwrap(), 1.0);
        assert!(matches!(dimension_formula(-1.0, 0.0), Err(Error::NonNegativeLyapunov(_))));
        let a = dimension_formula(-0.61, -1.61).unwrap();
        let b = dimension_formula(-0.61 * 7.0, -1.61 * 7.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn log_moment_cases() {
        let m = EmpiricalMeasure::from_points(1, vec![0.2, -0.9, 0.5]).unwrap();
        assert_eq!(log_moment(&m, &[0.0]).unwrap().value, 0.0);
        let e2 = 2f64.exp();
        let m = EmpiricalMeasure::from_points(1, vec![e2]).unwrap();
        assert!((log_moment(&m, &[0.0]).unwrap().value - 2.0).abs() < 1e-15);
    }
}
