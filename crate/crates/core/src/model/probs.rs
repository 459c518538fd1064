use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive weight `w(x) = scale * exp(linear . x - curvature * |x - center|^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFn {
    pub scale: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub curvature: f64,
    #[serde(default)]
    pub center: Vec<f64>,
}

impl WeightFn {
    pub fn constant(value: f64) -> Self {
        WeightFn {
            scale: value,
            linear: Vec::new(),
            curvature: 0.0,
            center: Vec::new(),
        }
    }

    pub fn gaussian(scale: f64, curvature: f64, center: Vec<f64>) -> Self {
        WeightFn {
            scale,
            linear: Vec::new(),
            curvature,
            center,
        }
    }

    pub fn log_weight(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(a, b)| a * b).sum();
        let quad: f64 = if self.curvature == 0.0 {
            0.0
        } else {
            x.iter()
                .enumerate()
                .map(|(i, xi)| {
                    let c = self.center.get(i).copied().unwrap_or(0.0);
                    (xi - c) * (xi - c)
                })
                .sum()
        };
        self.scale.ln() + lin - self.curvature * quad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Constant { p: Vec<f64> },
    Smooth { weights: Vec<WeightFn> },
}

/// Place-dependent probability vector `p(x) = (p_1(x), ..., p_k(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityField {
    pub kind: FieldKind,
    /// Declared uniform lower bound on every `p_i(x)`.
    pub p_min: f64,
}

impl ProbabilityField {
    pub fn constant(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilityField("empty probability vector".into()));
        }
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidProbabilityField(format!(
                "constant probabilities must be positive, got {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbabilityField(format!(
                "constant probabilities sum to {sum}, not 1"
            )));
        }
        let p_min = p.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ProbabilityField {
            kind: FieldKind::Constant { p },
            p_min,
        })
    }

    pub fn uniform(k: usize) -> Self {
        let p = vec![1.0 / k as f64; k];
        ProbabilityField {
            p_min: p[0],
            kind: FieldKind::Constant { p },
        }
    }

    pub fn smooth(weights: Vec<WeightFn>, p_min: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbabilityField("no weight functions".into()));
        }
        if weights.iter().any(|w| !(w.scale.is_finite() && w.scale > 0.0)) {
            return Err(Error::InvalidProbabilityField("weight scales must be positive".into()));
        }
        if !(p_min > 0.0 && p_min <= 1.0 / weights.len() as f64) {
            return Err(Error::InvalidProbabilityField(format!(
                "p_min {p_min} must lie in (0, 1/k]"
            )));
        }
        Ok(ProbabilityField {
            kind: FieldKind::Smooth { weights },
            p_min,
        })
    }

    pub fn k(&self) -> usize {
        match &self.kind {
            FieldKind::Constant { p } => p.len(),
            FieldKind::Smooth { weights } => weights.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Constant { .. })
    }

    pub fn constant_values(&self) -> Option<&[f64]> {
        match &self.kind {
            FieldKind::Constant { p } => Some(p),
            FieldKind::Smooth { .. } => None,
        }
    }

    /// Writes `p(x)` into `out` (length `k`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Constant { p } => out.copy_from_slice(p),
            FieldKind::Smooth { weights } => {
                let mut max = f64::NEG_INFINITY;
                for (o, w) in out.iter_mut().zip(weights) {
                    *o = w.log_weight(x);
                    max = max.max(*o);
                }
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    *o = (*o - max).exp();
                    sum += *o;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        self.eval_into(x, &mut out);
        out
    }

    /// `log p_i(x)` without forming the whole vector when the field is constant.
    pub fn log_prob(&self, i: usize, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::Constant { p } => p[i].ln(),
            FieldKind::Smooth { weights } => {
                let logs: Vec<f64> = weights.iter().map(|w| w.log_weight(x)).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                logs[i] - lse
            }
        }
    }
}
