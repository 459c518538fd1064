//! Closed parametric map families with analytic derivatives.
//!
//! Every family exposes its value, the operator norm of its Jacobian
//! (`h'(x) = ||Dh(x)||`), a cancellation-free chord ratio
//! `d(h x, h y) / d(x, y)` and, where one exists in closed form, the
//! global Lipschitz-log bound `sup_z log[d(h y, h z) / d(y, z)]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::point::{distance, norm};

/// A piecewise-affine map of the line.
///
/// Piece `k` covers `[breakpoints[k-1], breakpoints[k])`; the first piece
/// extends to `-inf` and the last to `+inf`. At a breakpoint the map takes
/// the value of the piece on its right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffine {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl PiecewiseAffine {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 || intercepts.len() != slopes.len() {
            return Err(Error::InvalidMap(format!(
                "piecewise map needs {} slopes and intercepts for {} breakpoints, got {} and {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                slopes.len(),
                intercepts.len()
            )));
        }
        let all = breakpoints.iter().chain(&slopes).chain(&intercepts);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMap("non-finite piecewise parameter".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMap("breakpoints must be strictly increasing".into()));
        }
        Ok(PiecewiseAffine {
            breakpoints,
            slopes,
            intercepts,
        })
    }

    /// Builds the continuous piecewise-affine interpolant through `knots`
    /// (strictly increasing abscissae), extended beyond the outer knots with
    /// the given slopes.
    pub fn through_knots(knots: &[(f64, f64)], left_slope: f64, right_slope: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidMap("no knots".into()));
        }
        let breakpoints: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let mut slopes = Vec::with_capacity(knots.len() + 1);
        let mut intercepts = Vec::with_capacity(knots.len() + 1);
        let (x0, y0) = knots[0];
        slopes.push(left_slope);
        intercepts.push(y0 - left_slope * x0);
        for w in knots.windows(2) {
            let ((xa, ya), (xb, yb)) = (w[0], w[1]);
            let s = (yb - ya) / (xb - xa);
            slopes.push(s);
            intercepts.push(ya - s * xa);
        }
        let (xn, yn) = knots[knots.len() - 1];
        slopes.push(right_slope);
        intercepts.push(yn - right_slope * xn);
        PiecewiseAffine::new(breakpoints, slopes, intercepts)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_piece(self.piece_index(x), x)
    }

    pub fn eval_piece(&self, piece: usize, x: f64) -> f64 {
        self.slopes[piece] * x + self.intercepts[piece]
    }

    /// Continuous and strictly monotone, hence a homeomorphism of the line.
    pub fn is_homeomorphism(&self) -> bool {
        let increasing = self.slopes.iter().all(|&s| s > 0.0);
        let decreasing = self.slopes.iter().all(|&s| s < 0.0);
        if !(increasing || decreasing) {
            return false;
        }
        self.breakpoints.iter().enumerate().all(|(k, &b)| {
            let left = self.eval_piece(k, b);
            let right = self.eval_piece(k + 1, b);
            (left - right).abs() <= 1e-12 * left.abs().max(right.abs()).max(1.0)
        })
    }

    fn chord(&self, x: f64, y: f64) -> f64 {
        let (px, py) = (self.piece_index(x), self.piece_index(y));
        if px == py {
            return self.slopes[px].abs();
        }
        (self.eval_piece(px, x) - self.eval_piece(py, y)).abs() / (x - y).abs()
    }

    /// Exact `sup_z |h(z) - h(y)| / |z - y|`. The chord slope is monotone in
    /// `z` on every piece not containing `y`, so the sup is attained in the
    /// limit at a piece boundary, at `y` itself, or at infinity.
    fn sup_chord_from(&self, y: f64) -> f64 {
        let hy = self.eval(y);
        let mut best: f64 = 0.0;
        let mut consider = |z: f64, hz: f64| {
            if z != y {
                best = best.max((hz - hy).abs() / (z - y).abs());
            }
        };
        for (k, &b) in self.breakpoints.iter().enumerate() {
            consider(b, self.eval_piece(k, b));
            consider(b, self.eval_piece(k + 1, b));
        }
        let own = self.piece_index(y);
        best = best.max(self.slopes[own].abs());
        // Approaching y from the left when y sits exactly on a breakpoint.
        if own > 0 && self.breakpoints[own - 1] == y {
            let left_limit = self.eval_piece(own - 1, y);
            if left_limit == hy {
                best = best.max(self.slopes[own - 1].abs());
            } else {
                best = f64::INFINITY;
            }
        }
        best = best.max(self.slopes[0].abs());
        best = best.max(self.slopes[self.slopes.len() - 1].abs());
        best
    }

    /// Image of the open interval `(a, b)` as a union of open intervals,
    /// one per piece it meets; abutting images of a continuous map are merged.
    pub fn image_interval(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|&p| p > a && p < b));
        cuts.push(b);
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let piece = self.piece_index(w[0]);
            let (u, v) = (self.eval_piece(piece, w[0]), self.eval_piece(piece, w[1]));
            let seg = if u <= v { (u, v) } else { (v, u) };
            out.push(seg);
        }
        merge_touching(out)
    }
}

fn merge_touching(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for seg in v {
        match out.last_mut() {
            Some(last) if seg.0 <= last.1 => last.1 = last.1.max(seg.1),
            _ => out.push(seg),
        }
    }
    out
}

/// One map `h_i` of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapSpec {
    Affine1D {
        slope: f64,
        intercept: f64,
    },
    PiecewiseAffine1D(PiecewiseAffine),
    AffineND {
        matrix: Matrix,
        translation: Vec<f64>,
    },
    /// `z -> (a z + b) / (c z + d)` acting on `R^2 = C`.
    Moebius2D {
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    },
    /// `x -> scale * R x + translation` with `R` orthogonal.
    ScalarConformalND {
        scale: f64,
        rotation: Matrix,
        translation: Vec<f64>,
    },
}

impl MapSpec {
    pub fn affine_1d(slope: f64, intercept: f64) -> Self {
        MapSpec::Affine1D { slope, intercept }
    }

    pub fn affine_nd(matrix: Matrix, translation: Vec<f64>) -> Result<Self> {
        if matrix.dim() != translation.len() {
            return Err(Error::InvalidMap(format!(
                "matrix is {0}x{0} but translation has length {1}",
                matrix.dim(),
                translation.len()
            )));
        }
        Ok(MapSpec::AffineND {
            matrix,
            translation,
        })
    }

    pub fn moebius(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        if (a * d - b * c).norm() == 0.0 {
            return Err(Error::InvalidMap("Moebius map needs ad - bc != 0".into()));
        }
        Ok(MapSpec::Moebius2D { a, b, c, d })
    }

    pub fn scalar_conformal(scale: f64, rotation: Matrix, translation: Vec<f64>) -> Result<Self> {
        if rotation.dim() != translation.len() {
            return Err(Error::InvalidMap("rotation and translation dimensions differ".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidMap(format!("conformal scale {scale} must be positive")));
        }
        if !rotation.is_orthogonal(1e-9) {
            return Err(Error::InvalidMap("rotation matrix is not orthogonal".into()));
        }
        Ok(MapSpec::ScalarConformalND {
            scale,
            rotation,
            translation,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Affine1D { .. } | MapSpec::PiecewiseAffine1D(_) => 1,
            MapSpec::AffineND { translation, .. } => translation.len(),
            MapSpec::Moebius2D { .. } => 2,
            MapSpec::ScalarConformalND { translation, .. } => translation.len(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            MapSpec::Affine1D { .. } => "affine_1d",
            MapSpec::PiecewiseAffine1D(_) => "piecewise_affine_1d",
            MapSpec::AffineND { .. } => "affine_nd",
            MapSpec::Moebius2D { .. } => "moebius_2d",
            MapSpec::ScalarConformalND { .. } => "scalar_conformal_nd",
        }
    }

    /// Globally affine: `h(x) = A x + c` on all of `R^d`.
    pub fn affine_parts(&self) -> Option<(Matrix, Vec<f64>)> {
        match self {
            MapSpec::Affine1D { slope, intercept } => {
                Some((Matrix::from_rows(&[vec![*slope]])?, vec![*intercept]))
            }
            MapSpec::AffineND {
                matrix,
                translation,
            } => Some((matrix.clone(), translation.clone())),
            MapSpec::ScalarConformalND {
                scale,
                rotation,
                translation,
            } => {
                let rows: Vec<Vec<f64>> = rotation
                    .rows()
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v * scale).collect())
                    .collect();
                Some((Matrix::from_rows(&rows)?, translation.clone()))
            }
            _ => None,
        }
    }

    pub fn is_conformal(&self) -> bool {
        match self {
            MapSpec::AffineND { matrix, .. } => {
                let n = matrix.operator_norm();
                n > 0.0 && {
                    let rows: Vec<Vec<f64>> = matrix
                        .rows()
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| v / n).collect())
                        .collect();
                    Matrix::from_rows(&rows).is_some_and(|m| m.is_orthogonal(1e-9))
                }
            }
            _ => true,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            MapSpec::PiecewiseAffine1D(p) => p.breakpoints(),
            _ => &[],
        }
    }

    /// Writes `h(x)` into `out`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            MapSpec::Affine1D { slope, intercept } => out[0] = slope * x[0] + intercept,
            MapSpec::PiecewiseAffine1D(p) => out[0] = p.eval(x[0]),
            MapSpec::AffineND {
                matrix,
                translation,
            } => {
                matrix.mul_vec(x, out);
                out.iter_mut().zip(translation).for_each(|(o, t)| *o += t);
            }
            MapSpec::Moebius2D { a, b, c, d } => {
                let z = Complex64::new(x[0], x[1]);
                let w = (a * z + b) / (c * z + d);
                out[0] = w.re;
                out[1] = w.im;
            }
            MapSpec::ScalarConformalND {
                scale,
                rotation,
                translation,
            } => {
                rotation.mul_vec(x, out);
                out.iter_mut()
                    .zip(translation)
                    .for_each(|(o, t)| *o = *o * scale + t);
            }
        }
    }

    /// `||Dh(x)||`. Errors at piecewise breakpoints, where the caller has to
    /// pick a one-sided convention (see [`MapSpec::derivative_norm_right`]).
    pub fn derivative_norm(&self, x: &[f64]) -> Result<f64> {
        if let MapSpec::PiecewiseAffine1D(p) = self {
            if p.breakpoints.binary_search_by(|b| b.total_cmp(&x[0])).is_ok() {
                return Err(Error::AtBreakpoint(x[0]));
            }
        }
        let v = self.derivative_norm_right(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinitePoint(x.to_vec()))
        }
    }

    /// `||Dh(x)||` with the right-continuous convention at breakpoints.
    pub fn derivative_norm_right(&self, x: &[f64]) -> f64 {
        match self {
            MapSpec::Affine1D { slope, .. } => slope.abs(),
            MapSpec::PiecewiseAffine1D(p) => p.slopes[p.piece_index(x[0])].abs(),
            MapSpec::AffineND { matrix, .. } => matrix.operator_norm(),
            MapSpec::Moebius2D { a, b, c, d } => {
                let z = Complex64::new(x[0], x[1]);
                (a * d - b * c).norm() / (c * z + d).norm_sqr()
            }
            MapSpec::ScalarConformalND { scale, .. } => *scale,
        }
    }

    /// `d(h x, h y) / d(x, y)` for `x != y`, evaluated without subtracting
    /// nearly equal images wherever the family allows it.
    pub fn chord_ratio(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            MapSpec::Affine1D { slope, .. } => slope.abs(),
            MapSpec::PiecewiseAffine1D(p) => p.chord(x[0], y[0]),
            MapSpec::AffineND { matrix, .. } => {
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                let mut img = vec![0.0; diff.len()];
                matrix.mul_vec(&diff, &mut img);
                norm(&img) / norm(&diff)
            }
            MapSpec::Moebius2D { a, b, c, d } => {
                let z = Complex64::new(x[0], x[1]);
                let w = Complex64::new(y[0], y[1]);
                (a * d - b * c).norm() / ((c * z + d).norm() * (c * w + d).norm())
            }
            MapSpec::ScalarConformalND { scale, .. } => *scale,
        }
    }

    /// Upper bound on `sup_z log[d(h y, h z) / d(y, z)]`.
    pub fn lipschitz_log_bound(&self, y: &[f64]) -> Result<f64> {
        match self {
            MapSpec::Affine1D { slope, .. } => Ok(slope.abs().ln()),
            MapSpec::PiecewiseAffine1D(p) => Ok(p.sup_chord_from(y[0]).ln()),
            MapSpec::AffineND { matrix, .. } => Ok(matrix.operator_norm().ln()),
            MapSpec::ScalarConformalND { scale, .. } => Ok(scale.ln()),
            MapSpec::Moebius2D { .. } => Err(Error::UnsupportedFamily("moebius_2d")),
        }
    }

    /// Solves `h(x) = y`; `None` if the map is not invertible at `y`.
    pub fn apply_inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        match self {
            MapSpec::Affine1D { slope, intercept } => {
                (*slope != 0.0).then(|| vec![(y[0] - intercept) / slope])
            }
            MapSpec::PiecewiseAffine1D(p) => {
                // Any piece whose image (on its own domain) contains y.
                let n = p.slopes.len();
                (0..n).find_map(|k| {
                    let s = p.slopes[k];
                    if s == 0.0 {
                        return None;
                    }
                    let x = (y[0] - p.intercepts[k]) / s;
                    let lo = if k == 0 { f64::NEG_INFINITY } else { p.breakpoints[k - 1] };
                    let hi = if k == n - 1 { f64::INFINITY } else { p.breakpoints[k] };
                    (x >= lo && x < hi).then(|| vec![x])
                })
            }
            MapSpec::AffineND {
                matrix,
                translation,
            } => {
                let rhs: Vec<f64> = y.iter().zip(translation).map(|(a, t)| a - t).collect();
                matrix.solve(&rhs)
            }
            MapSpec::Moebius2D { a, b, c, d } => {
                let w = Complex64::new(y[0], y[1]);
                let den = -c * w + a;
                if den.norm() == 0.0 {
                    return None;
                }
                let z = (d * w - b) / den;
                Some(vec![z.re, z.im])
            }
            MapSpec::ScalarConformalND {
                scale,
                rotation,
                translation,
            } => {
                let n = translation.len();
                let shifted: Vec<f64> = y.iter().zip(translation).map(|(a, t)| (a - t) / scale).collect();
                // R^{-1} = R^T
                Some(
                    (0..n)
                        .map(|j| (0..n).map(|i| rotation.get(i, j) * shifted[i]).sum())
                        .collect(),
                )
            }
        }
    }

    /// Exact image of the open interval `(a, b)` for one-dimensional families.
    pub fn image_interval(&self, a: f64, b: f64) -> Option<Vec<(f64, f64)>> {
        match self {
            MapSpec::Affine1D { slope, intercept } => {
                let (u, v) = (slope * a + intercept, slope * b + intercept);
                Some(vec![(u.min(v), u.max(v))])
            }
            MapSpec::PiecewiseAffine1D(p) => Some(p.image_interval(a, b)),
            MapSpec::AffineND {
                matrix,
                translation,
            } if translation.len() == 1 => {
                let s = matrix.get(0, 0);
                let (u, v) = (s * a + translation[0], s * b + translation[0]);
                Some(vec![(u.min(v), u.max(v))])
            }
            MapSpec::ScalarConformalND {
                scale,
                rotation,
                translation,
            } if translation.len() == 1 => {
                let s = scale * rotation.get(0, 0);
                let (u, v) = (s * a + translation[0], s * b + translation[0]);
                Some(vec![(u.min(v), u.max(v))])
            }
            _ => None,
        }
    }
}

/// Central finite-difference estimate of `||Dh(x)||` with relative step `1e-6`.
pub fn derivative_norm_fd(map: &MapSpec, x: &[f64]) -> f64 {
    let d = x.len();
    let mut jac = vec![vec![0.0; d]; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut probe = x.to_vec();
    for j in 0..d {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        map.apply(&probe, &mut plus);
        probe[j] = x[j] - h;
        map.apply(&probe, &mut minus);
        probe[j] = x[j];
        for i in 0..d {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Matrix::from_rows(&jac).map_or(f64::NAN, |m| m.operator_norm())
}

/// Finite-difference chord ratio via the images, for cross-checking [`MapSpec::chord_ratio`].
pub fn chord_ratio_by_images(map: &MapSpec, x: &[f64], y: &[f64]) -> f64 {
    let mut hx = vec![0.0; x.len()];
    let mut hy = vec![0.0; y.len()];
    map.apply(x, &mut hx);
    map.apply(y, &mut hy);
    distance(&hx, &hy) / distance(x, y)
}
