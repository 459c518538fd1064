//! Systems with known answers.
//!
//! The decade example lives on `U = ∪ B_n`, `B_n = (10^n, 3 * 10^n)`:
//! `h_1` moves `B_n` into `B_{n-1}` with slope 1/20 and `h_2` moves `B_n`
//! into `B_{n+1}` with slope 5. Between the decades both maps are extended
//! by affine interpolation, which keeps them increasing homeomorphisms of
//! the line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OpenSet, DEFAULT_DECADES_N_MAX};
use crate::model::{IfsSystem, MapSpec, Matrix, PiecewiseAffine, ProbabilityField};
use crate::point::Point;

/// Decades carrying explicit branches; beyond them the outer slopes continue.
const BRANCH_DECADES: i32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSystem {
    pub name: String,
    pub system: IfsSystem,
    pub open_set: Option<OpenSet>,
    pub known_dimension: Option<f64>,
    pub known_formula: Option<String>,
    /// A convenient starting point inside the open set.
    pub start: Point,
}

fn pow10(n: i32) -> f64 {
    10f64.powi(n)
}

/// `h_1`: `x/20 + 1` for `x <= 3`, `x/20 + 15 * 10^(n-2)` on `B_n`, `n >= 1`.
pub fn example_h1() -> PiecewiseAffine {
    let mut knots = vec![(3.0, 3.0 / 20.0 + 1.0)];
    for n in 1..=BRANCH_DECADES {
        let c = 15.0 * pow10(n - 2);
        knots.push((pow10(n), pow10(n) / 20.0 + c));
        knots.push((3.0 * pow10(n), 3.0 * pow10(n) / 20.0 + c));
    }
    PiecewiseAffine::through_knots(&knots, 1.0 / 20.0, 1.0 / 20.0).expect("increasing knots")
}

/// `h_2`: `5x + 5` for `x <= 3`, `5x + 5 * 10^n` on `B_n`, `n >= 1`.
pub fn example_h2() -> PiecewiseAffine {
    let mut knots = vec![(3.0, 20.0)];
    for n in 1..=BRANCH_DECADES {
        let c = 5.0 * pow10(n);
        knots.push((pow10(n), 5.0 * pow10(n) + c));
        knots.push((3.0 * pow10(n), 15.0 * pow10(n) + c));
    }
    PiecewiseAffine::through_knots(&knots, 5.0, 5.0).expect("increasing knots")
}

fn check_p1(p1: f64) -> Result<()> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidProbability(p1));
    }
    Ok(())
}

/// The decade example with probabilities `(p1, 1 - p1)` and `U` truncated
/// at `B_6`.
pub fn paper_example(p1: f64) -> Result<NamedSystem> {
    paper_example_truncated(p1, DEFAULT_DECADES_N_MAX)
}

pub fn paper_example_truncated(p1: f64, n_max: u32) -> Result<NamedSystem> {
    check_p1(p1)?;
    let system = IfsSystem::new(
        vec![
            MapSpec::PiecewiseAffine1D(example_h1()),
            MapSpec::PiecewiseAffine1D(example_h2()),
        ],
        ProbabilityField::constant(vec![p1, 1.0 - p1])?,
    )?;
    let dim = paper_example_dimension(p1)?;
    Ok(NamedSystem {
        name: "paper-example".into(),
        system,
        open_set: Some(OpenSet::decades(n_max)),
        known_dimension: Some(dim.value),
        known_formula: Some(
            "(p1 ln p1 + p2 ln p2) / (-2 p1 ln 2 - (p1 - p2) ln 5), p2 = 1 - p1".into(),
        ),
        start: Point::scalar(2.0)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleDimension {
    pub value: f64,
    /// `p1` is at or below [`threshold_p1`], outside the range where the
    /// formula is claimed.
    pub below_threshold: bool,
}

/// `(p1 ln p1 + p2 ln p2) / (-2 p1 ln 2 - (p1 - p2) ln 5)`.
pub fn paper_example_dimension(p1: f64) -> Result<ExampleDimension> {
    check_p1(p1)?;
    let p2 = 1.0 - p1;
    let num = p1 * p1.ln() + p2 * p2.ln();
    let den = -2.0 * p1 * 2f64.ln() - (p1 - p2) * 5f64.ln();
    Ok(ExampleDimension {
        value: num / den,
        below_threshold: p1 <= threshold_p1(),
    })
}

/// `ln(50/7) / ln(500/17)`.
pub fn threshold_p1() -> f64 {
    (50.0f64 / 7.0).ln() / (500.0f64 / 17.0).ln()
}

/// Similitudes `x ↦ ρ_i x + t_i` with constant probabilities and
/// `known_dimension = Σ p ln p / Σ p ln ρ`.
pub fn similitude_system(
    name: &str,
    ratios: &[f64],
    translations: &[Point],
    probs: &[f64],
) -> Result<NamedSystem> {
    if ratios.len() != translations.len() || ratios.len() != probs.len() || ratios.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} ratios, {} translations, {} probabilities",
            ratios.len(),
            translations.len(),
            probs.len()
        )));
    }
    let d = translations[0].dim();
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidMap(format!("similitude ratio {bad} outside (0, 1)")));
    }
    let maps = ratios
        .iter()
        .zip(translations)
        .map(|(r, t)| {
            if t.dim() != d {
                return Err(Error::ShapeMismatch("translations differ in dimension".into()));
            }
            if d == 1 {
                Ok(MapSpec::affine_1d(*r, t.coords()[0]))
            } else {
                MapSpec::scalar_conformal(*r, Matrix::identity(d), t.coords().to_vec())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let field = ProbabilityField::constant(probs.to_vec())?;
    let num: f64 = probs.iter().map(|p| p * p.ln()).sum();
    let den: f64 = probs.iter().zip(ratios).map(|(p, r)| p * r.ln()).sum();
    Ok(NamedSystem {
        name: name.into(),
        system: IfsSystem::new(maps, field)?,
        open_set: None,
        known_dimension: Some(num / den),
        known_formula: Some("sum p ln p / sum p ln rho".into()),
        start: Point::new(vec![0.5; d])?,
    })
}

fn on_unit_interval(mut s: NamedSystem) -> NamedSystem {
    s.open_set = Some(OpenSet::intervals(vec![(0.0, 1.0)]).expect("valid interval"));
    s
}

fn scalars(v: &[f64]) -> Vec<Point> {
    v.iter().map(|x| Point::scalar(*x).expect("finite")).collect()
}

/// Middle-thirds Cantor measure, dimension `ln 2 / ln 3`.
pub fn cantor() -> NamedSystem {
    on_unit_interval(
        similitude_system("cantor", &[1.0 / 3.0; 2], &scalars(&[0.0, 2.0 / 3.0]), &[0.5; 2]).expect("valid"),
    )
}

/// Two halves of `[0, 1]`: Lebesgue measure, dimension 1.
pub fn halves() -> NamedSystem {
    on_unit_interval(similitude_system("halves", &[0.5; 2], &scalars(&[0.0, 0.5]), &[0.5; 2]).expect("valid"))
}

/// Ratios 1/2 and 1/4 with equal weights, dimension 2/3.
pub fn uneven() -> NamedSystem {
    on_unit_interval(
        similitude_system("uneven", &[0.5, 0.25], &scalars(&[0.0, 0.5]), &[0.5; 2]).expect("valid"),
    )
}

pub const BUILTIN_NAMES: [&str; 4] = ["cantor", "halves", "uneven", "paper-example"];

/// Looks a built-in up by name; `p1` applies to the decade example
/// (default 0.7).
pub fn by_name(name: &str, p1: Option<f64>) -> Result<NamedSystem> {
    match name {
        "cantor" => Ok(cantor()),
        "halves" => Ok(halves()),
        "uneven" => Ok(uneven()),
        "paper-example" => paper_example(p1.unwrap_or(0.7)),
        other => Err(Error::Config(format!(
            "unknown system {other:?}; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_branches() {
        let h1 = example_h1();
        let h2 = example_h2();
        assert!((h1.eval(2.0) - 1.1).abs() < 1e-15);
        assert_eq!(h2.eval(15.0), 125.0);
        assert!((h1.eval(150.0) - 22.5).abs() < 1e-12);
        for n in 1..8 {
            let x = 1.7 * pow10(n);
            let y = h1.eval(x);
            assert!(y > pow10(n - 1) && y < 3.0 * pow10(n - 1), "h1 {x} -> {y}");
            let z = h2.eval(x);
            assert!(z > pow10(n + 1) && z < 3.0 * pow10(n + 1), "h2 {x} -> {z}");
        }
        assert!(h1.is_homeomorphism() && h2.is_homeomorphism());
    }

    #[test]
    fn gap_slopes_are_affine_interpolants() {
        let h1 = example_h1();
        let h2 = example_h2();
        assert!((h1.eval(6.5) - (1.15 + 3.5 * 0.85 / 7.0)).abs() < 1e-12);
        assert!((h2.eval(6.5) - (20.0 + 3.5 * 80.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn threshold_value() {
        let t = threshold_p1();
        assert!((t - 0.581_451).abs() < 1e-6);
        assert!(t > 5f64.ln() / 100f64.ln());
    }

    #[test]
    fn dimension_at_seven_tenths() {
        let d = paper_example_dimension(0.7).unwrap();
        assert!((d.value - 0.378_436).abs() < 1e-6);
        assert!(!d.below_threshold);
        assert!(paper_example_dimension(0.55).unwrap().below_threshold);
        assert!(matches!(paper_example(1.0), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn similitude_dimensions() {
        assert!((cantor().known_dimension.unwrap() - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!((halves().known_dimension.unwrap() - 1.0).abs() < 1e-15);
        assert!((uneven().known_dimension.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(similitude_system("x", &[0.5], &[], &[1.0]).is_err());
    }
}
