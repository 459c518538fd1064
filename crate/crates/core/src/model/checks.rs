use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::system::IfsSystem;
use crate::error::{Error, Result};
use crate::geometry::{OpenBox, OpenSet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Required,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub severity: Severity,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub samples: usize,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.passed || c.severity == Severity::Advisory)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NORMALIZED: &str = "probabilities sum to one";
pub const CHECK_FLOOR: &str = "probabilities bounded below by p_min";
pub const CHECK_DERIV_LOWER: &str = "derivative bounded below";
pub const CHECK_DERIV_UPPER: &str = "derivative bounded above";
pub const CHECK_HOMEO: &str = "piecewise maps are homeomorphisms";

const DEFAULT_HALF_WIDTH: f64 = 10.0;

fn validation_box(system: &IfsSystem) -> OpenBox {
    match system.declared_domain() {
        Some(d) => d.bounding_box(),
        None => OpenBox {
            lo: vec![-DEFAULT_HALF_WIDTH; system.dim()],
            hi: vec![DEFAULT_HALF_WIDTH; system.dim()],
        },
    }
}

fn sample_points(system: &IfsSystem, budget: usize, seed: u64) -> Vec<Vec<f64>> {
    let bx = validation_box(system);
    let d = system.dim();
    let grid_budget = budget.div_ceil(2);
    let per_axis = ((grid_budget as f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let mut points = Vec::with_capacity(budget + per_axis.pow(d as u32));
    let mut idx = vec![0usize; d];
    'grid: loop {
        points.push(
            (0..d)
                .map(|a| bx.lo[a] + (bx.hi[a] - bx.lo[a]) * idx[a] as f64 / (per_axis - 1) as f64)
                .collect(),
        );
        for a in 0..d {
            idx[a] += 1;
            if idx[a] < per_axis {
                continue 'grid;
            }
            idx[a] = 0;
        }
        break;
    }
    let mut rng = seed::rng(seed);
    for _ in 0..budget.saturating_sub(grid_budget) {
        points.push(
            (0..d)
                .map(|a| rng.random_range(bx.lo[a]..bx.hi[a]))
                .collect(),
        );
    }
    points
}

/// Checks the standing assumptions on sampled points: normalization and
/// floor of `p(x)`, and `log h_i'` bounded on both sides. Failures are
/// report entries carrying the worst witnessing point.
pub fn validate_system(system: &IfsSystem, sample_budget: usize, seed: u64) -> ValidationReport {
    let points = sample_points(system, sample_budget.max(1), seed);
    let k = system.k();
    let p_min = system.probs().p_min;
    let mut p = vec![0.0; k];

    let mut worst_norm = (0.0f64, None);
    let mut worst_floor = (f64::INFINITY, None);
    let mut worst_low = (f64::INFINITY, None, 0usize);
    let mut worst_high = (0.0f64, None, 0usize);
    for x in &points {
        system.probs().eval_into(x, &mut p);
        let dev = (p.iter().sum::<f64>() - 1.0).abs();
        if dev > worst_norm.0 || worst_norm.1.is_none() {
            worst_norm = (dev, Some(x.clone()));
        }
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        if min < worst_floor.0 {
            worst_floor = (min, Some(x.clone()));
        }
        for (i, m) in system.maps().iter().enumerate() {
            let dn = m.derivative_norm_right(x);
            let dn = if dn.is_nan() { f64::INFINITY } else { dn };
            if dn < worst_low.0 {
                worst_low = (dn, Some(x.clone()), i);
            }
            if dn > worst_high.0 {
                worst_high = (dn, Some(x.clone()), i);
            }
        }
    }
    // Every piece of a piecewise map is visited, not only the sampled ones.
    for (i, m) in system.maps().iter().enumerate() {
        if let super::maps::MapSpec::PiecewiseAffine1D(pw) = m {
            for (piece, s) in pw.slopes().iter().enumerate() {
                if s.abs() < worst_low.0 {
                    let bp = pw.breakpoints();
                    let at = if piece < bp.len() { bp[piece] - 0.5 } else { bp[piece - 1] + 0.5 };
                    worst_low = (s.abs(), Some(vec![at]), i);
                }
            }
        }
    }

    let mut checks = vec![
        CheckResult {
            name: CHECK_NORMALIZED.into(),
            passed: worst_norm.0 <= 1e-12,
            severity: Severity::Required,
            witness: (worst_norm.0 > 1e-12).then(|| worst_norm.1.clone()).flatten(),
            detail: format!("max |sum p - 1| = {:e}", worst_norm.0),
        },
        CheckResult {
            name: CHECK_FLOOR.into(),
            passed: worst_floor.0 >= p_min,
            severity: Severity::Required,
            witness: (worst_floor.0 < p_min).then(|| worst_floor.1.clone()).flatten(),
            detail: format!("min p_i = {} (declared p_min = {p_min})", worst_floor.0),
        },
    ];
    let low_ok = worst_low.0 > 0.0 && worst_low.0.ln().is_finite();
    checks.push(CheckResult {
        name: CHECK_DERIV_LOWER.into(),
        passed: low_ok,
        severity: Severity::Required,
        witness: (!low_ok).then(|| worst_low.1.clone()).flatten(),
        detail: format!("min ||Dh_{}|| = {}", worst_low.2 + 1, worst_low.0),
    });
    let high_ok = worst_high.0.is_finite() && worst_high.0.ln().is_finite();
    checks.push(CheckResult {
        name: CHECK_DERIV_UPPER.into(),
        passed: high_ok,
        severity: Severity::Required,
        witness: (!high_ok).then(|| worst_high.1.clone()).flatten(),
        detail: format!("max ||Dh_{}|| = {}", worst_high.2 + 1, worst_high.0),
    });
    let non_homeo: Vec<usize> = system
        .maps()
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match m {
            super::maps::MapSpec::PiecewiseAffine1D(pw) if !pw.is_homeomorphism() => Some(i + 1),
            _ => None,
        })
        .collect();
    checks.push(CheckResult {
        name: CHECK_HOMEO.into(),
        passed: non_homeo.is_empty(),
        severity: Severity::Advisory,
        witness: None,
        detail: if non_homeo.is_empty() {
            "all piecewise maps are continuous and strictly monotone".into()
        } else {
            format!("maps {non_homeo:?} are not homeomorphisms of the line")
        },
    });
    ValidationReport {
        checks,
        samples: points.len(),
    }
}

/// Monte Carlo estimate of `sup_{x != y} sum_j p_j(x) log[d(h_j x, h_j y) / d(x, y)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginEstimate {
    /// Largest value found; a lower bound on the true supremum.
    pub sup_estimate: f64,
    /// `-sup_estimate` when it is negative, else 0.
    pub b_lower: f64,
    pub samples_used: usize,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    /// Plain-language statement of what was (not) established.
    pub note: String,
}

fn log_uniform_fraction(rng: &mut seed::Rng) -> f64 {
    // 10^{-9 u}, u ~ U[0, 1): separations in [1e-9, 1] times the reference length.
    10f64.powf(-9.0 * rng.random::<f64>())
}

fn random_direction(rng: &mut seed::Rng, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::point::norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn pair_for_index(
    components: &[OpenBox],
    domain: &OpenSet,
    breakpoints: &[f64],
    seed: u64,
    index: u64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut rng = seed::child_rng(seed, index);
    let pick = |rng: &mut seed::Rng| &components[rng.random_range(0..components.len())];
    let near_diagonal = |rng: &mut seed::Rng| {
        let comp = pick(rng);
        let x = comp.sample(rng);
        let delta = comp.diameter() * log_uniform_fraction(rng);
        let dir = random_direction(rng, x.len());
        let fwd: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + delta * u).collect();
        if domain.contains(&fwd) {
            return Some((x, fwd));
        }
        let back: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a - delta * u).collect();
        domain.contains(&back).then_some((x, back))
    };
    match index % 3 {
        0 => {
            let x = pick(&mut rng).sample(&mut rng);
            let y = pick(&mut rng).sample(&mut rng);
            Some((x, y))
        }
        1 => near_diagonal(&mut rng),
        _ => {
            if !breakpoints.is_empty() {
                let b = breakpoints[rng.random_range(0..breakpoints.len())];
                let scale = domain.bounding_box().diameter();
                let x = vec![b - scale * log_uniform_fraction(&mut rng)];
                let y = vec![b + scale * log_uniform_fraction(&mut rng)];
                if domain.contains(&x) && domain.contains(&y) {
                    return Some((x, y));
                }
            }
            near_diagonal(&mut rng)
        }
    }
}

/// Samples pairs from `domain` (uniform pairs, near-diagonal pairs with
/// log-uniform separations down to `1e-9` of a component's diameter, and
/// pairs straddling piecewise breakpoints) and returns the largest average
/// log chord ratio found. Pair `i` depends only on `(seed, i)`, so a larger
/// budget extends the sample set and never lowers the estimate.
pub fn coa_margin(system: &IfsSystem, domain: &OpenSet, budget: usize, seed: u64) -> Result<MarginEstimate> {
    if budget < 2 {
        return Err(Error::InvalidArgument("coa_margin needs budget >= 2".into()));
    }
    if domain.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: domain.dim(),
        });
    }
    let components = domain.components();
    if components.is_empty() || components.iter().any(|c| c.volume() <= 0.0) {
        return Err(Error::DegenerateDomain("domain has an empty component".into()));
    }
    let mut breakpoints: Vec<f64> = if system.dim() == 1 {
        system.maps().iter().flat_map(|m| m.breakpoints().iter().copied()).collect()
    } else {
        Vec::new()
    };
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut p = vec![0.0; system.k()];
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (Vec::new(), Vec::new());
    let mut used = 0usize;
    for index in 0..budget as u64 {
        let Some((x, y)) = pair_for_index(&components, domain, &breakpoints, seed, index) else {
            continue;
        };
        if x == y {
            continue;
        }
        used += 1;
        system.probs().eval_into(&x, &mut p);
        let value: f64 = system
            .maps()
            .iter()
            .zip(&p)
            .map(|(m, pj)| pj * m.chord_ratio(&x, &y).ln())
            .sum();
        if value > best {
            best = value;
            best_pair = (x, y);
        }
    }
    if used == 0 {
        return Err(Error::DegenerateDomain("no admissible pair could be sampled".into()));
    }
    let note = if best < 0.0 {
        format!("no violating pair found at budget {budget}; this does not certify contraction on average")
    } else {
        format!("violating pair found: average log chord ratio {best} >= 0")
    };
    Ok(MarginEstimate {
        sup_estimate: best,
        b_lower: if best < 0.0 { -best } else { 0.0 },
        samples_used: used,
        worst_pair: best_pair,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MapSpec, ProbabilityField, WeightFn};

    fn pair(a: f64, b: f64, c: f64) -> IfsSystem {
        IfsSystem::new(
            vec![MapSpec::affine_1d(a, 0.0), MapSpec::affine_1d(b, c)],
            ProbabilityField::uniform(2),
        )
        .unwrap()
    }

    fn unit() -> OpenSet {
        OpenSet::intervals(vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn cantor_validates() {
        let r = validate_system(&pair(1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0), 500, 1);
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn floor_violation_has_witness() {
        let c = 99f64.ln() / 25.0;
        let field = ProbabilityField::smooth(
            vec![WeightFn::constant(1.0), WeightFn::gaussian(99.0, c, vec![5.0])],
            0.1,
        )
        .unwrap();
        let s = IfsSystem::new(vec![MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(0.5, 1.0)], field)
            .unwrap()
            .with_domain(OpenSet::intervals(vec![(4.0, 6.0)]).unwrap())
            .unwrap();
        let r = validate_system(&s, 2002, 3);
        let floor = r.check(CHECK_FLOOR).unwrap();
        assert!(!floor.passed);
        let w = floor.witness.as_ref().unwrap()[0];
        assert!((w - 5.0).abs() < 1e-9, "witness {w}");
        assert!(!r.all_passed());
    }

    #[test]
    fn flat_map_fails_lower_bound() {
        let r = validate_system(&pair(0.0, 0.5, 0.5), 100, 0);
        assert!(!r.check(CHECK_DERIV_LOWER).unwrap().passed);
        assert!(r.check(CHECK_DERIV_UPPER).unwrap().passed);
    }

    #[test]
    fn margin_of_similitudes_is_exact() {
        let m = coa_margin(&pair(0.5, 0.5, 0.5), &unit(), 1000, 9).unwrap();
        assert!((m.sup_estimate - 0.5f64.ln()).abs() < 1e-12);
        assert!((m.b_lower - 2f64.ln()).abs() < 1e-12);
        let m = coa_margin(&pair(2.0, 3.0, 1.0), &unit(), 1000, 9).unwrap();
        assert!((m.sup_estimate - 0.5 * 6f64.ln()).abs() < 1e-12);
        assert_eq!(m.b_lower, 0.0);
    }

    #[test]
    fn margin_never_drops_with_budget() {
        let field = ProbabilityField::smooth(
            vec![WeightFn::constant(1.0), WeightFn::gaussian(1.0, 3.0, vec![0.3])],
            0.05,
        )
        .unwrap();
        let s = IfsSystem::new(vec![MapSpec::affine_1d(0.3, 0.0), MapSpec::affine_1d(1.5, -0.2)], field).unwrap();
        let mut last = f64::NEG_INFINITY;
        for budget in [10, 100, 1000, 5000] {
            let m = coa_margin(&s, &unit(), budget, 4).unwrap();
            assert!(m.sup_estimate >= last);
            last = m.sup_estimate;
        }
    }

    #[test]
    fn margin_rejects_tiny_budget() {
        assert!(matches!(
            coa_margin(&pair(0.5, 0.5, 0.5), &unit(), 1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }
}
