//! Open set condition checks: OSC, its strong variant (image separation
//! `R1`) and its regular variant (ball-intersection density `R3` below
//! radius `R2`).
//!
//! In one dimension images of interval unions under affine and
//! piecewise-affine maps are computed exactly; everywhere else the checks
//! sample and label their results as not certified.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IfsSystem;
use crate::point::distance;
use crate::seed;

/// Open axis-aligned box `(lo_1, hi_1) x ... x (lo_d, hi_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl OpenBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        OpenBox {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v > *l && *v < *h)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).max(0.0)).product()
    }

    pub fn diameter(&self) -> f64 {
        distance(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn sample(&self, rng: &mut seed::Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let v = rng.random_range(*l..*h);
                // random_range may return the lower end; keep strictly inside.
                if v <= *l {
                    0.5 * (l + h)
                } else {
                    v
                }
            })
            .collect()
    }

    fn disjoint_from(&self, other: &OpenBox) -> bool {
        (0..self.dim()).any(|a| self.hi[a] <= other.lo[a] || other.hi[a] <= self.lo[a])
    }
}

/// A finite union of open boxes, or the indexed family
/// `B_n = (10^n, 3 * 10^n)`, `n >= 0`, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpenSet {
    Boxes { boxes: Vec<OpenBox> },
    Decades { n_max: u32 },
}

pub const DEFAULT_DECADES_N_MAX: u32 = 6;

fn pow10(n: i32) -> f64 {
    10f64.powi(n)
}

impl OpenSet {
    /// Union of open intervals; overlapping intervals are merged.
    pub fn intervals(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::DegenerateSet("no intervals".into()));
        }
        if let Some(bad) = intervals
            .iter()
            .find(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::DegenerateSet(format!("bad interval {bad:?}")));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.0 < last.1 => last.1 = last.1.max(iv.1),
                _ => merged.push(iv),
            }
        }
        Ok(OpenSet::Boxes {
            boxes: merged.into_iter().map(|(a, b)| OpenBox::interval(a, b)).collect(),
        })
    }

    pub fn boxes(boxes: Vec<OpenBox>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::DegenerateSet("no boxes".into()))?;
        let d = first.dim();
        for b in &boxes {
            if b.dim() != d || b.hi.len() != d {
                return Err(Error::DegenerateSet("boxes of different dimensions".into()));
            }
            if b.volume() <= 0.0 || b.lo.iter().chain(&b.hi).any(|v| !v.is_finite()) {
                return Err(Error::DegenerateSet(format!("empty or unbounded box {b:?}")));
            }
        }
        if d == 1 {
            return OpenSet::intervals(boxes.iter().map(|b| (b.lo[0], b.hi[0])).collect());
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if !boxes[i].disjoint_from(&boxes[j]) {
                    return Err(Error::DegenerateSet(format!("boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(OpenSet::Boxes { boxes })
    }

    pub fn decades(n_max: u32) -> Self {
        OpenSet::Decades { n_max }
    }

    pub fn dim(&self) -> usize {
        match self {
            OpenSet::Boxes { boxes } => boxes[0].dim(),
            OpenSet::Decades { .. } => 1,
        }
    }

    /// Truncation level of an indexed family.
    pub fn truncation(&self) -> Option<u32> {
        match self {
            OpenSet::Decades { n_max } => Some(*n_max),
            OpenSet::Boxes { .. } => None,
        }
    }

    pub fn components(&self) -> Vec<OpenBox> {
        match self {
            OpenSet::Boxes { boxes } => boxes.clone(),
            OpenSet::Decades { n_max } => (0..=*n_max as i32)
                .map(|n| OpenBox::interval(pow10(n), 3.0 * pow10(n)))
                .collect(),
        }
    }

    /// Index `n` with `(a, b)` inside `B_n` of the untruncated family.
    fn decade_containing(a: f64, b: f64) -> Option<i32> {
        if !(a >= 1.0) || !(b > a) {
            return None;
        }
        let guess = a.log10().floor() as i32;
        (guess - 1..=guess + 1)
            .filter(|n| *n >= 0)
            .find(|&n| pow10(n) <= a && b <= 3.0 * pow10(n))
    }

    /// Membership. For the indexed family membership is decided against the
    /// whole family, not only the truncated part.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            OpenSet::Boxes { boxes } => boxes.iter().any(|b| b.contains(x)),
            OpenSet::Decades { .. } => {
                let v = x[0];
                v > 1.0 && {
                    let n = v.log10().floor() as i32;
                    (n - 1..=n + 1)
                        .filter(|m| *m >= 0)
                        .any(|m| v > pow10(m) && v < 3.0 * pow10(m))
                }
            }
        }
    }

    /// Whether the open interval `(a, b)` lies inside one component.
    pub fn contains_interval(&self, a: f64, b: f64) -> bool {
        match self {
            OpenSet::Boxes { boxes } => boxes.iter().any(|bx| bx.lo[0] <= a && b <= bx.hi[0]),
            OpenSet::Decades { .. } => OpenSet::decade_containing(a, b).is_some(),
        }
    }

    pub fn bounding_box(&self) -> OpenBox {
        let comps = self.components();
        let d = comps[0].dim();
        let lo = (0..d)
            .map(|a| comps.iter().map(|c| c.lo[a]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..d)
            .map(|a| comps.iter().map(|c| c.hi[a]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        OpenBox { lo, hi }
    }

    pub fn min_component_diameter(&self) -> f64 {
        self.components()
            .iter()
            .map(OpenBox::diameter)
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform component, then a uniform point inside it.
    pub fn sample(&self, rng: &mut seed::Rng) -> Vec<f64> {
        let comps = self.components();
        comps[rng.random_range(0..comps.len())].sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Exact interval arithmetic.
    Exact,
    /// Monte Carlo; a pass means no counterexample was found.
    Sampled,
}

impl CheckMode {
    pub fn label(self) -> &'static str {
        match self {
            CheckMode::Exact => "certified by exact interval arithmetic",
            CheckMode::Sampled => "sampled, not certified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: String,
    pub point: Vec<f64>,
    pub detail: String,
}

/// Image of one component under one map (exact one-dimensional mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub map: usize,
    pub component: (f64, f64),
    pub image: Vec<(f64, f64)>,
    /// Index `m` of the component of `U` containing the image, if any.
    pub lands_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoscReport {
    pub r2: f64,
    pub r3: f64,
    pub per_radius: Vec<RadiusDensity>,
    pub mode: CheckMode,
    pub density_floor: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusDensity {
    pub r: f64,
    pub inf_ratio: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscReport {
    pub mode: CheckMode,
    pub label: String,
    pub containment_pass: bool,
    pub disjointness_pass: bool,
    /// Image separation; 0 whenever disjointness fails.
    pub separation_r1: f64,
    /// `(R2, R3)` once [`check_rosc`] has been run.
    pub regularity: Option<(f64, f64)>,
    pub witnesses: Vec<Witness>,
    pub truncation: Option<u32>,
    pub images: Vec<ImageRecord>,
}

impl OscReport {
    pub fn osc_pass(&self) -> bool {
        self.containment_pass && self.disjointness_pass
    }
}

type Images = Vec<Vec<(f64, f64)>>;

/// Exact images `h_i(U)` as sorted interval unions, or `None` when some
/// map has no exact one-dimensional image rule.
fn exact_images(system: &IfsSystem, set: &OpenSet) -> Option<(Images, Vec<ImageRecord>)> {
    if system.dim() != 1 {
        return None;
    }
    let comps = set.components();
    let mut images = Vec::with_capacity(system.k());
    let mut records = Vec::new();
    for (i, m) in system.maps().iter().enumerate() {
        let mut all = Vec::new();
        for c in &comps {
            let img = m.image_interval(c.lo[0], c.hi[0])?;
            let lands_in = match img.as_slice() {
                [(a, b)] => comps.iter().position(|d| d.lo[0] <= *a && *b <= d.hi[0]).or_else(|| {
                    OpenSet::decade_containing(*a, *b)
                        .filter(|_| set.truncation().is_some())
                        .map(|n| n as usize)
                }),
                _ => None,
            };
            records.push(ImageRecord {
                map: i,
                component: (c.lo[0], c.hi[0]),
                image: img.clone(),
                lands_in,
            });
            all.extend(img);
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        images.push(all);
    }
    Some((images, records))
}

fn interval_gap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.1).max(a.0 - b.1).max(0.0)
}

fn exact_min_gap(images: &Images) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            for &a in &images[i] {
                for &b in &images[j] {
                    best = best.min(interval_gap(a, b));
                }
            }
        }
    }
    best
}

/// Checks `h_i(U) ⊂ U` and `h_i(U) ∩ h_j(U) = ∅`.
///
/// For the indexed family `B_n` the images of `B_0..=B_{n_max}` are checked
/// against the untruncated family, so `h(B_{n_max}) ⊂ B_{n_max + 1}` counts
/// as contained.
pub fn check_osc(system: &IfsSystem, set: &OpenSet, budget: usize, seed: u64) -> Result<OscReport> {
    if budget < 100 {
        return Err(Error::InvalidArgument("check_osc needs budget >= 100".into()));
    }
    if set.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: set.dim(),
        });
    }
    if let Some((images, records)) = exact_images(system, set) {
        let mut witnesses = Vec::new();
        for (i, img) in images.iter().enumerate() {
            for &(a, b) in img {
                if !set.contains_interval(a, b) {
                    witnesses.push(Witness {
                        kind: "containment".into(),
                        point: vec![0.5 * (a + b)],
                        detail: format!("h_{}(U) ⊃ ({a}, {b}) not inside U", i + 1),
                    });
                }
            }
        }
        let containment_pass = witnesses.is_empty();
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                for &a in &images[i] {
                    for &b in &images[j] {
                        let lo = a.0.max(b.0);
                        let hi = a.1.min(b.1);
                        if lo < hi {
                            witnesses.push(Witness {
                                kind: "disjointness".into(),
                                point: vec![0.5 * (lo + hi)],
                                detail: format!("h_{}(U) and h_{}(U) share ({lo}, {hi})", i + 1, j + 1),
                            });
                        }
                    }
                }
            }
        }
        let disjointness_pass = witnesses.iter().all(|w| w.kind != "disjointness");
        let separation_r1 = if disjointness_pass && images.len() > 1 {
            exact_min_gap(&images)
        } else {
            0.0
        };
        return Ok(OscReport {
            mode: CheckMode::Exact,
            label: CheckMode::Exact.label().into(),
            containment_pass,
            disjointness_pass,
            separation_r1,
            regularity: None,
            witnesses,
            truncation: set.truncation(),
            images: records,
        });
    }

    let mut rng = seed::rng(seed);
    let mut witnesses = Vec::new();
    let mut y = vec![0.0; system.dim()];
    let mut containment_pass = true;
    let mut disjointness_pass = true;
    for _ in 0..budget {
        let u = set.sample(&mut rng);
        let i = rng.random_range(0..system.k());
        system.apply_into(i, &u, &mut y);
        if containment_pass && !set.contains(&y) {
            containment_pass = false;
            witnesses.push(Witness {
                kind: "containment".into(),
                point: y.clone(),
                detail: format!("h_{}({u:?}) left U", i + 1),
            });
        }
        if disjointness_pass {
            for (j, m) in system.maps().iter().enumerate() {
                if j == i {
                    continue;
                }
                if let Some(v) = m.apply_inverse(&y) {
                    if set.contains(&v) {
                        disjointness_pass = false;
                        witnesses.push(Witness {
                            kind: "disjointness".into(),
                            point: y.clone(),
                            detail: format!("point lies in h_{}(U) and h_{}(U)", i + 1, j + 1),
                        });
                        break;
                    }
                }
            }
        }
    }
    let separation_r1 = if disjointness_pass {
        sampled_min_gap(system, set, budget, seed)
    } else {
        0.0
    };
    Ok(OscReport {
        mode: CheckMode::Sampled,
        label: CheckMode::Sampled.label().into(),
        containment_pass,
        disjointness_pass,
        separation_r1,
        regularity: None,
        witnesses,
        truncation: set.truncation(),
        images: Vec::new(),
    })
}

fn sampled_min_gap(system: &IfsSystem, set: &OpenSet, budget: usize, seed: u64) -> f64 {
    let per_map = (budget / system.k()).clamp(16, 2048);
    let mut rng = seed::child_rng(seed, 1);
    let clouds: Vec<Vec<Vec<f64>>> = (0..system.k())
        .map(|i| {
            (0..per_map)
                .map(|_| {
                    let u = set.sample(&mut rng);
                    let mut y = vec![0.0; system.dim()];
                    system.apply_into(i, &u, &mut y);
                    y
                })
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..clouds.len() {
        for j in i + 1..clouds.len() {
            for a in &clouds[i] {
                for b in &clouds[j] {
                    best = best.min(distance(a, b));
                }
            }
        }
    }
    best
}

const SOSC_SAMPLE_BUDGET: usize = 4096;

/// `R1 = min_{i != j} dist(h_i(U), h_j(U))`: exact in one dimension,
/// a sampled estimate (fixed budget and seed) otherwise.
pub fn check_sosc(system: &IfsSystem, set: &OpenSet) -> Result<f64> {
    if system.k() < 2 {
        return Ok(f64::INFINITY);
    }
    let report = check_osc(system, set, SOSC_SAMPLE_BUDGET, 0)?;
    if !report.disjointness_pass {
        let w = report
            .witnesses
            .iter()
            .find(|w| w.kind == "disjointness")
            .map(|w| w.detail.clone())
            .unwrap_or_default();
        return Err(Error::OscViolated(w));
    }
    Ok(report.separation_r1)
}

/// Dyadic radii `min component diameter * 2^-k`, `k = 1..=10`.
pub fn default_r_grid(set: &OpenSet) -> Vec<f64> {
    let base = set.min_component_diameter();
    (1..=10).map(|k| base * 0.5f64.powi(k)).collect()
}

pub const DEFAULT_DENSITY_FLOOR: f64 = 0.05;

fn covered_length(x: f64, r: f64, comps: &[OpenBox]) -> f64 {
    comps
        .iter()
        .map(|c| ((x + r).min(c.hi[0]) - (x - r).max(c.lo[0])).max(0.0))
        .sum()
}

/// For each `r` in `r_grid`, the infimum over `x ∈ U` of
/// `vol(B_r(x) ∩ U) / r^d`. `R2` is the largest grid radius and `R3` the
/// smallest of those infima, so adding larger radii can only lower `R3`.
pub fn check_rosc(
    system: &IfsSystem,
    set: &OpenSet,
    r_grid: &[f64],
    budget: usize,
    seed: u64,
) -> Result<RoscReport> {
    check_rosc_with_floor(system, set, r_grid, budget, seed, DEFAULT_DENSITY_FLOOR)
}

pub fn check_rosc_with_floor(
    system: &IfsSystem,
    set: &OpenSet,
    r_grid: &[f64],
    budget: usize,
    seed: u64,
    density_floor: f64,
) -> Result<RoscReport> {
    if set.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: set.dim(),
        });
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument("r_grid must hold positive radii".into()));
    }
    if r_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("r_grid must be strictly decreasing".into()));
    }
    let comps = set.components();
    if comps.iter().any(|c| c.volume() <= 0.0) {
        return Err(Error::DegenerateSet("component with zero volume".into()));
    }
    let d = set.dim();
    let (per_radius, mode) = if d == 1 {
        let per: Vec<RadiusDensity> = r_grid
            .iter()
            .map(|&r| {
                let mut cands = Vec::new();
                for c in &comps {
                    let (a, b) = (c.lo[0], c.hi[0]);
                    cands.extend([a, b, a + r, a - r, b + r, b - r]);
                }
                let mut best = (f64::INFINITY, 0.0);
                for x in cands {
                    if !comps.iter().any(|c| x >= c.lo[0] && x <= c.hi[0]) {
                        continue;
                    }
                    let ratio = covered_length(x, r, &comps) / r;
                    if ratio < best.0 {
                        best = (ratio, x);
                    }
                }
                RadiusDensity {
                    r,
                    inf_ratio: best.0,
                    witness: vec![best.1],
                }
            })
            .collect();
        (per, CheckMode::Exact)
    } else {
        let per = r_grid
            .iter()
            .enumerate()
            .map(|(ri, &r)| {
                let mut rng = seed::child_rng(seed, ri as u64);
                let mut centers: Vec<Vec<f64>> = Vec::new();
                for c in &comps {
                    // Points just inside every corner are the worst case for boxes.
                    for mask in 0..(1usize << d) {
                        centers.push(
                            (0..d)
                                .map(|a| {
                                    let eps = 1e-9 * (c.hi[a] - c.lo[a]);
                                    if mask >> a & 1 == 1 {
                                        c.hi[a] - eps
                                    } else {
                                        c.lo[a] + eps
                                    }
                                })
                                .collect(),
                        );
                    }
                }
                for _ in 0..budget {
                    centers.push(set.sample(&mut rng));
                }
                let ball_volume = unit_ball_volume(d) * r.powi(d as i32);
                let inner = 256;
                let mut best = (f64::INFINITY, Vec::new());
                for x in centers {
                    let mut hits = 0usize;
                    for _ in 0..inner {
                        let p = uniform_in_ball(&mut rng, &x, r);
                        if set.contains(&p) {
                            hits += 1;
                        }
                    }
                    let ratio = ball_volume * hits as f64 / inner as f64 / r.powi(d as i32);
                    if ratio < best.0 {
                        best = (ratio, x);
                    }
                }
                RadiusDensity {
                    r,
                    inf_ratio: best.0,
                    witness: best.1,
                }
            })
            .collect();
        (per, CheckMode::Sampled)
    };
    let r3 = per_radius
        .iter()
        .map(|p: &RadiusDensity| p.inf_ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(RoscReport {
        r2: r_grid[0],
        r3,
        per_radius,
        mode,
        density_floor,
        passes: r3 >= density_floor,
    })
}

fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => {
            // V_d = V_{d-2} * 2 pi / d
            let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
            let mut k = if d % 2 == 0 { 2 } else { 3 };
            while k <= d {
                v *= 2.0 * std::f64::consts::PI / k as f64;
                k += 2;
            }
            v
        }
    }
}

fn uniform_in_ball(rng: &mut seed::Rng, center: &[f64], r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = center.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return center.iter().zip(v).map(|(c, u)| c + r * u).collect();
        }
    }
}
