//! Cover-based upper bound for the dimension of the invariant measure.
//!
//! The cloud is partitioned into grid cells `F` of side `L`. For every cell
//! and every word `ω` of length `n` the set `h_ω(F)` carries mass about
//! `ν(F) p_ω(x_F)` and has diameter measured from the images of a few cloud
//! points of `F`. Words are first filtered by the two-sided bounds
//!
//! ```text
//! -log K + n(1+ε)η ≤ log p_ω(x) ≤ log K + n(1-ε)η
//! -log K + n(1+ε)λ ≤ log |h'_ω(x)| ≤ log K + n(1-ε)λ
//! ```
//!
//! with `K` the smallest power of two keeping mass `1-ε`. For each `t` the
//! cheapest kept subfamily (largest `mass / diam^t` first) reaching mass
//! `1-3ε` is formed, and `t` is accepted when `Σ diam^t ≤ 1`. The reported
//! exponent is the smallest accepted `t` over all cell sizes tried.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ergodic::integrated_exponents;
use crate::error::{Error, Result};
use crate::model::IfsSystem;
use crate::point::distance;
use crate::sampler::EmpiricalMeasure;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverOptions {
    /// Cap on `cells * k^n` word images per cell size.
    pub max_words: u128,
    pub max_cells: usize,
    /// Cloud points per cell whose images measure the diameter.
    pub points_per_cell: usize,
    /// Cell sides `extent * 2^-c` for these `c`.
    pub cell_levels: Vec<u32>,
    /// Cells are built from at most this many cloud points (evenly strided).
    pub max_cloud_points: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            max_words: 1 << 22,
            max_cells: 64,
            points_per_cell: 4,
            cell_levels: (0..=30).collect(),
            max_cloud_points: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub n: usize,
    pub epsilon: f64,
    /// The `K` of the word filter.
    pub k_bound: f64,
    pub num_sets: usize,
    pub diameters: DiameterStats,
    /// Smallest accepted grid value of `t`; `None` when no `t` worked.
    pub critical_exponent: Option<f64>,
    pub mass_covered: f64,
    pub sum_at_critical: f64,
    pub cell_side: f64,
    pub cells: usize,
    pub eta_hat: f64,
    pub lambda_hat: f64,
    /// Diameters of the accepted family, largest first.
    pub set_diameters: Vec<f64>,
}

/// Default half-width of the filter band, in standard deviations of the
/// length-`n` sums of `log p` and `log |h'|`.
pub const DEFAULT_BAND_WIDTH: f64 = 0.5;

/// `ε` making the filter band `width` standard deviations wide:
/// `ε = width · max(σ_η / |η|, σ_λ / |λ|) / √n`, kept inside `[0.01, 0.24]`.
/// The per-step spreads `σ` are taken under the measure and `p_x`.
pub fn auto_epsilon(system: &IfsSystem, measure: &EmpiricalMeasure, n: usize, width: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) || n == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 1 and width > 0, got n = {n}, width = {width}")));
    }
    if measure.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut p = vec![0.0; system.k()];
    let mut sums = [0.0f64; 4];
    for (x, w) in measure.iter() {
        system.probs().eval_into(x, &mut p);
        for (j, pj) in p.iter().enumerate() {
            if *pj > 0.0 {
                let (lp, ld) = (pj.ln(), system.maps()[j].derivative_norm_right(x).ln());
                sums[0] += w * pj * lp;
                sums[1] += w * pj * lp * lp;
                sums[2] += w * pj * ld;
                sums[3] += w * pj * ld * ld;
            }
        }
    }
    let (eta, lambda) = (sums[0], sums[2]);
    if !(lambda < 0.0) {
        return Err(Error::NonNegativeLyapunov(lambda));
    }
    let ratio = |mean: f64, sq: f64| {
        let sd = (sq - mean * mean).max(0.0).sqrt();
        if mean == 0.0 { 0.0 } else { sd / mean.abs() }
    };
    let spread = ratio(eta, sums[1]).max(ratio(lambda, sums[3]));
    Ok((width * spread / (n as f64).sqrt()).clamp(0.01, 0.24))
}

/// `count` equispaced values `d/count, 2d/count, ..., d`.
pub fn default_t_grid(dim: usize, count: usize) -> Vec<f64> {
    (1..=count).map(|i| dim as f64 * i as f64 / count as f64).collect()
}

struct Cell {
    mass: f64,
    /// Representative first, then diameter probes.
    points: Vec<Vec<f64>>,
}

#[derive(Clone, Copy)]
struct Item {
    ln_mass: f64,
    ln_diam: f64,
    /// Smallest `log2 K` admitting the word.
    need: u32,
}

fn weighted_quantile_box(measure: &EmpiricalMeasure, q: f64) -> (Vec<f64>, Vec<f64>) {
    let d = measure.dim();
    let total = measure.total_weight();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for a in 0..d {
        let mut v: Vec<(f64, f64)> = (0..measure.len())
            .map(|i| (measure.point(i)[a], measure.raw_weights()[i]))
            .collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let pick = |target: f64| {
            let mut acc = 0.0;
            for (x, w) in &v {
                acc += w;
                if acc >= target {
                    return *x;
                }
            }
            v.last().unwrap().0
        };
        lo[a] = pick(q * total);
        hi[a] = pick((1.0 - q) * total);
    }
    (lo, hi)
}

fn build_cells(
    measure: &EmpiricalMeasure,
    origin: &[f64],
    side: f64,
    opts: &CoverOptions,
    max_cells: usize,
    target: f64,
    rng: &mut seed::Rng,
) -> Option<Vec<Cell>> {
    let d = measure.dim();
    let stride = measure.len().div_ceil(opts.max_cloud_points.max(1)).max(1);
    let key_of = |x: &[f64], buf: &mut Vec<i64>| {
        buf.clear();
        buf.extend(x.iter().zip(origin).map(|(v, o)| ((v - o) / side).floor() as i64));
    };
    let mut masses: HashMap<Box<[i64]>, f64> = HashMap::new();
    let mut key = Vec::with_capacity(d);
    let mut used_weight = 0.0;
    for i in (0..measure.len()).step_by(stride) {
        key_of(measure.point(i), &mut key);
        let w = measure.raw_weights()[i];
        used_weight += w;
        match masses.get_mut(key.as_slice()) {
            Some(m) => *m += w,
            None => {
                masses.insert(key.clone().into_boxed_slice(), w);
            }
        }
    }
    let mut ranked: Vec<(Box<[i64]>, f64)> = masses.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut chosen: HashMap<Box<[i64]>, usize> = HashMap::new();
    let mut acc = 0.0;
    for (k, m) in &ranked {
        if acc >= target || chosen.len() >= max_cells {
            break;
        }
        acc += m / used_weight;
        chosen.insert(k.clone(), chosen.len());
    }
    if acc < target {
        return None;
    }
    // Per chosen cell: reservoir of probes and per-axis extreme points.
    let n_cells = chosen.len();
    let cap = opts.points_per_cell.max(1);
    let mut reservoirs: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    let mut seen = vec![0usize; n_cells];
    let mut extremes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_cells];
    for i in (0..measure.len()).step_by(stride) {
        let x = measure.point(i);
        key_of(x, &mut key);
        let Some(&c) = chosen.get(key.as_slice()) else {
            continue;
        };
        seen[c] += 1;
        if reservoirs[c].len() < cap {
            reservoirs[c].push(i);
        } else {
            let j = rng.random_range(0..seen[c]);
            if j < cap {
                reservoirs[c][j] = i;
            }
        }
        let ext = &mut extremes[c];
        if ext.is_empty() {
            *ext = vec![(i, i); d];
        }
        for (a, e) in ext.iter_mut().enumerate() {
            if x[a] < measure.point(e.0)[a] {
                e.0 = i;
            }
            if x[a] > measure.point(e.1)[a] {
                e.1 = i;
            }
        }
    }
    let mut cells: Vec<(usize, Cell)> = chosen
        .iter()
        .map(|(k, &c)| {
            let mut ids = reservoirs[c].clone();
            for &(a, b) in &extremes[c] {
                ids.push(a);
                ids.push(b);
            }
            let rep = ids[0];
            ids.sort_unstable();
            ids.dedup();
            let mut points = vec![measure.point(rep).to_vec()];
            points.extend(ids.into_iter().filter(|i| *i != rep).map(|i| measure.point(i).to_vec()));
            let mass = ranked.iter().find(|(rk, _)| rk == k).map(|(_, m)| m / used_weight).unwrap();
            (c, Cell { mass, points })
        })
        .collect();
    cells.sort_by_key(|(c, _)| *c);
    Some(cells.into_iter().map(|(_, cell)| cell).collect())
}

struct Enumerator<'a> {
    system: &'a IfsSystem,
    n: usize,
    d: usize,
    band_eta: (f64, f64),
    band_lambda: (f64, f64),
    probs: Vec<f64>,
}

impl Enumerator<'_> {
    fn need(&self, lp: f64, ld: f64) -> u32 {
        let excess = [
            self.band_eta.0 - lp,
            lp - self.band_eta.1,
            self.band_lambda.0 - ld,
            ld - self.band_lambda.1,
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        (excess / std::f64::consts::LN_2 - 1e-9).ceil().clamp(0.0, u32::MAX as f64) as u32
    }

    /// Depth-first over all words, carrying the cell's points.
    fn walk(&mut self, depth: usize, pts: &[f64], lp: f64, ld: f64, ln_cell: f64, out: &mut Vec<Item>) {
        let d = self.d;
        if depth == self.n {
            let count = pts.len() / d;
            let mut lo = pts[..d].to_vec();
            let mut hi = pts[..d].to_vec();
            for p in pts.chunks_exact(d).take(count) {
                for a in 0..d {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            out.push(Item {
                ln_mass: ln_cell + lp,
                ln_diam: distance(&lo, &hi).ln(),
                need: self.need(lp, ld),
            });
            return;
        }
        let k = self.system.k();
        self.system.probs().eval_into(&pts[..d], &mut self.probs);
        let step: Vec<(f64, f64)> = (0..k)
            .map(|s| {
                (
                    self.probs[s].ln(),
                    self.system.maps()[s].derivative_norm_right(&pts[..d]).ln(),
                )
            })
            .collect();
        let mut next = vec![0.0; pts.len()];
        for (s, (dlp, dld)) in step.into_iter().enumerate() {
            for (src, dst) in pts.chunks_exact(d).zip(next.chunks_exact_mut(d)) {
                self.system.apply_into(s, src, dst);
            }
            self.walk(depth + 1, &next, lp + dlp, ld + dld, ln_cell, out);
        }
    }
}

struct LevelResult {
    t: f64,
    sum: f64,
    mass: f64,
    k_log2: u32,
    cells: usize,
    side: f64,
    family: Vec<f64>,
}

/// Mass and cost of the cheapest prefix by descending key reaching
/// `target` mass. `None` if the total is short.
fn greedy_cost(items: &mut [(f64, f64, f64)], target: f64) -> Option<(f64, f64)> {
    items.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let (mut mass, mut cost) = (0.0, 0.0);
    for (_, m, c) in items.iter() {
        if mass >= target {
            return Some((mass, cost));
        }
        mass += m;
        cost += c;
    }
    (mass >= target).then_some((mass, cost))
}

/// Smallest `log2 K` whose filter keeps `target` of the cell mass.
fn smallest_k(items: &[Item], cells: &[Cell], target: f64) -> Option<u32> {
    let max_need = items.iter().map(|i| i.need).max()?;
    let mut by_need = vec![0.0; max_need as usize + 1];
    for it in items {
        by_need[it.need as usize] += it.ln_mass.exp();
    }
    let total_cells: f64 = cells.iter().map(|c| c.mass).sum();
    let mut acc = 0.0;
    for (m, v) in by_need.iter().enumerate() {
        acc += v;
        if acc >= target * total_cells {
            return Some(m as u32);
        }
    }
    None
}

/// See the module documentation.
pub fn cover_upper_bound(
    system: &IfsSystem,
    measure: &EmpiricalMeasure,
    n: usize,
    epsilon: f64,
    t_grid: &[f64],
    seed: u64,
) -> Result<CoverReport> {
    cover_upper_bound_with(system, measure, n, epsilon, t_grid, seed, &CoverOptions::default())
}

pub fn cover_upper_bound_with(
    system: &IfsSystem,
    measure: &EmpiricalMeasure,
    n: usize,
    epsilon: f64,
    t_grid: &[f64],
    seed: u64,
    opts: &CoverOptions,
) -> Result<CoverReport> {
    let d = system.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("word length n must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/4), got {epsilon}")));
    }
    if t_grid.is_empty()
        || t_grid.windows(2).any(|w| w[0] >= w[1])
        || t_grid.iter().any(|t| !(*t > 0.0 && *t <= d as f64))
    {
        return Err(Error::InvalidArgument("t_grid must increase within (0, d]".into()));
    }
    if measure.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: measure.dim(),
        });
    }
    let (eta, lambda) = integrated_exponents(system, measure)?;
    if !(lambda < 0.0) {
        return Err(Error::NonNegativeLyapunov(lambda));
    }
    let words = (system.k() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if words > opts.max_words {
        return Err(Error::BudgetExceeded {
            needed: words,
            cap: opts.max_words,
        });
    }
    let max_cells = opts.max_cells.min((opts.max_words / words).max(1) as usize).max(1);
    let nf = n as f64;
    let mut en = Enumerator {
        system,
        n,
        d,
        band_eta: (nf * (1.0 + epsilon) * eta, nf * (1.0 - epsilon) * eta),
        band_lambda: (nf * (1.0 + epsilon) * lambda, nf * (1.0 - epsilon) * lambda),
        probs: vec![0.0; system.k()],
    };
    let (lo, hi) = weighted_quantile_box(measure, epsilon / 4.0);
    let extent = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    let extent = if extent > 0.0 { extent } else { 1.0 };
    let mass_target = 1.0 - 3.0 * epsilon;
    let mut best: Option<LevelResult> = None;
    for &c in &opts.cell_levels {
        let side = extent * 0.5f64.powi(c as i32);
        let mut rng = seed::child_rng(seed, c as u64);
        // Finer cells need more of them, so the first miss ends the scan.
        let Some(cells) = build_cells(measure, &lo, side, opts, max_cells, 1.0 - epsilon, &mut rng) else {
            break;
        };
        let mut items = Vec::with_capacity(cells.len() * words as usize);
        for cell in &cells {
            let flat: Vec<f64> = cell.points.concat();
            en.walk(0, &flat, 0.0, 0.0, cell.mass.ln(), &mut items);
        }
        let Some(k_log2) = smallest_k(&items, &cells, 1.0 - epsilon) else {
            continue;
        };
        items.retain(|it| it.need <= k_log2);
        let mut scratch: Vec<(f64, f64, f64)> = Vec::with_capacity(items.len());
        let mut try_t = |t: f64| {
            scratch.clear();
            scratch.extend(items.iter().map(|it| {
                (it.ln_mass - t * it.ln_diam, it.ln_mass.exp(), (t * it.ln_diam).exp())
            }));
            greedy_cost(&mut scratch, mass_target).filter(|(_, sum)| *sum <= 1.0)
        };
        let cap = best
            .as_ref()
            .map_or(t_grid.len(), |b| t_grid.partition_point(|t| *t < b.t));
        let mut accepted = None;
        if items.iter().all(|it| it.ln_diam <= 0.0) {
            // Every cost falls as t grows, so acceptance is monotone in t.
            if cap > 0 {
                if let Some((m, s)) = try_t(t_grid[cap - 1]) {
                    let (mut lo_i, mut hi_i) = (0, cap - 1);
                    let mut found = (m, s);
                    while lo_i < hi_i {
                        let mid = (lo_i + hi_i) / 2;
                        match try_t(t_grid[mid]) {
                            Some(r) => {
                                hi_i = mid;
                                found = r;
                            }
                            None => lo_i = mid + 1,
                        }
                    }
                    accepted = Some((t_grid[hi_i], found.0, found.1));
                }
            }
        } else {
            accepted = t_grid[..cap]
                .iter()
                .find_map(|&t| try_t(t).map(|(m, s)| (t, m, s)));
        }
        if let Some((t, mass, sum)) = accepted {
            let mut order: Vec<&Item> = items.iter().collect();
            order.sort_by(|a, b| (b.ln_mass - t * b.ln_diam).total_cmp(&(a.ln_mass - t * a.ln_diam)));
            let mut family = Vec::new();
            let mut m = 0.0;
            for it in order {
                if m >= mass_target {
                    break;
                }
                m += it.ln_mass.exp();
                family.push(it.ln_diam.exp());
            }
            best = Some(LevelResult {
                t,
                sum,
                mass,
                k_log2,
                cells: cells.len(),
                side,
                family,
            });
        }
    }
    let Some(b) = best else {
        return Ok(CoverReport {
            n,
            epsilon,
            k_bound: f64::NAN,
            num_sets: 0,
            diameters: DiameterStats {
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
                mean: f64::NAN,
            },
            critical_exponent: None,
            mass_covered: 0.0,
            sum_at_critical: f64::NAN,
            cell_side: f64::NAN,
            cells: 0,
            eta_hat: eta,
            lambda_hat: lambda,
            set_diameters: Vec::new(),
        });
    };
    let mut diam = b.family.clone();
    diam.sort_by(|x, y| y.total_cmp(x));
    let stats = DiameterStats {
        min: *diam.last().unwrap_or(&f64::NAN),
        median: diam.get(diam.len() / 2).copied().unwrap_or(f64::NAN),
        max: *diam.first().unwrap_or(&f64::NAN),
        mean: diam.iter().sum::<f64>() / diam.len().max(1) as f64,
    };
    Ok(CoverReport {
        n,
        epsilon,
        k_bound: 2f64.powi(b.k_log2 as i32),
        num_sets: diam.len(),
        diameters: stats,
        critical_exponent: Some(b.t),
        mass_covered: b.mass,
        sum_at_critical: b.sum,
        cell_side: b.side,
        cells: b.cells,
        eta_hat: eta,
        lambda_hat: lambda,
        set_diameters: diam,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_takes_best_ratio_first() {
        let mut items = vec![(1.0, 0.5, 0.1), (3.0, 0.3, 0.01), (2.0, 0.2, 0.05), (0.0, 0.9, 5.0)];
        let (m, c) = greedy_cost(&mut items, 0.45).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert!((c - 0.06).abs() < 1e-12);
        let mut items = vec![(1.0, 0.1, 0.1)];
        assert!(greedy_cost(&mut items, 0.5).is_none());
    }
}
