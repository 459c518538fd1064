//! TOML run configuration.
//!
//! A file has an optional `[system]` (built-in name or inline maps and
//! probabilities), an optional `[open_set]`, and one table of knobs per
//! subcommand. Every table rejects unknown keys. Parse errors carry the
//! line and column from the TOML reader; errors found while building the
//! system name the key path and the line it starts on.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::builtin::{self, NamedSystem};
use crate::error::{Error, Result};
use crate::geometry::{OpenBox, OpenSet, DEFAULT_DECADES_N_MAX};
use crate::model::{IfsSystem, Matrix, MapSpec, PiecewiseAffine, ProbabilityField, WeightFn};
use crate::point::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub steps: usize,
    pub burn_in: usize,
    pub trajectories: usize,
    pub thinning: usize,
    /// Starting point; defaults to the system's own start.
    pub x0: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            steps: 1_000_000,
            burn_in: crate::sampler::DEFAULT_BURN_IN,
            trajectories: 1,
            thinning: 1,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionSection {
    pub centers: usize,
    /// Dyadic radii per center; `None` picks enough to reach the mass floor.
    pub levels: Option<usize>,
    /// Largest radius; `None` means cloud diameter / 8.
    pub r0: Option<f64>,
    /// When set, also run the Frostman check at this exponent.
    pub frostman_s: Option<f64>,
}

impl Default for DimensionSection {
    fn default() -> Self {
        DimensionSection {
            centers: 400,
            levels: None,
            r0: None,
            frostman_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    pub n: usize,
    /// `None` selects epsilon from `width` (see `auto_epsilon`).
    pub epsilon: Option<f64>,
    pub width: f64,
    pub t_points: usize,
    pub max_words: u64,
    pub max_cells: usize,
    pub points_per_cell: usize,
}

impl Default for CoverSection {
    fn default() -> Self {
        let o = crate::dimension::CoverOptions::default();
        CoverSection {
            n: 12,
            epsilon: None,
            width: crate::dimension::DEFAULT_BAND_WIDTH,
            t_points: 64,
            max_words: o.max_words as u64,
            max_cells: o.max_cells,
            points_per_cell: o.points_per_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderSection {
    /// Words as digit strings; empty means every word up to `max_len`.
    pub words: Vec<String>,
    pub max_len: usize,
}

impl Default for CylinderSection {
    fn default() -> Self {
        CylinderSection {
            words: Vec::new(),
            max_len: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscSection {
    pub budget: usize,
    pub density_floor: f64,
    /// Radii for the regularity check; empty means the default grid.
    pub r_grid: Vec<f64>,
}

impl Default for OscSection {
    fn default() -> Self {
        OscSection {
            budget: 10_000,
            density_floor: crate::geometry::DEFAULT_DENSITY_FLOOR,
            r_grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub budget: usize,
    pub margin_budget: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            budget: 10_000,
            margin_budget: 100_000,
        }
    }
}

/// Where the system comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SystemSource {
    Builtin { name: String, p1: Option<f64> },
    Inline { system: IfsSystem },
}

/// Fully resolved configuration; echoed into output headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemSource,
    pub open_set: Option<OpenSet>,
    pub run: RunSection,
    pub dimension: DimensionSection,
    pub cover: CoverSection,
    pub cylinder: CylinderSection,
    pub osc: OscSection,
    pub validate: ValidateSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: Option<Spanned<RawSystem>>,
    open_set: Option<Spanned<RawOpenSet>>,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    dimension: DimensionSection,
    #[serde(default)]
    cover: CoverSection,
    #[serde(default)]
    cylinder: CylinderSection,
    #[serde(default)]
    osc: OscSection,
    #[serde(default)]
    validate: ValidateSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dimension: Option<usize>,
    builtin: Option<String>,
    p1: Option<f64>,
    #[serde(default)]
    map: Vec<Spanned<RawMap>>,
    probs: Option<Spanned<RawProbs>>,
}

#[derive(Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
enum RawMap {
    #[serde(rename = "affine_1d")]
    Affine1D { slope: f64, intercept: f64 },
    #[serde(rename = "piecewise_affine_1d")]
    PiecewiseAffine1D {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
    },
    #[serde(rename = "affine_nd")]
    AffineND {
        matrix: Vec<Vec<f64>>,
        translation: Vec<f64>,
    },
    #[serde(rename = "moebius_2d")]
    Moebius2D {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
    },
    #[serde(rename = "scalar_conformal_nd")]
    ScalarConformalND {
        scale: f64,
        rotation: Option<Vec<Vec<f64>>>,
        angle: Option<f64>,
        translation: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    scale: f64,
    #[serde(default)]
    linear: Vec<f64>,
    #[serde(default)]
    curvature: f64,
    #[serde(default)]
    center: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawProbs {
    Constant { p: Vec<f64> },
    Smooth { p_min: f64, weight: Vec<RawWeight> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawOpenSet {
    Intervals { intervals: Vec<[f64; 2]> },
    Boxes { boxes: Vec<RawBox> },
    PaperBn { n_max: Option<u32> },
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn at(text: &str, key: &str, span: Range<usize>, e: Error) -> Error {
    let msg = match e {
        Error::Config(m) => m,
        other => other.to_string(),
    };
    Error::Config(format!("{key} (line {}): {msg}", line_of(text, span)))
}

fn build_map(raw: RawMap) -> Result<MapSpec> {
    match raw {
        RawMap::Affine1D { slope, intercept } => {
            if !(slope.is_finite() && intercept.is_finite()) {
                return Err(Error::InvalidMap("non-finite affine coefficient".into()));
            }
            Ok(MapSpec::affine_1d(slope, intercept))
        }
        RawMap::PiecewiseAffine1D {
            breakpoints,
            slopes,
            intercepts,
        } => Ok(MapSpec::PiecewiseAffine1D(PiecewiseAffine::new(breakpoints, slopes, intercepts)?)),
        RawMap::AffineND { matrix, translation } => {
            let m = Matrix::from_rows(&matrix).ok_or_else(|| Error::InvalidMap("matrix must be square".into()))?;
            MapSpec::affine_nd(m, translation)
        }
        RawMap::Moebius2D { a, b, c, d } => {
            let z = |v: [f64; 2]| Complex64::new(v[0], v[1]);
            MapSpec::moebius(z(a), z(b), z(c), z(d))
        }
        RawMap::ScalarConformalND {
            scale,
            rotation,
            angle,
            translation,
        } => {
            let rot = match (rotation, angle) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidMap("give either rotation or angle, not both".into()))
                }
                (Some(rows), None) => {
                    Matrix::from_rows(&rows).ok_or_else(|| Error::InvalidMap("rotation must be square".into()))?
                }
                (None, Some(theta)) if translation.len() == 2 => Matrix::rotation_2d(theta),
                (None, Some(_)) => return Err(Error::InvalidMap("angle needs a 2-D translation".into())),
                (None, None) => Matrix::identity(translation.len()),
            };
            MapSpec::scalar_conformal(scale, rot, translation)
        }
    }
}

fn build_probs(raw: RawProbs) -> Result<ProbabilityField> {
    match raw {
        RawProbs::Constant { p } => ProbabilityField::constant(p),
        RawProbs::Smooth { p_min, weight } => ProbabilityField::smooth(
            weight
                .into_iter()
                .map(|w| WeightFn {
                    scale: w.scale,
                    linear: w.linear,
                    curvature: w.curvature,
                    center: w.center,
                })
                .collect(),
            p_min,
        ),
    }
}

fn build_open_set(raw: RawOpenSet) -> Result<OpenSet> {
    match raw {
        RawOpenSet::Intervals { intervals } => OpenSet::intervals(intervals.into_iter().map(|[a, b]| (a, b)).collect()),
        RawOpenSet::Boxes { boxes } => {
            OpenSet::boxes(boxes.into_iter().map(|b| OpenBox { lo: b.lo, hi: b.hi }).collect())
        }
        RawOpenSet::PaperBn { n_max } => Ok(OpenSet::decades(n_max.unwrap_or(DEFAULT_DECADES_N_MAX))),
    }
}

fn build_system(text: &str, span: Range<usize>, raw: RawSystem) -> Result<SystemSource> {
    if let Some(name) = raw.builtin {
        if !raw.map.is_empty() || raw.probs.is_some() {
            return Err(at(
                text,
                "system.builtin",
                span,
                Error::Config("a built-in system takes no map or probs tables".into()),
            ));
        }
        builtin::by_name(&name, raw.p1).map_err(|e| at(text, "system.builtin", span.clone(), e))?;
        return Ok(SystemSource::Builtin { name, p1: raw.p1 });
    }
    if raw.p1.is_some() {
        return Err(at(text, "system.p1", span, Error::Config("p1 only applies to a built-in".into())));
    }
    if raw.map.is_empty() {
        return Err(at(text, "system.map", span, Error::Config("no maps given".into())));
    }
    let mut maps = Vec::with_capacity(raw.map.len());
    for (i, m) in raw.map.into_iter().enumerate() {
        let s = m.span();
        let key = format!("system.map[{}]", i + 1);
        let map = build_map(m.into_inner()).map_err(|e| at(text, &key, s.clone(), e))?;
        if let Some(d) = raw.dimension {
            if map.dim() != d {
                return Err(at(
                    text,
                    &key,
                    s,
                    Error::Config(format!("map has dimension {}, system declares {d}", map.dim())),
                ));
            }
        }
        maps.push(map);
    }
    let probs = match raw.probs {
        Some(p) => {
            let s = p.span();
            build_probs(p.into_inner()).map_err(|e| at(text, "system.probs", s, e))?
        }
        None => ProbabilityField::uniform(maps.len()),
    };
    let system = IfsSystem::new(maps, probs).map_err(|e| at(text, "system", span, e))?;
    Ok(SystemSource::Inline { system })
}

impl RunConfig {
    /// A built-in system with default knobs.
    pub fn builtin(name: &str, p1: Option<f64>) -> Result<Self> {
        builtin::by_name(name, p1)?;
        Ok(RunConfig {
            system: SystemSource::Builtin {
                name: name.to_string(),
                p1,
            },
            open_set: None,
            run: RunSection::default(),
            dimension: DimensionSection::default(),
            cover: CoverSection::default(),
            cylinder: CylinderSection::default(),
            osc: OscSection::default(),
            validate: ValidateSection::default(),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let system = match raw.system {
            Some(s) => {
                let span = s.span();
                build_system(text, span, s.into_inner())?
            }
            None => return Err(Error::Config("missing [system] table".into())),
        };
        let open_set = match raw.open_set {
            Some(o) => {
                let span = o.span();
                Some(build_open_set(o.into_inner()).map_err(|e| at(text, "open_set", span, e))?)
            }
            None => None,
        };
        let cfg = RunConfig {
            system,
            open_set,
            run: raw.run,
            dimension: raw.dimension,
            cover: raw.cover,
            cylinder: raw.cylinder,
            osc: raw.osc,
            validate: raw.validate,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Range checks on the knobs that the file format cannot express.
    pub fn check(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{key}: {why}")));
        if self.run.steps == 0 {
            return bad("run.steps", "must be at least 1");
        }
        if self.run.trajectories == 0 {
            return bad("run.trajectories", "must be at least 1");
        }
        if self.run.thinning == 0 {
            return bad("run.thinning", "must be at least 1");
        }
        if self.dimension.centers < crate::dimension::MIN_CENTERS {
            return bad("dimension.centers", "must be at least 10");
        }
        if self.dimension.levels.is_some_and(|l| l < crate::dimension::MIN_LEVELS) {
            return bad("dimension.levels", "must be at least 4");
        }
        if self.dimension.r0.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("dimension.r0", "must be positive");
        }
        if self.cover.n == 0 {
            return bad("cover.n", "must be at least 1");
        }
        if self.cover.epsilon.is_some_and(|e| !(e > 0.0 && e < 0.25)) {
            return bad("cover.epsilon", "must lie in (0, 1/4)");
        }
        if !(self.cover.width > 0.0 && self.cover.width.is_finite()) {
            return bad("cover.width", "must be positive");
        }
        if self.cover.t_points == 0 {
            return bad("cover.t_points", "must be at least 1");
        }
        if self.osc.budget < 100 {
            return bad("osc.budget", "must be at least 100");
        }
        if self.validate.budget == 0 {
            return bad("validate.budget", "must be at least 1");
        }
        if self.validate.margin_budget < 2 {
            return bad("validate.margin_budget", "must be at least 2");
        }
        Ok(())
    }

    /// The named system with the config's open set and start applied; the
    /// open set also becomes the system's domain if it declares none.
    pub fn resolve(&self) -> Result<NamedSystem> {
        let mut named = match &self.system {
            SystemSource::Builtin { name, p1 } => builtin::by_name(name, *p1)?,
            SystemSource::Inline { system } => {
                let start = match &self.open_set {
                    Some(u) => Point::new(u.components()[0].center())?,
                    None => Point::new(vec![0.0; system.dim()])?,
                };
                NamedSystem {
                    name: "config".into(),
                    system: system.clone(),
                    open_set: None,
                    known_dimension: None,
                    known_formula: None,
                    start,
                }
            }
        };
        if let Some(u) = &self.open_set {
            if u.dim() != named.system.dim() {
                return Err(Error::Config(format!(
                    "open_set has dimension {}, system has {}",
                    u.dim(),
                    named.system.dim()
                )));
            }
            named.open_set = Some(u.clone());
        }
        if let Some(x0) = &self.run.x0 {
            if x0.len() != named.system.dim() {
                return Err(Error::Config(format!(
                    "run.x0 has {} coordinates, system dimension is {}",
                    x0.len(),
                    named.system.dim()
                )));
            }
            named.start = Point::new(x0.clone()).map_err(|e| Error::Config(format!("run.x0: {e}")))?;
        }
        // Checks that sample the state space use the open set when the
        // system declares no domain of its own.
        if let (Some(u), None) = (&named.open_set, named.system.declared_domain()) {
            named.system = named.system.clone().with_domain(u.clone())?;
        }
        Ok(named)
    }
}
