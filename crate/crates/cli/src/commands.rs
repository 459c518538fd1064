use std::path::{Path, PathBuf};

use ifsdim_core::config::SystemSource;
use ifsdim_core::dimension::{self, CoverOptions, FrostmanReport};
use ifsdim_core::ergodic::{self, ErgodicSummary};
use ifsdim_core::geometry::{self, OpenBox, OpenSet, RoscReport};
use ifsdim_core::model::{coa_margin, validate_system};
use ifsdim_core::sampler::{self, io as snapshot};
use ifsdim_core::symbolic::{cylinder_measure_minus, cylinder_measure_plus};
use ifsdim_core::{EmpiricalMeasure, Error, NamedSystem, Result, RunConfig, Word};
use serde::Serialize;

use crate::args::{Cli, Command, MeasureArgs, SimArgs};
use crate::output::{csv_document, emit, json_document, num, point_field, sha256_hex, write_atomic, Meta};

/// Outcome of a subcommand that ran to completion.
pub enum Outcome {
    Ok,
    /// A check ran and failed.
    Failed,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Base config from `--config` / `--system`, then the common overrides.
pub fn base_config(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match (&c.config, &c.system) {
        (Some(path), None) => RunConfig::from_file(path)?,
        (None, Some(name)) => RunConfig::builtin(name, c.p1)?,
        (Some(path), Some(name)) => {
            let mut cfg = RunConfig::from_file(path)?;
            ifsdim_core::builtin::by_name(name, c.p1)?;
            cfg.system = SystemSource::Builtin {
                name: name.clone(),
                p1: c.p1,
            };
            cfg
        }
        (None, None) => return Err(config_error("give --config PATH or --system NAME")),
    };
    if let Some(p1) = c.p1 {
        match &mut cfg.system {
            SystemSource::Builtin { name, p1: slot } if name == "paper-example" => *slot = Some(p1),
            _ => return Err(config_error("--p1 only applies to the paper-example system")),
        }
        ifsdim_core::builtin::by_name("paper-example", Some(p1))?;
    }
    if let Some(seed) = c.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn apply_sim(cfg: &mut RunConfig, sim: &SimArgs) {
    let run = &mut cfg.run;
    if let Some(v) = sim.steps {
        run.steps = v;
    }
    if let Some(v) = sim.burn_in {
        run.burn_in = v;
    }
    if let Some(v) = sim.trajectories {
        run.trajectories = v;
    }
    if let Some(v) = sim.thinning {
        run.thinning = v;
    }
    if let Some(v) = &sim.x0 {
        run.x0 = Some(v.clone());
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Folds the subcommand's flags into the config and validates the result.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Validate { budget, margin_budget } => {
            set(&mut cfg.validate.budget, *budget);
            set(&mut cfg.validate.margin_budget, *margin_budget);
        }
        Command::Simulate { sim, .. } | Command::Estimate { sim } => apply_sim(&mut cfg, sim),
        Command::Dimension {
            source,
            centers,
            levels,
            r0,
            frostman,
        } => {
            apply_sim(&mut cfg, &source.sim);
            set(&mut cfg.dimension.centers, *centers);
            if levels.is_some() {
                cfg.dimension.levels = *levels;
            }
            if r0.is_some() {
                cfg.dimension.r0 = *r0;
            }
            if frostman.is_some() {
                cfg.dimension.frostman_s = *frostman;
            }
        }
        Command::CoverBound {
            source,
            n,
            epsilon,
            width,
            t_points,
            max_cells,
            ..
        } => {
            apply_sim(&mut cfg, &source.sim);
            set(&mut cfg.cover.n, *n);
            if epsilon.is_some() {
                cfg.cover.epsilon = *epsilon;
            }
            set(&mut cfg.cover.width, *width);
            set(&mut cfg.cover.t_points, *t_points);
            set(&mut cfg.cover.max_cells, *max_cells);
        }
        Command::CheckOsc { budget, density_floor } => {
            set(&mut cfg.osc.budget, *budget);
            set(&mut cfg.osc.density_floor, *density_floor);
        }
        Command::Cylinder { source, words, max_len } => {
            apply_sim(&mut cfg, &source.sim);
            if !words.is_empty() {
                cfg.cylinder.words = words.clone();
            }
            set(&mut cfg.cylinder.max_len, *max_len);
        }
    }
    cfg.check()?;
    cfg.resolve()?;
    Ok(cfg)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    named: NamedSystem,
    meta: Meta,
    json: bool,
    out: Option<&'a Path>,
}

impl Ctx<'_> {
    fn emit_csv(&self, rows: &[Vec<String>]) -> Result<()> {
        emit(self.out, csv_document(&self.meta, &[], rows)?.as_bytes())
    }

    fn emit_json<T: Serialize>(&self, body: &T) -> Result<()> {
        emit(self.out, json_document(&self.meta, body)?.as_bytes())
    }

    fn simulate(&self) -> Result<Vec<sampler::Trajectory>> {
        let r = &self.cfg.run;
        sampler::simulate_many(&self.named.system, &self.named.start, r.trajectories, r.steps, r.burn_in, r.seed)
    }

    /// Loads `--measure` (recording its hash) or simulates one.
    fn measure(&mut self, source: &MeasureArgs) -> Result<EmpiricalMeasure> {
        match &source.measure {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                self.meta.measure_sha256 = Some(sha256_hex(&bytes));
                let m = snapshot::read_snapshot(bytes.as_slice())?;
                if m.dim() != self.named.system.dim() {
                    return Err(config_error(format!(
                        "measure has dimension {}, system has {}",
                        m.dim(),
                        self.named.system.dim()
                    )));
                }
                Ok(m)
            }
            None => EmpiricalMeasure::from_trajectories(&self.simulate()?, self.cfg.run.thinning),
        }
    }
}

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    let named = cfg.resolve()?;
    let mut ctx = Ctx {
        cfg,
        named,
        meta: Meta::new(cli.command.name(), cfg)?,
        json: cli.common.json,
        out: cli.common.out.as_deref(),
    };
    match &cli.command {
        Command::Validate { .. } => validate(&ctx),
        Command::Simulate { snapshot, .. } => simulate(&ctx, snapshot.as_deref()),
        Command::Estimate { .. } => estimate(&ctx),
        Command::Dimension { source, .. } => dimension_cmd(&mut ctx, source),
        Command::CoverBound { source, diameters, .. } => cover_bound(&mut ctx, source, diameters.as_ref()),
        Command::CheckOsc { .. } => check_osc(&ctx),
        Command::Cylinder { source, .. } => cylinder(&mut ctx, source),
    }
}

const DEFAULT_HALF_WIDTH: f64 = 10.0;

fn validate(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.cfg.validate;
    let system = &ctx.named.system;
    let report = validate_system(system, cfg.budget, ctx.cfg.run.seed);
    let domain = match (&ctx.named.open_set, system.declared_domain()) {
        (Some(u), _) => u.clone(),
        (None, Some(u)) => u.clone(),
        (None, None) => OpenSet::boxes(vec![OpenBox {
            lo: vec![-DEFAULT_HALF_WIDTH; system.dim()],
            hi: vec![DEFAULT_HALF_WIDTH; system.dim()],
        }])?,
    };
    let margin = coa_margin(system, &domain, cfg.margin_budget, ctx.cfg.run.seed)?;
    let ok = report.all_passed() && margin.sup_estimate < 0.0;
    let verdict = if ok {
        "all checks pass".to_string()
    } else {
        let failed = report.failed().count() + usize::from(margin.sup_estimate >= 0.0);
        format!("{failed} check(s) failed")
    };
    if ctx.json {
        #[derive(Serialize)]
        struct Body<'a> {
            checks: &'a ifsdim_core::ValidationReport,
            margin: &'a ifsdim_core::MarginEstimate,
            margin_domain: &'a OpenSet,
            result: &'a str,
        }
        ctx.emit_json(&Body {
            checks: &report,
            margin: &margin,
            margin_domain: &domain,
            result: &verdict,
        })?;
    } else {
        let mut rows = vec![vec!["check".into(), "passed".into(), "severity".into(), "witness".into(), "detail".into()]];
        for c in &report.checks {
            rows.push(vec![
                c.name.clone(),
                c.passed.to_string(),
                format!("{:?}", c.severity).to_lowercase(),
                c.witness.as_deref().map(point_field).unwrap_or_default(),
                c.detail.clone(),
            ]);
        }
        rows.push(vec![
            "contraction on average (sampled)".into(),
            (margin.sup_estimate < 0.0).to_string(),
            "required".into(),
            format!("{}|{}", point_field(&margin.worst_pair.0), point_field(&margin.worst_pair.1)),
            format!("sup estimate {} over {} pairs; {}", margin.sup_estimate, margin.samples_used, margin.note),
        ]);
        rows.push(vec!["result".into(), ok.to_string(), String::new(), String::new(), verdict.clone()]);
        ctx.emit_csv(&rows)?;
    }
    eprintln!("{verdict}");
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn simulate(ctx: &Ctx, snapshot_path: Option<&Path>) -> Result<Outcome> {
    let trajs = ctx.simulate()?;
    if let Some(p) = snapshot_path {
        let m = EmpiricalMeasure::from_trajectories(&trajs, ctx.cfg.run.thinning)?;
        let mut buf = Vec::new();
        snapshot::write_snapshot(&mut buf, &m)?;
        write_atomic(p, &buf)?;
    }
    if ctx.json {
        #[derive(Serialize)]
        struct Entry {
            index: usize,
            seed: u64,
            burn_in: usize,
            steps: usize,
            final_point: Vec<f64>,
            lambda: f64,
            eta: f64,
        }
        let entries = trajs
            .iter()
            .enumerate()
            .map(|(index, t)| {
                Ok(Entry {
                    index,
                    seed: t.seed,
                    burn_in: t.burn_in,
                    steps: t.len(),
                    final_point: t.final_point.clone(),
                    lambda: ergodic::lyapunov_exponent(t).map(|e| e.value).unwrap_or(f64::NAN),
                    eta: ergodic::entropy_rate(t).map(|e| e.value).unwrap_or(f64::NAN),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        #[derive(Serialize)]
        struct Body {
            trajectories: Vec<Entry>,
        }
        return ctx.emit_json(&Body { trajectories: entries }).map(|_| Outcome::Ok);
    }
    let csv_of = |i: usize, t: &sampler::Trajectory| -> Result<Vec<u8>> {
        let mut header = ctx.meta.header_lines();
        header.push(format!("trajectory: {i} (seed {})", t.seed));
        let mut buf = Vec::new();
        snapshot::write_trajectory_csv(&mut buf, t, &header)?;
        Ok(buf)
    };
    if trajs.len() == 1 {
        emit(ctx.out, &csv_of(0, &trajs[0])?)?;
        return Ok(Outcome::Ok);
    }
    let dir = ctx
        .out
        .ok_or_else(|| config_error("several trajectories need --out DIR"))?;
    std::fs::create_dir_all(dir)?;
    for (i, t) in trajs.iter().enumerate() {
        write_atomic(&dir.join(format!("trajectory-{i}.csv")), &csv_of(i, t)?)?;
    }
    Ok(Outcome::Ok)
}

fn estimate(ctx: &Ctx) -> Result<Outcome> {
    let trajs = ctx.simulate()?;
    let s: ErgodicSummary = ergodic::summarize(&trajs)?;
    if ctx.json {
        ctx.emit_json(&s)?;
    } else {
        ctx.emit_csv(&[
            ["lambda", "eta", "s", "stderr_lambda", "stderr_eta", "n"].map(String::from).to_vec(),
            vec![
                num(s.lambda),
                num(s.eta),
                num(s.s),
                num(s.stderr_lambda),
                num(s.stderr_eta),
                s.n.to_string(),
            ],
        ])?;
    }
    Ok(Outcome::Ok)
}

fn dimension_cmd(ctx: &mut Ctx, source: &MeasureArgs) -> Result<Outcome> {
    let measure = ctx.measure(source)?;
    let cfg = &ctx.cfg.dimension;
    let r0 = cfg.r0.unwrap_or_else(|| dimension::default_r0(&measure));
    let levels = cfg.levels.unwrap_or_else(|| dimension::auto_levels(&measure, r0));
    let seed = ctx.cfg.run.seed;
    let summary = dimension::measure_dimension(&measure, cfg.centers, r0, levels, seed)?;
    let frostman: Option<FrostmanReport> = cfg
        .frostman_s
        .map(|s| dimension::frostman_check(&measure, s, cfg.centers, r0, levels, seed))
        .transpose()?;
    if ctx.json {
        #[derive(Serialize)]
        struct Body<'a> {
            r0: f64,
            levels: usize,
            points: usize,
            summary: &'a ifsdim_core::DimensionSummary,
            frostman: &'a Option<FrostmanReport>,
        }
        ctx.emit_json(&Body {
            r0,
            levels,
            points: measure.len(),
            summary: &summary,
            frostman: &frostman,
        })?;
        return Ok(Outcome::Ok);
    }
    let mut rows = vec![["center", "slope", "r2", "discarded"].map(String::from).to_vec()];
    for c in &summary.centers {
        rows.push(vec![
            point_field(&c.center),
            num(c.slope),
            num(c.r2),
            c.slope.is_none().to_string(),
        ]);
    }
    rows.push(vec![
        "summary".into(),
        num(summary.median),
        String::new(),
        summary.discarded.to_string(),
    ]);
    let mut extra = vec![
        format!("r0: {r0}"),
        format!("levels: {levels}"),
        format!("points: {}", measure.len()),
        format!(
            "summary: median={} q10={} q90={} valid={} discarded={}",
            summary.median, summary.q10, summary.q90, summary.valid, summary.discarded
        ),
    ];
    if let Some(f) = &frostman {
        extra.push(format!(
            "frostman: s={} passes={} pass_fraction={} worst_ratio={} checked={} skipped={}",
            f.s_test, f.passes, f.pass_fraction, f.worst_ratio, f.centers_checked, f.centers_skipped
        ));
    }
    emit(ctx.out, csv_document(&ctx.meta, &extra, &rows)?.as_bytes())?;
    Ok(Outcome::Ok)
}

fn cover_bound(ctx: &mut Ctx, source: &MeasureArgs, diameters: Option<&PathBuf>) -> Result<Outcome> {
    let measure = ctx.measure(source)?;
    let cfg = &ctx.cfg.cover;
    let system = &ctx.named.system;
    let (epsilon, rule) = match cfg.epsilon {
        Some(e) => (e, "fixed".to_string()),
        None => (
            dimension::auto_epsilon(system, &measure, cfg.n, cfg.width)?,
            format!("auto (width {})", cfg.width),
        ),
    };
    let opts = CoverOptions {
        max_words: cfg.max_words as u128,
        max_cells: cfg.max_cells,
        points_per_cell: cfg.points_per_cell,
        ..CoverOptions::default()
    };
    let t_grid = dimension::default_t_grid(system.dim(), cfg.t_points);
    let report = dimension::cover_upper_bound_with(system, &measure, cfg.n, epsilon, &t_grid, ctx.cfg.run.seed, &opts)?;
    if let Some(p) = diameters {
        let mut rows = vec![vec!["index".to_string(), "diameter".to_string()]];
        rows.extend(
            report
                .set_diameters
                .iter()
                .enumerate()
                .map(|(i, d)| vec![i.to_string(), num(*d)]),
        );
        write_atomic(p, csv_document(&ctx.meta, &[], &rows)?.as_bytes())?;
    }
    #[derive(Serialize)]
    struct Body<'a> {
        epsilon_rule: String,
        t_grid_points: usize,
        points: usize,
        report: &'a ifsdim_core::CoverReport,
    }
    let found = report.critical_exponent.is_some();
    ctx.emit_json(&Body {
        epsilon_rule: rule,
        t_grid_points: t_grid.len(),
        points: measure.len(),
        report: &report,
    })?;
    if !found {
        eprintln!("no exponent on the grid admitted a cover");
    }
    Ok(if found { Outcome::Ok } else { Outcome::Failed })
}

fn check_osc(ctx: &Ctx) -> Result<Outcome> {
    let set = ctx
        .named
        .open_set
        .as_ref()
        .or(ctx.named.system.declared_domain())
        .ok_or_else(|| config_error("check-osc needs an [open_set] in the config"))?;
    let cfg = &ctx.cfg.osc;
    let system = &ctx.named.system;
    let seed = ctx.cfg.run.seed;
    let mut osc = geometry::check_osc(system, set, cfg.budget, seed)?;
    let sosc = if osc.disjointness_pass {
        match geometry::check_sosc(system, set) {
            Ok(r) => SoscResult { r1: Some(r), error: None },
            Err(e) => SoscResult {
                r1: None,
                error: Some(e.to_string()),
            },
        }
    } else {
        SoscResult {
            r1: Some(0.0),
            error: Some("images overlap".into()),
        }
    };
    let r_grid = if cfg.r_grid.is_empty() {
        geometry::default_r_grid(set)
    } else {
        cfg.r_grid.clone()
    };
    let rosc: RoscReport = geometry::check_rosc_with_floor(system, set, &r_grid, cfg.budget, seed, cfg.density_floor)?;
    osc.regularity = Some((rosc.r2, rosc.r3));
    #[derive(Serialize)]
    struct SoscResult {
        r1: Option<f64>,
        error: Option<String>,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        open_set: &'a OpenSet,
        osc_pass: bool,
        osc: &'a geometry::OscReport,
        sosc: SoscResult,
        rosc: RoscReport,
    }
    let pass = osc.osc_pass();
    ctx.emit_json(&Body {
        open_set: set,
        osc_pass: pass,
        osc: &osc,
        sosc,
        rosc,
    })?;
    Ok(if pass { Outcome::Ok } else { Outcome::Failed })
}

fn cylinder(ctx: &mut Ctx, source: &MeasureArgs) -> Result<Outcome> {
    let k = ctx.named.system.k();
    let cfg = &ctx.cfg.cylinder;
    let words: Vec<Word> = if cfg.words.is_empty() {
        (1..=cfg.max_len).flat_map(|n| Word::all(k, n)).collect()
    } else {
        cfg.words
            .iter()
            .map(|s| {
                let w: Word = s.parse().map_err(|e: Error| config_error(format!("word {s:?}: {e}")))?;
                w.validate(k).map_err(|e| config_error(format!("word {s:?}: {e}")))?;
                Ok(w)
            })
            .collect::<Result<_>>()?
    };
    let measure = ctx.measure(source)?;
    #[derive(Serialize)]
    struct Row {
        word: String,
        mu_plus: f64,
        stderr_plus: f64,
        mu_minus: f64,
        stderr_minus: f64,
        n: usize,
    }
    let rows = words
        .iter()
        .map(|w| {
            let plus = cylinder_measure_plus(&ctx.named.system, w, &measure)?;
            let minus = cylinder_measure_minus(&ctx.named.system, w, &measure)?;
            Ok(Row {
                word: w.to_string(),
                mu_plus: plus.value,
                stderr_plus: plus.stderr,
                mu_minus: minus.value,
                stderr_minus: minus.stderr,
                n: plus.n_samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if ctx.json {
        #[derive(Serialize)]
        struct Body {
            words: Vec<Row>,
        }
        ctx.emit_json(&Body { words: rows })?;
    } else {
        let mut out = vec![["word", "mu_plus", "stderr_plus", "mu_minus", "stderr_minus", "n"]
            .map(String::from)
            .to_vec()];
        out.extend(rows.iter().map(|r| {
            vec![
                r.word.clone(),
                num(r.mu_plus),
                num(r.stderr_plus),
                num(r.mu_minus),
                num(r.stderr_minus),
                r.n.to_string(),
            ]
        }));
        ctx.emit_csv(&out)?;
    }
    Ok(Outcome::Ok)
}
