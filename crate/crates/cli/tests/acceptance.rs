//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p ifsdim-cli --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ifsdim_core::builtin::{self, cantor, halves, paper_example, paper_example_truncated, uneven, NamedSystem};
use ifsdim_core::dimension::{
    auto_epsilon, auto_levels, cover_upper_bound, default_r0, default_t_grid, measure_dimension,
    DEFAULT_BAND_WIDTH,
};
use ifsdim_core::ergodic::{deviation_diagnostic, dimension_formula};
use ifsdim_core::geometry::{check_osc, check_rosc, check_sosc, default_r_grid};
use ifsdim_core::model::{coa_margin, MapSpec, ProbabilityField, WeightFn};
use ifsdim_core::sampler::{chaos_game, simulate_many, transfer_iterate_1d};
use ifsdim_core::seed::splitmix64;
use ifsdim_core::symbolic::{coding_map, cylinder_measure_minus, cylinder_measure_plus};
use ifsdim_core::{EmpiricalMeasure, GridMeasure, IfsSystem, OpenSet, Point, SymbolStream, Word};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ifsdim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ifsdim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn cloud(s: &NamedSystem, n: usize, seed: u64) -> EmpiricalMeasure {
    let t = chaos_game(&s.system, &s.start, n, 10_000, seed).unwrap();
    EmpiricalMeasure::from_trajectories(&[t], 1).unwrap()
}

fn median_dimension(m: &EmpiricalMeasure) -> f64 {
    let r0 = default_r0(m);
    measure_dimension(m, 400, r0, auto_levels(m, r0), 1).unwrap().median
}

fn unit_interval() -> OpenSet {
    OpenSet::intervals(vec![(0.0, 1.0)]).unwrap()
}

fn flagship() -> Check {
    let start = Instant::now();
    let o = ifsdim(&[
        "estimate", "--system", "paper-example", "--p1", "0.7", "--steps", "1000000", "--burn-in", "10000",
        "--seed", "1", "--threads", "1", "--json",
    ]);
    let elapsed = start.elapsed();
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let (s, lambda, eta) = (v["s"].as_f64().unwrap(), v["lambda"].as_f64().unwrap(), v["eta"].as_f64().unwrap());
    let rel = |x: f64, y: f64| (x / y - 1.0).abs();
    let detail = format!("s {s:.6} lambda {lambda:.6} eta {eta:.6} in {:.2}s", elapsed.as_secs_f64());
    ensure(rel(s, 0.378436) < 0.02, || format!("s off: {detail}"))?;
    ensure(rel(lambda, -1.614186) < 0.01, || format!("lambda off: {detail}"))?;
    ensure(rel(eta, -0.610864) < 0.01, || format!("eta off: {detail}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn closed_form_dimensions() -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (s, target) in [(cantor(), 2f64.ln() / 3f64.ln()), (halves(), 1.0)] {
        let median = median_dimension(&cloud(&s, 1_000_000, 1));
        ensure((median - target).abs() < 0.05, || format!("{}: median {median} vs {target}", s.name))?;
        parts.push(format!("{} {median:.4}", s.name));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn cover_dominates() -> Check {
    let mut parts = Vec::new();
    for s in [cantor(), halves(), uneven(), paper_example(0.7).unwrap()] {
        let n = if s.name == "paper-example" { 14 } else { 12 };
        let m = cloud(&s, 1_000_000, 5);
        let median = median_dimension(&m);
        let eps = auto_epsilon(&s.system, &m, n, DEFAULT_BAND_WIDTH).unwrap();
        let report = cover_upper_bound(&s.system, &m, n, eps, &default_t_grid(1, 64), 9).unwrap();
        let known = s.known_dimension.unwrap();
        let t = report.critical_exponent.ok_or_else(|| format!("{}: no exponent accepted", s.name))?;
        ensure(t >= median - 0.05 && t <= known + 0.1, || {
            format!("{}: critical {t} outside [{:.4}, {:.4}]", s.name, median - 0.05, known + 0.1)
        })?;
        parts.push(format!("{} {t:.4} (median {median:.4}, s {known:.4})", s.name));
    }
    Ok(parts.join(", "))
}

fn formula_identity() -> Check {
    let lo = builtin::threshold_p1();
    let mut worst: f64 = 0.0;
    for i in 1..=100 {
        let p1 = lo + (0.99 - lo) * i as f64 / 101.0;
        let p2 = 1.0 - p1;
        let eta = p1 * p1.ln() + p2 * p2.ln();
        let lambda = p1 * (1.0f64 / 20.0).ln() + p2 * 5f64.ln();
        let diff = (builtin::paper_example_dimension(p1).unwrap().value - dimension_formula(eta, lambda).unwrap()).abs();
        worst = worst.max(diff);
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:e}"))?;
    Ok(format!("max difference {worst:e} over 100 values of p1"))
}

fn margins() -> Check {
    let c = cantor();
    let m = coa_margin(&c.system, &unit_interval(), 10_000, 1).unwrap();
    ensure(m.sup_estimate == (1.0f64 / 3.0).ln(), || format!("cantor margin {}", m.sup_estimate))?;
    let ex = paper_example_truncated(0.7, 3).unwrap();
    let e = coa_margin(&ex.system, &OpenSet::decades(3), 100_000, 1).unwrap();
    ensure(e.sup_estimate < 0.0, || format!("example margin {}", e.sup_estimate))?;
    let expanding = IfsSystem::new(
        vec![MapSpec::affine_1d(2.0, 0.0), MapSpec::affine_1d(3.0, 0.0)],
        ProbabilityField::uniform(2),
    )
    .unwrap();
    let x = coa_margin(&expanding, &unit_interval(), 10_000, 1).unwrap();
    ensure(x.sup_estimate > 0.0, || format!("expanding margin {}", x.sup_estimate))?;
    Ok(format!(
        "cantor {:.6}, example {:.4}, expanding {:.4}",
        m.sup_estimate, e.sup_estimate, x.sup_estimate
    ))
}

fn chebyshev() -> Check {
    let u = uneven();
    let trajs = simulate_many(&u.system, &u.start, 1000, 10_000, 1000, 6).unwrap();
    let reports = deviation_diagnostic(&trajs, &[10.0, 20.0, 50.0, 100.0]).unwrap();
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("logK {}: {:.4} <= {:.4}", r.log_k, r.empirical_tail, r.chebyshev_bound))
        .collect();
    ensure(reports.iter().all(|r| r.passes), || summary.join(", "))?;
    Ok(summary.join(", "))
}

fn unit_uniform(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    (0..n * dim)
        .map(|i| (splitmix64(seed ^ splitmix64(i as u64)) >> 11) as f64 / (1u64 << 53) as f64)
        .collect()
}

fn oracles() -> Check {
    // Ball mass against a linear scan.
    let c = cantor();
    let clouds = [
        (1, cloud(&c, 10_000, 3).coords().to_vec()),
        (2, unit_uniform(10_000, 2, 4)),
    ];
    for (dim, coords) in clouds {
        let m = EmpiricalMeasure::from_points(dim, coords.clone()).unwrap();
        for (j, r) in [(0usize, 1e-3), (17, 0.01), (4242, 0.1), (9999, 0.3)] {
            let x = &coords[j * dim..(j + 1) * dim];
            let scan = coords
                .chunks(dim)
                .filter(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= r)
                .count();
            ensure(m.ball_mass(x, r) == scan as f64 / 10_000.0, || format!("ball mass at {x:?}, r {r}"))?;
        }
    }
    // Transfer operator conservation.
    let ex = paper_example(0.7).unwrap();
    let mut g = GridMeasure::uniform(0.0, 400.0, 4000).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        g = transfer_iterate_1d(&ex.system, &g, 1).unwrap();
        worst = worst.max((g.mass.iter().sum::<f64>() + g.overflow_mass - 1.0).abs());
    }
    ensure(worst <= 1e-12, || format!("transfer drift {worst:e}"))?;
    // Cylinder sums on a place-dependent field.
    let field = ProbabilityField::smooth(
        vec![WeightFn::constant(1.0), WeightFn::gaussian(2.0, 3.0, vec![0.8])],
        0.05,
    )
    .unwrap();
    let pd = IfsSystem::new(vec![MapSpec::affine_1d(0.4, 0.0), MapSpec::affine_1d(0.4, 0.6)], field).unwrap();
    let t = chaos_game(&pd, &Point::scalar(0.5).unwrap(), 100_000, 1000, 8).unwrap();
    let nu = EmpiricalMeasure::from_trajectories(&[t], 1).unwrap();
    for n in 1..=6 {
        let ests: Vec<_> = Word::all(2, n).iter().map(|w| cylinder_measure_plus(&pd, w, &nu).unwrap()).collect();
        let total: f64 = ests.iter().map(|e| e.value).sum();
        let pooled = ests.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
        ensure((total - 1.0).abs() <= 3.0 * pooled + 1e-12, || format!("length {n}: sum {total}"))?;
    }
    // Reversal identity for constant fields.
    let cp = IfsSystem::new(
        vec![MapSpec::affine_1d(0.3, 0.0), MapSpec::affine_1d(0.3, 0.7)],
        ProbabilityField::constant(vec![0.01, 0.99]).unwrap(),
    )
    .unwrap();
    for n in 1..=6 {
        for w in Word::all(2, n) {
            let minus = cylinder_measure_minus(&cp, &w, &nu).unwrap().value;
            let plus = cylinder_measure_plus(&cp, &w, &nu).unwrap().value;
            ensure(minus == plus, || format!("reversal differs on {w:?}"))?;
        }
    }
    Ok(format!("transfer drift {worst:e}; cylinder sums and reversal hold to length 6"))
}

fn coding() -> Check {
    const TOL: f64 = 1e-10;
    let half = IfsSystem::new(vec![MapSpec::affine_1d(0.5, 1.0)], ProbabilityField::uniform(1)).unwrap();
    let zero = Point::scalar(0.0).unwrap();
    let p = coding_map(&half, &SymbolStream::constant(0), &zero, TOL, 1000).unwrap().point.coords()[0];
    ensure((p - 2.0).abs() <= TOL, || format!("x/2 + 1 fixed point {p}"))?;
    let c = cantor();
    let x0 = Point::scalar(0.3).unwrap();
    let p = coding_map(&c.system, &SymbolStream::constant(1), &x0, TOL, 1000).unwrap().point.coords()[0];
    ensure((p - 1.0).abs() <= TOL, || format!("cantor right fixed point {p}"))?;
    let alt = SymbolStream::periodic(Word::empty(), Word::new(vec![0, 1])).unwrap();
    let p = coding_map(&c.system, &alt, &x0, TOL, 1000).unwrap().point.coords()[0];
    ensure((p - 0.25).abs() <= TOL, || format!("two-cycle {p}"))?;

    let ex = paper_example(0.7).unwrap();
    let mut worst: f64 = 0.0;
    for (sys, start, weights) in [(&c.system, x0.clone(), [0.5, 0.5]), (&ex.system, ex.start.clone(), [0.7, 0.3])] {
        for seed in 0..20 {
            let stream = SymbolStream::random(&weights, seed).unwrap();
            let base = coding_map(sys, &stream, &start, TOL, 10_000).unwrap();
            for i in 0..2 {
                let shifted = coding_map(sys, &stream.prepended(i), &start, TOL, 10_000).unwrap();
                let image = sys.eval_map(i, &base.point).unwrap();
                let err = shifted.point.distance(&image) / image.coords()[0].abs().max(1.0);
                worst = worst.max(err / TOL);
            }
        }
    }
    ensure(worst <= 10.0, || format!("equivariance error {worst:.2} tol"))?;
    let mut spread: f64 = 0.0;
    for seed in 0..20 {
        let stream = SymbolStream::random(&[1.0, 1.0], seed).unwrap();
        let a = coding_map(&c.system, &stream, &Point::scalar(0.2).unwrap(), TOL, 1000).unwrap();
        let b = coding_map(&c.system, &stream, &Point::scalar(0.9).unwrap(), TOL, 1000).unwrap();
        spread = spread.max(a.point.distance(&b.point) / TOL);
    }
    ensure(spread <= 10.0, || format!("start dependence {spread:.2} tol"))?;
    Ok(format!("equivariance within {worst:.2} tol, start dependence within {spread:.2} tol"))
}

fn geometry() -> Check {
    let u = unit_interval();
    let c = cantor();
    let osc = check_osc(&c.system, &u, 1000, 0).unwrap();
    ensure(osc.osc_pass() && osc.separation_r1 == 1.0 / 3.0, || format!("cantor {osc:?}"))?;
    let touching = IfsSystem::new(
        vec![MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(0.5, 0.5)],
        ProbabilityField::uniform(2),
    )
    .unwrap();
    let r1 = check_sosc(&touching, &u).unwrap();
    ensure(r1 == 0.0, || format!("touching R1 {r1}"))?;
    let rosc = check_rosc(&c.system, &u, &default_r_grid(&u), 1000, 0).unwrap();
    ensure(rosc.r3 == 1.0, || format!("R3 {}", rosc.r3))?;
    Ok(format!("cantor R1 {}, touching R1 {r1}, unit interval R3 {}", osc.separation_r1, rosc.r3))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let snap = |tag: &str| dir.path().join(format!("{tag}.ifsm")).display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["validate", "--system", "paper-example", "--budget", "2000", "--margin-budget", "20000"],
        vec!["simulate", "--system", "uneven", "--steps", "20000", "--snapshot", "SNAP"],
        vec!["estimate", "--system", "paper-example", "--steps", "100000", "--trajectories", "4"],
        vec!["dimension", "--system", "cantor", "--steps", "100000", "--frostman", "0.5"],
        vec!["cover-bound", "--system", "halves", "--steps", "50000", "--n", "8"],
        vec!["check-osc", "--system", "paper-example"],
        vec!["cylinder", "--system", "uneven", "--steps", "20000", "--max-len", "3"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(str::to_string).collect())
    .collect();
    for args in runs {
        let mut outputs = Vec::new();
        for (k, threads) in [None, Some("1"), Some("2"), Some("3")].into_iter().enumerate() {
            let tag = format!("s{k}");
            let mut a: Vec<String> = args.iter().map(|s| if s == "SNAP" { snap(&tag) } else { s.clone() }).collect();
            if let Some(t) = threads {
                a.extend(["--threads".to_string(), t.to_string()]);
            }
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            let o = ifsdim(&refs);
            ensure(o.status.success(), || format!("{}: {}", args[0], String::from_utf8_lossy(&o.stderr)))?;
            let extra = if args.contains(&"SNAP".to_string()) {
                std::fs::read(snap(&tag)).map_err(|e| e.to_string())?
            } else {
                Vec::new()
            };
            outputs.push((o.stdout, extra));
        }
        // A repeat of the default run.
        let refs: Vec<String> = args.iter().map(|s| if s == "SNAP" { snap("again") } else { s.clone() }).collect();
        let o = ifsdim(&refs.iter().map(String::as_str).collect::<Vec<_>>());
        let extra = if args.contains(&"SNAP".to_string()) {
            std::fs::read(snap("again")).map_err(|e| e.to_string())?
        } else {
            Vec::new()
        };
        outputs.push((o.stdout, extra));
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || format!("{} output varies", args[0]))?;
    }
    Ok("7 subcommands identical across repeats and 1, 2, 3 threads".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("flagship estimate", flagship),
        ("closed-form dimensions", closed_form_dimensions),
        ("cover bound dominates", cover_dominates),
        ("closed form equals eta/lambda", formula_identity),
        ("contraction-on-average margins", margins),
        ("Chebyshev tails", chebyshev),
        ("oracle equivalences", oracles),
        ("coding map", coding),
        ("geometry", geometry),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
