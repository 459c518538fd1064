use ifsdim_core::builtin::{cantor, halves, paper_example, uneven, NamedSystem};
use ifsdim_core::dimension::{
    auto_epsilon, auto_levels, cover_upper_bound, default_r0, default_t_grid, frostman_check, local_dimension,
    measure_dimension, DEFAULT_BAND_WIDTH,
};
use ifsdim_core::sampler::chaos_game;
use ifsdim_core::seed;
use ifsdim_core::EmpiricalMeasure;
use rand::Rng;

fn cloud(s: &NamedSystem, n: usize, seed: u64) -> EmpiricalMeasure {
    let t = chaos_game(&s.system, &s.start, n, 10_000, seed).unwrap();
    EmpiricalMeasure::from_trajectories(&[t], 1).unwrap()
}

fn uniform(dim: usize, n: usize, seed: u64) -> EmpiricalMeasure {
    let mut rng = seed::rng(seed);
    let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    EmpiricalMeasure::from_points(dim, coords).unwrap()
}

fn median_dimension(m: &EmpiricalMeasure) -> f64 {
    let r0 = default_r0(m);
    measure_dimension(m, 400, r0, auto_levels(m, r0), 1).unwrap().median
}

#[test]
fn uniform_ball_mass_is_twice_the_radius() {
    let m = uniform(1, 1_000_000, 1);
    assert!((m.ball_mass(&[0.5], 0.1) - 0.2).abs() < 0.002);
    assert_eq!(m.ball_mass(&[0.5], 2.0), 1.0);
}

#[test]
fn uniform_interval_has_slope_one() {
    let m = uniform(1, 200_000, 2);
    let est = local_dimension(&m, &[0.4], 0.1, 10).unwrap();
    assert!((est.slope - 1.0).abs() < 0.05, "{}", est.slope);
}

#[test]
fn unit_square_has_dimension_two() {
    let m = uniform(2, 200_000, 3);
    let median = measure_dimension(&m, 200, 0.1, 8, 4).unwrap().median;
    assert!((median - 2.0).abs() < 0.1, "{median}");
}

#[test]
fn atom_has_slope_zero() {
    let m = EmpiricalMeasure::from_points(1, vec![1.0; 100]).unwrap();
    let est = local_dimension(&m, &[1.0], 1.0, 10).unwrap();
    assert_eq!(est.slope, 0.0);
}

#[test]
fn cantor_local_dimension_at_typical_points() {
    let c = cantor();
    let m = cloud(&c, 1_000_000, 1);
    let r0 = default_r0(&m);
    let levels = auto_levels(&m, r0);
    let target = 2f64.ln() / 3f64.ln();
    for i in [17, 250_000, 777_777] {
        let est = local_dimension(&m, m.point(i), r0, levels).unwrap();
        assert!((est.slope - target).abs() < 0.05, "{}: {}", i, est.slope);
    }
}

#[test]
fn pipeline_recovers_known_dimensions() {
    for s in [cantor(), halves(), uneven(), paper_example(0.7).unwrap()] {
        let m = cloud(&s, 1_000_000, 7);
        let median = median_dimension(&m);
        let known = s.known_dimension.unwrap();
        assert!((median - known).abs() < 0.05, "{}: {median} vs {known}", s.name);
    }
}

#[test]
fn frostman_separates_exponents() {
    let c = cantor();
    let m = cloud(&c, 1_000_000, 2);
    let r0 = default_r0(&m);
    let levels = auto_levels(&m, r0);
    assert!(frostman_check(&m, 0.5, 200, r0, levels, 3).unwrap().passes);
    assert!(!frostman_check(&m, 0.8, 200, r0, levels, 3).unwrap().passes);
}

#[test]
fn frostman_fails_at_an_atom() {
    let m = EmpiricalMeasure::from_points(1, vec![0.0; 1000]).unwrap();
    let r = frostman_check(&m, 0.1, 50, 1.0, 10, 0).unwrap();
    assert!(!r.passes);
    assert_eq!(r.worst_center, vec![0.0]);
}

fn cover_exponent(s: &NamedSystem, n: usize, points: usize) -> (f64, f64) {
    let m = cloud(s, points, 5);
    let eps = auto_epsilon(&s.system, &m, n, DEFAULT_BAND_WIDTH).unwrap();
    let report = cover_upper_bound(&s.system, &m, n, eps, &default_t_grid(1, 64), 9).unwrap();
    (report.critical_exponent.expect("some exponent accepted"), median_dimension(&m))
}

#[test]
fn cover_bound_on_similitudes() {
    for s in [halves(), cantor()] {
        let (t, _) = cover_exponent(&s, 12, 200_000);
        let known = s.known_dimension.unwrap();
        assert!((t - known).abs() < 0.1, "{}: {t}", s.name);
    }
}

#[test]
fn cover_bound_dominates_example_lower_estimate() {
    let ex = paper_example(0.7).unwrap();
    let (t, median) = cover_exponent(&ex, 14, 1_000_000);
    let known = ex.known_dimension.unwrap();
    assert!((t - known).abs() < 0.1, "{t}");
    assert!(t >= median - 0.05, "{t} < {median}");
}

#[test]
fn auto_epsilon_scales_with_the_spread() {
    // Ratios 1/2 and 1/4 with equal weights: log p is constant and
    // log |h'| has mean -1.5 ln 2 and deviation 0.5 ln 2.
    let u = uneven();
    let m = cloud(&u, 10_000, 1);
    let eps = auto_epsilon(&u.system, &m, 16, 0.6).unwrap();
    assert!((eps - 0.6 / 3.0 / 4.0).abs() < 1e-12, "{eps}");
    let c = cantor();
    assert_eq!(auto_epsilon(&c.system, &cloud(&c, 1000, 1), 12, 0.5).unwrap(), 0.01);
    let ex = paper_example(0.7).unwrap();
    let (lp, ld) = ([0.7f64.ln(), 0.3f64.ln()], [(1.0f64 / 20.0).ln(), 5f64.ln()]);
    let ratio = |v: [f64; 2]| {
        let mean = 0.7 * v[0] + 0.3 * v[1];
        (0.21f64).sqrt() * (v[0] - v[1]).abs() / mean.abs()
    };
    let want = (0.5 * ratio(lp).max(ratio(ld)) / 14f64.sqrt()).clamp(0.01, 0.24);
    let got = auto_epsilon(&ex.system, &cloud(&ex, 10_000, 1), 14, 0.5).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert_eq!(auto_epsilon(&ex.system, &cloud(&ex, 1000, 1), 1, 5.0).unwrap(), 0.24);
    assert!(auto_epsilon(&c.system, &cloud(&c, 10, 1), 0, 0.5).is_err());
}
