use ifsdim_core::builtin::{
    cantor, paper_example, paper_example_dimension, paper_example_truncated, threshold_p1,
};
use ifsdim_core::ergodic::dimension_formula;
use ifsdim_core::geometry::{check_osc, check_rosc, check_sosc, default_r_grid};
use ifsdim_core::model::{coa_margin, validate_system, MapSpec, ProbabilityField};
use ifsdim_core::symbolic::{coding_map, compose_backward, compose_forward};
use ifsdim_core::{IfsSystem, OpenSet, Point, SymbolStream, Word};

fn pair(a: MapSpec, b: MapSpec) -> IfsSystem {
    IfsSystem::new(vec![a, b], ProbabilityField::uniform(2)).unwrap()
}

fn unit() -> OpenSet {
    OpenSet::intervals(vec![(0.0, 1.0)]).unwrap()
}

#[test]
fn example_formula_is_eta_over_lambda() {
    let lo = threshold_p1();
    for i in 1..=100 {
        let p1 = lo + (0.99 - lo) * i as f64 / 101.0;
        let p2 = 1.0 - p1;
        let eta = p1 * p1.ln() + p2 * p2.ln();
        let lambda = p1 * (1.0f64 / 20.0).ln() + p2 * 5f64.ln();
        let direct = dimension_formula(eta, lambda).unwrap();
        let closed = paper_example_dimension(p1).unwrap();
        assert!(!closed.below_threshold);
        assert!((closed.value - direct).abs() < 1e-12, "p1 = {p1}");
    }
}

#[test]
fn example_dimension_vanishes_as_p1_tends_to_one() {
    let v = paper_example_dimension(1.0 - 1e-9).unwrap().value;
    assert!(v.abs() < 1e-6, "{v}");
    assert!(threshold_p1() > 5f64.ln() / 100f64.ln());
}

#[test]
fn example_validates_across_p1() {
    for i in 1..=20 {
        let p1 = 0.01 + 0.98 * i as f64 / 21.0;
        let ex = paper_example(p1).unwrap();
        let report = validate_system(&ex.system, 2000, i);
        assert!(report.all_passed(), "p1 = {p1}: {:?}", report.failed().collect::<Vec<_>>());
    }
}

#[test]
fn example_margin_is_negative_on_truncated_decades() {
    let ex = paper_example_truncated(0.7, 3).unwrap();
    let m = coa_margin(&ex.system, &OpenSet::decades(3), 20_000, 1).unwrap();
    assert!(m.sup_estimate < 0.0, "{m:?}");
    assert_eq!(m.b_lower, -m.sup_estimate);
}

#[test]
fn expanding_pair_has_positive_margin() {
    let s = pair(MapSpec::affine_1d(2.0, 0.0), MapSpec::affine_1d(3.0, 0.0));
    let m = coa_margin(&s, &unit(), 1000, 0).unwrap();
    assert!((m.sup_estimate - 0.5 * 6f64.ln()).abs() < 1e-12);
    assert_eq!(m.b_lower, 0.0);
}

#[test]
fn cantor_open_set_condition() {
    let c = cantor();
    let r = check_osc(&c.system, &unit(), 1000, 0).unwrap();
    assert!(r.osc_pass());
    assert_eq!(r.separation_r1, 1.0 / 3.0);
    assert_eq!(check_sosc(&c.system, &unit()).unwrap(), 1.0 / 3.0);
}

#[test]
fn overlapping_halves_fail_with_witness() {
    let s = pair(MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(0.5, 0.25));
    let r = check_osc(&s, &unit(), 1000, 0).unwrap();
    assert!(!r.disjointness_pass);
    let w = r.witnesses.iter().find(|w| w.kind == "disjointness").unwrap();
    assert!(w.point[0] > 0.25 && w.point[0] < 0.5);
    assert!(check_sosc(&s, &unit()).is_err());
}

#[test]
fn touching_halves_have_zero_separation() {
    let s = pair(MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(0.5, 0.5));
    assert!(check_osc(&s, &unit(), 1000, 0).unwrap().osc_pass());
    assert_eq!(check_sosc(&s, &unit()).unwrap(), 0.0);
}

/// Images of `B_0..B_n_max` written out from the branch formulas.
fn example_images(n_max: i32) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let p = |n: i32| 10f64.powi(n);
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for n in 0..=n_max {
        let (a, b) = (p(n), 3.0 * p(n));
        if n == 0 {
            h1.push((a / 20.0 + 1.0, b / 20.0 + 1.0));
            h2.push((5.0 * a + 5.0, 5.0 * b + 5.0));
        } else {
            h1.push((a / 20.0 + 15.0 * p(n - 2), b / 20.0 + 15.0 * p(n - 2)));
            h2.push((5.0 * a + 5.0 * p(n), 5.0 * b + 5.0 * p(n)));
        }
    }
    (h1, h2)
}

#[test]
fn example_images_land_in_neighbouring_decades() {
    let u = OpenSet::decades(3);
    let ex = paper_example_truncated(0.7, 3).unwrap();
    let r = check_osc(&ex.system, &u, 1000, 0).unwrap();
    assert!(r.osc_pass(), "{:?}", r.witnesses);
    let (h1, h2) = example_images(3);
    for n in 0..=3usize {
        let m1 = if n == 0 { 0 } else { n - 1 };
        let rec1 = r.images.iter().find(|i| i.map == 0 && i.component.0 == 10f64.powi(n as i32)).unwrap();
        assert_eq!(rec1.lands_in, Some(m1));
        assert!((rec1.image[0].0 - h1[n].0).abs() < 1e-9 && (rec1.image[0].1 - h1[n].1).abs() < 1e-9);
        let rec2 = r.images.iter().find(|i| i.map == 1 && i.component.0 == 10f64.powi(n as i32)).unwrap();
        assert!((rec2.image[0].0 - h2[n].0).abs() < 1e-9 && (rec2.image[0].1 - h2[n].1).abs() < 1e-9);
    }
}

#[test]
fn example_separation_matches_interval_gaps() {
    let (h1, h2) = example_images(3);
    let gap = h1
        .iter()
        .flat_map(|a| h2.iter().map(move |b| (b.0 - a.1).max(a.0 - b.1).max(0.0)))
        .fold(f64::INFINITY, f64::min);
    // h2(B_0) = (10, 20) and h1(B_2) = (20, 30) share an endpoint.
    assert_eq!(gap, 0.0);
    let ex = paper_example_truncated(0.7, 3).unwrap();
    assert_eq!(check_sosc(&ex.system, &OpenSet::decades(3)).unwrap(), gap);
}

#[test]
fn unit_interval_is_regular() {
    let c = cantor();
    let r = check_rosc(&c.system, &unit(), &default_r_grid(&unit()), 1000, 0).unwrap();
    assert!(r.passes);
    assert!((r.r3 - 1.0).abs() < 1e-12);
}

#[test]
fn example_decades_are_regular() {
    let ex = paper_example_truncated(0.7, 3).unwrap();
    let u = OpenSet::decades(3);
    let r = check_rosc(&ex.system, &u, &default_r_grid(&u), 1000, 0).unwrap();
    assert!(r.passes);
    assert!(r.r3 >= 1.0 - 1e-12, "{}", r.r3);
}

#[test]
fn shrinking_components_lose_regularity() {
    let comps: Vec<(f64, f64)> = (1..=12)
        .map(|n| (2f64.powi(-n) - 4f64.powi(-n), 2f64.powi(-n)))
        .collect();
    let u = OpenSet::intervals(comps).unwrap();
    let c = cantor();
    let r = check_rosc(&c.system, &u, &[0.01], 1000, 0).unwrap();
    assert!(!r.passes);
    assert!(r.r3 < 0.01, "{}", r.r3);
}

#[test]
fn composition_orders() {
    let c = cantor();
    let zero = Point::scalar(0.0).unwrap();
    let w = Word::new(vec![0, 1]);
    assert!((compose_forward(&c.system, &w, &zero).unwrap().coords()[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((compose_backward(&c.system, &w, &zero).unwrap().coords()[0] - 2.0 / 9.0).abs() < 1e-15);
    let three = Word::repeat(1, 3);
    assert!((compose_forward(&c.system, &three, &zero).unwrap().coords()[0] - 26.0 / 27.0).abs() < 1e-15);
}

const TOL: f64 = 1e-10;

#[test]
fn coding_map_fixed_points() {
    let c = cantor();
    let x0 = Point::scalar(0.3).unwrap();
    let one = coding_map(&c.system, &SymbolStream::constant(1), &x0, TOL, 500).unwrap();
    assert!(one.converged);
    assert!((one.point.coords()[0] - 1.0).abs() < TOL);
    let alt = SymbolStream::periodic(Word::empty(), Word::new(vec![0, 1])).unwrap();
    let r = coding_map(&c.system, &alt, &x0, TOL, 500).unwrap();
    assert!((r.point.coords()[0] - 0.25).abs() < TOL);
}

fn equivariance_on(system: &IfsSystem, x0: &Point, weights: &[f64]) {
    for seed in 0..10 {
        let stream = SymbolStream::random(weights, seed).unwrap();
        let base = coding_map(system, &stream, x0, TOL, 5000).unwrap();
        assert!(base.converged);
        for i in 0..system.k() {
            let shifted = coding_map(system, &stream.prepended(i), x0, TOL, 5000).unwrap();
            let image = system.eval_map(i, &base.point).unwrap();
            let scale = image.coords()[0].abs().max(1.0);
            assert!(
                shifted.point.distance(&image) <= 10.0 * TOL * scale,
                "seed {seed} symbol {i}: {:?} vs {:?}",
                shifted.point,
                image
            );
        }
    }
}

#[test]
fn coding_map_is_equivariant() {
    equivariance_on(&cantor().system, &Point::scalar(0.5).unwrap(), &[1.0, 1.0]);
    let ex = paper_example(0.7).unwrap();
    equivariance_on(&ex.system, &ex.start, &[0.7, 0.3]);
}

#[test]
fn coding_map_forgets_the_start() {
    let c = cantor();
    for seed in 0..10 {
        let stream = SymbolStream::random(&[1.0, 1.0], seed).unwrap();
        // Neither start is fixed by a map; at 0 the increments of x/3 vanish.
        let a = coding_map(&c.system, &stream, &Point::scalar(0.2).unwrap(), TOL, 500).unwrap();
        let b = coding_map(&c.system, &stream, &Point::scalar(0.9).unwrap(), TOL, 500).unwrap();
        assert!(a.point.distance(&b.point) <= 10.0 * TOL);
    }
}
