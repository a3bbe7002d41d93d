use proptest::prelude::*;
use wavelab::analysis::*;
use wavelab::*;

fn g(v: f64) -> Gamma {
    Gamma::new(v).unwrap()
}

fn weight(gm: f64, r: f64, t: f64) -> f64 {
    (1.0 + t + r) * (1.0 + (t - r).abs()).powf((3.0 - gm) / 2.0)
}

#[test]
fn x_norm_of_exact_weight_is_one() {
    let grid = Grid::new(0.25, 40.0, 20.0).unwrap();
    for gm in [1.0, 2.0, 2.5] {
        let f = SpaceTimeField::from_fn(grid, |r, t| 1.0 / weight(gm, r, t));
        assert!((x_norm(&f, g(gm), 20.0) - 1.0).abs() < 1e-14);
        assert!((x_norm(&f.map(|u| -3.0 * u), g(gm), 20.0) - 3.0).abs() < 1e-13);
    }
    let zero = SpaceTimeField::from_fn(grid, |_, _| 0.0);
    assert_eq!(x_norm(&zero, g(2.0), 20.0), 0.0);
}

#[test]
fn x_norm_matches_a_node_scan() {
    let dr = 0.125;
    let grid = Grid::covering(dr, 10.0, 4.0).unwrap();
    let data = InitialDataSet::from_family(&DataFamily::Blowup { b: 1.0, kappa: 1.5 }, dr, grid.r_max()).unwrap();
    let rep = solve(&data, 1.0, g(2.0), grid, &SolverOptions { nonlinearity: false, ..Default::default() }).unwrap();
    let mut scan = 0.0f64;
    for j in 0..=grid.n_t {
        for i in 0..=grid.row_end(j) {
            let u = free_solution(&data, 1.0, grid.r(i), grid.t(j));
            scan = scan.max(weight(2.0, grid.r(i), grid.t(j)) * u.abs());
        }
    }
    let x = x_norm(&rep.field, g(2.0), 10.0);
    assert!(x.is_finite() && x > 0.0);
    assert!((x - scan).abs() <= 1e-6 * scan, "{x} vs {scan}");
    assert!((rep.x_norm_until(grid.n_t) - x).abs() <= 1e-12 * x);
    assert!(x_norm(&rep.field, g(2.0), 5.0) <= x);
}

#[test]
fn y_norm_examples() {
    for (b, kappa) in [(1.0, 1.5), (2.5, 0.75), (0.3, 3.0)] {
        let data = InitialDataSet::from_family(&DataFamily::Blowup { b, kappa }, 0.1, 20.0).unwrap();
        assert!((y_norm(&data, kappa) / b - 1.0).abs() < 1e-12, "B {b} kappa {kappa}");
    }
    let zero = InitialDataSet::from_family(&DataFamily::GaussianBump { amplitude: 0.0, width: 1.0 }, 0.1, 10.0).unwrap();
    assert_eq!(y_norm(&zero, 1.5), 0.0);
    let fam = DataFamily::GaussianBump { amplitude: 1.0, width: 1.0 };
    let short = y_norm(&InitialDataSet::from_family(&fam, 0.05, 20.0).unwrap(), 1.5);
    let long = y_norm(&InitialDataSet::from_family(&fam, 0.05, 40.0).unwrap(), 1.5);
    assert!(short.is_finite() && short > 1.0);
    assert!((short - long).abs() < 1e-12);
}

#[test]
fn homogeneous_norm_scales_with_the_data() {
    let fam = DataFamily::Blowup { b: 1.0, kappa: 1.5 };
    let data = InitialDataSet::from_family(&fam, 0.05, 40.0).unwrap();
    for (gm, sigma) in [(2.0, 2.0), (2.5, 0.5), (2.0, 4.0)] {
        let scaled = data.rescaled(sigma, gm).unwrap();
        let ratio = y_norm_homogeneous(&scaled, 1.5) / y_norm_homogeneous(&data, 1.5);
        let expected = sigma.powf((5.0 - gm) / 2.0 - 1.5);
        assert!((ratio / expected - 1.0).abs() < 1e-12, "gamma {gm} sigma {sigma}: {ratio} vs {expected}");
    }
}

#[test]
fn weights() {
    assert!(WeightSpec::new(f64::NAN, 0.0, 0).is_err());
    assert!(WeightSpec::potential(g(1.5)).is_err());
    assert_eq!(WeightSpec::potential(g(2.0)).unwrap(), WeightSpec { a: 1.75, b: 0.25, l: 1 });
    let p = WeightSpec::potential(g(2.6)).unwrap();
    assert!((p.a - 1.9).abs() < 1e-15 && (p.b - 0.1).abs() < 1e-15 && p.l == 0);
    let w = WeightSpec::potential(g(2.0)).unwrap();
    let (r, t) = (1.0, 3.0);
    assert!((w.eval(r, t) - 5f64.powf(1.75) * 3f64.powf(0.25) / (1.0 + 5f64.ln())).abs() < 1e-12);
    assert!((WeightSpec::x_gamma(g(2.0)).eval(r, t) - weight(2.0, r, t)).abs() < 1e-14);
    assert_eq!(duhamel_loss(g(2.5), 100.0), 1.0);
    assert!((duhamel_loss(g(2.0), 0.0) - (1.0 + 3f64.ln())).abs() < 1e-15);
}

#[test]
fn stratified_samples_cover_the_regimes() {
    let s = SampleSet::stratified(64.0, 100, 9);
    assert_eq!(s.points.len(), 303);
    assert!(s.points.iter().all(|&(r, t)| r >= 0.0 && t >= 0.0 && t <= 64.0 * (1.0 + 1e-12)));
    let cone = s.points.iter().filter(|&&(r, t)| (t - r).abs() <= t / 2.0).count();
    let inner = s.points.iter().filter(|&&(r, t)| t >= 2.0 * r).count();
    let outer = s.points.iter().filter(|&&(r, t)| r >= 2.0 * t).count();
    assert!(cone >= 100 && inner >= 100 && outer >= 100, "{cone} {inner} {outer}");
    assert_eq!(SampleSet::stratified(64.0, 100, 9), s);
    let sets = SampleSet::nested(10.0, 3, 5, 1);
    assert_eq!(sets.iter().map(|s| s.scale).collect::<Vec<_>>(), [10.0, 20.0, 40.0, 80.0]);
}

#[test]
fn zero_fields_give_zero_ratios() {
    let sets = SampleSet::nested(4.0, 1, 5, 2);
    let zero = SyntheticProfile::exact_weight(g(2.0), 0.0);
    let w = WeightSpec::potential(g(2.0)).unwrap();
    let rep = verify_potential_bound(FieldRef::Synthetic(zero), g(2.0), w, &sets).unwrap();
    assert_eq!(rep.sup_ratio, 0.0);
    assert!(rep.pass);
    let grid = Grid::new(0.25, 16.0, 8.0).unwrap();
    let field = SpaceTimeField::from_fn(grid, |_, _| 0.0);
    let rep = verify_potential_bound(FieldRef::Solved { field: &field, decay: (2.5, 1.0) }, g(2.0), w, &sets).unwrap();
    assert_eq!(rep.sup_ratio, 0.0);
    let rep = verify_duhamel_bound([zero; 3], g(2.0), &[4.0, 8.0], 0.25, true).unwrap();
    assert_eq!(rep.sup_ratio, 0.0);
}

#[test]
fn potential_ratio_ignores_sign_and_dominates_smaller_weights() {
    let sets = SampleSet::nested(8.0, 1, 6, 3);
    let w = WeightSpec::potential(g(2.0)).unwrap();
    let plus = verify_potential_bound(FieldRef::Synthetic(SyntheticProfile::exact_weight(g(2.0), 1.0)), g(2.0), w, &sets).unwrap();
    let minus = verify_potential_bound(FieldRef::Synthetic(SyntheticProfile::exact_weight(g(2.0), -2.0)), g(2.0), w, &sets).unwrap();
    assert!((plus.sup_ratio - minus.sup_ratio).abs() <= 1e-12 * plus.sup_ratio);
    assert!(plus.sup_ratio > 0.0 && plus.sup_ratio.is_finite());
    // b = 0.3 with a + b = 2 is pointwise no larger than the b = 1/4 weight
    let weak = WeightSpec::new(1.7, 0.3, 1).unwrap();
    for k in 0..200 {
        let (r, t) = (0.37 * k as f64, 0.61 * (200 - k) as f64);
        assert!(weak.eval(r, t) <= w.eval(r, t) * (1.0 + 1e-14));
    }
    let rep = verify_potential_bound(FieldRef::Synthetic(SyntheticProfile::exact_weight(g(2.0), 1.0)), g(2.0), weak, &sets).unwrap();
    assert!(rep.sup_ratio <= plus.sup_ratio * (1.0 + 1e-12));
}

#[test]
fn solved_and_synthetic_verifiers_agree_on_sampled_profiles() {
    let u = SyntheticProfile::exact_weight(g(2.5), 1.0);
    let dr = 0.25;
    let grid = Grid::new(dr, 400.0, 8.0).unwrap();
    let field = SpaceTimeField::from_fn(grid, |r, t| u.value(r, t));
    let w = WeightSpec::potential(g(2.5)).unwrap();
    // points on nodes, far from the edge of the stored trapezoid
    let set = SampleSet { scale: 8.0, points: vec![(1.0, 4.0), (4.0, 4.0), (8.0, 2.0), (0.0, 8.0)] };
    let a = verify_potential_bound(FieldRef::Synthetic(u), g(2.5), w, std::slice::from_ref(&set)).unwrap();
    let b = verify_potential_bound(FieldRef::Solved { field: &field, decay: (u.decay(), 1.0) }, g(2.5), w, &[set]).unwrap();
    assert!((a.sup_ratio / b.sup_ratio - 1.0).abs() < 1e-2, "{} vs {}", a.sup_ratio, b.sup_ratio);
}

#[test]
fn lemma_examples() {
    let k = LemmaKind::Lower { kappa: 3.0 };
    assert!((k.lhs(1.0, 2.0) - 26.0 / 81.0).abs() < 1e-13);
    assert!((k.rhs(1.0, 2.0, Distortion::default()) - 2.0 / 9.0).abs() < 1e-15);
    let k = LemmaKind::WeightedArc { kappa: 1.5 };
    assert_eq!(k.lhs(0.0, 3.0), 0.0);
    assert_eq!(k.rhs(0.0, 3.0, Distortion::default()), 0.0);
    let degenerate = SampleSet { scale: 3.0, points: vec![(0.0, 3.0), (0.0, 1.0)] };
    let rep = lemma_integral_oracle(k, Distortion::default(), &[degenerate]).unwrap();
    assert_eq!(rep.sup_ratio, 0.0);
    assert!(lemma_integral_oracle(LemmaKind::Arc { delta: 1.5 }, Distortion::default(), &[]).is_err());
    assert!(lemma_integral_oracle(LemmaKind::WeightedArc { kappa: 0.0 }, Distortion::default(), &[]).is_err());
}

#[test]
fn lemma_quadrature_matches_closed_forms() {
    for &(r, t) in &[(0.5, 3.0), (7.0, 2.0), (40.0, 40.5), (1e-3, 1e3)] {
        let (lo, hi) = ((t - r as f64).abs(), t + r);
        let arc = (1.0 + hi).ln() - (1.0 + lo).ln();
        assert!((LemmaKind::Arc { delta: 0.5 }.lhs(r, t) / arc - 1.0).abs() < 1e-8);
        for kappa in [0.5, 1.0, 2.5] {
            let exact = ((1.0 + lo).powf(-kappa) - (1.0 + hi).powf(-kappa)) / kappa;
            assert!((LemmaKind::WeightedArc { kappa }.lhs(r, t) / exact - 1.0).abs() < 1e-8);
            let exact0 = exact / r;
            assert!((LemmaKind::LogWeighted { kappa, l: 0 }.lhs(r, t) / exact0 - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn lemma_bounds_hold_and_controls_fail() {
    let sets = SampleSet::nested(100.0, 3, 2500, 17);
    let none = Distortion::default();
    for kind in [
        LemmaKind::Arc { delta: 0.5 },
        LemmaKind::Arc { delta: 1.0 },
        LemmaKind::WeightedArc { kappa: 0.5 },
        LemmaKind::WeightedArc { kappa: 2.0 },
        LemmaKind::LogWeighted { kappa: 1.0, l: 1 },
        LemmaKind::LogWeighted { kappa: 0.7, l: 0 },
        LemmaKind::LogWeighted { kappa: 2.0, l: 2 },
    ] {
        let rep = lemma_integral_oracle(kind, none, &sets).unwrap();
        assert!(rep.pass, "{kind:?}: {:?}", rep.trend);
    }
    let shift = Distortion { exponent_shift: 0.5, drop_log: false };
    assert!(!lemma_integral_oracle(LemmaKind::WeightedArc { kappa: 1.0 }, shift, &sets).unwrap().pass);
    assert!(!lemma_integral_oracle(LemmaKind::Arc { delta: 0.5 }, shift, &sets).unwrap().pass);
    let drop = Distortion { exponent_shift: 0.0, drop_log: true };
    assert!(!lemma_integral_oracle(LemmaKind::LogWeighted { kappa: 1.0, l: 1 }, drop, &sets).unwrap().pass);
}

#[test]
fn explicit_lower_bound_has_no_violations() {
    let (bad, worst) = lower_bound_sweep(10_000, 50.0, 4);
    assert_eq!(bad, 0);
    assert!(worst <= 1.0 + LOWER_SLACK && worst > 0.5, "{worst}");
    let shift = Distortion { exponent_shift: -0.5, drop_log: false };
    let rep = lemma_integral_oracle(LemmaKind::Lower { kappa: 2.0 }, shift, &SampleSet::nested(50.0, 0, 500, 5)).unwrap();
    assert!(!rep.pass);
}

#[test]
fn scaling_identity_and_trivial_sigma() {
    let dr = 0.125;
    let grid = Grid::covering(dr, 4.0, 4.0).unwrap();
    let fam = DataFamily::Blowup { b: 1.0, kappa: 1.5 };
    let data = InitialDataSet::from_family(&fam, dr, grid.r_max()).unwrap();
    let rep = scaling_check(&data, 0.5, g(2.0), grid, 1.0, &SolverOptions::default()).unwrap();
    assert_eq!(rep.max_rel_deviation, 0.0);
    assert_eq!(rep.norm_factor, 1.0);
    let crit = data.clone().with_kappa(1.5).unwrap();
    let rep = scaling_check(&crit, 0.5, g(2.0), grid, 2.0, &SolverOptions::default()).unwrap();
    assert_eq!(rep.norm_factor_expected, 1.0);
    assert!((rep.norm_factor - 1.0).abs() < 1e-14);
    assert!(rep.compared_nodes > 1000);
}

#[test]
fn late_growth_examples() {
    assert_eq!(late_growth(&[]), 0.0);
    assert_eq!(late_growth(&[1.0, 1.0, 1.0, 1.0]), 0.0);
    assert!((late_growth(&[1.0, 2.0, 2.0, 3.0]) - 0.5).abs() < 1e-15);
    assert_eq!(late_growth(&[0.0, 0.0, 1.0]), f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn x_norm_is_absolutely_homogeneous(c in -5.0f64..5.0, w in 0.2f64..3.0) {
        let grid = Grid::new(0.25, 10.0, 5.0).unwrap();
        let f = SpaceTimeField::from_fn(grid, |r, t| (-((r - t) / w).powi(2)).exp() / (1.0 + t));
        let a = x_norm(&f, g(2.0), 5.0);
        let b = x_norm(&f.map(|u| c * u), g(2.0), 5.0);
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * a);
    }

    #[test]
    fn lemma_ratios_are_finite_and_nonnegative(r in 0.0f64..200.0, t in 0.0f64..200.0, kappa in 0.1f64..3.0) {
        for kind in [LemmaKind::WeightedArc { kappa }, LemmaKind::Arc { delta: kappa.min(1.0) }] {
            let (l, rhs) = (kind.lhs(r, t), kind.rhs(r, t, Distortion::default()));
            prop_assert!(l >= 0.0 && rhs >= 0.0);
            if rhs > 0.0 {
                prop_assert!((l / rhs).is_finite() && l / rhs < 10.0);
            }
        }
    }

    #[test]
    fn synthetic_norm_saturates_at_exact_weight(a in 0.1f64..4.0, gm in 0.5f64..2.9) {
        let u = SyntheticProfile::exact_weight(g(gm), a);
        prop_assert_eq!(u.x_norm(g(gm), 100.0, 200.0), a);
        let faster = SyntheticProfile { amplitude: a, a: 1.2, b: u.b };
        prop_assert!(faster.x_norm(g(gm), 100.0, 200.0) <= a * (1.0 + 1e-12));
    }
}
