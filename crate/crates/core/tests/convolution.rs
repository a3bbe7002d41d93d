use proptest::prelude::*;
use std::f64::consts::PI;
use wavelab::quad;
use wavelab::*;

fn g(v: f64) -> Gamma {
    Gamma::new(v).unwrap()
}

fn ball() -> RadialProfile {
    RadialProfile::new(vec![0.0, 1.0, 1.0 + 1e-12, 3.0], vec![1.0, 1.0, 0.0, 0.0], Tail::Zero).unwrap()
}

fn gaussian(dr: f64, n: usize) -> RadialProfile {
    RadialProfile::sample(dr, n, |l| (-l * l).exp(), Tail::Zero).unwrap()
}

#[test]
fn gamma_domain_and_regimes() {
    assert!(Gamma::new(0.0).is_err());
    assert!(Gamma::new(3.0).is_err());
    assert!(Gamma::new(f64::NAN).is_err());
    assert_eq!(g(1.0).regime(), Regime::Subcritical);
    assert_eq!(g(2.0).regime(), Regime::Critical);
    assert_eq!(g(2.5).regime(), Regime::Supercritical);
    assert_eq!(g(2.5).critical_kappa(), 1.25);
}

#[test]
fn kernel_examples() {
    assert!((kernel_integral(g(2.0), 1.0, 2.0).unwrap() - 3f64.ln()).abs() < 1e-15);
    let k = kernel_integral(g(2.5), 1.0, 2.0).unwrap();
    assert!((k - 2.0 * (1.0 - 3f64.powf(-0.5))).abs() < 1e-14);
    assert!((k - 0.84530).abs() < 1e-5);
    assert!((kernel_integral(g(1.0), 1.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
    assert!(matches!(kernel_integral(g(2.0), 1.5, 1.5), Err(Error::SingularKernel(_))));
    assert!(matches!(kernel_integral(g(2.7), 1.5, 1.5), Err(Error::SingularKernel(_))));
    assert!(kernel_integral(g(1.5), 1.5, 1.5).is_ok());
    assert!(matches!(kernel_integral(g(1.5), 0.0, 1.0), Err(Error::Domain(_))));
}

#[test]
fn kernel_matches_quadrature() {
    for &gm in &[0.5, 1.0, 2.0, 2.5, 2.9] {
        for &(r, rho) in &[(1.0, 2.0), (3.0, 0.25), (0.1, 40.0), (5.0, 5.5)] {
            let q = quad::adaptive(|e: f64| e.powf(1.0 - gm), (r - rho as f64).abs(), r + rho, 1e-14);
            let k = kernel_integral(g(gm), r, rho).unwrap();
            assert!((k - q).abs() < 1e-10 * q, "gamma {gm} r {r} rho {rho}");
        }
    }
}

#[test]
fn indicator_ball_potential() {
    let p0 = hartree_potential(&ball(), g(2.0), 0.0).unwrap();
    assert!((p0 - 4.0 * PI).abs() < 1e-9);
    let oracle = PI * quad::adaptive(|r: f64| r * ((2.0 + r) / (2.0 - r)).ln(), 0.0, 1.0, 1e-14);
    let p2 = hartree_potential(&ball(), g(2.0), 2.0).unwrap();
    assert!((p2 - oracle).abs() < 1e-9 * oracle, "{p2} {oracle}");
    assert!((p2 - 1.105).abs() < 2e-3);
    let mc = hartree_potential_mc(&ball(), g(2.0), 2.0, 400_000, 11).unwrap();
    assert!((mc.mean - p2).abs() <= 3.0 * mc.stderr, "{mc:?} {p2}");
}

#[test]
fn zero_profile_gives_zero() {
    let z = RadialProfile::zero(0.1, 30);
    for r in [0.0, 0.5, 2.9, 10.0] {
        assert_eq!(hartree_potential(&z, g(2.0), r).unwrap(), 0.0);
    }
    let mc = hartree_potential_mc(&z, g(2.0), 1.0, 10_000, 1).unwrap();
    assert_eq!((mc.mean, mc.stderr), (0.0, 0.0));
    let op = HartreeOperator::new(g(2.5), 0.1, 30).unwrap();
    assert!(op.apply(&[0.0; 31], 30).iter().all(|&p| p == 0.0));
}

#[test]
fn monte_carlo_oracle() {
    let b = hartree_potential_mc(&ball(), g(2.0), 0.0, 1_000_000, 5).unwrap();
    assert!((b.mean - 4.0 * PI).abs() <= 3.0 * b.stderr, "{b:?}");
    let u = gaussian(0.02, 400);
    let exact = hartree_potential(&u, g(2.0), 1.0).unwrap();
    let mc = hartree_potential_mc(&u, g(2.0), 1.0, 1_000_000, 6).unwrap();
    assert!((mc.mean - exact).abs() <= 3.0 * mc.stderr, "{mc:?} {exact}");
    assert!(hartree_potential_mc(&u, g(2.0), 1.0, 100, 6).is_err());
}

#[test]
fn monte_carlo_is_deterministic_per_seed() {
    let u = gaussian(0.05, 100);
    let a = hartree_potential_mc(&u, g(2.5), 0.7, 50_000, 3).unwrap();
    let b = hartree_potential_mc(&u, g(2.5), 0.7, 50_000, 3).unwrap();
    let c = hartree_potential_mc(&u, g(2.5), 0.7, 50_000, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn origin_limit_matches_gamma_function_value() {
    // 4 pi int rho^(2-gamma) exp(-2 rho^2) = 2 pi Gamma((3-gamma)/2) 2^(-(3-gamma)/2)
    let exact = [(1.0, PI), (2.0, 2.0 * PI * PI.sqrt() * 2f64.powf(-0.5))];
    let u = gaussian(0.01, 1000);
    for (gm, e) in exact {
        let p = hartree_potential(&u, g(gm), 0.0).unwrap();
        assert!((p / e - 1.0).abs() < 1e-4, "gamma {gm}: {p} vs {e}");
    }
}

#[test]
fn slow_tails_are_rejected() {
    let slow = RadialProfile::sample(0.5, 10, |l| (1.0 + l).powf(-0.7), Tail::PowerLaw { amplitude: 1.0, exponent: 0.7, offset: 1.0 }).unwrap();
    assert!(matches!(hartree_potential(&slow, g(1.5), 1.0), Err(Error::Config(_))));
    assert!(hartree_potential(&slow, g(2.5), 1.0).is_ok());
}

#[test]
fn tails_are_integrated() {
    let tail = Tail::PowerLaw { amplitude: 1.0, exponent: 2.0, offset: 1.0 };
    let short = RadialProfile::sample(0.01, 500, |l| (1.0 + l).powi(-2), tail).unwrap();
    let long = RadialProfile::sample(0.01, 4000, |l| (1.0 + l).powi(-2), tail).unwrap();
    for r in [0.0, 1.0, 4.0, 12.0] {
        let (a, b) = (hartree_potential(&short, g(2.0), r).unwrap(), hartree_potential(&long, g(2.0), r).unwrap());
        assert!((a / b - 1.0).abs() < 1e-4, "r {r}: {a} {b}");
    }
}

#[test]
fn scaling_law() {
    for &(gm, sigma) in &[(1.0, 2.0), (2.0, 2.0), (2.5, 0.5)] {
        let base = gaussian(0.02, 300);
        let scaled = RadialProfile::sample(0.02 / sigma, 300, |l| (-(sigma * l).powi(2)).exp(), Tail::Zero).unwrap();
        for r in [0.0, 0.3, 1.7] {
            let a = hartree_potential(&scaled, g(gm), r / sigma).unwrap();
            let b = hartree_potential(&base, g(gm), r).unwrap();
            assert!((a / (sigma.powf(gm - 3.0) * b) - 1.0).abs() < 1e-9, "gamma {gm} sigma {sigma} r {r}");
        }
    }
}

#[test]
fn operator_matches_general_evaluator() {
    for &gm in &[0.5, 1.0, 2.0, 2.5, 2.9] {
        let (h, n) = (1.0 / 32.0, 320);
        let vals: Vec<f64> = (0..=n).map(|i| (-(i as f64 * h).powi(2)).exp()).collect();
        let op = HartreeOperator::new(g(gm), h, n).unwrap();
        let p = op.apply(&vals, n);
        let fine = gaussian(0.002, 5000);
        for i in [0, 1, 5, 32, 64, 200] {
            let e = hartree_potential(&fine, g(gm), i as f64 * h).unwrap();
            assert!((p[i] / e - 1.0).abs() < 2e-3, "gamma {gm} i {i}: {} vs {e}", p[i]);
        }
    }
}

#[test]
fn operator_is_bilinear_and_symmetric() {
    let (h, n) = (0.1, 60);
    let u: Vec<f64> = (0..=n).map(|i| (-(i as f64 * h - 1.0).powi(2)).exp()).collect();
    let v: Vec<f64> = (0..=n).map(|i| 1.0 / (1.0 + i as f64 * h)).collect();
    let op = HartreeOperator::new(g(2.0), h, n).unwrap();
    let uv = op.apply_product(&u, &v, n);
    let vu = op.apply_product(&v, &u, n);
    let u2v: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
    let twice = op.apply_product(&u2v, &v, n);
    for i in 0..=n {
        assert!((uv[i] - vu[i]).abs() <= 1e-14 * uv[i].abs());
        assert!((twice[i] - 2.0 * uv[i]).abs() <= 1e-14 * uv[i].abs().max(1e-300));
    }
}

#[test]
fn operator_converges_under_refinement() {
    // differences at fixed radii from h, h/2, h/4
    for &(gm, min_ratio) in &[(1.0, 3.5), (2.0, 3.5), (2.5, 1.8)] {
        let at = |h: f64| -> Vec<f64> {
            let n = (8.0 / h) as usize;
            let vals: Vec<f64> = (0..=n).map(|i| (-(i as f64 * h).powi(2)).exp()).collect();
            let p = HartreeOperator::new(g(gm), h, n).unwrap().apply(&vals, n);
            [0.0, 0.5, 1.0, 2.0].iter().map(|r| p[(r / h).round() as usize]).collect()
        };
        let (a, b, c) = (at(0.1), at(0.05), at(0.025));
        for k in 0..4 {
            if (a[k] - b[k]).abs() < 1e-12 * a[k] {
                continue;
            }
            let ratio = (a[k] - b[k]).abs() / (b[k] - c[k]).abs();
            assert!(ratio > min_ratio, "gamma {gm} point {k}: ratio {ratio}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn potential_is_positive(a in 0.1f64..3.0, w in 0.3f64..3.0, gm in 0.2f64..2.95, r in 0.0f64..6.0) {
        let u = RadialProfile::sample(0.05, 120, |l| a * (-(l / w).powi(2)).exp(), Tail::Zero).unwrap();
        prop_assert!(hartree_potential(&u, g(gm), r).unwrap() > 0.0);
    }

    #[test]
    fn potential_is_monotone_in_data(c in prop::collection::vec(0.0f64..1.0, 21), s in 0.0f64..1.0, gm in 0.2f64..2.95, r in 0.0f64..3.0) {
        let small: Vec<f64> = c.iter().map(|x| s * x).collect();
        let big: Vec<f64> = c.iter().map(|x| -x).collect();
        let p1 = hartree_potential(&RadialProfile::uniform(0.1, small, Tail::Zero).unwrap(), g(gm), r).unwrap();
        let p2 = hartree_potential(&RadialProfile::uniform(0.1, big, Tail::Zero).unwrap(), g(gm), r).unwrap();
        prop_assert!(p1 <= p2 * (1.0 + 1e-12));
    }
}
