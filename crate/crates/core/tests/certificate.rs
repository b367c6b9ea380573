use num_complex::Complex64;
use superres::certificate::{
    build_2d_certificate, build_separated_certificate, c1_alpha, classical_certificate, error_bound,
    error_bound_from_certificate, product_certificate, theoretical_constant_c1, Certificate, NONNEG_TOL,
    REFERENCE_C1, ROOT_TOL,
};
use superres::experiments::{certified_bound, run_trial, TrialSpec};
use superres::rayleigh::{sample_support, RayleighParams, SupportSet};
use superres::solver::SolverConfig;
use superres::{Grid, OperatorKind};

fn grid_128() -> Grid {
    Grid::from_srf(1, 128, 4).unwrap()
}

/// Values, slopes, range and band limit of a built 1D certificate.
fn check_invariants(c: &Certificate) {
    for p in c.roots().positions() {
        assert!(c.eval(p[0]).abs() <= ROOT_TOL, "value at root {}", c.eval(p[0]));
        let slope = c.eval_derivative(p[0]) / (2.0 * std::f64::consts::PI * c.band_limit() as f64);
        assert!(slope.abs() <= ROOT_TOL, "slope at root {slope}");
    }
    assert!(c.dense_size() >= 16 * c.grid().size());
    assert!(c.dense_min() >= -NONNEG_TOL, "min {}", c.dense_min());
    assert!(c.dense_max() <= 1.0 + 1e-12, "max {}", c.dense_max());
    // DFT of the N-grid samples is supported on [-f, f].
    let v = c.grid_values();
    let n = v.len();
    let (mut inside, mut outside) = (0.0, 0.0);
    for j in 0..n {
        let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, q) in v.iter().enumerate() {
            acc += Complex64::from_polar(*q, -2.0 * std::f64::consts::PI * (j * i % n) as f64 / n as f64);
        }
        if k.unsigned_abs() as usize <= c.band_limit() {
            inside += acc.norm_sqr();
        } else {
            outside += acc.norm_sqr();
        }
    }
    assert!(outside <= 1e-9 * inside, "out-of-band energy {outside} vs {inside}");
}

#[test]
fn empty_support_gives_constant_one() {
    let g = grid_128();
    let c = build_separated_certificate(&SupportSet::empty(g), 128).unwrap();
    assert!((c.eval(0.3) - 1.0).abs() < 1e-15);
    assert!((c.rho() - 0.5).abs() < 1e-15);
    let c2 = build_2d_certificate(&SupportSet::empty(Grid::two_d(64, 8).unwrap()), 8).unwrap();
    assert!((c2.eval_2d([0.1, 0.7]).0 - 1.0).abs() < 1e-15);
}

#[test]
fn single_root_growth_is_recorded() {
    let g = grid_128();
    let t = SupportSet::one_d(g, &[0]).unwrap();
    let c = build_separated_certificate(&t, 128).unwrap();
    check_invariants(&c);
    let growth = c.growth().unwrap();
    let n = g.size() as f64;
    println!("measured c1 = {:.4} (reference {REFERENCE_C1}), near {:.4}, far {:.4}", growth.c1, growth.near, growth.far);
    assert!(growth.c1 > 0.0);
    if growth.c1 < REFERENCE_C1 {
        println!("flag: measured c1 below the reference value");
    }
    assert!(c.eval(1.0 / n) >= growth.c1 * 128.0 * 128.0 / (n * n) * (1.0 - 1e-12));
}

#[test]
fn two_roots_two_lambda_apart() {
    let g = grid_128();
    // 2 lambda_c = 2N/fc grid steps.
    let step = 2 * g.size() / g.fc();
    let t = SupportSet::one_d(g, &[100, 100 + step]).unwrap();
    let c = build_separated_certificate(&t, 128).unwrap();
    check_invariants(&c);
    assert!(c.rho() > 0.0);
}

#[test]
fn random_separated_supports() {
    let g = grid_128();
    let class = RayleighParams::new(3.74, 1, g).unwrap();
    for seed in 0..10 {
        let t = sample_support(&class, 20, seed).unwrap();
        let c = build_separated_certificate(&t, 128).unwrap();
        check_invariants(&c);
        assert!(c.rho() > 0.0);
    }
}

#[test]
fn classical_certificate_examples() {
    let g = grid_128();
    let n = g.size() as f64;
    let c = classical_certificate(&SupportSet::one_d(g, &[0]).unwrap()).unwrap();
    assert_eq!(c.eval(0.0), 0.0);
    assert!(c.eval(1.0 / n) <= std::f64::consts::PI.powi(2) / (n * n));
    assert!((c.eval(0.5) - 1.0).abs() < 1e-15);
    let multi = classical_certificate(&SupportSet::one_d(g, &[3, 200, 511]).unwrap()).unwrap();
    for p in multi.roots().positions() {
        assert!(multi.eval(p[0]).abs() < 1e-15);
    }
    // Too many roots for the band.
    let small = Grid::one_d(64, 4).unwrap();
    assert!(classical_certificate(&SupportSet::one_d(small, &[0, 10, 20, 30, 40]).unwrap()).is_err());
}

#[test]
fn constructed_certificate_rises_faster_than_classical() {
    let g = grid_128();
    let n = g.size() as f64;
    let t = SupportSet::one_d(g, &[0]).unwrap();
    let built = build_separated_certificate(&t, 128).unwrap();
    let classical = classical_certificate(&t).unwrap();
    let ratio = built.eval(1.0 / n) / classical.eval(1.0 / n);
    let c1 = built.growth().unwrap().c1;
    let floor = (128.0 / std::f64::consts::PI).powi(2) * c1;
    println!("q(1/N) ratio {ratio:.1}, growth floor {floor:.1}");
    assert!(ratio >= floor * (1.0 - 1e-12));
}

#[test]
fn product_certificates() {
    let g = grid_128();
    // r = 1 reduces to the separated construction.
    let t1 = SupportSet::one_d(g, &[10, 300, 700]).unwrap();
    let p1 = product_certificate(&t1, 1).unwrap();
    let s1 = build_separated_certificate(&t1, 128).unwrap();
    assert!((p1.certificate.eval(0.123) - s1.eval(0.123)).abs() < 1e-12);

    let class = RayleighParams::new(3.74 * 2.0, 2, g).unwrap();
    for seed in 0..5 {
        let t = sample_support(&class, 12, seed).unwrap();
        let p = product_certificate(&t, 2).unwrap();
        check_invariants(&p.certificate);
        for pt in t.positions() {
            assert!(p.certificate.eval(pt[0]).abs() <= ROOT_TOL);
        }
        let band: usize = p.factors.iter().map(|f| f.band_limit()).sum();
        assert_eq!(p.certificate.band_limit(), band);
        for k in (band as i64 + 1)..=(g.fc() as i64) {
            assert_eq!(p.certificate.coeff(k), Complex64::new(0.0, 0.0));
        }
        let pred = p.rho_prediction.unwrap();
        println!("seed {seed}: rho {:.3e}, predicted {:.3e}", p.certificate.rho(), pred);
        assert!(p.certificate.rho() >= pred * (1.0 - 1e-9));
    }
}

#[test]
fn error_bound_examples() {
    assert!((error_bound(0.5, 3.0).unwrap() - 6.0).abs() < 1e-15);
    assert_eq!(error_bound(0.2, 0.0).unwrap(), 0.0);
    assert!(error_bound(0.0, 1.0).is_err());
    assert!(error_bound(0.7, 1.0).is_err());
    let g = grid_128();
    let c = build_separated_certificate(&SupportSet::empty(g), 128).unwrap();
    assert!((error_bound_from_certificate(&c, 1.5).unwrap() - 3.0).abs() < 1e-15);
}

#[test]
fn stability_constants() {
    assert!((theoretical_constant_c1(1).unwrap() - 271.16).abs() < 1e-9);
    assert!((theoretical_constant_c1(2).unwrap() - 4.0 * 67.79f64.powi(2) * 16.0).abs() < 1e-6);
    assert!((c1_alpha(1, 0.5).unwrap() - 271.16 * superres::flattening::calpha(0.5).unwrap() * 4.0).abs() < 1e-9);
    assert!(c1_alpha(1, 1.0).is_err());
    assert!(c1_alpha(1, 0.3).is_err());
}

#[test]
fn certificate_json_round_trip() {
    let g = grid_128();
    let c = build_separated_certificate(&SupportSet::one_d(g, &[5, 400]).unwrap(), 128).unwrap();
    let text = serde_json::to_string(&c.to_json()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 257);
    assert!(v["rho"].as_f64().unwrap() > 0.0);
    let csv = c.evaluation_csv();
    assert_eq!(csv.lines().count(), c.dense_size() + 1);
}

#[test]
fn two_d_single_root_is_quadratic() {
    let g = Grid::two_d(64, 8).unwrap();
    let t = SupportSet::two_d(g, &[(20, 30)]).unwrap();
    let c = build_2d_certificate(&t, 8).unwrap();
    let p = t.positions()[0];
    let c2 = 0.17 / 8.0;
    // Least-squares slope of log q against log distance, along a diagonal.
    let pts: Vec<(f64, f64)> = (1..=10)
        .map(|i| {
            let d = c2 * i as f64 / 10.0;
            let q = c.eval_2d([p[0] + d * 0.6, p[1] + d * 0.8]).0;
            (d.ln(), q.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    println!("2D growth exponent {slope:.3}");
    assert!((slope - 2.0).abs() <= 0.1);
    assert!(c.dense_min() >= -NONNEG_TOL && c.dense_max() <= 1.0 + 1e-12);
}

#[test]
fn two_d_separated_subset() {
    let g = Grid::two_d(128, 8).unwrap();
    let t = SupportSet::two_d(g, &[(10, 10), (10, 60), (60, 10), (60, 60)]).unwrap();
    let c = build_2d_certificate(&t, 8).unwrap();
    for p in t.positions() {
        let (v, grad) = c.eval_2d(p);
        assert!(v.abs() <= ROOT_TOL);
        assert!(grad[0].abs().max(grad[1].abs()) <= ROOT_TOL * 2.0 * std::f64::consts::PI * 8.0);
    }
    assert!(c.dense_min() >= -NONNEG_TOL && c.dense_max() <= 1.0 + 1e-12);
    assert!(c.rho() > 0.0);
    println!("2D growth {:?}", c.growth());
}

#[test]
fn certified_bound_holds_end_to_end() {
    // 25 trials per r: small Poisson-shaped noise, random amplitudes.
    let cfg = SolverConfig::default();
    let mut checked = 0;
    for r in [1usize, 2] {
        for seed in 0..25u64 {
            let spec = TrialSpec {
                kind: OperatorKind::Flat1d,
                r,
                count: Some(12),
                noise_level: if seed % 5 == 0 { 0.0 } else { 1e-3 },
                seed: 1000 + seed,
                ..TrialSpec::default()
            };
            let out = run_trial(&spec, &cfg).unwrap();
            let b = certified_bound(&out, 0.5).unwrap();
            assert!(b.holds, "r={r} seed={seed}: error {} bound {}", b.error_l1, b.bound);
            checked += 1;
        }
    }
    assert_eq!(checked, 50);
}
