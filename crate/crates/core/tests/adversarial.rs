use superres::adversarial::{
    binomial, compute_cr, empirical_naf, finite_difference, make_adversarial_pair, mc_lower_bound, pushforward_l1,
    pushforward_l1_direct, RecoveryRun, CR_REFERENCE,
};
use superres::spectral::fejer_kernel;
use superres::{ForwardOperator, Grid};

#[test]
fn pair_examples() {
    let g = Grid::one_d(64, 4).unwrap();
    let p1 = make_adversarial_pair(&g, 1).unwrap();
    assert_eq!(p1.x.values()[0], 0.5);
    assert_eq!(p1.x_tilde.values()[1], 0.5);
    assert!((p1.h.l1_norm() - 1.0).abs() < 1e-12);
    let p2 = make_adversarial_pair(&g, 2).unwrap();
    assert_eq!(p2.x.values()[0], 1.0 / 8.0);
    assert_eq!(p2.x.values()[2], 3.0 / 8.0);
    for r in 1..=5 {
        let p = make_adversarial_pair(&g, r).unwrap();
        assert_eq!(p.x.support().len(), r);
        assert_eq!(p.x_tilde.support().len(), r);
        assert!(p.x.is_nonneg() && p.x_tilde.is_nonneg());
        assert!((p.h.l1_norm() - 1.0).abs() < 1e-12);
        let total: f64 = (0..2 * r).map(|l| binomial(2 * r - 1, l)).sum::<f64>() / 2f64.powi(2 * r as i32 - 1);
        assert!((total - 1.0).abs() < 1e-15);
    }
    assert!(make_adversarial_pair(&Grid::one_d(8, 1).unwrap(), 5).is_err());
}

#[test]
fn pushforward_matches_direct_sum() {
    for (n, fc, r) in [(1024, 31, 1), (1024, 31, 2), (2048, 63, 3)] {
        let g = Grid::one_d(n, fc).unwrap();
        let op = ForwardOperator::triangular(g).unwrap();
        let p = make_adversarial_pair(&g, r).unwrap();
        let a = pushforward_l1(&op, &p).unwrap();
        let b = pushforward_l1_direct(&g, r).unwrap();
        assert!((a - b).abs() <= 1e-10 * b, "r={r}: {a} vs {b}");
    }
    // Independent summation of the finite-difference formula for r = 1.
    let g = Grid::one_d(1024, 31).unwrap();
    let order = 1;
    let direct: f64 = (0..1024)
        .map(|m| {
            let t = (m as f64 - order as f64) / 1024.0;
            let d = finite_difference(|s| fejer_kernel(s, 31, 1024), t, 1.0 / 1024.0, order).unwrap();
            (d / 2f64.powi(order as i32)).abs()
        })
        .sum();
    let ours = pushforward_l1(&ForwardOperator::triangular(g).unwrap(), &make_adversarial_pair(&g, 1).unwrap()).unwrap();
    assert!((direct - ours).abs() <= 1e-10 * ours);
}

#[test]
fn pushforward_is_linear_and_translation_invariant() {
    let g = Grid::one_d(512, 15).unwrap();
    let op = ForwardOperator::triangular(g).unwrap();
    let p = make_adversarial_pair(&g, 2).unwrap();
    let base = pushforward_l1(&op, &p).unwrap();
    assert!((pushforward_l1(&op, &p.scaled(3.5)).unwrap() - 3.5 * base).abs() <= 1e-12 * base);
    for s in [1, 17, 300] {
        assert!((pushforward_l1(&op, &p.shifted(s)).unwrap() - base).abs() <= 1e-12 * base);
    }
}

#[test]
fn finite_difference_examples() {
    assert!((finite_difference(|t| t, 0.3, 0.01, 1).unwrap() - 0.01).abs() < 1e-15);
    assert!(finite_difference(|t| 3.0 * t - 2.0, 0.7, 0.1, 2).unwrap().abs() < 1e-14);
    let two_pi = 2.0 * std::f64::consts::PI;
    // Delta^k g / delta^k against the k-th derivative, delta = 1e-5.
    let d = 1e-5;
    for t in [0.1, 0.37] {
        let exact = [-two_pi * (two_pi * t).sin(), -two_pi * two_pi * (two_pi * t).cos()];
        for (k, e) in exact.iter().enumerate() {
            let fd = finite_difference(|s| (two_pi * s).cos(), t, d, k + 1).unwrap() / d.powi(k as i32 + 1);
            assert!((fd - e).abs() <= 1e-3 * e.abs().max(1.0), "order {}: {fd} vs {e}", k + 1);
        }
    }
    assert!(finite_difference(|t| t, 0.0, 0.1, 0).is_err());
    assert!(finite_difference(|t| t, 0.0, -0.1, 1).is_err());
}

#[test]
fn cr_reference_values() {
    for r in [1, 5] {
        let c = compute_cr(r).unwrap();
        println!("c_{r} = {c:.5}");
        assert!(c >= CR_REFERENCE[r - 1] - 0.02);
    }
    assert!(compute_cr(0).is_err());
    assert!(compute_cr(6).is_err());
}

#[test]
fn ratio_converges_to_c1() {
    // g_1 = SRF / ratio tends to c_1 as N grows at SRF 16.
    let c1 = compute_cr(1).unwrap();
    for n in [1024usize, 4096, 16384] {
        let fc = (n / 16 - 1) / 2;
        let est = mc_lower_bound(&Grid::one_d(n, fc).unwrap(), 1).unwrap();
        println!("N {n}: g_1 {:.4}", est.g_r);
        assert!((est.g_r - c1).abs() <= 0.15 * c1);
        assert!(est.ratio >= 1.0);
    }
}

#[test]
fn slope_one_for_r1() {
    let n = 4096;
    let pts: Vec<(f64, f64)> = [8usize, 16, 32, 64]
        .iter()
        .map(|&srf| {
            let fc = (n / srf - 1) / 2;
            let est = mc_lower_bound(&Grid::one_d(n, fc).unwrap(), 1).unwrap();
            (est.srf.ln(), est.ratio.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn naf_examples() {
    let exact = empirical_naf(&[RecoveryRun { error_l1: 0.0, noise_l1: 0.0 }], 0.0).unwrap();
    assert_eq!(exact.naf, None);
    let e = empirical_naf(
        &[RecoveryRun { error_l1: 0.2, noise_l1: 0.01 }, RecoveryRun { error_l1: 0.5, noise_l1: 0.02 }],
        0.02,
    )
    .unwrap();
    assert!((e.naf.unwrap() - 25.0).abs() < 1e-12);
    assert!(empirical_naf(&[], 1.0).is_err());
    assert!(empirical_naf(&[RecoveryRun { error_l1: 0.0, noise_l1: 2.0 }], 1.0).is_err());
}
