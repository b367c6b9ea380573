use superres_web::{certificate_view, converse_rows, recovery_view};

#[test]
fn certificate_vanishes_on_roots_and_stays_in_range() {
    let v = certificate_view(256, 16, &[20, 90, 170]).unwrap();
    assert!(v.rho > 0.0 && v.rho <= 0.5);
    assert_eq!(v.roots, vec![20, 90, 170]);
    let m = v.dense.len();
    assert_eq!(m % 256, 0);
    for &t in &v.roots {
        assert!(v.dense[t * m / 256].abs() <= 1e-8);
    }
    assert!(v.dense.iter().all(|&q| (-1e-9..=1.0 + 1e-9).contains(&q)));
}

#[test]
fn certificate_rejects_bad_support() {
    assert!(certificate_view(256, 16, &[300]).is_err());
}

#[test]
fn converse_ratio_grows_with_srf() {
    let rows = converse_rows(1, 8, &[4, 8, 16]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1].ratio > w[0].ratio));
    assert_eq!(rows[0].n, 4 * 17);
    for r in &rows {
        assert!((r.g_r - r.ratio / r.srf as f64).abs() <= 1e-12 * r.ratio);
    }
}

#[test]
fn noiseless_recovery_is_accurate() {
    let v = recovery_view(false, 128, 16, &[10, 60, 100], &[1.0, 2.0, 1.5], 0.0, 0, 3000).unwrap();
    assert!(v.error_l1 <= 1e-3 * 4.5, "{}", v.error_l1);
    assert_eq!(v.noise_l1, 0.0);
    assert_eq!(v.x_hat.len(), 128);
}

#[test]
fn noisy_recovery_reports_noise_level() {
    let v = recovery_view(true, 128, 16, &[10, 60], &[1.0, 1.0], 0.05, 3, 500).unwrap();
    assert!((v.noise_l1 - 0.05).abs() <= 1e-12);
    assert!(v.x_hat.iter().all(|&x| x >= 0.0));
    assert!(recovery_view(false, 128, 16, &[10], &[-1.0], 0.0, 0, 10).is_err());
}
