use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superres::rayleigh::RayleighParams;
use superres::solver::{
    effective_mu0, exhaustive_search_oracle, huber, huber_grad, huber_sum, mu0_from_data, smoothed_gradient,
    smoothed_objective, solve, SolverConfig,
};
use superres::{ForwardOperator, Grid, GridSignal, OperatorKind};

#[test]
fn huber_gradient_matches_finite_differences() {
    let mu = 0.37;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let t: f64 = rng.random_range(-2.0..2.0);
        if (t.abs() - mu).abs() < 1e-4 {
            continue;
        }
        let e = 1e-6;
        let fd = (huber(t + e, mu).unwrap() - huber(t - e, mu).unwrap()) / (2.0 * e);
        assert!((fd - huber_grad(t, mu).unwrap()).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn huber_continuity_at_mu() {
    for mu in [0.01, 0.5, 3.0] {
        assert!((huber(mu, mu).unwrap() - mu / 2.0).abs() < 1e-15);
        assert_eq!(huber(0.0, mu).unwrap(), 0.0);
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let g = Grid::one_d(32, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [OperatorKind::Flat1d, OperatorKind::Tri1d] {
        let op = ForwardOperator::new(kind, g).unwrap();
        let s = GridSignal::new(g, (0..32).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
        let x = GridSignal::new(g, (0..32).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mu = 0.2;
        let grad = smoothed_gradient(&op, &s, &x, mu).unwrap();
        for i in [0, 7, 19, 31] {
            let e = 1e-6;
            let mut xp = x.clone();
            xp.values_mut()[i] += e;
            let mut xm = x.clone();
            xm.values_mut()[i] -= e;
            let fd = (smoothed_objective(&op, &s, &xp, mu).unwrap() - smoothed_objective(&op, &s, &xm, mu).unwrap())
                / (2.0 * e);
            let an = grad.values()[i];
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{kind:?} i={i}: {fd} vs {an}");
        }
    }
}

#[test]
fn one_spike_noiseless_recovery() {
    let g = Grid::one_d(128, 32).unwrap();
    let op = ForwardOperator::flat(g).unwrap();
    let x = GridSignal::spikes(g, &[40], &[2.5]).unwrap();
    let s = op.apply(&x).unwrap();
    let res = solve(&op, &s, &SolverConfig::default()).unwrap();
    assert!(res.residual_l1 <= 1e-6 * s.l1_norm(), "residual {}", res.residual_l1);
    assert!(res.x_hat.sub(&x).unwrap().l1_norm() <= 1e-3 * x.l1_norm());
    assert!(res.x_hat.is_nonneg());
}

#[test]
fn zero_data_gives_zero() {
    let g = Grid::one_d(64, 8).unwrap();
    let op = ForwardOperator::triangular(g).unwrap();
    let res = solve(&op, &GridSignal::zeros(g), &SolverConfig::default()).unwrap();
    assert_eq!(res.x_hat.l1_norm(), 0.0);
    assert_eq!(res.mu0, 1e-12);
}

#[test]
fn stage_boundaries_do_not_increase_objective() {
    let g = Grid::one_d(128, 16).unwrap();
    let op = ForwardOperator::triangular(g).unwrap();
    let x = GridSignal::spikes(g, &[10, 50, 90], &[1.0, 2.0, 1.5]).unwrap();
    let s = superres::noise::poisson_noise_at_level(&op.apply(&x).unwrap(), 0.05, 0).unwrap().observed;
    let res = solve(&op, &s, &SolverConfig { final_iter: 2000, ..SolverConfig::default() }).unwrap();
    // Each stage starts from the previous endpoint and never ends above its
    // warm start; within a stage the logged objective never increases.
    for w in res.stages.windows(2) {
        let start = res.log.iter().find(|e| e.stage == w[1].stage && e.iter == 0).unwrap();
        assert!((start.residual - w[0].residual_l1).abs() <= 1e-9 * w[0].residual_l1);
    }
    for st in &res.stages {
        assert!(st.objective <= st.start_objective, "{st:?}");
        let trace: Vec<f64> = res.log.iter().filter(|e| e.stage == st.stage).map(|e| e.objective).collect();
        for p in trace.windows(2) {
            assert!(p[1] <= p[0] * (1.0 + 1e-12), "stage {}: {trace:?}", st.stage);
        }
    }
    let mut log = Vec::new();
    res.write_log(&mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["stage", "iter", "objective", "residual"] {
        assert!(first.get(key).is_some());
    }
    assert!(res.smoothing_gap() >= 0.0);
}

#[test]
fn solve_is_deterministic() {
    let g = Grid::one_d(64, 8).unwrap();
    let op = ForwardOperator::triangular(g).unwrap();
    let x = GridSignal::spikes(g, &[3, 30], &[1.0, 1.0]).unwrap();
    let s = superres::noise::poisson_noise_at_level(&op.apply(&x).unwrap(), 0.02, 4).unwrap().observed;
    let cfg = SolverConfig { final_iter: 500, ..SolverConfig::default() };
    let a = solve(&op, &s, &cfg).unwrap();
    let b = solve(&op, &s, &cfg).unwrap();
    assert_eq!(a.x_hat.values(), b.x_hat.values());
}

#[test]
fn mu0_matches_independent_sum_on_large_scene() {
    let preset = superres::experiments::ScenePreset::full();
    let scene = superres::experiments::figure4_scene(&preset, 0).unwrap();
    let op = ForwardOperator::new(scene.kind, scene.grid).unwrap();
    let s = superres::noise::add_poisson_noise(&op.apply(&scene.x).unwrap(), 1).unwrap().observed;
    let n = scene.grid.size() as f64;
    let mut direct = 0.0;
    for i in 0..scene.grid.size() {
        for j in 0..scene.grid.size() {
            direct += s.values()[i * scene.grid.size() + j].sqrt();
        }
    }
    direct *= 0.1 / (n * n);
    let mu0 = mu0_from_data(&s).unwrap();
    println!("large-scene mu0 = {mu0:.6e}");
    assert!((mu0 - direct).abs() <= 1e-12 * direct);
    assert_eq!(effective_mu0(&s, &SolverConfig::default()).unwrap(), mu0);
}

#[test]
fn invalid_config_is_rejected() {
    let bad = SolverConfig { inner_tol: -1.0, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    let parse: Result<SolverConfig, _> = serde_json::from_str(r#"{"final_iter": 10, "bogus": 1}"#);
    assert!(parse.is_err());
}

#[test]
fn oracle_returns_truth_in_noiseless_lattice_case() {
    let g = Grid::one_d(16, 4).unwrap();
    let op = ForwardOperator::flat(g).unwrap();
    let class = RayleighParams::new(3.74, 1, g).unwrap();
    let x = GridSignal::spikes(g, &[5], &[1.5]).unwrap();
    let s = op.apply(&x).unwrap();
    let lattice = [0.5, 1.0, 1.5, 2.0];
    let sol = exhaustive_search_oracle(&op, &s, &class, 1e-9, &lattice, 2).unwrap();
    assert!(sol.x_hat.sub(&x).unwrap().l1_norm() < 1e-12);
    assert!(sol.residual_l1 <= 1e-9);
    assert!(sol.feasible.iter().all(|(_, r)| *r <= 1e-9));
    // Infeasible when the lattice misses the amplitude and delta is tiny.
    assert!(exhaustive_search_oracle(&op, &s, &class, 1e-9, &[0.7], 1).is_err());
}

#[test]
fn oracle_rejects_large_instances() {
    let g = Grid::one_d(32, 4).unwrap();
    let op = ForwardOperator::flat(g).unwrap();
    let class = RayleighParams::new(3.74, 1, g).unwrap();
    assert!(exhaustive_search_oracle(&op, &GridSignal::zeros(g), &class, 1.0, &[1.0], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothing_gap_bound(v in proptest::collection::vec(-5.0f64..5.0, 1..64), mu in 0.01f64..2.0) {
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let h = huber_sum(&v, mu).unwrap();
        prop_assert!(l1 - h >= -1e-12);
        prop_assert!(l1 - h <= mu * v.len() as f64 / 2.0 + 1e-12);
    }

    #[test]
    fn iterates_stay_nonnegative(seed in 0u64..1000) {
        let g = Grid::one_d(32, 4).unwrap();
        let op = ForwardOperator::triangular(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = GridSignal::new(g, (0..32).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        let res = solve(&op, &s, &SolverConfig { final_iter: 100, ..SolverConfig::default() }).unwrap();
        prop_assert!(res.x_hat.is_nonneg());
    }
}
