//! Residuals and pushforward certification against closed-form solutions.

mod common;

use proptest::prelude::*;
use tot::knothe_potentials;
use tot::{
    c_concavity_margin, pushforward_residual, residual_f, residual_g, transport_map, CosineMode,
    CostMatrix, CostSchedule, DensityPair, PeriodicGrid, TrigPoly2,
};

use common::{oracle_circle_map, oracle_potential, pair, rng, smooth_field, CdfOracle};

fn cos(k: f64, x: f64, phase: f64) -> f64 {
    (std::f64::consts::TAU * k * x + phase).cos()
}

#[test]
fn separable_solution_from_one_dimensional_oracles() {
    let n = 128;
    let p = pair("product_pair", n);
    // factors of the shipped product pair
    let f1 = CdfOracle::new(|x| 1.0 + 0.3 * cos(1.0, x, 0.0));
    let f2 = CdfOracle::new(|x| 1.0 + 0.2 * cos(1.0, x, 0.5));
    let g1 = CdfOracle::new(|y| 1.0 + 0.2 * cos(1.0, y, 1.0));
    let g2 = CdfOracle::new(|y| 1.0 + 0.25 * cos(1.0, y, 0.0));
    let (_, r1) = oracle_circle_map(&f1, &g1, n);
    let (_, r2) = oracle_circle_map(&f2, &g2, n);
    let u1 = oracle_potential(n, r1);
    let u2 = oracle_potential(n, r2);
    let grid = p.grid();
    let u2_field = grid.sample(|_, y| u2[(y * n as f64).round() as usize % n]);
    let schedule = CostSchedule::Linear;
    for t in [1e-3, 0.1, 1.0] {
        let a = schedule.matrix(t);
        let psi = grid.broadcast_x1(&u1).add_scaled(&u2_field, a.a22);
        let r = residual_f(&a, &psi, &p).unwrap().sup_norm();
        assert!(r < 1e-8, "t = {t}: {r}");
    }
}

#[test]
fn knothe_potentials_solve_the_degenerate_equation() {
    let p = pair("standard_pair", 128);
    let k = knothe_potentials(&p).unwrap();
    let eps = k.epsilon();
    let schedule = CostSchedule::Linear;
    let g0 = residual_g(0.0, &k.u1, &k.u2, &p, &schedule, eps).unwrap();
    assert!(g0.sup_norm() < 1e-8, "{}", g0.sup_norm());
    let g1 = residual_g(1e-4, &k.u1, &k.u2, &p, &schedule, eps).unwrap();
    let jump = g1.add_scaled(&g0, -1.0).sup_norm();
    assert!(jump < 1e-3, "{jump}");
    let g2 = residual_g(2e-4, &k.u1, &k.u2, &p, &schedule, eps).unwrap();
    let jump2 = g2.add_scaled(&g0, -1.0).sup_norm();
    // first order in λ
    assert!((jump2 / jump - 2.0).abs() < 0.05, "{jump} {jump2}");
}

#[test]
fn split_and_plain_residuals_agree() {
    let p = pair("standard_pair", 64);
    let k = knothe_potentials(&p).unwrap();
    let schedule = CostSchedule::Linear;
    for t in [1.0, 0.1, 1e-3] {
        let a = schedule.matrix(t);
        let g = residual_g(t, &k.u1, &k.u2, &p, &schedule, 0.0).unwrap();
        let f = residual_f(&a, &k.combined(a.a22), &p).unwrap();
        let d = g.add_scaled(&f, -1.0).sup_norm();
        // the plain form divides ∂2ψ by λ and loses that much to round-off
        assert!(d < 1e-12 / a.a22, "t = {t}: {d}");
    }
}

#[test]
fn one_dimensional_densities_push_forward() {
    let n = 128;
    let f = TrigPoly2::normalized_density([CosineMode::new(1, 0, 0.3, 0.2), CosineMode::new(2, 0, 0.1, 0.0)]);
    let g = TrigPoly2::normalized_density([CosineMode::new(1, 0, -0.25, 1.0)]);
    let p = DensityPair::new(PeriodicGrid::square(n).unwrap(), f.clone(), g.clone()).unwrap();
    let fo = CdfOracle::new(|x| f.eval(x, 0.0));
    let go = CdfOracle::new(|y| g.eval(y, 0.0));
    let (_, lift) = oracle_circle_map(&fo, &go, n);
    let psi = p.grid().broadcast_x1(&oracle_potential(n, lift));
    let map = transport_map(&CostMatrix::identity(), &psi).unwrap();
    let r = pushforward_residual(&map, &p, 4);
    assert!(r < 1e-8, "{r}");
}

#[test]
fn measure_changing_maps_are_detected() {
    let grid = PeriodicGrid::square(64).unwrap();
    let p = DensityPair::new(grid, TrigPoly2::constant(1.0), TrigPoly2::constant(1.0)).unwrap();
    let mut r = rng(7);
    for _ in 0..5 {
        let u = smooth_field(grid, &mut r, 3, 0.005);
        let map = transport_map(&CostMatrix::identity(), &u).unwrap();
        assert!(pushforward_residual(&map, &p, 4) > 1e-6);
    }
}

#[test]
fn damping_restores_the_margin() {
    let grid = PeriodicGrid::square(64).unwrap();
    let a = CostMatrix::identity();
    let mut r = rng(11);
    let u = smooth_field(grid, &mut r, 3, 0.2);
    assert!(c_concavity_margin(&a, &u) < 0.0);
    let mut prev = c_concavity_margin(&a, &u.scale(1e-3));
    assert!(prev > 0.0);
    for k in 2..=1000 {
        let m = c_concavity_margin(&a, &u.scale(k as f64 * 1e-3));
        assert!((m - prev).abs() < 0.05, "jump at s = {}", k as f64 * 1e-3);
        prev = m;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn residual_has_zero_mean(seed in any::<u64>(), t in 0.05..1.0f64) {
        let p = pair("standard_pair", 64);
        let a = CostSchedule::Linear.matrix(t);
        let mut r = rng(seed);
        let u = smooth_field(p.grid(), &mut r, 3, 1.0);
        let u = u.scale(0.3 * a.a22 / 1.0f64.max(u.sup_norm() * 4.0 * std::f64::consts::PI.powi(2) * 9.0));
        prop_assume!(c_concavity_margin(&a, &u) > 0.0);
        let res = residual_f(&a, &u, &p).unwrap();
        prop_assert!(res.mean().abs() < 1e-10, "{}", res.mean());
    }
}
