//! Circle transport against brute-force oracles.

mod common;

use proptest::prelude::*;
use tot::transport1d::{monotone_circle_map, potential_from_map, CircleDensity, MonotoneFamily};
use tot::trig::{CircleMode, TrigPoly1};

use common::{oracle_circle_map, CdfOracle};

fn poly(modes: &[(i32, f64, f64)]) -> TrigPoly1 {
    TrigPoly1::new(1.0, modes.iter().map(|&(k, a, p)| CircleMode::new(k, a, p)))
}

/// Up to three modes with total amplitude ≤ 0.6, so the density stays ≥ 0.4.
fn density_modes() -> impl Strategy<Value = Vec<(i32, f64, f64)>> {
    prop::collection::vec((1..=4i32, -0.2..0.2f64, 0.0..std::f64::consts::TAU), 1..=3)
}

#[test]
fn cdf_of_sampled_bimodal_density_matches_cumulative_sums() {
    let m = 64;
    let samples: Vec<f64> = (0..m)
        .map(|i| {
            let x = i as f64 / m as f64;
            let bump = |c: f64| (2.0 * (std::f64::consts::TAU * (x - c)).cos()).exp();
            0.2 + bump(0.25) + 0.6 * bump(0.7)
        })
        .collect();
    let d = CircleDensity::from_samples(&samples).unwrap();
    // Richardson-refined trapezoid sums of the same interpolant at 2¹⁴ and 2¹³ cells
    let cumulative = |cells: usize, x: f64| {
        let h = x / cells as f64;
        let inner: f64 = (1..cells).map(|j| d.eval(j as f64 * h)).sum();
        h * (0.5 * (d.eval(0.0) + d.eval(x)) + inner)
    };
    let mut worst: f64 = 0.0;
    for x in [0.05, 0.2, 0.31, 0.5, 0.77, 0.93] {
        let oracle = (4.0 * cumulative(1 << 14, x) - cumulative(1 << 13, x)) / 3.0;
        worst = worst.max((d.cdf(x) - oracle).abs());
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn map_matches_oracle_on_fixed_pair() {
    let fp = poly(&[(1, 0.3, 0.4), (3, 0.1, 1.0)]);
    let gp = poly(&[(1, -0.25, 0.0), (2, 0.15, 2.0)]);
    let m = 256;
    let map = monotone_circle_map(
        &CircleDensity::from_poly(fp.clone(), m).unwrap(),
        &CircleDensity::from_poly(gp.clone(), m).unwrap(),
    )
    .unwrap();
    let fo = CdfOracle::new(|x| fp.eval(x));
    let go = CdfOracle::new(|x| gp.eval(x));
    let (theta, lift) = oracle_circle_map(&fo, &go, m);
    assert!((map.theta() - theta).abs() < 1e-10, "{} vs {theta}", map.theta());
    let worst = map
        .lift_at_nodes()
        .iter()
        .enumerate()
        .map(|(i, t)| (t - lift(i as f64 / m as f64)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn symmetric_target_has_zero_shift() {
    let m = 256;
    let gp = poly(&[(1, 0.2, 0.0)]);
    let map = monotone_circle_map(&CircleDensity::uniform(m), &CircleDensity::from_poly(gp, m).unwrap()).unwrap();
    assert!(map.theta().abs() < 1e-12);
    // ψ′(0) = 0 by symmetry
    assert!(map.displacement()[0].abs() < 1e-12);
    let psi = potential_from_map(&map);
    assert!(psi.iter().sum::<f64>().abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn quantiles_are_pushed_forward(fm in density_modes(), gm in density_modes()) {
        let m = 128;
        let f = CircleDensity::from_poly(poly(&fm), m).unwrap();
        let g = CircleDensity::from_poly(poly(&gm), m).unwrap();
        let map = monotone_circle_map(&f, &g).unwrap();
        for k in 0..256 {
            let u = (k as f64 + 0.5) / 256.0;
            let x = f.inverse_cdf(u, u);
            let err = (g.cdf(map.eval(x)) - (u + map.theta())).abs();
            prop_assert!(err < 1e-10, "u = {u}: {err}");
        }
    }

    #[test]
    fn lift_is_monotone_with_zero_mean_displacement(fm in density_modes(), gm in density_modes()) {
        let m = 256;
        let f = CircleDensity::from_poly(poly(&fm), m).unwrap();
        let g = CircleDensity::from_poly(poly(&gm), m).unwrap();
        let map = monotone_circle_map(&f, &g).unwrap();
        let lifts = map.lift_at_nodes();
        prop_assert!(lifts.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(lifts[0] + 1.0 > lifts[m - 1]);
        prop_assert!(map.mean_displacement().abs() < 1e-12);
    }

    #[test]
    fn selected_shift_is_never_beaten_by_a_scan(fm in density_modes(), gm in density_modes()) {
        let m = 256;
        let f = CircleDensity::from_poly(poly(&fm), m).unwrap();
        let g = CircleDensity::from_poly(poly(&gm), m).unwrap();
        let map = monotone_circle_map(&f, &g).unwrap();
        let family = MonotoneFamily { source: &f, target: &g };
        let best = family.cost(map.theta(), m);
        for s in -500..=500 {
            let theta = map.theta() + s as f64 * 1e-3;
            prop_assert!(best <= family.cost(theta, m) + 1e-8, "θ = {theta}");
        }
    }

    #[test]
    fn map_agrees_with_bisection_oracle(fm in density_modes(), gm in density_modes()) {
        let m = 256;
        let fp = poly(&fm);
        let gp = poly(&gm);
        let map = monotone_circle_map(
            &CircleDensity::from_poly(fp.clone(), m).unwrap(),
            &CircleDensity::from_poly(gp.clone(), m).unwrap(),
        )
        .unwrap();
        let fo = CdfOracle::new(|x| fp.eval(x));
        let go = CdfOracle::new(|x| gp.eval(x));
        let (_, lift) = oracle_circle_map(&fo, &go, m);
        for (i, t) in map.lift_at_nodes().iter().enumerate().step_by(8) {
            let err = (t - lift(i as f64 / m as f64)).abs();
            prop_assert!(err < 1e-8, "node {i}: {err}");
        }
    }
}
