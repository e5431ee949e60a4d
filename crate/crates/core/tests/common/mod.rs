#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tot::config::{load_config, RunConfig};
use tot::{DensityPair, PeriodicGrid, ScalarField};

pub fn config_path(name: &str) -> String {
    format!("{}/examples/data/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

pub fn config(name: &str) -> RunConfig {
    load_config(config_path(name)).expect("shipped config loads")
}

pub fn pair(name: &str, n: usize) -> DensityPair {
    let cfg = config(name);
    DensityPair::new(PeriodicGrid::square(n).unwrap(), cfg.f.poly(), cfg.g.poly()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero-mean random trigonometric field with modes `|k|∞ ≤ kmax` and
/// coefficients decaying like `1/(1 + |k|²)`, scaled to sup norm `amp`.
pub fn smooth_field(grid: PeriodicGrid, rng: &mut impl Rng, kmax: i32, amp: f64) -> ScalarField {
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let w = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            modes.push((k1 as f64, k2 as f64, w * rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU)));
        }
    }
    let f = grid.sample(|x, y| {
        modes
            .iter()
            .map(|(k1, k2, a, p)| a * (TAU * (k1 * x + k2 * y) + p).cos())
            .sum()
    });
    let s = f.sup_norm();
    f.scale(amp / s).project_zero_mean()
}

/// Lifted cumulative distribution of a positive periodic density given in
/// closed form: composite Simpson on 2¹⁴ cells plus one partial panel,
/// inverted by bisection. Independent of the library's primitives.
pub struct CdfOracle<F: Fn(f64) -> f64> {
    density: F,
    table: Vec<f64>,
    mass: f64,
}

const ORACLE_CELLS: usize = 1 << 14;

impl<F: Fn(f64) -> f64> CdfOracle<F> {
    pub fn new(density: F) -> Self {
        let h = 1.0 / ORACLE_CELLS as f64;
        let mut table = Vec::with_capacity(ORACLE_CELLS + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for j in 0..ORACLE_CELLS {
            let a = j as f64 * h;
            acc += h / 6.0 * (density(a) + 4.0 * density(a + 0.5 * h) + density(a + h));
            table.push(acc);
        }
        let mass = acc;
        Self { density, table, mass }
    }

    /// Unit-mass density value.
    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x) / self.mass
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = x.floor();
        let r = x - k;
        let h = 1.0 / ORACLE_CELLS as f64;
        let j = ((r / h) as usize).min(ORACLE_CELLS - 1);
        let a = j as f64 * h;
        let b = r;
        let part = (b - a) / 6.0 * ((self.density)(a) + 4.0 * (self.density)(0.5 * (a + b)) + (self.density)(b));
        k + (self.table[j] + part) / self.mass
    }

    pub fn inverse(&self, u: f64) -> f64 {
        // the cdf is within 1 of the identity, so [u − 1, u + 1] brackets
        let (mut lo, mut hi) = (u - 1.0, u + 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Monotone circle map `G⁻¹(F + θ)` with `θ` fixed by zero mean displacement
/// over `q` nodes, found by bisection. Returns `θ` and the lift evaluator.
pub fn oracle_circle_map<'a, F1, F2>(
    f: &'a CdfOracle<F1>,
    g: &'a CdfOracle<F2>,
    q: usize,
) -> (f64, impl Fn(f64) -> f64 + 'a)
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let lift = move |theta: f64, x: f64| g.inverse(f.cdf(x) + theta);
    let mean = |theta: f64| {
        (0..q)
            .map(|i| {
                let x = i as f64 / q as f64;
                x - lift(theta, x)
            })
            .sum::<f64>()
            / q as f64
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    (theta, move |x| lift(theta, x))
}

/// Zero-mean potential `u` with `u′ = x − T̃(x)` on `n` nodes, from the
/// oracle map, integrated spectrally.
pub fn oracle_potential(n: usize, lift: impl Fn(f64) -> f64) -> Vec<f64> {
    let disp: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            x - lift(x)
        })
        .collect();
    tot::grid::primitive_1d(&disp)
}
