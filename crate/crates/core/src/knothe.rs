//! Knothe–Rosenblatt rearrangement on 𝕋².
//!
//! `R¹` transports the `x1`-marginal of `f` onto that of `g`; for each `x1`,
//! `R²(x1, ·)` transports the conditional of `f` at `x1` onto the conditional
//! of `g` at `R¹(x1)`. The target conditional is taken from the closed form of
//! `g` at the exact real value `R¹(x1)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{derivative_1d, PeriodicGrid, ScalarField, VectorField};
use crate::monge_ampere::DensityPair;
use crate::transport1d::{monotone_circle_map, potential_from_map, wrapped, CircleDensity, CircleMap};
use crate::trig::TrigPoly2;

/// The `x1`-marginal and the conditionals `x2 ↦ f(x1, x2)/f¹(x1)`.
#[derive(Clone, Debug)]
pub struct Conditionals {
    density: TrigPoly2,
}

impl Conditionals {
    pub fn new(density: &TrigPoly2) -> Self {
        Self {
            density: density.clone(),
        }
    }

    pub fn marginal(&self, m: usize) -> Result<CircleDensity> {
        CircleDensity::from_poly(self.density.marginal_x1(), m)
    }

    /// Conditional density at `x1`, unit mass, sampled on `m` nodes.
    pub fn fiber(&self, x1: f64, m: usize) -> Result<CircleDensity> {
        // the slice's constant term is f¹(x1); from_poly divides it out
        CircleDensity::from_poly(self.density.slice_x2(x1), m)
    }
}

/// Marginal of `f` on the `x1` nodes of `grid` and its conditionals at those nodes.
pub fn marginal_and_conditionals(
    f: &TrigPoly2,
    grid: PeriodicGrid,
) -> Result<(CircleDensity, Vec<CircleDensity>)> {
    let c = Conditionals::new(f);
    let marginal = c.marginal(grid.n1())?;
    let fibers = (0..grid.n1())
        .map(|i| c.fiber(grid.x1(i), grid.n2()))
        .collect::<Result<Vec<_>>>()?;
    Ok((marginal, fibers))
}

/// Triangular map `R(x) = (R¹(x1), R²(x1, x2))`.
#[derive(Clone, Debug)]
pub struct KnotheMap {
    grid: PeriodicGrid,
    r1: CircleMap,
    r2: Vec<CircleMap>,
}

impl KnotheMap {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn r1(&self) -> &CircleMap {
        &self.r1
    }

    /// Fiber map at the `i`-th `x1` node.
    pub fn r2(&self, i: usize) -> &CircleMap {
        &self.r2[i]
    }

    /// Displacement fields `x − R(x)`.
    pub fn displacement(&self) -> VectorField {
        let g = self.grid;
        let d1 = g.broadcast_x1(self.r1.displacement());
        let mut v2 = Vec::with_capacity(g.len());
        for fiber in &self.r2 {
            v2.extend_from_slice(fiber.displacement());
        }
        VectorField {
            c1: d1,
            c2: ScalarField::from_values(g, v2).expect("sized by grid"),
        }
    }

    /// Image points `R(x)` (lifts, not wrapped into [0,1)).
    pub fn positions(&self) -> VectorField {
        let d = self.displacement();
        let g = self.grid;
        VectorField {
            c1: g.sample(|x, _| x).add_scaled(&d.c1, -1.0),
            c2: g.sample(|_, y| y).add_scaled(&d.c2, -1.0),
        }
    }
}

pub fn knothe_rearrangement(pair: &DensityPair) -> Result<KnotheMap> {
    let grid = pair.grid();
    let fc = Conditionals::new(pair.f_poly());
    let gc = Conditionals::new(pair.g_poly());
    let r1 = monotone_circle_map(&fc.marginal(grid.n1())?, &gc.marginal(grid.n1())?)?;
    let images = r1.lift_at_nodes();
    let r2 = (0..grid.n1())
        .into_par_iter()
        .map(|i| {
            let source = fc.fiber(grid.x1(i), grid.n2())?;
            let target = gc.fiber(images[i], grid.n2())?;
            monotone_circle_map(&source, &target)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnotheMap { grid, r1, r2 })
}

/// Largest 1D pushforward error over the marginal map and every fiber map,
/// Fourier moments up to `k_max`.
pub fn fiber_pushforward_error(map: &KnotheMap, k_max: u32) -> f64 {
    map.r2
        .par_iter()
        .map(|r| r.pushforward_error(k_max))
        .reduce(|| map.r1.pushforward_error(k_max), f64::max)
}

/// Kantorovich potentials of the Knothe map: `R = id − (∂1u¹, ∂2u²)`.
#[derive(Clone, Debug)]
pub struct KnothePotentials {
    /// Zero-mean function of `x1` on the `n1` nodes.
    pub u1: Vec<f64>,
    /// Fiberwise zero-mean in `x2`.
    pub u2: ScalarField,
}

impl KnothePotentials {
    pub fn grid(&self) -> PeriodicGrid {
        self.u2.grid()
    }

    /// `min 1 − ∂11u¹` over the `x1` nodes.
    pub fn min_one_minus_u1_11(&self) -> f64 {
        1.0 - derivative_1d(&self.u1, 2).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min 1 − ∂22u²` over the grid.
    pub fn min_one_minus_u2_22(&self) -> f64 {
        1.0 - self.u2.derivative(crate::grid::Axis::X2, 2).max()
    }

    /// Half the smaller of the two convexity margins; the default `ε` of the
    /// admissible neighbourhood.
    pub fn epsilon(&self) -> f64 {
        0.5 * self.min_one_minus_u1_11().min(self.min_one_minus_u2_22())
    }

    /// `u¹ + λ u²` as a grid field.
    pub fn combined(&self, lambda: f64) -> ScalarField {
        self.grid()
            .broadcast_x1(&self.u1)
            .add_scaled(&self.u2, lambda)
    }
}

pub fn potentials_from_map(map: &KnotheMap) -> Result<KnothePotentials> {
    let grid = map.grid;
    let u1 = potential_from_map(&map.r1);
    let rows: Vec<Vec<f64>> = map.r2.par_iter().map(potential_from_map).collect();
    let u2 = ScalarField::from_values(grid, rows.concat())?;
    let p = KnothePotentials { u1, u2 };
    let (a, b) = (p.min_one_minus_u1_11(), p.min_one_minus_u2_22());
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::Internal(format!(
            "Knothe potentials not convex: min(1 − ∂11u¹) = {a:.3e}, min(1 − ∂22u²) = {b:.3e}"
        )));
    }
    Ok(p)
}

pub fn knothe_potentials(pair: &DensityPair) -> Result<KnothePotentials> {
    potentials_from_map(&knothe_rearrangement(pair)?)
}

/// `(∫ d_𝕋²(T(x), R(x))² f(x) dx)^{1/2}` with per-coordinate wrapped distances.
pub fn l2_map_distance(t: &VectorField, r: &VectorField, f: &ScalarField) -> f64 {
    let n = f.grid().len();
    let mut acc = 0.0;
    for k in 0..n {
        let a = wrapped(t.c1.values()[k] - r.c1.values()[k]);
        let b = wrapped(t.c2.values()[k] - r.c2.values()[k]);
        acc += (a * a + b * b) * f.values()[k];
    }
    (acc / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monge_ampere::pushforward_residual;
    use crate::trig::{CircleMode, CosineMode, TrigPoly1};
    use std::f64::consts::TAU;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::square(n).unwrap()
    }

    #[test]
    fn uniform_marginals_and_fibers() {
        let (m, fibers) = marginal_and_conditionals(&TrigPoly2::constant(1.0), grid(16)).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
        assert!(fibers.iter().all(|d| d.values().iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn product_density_separates() {
        let a = TrigPoly1::new(1.0, [CircleMode::new(1, 0.3, 0.0)]);
        let b = TrigPoly1::new(1.0, [CircleMode::new(2, 0.2, 0.5)]);
        let f = TrigPoly2::product(&a, &b);
        let (m, fibers) = marginal_and_conditionals(&f, grid(16)).unwrap();
        for i in 0..16 {
            let x = i as f64 / 16.0;
            assert!((m.values()[i] - a.eval(x)).abs() < 1e-14);
            for j in 0..16 {
                assert!((fibers[i].values()[j] - b.eval(j as f64 / 16.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_diagonal_mode_integrates_out() {
        let f = TrigPoly2::new(1.0, [CosineMode::new(1, 1, 0.3, 0.0)]);
        let (m, fibers) = marginal_and_conditionals(&f, grid(16)).unwrap();
        assert!(m.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let x1 = 3.0 / 16.0;
        for j in 0..16 {
            let x2 = j as f64 / 16.0;
            let want = 1.0 + 0.3 * (TAU * (x1 + x2)).cos();
            assert!((fibers[3].values()[j] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_densities_give_identity() {
        let f = TrigPoly2::normalized_density([CosineMode::new(1, 1, 0.2, 0.1)]);
        let pair = DensityPair::new(grid(32), f.clone(), f).unwrap();
        let p = knothe_potentials(&pair).unwrap();
        assert!(p.u1.iter().all(|v| v.abs() < 1e-13));
        assert!(p.u2.sup_norm() < 1e-13);
    }

    #[test]
    fn product_case_has_x1_independent_fibers() {
        let g = TrigPoly2::product(
            &TrigPoly1::new(1.0, [CircleMode::new(1, 0.25, 0.0)]),
            &TrigPoly1::new(1.0, [CircleMode::new(1, 0.2, 0.3)]),
        );
        let f = TrigPoly2::product(
            &TrigPoly1::new(1.0, [CircleMode::new(1, 0.1, 1.0)]),
            &TrigPoly1::new(1.0, [CircleMode::new(2, 0.15, 0.0)]),
        );
        let pair = DensityPair::new(grid(32), f, g).unwrap();
        let p = knothe_potentials(&pair).unwrap();
        for i in 1..32 {
            for j in 0..32 {
                assert!((p.u2.at(i, j) - p.u2.at(0, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn potentials_recover_map() {
        let f = TrigPoly2::normalized_density([
            CosineMode::new(1, 0, 0.3, 0.0),
            CosineMode::new(1, 1, 0.15, 0.0),
        ]);
        let g = TrigPoly2::normalized_density([
            CosineMode::new(0, 1, 0.25, 0.0),
            CosineMode::new(1, 1, 0.05, 0.0),
            CosineMode::new(1, -1, 0.05, 0.0),
        ]);
        let pair = DensityPair::new(grid(64), f, g).unwrap();
        let map = knothe_rearrangement(&pair).unwrap();
        let p = potentials_from_map(&map).unwrap();
        let d = map.displacement();
        let du1 = derivative_1d(&p.u1, 1);
        let du2 = p.u2.derivative(crate::grid::Axis::X2, 1);
        for i in 0..64 {
            assert!((du1[i] - d.c1.at(i, 0)).abs() < 1e-9);
            for j in 0..64 {
                assert!((du2.at(i, j) - d.c2.at(i, j)).abs() < 1e-9);
            }
        }
        assert!(p.epsilon() > 0.0);
    }

    #[test]
    fn knothe_map_pushes_f_to_g() {
        let f = TrigPoly2::constant(1.0);
        let g = TrigPoly2::product(
            &TrigPoly1::new(1.0, [CircleMode::new(1, 0.25, 0.0)]),
            &TrigPoly1::new(1.0, [CircleMode::new(1, 0.25, 0.0)]),
        );
        let pair = DensityPair::new(grid(128), f, g).unwrap();
        let r = knothe_rearrangement(&pair).unwrap().positions();
        assert!(pushforward_residual(&r, &pair, 4) <= 1e-6);
    }

    #[test]
    fn distance_examples() {
        let g = grid(16);
        let f = g.sample(|_, _| 1.0);
        let r = VectorField {
            c1: g.sample(|x, _| x + 0.1 * (TAU * x).sin()),
            c2: g.sample(|_, y| y),
        };
        assert_eq!(l2_map_distance(&r, &r, &f), 0.0);
        let shifted = VectorField {
            c1: r.c1.clone(),
            c2: r.c2.map(|v| v + 0.5),
        };
        assert!((l2_map_distance(&shifted, &r, &f) - 0.5).abs() < 1e-15);
    }
}
