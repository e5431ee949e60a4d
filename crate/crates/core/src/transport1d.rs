//! Exact quadratic-cost optimal transport on the circle 𝕋¹.
//!
//! For positive densities `f`, `g` with primitives `F`, `G` (lifted to ℝ so
//! that `G(y + 1) = G(y) + 1`), every monotone lift `T̃_θ = G⁻¹(F + θ)` pushes
//! `f` to `g`. The shift `θ*` is selected by requiring the displacement
//! `x − T̃(x)` to have zero mean, which is exactly what makes the map the
//! gradient form `T = id − ψ′` of a periodic potential `ψ`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::primitive_1d;
use crate::trig::TrigPoly1;

/// Quadrature nodes used for the mean-displacement condition.
const MIN_QUADRATURE: usize = 256;
const SHIFT_TOL: f64 = 1e-13;
const INVERSE_TOL: f64 = 1e-13;

/// Positive unit-mass density on the circle, sampled at `i/m`.
#[derive(Clone, Debug)]
pub struct CircleDensity {
    values: Vec<f64>,
    poly: TrigPoly1,
}

impl CircleDensity {
    /// Closed-form density, renormalized to unit mass and sampled on `m` nodes.
    pub fn from_poly(poly: TrigPoly1, m: usize) -> Result<Self> {
        if poly.constant() <= 0.0 {
            return Err(Error::NotPositive {
                min: poly.constant(),
                floor: 0.0,
            });
        }
        let poly = poly.scaled(1.0 / poly.constant());
        let min = poly.sampled_min(4 * m.max(MIN_QUADRATURE));
        if min <= 0.0 {
            return Err(Error::NotPositive { min, floor: 0.0 });
        }
        let values = (0..m).map(|i| poly.eval(i as f64 / m as f64)).collect();
        Ok(Self { values, poly })
    }

    /// Density known only through samples; its trigonometric interpolant is used.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::NotPositive { min, floor: 0.0 });
        }
        Self::from_poly(TrigPoly1::interpolate(values), values.len())
    }

    pub fn uniform(m: usize) -> Self {
        Self::from_poly(TrigPoly1::new(1.0, []), m).expect("uniform density is positive")
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn poly(&self) -> &TrigPoly1 {
        &self.poly
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    /// Lifted cumulative distribution `∫₀ˣ d`, with `cdf(x + 1) = cdf(x) + 1`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.poly.primitive(x)
    }

    /// Solve `cdf(x) = y` by safeguarded Newton; `guess` seeds the iteration.
    pub fn inverse_cdf(&self, y: f64, guess: f64) -> f64 {
        // |cdf(x) − x| ≤ 1, so [y − 1, y + 1] brackets the root
        let (mut lo, mut hi) = (y - 1.0, y + 1.0);
        let mut x = if guess > lo && guess < hi { guess } else { y };
        for _ in 0..200 {
            let r = self.cdf(x) - y;
            if r == 0.0 {
                return x;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = r / self.eval(x);
            let mut next = x - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= INVERSE_TOL * 1e-2 * x.abs().max(1.0) || hi - lo < 1e-16 {
                return next;
            }
            x = next;
        }
        x
    }
}

/// The lifted cumulative distribution of `d` (exact primitive of its closed form).
pub fn cdf(d: &CircleDensity) -> impl Fn(f64) -> f64 + '_ {
    move |x| d.cdf(x)
}

/// All monotone lifts `T̃_θ = G⁻¹(F + θ)` between two densities.
#[derive(Clone, Debug)]
pub struct MonotoneFamily<'a> {
    pub source: &'a CircleDensity,
    pub target: &'a CircleDensity,
}

impl MonotoneFamily<'_> {
    pub fn lift(&self, theta: f64, x: f64) -> f64 {
        let y = self.source.cdf(x) + theta;
        self.target.inverse_cdf(y, x + theta)
    }

    /// `∫₀¹ (x − T̃_θ(x)) dx` on `q` trapezoid nodes; strictly decreasing in θ.
    pub fn mean_displacement(&self, theta: f64, q: usize) -> f64 {
        (0..q)
            .map(|i| {
                let x = i as f64 / q as f64;
                x - self.lift(theta, x)
            })
            .sum::<f64>()
            / q as f64
    }

    /// `½∫ d_𝕋(x, T̃_θ(x))² f(x) dx` on `q` nodes.
    pub fn cost(&self, theta: f64, q: usize) -> f64 {
        (0..q)
            .map(|i| {
                let x = i as f64 / q as f64;
                let d = wrapped(x - self.lift(theta, x));
                0.5 * d * d * self.source.eval(x)
            })
            .sum::<f64>()
            / q as f64
    }

    fn displacements(&self, theta: f64, nodes: usize, warm: &mut [f64]) -> f64 {
        let mut acc = 0.0;
        for (i, w) in warm.iter_mut().enumerate() {
            let x = i as f64 / nodes as f64;
            let y = self.source.cdf(x) + theta;
            let t = self.target.inverse_cdf(y, *w);
            *w = t;
            acc += x - t;
        }
        acc / nodes as f64
    }

    /// The shift `θ*` with zero mean displacement.
    pub fn optimal_shift(&self, q: usize) -> f64 {
        // m(−1) > 0 > m(1); safeguarded Newton inside a shrinking bracket
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let mut warm: Vec<f64> = (0..q).map(|i| i as f64 / q as f64).collect();
        let mut theta = 0.0;
        for _ in 0..200 {
            let m = self.displacements(theta, q, &mut warm);
            if m == 0.0 {
                return theta;
            }
            if m > 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            // m′(θ) = −∫ 1/g(T̃_θ)
            let slope = -warm.iter().map(|&t| 1.0 / self.target.eval(t)).sum::<f64>() / q as f64;
            let mut next = theta - m / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - theta).abs() < SHIFT_TOL * 1e-2 || hi - lo < SHIFT_TOL;
            theta = next;
            if done {
                break;
            }
        }
        theta
    }
}

/// Distance to the nearest integer translate: `min_k |a − k|`, signed.
#[inline]
pub fn wrapped(a: f64) -> f64 {
    a - a.round()
}

/// Monotone circle map, stored as nodal displacements `x_i − T̃(x_i)`.
#[derive(Clone, Debug)]
pub struct CircleMap {
    displacement: Vec<f64>,
    theta: f64,
    source: CircleDensity,
    target: CircleDensity,
}

impl CircleMap {
    pub fn m(&self) -> usize {
        self.displacement.len()
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn source(&self) -> &CircleDensity {
        &self.source
    }

    pub fn target(&self) -> &CircleDensity {
        &self.target
    }

    /// Lift `T̃(x)` at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        MonotoneFamily {
            source: &self.source,
            target: &self.target,
        }
        .lift(self.theta, x)
    }

    /// `T̃(i/m)` at the nodes.
    pub fn lift_at_nodes(&self) -> Vec<f64> {
        let m = self.m() as f64;
        self.displacement
            .iter()
            .enumerate()
            .map(|(i, d)| i as f64 / m - d)
            .collect()
    }

    pub fn sup_displacement(&self) -> f64 {
        self.displacement.iter().fold(0.0, |a, d| a.max(d.abs()))
    }

    pub fn mean_displacement(&self) -> f64 {
        self.displacement.iter().sum::<f64>() / self.m() as f64
    }

    /// `max_{1 ≤ k ≤ K} |∫ e^{−2πik T(x)} f(x) dx − ĝ(k)|`, nodal trapezoid rule
    /// for the pushforward and a fine rule for the target.
    pub fn pushforward_error(&self, k_max: u32) -> f64 {
        let m = self.m();
        let lifts = self.lift_at_nodes();
        let fine = (4 * m).max(MIN_QUADRATURE);
        (1..=k_max)
            .map(|k| {
                let w = TAU * k as f64;
                let pushed = lifts
                    .iter()
                    .zip(self.source.values())
                    .fold(Complex64::new(0.0, 0.0), |acc, (y, f)| {
                        acc + Complex64::from_polar(*f, -w * y)
                    })
                    / m as f64;
                let target = (0..fine)
                    .map(|j| j as f64 / fine as f64)
                    .fold(Complex64::new(0.0, 0.0), |acc, y| {
                        acc + Complex64::from_polar(self.target.eval(y), -w * y)
                    })
                    / fine as f64;
                (pushed - target).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Optimal map for the squared circle distance, on the nodes of `f`.
pub fn monotone_circle_map(f: &CircleDensity, g: &CircleDensity) -> Result<CircleMap> {
    let m = f.m();
    let family = MonotoneFamily {
        source: f,
        target: g,
    };
    let q = if m >= MIN_QUADRATURE { m } else { MIN_QUADRATURE };
    let theta = family.optimal_shift(q);
    let mut warm: Vec<f64> = (0..m).map(|i| i as f64 / m as f64 + theta).collect();
    family.displacements(theta, m, &mut warm);
    let displacement: Vec<f64> = warm
        .iter()
        .enumerate()
        .map(|(i, t)| i as f64 / m as f64 - t)
        .collect();
    let map = CircleMap {
        displacement,
        theta,
        source: f.clone(),
        target: g.clone(),
    };
    let sup = map.sup_displacement();
    if sup >= 0.5 {
        return Err(Error::CutLocus { sup });
    }
    Ok(map)
}

/// Zero-mean periodic potential `ψ` with `T̃ = id − ψ′`, at the map's nodes.
pub fn potential_from_map(map: &CircleMap) -> Vec<f64> {
    primitive_1d(map.displacement())
}

pub fn potential_1d(f: &CircleDensity, g: &CircleDensity) -> Result<Vec<f64>> {
    Ok(potential_from_map(&monotone_circle_map(f, g)?))
}
