//! Cost family `A_t = diag(1, λ_t)`, the Monge–Ampère residual
//! `F(A, u) = f − g(id − A⁻¹∇u) det(I − A⁻¹D²u)` and its split form
//! `G(t, u¹, u²) = F(A_t, u¹ + λ_t u²)` extended to `t = 0`.
//!
//! Both operators share one pointwise kernel, [`Geometry`], which holds
//! `A⁻¹∇u` and the entries of `A⁻¹D²u`. Building it from the split pair
//! `(u¹, u²)` avoids dividing the `x2`-derivatives of `u` by `λ_t`, which
//! would amplify round-off by `1/λ_t` at small `t`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::trig::TrigPoly2;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `t ↦ (λ_t, λ̇_t)` with `λ_0 = 0` and `λ_t > 0` for `t > 0`.
#[derive(Clone, Default)]
pub enum CostSchedule {
    /// `λ_t = t`.
    #[default]
    Linear,
    /// `λ_t = t^p`, `p > 0`.
    Power { exponent: f64 },
    Custom { lambda: ScalarFn, lambda_dot: ScalarFn },
}

impl fmt::Debug for CostSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSchedule::Linear => write!(f, "Linear"),
            CostSchedule::Power { exponent } => write!(f, "Power({exponent})"),
            CostSchedule::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl CostSchedule {
    pub fn custom(
        lambda: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lambda_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CostSchedule::Custom {
            lambda: Arc::new(lambda),
            lambda_dot: Arc::new(lambda_dot),
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        match self {
            CostSchedule::Linear => t,
            CostSchedule::Power { exponent } => t.abs().powf(*exponent),
            CostSchedule::Custom { lambda, .. } => lambda(t),
        }
    }

    pub fn lambda_dot(&self, t: f64) -> f64 {
        match self {
            CostSchedule::Linear => 1.0,
            CostSchedule::Power { exponent } => {
                if t == 0.0 && *exponent < 1.0 {
                    f64::INFINITY
                } else {
                    exponent * t.abs().powf(exponent - 1.0)
                }
            }
            CostSchedule::Custom { lambda_dot, .. } => lambda_dot(t),
        }
    }

    pub fn matrix(&self, t: f64) -> CostMatrix {
        CostMatrix {
            t,
            a22: self.lambda(t),
            a22dot: self.lambda_dot(t),
        }
    }
}

/// `A_t = diag(1, a22)` together with `Ȧ_t = diag(0, a22dot)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostMatrix {
    pub t: f64,
    pub a22: f64,
    pub a22dot: f64,
}

impl CostMatrix {
    pub fn new(t: f64, a22: f64, a22dot: f64) -> Self {
        Self { t, a22, a22dot }
    }

    /// The quadratic cost on 𝕋²: `A = I`.
    pub fn identity() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.a22
    }
}

/// Source and target densities, kept in closed form and sampled on a grid.
#[derive(Clone, Debug)]
pub struct DensityPair {
    grid: PeriodicGrid,
    f_poly: TrigPoly2,
    g_poly: TrigPoly2,
    f: ScalarField,
    g: ScalarField,
    delta: f64,
}

impl DensityPair {
    /// Both densities are rescaled to unit mass; positivity is checked on a
    /// 4× oversampled grid.
    pub fn new(grid: PeriodicGrid, f: TrigPoly2, g: TrigPoly2) -> Result<Self> {
        let n = 4 * grid.n1().max(grid.n2());
        let mut delta = f64::INFINITY;
        let mut norm = |p: TrigPoly2| -> Result<TrigPoly2> {
            if p.mean() <= 0.0 {
                return Err(Error::NotPositive {
                    min: p.mean(),
                    floor: 0.0,
                });
            }
            let p = p.scaled(1.0 / p.mean());
            let min = p.sampled_min(n);
            if min <= 0.0 {
                return Err(Error::NotPositive { min, floor: 0.0 });
            }
            delta = delta.min(min);
            Ok(p)
        };
        let f_poly = norm(f)?;
        let g_poly = norm(g)?;
        Ok(Self {
            grid,
            f: grid.sample_trig(&f_poly),
            g: grid.sample_trig(&g_poly),
            f_poly,
            g_poly,
            delta,
        })
    }

    pub fn on_grid(&self, grid: PeriodicGrid) -> Result<Self> {
        Self::new(grid, self.f_poly.clone(), self.g_poly.clone())
    }

    /// Swap source and target.
    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid,
            f_poly: self.g_poly.clone(),
            g_poly: self.f_poly.clone(),
            f: self.g.clone(),
            g: self.f.clone(),
            delta: self.delta,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn f_poly(&self) -> &TrigPoly2 {
        &self.f_poly
    }

    pub fn g_poly(&self) -> &TrigPoly2 {
        &self.g_poly
    }

    /// Positivity margin `δ ≤ min(f, g)`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bandwidth(&self) -> u32 {
        self.f_poly.bandwidth().max(self.g_poly.bandwidth())
    }
}

/// Pointwise geometry of a potential under a diagonal cost `diag(1, a)`:
/// the displacement `A⁻¹∇u` and the entries of `A⁻¹D²u`.
///
/// `h12 = ∂12u`, `h12a = ∂12u / a`, `h22a = ∂22u / a`.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub a: f64,
    pub d1: ScalarField,
    pub d2: ScalarField,
    pub h11: ScalarField,
    pub h12: ScalarField,
    pub h12a: ScalarField,
    pub h22a: ScalarField,
}

impl Geometry {
    /// From a plain potential `u` under `A = diag(1, a)`, `a > 0`.
    pub fn full(a: f64, u: &ScalarField) -> Self {
        let s = u.spectrum();
        let inv = 1.0 / a;
        let h12 = s.derivative(1, 1);
        Self {
            a,
            d1: s.derivative(1, 0),
            d2: s.derivative(0, 1).scale(inv),
            h11: s.derivative(2, 0),
            h12a: h12.scale(inv),
            h12,
            h22a: s.derivative(0, 2).scale(inv),
        }
    }

    /// From the split pair `u = u¹(x1) + λ u²(x1, x2)`; `λ = 0` gives the
    /// degenerate `t = 0` geometry with `A⁻¹∇u = (∂1u¹, ∂2u²)`.
    pub fn split(lambda: f64, u1: &[f64], u2: &ScalarField) -> Self {
        let grid = u2.grid();
        let s1 = grid.broadcast_x1(u1).spectrum();
        let s2 = u2.spectrum();
        let d1 = s1.derivative(1, 0).add_scaled(&s2.derivative(1, 0), lambda);
        let h11 = s1.derivative(2, 0).add_scaled(&s2.derivative(2, 0), lambda);
        let h12a = s2.derivative(1, 1);
        Self {
            a: lambda,
            d1,
            d2: s2.derivative(0, 1),
            h11,
            h12: h12a.scale(lambda),
            h12a,
            h22a: s2.derivative(0, 2),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.d1.grid()
    }

    /// `g(x − A⁻¹∇u(x))` evaluated in closed form.
    pub fn g_at_image(&self, pair: &DensityPair) -> ScalarField {
        let grid = self.grid();
        let g = pair.g_poly();
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut v = Vec::with_capacity(grid.len());
        for i in 0..n1 {
            for j in 0..n2 {
                let idx = i * n2 + j;
                let y1 = grid.x1(i) - self.d1.values()[idx];
                let y2 = grid.x2(j) - self.d2.values()[idx];
                v.push(g.eval(y1, y2));
            }
        }
        ScalarField::from_values(grid, v).expect("same grid")
    }

    /// `det(I − A⁻¹D²u)`.
    pub fn det(&self) -> ScalarField {
        let v = (0..self.grid().len())
            .map(|k| {
                let p = 1.0 - self.h11.values()[k];
                let s = 1.0 - self.h22a.values()[k];
                p * s - self.h12.values()[k] * self.h12a.values()[k]
            })
            .collect();
        ScalarField::from_values(self.grid(), v).expect("same grid")
    }

    pub fn residual(&self, pair: &DensityPair) -> ScalarField {
        let gt = self.g_at_image(pair);
        let det = self.det();
        let f = pair.f().values();
        let v = (0..self.grid().len())
            .map(|k| f[k] - gt.values()[k] * det.values()[k])
            .collect();
        ScalarField::from_values(self.grid(), v).expect("same grid")
    }

    /// Smallest eigenvalue of `A − D²u` over the grid.
    pub fn margin(&self) -> f64 {
        (0..self.grid().len())
            .map(|k| {
                let p = 1.0 - self.h11.values()[k];
                let s = self.a * (1.0 - self.h22a.values()[k]);
                let r = self.h12.values()[k];
                min_eigenvalue(p, -r, s)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `min (1 − ∂11u)` where `∂11u` includes the `λ ∂11u²` part.
    pub fn min_one_minus_h11(&self) -> f64 {
        1.0 - self.h11.max()
    }

    pub fn min_one_minus_h22a(&self) -> f64 {
        1.0 - self.h22a.max()
    }

    /// Image points `x − A⁻¹∇u(x)` (unwrapped lifts).
    pub fn map(&self) -> VectorField {
        let grid = self.grid();
        let x1 = grid.sample(|x, _| x);
        let x2 = grid.sample(|_, y| y);
        VectorField {
            c1: x1.add_scaled(&self.d1, -1.0),
            c2: x2.add_scaled(&self.d2, -1.0),
        }
    }
}

/// Smaller eigenvalue of the symmetric matrix `[[p, r], [r, s]]`.
#[inline]
pub fn min_eigenvalue(p: f64, r: f64, s: f64) -> f64 {
    let m = 0.5 * (p + s);
    let d = (0.5 * (p - s)).hypot(r);
    m - d
}

/// `F(A, u) = f − g(id − A⁻¹∇u) det(I − A⁻¹D²u)` at the grid nodes.
///
/// The mean is not projected out; it is a diagnostic of the discrete change of
/// variables.
pub fn residual_f(a: &CostMatrix, u: &ScalarField, pair: &DensityPair) -> Result<ScalarField> {
    check_positive_cost(a)?;
    let geo = Geometry::full(a.a22, u);
    let margin = geo.margin();
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::NotCConcave { margin });
    }
    Ok(geo.residual(pair))
}

pub(crate) fn check_positive_cost(a: &CostMatrix) -> Result<()> {
    if a.a22 > 0.0 && a.a22.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "cost matrix needs a22 > 0 (got {})",
            a.a22
        )))
    }
}

/// Membership test for the admissible set around the Knothe potentials.
///
/// At `t = 0`: `1 − ∂11u¹ > ε` and `1 − ∂22u² > ε`. For `t ≠ 0`:
/// `1 − ∂11u¹ − λ∂11u² > ε` and `A_t − D²(u¹ + λu²) ≻ ελ`.
pub fn check_admissible(geo: &Geometry, eps: f64) -> Result<()> {
    let c1 = geo.min_one_minus_h11();
    if c1.is_nan() || c1 <= eps {
        return Err(Error::Inadmissible(format!(
            "1 − ∂11u¹{} ≥ ε fails: min = {c1:.3e}, ε = {eps:.3e}",
            if geo.a == 0.0 { "" } else { " − λ∂11u²" }
        )));
    }
    if geo.a == 0.0 {
        let c2 = geo.min_one_minus_h22a();
        if c2.is_nan() || c2 <= eps {
            return Err(Error::Inadmissible(format!(
                "1 − ∂22u² > ε fails: min = {c2:.3e}, ε = {eps:.3e}"
            )));
        }
    } else {
        let m = geo.margin();
        if m.is_nan() || m <= eps * geo.a {
            return Err(Error::Inadmissible(format!(
                "A_t − D²(u¹ + λu²) ≻ ελ fails: margin = {m:.3e}, ελ = {:.3e}",
                eps * geo.a
            )));
        }
    }
    Ok(())
}

/// `G(t, u¹, u²)`: equal to `F(A_t, u¹ + λ_t u²)` for `t ≠ 0` and to
/// `f − g(id − ∂u)(1 − ∂11u¹)(1 − ∂22u²)` at `t = 0`.
pub fn residual_g(
    t: f64,
    u1: &[f64],
    u2: &ScalarField,
    pair: &DensityPair,
    schedule: &CostSchedule,
    eps: f64,
) -> Result<ScalarField> {
    let lambda = if t == 0.0 { 0.0 } else { schedule.lambda(t) };
    let geo = Geometry::split(lambda, u1, u2);
    check_admissible(&geo, eps)?;
    Ok(geo.residual(pair))
}

/// Smallest eigenvalue of `A − D²u` over the grid. Positive certifies that
/// `id − A⁻¹∇u` is a diffeomorphism of the torus.
pub fn c_concavity_margin(a: &CostMatrix, u: &ScalarField) -> f64 {
    Geometry::full(a.a22, u).margin()
}

/// `T = id − A⁻¹∇u` as a field of (lifted) image points.
pub fn transport_map(a: &CostMatrix, u: &ScalarField) -> Result<VectorField> {
    check_positive_cost(a)?;
    let geo = Geometry::full(a.a22, u);
    let margin = geo.margin();
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::NotDiffeomorphism { margin });
    }
    Ok(geo.map())
}

/// `max_{|k|∞ ≤ K} |∫ e^{−2πi k·T(x)} f(x) dx − ĝ(k)|`, with the integral
/// taken by the grid trapezoid rule.
pub fn pushforward_residual(map: &VectorField, pair: &DensityPair, k_max: i32) -> f64 {
    let grid = map.grid();
    assert_eq!(grid, pair.grid(), "map and densities must share the grid");
    let kk = k_max as usize;
    let width = 2 * kk + 1;
    let mut sums = vec![Complex64::new(0.0, 0.0); width * width];
    let f = pair.f().values();
    let mut p1 = vec![Complex64::new(0.0, 0.0); width];
    let mut p2 = vec![Complex64::new(0.0, 0.0); width];
    for idx in 0..grid.len() {
        let z1 = Complex64::from_polar(1.0, -TAU * map.c1.values()[idx]);
        let z2 = Complex64::from_polar(1.0, -TAU * map.c2.values()[idx]);
        powers(z1, kk, &mut p1);
        powers(z2, kk, &mut p2);
        let w = f[idx];
        for a in 0..width {
            let pa = p1[a] * w;
            for b in 0..width {
                sums[a * width + b] += pa * p2[b];
            }
        }
    }
    let n = grid.len() as f64;
    let mut worst: f64 = 0.0;
    for a in 0..width {
        for b in 0..width {
            let k1 = a as i32 - k_max;
            let k2 = b as i32 - k_max;
            let lhs = sums[a * width + b] / n;
            worst = worst.max((lhs - pair.g_poly().fourier_coefficient(k1, k2)).norm());
        }
    }
    worst
}

/// `out[k + K] = z^k` for `k = −K..=K`, with `|z| = 1`.
fn powers(z: Complex64, k: usize, out: &mut [Complex64]) {
    out[k] = Complex64::new(1.0, 0.0);
    for j in 1..=k {
        out[k + j] = out[k + j - 1] * z;
        out[k - j] = out[k + j].conj();
    }
}
