//! The linearized Monge–Ampère operator `D_uF(A, u) v = Div(B ∇v)` with
//! `B = (f − F(A, u)) [A − D²u]⁻¹ = g(id − A⁻¹∇u) adj(A − D²u) / det A`,
//! its inverse on zero-mean functions, and the degenerate solvers used near
//! `t = 0`: the triangular `t = 0` solve and the `B_t = U_t + V_t/λ_t`
//! block Gauss–Seidel iteration.
//!
//! Sign convention: `Div(B∇·)` is negative semi-definite; conjugate gradients
//! run on its negation.


use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    derivative_1d, derivative_symbol, divergence, PeriodicGrid, ScalarField, SymMatrixField,
};
use crate::monge_ampere::{check_admissible, check_positive_cost, CostMatrix, CostSchedule, DensityPair, Geometry};

/// Default tolerance for [`solve_duf`] when called from higher-level drivers.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Block Gauss–Seidel sweep limit before falling back to the full solve.
pub const MAX_SWEEPS: usize = 200;
const MAX_RESTARTS: usize = 6;

/// The pointwise SPD coefficient field `B` of `D_uF`.
#[derive(Clone, Debug)]
pub struct EllipticCoefficients {
    pub b: SymMatrixField,
}

impl EllipticCoefficients {
    /// `B = g(T) · [[1 − ∂22u/a, ∂12u/a], [∂12u/a, (1 − ∂11u)/a]]`.
    pub fn from_geometry(geo: &Geometry, pair: &DensityPair) -> Self {
        let gt = geo.g_at_image(pair);
        let a = geo.a;
        let n = geo.grid().len();
        let (mut b11, mut b12, mut b22) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let g = gt.values()[k];
            b11[k] = g * (1.0 - geo.h22a.values()[k]);
            b12[k] = g * geo.h12a.values()[k];
            b22[k] = g * (1.0 - geo.h11.values()[k]) / a;
        }
        let grid = geo.grid();
        Self {
            b: SymMatrixField {
                m11: ScalarField::from_values(grid, b11).unwrap(),
                m12: ScalarField::from_values(grid, b12).unwrap(),
                m22: ScalarField::from_values(grid, b22).unwrap(),
            },
        }
    }

    pub fn new(a: &CostMatrix, u: &ScalarField, pair: &DensityPair) -> Result<Self> {
        check_positive_cost(a)?;
        let geo = Geometry::full(a.a22, u);
        check_margin(&geo)?;
        Ok(Self::from_geometry(&geo, pair))
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.b.grid()
    }

    /// `Div(B ∇v)`.
    pub fn apply(&self, v: &ScalarField) -> ScalarField {
        let s = v.spectrum();
        self.apply_to_gradient(&s.derivative(1, 0), &s.derivative(0, 1))
    }

    /// `Div(B w)` for a given vector field `w`.
    pub fn apply_to_gradient(&self, w1: &ScalarField, w2: &ScalarField) -> ScalarField {
        let b = &self.b;
        let n = self.grid().len();
        let (mut f1, mut f2) = (vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let (p, q) = (w1.values()[k], w2.values()[k]);
            f1[k] = b.m11.values()[k] * p + b.m12.values()[k] * q;
            f2[k] = b.m12.values()[k] * p + b.m22.values()[k] * q;
        }
        let grid = self.grid();
        divergence(
            &ScalarField::from_values(grid, f1).unwrap(),
            &ScalarField::from_values(grid, f2).unwrap(),
        )
    }

    /// Smallest eigenvalue of `B` over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        let b = &self.b;
        (0..self.grid().len())
            .map(|k| {
                crate::monge_ampere::min_eigenvalue(
                    b.m11.values()[k],
                    b.m12.values()[k],
                    b.m22.values()[k],
                )
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_margin(geo: &Geometry) -> Result<()> {
    let margin = geo.margin();
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::NotCConcave { margin });
    }
    Ok(())
}

/// `B_t = U_t + V_t / λ_t` with `V₁₁ = V₁₂ = U₂₂ = 0`.
#[derive(Clone, Debug)]
pub struct SplitCoefficients {
    pub lambda: f64,
    pub u11: ScalarField,
    pub u12: ScalarField,
    pub v22: ScalarField,
}

impl SplitCoefficients {
    pub fn from_geometry(geo: &Geometry, pair: &DensityPair) -> Self {
        let gt = geo.g_at_image(pair);
        Self {
            lambda: geo.a,
            u11: gt.zip_map(&geo.h22a, |g, h| g * (1.0 - h)),
            u12: gt.zip_map(&geo.h12a, |g, h| g * h),
            v22: gt.zip_map(&geo.h11, |g, h| g * (1.0 - h)),
        }
    }

    /// `U + V/λ` as a full coefficient field.
    pub fn recombine(&self) -> EllipticCoefficients {
        EllipticCoefficients {
            b: SymMatrixField {
                m11: self.u11.clone(),
                m12: self.u12.clone(),
                m22: self.v22.scale(1.0 / self.lambda),
            },
        }
    }

    /// `Div(U ∇(v¹ + λv²)) + ∂2(V₂₂ ∂2 v²)`.
    pub fn apply(&self, v1: &[f64], v2: &ScalarField) -> ScalarField {
        let grid = v2.grid();
        let (d1v, d2v2) = self.gradients(v1, v2);
        let n = grid.len();
        let (mut f1, mut f2) = (vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let (p, q) = (d1v.values()[k], self.lambda * d2v2.values()[k]);
            f1[k] = self.u11.values()[k] * p + self.u12.values()[k] * q;
            f2[k] = self.u12.values()[k] * p + self.v22.values()[k] * d2v2.values()[k];
        }
        divergence(
            &ScalarField::from_values(grid, f1).unwrap(),
            &ScalarField::from_values(grid, f2).unwrap(),
        )
    }

    /// `(∂1(v¹ + λv²), ∂2v²)`.
    fn gradients(&self, v1: &[f64], v2: &ScalarField) -> (ScalarField, ScalarField) {
        let grid = v2.grid();
        let s2 = v2.spectrum();
        let d1v1 = grid.broadcast_x1(&derivative_1d(v1, 1));
        (
            d1v1.add_scaled(&s2.derivative(1, 0), self.lambda),
            s2.derivative(0, 1),
        )
    }
}

/// `D_uF(A, u) v = Div((f − F(A, u)) [A − D²u]⁻¹ ∇v)`.
pub fn apply_duf(
    a: &CostMatrix,
    u: &ScalarField,
    pair: &DensityPair,
    v: &ScalarField,
) -> Result<ScalarField> {
    Ok(EllipticCoefficients::new(a, u, pair)?.apply(v))
}

/// `−D_AF(A, u) Ȧ = Div((f − F(A, u)) [A − D²u]⁻¹ Ȧ A⁻¹ ∇u)`.
///
/// With `Ȧ A⁻¹∇u = (0, ȧ₂₂ ∂2u / a₂₂)` this is `Div(B (0, ȧ₂₂ ∂2u / a₂₂))`.
/// The velocity of the potential along the cost family solves
/// `D_uF ψ̇ = rhs_daf`.
pub fn rhs_daf(a: &CostMatrix, u: &ScalarField, pair: &DensityPair) -> Result<ScalarField> {
    if a.t == 0.0 || a.a22 == 0.0 {
        return Err(Error::InvalidArgument(
            "rhs_daf is singular at t = 0; use the small-t solver".into(),
        ));
    }
    check_positive_cost(a)?;
    let geo = Geometry::full(a.a22, u);
    check_margin(&geo)?;
    let b = EllipticCoefficients::from_geometry(&geo, pair);
    let w2 = geo.d2.scale(a.a22dot);
    Ok(b.apply_to_gradient(&geo.grid().zeros(), &w2))
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: ScalarField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Remove the Fourier modes annihilated by `Div(B∇·)`: the mean and the three
/// Nyquist modes with `k1, k2 ∈ {0, n/2}`.
pub fn project_range(q: &ScalarField) -> ScalarField {
    let grid = q.grid();
    let (n1, n2) = (grid.n1(), grid.n2());
    let s = q.spectrum();
    s.apply_symbol(|i, j| {
        let k1_dead = i == 0 || 2 * i == n1;
        let k2_dead = j == 0 || 2 * j == n2;
        if k1_dead && k2_dead {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
    .with_zero_mean_flag(true)
}

/// Inverse of the mean-coefficient operator `−Div(B̄∇·)`, diagonal in Fourier space.
struct MeanPreconditioner {
    grid: PeriodicGrid,
    inverse_symbol: Vec<f64>,
}

impl MeanPreconditioner {
    fn new(c: &EllipticCoefficients) -> Self {
        let grid = c.grid();
        let (b11, b12, b22) = (c.b.m11.mean(), c.b.m12.mean(), c.b.m22.mean());
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut inverse_symbol = vec![0.0; grid.len()];
        for i in 0..n1 {
            let k1 = derivative_symbol(i, n1, 1).im;
            for j in 0..n2 {
                let k2 = derivative_symbol(j, n2, 1).im;
                let s = b11 * k1 * k1 + 2.0 * b12 * k1 * k2 + b22 * k2 * k2;
                inverse_symbol[i * n2 + j] = if s > 0.0 { 1.0 / s } else { 0.0 };
            }
        }
        Self {
            grid,
            inverse_symbol,
        }
    }

    fn apply(&self, r: &ScalarField) -> ScalarField {
        let n2 = self.grid.n2();
        r.spectrum()
            .apply_symbol(|i, j| Complex64::new(self.inverse_symbol[i * n2 + j], 0.0))
    }
}

/// Preconditioned conjugate gradients for `Div(B∇v) = q` on the range of the
/// operator. The returned solution has zero mean and no component in the
/// operator's kernel.
pub fn solve_elliptic(
    coeffs: &EllipticCoefficients,
    q: &ScalarField,
    tol: f64,
    max_iter: usize,
    initial: Option<&ScalarField>,
) -> Result<SolveReport> {
    let grid = coeffs.grid();
    let q = project_range(q);
    let qnorm = q.l2_norm();
    if qnorm == 0.0 {
        return Ok(SolveReport {
            solution: grid.zeros().with_zero_mean_flag(true),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let pre = MeanPreconditioner::new(coeffs);
    let mut v = match initial {
        Some(v0) => project_range(v0),
        None => grid.zeros(),
    };
    let true_residual = |v: &ScalarField| q.add_scaled(&coeffs.apply(v), -1.0).scale(-1.0);
    let mut it = 0;
    // CG on −L v = −q, restarted from the true residual whenever the
    // recurrence has drifted away from it
    let mut r = true_residual(&v);
    let mut rel = r.l2_norm() / qnorm;
    for _restart in 0..MAX_RESTARTS {
        if rel <= tol {
            break;
        }
        let mut z = pre.apply(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let mut rec = rel;
        while rec > 0.5 * tol {
            if it >= max_iter {
                return Err(Error::Convergence {
                    solver: "preconditioned CG",
                    iterations: it,
                    residual: rec,
                });
            }
            let ap = coeffs.apply(&p).scale(-1.0);
            let pap = p.dot(&ap);
            if !(pap > 0.0) {
                return Err(Error::Convergence {
                    solver: "preconditioned CG (lost positivity)",
                    iterations: it,
                    residual: rec,
                });
            }
            let alpha = rz / pap;
            v = v.add_scaled(&p, alpha);
            r = r.add_scaled(&ap, -alpha);
            it += 1;
            rec = r.l2_norm() / qnorm;
            z = pre.apply(&r);
            let rz_new = r.dot(&z);
            p = z.add_scaled(&p, rz_new / rz);
            rz = rz_new;
        }
        r = true_residual(&v);
        rel = r.l2_norm() / qnorm;
    }
    if rel > tol {
        return Err(Error::Convergence {
            solver: "preconditioned CG (round-off floor)",
            iterations: it,
            residual: rel,
        });
    }
    Ok(SolveReport {
        solution: project_range(&v),
        iterations: it,
        relative_residual: rel,
    })
}

pub fn default_max_iter(grid: PeriodicGrid) -> usize {
    10 * (grid.n1() + grid.n2())
}

/// Solve `D_uF(A, u) v = q` for zero-mean `v`.
pub fn solve_duf(
    a: &CostMatrix,
    u: &ScalarField,
    pair: &DensityPair,
    q: &ScalarField,
    tol: f64,
) -> Result<SolveReport> {
    let c = EllipticCoefficients::new(a, u, pair)?;
    solve_elliptic(&c, q, tol, default_max_iter(u.grid()), None)
}

/// [`solve_duf`] at `A_t` for the state `u¹ + λ_t u²` given in split form,
/// returning the solution split as `(v¹, v²)`.
pub fn solve_duf_split(
    t: f64,
    schedule: &CostSchedule,
    u1: &[f64],
    u2: &ScalarField,
    pair: &DensityPair,
    q: &ScalarField,
    tol: f64,
) -> Result<(Vec<f64>, ScalarField, SolveReport)> {
    let lambda = schedule.lambda(t);
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("need λ_t > 0 (got {lambda})")));
    }
    let geo = Geometry::split(lambda, u1, u2);
    check_margin(&geo)?;
    let c = SplitCoefficients::from_geometry(&geo, pair).recombine();
    let rep = solve_elliptic(&c, q, tol, default_max_iter(q.grid()), None)?;
    let (v1, v2) = split_solution(&rep.solution, lambda);
    Ok((v1, v2, rep))
}

/// `v¹ = ∫ v dx2`, `v² = (v − v¹)/λ`.
pub fn split_solution(v: &ScalarField, lambda: f64) -> (Vec<f64>, ScalarField) {
    let v1 = v.mean_x2();
    let v2 = v.project_fiber_zero_mean().scale(1.0 / lambda);
    (v1, v2)
}

/// Solve `∂[c ∂w + s] = r` on the circle for zero-mean `w`, where `r` has zero
/// mean: with `R` the primitive of `r` vanishing at 0, `∂w = (R + κ − s)/c`
/// and `κ` is fixed by `∫ ∂w = 0`.
fn solve_primitive(c: &[f64], r: &[f64], s: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = c.len();
    if let Some(bad) = c.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Internal(format!(
            "fiber coefficient not positive: {bad:.3e}"
        )));
    }
    let mean_r = r.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = r.iter().map(|x| x - mean_r).collect();
    let mut prim = crate::grid::primitive_1d(&centered);
    let p0 = prim[0];
    prim.iter_mut().for_each(|p| *p -= p0);
    let num: Vec<f64> = match s {
        Some(s) => prim.iter().zip(s).map(|(p, s)| p - s).collect(),
        None => prim,
    };
    let inv_mean = c.iter().map(|x| 1.0 / x).sum::<f64>() / n as f64;
    let ratio_mean = num.iter().zip(c).map(|(p, x)| p / x).sum::<f64>() / n as f64;
    let kappa = -ratio_mean / inv_mean;
    let dw: Vec<f64> = num.iter().zip(c).map(|(p, x)| (p + kappa) / x).collect();
    Ok(crate::grid::primitive_1d(&dw))
}

/// Coefficients of the `t = 0` linearization
/// `∂1[a11 ∂1v¹] + ∂2[a21 ∂1v¹ + a22 ∂2v²]`, with `T = id − (∂1u¹, ∂2u²)`:
/// `a11 = g(T)(1 − ∂22u²)`, `a21 = g(T) ∂12u²`, `a22 = g(T)(1 − ∂11u¹)`.
#[derive(Clone, Debug)]
pub struct DegenerateOperator {
    pub a11: ScalarField,
    pub a21: ScalarField,
    pub a22: ScalarField,
}

impl DegenerateOperator {
    pub fn new(u1: &[f64], u2: &ScalarField, pair: &DensityPair, eps: f64) -> Result<Self> {
        let geo = Geometry::split(0.0, u1, u2);
        check_admissible(&geo, eps)?;
        let gt = geo.g_at_image(pair);
        Ok(Self {
            a11: gt.zip_map(&geo.h22a, |g, h| g * (1.0 - h)),
            a21: gt.zip_map(&geo.h12a, |g, h| g * h),
            a22: gt.zip_map(&geo.h11, |g, h| g * (1.0 - h)),
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.a11.grid()
    }

    pub fn apply(&self, v1: &[f64], v2: &ScalarField) -> ScalarField {
        let grid = self.grid();
        let d1 = grid.broadcast_x1(&derivative_1d(v1, 1));
        let d2 = v2.derivative(crate::grid::Axis::X2, 1);
        let f1 = self.a11.zip_map(&d1, |a, d| a * d);
        let f2 = ScalarField::from_values(
            grid,
            (0..grid.len())
                .map(|k| {
                    self.a21.values()[k] * d1.values()[k] + self.a22.values()[k] * d2.values()[k]
                })
                .collect(),
        )
        .unwrap();
        divergence(&f1, &f2)
    }

    /// Triangular inversion: `v¹` from the `x2`-averaged equation, then `v²`
    /// fiber by fiber.
    pub fn solve(&self, q: &ScalarField) -> Result<(Vec<f64>, ScalarField)> {
        let grid = self.grid();
        let g_bar = self.a11.mean_x2();
        if let Some(&bad) = g_bar.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Internal(format!(
                "averaged coefficient G(x1) not positive: {bad:.3e}"
            )));
        }
        let v1 = solve_primitive(&g_bar, &q.mean_x2(), None)?;
        let d1 = grid.broadcast_x1(&derivative_1d(&v1, 1));
        // x2-flux carried by v¹ goes to the fiber shift, x1-flux to the data
        let f1 = self.a11.zip_map(&d1, |a, d| a * d);
        let r = q.add_scaled(&f1.derivative(crate::grid::Axis::X1, 1), -1.0);
        let shift = self.a21.zip_map(&d1, |a, d| a * d);
        let v2 = fiber_solve(&self.a22, &r, &shift)?;
        Ok((v1, v2))
    }
}

/// For each `x1` row solve `∂2[c ∂2w + s] = r` with zero fiber mean.
fn fiber_solve(c: &ScalarField, r: &ScalarField, s: &ScalarField) -> Result<ScalarField> {
    let grid = c.grid();
    let rows = (0..grid.n1())
        .into_par_iter()
        .map(|i| solve_primitive(c.row(i), r.row(i), Some(s.row(i))))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::from_values(grid, rows.concat())
}

/// `D_uG(0, u¹, u²)(v¹, v²)`.
pub fn apply_t0(
    u1: &[f64],
    u2: &ScalarField,
    pair: &DensityPair,
    v1: &[f64],
    v2: &ScalarField,
) -> Result<ScalarField> {
    Ok(DegenerateOperator::new(u1, u2, pair, 0.0)?.apply(v1, v2))
}

/// Solve `D_uG(0, u¹, u²)(v¹, v²) = q` with `∫v¹ = 0` and `∫v²(x1, ·) = 0`.
pub fn solve_t0(
    u1: &[f64],
    u2: &ScalarField,
    pair: &DensityPair,
    q: &ScalarField,
) -> Result<(Vec<f64>, ScalarField)> {
    DegenerateOperator::new(u1, u2, pair, 0.0)?.solve(q)
}

/// Result of [`solve_smallt`].
#[derive(Clone, Debug)]
pub struct SmallTSolve {
    pub v1: Vec<f64>,
    pub v2: ScalarField,
    pub sweeps: usize,
    /// The block iteration diverged or stalled and the full solve was used.
    pub fell_back: bool,
    pub relative_residual: f64,
}

impl SmallTSolve {
    pub fn combined(&self, lambda: f64) -> ScalarField {
        self.v2
            .grid()
            .broadcast_x1(&self.v1)
            .add_scaled(&self.v2, lambda)
    }
}

/// Solve `D_uG(t, u¹, u²)(v¹, v²) = q` for small `t > 0` by block
/// Gauss–Seidel on `B_t = U_t + V_t/λ_t`.
///
/// Each sweep solves the fiber equation
/// `∂2[V₂₂ ∂2v²] = q − Div(U_t ∇v_t)` for `v²`, then the `x2`-averaged
/// equation for `v¹`. The `λ_t ∂1(U₁₁ ∂1 v²)` coupling is explicit, so the
/// sweep contracts only while `λ_t (π n1)² U₁₁ ≲ (2π)² V₂₂`; outside that
/// regime the iteration is abandoned for the full preconditioned solve.
pub fn solve_smallt(
    t: f64,
    schedule: &CostSchedule,
    u1: &[f64],
    u2: &ScalarField,
    pair: &DensityPair,
    q: &ScalarField,
    tol: f64,
) -> Result<SmallTSolve> {
    let lambda = schedule.lambda(t);
    if !(t > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "solve_smallt needs t > 0 (got t = {t})"
        )));
    }
    let geo = Geometry::split(lambda, u1, u2);
    check_admissible(&geo, 0.0)?;
    let sc = SplitCoefficients::from_geometry(&geo, pair);
    solve_split(&sc, q, tol)
}

pub(crate) fn solve_split(
    sc: &SplitCoefficients,
    q: &ScalarField,
    tol: f64,
) -> Result<SmallTSolve> {
    let grid = q.grid();
    let lambda = sc.lambda;
    let q = project_range(q);
    let qnorm = q.l2_norm();
    if qnorm == 0.0 {
        return Ok(SmallTSolve {
            v1: vec![0.0; grid.n1()],
            v2: grid.zeros(),
            sweeps: 0,
            fell_back: false,
            relative_residual: 0.0,
        });
    }
    let g_bar = sc.u11.mean_x2();
    let q_bar = q.mean_x2();

    let v1_step = |v2: &ScalarField| -> Result<Vec<f64>> {
        // ∂1[Ḡ ∂1v¹ + λ W] = q̄ with W = ∫(U₁₁∂1v² + U₁₂∂2v²) dx2
        let s = v2.spectrum();
        let w = sc
            .u11
            .zip_map(&s.derivative(1, 0), |a, d| a * d)
            .add_scaled(&sc.u12.zip_map(&s.derivative(0, 1), |a, d| a * d), 1.0)
            .mean_x2();
        let shift: Vec<f64> = w.iter().map(|x| lambda * x).collect();
        solve_primitive(&g_bar, &q_bar, Some(&shift))
    };
    let v2_step = |v1: &[f64], v2: &ScalarField| -> Result<ScalarField> {
        // ∂2[V₂₂∂2v² + U₁₂∂1v_t] = q − ∂1[U₁₁∂1v_t + U₁₂∂2v_t]
        let (d1v, d2v2) = sc.gradients(v1, v2);
        let flux1 = ScalarField::from_values(
            grid,
            (0..grid.len())
                .map(|k| {
                    sc.u11.values()[k] * d1v.values()[k]
                        + sc.u12.values()[k] * lambda * d2v2.values()[k]
                })
                .collect(),
        )
        .unwrap();
        let r = q.add_scaled(&flux1.derivative(crate::grid::Axis::X1, 1), -1.0);
        let shift = sc.u12.zip_map(&d1v, |a, d| a * d);
        fiber_solve(&sc.v22, &r, &shift)
    };
    let residual = |v1: &[f64], v2: &ScalarField| -> f64 {
        sc.apply(v1, v2).add_scaled(&q, -1.0).l2_norm() / qnorm
    };

    let mut v2 = grid.zeros();
    let mut v1 = v1_step(&v2)?;
    let mut best = f64::INFINITY;
    let mut rising = 0;
    let mut sweeps = 0;
    let mut rel = f64::INFINITY;
    let mut diverged = false;
    while sweeps < MAX_SWEEPS {
        v2 = v2_step(&v1, &v2)?;
        v1 = v1_step(&v2)?;
        sweeps += 1;
        rel = residual(&v1, &v2);
        if !rel.is_finite() {
            diverged = true;
            break;
        }
        if rel <= tol {
            break;
        }
        if rel < best {
            best = rel;
            rising = 0;
        } else {
            rising += 1;
            if rising >= 3 || rel > 1e3 * best {
                diverged = true;
                break;
            }
        }
    }
    if rel <= tol && !diverged {
        return Ok(SmallTSolve {
            v1,
            v2,
            sweeps,
            fell_back: false,
            relative_residual: rel,
        });
    }
    let full = sc.recombine();
    let report = solve_elliptic(&full, &q, tol, default_max_iter(grid), None)?;
    let (w1, w2) = split_solution(&report.solution, lambda);
    Ok(SmallTSolve {
        relative_residual: residual(&w1, &w2),
        v1: w1,
        v2: w2,
        sweeps,
        fell_back: true,
    })
}

/// Constant used by the coercivity bound: `|∇v|²` weighted by grid spacing.
pub fn gradient_energy(v: &ScalarField) -> f64 {
    let s = v.spectrum();
    let (d1, d2) = (s.derivative(1, 0), s.derivative(0, 1));
    (d1.dot(&d1) + d2.dot(&d2)) / v.grid().len() as f64
}
