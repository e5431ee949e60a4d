//! Periodic grid functions on 𝕋² = [0,1)² with spectral calculus.
//!
//! Storage is row-major with `x1` as the slow index: value `(i, j)` sits at
//! `i·n2 + j` and lives at the node `(i/n1, j/n2)`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::trig::TrigPoly2;

type Plan = Arc<dyn Fft<f64>>;

static PLANS: Lazy<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
    Lazy::new(|| Mutex::new((FftPlanner::new(), HashMap::new())));

fn plan(n: usize, inverse: bool) -> Plan {
    let mut guard = PLANS.lock().expect("fft plan cache poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Signed wavenumber for DFT index `i` on `n` points; the Nyquist index maps to `n/2`.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if 2 * i <= n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Fourier symbol of `∂^order` along an axis of `n` points.
///
/// Odd orders vanish at the Nyquist index so that derivatives of real data
/// stay real; even orders keep `(iπn)^order`.
#[inline]
pub fn derivative_symbol(i: usize, n: usize, order: u32) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if order % 2 == 1 && 2 * i == n {
        return Complex64::new(0.0, 0.0);
    }
    let k = TAU * wavenumber(i, n) as f64;
    Complex64::new(0.0, k).powu(order)
}

/// Uniform periodic grid with `n1 × n2` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    n1: usize,
    n2: usize,
}

impl PeriodicGrid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 8 || n2 < 8 || n1 % 2 != 0 || n2 % 2 != 0 {
            return Err(Error::GridSize { n1, n2 });
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn h1(&self) -> f64 {
        1.0 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        1.0 / self.n2 as f64
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        i as f64 / self.n1 as f64
    }

    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        j as f64 / self.n2 as f64
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::from_values(*self, vec![0.0; self.len()]).expect("sized by grid")
    }

    /// Sample `f(x1, x2)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                v.push(f(self.x1(i), self.x2(j)));
            }
        }
        ScalarField::from_values(*self, v).expect("sized by grid")
    }

    /// Sample a closed-form polynomial and keep it for exact off-grid evaluation.
    pub fn sample_trig(&self, p: &TrigPoly2) -> ScalarField {
        let mut f = self.sample(|x1, x2| p.eval(x1, x2));
        f.closed_form = Some(Arc::new(p.clone()));
        f
    }

    /// Field constant along `x2` with the given `x1` profile.
    pub fn broadcast_x1(&self, profile: &[f64]) -> ScalarField {
        assert_eq!(profile.len(), self.n1, "profile length must equal n1");
        let mut v = Vec::with_capacity(self.len());
        for &p in profile {
            v.extend(std::iter::repeat(p).take(self.n2));
        }
        ScalarField::from_values(*self, v).expect("sized by grid")
    }
}

/// Real-valued grid function.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
    zero_mean: bool,
    closed_form: Option<Arc<TrigPoly2>>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl ScalarField {
    pub fn from_values(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}×{} grid",
                values.len(),
                grid.n1,
                grid.n2
            )));
        }
        Ok(Self {
            grid,
            values,
            zero_mean: false,
            closed_form: None,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.zero_mean = false;
        self.closed_form = None;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n2 = self.grid.n2;
        &self.values[i * n2..(i + 1) * n2]
    }

    pub fn is_zero_mean(&self) -> bool {
        self.zero_mean
    }

    /// Flag the field as zero-mean; callers vouch for it (checked on read).
    pub fn with_zero_mean_flag(mut self, flag: bool) -> Self {
        self.zero_mean = flag;
        self
    }

    pub fn closed_form(&self) -> Option<&TrigPoly2> {
        self.closed_form.as_deref()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField::from_values(self.grid, values).expect("same grid")
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_values(self.grid, values).expect("same grid")
    }

    pub fn add_scaled(&self, other: &ScalarField, s: f64) -> ScalarField {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Grid inner product `Σ a_ij b_ij` (no cell-area weight).
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arithmetic mean of the nodal values: the periodic trapezoid rule for `∫ field`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn project_zero_mean(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m).with_zero_mean_flag(true)
    }

    /// `x1 ↦ ∫ field(x1, x2) dx2` by the trapezoid rule in `x2`.
    pub fn mean_x2(&self) -> Vec<f64> {
        (0..self.grid.n1)
            .map(|i| self.row(i).iter().sum::<f64>() / self.grid.n2 as f64)
            .collect()
    }

    /// Subtract the `x2`-average from every fiber.
    pub fn project_fiber_zero_mean(&self) -> ScalarField {
        let means = self.mean_x2();
        let n2 = self.grid.n2;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| v - means[idx / n2])
            .collect();
        ScalarField::from_values(self.grid, values).expect("same grid")
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(self)
    }

    pub fn derivative(&self, axis: Axis, order: u32) -> ScalarField {
        spectral_derivative(self, axis, order)
    }

    /// Drop every Fourier mode with `k1 = n1/2` or `k2 = n2/2`.
    ///
    /// First derivatives ignore these modes while pure second derivatives do
    /// not, so a potential carrying them has a Monge–Ampère residual that no
    /// divergence-form linearization can see. Potentials are kept in the
    /// Nyquist-free subspace.
    pub fn without_nyquist(&self) -> ScalarField {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        self.spectrum()
            .apply_symbol(|i, j| {
                let keep = 2 * i != n1 && 2 * j != n2;
                Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
            })
            .with_zero_mean_flag(self.zero_mean)
    }
}

/// Coordinate axis of 𝕋².
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Two fields on a common grid, e.g. a gradient or a map.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self> {
        if c1.grid() != c2.grid() {
            return Err(Error::GridMismatch("vector components differ".into()));
        }
        Ok(Self { c1, c2 })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.c1.grid()
    }
}

/// Symmetric 2×2 matrix field; only the upper triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrixField {
    pub m11: ScalarField,
    pub m12: ScalarField,
    pub m22: ScalarField,
}

impl SymMatrixField {
    pub fn new(m11: ScalarField, m12: ScalarField, m22: ScalarField) -> Result<Self> {
        if m11.grid() != m12.grid() || m11.grid() != m22.grid() {
            return Err(Error::GridMismatch("matrix components differ".into()));
        }
        Ok(Self { m11, m12, m22 })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.m11.grid()
    }

    pub fn gradient(u: &ScalarField) -> VectorField {
        let s = u.spectrum();
        VectorField {
            c1: s.derivative(1, 0),
            c2: s.derivative(0, 1),
        }
    }

    pub fn hessian(u: &ScalarField) -> SymMatrixField {
        let s = u.spectrum();
        SymMatrixField {
            m11: s.derivative(2, 0),
            m12: s.derivative(1, 1),
            m22: s.derivative(0, 2),
        }
    }
}

/// Unnormalized forward DFT of a field (`Σ v e^{−2πi(k1 i/n1 + k2 j/n2)}`).
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(field: &ScalarField) -> Self {
        let mut buf: Vec<Complex64> = field
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_2d(&mut buf, field.grid, false);
        Self {
            grid: field.grid,
            coeffs: buf,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Inverse transform of `symbol(i, j) · coeff(i, j)`, real part.
    pub fn apply_symbol(&self, symbol: impl Fn(usize, usize) -> Complex64) -> ScalarField {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let mut buf = self.coeffs.clone();
        for i in 0..n1 {
            for j in 0..n2 {
                buf[i * n2 + j] *= symbol(i, j);
            }
        }
        from_spectrum(buf, self.grid)
    }

    /// `∂1^o1 ∂2^o2` of the trigonometric interpolant, sampled at the nodes.
    pub fn derivative(&self, o1: u32, o2: u32) -> ScalarField {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let s1: Vec<Complex64> = (0..n1).map(|i| derivative_symbol(i, n1, o1)).collect();
        let s2: Vec<Complex64> = (0..n2).map(|j| derivative_symbol(j, n2, o2)).collect();
        self.apply_symbol(|i, j| s1[i] * s2[j])
    }
}

fn from_spectrum(mut buf: Vec<Complex64>, grid: PeriodicGrid) -> ScalarField {
    fft_2d(&mut buf, grid, true);
    let scale = 1.0 / grid.len() as f64;
    let values = buf.into_iter().map(|c| c.re * scale).collect();
    ScalarField::from_values(grid, values).expect("same grid")
}

fn fft_2d(buf: &mut [Complex64], grid: PeriodicGrid, inverse: bool) {
    let (n1, n2) = (grid.n1, grid.n2);
    // rows: transform along x2
    plan(n2, inverse).process(buf);
    // columns: transpose, transform along x1, transpose back
    let mut t = vec![Complex64::new(0.0, 0.0); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            t[j * n1 + i] = buf[i * n2 + j];
        }
    }
    plan(n1, inverse).process(&mut t);
    for i in 0..n1 {
        for j in 0..n2 {
            buf[i * n2 + j] = t[j * n1 + i];
        }
    }
}

/// Derivative of the trigonometric interpolant of `field` along `axis`.
pub fn spectral_derivative(field: &ScalarField, axis: Axis, order: u32) -> ScalarField {
    let s = field.spectrum();
    match axis {
        Axis::X1 => s.derivative(order, 0),
        Axis::X2 => s.derivative(0, order),
    }
}

pub fn integrate_mean(field: &ScalarField) -> f64 {
    field.mean()
}

pub fn project_zero_mean(field: &ScalarField) -> ScalarField {
    field.project_zero_mean()
}

/// Divergence `∂1 w1 + ∂2 w2` with spectral first derivatives.
pub fn divergence(w1: &ScalarField, w2: &ScalarField) -> ScalarField {
    let grid = w1.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let a = w1.spectrum();
    let b = w2.spectrum();
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 0..n1 {
        let d1 = derivative_symbol(i, n1, 1);
        for j in 0..n2 {
            let d2 = derivative_symbol(j, n2, 1);
            let idx = i * n2 + j;
            buf[idx] = d1 * a.coeffs[idx] + d2 * b.coeffs[idx];
        }
    }
    from_spectrum(buf, grid)
}

/// Periodic evaluation of a field at arbitrary points.
///
/// Fields carrying a closed form are evaluated exactly; others use a periodic
/// bicubic Hermite patch whose nodal slopes come from spectral derivatives.
pub fn eval_periodic(field: &ScalarField, points: &[(f64, f64)]) -> Vec<f64> {
    if let Some(p) = field.closed_form() {
        return points
            .iter()
            .map(|&(x1, x2)| p.eval(x1.rem_euclid(1.0), x2.rem_euclid(1.0)))
            .collect();
    }
    let interp = BicubicInterpolator::new(field);
    points.iter().map(|&(x1, x2)| interp.eval(x1, x2)).collect()
}

/// Periodic bicubic Hermite interpolation with spectral nodal derivatives.
pub struct BicubicInterpolator {
    grid: PeriodicGrid,
    f: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f12: Vec<f64>,
}

impl BicubicInterpolator {
    pub fn new(field: &ScalarField) -> Self {
        let s = field.spectrum();
        Self {
            grid: field.grid(),
            f: field.values().to_vec(),
            f1: s.derivative(1, 0).into_values(),
            f2: s.derivative(0, 1).into_values(),
            f12: s.derivative(1, 1).into_values(),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let (h1, h2) = (self.grid.h1(), self.grid.h2());
        let y1 = x1.rem_euclid(1.0) * n1 as f64;
        let y2 = x2.rem_euclid(1.0) * n2 as f64;
        let i0 = (y1.floor() as usize) % n1;
        let j0 = (y2.floor() as usize) % n2;
        let s = y1 - y1.floor();
        let t = y2 - y2.floor();
        let i1 = (i0 + 1) % n1;
        let j1 = (j0 + 1) % n2;

        // cubic Hermite basis on [0,1]
        let h = |u: f64| -> [f64; 4] {
            let u2 = u * u;
            let u3 = u2 * u;
            [
                2.0 * u3 - 3.0 * u2 + 1.0,
                u3 - 2.0 * u2 + u,
                -2.0 * u3 + 3.0 * u2,
                u3 - u2,
            ]
        };
        let hs = h(s);
        let ht = h(t);
        let mut acc = 0.0;
        for (a, &ia) in [i0, i1].iter().enumerate() {
            let (w0, w1) = (hs[2 * a], hs[2 * a + 1] * h1);
            for (b, &jb) in [j0, j1].iter().enumerate() {
                let (v0, v1) = (ht[2 * b], ht[2 * b + 1] * h2);
                let idx = ia * n2 + jb;
                acc += w0 * v0 * self.f[idx]
                    + w1 * v0 * self.f1[idx]
                    + w0 * v1 * self.f2[idx]
                    + w1 * v1 * self.f12[idx];
            }
        }
        acc
    }
}

pub(crate) fn fft_1d(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(samples.len(), false).process(&mut buf);
    buf
}

fn ifft_1d_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    plan(n, true).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Spectral derivative of periodic samples on `[0,1)`.
pub fn derivative_1d(samples: &[f64], order: u32) -> Vec<f64> {
    let n = samples.len();
    let mut spec = fft_1d(samples);
    for (i, c) in spec.iter_mut().enumerate() {
        *c *= derivative_symbol(i, n, order);
    }
    ifft_1d_real(spec)
}

/// Periodic samples with the Nyquist component removed.
pub fn without_nyquist_1d(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut spec = fft_1d(samples);
    spec[n / 2] = Complex64::new(0.0, 0.0);
    ifft_1d_real(spec)
}

/// Zero-mean periodic primitive of periodic samples.
///
/// The mean of `samples` and their Nyquist component have no periodic
/// primitive and are discarded.
pub fn primitive_1d(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut spec = fft_1d(samples);
    for (i, c) in spec.iter_mut().enumerate() {
        if i == 0 || 2 * i == n {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, TAU * wavenumber(i, n) as f64);
        }
    }
    ifft_1d_real(spec)
}
