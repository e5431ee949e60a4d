//! Closed-form trigonometric polynomials on 𝕋¹ and 𝕋².
//!
//! Densities are kept in closed form so that compositions such as
//! `g(x − A⁻¹∇u(x))` can be evaluated exactly at off-grid points.

use std::f64::consts::TAU;

use num_complex::Complex64;

/// One cosine term `amplitude · cos(2π(k1·x1 + k2·x2) + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineMode {
    pub k1: i32,
    pub k2: i32,
    pub amplitude: f64,
    pub phase: f64,
}

impl CosineMode {
    pub fn new(k1: i32, k2: i32, amplitude: f64, phase: f64) -> Self {
        Self {
            k1,
            k2,
            amplitude,
            phase,
        }
    }
}

/// `constant + Σ amplitude·cos(2π(k·x) + phase)` on the 2-torus.
///
/// Modes are stored canonically: `(k1, k2) ≠ 0` with `k1 > 0`, or `k1 = 0` and
/// `k2 > 0`. Zero-frequency terms are folded into the constant.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly2 {
    constant: f64,
    modes: Vec<CosineMode>,
}

impl TrigPoly2 {
    pub fn new(constant: f64, modes: impl IntoIterator<Item = CosineMode>) -> Self {
        let mut c = constant;
        let mut out = Vec::new();
        for m in modes {
            if m.k1 == 0 && m.k2 == 0 {
                c += m.amplitude * m.phase.cos();
            } else if m.k1 < 0 || (m.k1 == 0 && m.k2 < 0) {
                out.push(CosineMode::new(-m.k1, -m.k2, m.amplitude, -m.phase));
            } else {
                out.push(m);
            }
        }
        Self {
            constant: c,
            modes: out,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, [])
    }

    /// `1 + Σ modes`, rescaled to unit mean.
    pub fn normalized_density(modes: impl IntoIterator<Item = CosineMode>) -> Self {
        let p = Self::new(1.0, modes);
        let c = p.constant;
        p.scaled(1.0 / c)
    }

    /// Product `a(x1)·b(x2)` of two one-dimensional polynomials.
    pub fn product(a: &TrigPoly1, b: &TrigPoly1) -> Self {
        let mut modes = Vec::new();
        for m in a.modes() {
            modes.push(CosineMode::new(m.k as i32, 0, m.amplitude * b.constant(), m.phase));
        }
        for m in b.modes() {
            modes.push(CosineMode::new(0, m.k as i32, m.amplitude * a.constant(), m.phase));
        }
        // cos α cos β = ½cos(α+β) + ½cos(α−β)
        for ma in a.modes() {
            for mb in b.modes() {
                let amp = 0.5 * ma.amplitude * mb.amplitude;
                modes.push(CosineMode::new(ma.k as i32, mb.k as i32, amp, ma.phase + mb.phase));
                modes.push(CosineMode::new(ma.k as i32, -(mb.k as i32), amp, ma.phase - mb.phase));
            }
        }
        Self::new(a.constant() * b.constant(), modes)
    }

    pub fn mean(&self) -> f64 {
        self.constant
    }

    pub fn modes(&self) -> &[CosineMode] {
        &self.modes
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            modes: self
                .modes
                .iter()
                .map(|m| CosineMode {
                    amplitude: m.amplitude * s,
                    ..*m
                })
                .collect(),
        }
    }

    /// Largest `max(|k1|, |k2|)` over the modes.
    pub fn bandwidth(&self) -> u32 {
        self.modes
            .iter()
            .map(|m| m.k1.unsigned_abs().max(m.k2.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut v = self.constant;
        for m in &self.modes {
            v += m.amplitude * (TAU * (m.k1 as f64 * x1 + m.k2 as f64 * x2) + m.phase).cos();
        }
        v
    }

    pub fn gradient(&self, x1: f64, x2: f64) -> (f64, f64) {
        let (mut g1, mut g2) = (0.0, 0.0);
        for m in &self.modes {
            let s = -m.amplitude * (TAU * (m.k1 as f64 * x1 + m.k2 as f64 * x2) + m.phase).sin();
            g1 += s * TAU * m.k1 as f64;
            g2 += s * TAU * m.k2 as f64;
        }
        (g1, g2)
    }

    /// Fourier coefficient `∫ p(y) e^{−2πi k·y} dy`.
    pub fn fourier_coefficient(&self, k1: i32, k2: i32) -> Complex64 {
        let mut c = Complex64::new(0.0, 0.0);
        if k1 == 0 && k2 == 0 {
            c += self.constant;
        }
        for m in &self.modes {
            if m.k1 == k1 && m.k2 == k2 {
                c += Complex64::from_polar(0.5 * m.amplitude, m.phase);
            } else if m.k1 == -k1 && m.k2 == -k2 {
                c += Complex64::from_polar(0.5 * m.amplitude, -m.phase);
            }
        }
        c
    }

    /// `x1 ↦ ∫ p(x1, x2) dx2`.
    pub fn marginal_x1(&self) -> TrigPoly1 {
        TrigPoly1::new(
            self.constant,
            self.modes
                .iter()
                .filter(|m| m.k2 == 0)
                .map(|m| CircleMode::new(m.k1, m.amplitude, m.phase)),
        )
    }

    /// The slice `x2 ↦ p(x1, x2)` at fixed `x1`, as a polynomial in `x2`.
    pub fn slice_x2(&self, x1: f64) -> TrigPoly1 {
        let mut c = self.constant;
        let mut modes = Vec::new();
        for m in &self.modes {
            let phase = TAU * m.k1 as f64 * x1 + m.phase;
            if m.k2 == 0 {
                c += m.amplitude * phase.cos();
            } else {
                modes.push(CircleMode::new(m.k2, m.amplitude, phase));
            }
        }
        TrigPoly1::new(c, modes)
    }

    /// Minimum over a uniform `n×n` sampling.
    pub fn sampled_min(&self, n: usize) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                lo = lo.min(self.eval(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        lo
    }
}

/// One cosine term `amplitude · cos(2πk·x + phase)` with `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleMode {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

impl CircleMode {
    pub fn new(k: i32, amplitude: f64, phase: f64) -> Self {
        if k < 0 {
            Self {
                k: k.unsigned_abs(),
                amplitude,
                phase: -phase,
            }
        } else {
            Self {
                k: k as u32,
                amplitude,
                phase,
            }
        }
    }
}

/// `constant + Σ amplitude·cos(2πk·x + phase)` on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly1 {
    constant: f64,
    modes: Vec<CircleMode>,
}

impl TrigPoly1 {
    pub fn new(constant: f64, modes: impl IntoIterator<Item = CircleMode>) -> Self {
        let mut c = constant;
        let mut out = Vec::new();
        for m in modes {
            if m.k == 0 {
                c += m.amplitude * m.phase.cos();
            } else {
                out.push(m);
            }
        }
        Self {
            constant: c,
            modes: out,
        }
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn modes(&self) -> &[CircleMode] {
        &self.modes
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            modes: self
                .modes
                .iter()
                .map(|m| CircleMode {
                    amplitude: m.amplitude * s,
                    ..*m
                })
                .collect(),
        }
    }

    /// Trigonometric interpolant of `m` equispaced samples at `i/m`.
    pub fn interpolate(samples: &[f64]) -> Self {
        let m = samples.len();
        let spec = crate::grid::fft_1d(samples);
        let mut modes = Vec::new();
        let constant = spec[0].re / m as f64;
        for (k, c) in spec.iter().enumerate().take(m / 2 + 1).skip(1) {
            // Nyquist term is real: (c/m)·cos(πm x)
            let (amp, phase) = if 2 * k == m {
                (c.re / m as f64, 0.0)
            } else {
                (2.0 * c.norm() / m as f64, c.arg())
            };
            if amp != 0.0 {
                modes.push(CircleMode {
                    k: k as u32,
                    amplitude: amp,
                    phase,
                });
            }
        }
        Self::new(constant, modes)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for m in &self.modes {
            v += m.amplitude * (TAU * m.k as f64 * x + m.phase).cos();
        }
        v
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for m in &self.modes {
            v -= m.amplitude * TAU * m.k as f64 * (TAU * m.k as f64 * x + m.phase).sin();
        }
        v
    }

    /// Exact primitive `∫₀ˣ p(y) dy`, valid for every real `x`.
    #[inline]
    pub fn primitive(&self, x: f64) -> f64 {
        let mut v = self.constant * x;
        for m in &self.modes {
            let w = TAU * m.k as f64;
            v += m.amplitude / w * ((w * x + m.phase).sin() - m.phase.sin());
        }
        v
    }

    pub fn sampled_min(&self, n: usize) -> f64 {
        (0..n)
            .map(|i| self.eval(i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ |amplitude|`, a bound on `|p − constant|`.
    pub fn oscillation_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude.abs()).sum()
    }
}
