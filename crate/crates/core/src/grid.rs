//! Functions on the circle sampled on a uniform grid, with their
//! trigonometric interpolants.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numeric::{fft_in_place, pairwise_sum};

/// Oversampling factor of the grid on which norms are evaluated.
pub const REFINEMENT: usize = 4;

/// Values `f(j/N)` for `j = 0..N`, `N` a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::config(
                "resolution",
                format!("must be a power of two ≥ 4, got {n}"),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("values", "non-finite sample"));
        }
        Ok(GridFunction { values })
    }

    /// Samples `f` on the grid. Panics unless `n` is a power of two ≥ 4.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(
            n >= 4 && n.is_power_of_two(),
            "resolution must be a power of two ≥ 4"
        );
        GridFunction {
            values: (0..n).map(|j| f(j as f64 / n as f64)).collect(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_fn(n, |_| c)
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.values.len() as f64
    }

    fn check_same(&self, other: &GridFunction) {
        assert_eq!(
            self.resolution(),
            other.resolution(),
            "grid resolutions differ"
        );
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        self.check_same(other);
        GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn add_scalar(&self, c: f64) -> GridFunction {
        self.map(|v| v + c)
    }

    /// `∫ f dm`, by the trapezoidal rule (exact for trigonometric polynomials
    /// of degree below `N`).
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    /// `∫ f g dm`.
    pub fn pair(&self, other: &GridFunction) -> f64 {
        self.mul(other).integral()
    }

    /// Largest absolute grid value (no refinement).
    pub fn grid_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_grid(self)
    }

    /// Values of the `order`-th derivative of the interpolant on the
    /// `REFINEMENT`× finer grid.
    pub fn refined_values(&self, order: u32) -> Vec<f64> {
        self.spectrum().refined_values(order, REFINEMENT)
    }

    /// `‖D^order f‖_∞` on the refined grid.
    pub fn derivative_sup(&self, order: u32) -> f64 {
        self.refined_values(order)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `C⁰` norm on the refined grid.
    pub fn sup_norm(&self) -> f64 {
        self.derivative_sup(0)
    }

    /// `C^r` norm: `max_{j ≤ r} ‖D^j f‖_∞` on the refined grid.
    pub fn cr_norm(&self, r: u32) -> f64 {
        let s = self.spectrum();
        (0..=r)
            .map(|j| {
                s.refined_values(j, REFINEMENT)
                    .iter()
                    .fold(0.0, |m: f64, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn c1_norm(&self) -> f64 {
        self.cr_norm(1)
    }

    pub fn c3_norm(&self) -> f64 {
        self.cr_norm(3)
    }

    /// Minimum of the interpolant on the refined grid.
    pub fn refined_min(&self) -> f64 {
        self.refined_values(0)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Spectral derivative sampled on the same grid.
    pub fn derivative(&self, order: u32) -> GridFunction {
        let v = self.spectrum().refined_values(order, 1);
        GridFunction { values: v }
    }

    /// Interpolant resampled on a grid of `n` points.
    pub fn resample(&self, n: usize) -> GridFunction {
        let s = self.spectrum();
        GridFunction::from_fn(n, |x| s.eval(x))
    }

    /// `self / ∫ self`.
    pub fn normalized(&self) -> Result<GridFunction> {
        let m = self.integral();
        if !(m.abs() > 0.0) {
            return Err(Error::Precondition(
                "cannot normalise a function with zero integral".into(),
            ));
        }
        Ok(self.scale(1.0 / m))
    }
}

/// One-sided Fourier coefficients `c_0, …, c_{N/2}` of a real grid function,
/// so that the interpolant is
/// `c_0 + Σ_{0<m<N/2} 2 Re(c_m e^{2πimx}) + c_{N/2} cos(πNx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_grid(f: &GridFunction) -> Self {
        let n = f.resolution();
        let mut data: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        fft_in_place(&mut data, false);
        let scale = 1.0 / n as f64;
        let mut coeffs: Vec<Complex64> = data[..=n / 2].iter().map(|c| c * scale).collect();
        coeffs[0].im = 0.0;
        coeffs[n / 2].im = 0.0;
        Spectrum { n, coeffs }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Interpolant and its derivative at an arbitrary point, by direct
    /// summation over all modes.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let half = self.n / 2;
        let theta = 2.0 * PI * x;
        let (s, c) = theta.sin_cos();
        let z = Complex64::new(c, s);
        let mut w = z;
        let mut val = self.coeffs[0].re;
        let mut der = 0.0;
        for m in 1..half {
            // Restart the power recurrence periodically to bound rounding drift.
            if m % 32 == 0 {
                let (sm, cm) = (theta * m as f64).sin_cos();
                w = Complex64::new(cm, sm);
            }
            let t = self.coeffs[m] * w;
            val += 2.0 * t.re;
            der -= 2.0 * (2.0 * PI * m as f64) * t.im;
            w *= z;
        }
        let (sn, cn) = (PI * self.n as f64 * x).sin_cos();
        let nyq = self.coeffs[half].re;
        val += nyq * cn;
        der -= nyq * PI * self.n as f64 * sn;
        (val, der)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    /// Samples of `D^order` of the interpolant on a grid `factor` times finer.
    pub fn refined_values(&self, order: u32, factor: usize) -> Vec<f64> {
        let n = self.n;
        let big = n * factor;
        let half = n / 2;
        let mut data = vec![Complex64::new(0.0, 0.0); big];
        let ipow = |w: f64| Complex64::new(0.0, w).powu(order);
        if order == 0 {
            data[0] = self.coeffs[0];
        }
        for m in 1..half {
            let w = 2.0 * PI * m as f64;
            data[m] = self.coeffs[m] * ipow(w);
            data[big - m] = self.coeffs[m].conj() * ipow(-w);
        }
        let wn = PI * n as f64;
        let nyq = self.coeffs[half] * 0.5;
        if factor == 1 {
            data[half] = nyq * (ipow(wn) + ipow(-wn));
        } else {
            data[half] = nyq * ipow(wn);
            data[big - half] = nyq * ipow(-wn);
        }
        fft_in_place(&mut data, true);
        data.iter().map(|c| c.re).collect()
    }
}
