//! Transfer operators by collocation, their cocycles along an environment
//! window, equivariant densities by pullback and decay profiles.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::OmegaWindow;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::maps::MapFamilySpec;
use crate::numeric::linear_fit;
use core::f64::consts::PI;

pub const DEFAULT_RESOLUTION: usize = 256;
pub const MAX_DEFAULT_DEPTH: usize = 200;
/// Norms below this are treated as exact zeros by the decay fit.
pub const DECAY_FLOOR: f64 = 1e-13;
/// Tolerance on `|∫ f|` for mean-zero preconditions.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// Preimages of the grid under one map together with the collocation
/// weights. `J` and the `V` coefficient give `∂_ε L` (see [`Cocycle::apply_derivative`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferStencil {
    symbol: usize,
    eps: f64,
    resolution: usize,
    degree: usize,
    /// Row-major `[grid point][branch]`.
    ys: Vec<f64>,
    weights: Vec<f64>,
    /// `L` and `∂_ε L` as row-major `N × N` matrices acting on grid values.
    matrix: Vec<f64>,
    derivative_matrix: Vec<f64>,
}

/// Trigonometric interpolation kernel of an even grid of `n` points (Nyquist
/// mode as a cosine) and its derivative: `D(t) = sin(πnt) cot(πt)/n`.
fn dirichlet(t: f64, n: usize) -> (f64, f64) {
    let t = t - t.round();
    let nf = n as f64;
    if t.abs() < 0.25 / nf {
        // The closed form cancels badly near the grid point.
        let mut v = 1.0;
        let mut d = 0.0;
        for m in 1..n / 2 {
            let a = 2.0 * PI * m as f64;
            v += 2.0 * (a * t).cos();
            d -= 2.0 * a * (a * t).sin();
        }
        v += (PI * nf * t).cos();
        d -= PI * nf * (PI * nf * t).sin();
        return (v / nf, d / nf);
    }
    let (s, c) = (PI * t).sin_cos();
    let (sn, cn) = (PI * nf * t).sin_cos();
    (sn * c / (s * nf), PI * (cn * c / s - sn / (nf * s * s)))
}

impl TransferStencil {
    pub fn new(spec: &MapFamilySpec, symbol: usize, eps: f64, resolution: usize) -> Result<Self> {
        if resolution < 4 || !resolution.is_power_of_two() {
            return Err(Error::config(
                "grid_resolution",
                format!("must be a power of two ≥ 4, got {resolution}"),
            ));
        }
        let map = spec.symbol(symbol)?;
        let degree = map.degree as usize;
        let cap = resolution * degree;
        let (mut ys, mut weights) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        let n = resolution;
        let mut matrix = alloc::vec![0.0; n * n];
        let mut derivative_matrix = alloc::vec![0.0; n * n];
        for j in 0..n {
            let x = j as f64 / n as f64;
            let row = &mut matrix[j * n..(j + 1) * n];
            let drow = &mut derivative_matrix[j * n..(j + 1) * n];
            for b in spec.inverse_branches(symbol, eps, x)? {
                let y = b.y;
                let t1 = map.dx(eps, y, 1);
                let t2 = map.dx(eps, y, 2);
                let p = map.perturbation.eval(y, 0);
                let p1 = map.perturbation.eval(y, 1);
                let w = 1.0 / t1;
                let jc = -p1 / t1 + t2 * p / (t1 * t1);
                let vc = -p / t1;
                ys.push(y);
                weights.push(w);
                for i in 0..n {
                    let (k, dk) = dirichlet(y - i as f64 / n as f64, n);
                    row[i] += w * k;
                    drow[i] += w * (jc * k + vc * dk);
                }
            }
        }
        Ok(TransferStencil {
            symbol,
            eps,
            resolution,
            degree,
            ys,
            weights,
            matrix,
            derivative_matrix,
        })
    }

    pub fn symbol(&self) -> usize {
        self.symbol
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Preimages of grid point `j`.
    pub fn preimages(&self, j: usize) -> &[f64] {
        &self.ys[j * self.degree..(j + 1) * self.degree]
    }

    /// Weights `1/T′` at the preimages of grid point `j`.
    pub fn weights(&self, j: usize) -> &[f64] {
        &self.weights[j * self.degree..(j + 1) * self.degree]
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.resolution() != self.resolution {
            return Err(Error::config(
                "grid_resolution",
                format!(
                    "function has {} points, operator {}",
                    f.resolution(),
                    self.resolution
                ),
            ));
        }
        Ok(())
    }

    fn mat_vec(&self, m: &[f64], f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let n = self.resolution;
        let v = f.values();
        let values = m
            .chunks_exact(n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        GridFunction::new(values)
    }

    /// `(Lf)(x_j) = Σ_i f̃(y_i)/T′(y_i)` with `f̃` the trigonometric interpolant.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.mat_vec(&self.matrix, f)
    }

    /// `L(J f + V f) = Σ_i w_i [J(y_i) f̃(y_i) + V(y_i) f̃′(y_i)]`, the ε-derivative
    /// of `L_ε f` at this stencil's ε, with `J = −P′/T′ + T″P/T′²` and `V = −P/T′`.
    pub fn apply_derivative(&self, f: &GridFunction) -> Result<GridFunction> {
        self.mat_vec(&self.derivative_matrix, f)
    }
}

/// Which end of the window a composition starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `L^n_ω = L_{σ^{n−1}ω} ∘ … ∘ L_ω`.
    Forward,
    /// `L^n_{σ^{-n}ω} = L_{σ^{-1}ω} ∘ … ∘ L_{σ^{-n}ω}`.
    Pullback,
}

/// Transfer operators of every symbol at a fixed ε and resolution.
#[derive(Debug, Clone)]
pub struct Cocycle<'a> {
    spec: &'a MapFamilySpec,
    eps: f64,
    resolution: usize,
    stencils: Vec<TransferStencil>,
}

/// A density with its equivariance diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivariantDensity {
    pub density: GridFunction,
    pub depth: usize,
    /// `‖L_ω h_ω − h_{σω}‖_∞` with `h_{σω}` from a pullback of the same depth.
    pub residual: f64,
    pub min: f64,
    /// Set when `residual` exceeds the requested tolerance.
    pub suggested_depth: Option<usize>,
}

impl<'a> Cocycle<'a> {
    pub fn new(spec: &'a MapFamilySpec, eps: f64, resolution: usize) -> Result<Self> {
        spec.check_eps(eps)?;
        let stencils = (0..spec.alphabet_size())
            .map(|s| TransferStencil::new(spec, s, eps, resolution))
            .collect::<Result<Vec<_>>>()?;
        Ok(Cocycle {
            spec,
            eps,
            resolution,
            stencils,
        })
    }

    pub fn spec(&self) -> &'a MapFamilySpec {
        self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn stencil(&self, symbol: usize) -> Result<&TransferStencil> {
        self.spec.symbol(symbol)?;
        Ok(&self.stencils[symbol])
    }

    pub fn one(&self) -> GridFunction {
        GridFunction::constant(self.resolution, 1.0)
    }

    /// `L_{s,ε} f` for a symbol `s`.
    pub fn apply(&self, symbol: usize, f: &GridFunction) -> Result<GridFunction> {
        self.stencil(symbol)?.apply(f)
    }

    /// `∂_ε L_{s,ε} f` at the cocycle's ε; at ε = 0 this is `L̂_s f`.
    pub fn apply_derivative(&self, symbol: usize, f: &GridFunction) -> Result<GridFunction> {
        self.stencil(symbol)?.apply_derivative(f)
    }

    /// `L_{σ^{rel}ω} f`.
    pub fn apply_at(
        &self,
        window: &OmegaWindow,
        rel: i64,
        f: &GridFunction,
    ) -> Result<GridFunction> {
        self.apply(self.spec.symbol_at(window, rel)?, f)
    }

    /// Applies the maps at relative positions `from, from+1, …, to−1` in order.
    pub fn run(
        &self,
        window: &OmegaWindow,
        from: i64,
        to: i64,
        f: &GridFunction,
    ) -> Result<GridFunction> {
        if to > from {
            window.require(from, to - 1)?;
        }
        let mut g = f.clone();
        for rel in from..to {
            g = self.apply_at(window, rel, &g)?;
        }
        Ok(g)
    }

    pub fn cocycle_apply(
        &self,
        window: &OmegaWindow,
        n: usize,
        f: &GridFunction,
        direction: Direction,
    ) -> Result<GridFunction> {
        let n = n as i64;
        match direction {
            Direction::Forward => self.run(window, 0, n, f),
            Direction::Pullback => self.run(window, -n, 0, f),
        }
    }

    /// `L^depth_{σ^{-depth}σ^{rel}ω} 𝟙`, normalised.
    pub fn density_at(&self, window: &OmegaWindow, rel: i64, depth: usize) -> Result<GridFunction> {
        if depth == 0 {
            return Err(Error::config("pullback_depth", "must be at least 1"));
        }
        self.run(window, rel - depth as i64, rel, &self.one())?
            .normalized()
    }

    /// Densities `h_{σ^{p}ω}` for `p = from..=to`, from one pullback chain
    /// started `depth` steps before `from`.
    pub fn density_chain(
        &self,
        window: &OmegaWindow,
        from: i64,
        to: i64,
        depth: usize,
    ) -> Result<Vec<GridFunction>> {
        if depth == 0 {
            return Err(Error::config("pullback_depth", "must be at least 1"));
        }
        let start = from - depth as i64;
        if to > start {
            window.require(start, to - 1)?;
        }
        let mut g = self.run(window, start, from, &self.one())?;
        let mut out = Vec::with_capacity((to - from + 1).max(0) as usize);
        for p in from..=to {
            if p > from {
                g = self.apply_at(window, p - 1, &g)?;
            }
            g = g.normalized()?;
            out.push(g.clone());
        }
        Ok(out)
    }

    /// `h_{ω,ε}` by pullback with the equivariance residual. `tol` sets the
    /// residual above which a larger depth is suggested.
    pub fn equivariant_density(
        &self,
        window: &OmegaWindow,
        depth: usize,
        tol: f64,
    ) -> Result<EquivariantDensity> {
        let h = self.density_at(window, 0, depth)?;
        let h_next = self.density_at(window, 1, depth)?;
        let residual = self.apply_at(window, 0, &h)?.sub(&h_next).sup_norm();
        let min = h.refined_min();
        if !(min > 0.0) {
            return Err(Error::NonPositive { min });
        }
        let suggested_depth = (residual > tol)
            .then(|| (2 * depth).min(window.half_width().saturating_sub(1).max(depth + 1)));
        Ok(EquivariantDensity {
            density: h,
            depth,
            residual,
            min,
            suggested_depth,
        })
    }

    /// Smallest `n` with `Π_{j=1}^n γ_{σ^{-j}ω}^{-1} ≤ 1e-12`, capped at 200
    /// and by the window.
    pub fn default_depth(&self, window: &OmegaWindow) -> Result<usize> {
        default_depth(self.spec, window)
    }

    /// Forward norms `‖L^n_ω f‖_∞` for `n = 1..=n_max` and the fitted decay.
    pub fn decay_profile(
        &self,
        window: &OmegaWindow,
        f: &GridFunction,
        n_max: usize,
        beta: f64,
    ) -> Result<DecayFit> {
        let mean = f.integral();
        if mean.abs() > MEAN_ZERO_TOL {
            return Err(Error::Precondition(format!(
                "decay profile needs ∫f = 0, got {mean:e}"
            )));
        }
        window.require(0, n_max as i64 - 1)?;
        let mut g = f.clone();
        let mut norms = Vec::with_capacity(n_max);
        for n in 0..n_max {
            g = self.apply_at(window, n as i64, &g)?;
            norms.push(g.sup_norm());
        }
        Ok(DecayFit::fit(norms, f.c1_norm(), beta))
    }
}

pub fn default_depth(spec: &MapFamilySpec, window: &OmegaWindow) -> Result<usize> {
    let mut prod = 1.0;
    let cap = MAX_DEFAULT_DEPTH.min(window.half_width() as usize);
    for n in 1..=cap {
        let s = spec.symbol_at(window, -(n as i64))?;
        prod /= spec.min_expansion(s)?;
        if prod <= 1e-12 {
            return Ok(n);
        }
    }
    Ok(cap)
}

/// Decay of `‖L^n f‖_∞` with an exponential fit and a polynomial envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// `‖L^n f‖_∞` for `n = 1..=n_max`.
    pub norms: Vec<f64>,
    /// `λ` in `‖L^n f‖ ≈ C λ^n`, fitted on the norms above the floor;
    /// `Some(0.0)` for exact-zero decay, `None` if fewer than two usable points.
    pub fitted_lambda: Option<f64>,
    /// `(C₁, β)` with `‖L^n f‖_∞ ≤ C₁ n^{-β} ‖f‖_{C¹}` at every sample.
    pub fitted_c1_beta: (f64, f64),
    pub exact_zero: bool,
    pub f_c1: f64,
}

impl DecayFit {
    pub fn fit(norms: Vec<f64>, f_c1: f64, beta: f64) -> Self {
        let exact_zero = norms.iter().all(|v| *v <= DECAY_FLOOR);
        let (xs, ys): (Vec<f64>, Vec<f64>) = norms
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > DECAY_FLOOR)
            .map(|(i, v)| ((i + 1) as f64, v.ln()))
            .unzip();
        let fitted_lambda = if exact_zero {
            Some(0.0)
        } else {
            linear_fit(&xs, &ys).map(|(_, slope)| slope.exp())
        };
        let c1 = if f_c1 > 0.0 {
            norms
                .iter()
                .enumerate()
                .map(|(i, v)| ((i + 1) as f64).powf(beta) * v / f_c1)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        DecayFit {
            norms,
            fitted_lambda,
            fitted_c1_beta: (c1, beta),
            exact_zero,
            f_c1,
        }
    }

    /// `C₁ n^{-β} ‖f‖_{C¹}`.
    pub fn envelope(&self, n: usize) -> f64 {
        let (c1, beta) = self.fitted_c1_beta;
        c1 * (n as f64).powf(-beta) * self.f_c1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::SymbolMap;
    use crate::trig::TrigPoly;
    use alloc::vec;
    use core::f64::consts::PI;

    fn doubling() -> MapFamilySpec {
        MapFamilySpec::new(vec![SymbolMap::linear(2)], 0.05).unwrap()
    }

    #[test]
    fn doubling_fourier_modes() {
        let spec = doubling();
        let c = Cocycle::new(&spec, 0.0, 64).unwrap();
        let e1 = GridFunction::from_fn(64, |x| (2.0 * PI * x).cos());
        let e2 = GridFunction::from_fn(64, |x| (4.0 * PI * x).cos());
        assert!(c.apply(0, &c.one()).unwrap().sub(&c.one()).sup_norm() < 1e-14);
        assert!(c.apply(0, &e1).unwrap().sup_norm() < 1e-13);
        assert!(c.apply(0, &e2).unwrap().sub(&e1).sup_norm() < 1e-13);
    }

    #[test]
    fn derivative_operator_on_sin4() {
        let spec = MapFamilySpec::new(
            vec![SymbolMap::new(
                2,
                0.0,
                TrigPoly::zero(),
                TrigPoly::sin(2, 1.0),
            )],
            0.05,
        )
        .unwrap();
        let c = Cocycle::new(&spec, 0.0, 64).unwrap();
        let d = c.apply_derivative(0, &c.one()).unwrap();
        let expected = GridFunction::from_fn(64, |x| -2.0 * PI * (2.0 * PI * x).cos());
        assert!(d.sub(&expected).sup_norm() < 1e-12);
    }

    #[test]
    fn decay_of_zero_is_exact() {
        let spec = doubling();
        let c = Cocycle::new(&spec, 0.0, 32).unwrap();
        let w = OmegaWindow::constant(0, 20);
        let fit = c
            .decay_profile(&w, &GridFunction::zeros(32), 10, 1.0)
            .unwrap();
        assert!(fit.exact_zero);
        assert_eq!(fit.fitted_lambda, Some(0.0));
        assert!(c.decay_profile(&w, &c.one(), 5, 1.0).is_err());
    }

    #[test]
    fn default_depth_for_doubling() {
        let spec = doubling();
        // 2^{-40} ≈ 9.1e-13.
        assert_eq!(
            default_depth(&spec, &OmegaWindow::constant(0, 300)).unwrap(),
            40
        );
        assert_eq!(
            default_depth(&spec, &OmegaWindow::constant(0, 10)).unwrap(),
            10
        );
    }
}
