//! Trigonometric families of full-branch expanding circle maps
//! `T_{ω,ε}(x) = k x + a + g₀(x) + ε P(x) mod 1`, their inverse branches and
//! regularity constants.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::OmegaWindow;
use crate::error::{Error, Result};
use crate::numeric::{circle_distance, frac};
use crate::trig::TrigPoly;

/// Residual tolerance of branch inversion, in the circle metric.
pub const INVERSION_TOL: f64 = 1e-13;
/// Newton iteration budget per branch.
pub const MAX_NEWTON_ITERS: usize = 50;
/// Largest number of composite branches that may be enumerated.
pub const BRANCH_CAP: u64 = 1 << 16;
/// Grid used to scan for the minimum expansion and the sup norms.
pub const SCAN_POINTS: usize = 4096;
/// Number of ε values sampled when a quantity is not affine in ε.
const EPS_LATTICE: usize = 17;

/// Map data attached to one symbol of the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMap {
    pub degree: u32,
    pub drift: f64,
    pub base: TrigPoly,
    pub perturbation: TrigPoly,
}

impl SymbolMap {
    pub fn new(degree: u32, drift: f64, base: TrigPoly, perturbation: TrigPoly) -> Self {
        SymbolMap {
            degree,
            drift,
            base,
            perturbation,
        }
    }

    /// Linear map `x ↦ kx mod 1`.
    pub fn linear(degree: u32) -> Self {
        SymbolMap::new(degree, 0.0, TrigPoly::zero(), TrigPoly::zero())
    }

    /// Lift `F(x) = kx + a + g₀(x) + εP(x)` (not reduced).
    #[inline]
    pub fn lift(&self, eps: f64, x: f64) -> f64 {
        self.degree as f64 * x
            + self.drift
            + self.base.eval(x, 0)
            + eps * self.perturbation.eval(x, 0)
    }

    /// `∂ₓ^order T` for `order ≥ 1`.
    #[inline]
    pub fn dx(&self, eps: f64, x: f64, order: u32) -> f64 {
        debug_assert!(order >= 1);
        let linear = if order == 1 { self.degree as f64 } else { 0.0 };
        linear + self.base.eval(x, order) + eps * self.perturbation.eval(x, order)
    }

    /// Mixed derivative `∂ₓ^dx ∂_ε^de T`; the `(0, 0)` value is reduced mod 1.
    pub fn derivative(&self, eps: f64, x: f64, dx: u32, de: u32) -> f64 {
        match (dx, de) {
            (0, 0) => frac(self.lift(eps, x)),
            (_, 0) => self.dx(eps, x, dx),
            (_, 1) => self.perturbation.eval(x, dx),
            _ => 0.0,
        }
    }

    /// `min_x ∂ₓT` at a fixed ε, by grid scan and Newton polish of the grid
    /// minima.
    fn min_derivative(&self, eps: f64) -> f64 {
        let n = SCAN_POINTS;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..n).map(|j| self.dx(eps, j as f64 * h, 1)).collect();
        let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..n {
            let (l, r) = (vals[(j + n - 1) % n], vals[(j + 1) % n]);
            if vals[j] > l || vals[j] > r {
                continue;
            }
            let mut x = j as f64 * h;
            for _ in 0..20 {
                let d2 = self.dx(eps, x, 2);
                let d3 = self.dx(eps, x, 3);
                if d3 <= 0.0 {
                    break;
                }
                let step = d2 / d3;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            if circle_distance(x, j as f64 * h) <= h {
                best = best.min(self.dx(eps, x, 1));
            }
        }
        best
    }

    /// `sup_x |p(x)|` for a function with derivative bounded by `lip`, as a
    /// grid maximum plus the half-spacing Lipschitz correction.
    fn certified_sup(f: impl Fn(f64) -> f64, lip: f64) -> f64 {
        let h = 1.0 / SCAN_POINTS as f64;
        let m = (0..SCAN_POINTS)
            .map(|j| f(j as f64 * h).abs())
            .fold(0.0, f64::max);
        m + 0.5 * h * lip
    }

    /// `sup_x |∂ₓ^order T_ε|` with `order ≥ 1`.
    fn sup_dx(&self, eps: f64, order: u32) -> f64 {
        let lip = self.base.derivative_bound(order + 1)
            + eps.abs() * self.perturbation.derivative_bound(order + 1);
        Self::certified_sup(|x| self.dx(eps, x, order), lip)
    }

    fn sup_perturbation(&self, order: u32) -> f64 {
        let lip = self.perturbation.derivative_bound(order + 1);
        Self::certified_sup(|x| self.perturbation.eval(x, order), lip)
    }

    /// Derivatives `φ, φ′, …, φ⁽⁴⁾` of `φ = −ln T′` at `x`.
    pub fn log_jacobian_jet(&self, eps: f64, x: f64) -> [f64; 5] {
        let u: [f64; 5] = core::array::from_fn(|j| self.dx(eps, x, j as u32 + 1));
        // L = ln u;  u L^{(n+1)} = u^{(n+1)} − Σ_{k=1}^{n} C(n,k) u^{(k)} L^{(n+1−k)}.
        let binom = [
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 3.0, 3.0, 1.0],
        ];
        let mut l = [0.0; 5];
        l[0] = u[0].ln();
        for n in 0..4 {
            let mut s = u[n + 1];
            for k in 1..=n {
                s -= binom[n][k] * u[k] * l[n + 1 - k];
            }
            l[n + 1] = s / u[0];
        }
        l.map(|v| -v)
    }
}

/// Jet of one inverse branch at a point `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchJet {
    pub branch_index: usize,
    pub y: f64,
    pub dy: f64,
    pub d2y: f64,
    pub d3y: f64,
    pub d4y: f64,
    pub de_y: f64,
}

impl BranchJet {
    /// Jet of `self ∘ inner`, where `self` is evaluated at `inner.y`.
    pub fn compose(&self, inner: &BranchJet, branch_index: usize) -> BranchJet {
        let (u1, u2, u3, u4) = (inner.dy, inner.d2y, inner.d3y, inner.d4y);
        let (z1, z2, z3, z4) = (self.dy, self.d2y, self.d3y, self.d4y);
        BranchJet {
            branch_index,
            y: self.y,
            dy: z1 * u1,
            d2y: z2 * u1 * u1 + z1 * u2,
            d3y: z3 * u1.powi(3) + 3.0 * z2 * u1 * u2 + z1 * u3,
            d4y: z4 * u1.powi(4)
                + 6.0 * z3 * u1 * u1 * u2
                + z2 * (3.0 * u2 * u2 + 4.0 * u1 * u3)
                + z1 * u4,
            de_y: self.de_y + z1 * inner.de_y,
        }
    }
}

/// A random family: one [`SymbolMap`] per symbol and a common parameter
/// interval `(−eps_max, eps_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamilySpec {
    symbols: Vec<SymbolMap>,
    eps_max: f64,
    gammas: Vec<f64>,
}

impl MapFamilySpec {
    /// Validates the family and certifies uniform expansion `γ > 1` for every
    /// symbol.
    pub fn new(symbols: Vec<SymbolMap>, eps_max: f64) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::config("symbols", "at least one symbol is required"));
        }
        if !(eps_max.is_finite() && eps_max > 0.0) {
            return Err(Error::config(
                "eps_max",
                format!("must be positive and finite, got {eps_max}"),
            ));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.degree < 2 {
                return Err(Error::config(
                    format!("symbols[{i}].degree"),
                    format!("must be at least 2, got {}", s.degree),
                ));
            }
            if !(0.0..1.0).contains(&s.drift) {
                return Err(Error::config(
                    format!("symbols[{i}].drift"),
                    format!("must lie in [0, 1), got {}", s.drift),
                ));
            }
            if !s.base.all_finite() || !s.perturbation.all_finite() {
                return Err(Error::config(
                    format!("symbols[{i}]"),
                    "non-finite amplitude",
                ));
            }
        }
        let gammas: Vec<f64> = symbols
            .iter()
            .map(|s| s.min_derivative(-eps_max).min(s.min_derivative(eps_max)))
            .collect();
        for (i, g) in gammas.iter().enumerate() {
            if !(*g > 1.0) {
                return Err(Error::config(
                    format!("symbols[{i}]"),
                    format!("minimum expansion {g} over |ε| ≤ {eps_max} is not above 1"),
                ));
            }
        }
        Ok(MapFamilySpec {
            symbols,
            eps_max,
            gammas,
        })
    }

    pub fn symbols(&self) -> &[SymbolMap] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.symbols.len()
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    /// Whether every perturbation profile vanishes.
    pub fn is_unperturbed(&self) -> bool {
        self.symbols.iter().all(|s| s.perturbation.is_zero())
    }

    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if eps.is_finite() && (eps == 0.0 || eps.abs() < self.eps_max) {
            Ok(())
        } else {
            Err(Error::EpsilonDomain {
                eps,
                eps_max: self.eps_max,
            })
        }
    }

    pub fn symbol(&self, symbol: usize) -> Result<&SymbolMap> {
        self.symbols.get(symbol).ok_or_else(|| {
            Error::config(
                "symbol",
                format!(
                    "index {symbol} outside alphabet of size {}",
                    self.symbols.len()
                ),
            )
        })
    }

    /// Symbol index of `window` at relative position `rel`.
    pub fn symbol_at(&self, window: &OmegaWindow, rel: i64) -> Result<usize> {
        let s = window.symbol(rel)? as usize;
        self.symbol(s)?;
        Ok(s)
    }

    /// `∂ₓ^dx ∂_ε^de T_{s,ε}(x)` with `dx ≤ 5`, `de ≤ 2`.
    pub fn evaluate(&self, symbol: usize, eps: f64, x: f64, dx: u32, de: u32) -> Result<f64> {
        self.check_eps(eps)?;
        if dx > 5 || de > 2 {
            return Err(Error::config(
                "order",
                format!("({dx}, {de}) outside (0..=5, 0..=2)"),
            ));
        }
        Ok(self.symbol(symbol)?.derivative(eps, x, dx, de))
    }

    /// Certified `min_{x, |ε| ≤ eps_max} T′`.
    pub fn min_expansion(&self, symbol: usize) -> Result<f64> {
        self.symbol(symbol)?;
        Ok(self.gammas[symbol])
    }

    /// The `k` preimages of `x` ordered by lift interval, with their jets.
    pub fn inverse_branches(&self, symbol: usize, eps: f64, x: f64) -> Result<Vec<BranchJet>> {
        self.check_eps(eps)?;
        let map = self.symbol(symbol)?;
        let x = frac(x);
        let k = map.degree as usize;
        let f0 = map.lift(eps, 0.0);
        let m0 = (f0 - x).ceil();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let target = x + m0 + i as f64;
            let y = solve_branch(map, eps, target, f0).ok_or_else(|| Error::Inversion {
                symbol,
                branch: i,
                x,
                residual: f64::NAN,
            })?;
            let residual = circle_distance(map.lift(eps, y), x);
            // Forming `target` rounds at the scale of the lift.
            if residual > INVERSION_TOL + 4.0 * f64::EPSILON * target.abs().max(1.0) {
                return Err(Error::Inversion {
                    symbol,
                    branch: i,
                    x,
                    residual,
                });
            }
            out.push(branch_jet(map, eps, i, y));
        }
        Ok(out)
    }

    /// Preimages `y_i` of `x` with `T′(y_i)`, without the higher jets.
    /// Clears and fills `out`.
    pub fn branch_points(
        &self,
        symbol: usize,
        eps: f64,
        x: f64,
        out: &mut Vec<(f64, f64)>,
    ) -> Result<()> {
        let map = self.symbol(symbol)?;
        let x = frac(x);
        let f0 = map.lift(eps, 0.0);
        let m0 = (f0 - x).ceil();
        out.clear();
        for i in 0..map.degree as usize {
            let target = x + m0 + i as f64;
            let y = solve_branch(map, eps, target, f0).ok_or(Error::Inversion {
                symbol,
                branch: i,
                x,
                residual: f64::NAN,
            })?;
            out.push((y, map.dx(eps, y, 1)));
        }
        Ok(())
    }

    /// All composite branches of `T^n_{σ^{-n}ω,ε} = T_{σ^{-1}ω} ∘ … ∘ T_{σ^{-n}ω}`
    /// at `x`. Branch `i` is encoded in mixed radix with the outermost
    /// inversion as the most significant digit.
    pub fn branch_jet_composition(
        &self,
        window: &OmegaWindow,
        eps: f64,
        n: usize,
        x: f64,
    ) -> Result<Vec<BranchJet>> {
        self.check_eps(eps)?;
        window.require(-(n as i64), -1)?;
        let mut count: u64 = 1;
        for j in 1..=n {
            let s = self.symbol_at(window, -(j as i64))?;
            count = count.saturating_mul(self.symbols[s].degree as u64);
            if count > BRANCH_CAP {
                return Err(Error::BranchCap {
                    count,
                    cap: BRANCH_CAP,
                });
            }
        }
        let mut current = vec![BranchJet {
            branch_index: 0,
            y: frac(x),
            dy: 1.0,
            d2y: 0.0,
            d3y: 0.0,
            d4y: 0.0,
            de_y: 0.0,
        }];
        for j in 1..=n {
            let s = self.symbol_at(window, -(j as i64))?;
            let k = self.symbols[s].degree as usize;
            let mut next = Vec::with_capacity(current.len() * k);
            for inner in &current {
                for z in self.inverse_branches(s, eps, inner.y)? {
                    next.push(z.compose(inner, inner.branch_index * k + z.branch_index));
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Per-symbol constants derived from `γ` and the certified sup norms.
    pub fn regularity_constants(&self, symbol: usize) -> Result<RegularityConstants> {
        let map = self.symbol(symbol)?;
        Ok(RegularityConstants::compute(
            map,
            self.gammas[symbol],
            self.eps_max,
        ))
    }
}

/// Safeguarded Newton iteration for `F(y) = target` on `[0, 1]`, seeded at the
/// linear preimage.
fn solve_branch(map: &SymbolMap, eps: f64, target: f64, f0: f64) -> Option<f64> {
    let k = map.degree as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut y = ((target - f0) / k).clamp(0.0, 1.0);
    for _ in 0..MAX_NEWTON_ITERS {
        let r = map.lift(eps, y) - target;
        if r.abs() <= INVERSION_TOL {
            return Some(if y >= 1.0 { 0.0 } else { y });
        }
        if r < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let step = r / map.dx(eps, y, 1);
        let cand = y - step;
        y = if cand > lo && cand < hi {
            cand
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-300 {
            break;
        }
    }
    let r = map.lift(eps, y) - target;
    (r.abs() <= INVERSION_TOL).then_some(if y >= 1.0 { 0.0 } else { y })
}

fn branch_jet(map: &SymbolMap, eps: f64, branch_index: usize, y: f64) -> BranchJet {
    let t1 = map.dx(eps, y, 1);
    let t2 = map.dx(eps, y, 2);
    let t3 = map.dx(eps, y, 3);
    let t4 = map.dx(eps, y, 4);
    let dy = 1.0 / t1;
    let d2y = -t2 * dy.powi(3);
    let d3y = -(t3 * dy.powi(3) + 3.0 * t2 * d2y * dy) / t1;
    let d4y =
        -(t4 * dy.powi(4) + 6.0 * t3 * dy * dy * d2y + t2 * (3.0 * d2y * d2y + 4.0 * dy * d3y))
            / t1;
    BranchJet {
        branch_index,
        y,
        dy,
        d2y,
        d3y,
        d4y,
        de_y: -map.perturbation.eval(y, 0) / t1,
    }
}

/// Constants attached to one symbol. Sup norms over `x` are grid-certified;
/// sups over ε are taken at `±eps_max` where the quantity is affine in ε and
/// over a lattice otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    /// Minimum expansion `γ`.
    pub gamma: f64,
    /// `C⁵` bound `𝒜` of the family data.
    pub a_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `‖φ‖_{C¹}` with `φ = −ln T′`.
    pub b: f64,
    /// `‖φ‖_{C⁴}`.
    pub b4: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Second-order perturbation constant `C₃`.
    pub c3_pert: f64,
    /// `sup ‖T″‖_∞` over the parameter interval.
    pub q: f64,
    /// Single-branch distortion `c = q γ⁻²`, bounding `‖y″/y′‖_∞`.
    pub distortion: f64,
    /// `E = k/γ`, bounding the transfer operator weights `Σ 1/T′`.
    pub expansion_sum: f64,
    /// First-order constant `q̄` with `‖(L_ε − L)g‖_∞ ≤ |ε| q̄ ‖g‖_{C¹}`.
    pub q_bar: f64,
}

impl RegularityConstants {
    fn compute(map: &SymbolMap, gamma: f64, eps_max: f64) -> Self {
        let gi = 1.0 / gamma;
        let at_ends = |order: u32| map.sup_dx(eps_max, order).max(map.sup_dx(-eps_max, order));
        let mut a_bound = 1.0f64;
        for order in 1..=5 {
            a_bound = a_bound.max(at_ends(order));
        }
        for order in 0..=4 {
            a_bound = a_bound.max(map.sup_perturbation(order));
        }
        let q = at_ends(2);

        let (mut b, mut b4) = (0.0f64, 0.0f64);
        let h = 1.0 / SCAN_POINTS as f64;
        for e in 0..EPS_LATTICE {
            let eps = eps_max * (2.0 * e as f64 / (EPS_LATTICE - 1) as f64 - 1.0);
            for j in 0..SCAN_POINTS {
                let jet = map.log_jacobian_jet(eps, j as f64 * h);
                b = b.max(jet[0].abs()).max(jet[1].abs());
                b4 = jet.iter().fold(b4, |m, v| m.max(v.abs()));
            }
        }

        let a = a_bound;
        let c1 = gi * (1.0 + gi * gi * a);
        let c2 = gi * (1.0 + a * gi.powi(3) + 3.0 * a * c1 * gi);
        let c3 = gi * (1.0 + a * (1.0 + gi) * (c1 * c1 + c2) + a * gi * gi * c1 + a * gi.powi(4));

        let k0 = a;
        let k1 = 2.0 * (gi + gi.powi(2) + gi.powi(3)) * k0 * k0;
        let k2 = (1..=5).map(|p| gi.powi(p)).sum::<f64>() * k0.powi(5);
        let expansion_sum = map.degree as f64 * gi;
        let k3 = expansion_sum * (1.0f64).max(gi + q * gi * gi);
        let c3_pert = k3 * (k0 * k1 * k2 + k2 * k2 + (k0 * k1).powi(2));

        let q_pert = map.sup_perturbation(1) + map.sup_perturbation(0) * (1.0 + gi);
        let q_bar = expansion_sum * q_pert * (1.0 + gi + gi * q);

        RegularityConstants {
            gamma,
            a_bound,
            c1,
            c2,
            c3,
            b,
            b4,
            k0,
            k1,
            k2,
            k3,
            c3_pert,
            q,
            distortion: q * gi * gi,
            expansion_sum,
            q_bar,
        }
    }
}
