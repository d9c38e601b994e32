//! Cone diagnostics: the parameter `Q_ω`, log-Lipschitz cone membership,
//! the Hilbert metric of the positive cone, contraction profiles and
//! distortion bounds.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::OmegaWindow;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::maps::{MapFamilySpec, BRANCH_CAP};
use crate::numeric::{circle_distance, pairwise_sum};
use crate::transfer::Cocycle;

pub const DEFAULT_STEEPNESS: f64 = 3.0;
/// Largest grid for which all-pairs membership checks are allowed.
pub const ALL_PAIRS_MAX: usize = 64;

/// Parameters of the cone `C_ω = {g > 0 : g(x) ≤ g(y) e^{s Q_ω d(x,y)}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeParams {
    pub s: f64,
    pub q: f64,
    /// `‖φ‖_{C¹}` per symbol.
    pub b_per_symbol: Vec<f64>,
    pub truncation_k: usize,
    /// Bound on the dropped part of the series for `Q`.
    pub tail: f64,
}

impl ConeParams {
    pub fn log_lipschitz_bound(&self) -> f64 {
        self.s * self.q
    }
}

/// `Q_ω = Σ_{k=1}^{K} B_{σ^{-k}ω} Π_{j≤k} γ_{σ^{-j}ω}^{-1}` with the certified
/// per-symbol `B = ‖φ‖_{C¹}`.
pub fn cone_q(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    s: f64,
    truncation_k: usize,
) -> Result<ConeParams> {
    let b: Vec<f64> = (0..spec.alphabet_size())
        .map(|i| spec.regularity_constants(i).map(|r| r.b))
        .collect::<Result<_>>()?;
    cone_q_with(spec, window, s, truncation_k, &b)
}

/// [`cone_q`] with caller-supplied `B` per symbol.
pub fn cone_q_with(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    s: f64,
    truncation_k: usize,
    b_per_symbol: &[f64],
) -> Result<ConeParams> {
    if !(s > 2.0) {
        return Err(Error::config("cone_s", format!("must exceed 2, got {s}")));
    }
    if b_per_symbol.len() != spec.alphabet_size() || b_per_symbol.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::config(
            "b_per_symbol",
            "one non-negative value per symbol required",
        ));
    }
    if truncation_k == 0 {
        return Err(Error::config("truncation_k", "must be at least 1"));
    }
    window.require(-(truncation_k as i64), -1)?;
    let mut prod = 1.0;
    let mut terms = Vec::with_capacity(truncation_k);
    for k in 1..=truncation_k {
        let sym = spec.symbol_at(window, -(k as i64))?;
        prod /= spec.min_expansion(sym)?;
        terms.push(b_per_symbol[sym] * prod);
    }
    let gamma_min = (0..spec.alphabet_size())
        .map(|i| spec.min_expansion(i))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let b_max = b_per_symbol.iter().copied().fold(0.0, f64::max);
    let gi = 1.0 / gamma_min;
    Ok(ConeParams {
        s,
        q: pairwise_sum(&terms),
        b_per_symbol: b_per_symbol.to_vec(),
        truncation_k,
        tail: b_max * prod * gi / (1.0 - gi),
    })
}

/// How membership is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipMode {
    /// `‖(ln f)′‖_∞ ≤ sQ` on the refined grid.
    Derivative,
    /// Every pair of grid points; only for resolutions up to 64.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Estimated log-Lipschitz constant of `f`.
    pub log_lipschitz: f64,
    pub bound: f64,
    /// Pair `(x, y)` with the largest `|ln f(x) − ln f(y)|/d(x, y)` found.
    pub witness: Option<(f64, f64)>,
}

fn positive_refined(f: &GridFunction) -> Result<Vec<f64>> {
    let v = f.refined_values(0);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositive { min });
    }
    Ok(v)
}

pub fn cone_membership(
    f: &GridFunction,
    params: &ConeParams,
    mode: MembershipMode,
) -> Result<Membership> {
    let bound = params.log_lipschitz_bound();
    match mode {
        MembershipMode::Derivative => {
            let v = positive_refined(f)?;
            let d = f.refined_values(1);
            let lip = v
                .iter()
                .zip(&d)
                .map(|(a, b)| (b / a).abs())
                .fold(0.0, f64::max);
            let m = v.len();
            let h = 1.0 / m as f64;
            let (mut best, mut pair) = (0.0f64, None);
            for i in 0..m {
                let q = (v[(i + 1) % m].ln() - v[i].ln()).abs() / h;
                if q > best || pair.is_none() {
                    best = q.max(best);
                    pair = Some((i as f64 * h, ((i + 1) % m) as f64 * h));
                }
            }
            let member = lip <= bound;
            Ok(Membership {
                member,
                log_lipschitz: lip,
                bound,
                witness: if member { None } else { pair },
            })
        }
        MembershipMode::AllPairs => {
            let n = f.resolution();
            if n > ALL_PAIRS_MAX {
                return Err(Error::config(
                    "resolution",
                    format!("all-pairs mode needs at most {ALL_PAIRS_MAX} points, got {n}"),
                ));
            }
            let v = f.values();
            if let Some(min) = v.iter().copied().find(|x| !(*x > 0.0)) {
                return Err(Error::NonPositive { min });
            }
            let (mut lip, mut pair) = (0.0f64, None);
            for i in 0..n {
                for j in (i + 1)..n {
                    let (x, y) = (f.x(i), f.x(j));
                    let q = (v[i].ln() - v[j].ln()).abs() / circle_distance(x, y);
                    if q > lip {
                        lip = q;
                        pair = Some((x, y));
                    }
                }
            }
            let member = lip <= bound;
            Ok(Membership {
                member,
                log_lipschitz: lip,
                bound,
                witness: if member { None } else { pair },
            })
        }
    }
}

/// `ln(sup(f/g)·sup(g/f))` on the refined grid.
pub fn hilbert_metric_positive(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let a = positive_refined(f)?;
    let b = positive_refined(g)?;
    if a.len() != b.len() {
        return Err(Error::config(
            "resolution",
            "functions live on different grids",
        ));
    }
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(&b) {
        up = up.max(x / y);
        down = down.max(y / x);
    }
    Ok((up * down).ln().max(0.0))
}

/// Hilbert distances along the forward cocycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProfile {
    /// `d(L^n f, L^n g)` for `n = 0..=n_max`.
    pub d: Vec<f64>,
    /// `d(L^n f, h_{σⁿω})`.
    pub d_to_density: Vec<f64>,
    /// `‖L^n f/m(f) − h_{σⁿω}‖_∞`.
    pub sup_gap: Vec<f64>,
    /// `‖h_{σⁿω}‖_∞`.
    pub density_sup: Vec<f64>,
}

impl ContractionProfile {
    /// Whether `d` is non-increasing up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.d.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// The projective-to-uniform conversion
    /// `‖L^n f/m(f) − h‖_∞ ≤ (e^{d} − 1)‖h‖_∞ + 1e-8` wherever `d ≤ 1`, with
    /// `d` the distance to the density. Returns the worst margin (≤ 0 passes).
    pub fn conversion_margin(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.d.len() {
            let d = self.d_to_density[i];
            if d <= 1.0 {
                let bound = (d.exp() - 1.0) * self.density_sup[i] + 1e-8;
                worst = worst.max(self.sup_gap[i] - bound);
            }
        }
        worst
    }
}

pub fn contraction_profile(
    cocycle: &Cocycle<'_>,
    window: &OmegaWindow,
    f: &GridFunction,
    g: &GridFunction,
    n_max: usize,
    depth: usize,
) -> Result<ContractionProfile> {
    let hs = cocycle.density_chain(window, 0, n_max as i64, depth)?;
    let mass = f.integral();
    if !(mass > 0.0) {
        return Err(Error::NonPositive { min: mass });
    }
    let (mut fa, mut ga) = (f.clone(), g.clone());
    let mut out = ContractionProfile {
        d: Vec::with_capacity(n_max + 1),
        d_to_density: Vec::with_capacity(n_max + 1),
        sup_gap: Vec::with_capacity(n_max + 1),
        density_sup: Vec::with_capacity(n_max + 1),
    };
    for n in 0..=n_max {
        if n > 0 {
            fa = cocycle.apply_at(window, n as i64 - 1, &fa)?;
            ga = cocycle.apply_at(window, n as i64 - 1, &ga)?;
        }
        out.d.push(hilbert_metric_positive(&fa, &ga)?);
        out.d_to_density.push(hilbert_metric_positive(&fa, &hs[n])?);
        out.sup_gap
            .push(fa.scale(1.0 / mass).sub(&hs[n]).sup_norm());
        out.density_sup.push(hs[n].sup_norm());
    }
    Ok(out)
}

/// Partial sums `Σ_{k=1}^{m} c(σ^{-k}ω) Π_{j<k} γ_{σ^{-j}ω}^{-1}` for
/// `m = 1..=n`.
pub fn distortion_series(spec: &MapFamilySpec, window: &OmegaWindow, n: usize) -> Result<Vec<f64>> {
    window.require(-(n as i64), -1)?;
    let mut prod = 1.0;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let sym = spec.symbol_at(window, -(k as i64))?;
        acc += spec.regularity_constants(sym)?.distortion * prod;
        out.push(acc);
        prod /= spec.min_expansion(sym)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    /// Depth actually used (reduced when the branch cap would be exceeded).
    pub n: usize,
    /// `max |y″/y′|` over composite branches and sampled points.
    pub max_ratio: f64,
    pub bound: f64,
    /// `‖L^n_{σ^{-n}ω,ε} 𝟙‖_∞`.
    pub pullback_sup: f64,
    /// `∫ |(L^n 𝟙)′| dm`.
    pub pullback_variation: f64,
    /// `min L^n 𝟙`.
    pub pullback_min: f64,
}

/// `∫ |f′| dm` on the refined grid.
pub fn variation(f: &GridFunction) -> f64 {
    let d = f.refined_values(1);
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    pairwise_sum(&abs) / abs.len() as f64
}

/// Compares the largest composite-branch distortion with its bound, using
/// `samples` evenly spaced points.
pub fn distortion_bound(
    cocycle: &Cocycle<'_>,
    window: &OmegaWindow,
    n: usize,
    samples: usize,
) -> Result<DistortionReport> {
    let spec = cocycle.spec();
    let mut used = 0;
    let mut count: u64 = 1;
    for k in 1..=n {
        let sym = spec.symbol_at(window, -(k as i64))?;
        count *= spec.symbols()[sym].degree as u64;
        if count > BRANCH_CAP {
            break;
        }
        used = k;
    }
    let mut max_ratio = 0.0f64;
    let samples = samples.max(1);
    for i in 0..samples {
        let x = i as f64 / samples as f64;
        for b in spec.branch_jet_composition(window, cocycle.eps(), used, x)? {
            max_ratio = max_ratio.max((b.d2y / b.dy).abs());
        }
    }
    let bound = distortion_series(spec, window, used)?
        .last()
        .copied()
        .unwrap_or(0.0);
    let l = cocycle.run(window, -(used as i64), 0, &cocycle.one())?;
    Ok(DistortionReport {
        n: used,
        max_ratio,
        bound,
        pullback_sup: l.sup_norm(),
        pullback_variation: variation(&l),
        pullback_min: l.refined_min(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use core::f64::consts::PI;

    #[test]
    fn hilbert_metric_closed_form() {
        let one = GridFunction::constant(64, 1.0);
        let g = GridFunction::from_fn(64, |x| 1.0 + 0.5 * (2.0 * PI * x).cos());
        assert!((hilbert_metric_positive(&one, &g).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(hilbert_metric_positive(&g, &g).unwrap(), 0.0);
        assert!(hilbert_metric_positive(&g, &g.scale(3.0)).unwrap() < 1e-14);
        assert!(hilbert_metric_positive(&one, &GridFunction::zeros(64)).is_err());
    }

    #[test]
    fn doubling_q_is_ln2() {
        let spec = families::doubling();
        let w = OmegaWindow::constant(0, 80);
        let p = cone_q(&spec, &w, 3.0, 60).unwrap();
        assert!((p.q - 2f64.ln()).abs() < 1e-15);
        assert!(p.tail < 1e-17);
    }

    #[test]
    fn membership_counterexample() {
        let spec = families::doubling();
        let p = cone_q(&spec, &OmegaWindow::constant(0, 80), 3.0, 60).unwrap();
        let sq = p.log_lipschitz_bound();
        let f = GridFunction::from_fn(256, |x| (2.0 * sq * (2.0 * PI * x).sin()).exp());
        let m = cone_membership(&f, &p, MembershipMode::Derivative).unwrap();
        assert!(!m.member && m.witness.is_some());
        assert!((m.log_lipschitz - 4.0 * PI * sq).abs() / (4.0 * PI * sq) < 1e-6);
        let c = cone_membership(
            &GridFunction::constant(16, 2.0),
            &p,
            MembershipMode::AllPairs,
        )
        .unwrap();
        assert!(c.member && c.log_lipschitz == 0.0);
    }

    #[test]
    fn doubling_distortion_is_zero() {
        let spec = families::doubling();
        let c = Cocycle::new(&spec, 0.0, 32).unwrap();
        let r = distortion_bound(&c, &OmegaWindow::constant(0, 30), 8, 16).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(r.n, 8);
    }
}
