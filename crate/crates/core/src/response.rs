//! The derivative operator `L̂_ω`, the response function `ĥ_ω` and the
//! empirical linear-response rate along an ε ladder.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::OmegaWindow;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::maps::MapFamilySpec;
use crate::numeric::{geometric_tail, linear_fit};
use crate::transfer::Cocycle;

/// Cap on the number of series terms chosen automatically.
pub const MAX_DEFAULT_TERMS: usize = 100;
/// Residuals below this are excluded from slope fits.
pub const RESIDUAL_FLOOR: f64 = 1e-11;

/// Grids of the perturbation data of one symbol at ε = 0:
/// `g = 1/T′`, `∂_ε g = −P′/T′²`, `J = −P′/T′ + T″P/T′²` and the `V`
/// coefficient `−P/T′` (so that `Vφ = coefficient·φ′`).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationContext {
    pub symbol: usize,
    pub g: GridFunction,
    pub de_g: GridFunction,
    pub j: GridFunction,
    pub v_coeff: GridFunction,
}

impl PerturbationContext {
    pub fn new(spec: &MapFamilySpec, symbol: usize, resolution: usize) -> Result<Self> {
        let m = spec.symbol(symbol)?;
        let at = |f: &dyn Fn(f64) -> f64| GridFunction::from_fn(resolution, f);
        let t1 = |x: f64| m.dx(0.0, x, 1);
        Ok(PerturbationContext {
            symbol,
            g: at(&|x| 1.0 / t1(x)),
            de_g: at(&|x| -m.perturbation.eval(x, 1) / (t1(x) * t1(x))),
            j: at(&|x| {
                let t = t1(x);
                -m.perturbation.eval(x, 1) / t
                    + m.dx(0.0, x, 2) * m.perturbation.eval(x, 0) / (t * t)
            }),
            v_coeff: at(&|x| -m.perturbation.eval(x, 0) / t1(x)),
        })
    }
}

/// `L̂_ω f = L_ω(J f + V f)` for the symbol at relative position 0.
pub fn derivative_operator(
    cocycle0: &Cocycle<'_>,
    window: &OmegaWindow,
    f: &GridFunction,
) -> Result<GridFunction> {
    cocycle0.apply_derivative(cocycle0.spec().symbol_at(window, 0)?, f)
}

/// Smallest `n` with `‖L̂h‖_{C¹}·Π_{j=1}^{n} γ_{σ^{-j}ω}^{-1} ≤ 1e-10`,
/// capped at 100 and by the window.
pub fn default_terms(spec: &MapFamilySpec, window: &OmegaWindow, lhat_h_c1: f64) -> Result<usize> {
    if lhat_h_c1 <= 0.0 {
        return Ok(1);
    }
    let mut env = lhat_h_c1;
    let cap = MAX_DEFAULT_TERMS.min(window.half_width().saturating_sub(1));
    for n in 1..=cap {
        env /= spec.min_expansion(spec.symbol_at(window, -(n as i64))?)?;
        if env <= 1e-10 {
            return Ok(n);
        }
    }
    Ok(cap.max(1))
}

/// Densities and response functions at consecutive positions of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseChain {
    /// Relative position of the first entry.
    pub from: i64,
    pub densities: Vec<GridFunction>,
    pub responses: Vec<GridFunction>,
    pub n_terms: usize,
    /// Tail estimate for the response at the first position.
    pub tail_estimate: f64,
    /// Decay rate fitted on the pushed-forward first term.
    pub decay_rate: Option<f64>,
}

impl ResponseChain {
    pub fn density(&self, rel: i64) -> &GridFunction {
        &self.densities[(rel - self.from) as usize]
    }

    pub fn response(&self, rel: i64) -> &GridFunction {
        &self.responses[(rel - self.from) as usize]
    }
}

/// `h` and `ĥ` at positions `from..=to`. `ĥ` is accumulated by
/// `ĥ_{p+1} = L_p ĥ_p + L̂_p h_p` from zero at `from − n_terms − 1`, so the
/// response at `from` carries exactly the terms `n = 0..=n_terms` of the
/// series and later positions carry more.
pub fn response_chain(
    cocycle0: &Cocycle<'_>,
    window: &OmegaWindow,
    from: i64,
    to: i64,
    n_terms: usize,
    depth: usize,
) -> Result<ResponseChain> {
    let start = from - n_terms as i64 - 1;
    let hs = cocycle0.density_chain(window, start, to, depth)?;
    let spec = cocycle0.spec();
    let mut acc = GridFunction::zeros(cocycle0.resolution());
    let mut densities = Vec::with_capacity((to - from + 1) as usize);
    let mut responses = Vec::with_capacity((to - from + 1) as usize);
    let mut first_term = None;
    for (i, p) in (start..=to).enumerate() {
        if p >= from {
            densities.push(hs[i].clone());
            responses.push(acc.clone());
        }
        if p == to {
            break;
        }
        let s = spec.symbol_at(window, p)?;
        let v = cocycle0.apply_derivative(s, &hs[i])?;
        if p == start {
            first_term = Some(v.clone());
        }
        acc = cocycle0.apply(s, &acc)?.add(&v);
    }
    // The dropped tail starts with L^{n_terms+1} v_{start−1}; estimate it by
    // pushing the oldest retained term forward and extrapolating its decay.
    let mut probe = first_term.unwrap_or_else(|| GridFunction::zeros(cocycle0.resolution()));
    let mut norms = Vec::with_capacity(n_terms);
    for p in (start + 1)..from {
        probe = cocycle0.apply_at(window, p, &probe)?;
        norms.push(probe.c1_norm());
    }
    let (tail_estimate, decay_rate) = geometric_tail(&norms);
    Ok(ResponseChain {
        from,
        densities,
        responses,
        n_terms,
        tail_estimate,
        decay_rate,
    })
}

/// `ĥ_ω` with `n_terms + 1` series terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFunction {
    pub hat_h: GridFunction,
    pub density: GridFunction,
    pub n_terms: usize,
    pub tail_estimate: f64,
    pub decay_rate: Option<f64>,
}

pub fn response_function(
    cocycle0: &Cocycle<'_>,
    window: &OmegaWindow,
    n_terms: usize,
    depth: usize,
) -> Result<ResponseFunction> {
    let chain = response_chain(cocycle0, window, 0, 0, n_terms, depth)?;
    Ok(ResponseFunction {
        hat_h: chain.responses[0].clone(),
        density: chain.densities[0].clone(),
        n_terms,
        tail_estimate: chain.tail_estimate,
        decay_rate: chain.decay_rate,
    })
}

/// Settings shared by the ladder computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSettings {
    pub resolution: usize,
    pub depth: usize,
    pub n_terms: usize,
}

/// Residuals of the first-order expansion along an ε ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseReport {
    pub hat_h: GridFunction,
    pub series_terms_used: usize,
    pub tail_estimate: f64,
    /// `(ε, r(ε))` with `r(ε) = ‖(h_ε − h)/ε − ĥ‖_∞`.
    pub ladder: Vec<(f64, f64)>,
    /// Least-squares slope of `log r` against `log ε`; `None` when fewer than
    /// two residuals clear the numerical floor.
    pub fitted_a: Option<f64>,
    /// `max r(ε)/|ε|^a`.
    pub fitted_u1: f64,
    /// `‖h_ε − h‖_∞/|ε|` per ladder point.
    pub stability: Vec<f64>,
    /// `max_ε ‖h_ε − h‖_∞/|ε|`.
    pub stability_slope: f64,
    /// Slope of `log ‖h_ε − h‖_∞` against `log ε`.
    pub difference_slope: Option<f64>,
}

/// Default ladder: geometric with ratio `1/√10` from `ε_max/2`.
pub fn default_ladder(eps_max: f64, points: usize) -> Vec<f64> {
    let r = 1.0 / 10f64.sqrt();
    (0..points)
        .map(|i| 0.5 * eps_max * r.powi(i as i32))
        .collect()
}

fn check_ladder(spec: &MapFamilySpec, ladder: &[f64]) -> Result<()> {
    if ladder.len() < 4 {
        return Err(Error::config("eps_ladder", "needs at least 4 points"));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("eps_ladder", "must be strictly decreasing"));
    }
    for &e in ladder {
        if e == 0.0 {
            return Err(Error::config("eps_ladder", "ε = 0 is not a ladder point"));
        }
        spec.check_eps(e)?;
    }
    Ok(())
}

fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(_, r)| *r >= RESIDUAL_FLOOR)
        .map(|(e, r)| (e.abs().ln(), r.ln()))
        .unzip();
    linear_fit(&xs, &ys).map(|(_, s)| s)
}

/// Compares `(h_ε − h)/ε` with `ĥ` along `ladder`.
pub fn response_verify(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    ladder: &[f64],
    settings: ResponseSettings,
) -> Result<ResponseReport> {
    check_ladder(spec, ladder)?;
    let c0 = Cocycle::new(spec, 0.0, settings.resolution)?;
    let resp = response_function(&c0, window, settings.n_terms, settings.depth)?;
    // Same pullback as the perturbed densities, so that ε = 0 effects cancel exactly.
    let h0 = c0.density_at(window, 0, settings.depth)?;
    let mut points = Vec::with_capacity(ladder.len());
    let mut diffs = Vec::with_capacity(ladder.len());
    let mut stability = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let ce = Cocycle::new(spec, eps, settings.resolution)?;
        let he = ce
            .density_at(window, 0, settings.depth)
            .map_err(|e| Error::Convergence(format!("density at ε = {eps}: {e}")))?;
        let diff = he.sub(&h0);
        let d = diff.sup_norm();
        let r = diff.scale(1.0 / eps).sub(&resp.hat_h).sup_norm();
        points.push((eps, r));
        diffs.push((eps, d));
        stability.push(d / eps.abs());
    }
    let fitted_a = log_slope(&points);
    let fitted_u1 = match fitted_a {
        Some(a) => points
            .iter()
            .map(|(e, r)| r / e.abs().powf(a))
            .fold(0.0, f64::max),
        None => points.iter().map(|(_, r)| *r).fold(0.0, f64::max),
    };
    Ok(ResponseReport {
        hat_h: resp.hat_h,
        series_terms_used: settings.n_terms + 1,
        tail_estimate: resp.tail_estimate,
        stability_slope: stability.iter().copied().fold(0.0, f64::max),
        stability,
        difference_slope: log_slope(&diffs),
        ladder: points,
        fitted_a,
        fitted_u1,
    })
}

/// `‖∂²_ε[L_ε f]‖_{C¹} / (C₃ ‖f‖_{C³})` at ε = 0 for the symbol at position 0,
/// with the second derivative estimated by a central difference of step `δ`.
pub fn second_derivative_bound_check(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    delta: f64,
    f: &GridFunction,
) -> Result<f64> {
    let s = spec.symbol_at(window, 0)?;
    let n = f.resolution();
    let lp = Cocycle::new(spec, delta, n)?.apply(s, f)?;
    let lm = Cocycle::new(spec, -delta, n)?.apply(s, f)?;
    let l0 = Cocycle::new(spec, 0.0, n)?.apply(s, f)?;
    let second = lp.add(&lm).sub(&l0.scale(2.0)).scale(1.0 / (delta * delta));
    let num = second.c1_norm();
    if num == 0.0 {
        return Ok(0.0);
    }
    let c3 = spec.regularity_constants(s)?.c3_pert;
    Ok(num / (c3 * f.c3_norm()))
}

/// `‖(L_ε − L)f‖_∞ / (|ε| q̄ ‖f‖_{C¹})` for the symbol at position 0; at most
/// 1 when the first-order bound holds.
pub fn first_order_ratio(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    eps: f64,
    f: &GridFunction,
) -> Result<f64> {
    let s = spec.symbol_at(window, 0)?;
    let n = f.resolution();
    let diff = Cocycle::new(spec, eps, n)?
        .apply(s, f)?
        .sub(&Cocycle::new(spec, 0.0, n)?.apply(s, f)?);
    let num = diff.sup_norm();
    if num == 0.0 {
        return Ok(0.0);
    }
    let q_bar = spec.regularity_constants(s)?.q_bar;
    Ok(num / (eps.abs() * q_bar * f.c1_norm()))
}

/// Truncated telescoping sum
/// `Σ_{n=0}^{N} L^n_{σ^{-n}ω,ε}(L_{σ^{-(n+1)}ω,ε} − L_{σ^{-(n+1)}ω}) h_{σ^{-(n+1)}ω}`,
/// which approximates `h_{ω,ε} − h_ω` when the pullbacks have converged.
pub fn telescoping_sum(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    eps: f64,
    n_terms: usize,
    settings: ResponseSettings,
) -> Result<GridFunction> {
    let c0 = Cocycle::new(spec, 0.0, settings.resolution)?;
    let ce = Cocycle::new(spec, eps, settings.resolution)?;
    let start = -(n_terms as i64) - 1;
    let hs = c0.density_chain(window, start, -1, settings.depth)?;
    let mut acc = GridFunction::zeros(settings.resolution);
    for (i, p) in (start..0).enumerate() {
        let s = spec.symbol_at(window, p)?;
        let v = ce.apply(s, &hs[i])?.sub(&c0.apply(s, &hs[i])?);
        acc = ce.apply(s, &acc)?.add(&v);
    }
    Ok(acc)
}
