//! Quenched and annealed statistics: centred observables, the CLT variance
//! series with its ε-derivative, the annealed response and Birkhoff-sum
//! sampling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::{derive_seed, OmegaWindow};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::maps::MapFamilySpec;
use crate::numeric::{geometric_tail, mean, pairwise_sum, sample_variance, unit_f64};
use crate::response::response_chain;
use crate::transfer::Cocycle;

/// Weight of the correlation sum in `Σ² = ψ(f²h) + 2 Σ_{n≥1} C_n`, applied to
/// its ε-derivative as well.
pub const CORRELATION_FACTOR: f64 = 2.0;

/// Observable `f_ω = f(ω₀, ·)`: one trigonometric polynomial per symbol, or
/// a single one shared by all symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    per_symbol: Vec<crate::trig::TrigPoly>,
}

impl ObservableSpec {
    pub fn new(per_symbol: Vec<crate::trig::TrigPoly>) -> Result<Self> {
        if per_symbol.is_empty() {
            return Err(Error::config("observable", "needs at least one profile"));
        }
        if per_symbol.iter().any(|p| !p.all_finite()) {
            return Err(Error::config("observable", "non-finite coefficient"));
        }
        Ok(ObservableSpec { per_symbol })
    }

    pub fn uniform(p: crate::trig::TrigPoly) -> Self {
        ObservableSpec {
            per_symbol: vec![p],
        }
    }

    /// Number of profiles; 1 means shared.
    pub fn profiles(&self) -> usize {
        self.per_symbol.len()
    }

    pub fn for_symbol(&self, symbol: usize) -> &crate::trig::TrigPoly {
        if self.per_symbol.len() == 1 {
            &self.per_symbol[0]
        } else {
            &self.per_symbol[symbol]
        }
    }

    /// Bound on `‖f_s‖_{C³}` from the coefficients.
    pub fn c3_bound(&self, symbol: usize) -> f64 {
        let p = self.for_symbol(symbol);
        (0..=3).map(|r| p.derivative_bound(r)).fold(0.0, f64::max)
    }

    pub fn grid(&self, symbol: usize, resolution: usize) -> GridFunction {
        let p = self.for_symbol(symbol);
        GridFunction::from_fn(resolution, |x| p.eval(x, 0))
    }

    /// Checks that the observable is compatible with an alphabet.
    pub fn check_alphabet(&self, alphabet: usize) -> Result<()> {
        if self.per_symbol.len() != 1 && self.per_symbol.len() != alphabet {
            return Err(Error::config(
                "observable",
                format!(
                    "{} profiles for an alphabet of size {alphabet}",
                    self.per_symbol.len()
                ),
            ));
        }
        Ok(())
    }

    /// `f_ω` at relative position `rel` of `window`.
    pub fn at(
        &self,
        spec: &MapFamilySpec,
        window: &OmegaWindow,
        rel: i64,
        resolution: usize,
    ) -> Result<GridFunction> {
        Ok(self.grid(spec.symbol_at(window, rel)?, resolution))
    }
}

/// `f − ψ(f h)`.
pub fn center_observable(f: &GridFunction, h: &GridFunction) -> GridFunction {
    f.add_scalar(-f.pair(h))
}

/// Settings of the per-ω series computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSettings {
    pub resolution: usize,
    pub depth: usize,
    pub n_max: usize,
    /// Terms of the response series (derivative computations only).
    pub n_terms: usize,
}

/// Variance series terms for one ω.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTerms {
    /// `ψ(f_ω² h_ω)` with `f_ω` centred.
    pub diagonal: f64,
    /// `C_n = ψ(L^n_ω(h_ω f_ω) f_{σⁿω})` for `n = 1..=n_max`.
    pub correlations: Vec<f64>,
}

impl VarianceTerms {
    pub fn sigma2(&self) -> f64 {
        self.diagonal + CORRELATION_FACTOR * pairwise_sum(&self.correlations)
    }
}

pub fn variance_terms(
    cocycle: &Cocycle<'_>,
    window: &OmegaWindow,
    f: &ObservableSpec,
    settings: &SeriesSettings,
) -> Result<VarianceTerms> {
    if settings.n_max == 0 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    let spec = cocycle.spec();
    let n = cocycle.resolution();
    let hs = cocycle.density_chain(window, 0, settings.n_max as i64, settings.depth)?;
    let fs: Vec<GridFunction> = (0..=settings.n_max)
        .map(|p| Ok(center_observable(&f.at(spec, window, p as i64, n)?, &hs[p])))
        .collect::<Result<_>>()?;
    let diagonal = fs[0].mul(&fs[0]).pair(&hs[0]);
    let mut g = hs[0].mul(&fs[0]);
    let mut correlations = Vec::with_capacity(settings.n_max);
    for p in 1..=settings.n_max {
        g = cocycle.apply_at(window, p as i64 - 1, &g)?;
        correlations.push(g.pair(&fs[p]));
    }
    Ok(VarianceTerms {
        diagonal,
        correlations,
    })
}

/// Derivative components for one ω, all at ε = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTerms {
    /// `J₁ = ψ(ĥ f₀²)`.
    pub j1: f64,
    /// `J₂ = −2 ψ(h f₀) ψ(ĥ f)`.
    pub j2: f64,
    /// `d̃_{2,n} = ψ(L^n(ĥ f₀ − h ψ(f ĥ)) f_{σⁿω})`.
    pub d2: Vec<f64>,
    /// `𝒜_n = Σ_{j<n} ψ(L^{n−j−1}_{σ^{j+1}ω} L̂_{σ^jω} L^j_ω(h f₀) · f_{σⁿω})`.
    pub a: Vec<f64>,
    /// The recentring contributions `d_{1,n}`, zero up to rounding.
    pub d1: Vec<f64>,
    /// Tail estimate of the response series at ω.
    pub response_tail: f64,
}

impl DerivativeTerms {
    pub fn d0_prime(&self) -> f64 {
        self.j1 + self.j2
    }

    pub fn derivative(&self) -> f64 {
        let sum: Vec<f64> = self.d2.iter().zip(&self.a).map(|(x, y)| x + y).collect();
        self.d0_prime() + CORRELATION_FACTOR * pairwise_sum(&sum)
    }
}

/// Term-wise derivative of `Σ²_ε` at ε = 0 for one ω. `cocycle0` must be the
/// unperturbed cocycle.
pub fn derivative_terms(
    cocycle0: &Cocycle<'_>,
    window: &OmegaWindow,
    f: &ObservableSpec,
    settings: &SeriesSettings,
) -> Result<DerivativeTerms> {
    if cocycle0.eps() != 0.0 {
        return Err(Error::Precondition(
            "derivative terms need the ε = 0 cocycle".into(),
        ));
    }
    if settings.n_max == 0 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    let spec = cocycle0.spec();
    let n = cocycle0.resolution();
    let chain = response_chain(
        cocycle0,
        window,
        0,
        settings.n_max as i64,
        settings.n_terms,
        settings.depth,
    )?;
    let raw: Vec<GridFunction> = (0..=settings.n_max)
        .map(|p| f.at(spec, window, p as i64, n))
        .collect::<Result<_>>()?;
    let fs: Vec<GridFunction> = raw
        .iter()
        .enumerate()
        .map(|(p, fp)| center_observable(fp, &chain.densities[p]))
        .collect();
    let (h0, hat0, f0) = (&chain.densities[0], &chain.responses[0], &fs[0]);

    let j1 = f0.mul(f0).pair(hat0);
    let j2 = -2.0 * h0.pair(f0) * hat0.pair(&raw[0]);

    let mut u = hat0.mul(f0).sub(&h0.scale(raw[0].pair(hat0)));
    let mut g = h0.mul(f0);
    let mut s_acc = GridFunction::zeros(n);
    let (mut d2, mut a, mut d1) = (Vec::new(), Vec::new(), Vec::new());
    for p in 1..=settings.n_max {
        let sym = spec.symbol_at(window, p as i64 - 1)?;
        // S_p = L_{p−1} S_{p−1} + L̂_{p−1} L^{p−1}(h f₀), using g = L^{p−1}(h f₀).
        let w = cocycle0.apply_derivative(sym, &g)?;
        s_acc = cocycle0.apply(sym, &s_acc)?.add(&w);
        g = cocycle0.apply(sym, &g)?;
        u = cocycle0.apply(sym, &u)?;
        d2.push(u.pair(&fs[p]));
        a.push(s_acc.pair(&fs[p]));
        let increment = -raw[p].pair(chain.response(p as i64));
        d1.push(increment * g.integral());
    }
    Ok(DerivativeTerms {
        j1,
        j2,
        d2,
        a,
        d1,
        response_tail: chain.tail_estimate,
    })
}

/// `(1/m) Σ_{p<m} Σ²(σ^pω)`, the per-position series averaged along the
/// first `m` positions of the window, from a single density chain. This is the
/// quantity a quenched Monte-Carlo estimate of `Var(S_m)/m` at `ω` converges to.
pub fn orbit_averaged_sigma2(
    cocycle: &Cocycle<'_>,
    window: &OmegaWindow,
    f: &ObservableSpec,
    settings: &SeriesSettings,
    m: usize,
) -> Result<f64> {
    if settings.n_max == 0 || m == 0 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    let spec = cocycle.spec();
    let n = cocycle.resolution();
    let last = (m + settings.n_max) as i64 - 1;
    let hs = cocycle.density_chain(window, 0, last, settings.depth)?;
    let fs: Vec<GridFunction> = (0..=last as usize)
        .map(|p| Ok(center_observable(&f.at(spec, window, p as i64, n)?, &hs[p])))
        .collect::<Result<_>>()?;
    let mut per = Vec::with_capacity(m);
    for p in 0..m {
        let diagonal = fs[p].mul(&fs[p]).pair(&hs[p]);
        let mut g = hs[p].mul(&fs[p]);
        let mut correlations = Vec::with_capacity(settings.n_max);
        for q in 1..=settings.n_max {
            g = cocycle.apply_at(window, (p + q) as i64 - 1, &g)?;
            correlations.push(g.pair(&fs[p + q]));
        }
        per.push(
            VarianceTerms {
                diagonal,
                correlations,
            }
            .sigma2(),
        );
    }
    Ok(mean(&per))
}

/// ω-averaged variance series.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSummary {
    pub sigma2: f64,
    pub diagonal_term: f64,
    /// ω-averaged `C_n`.
    pub correlation_terms: Vec<f64>,
    pub truncation_n: usize,
    /// Geometric extrapolation of the dropped correlation terms, with the
    /// factor 2 applied.
    pub tail: f64,
    /// Standard error of the ω-average (0 for a single ω).
    pub omega_standard_error: f64,
}

pub fn aggregate_variance(terms: &[VarianceTerms]) -> Result<VarianceSummary> {
    let Some(first) = terms.first() else {
        return Err(Error::config("omega_samples", "must be at least 1"));
    };
    let n_max = first.correlations.len();
    let per_omega: Vec<f64> = terms.iter().map(VarianceTerms::sigma2).collect();
    let diag: Vec<f64> = terms.iter().map(|t| t.diagonal).collect();
    let correlation_terms: Vec<f64> = (0..n_max)
        .map(|i| mean(&terms.iter().map(|t| t.correlations[i]).collect::<Vec<_>>()))
        .collect();
    let (tail, _) = geometric_tail(&correlation_terms);
    let se = if terms.len() > 1 {
        (sample_variance(&per_omega) / terms.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(VarianceSummary {
        sigma2: mean(&per_omega),
        diagonal_term: mean(&diag),
        correlation_terms,
        truncation_n: n_max,
        tail: CORRELATION_FACTOR * tail,
        omega_standard_error: se,
    })
}

/// ω-averaged derivative components.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSummary {
    pub derivative_d: f64,
    pub d0_prime: f64,
    pub j1: f64,
    pub j2: f64,
    pub d2_terms: Vec<f64>,
    pub a_terms: Vec<f64>,
    pub sum_d2n: f64,
    pub sum_an: f64,
    pub max_abs_d1: f64,
    /// Extrapolated tail of the derivative series (factor 2 applied).
    pub tail: f64,
    pub max_response_tail: f64,
}

pub fn aggregate_derivative(terms: &[DerivativeTerms]) -> Result<DerivativeSummary> {
    let Some(first) = terms.first() else {
        return Err(Error::config("omega_samples", "must be at least 1"));
    };
    let n_max = first.d2.len();
    let avg = |f: &dyn Fn(&DerivativeTerms) -> f64| mean(&terms.iter().map(f).collect::<Vec<_>>());
    let d2_terms: Vec<f64> = (0..n_max).map(|i| avg(&|t| t.d2[i])).collect();
    let a_terms: Vec<f64> = (0..n_max).map(|i| avg(&|t| t.a[i])).collect();
    let combined: Vec<f64> = d2_terms.iter().zip(&a_terms).map(|(x, y)| x + y).collect();
    let (tail, _) = geometric_tail(&combined);
    let j1 = avg(&|t| t.j1);
    let j2 = avg(&|t| t.j2);
    let sum_d2n = pairwise_sum(&d2_terms);
    let sum_an = pairwise_sum(&a_terms);
    Ok(DerivativeSummary {
        derivative_d: avg(&DerivativeTerms::derivative),
        d0_prime: j1 + j2,
        j1,
        j2,
        d2_terms,
        a_terms,
        sum_d2n,
        sum_an,
        max_abs_d1: terms
            .iter()
            .flat_map(|t| t.d1.iter())
            .fold(0.0, |m, v| m.max(v.abs())),
        tail: CORRELATION_FACTOR * tail,
        max_response_tail: terms.iter().map(|t| t.response_tail).fold(0.0, f64::max),
    })
}

/// Sequential `Σ²_ε` over a set of windows.
pub fn variance_sigma2(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    eps: f64,
    f: &ObservableSpec,
    settings: &SeriesSettings,
) -> Result<VarianceSummary> {
    let c = Cocycle::new(spec, eps, settings.resolution)?;
    let terms = windows
        .iter()
        .map(|w| variance_terms(&c, w, f, settings))
        .collect::<Result<Vec<_>>>()?;
    aggregate_variance(&terms)
}

/// Sequential term-wise derivative over a set of windows.
pub fn variance_derivative(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    f: &ObservableSpec,
    settings: &SeriesSettings,
) -> Result<DerivativeSummary> {
    let c = Cocycle::new(spec, 0.0, settings.resolution)?;
    let terms = windows
        .iter()
        .map(|w| derivative_terms(&c, w, f, settings))
        .collect::<Result<Vec<_>>>()?;
    aggregate_derivative(&terms)
}

/// `(Σ²_δ − Σ²_{−δ})/2δ`.
pub fn variance_fd_derivative(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    f: &ObservableSpec,
    delta: f64,
    settings: &SeriesSettings,
) -> Result<f64> {
    let plus = variance_sigma2(spec, windows, delta, f, settings)?.sigma2;
    let minus = variance_sigma2(spec, windows, -delta, f, settings)?.sigma2;
    Ok((plus - minus) / (2.0 * delta))
}

/// Per-ω pairings for the annealed response: `ψ(Φ ĥ)` and `ψ(Φ h_{±ε})`
/// on each ladder point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedTerms {
    pub analytic: f64,
    /// `(ε, ψ(Φ h_ε), ψ(Φ h_{−ε}))`.
    pub ladder: Vec<(f64, f64, f64)>,
}

pub fn annealed_terms(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    phi: &ObservableSpec,
    ladder: &[f64],
    settings: &SeriesSettings,
) -> Result<AnnealedTerms> {
    let n = settings.resolution;
    let c0 = Cocycle::new(spec, 0.0, n)?;
    let chain = response_chain(&c0, window, 0, 0, settings.n_terms, settings.depth)?;
    let phi0 = phi.at(spec, window, 0, n)?;
    let analytic = phi0.pair(&chain.responses[0]);
    let mut points = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let hp = Cocycle::new(spec, eps, n)?.density_at(window, 0, settings.depth)?;
        let hm = Cocycle::new(spec, -eps, n)?.density_at(window, 0, settings.depth)?;
        points.push((eps, phi0.pair(&hp), phi0.pair(&hm)));
    }
    Ok(AnnealedTerms {
        analytic,
        ladder: points,
    })
}

/// Annealed derivative estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedReport {
    /// ω-average of `ψ(Φ_ω ĥ_ω)`.
    pub analytic: f64,
    /// Central difference of the ω-averaged pairing at the smallest ε.
    pub fd_slope: f64,
    /// `(ε, central difference)` for every ladder point.
    pub slopes: Vec<(f64, f64)>,
}

pub fn aggregate_annealed(terms: &[AnnealedTerms]) -> Result<AnnealedReport> {
    let Some(first) = terms.first() else {
        return Err(Error::config("omega_samples", "must be at least 1"));
    };
    let analytic = mean(&terms.iter().map(|t| t.analytic).collect::<Vec<_>>());
    let slopes: Vec<(f64, f64)> = (0..first.ladder.len())
        .map(|i| {
            let eps = first.ladder[i].0;
            let plus = mean(&terms.iter().map(|t| t.ladder[i].1).collect::<Vec<_>>());
            let minus = mean(&terms.iter().map(|t| t.ladder[i].2).collect::<Vec<_>>());
            (eps, (plus - minus) / (2.0 * eps))
        })
        .collect();
    let fd_slope = slopes
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|s| s.1)
        .unwrap_or(0.0);
    Ok(AnnealedReport {
        analytic,
        fd_slope,
        slopes,
    })
}

pub fn annealed_response(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    phi: &ObservableSpec,
    ladder: &[f64],
    settings: &SeriesSettings,
) -> Result<AnnealedReport> {
    for &e in ladder {
        spec.check_eps(e)?;
    }
    let terms = windows
        .iter()
        .map(|w| annealed_terms(spec, w, phi, ladder, settings))
        .collect::<Result<Vec<_>>>()?;
    aggregate_annealed(&terms)
}

/// Precomputed data for sampling orbits of `μ_ω` backwards in time.
///
/// An orbit `x_0, …, x_{n−1}` with `x_{p+1} = T_{σ^pω}(x_p)` is drawn by
/// starting from a uniform point `burn_in` steps after the end and choosing,
/// at each step back, the preimage `y_i` of the current point with
/// probability proportional to `h_p(y_i)/T′(y_i)`. Forward iteration of an
/// expanding map in floating point loses all information after a few dozen
/// steps; backward sampling does not.
#[derive(Debug, Clone)]
pub struct BirkhoffSampler<'a> {
    spec: &'a MapFamilySpec,
    eps: f64,
    symbols: Vec<usize>,
    /// Density grid values at positions `0..n_steps + burn_in`; `None` where
    /// the density is constant.
    densities: Vec<Option<Vec<f64>>>,
    observables: Vec<crate::trig::TrigPoly>,
    n_steps: usize,
}

impl<'a> BirkhoffSampler<'a> {
    pub fn new(
        cocycle: &Cocycle<'a>,
        window: &OmegaWindow,
        f: &ObservableSpec,
        n_steps: usize,
        burn_in: usize,
        depth: usize,
    ) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::config("mc_steps", "must be at least 1"));
        }
        cocycle.spec().check_eps(cocycle.eps())?;
        let spec = cocycle.spec();
        let total = n_steps + burn_in;
        let symbols: Vec<usize> = (0..total as i64)
            .map(|p| spec.symbol_at(window, p))
            .collect::<Result<_>>()?;
        let linear = spec
            .symbols()
            .iter()
            .all(|s| s.base.is_zero() && s.drift == 0.0)
            && (cocycle.eps() == 0.0 || spec.is_unperturbed());
        let densities = if linear {
            vec![None; total]
        } else {
            cocycle
                .density_chain(window, 0, total as i64 - 1, depth)?
                .iter()
                .map(|h| {
                    let dev = h.add_scalar(-1.0).grid_sup();
                    (dev > 1e-14).then(|| h.values().to_vec())
                })
                .collect()
        };
        let observables = symbols
            .iter()
            .take(n_steps)
            .map(|s| f.for_symbol(*s).clone())
            .collect();
        Ok(BirkhoffSampler {
            spec,
            eps: cocycle.eps(),
            symbols,
            densities,
            observables,
            n_steps,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Orbit points `x_0, …, x_{n−1}` drawn with `seed`.
    pub fn orbit(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = unit_f64(rng.next_u64());
        let mut points = vec![0.0; self.n_steps];
        let mut branches = Vec::with_capacity(4);
        let mut probs = Vec::with_capacity(4);
        for p in (0..self.symbols.len()).rev() {
            self.spec
                .branch_points(self.symbols[p], self.eps, x, &mut branches)?;
            probs.clear();
            for (y, t1) in &branches {
                let h = self.densities[p]
                    .as_ref()
                    .map_or(1.0, |v| local_interpolate(v, *y));
                probs.push((h / t1).max(0.0));
            }
            let total: f64 = probs.iter().sum();
            if !(total > 0.0) {
                return Err(Error::NonPositive { min: total });
            }
            let u = unit_f64(rng.next_u64()) * total;
            let mut acc = 0.0;
            let mut choice = branches.len() - 1;
            for (i, w) in probs.iter().enumerate() {
                acc += w;
                if u < acc {
                    choice = i;
                    break;
                }
            }
            x = branches[choice].0;
            if p < self.n_steps {
                points[p] = x;
            }
        }
        Ok(points)
    }

    /// `S_n f(x_0) = Σ_{p<n} f_{σ^pω}(x_p)` for one orbit drawn with `seed`.
    pub fn sample(&self, seed: u64) -> Result<f64> {
        let points = self.orbit(seed)?;
        let values: Vec<f64> = points
            .iter()
            .zip(&self.observables)
            .map(|(x, f)| f.eval(*x, 0))
            .collect();
        Ok(pairwise_sum(&values))
    }

    /// Sums for orbits `first..first + count`, orbit `i` seeded by
    /// `derive_seed(master, i)`.
    pub fn samples(&self, master: u64, first: u64, count: u64) -> Result<Vec<f64>> {
        (first..first + count)
            .map(|i| self.sample(derive_seed(master, i)))
            .collect()
    }
}

/// Six-point Lagrange interpolation of periodic grid values. Used only for
/// sampling weights, where its `O(N⁻⁶)` error is far below the Monte-Carlo noise.
fn local_interpolate(v: &[f64], x: f64) -> f64 {
    let n = v.len();
    let u = x * n as f64;
    let i0 = u.floor();
    let t = u - i0;
    let i0 = i0 as i64;
    let mut acc = 0.0;
    for a in -2i64..=3 {
        let mut w = 1.0;
        for b in -2i64..=3 {
            if a != b {
                w *= (t - b as f64) / (a - b) as f64;
            }
        }
        acc += w * v[(i0 + a).rem_euclid(n as i64) as usize];
    }
    acc
}

/// Monte-Carlo estimate of `Var(S_n)/n` for one ω with its standard error
/// (normal-theory error of the sample variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McVariance {
    pub sigma2: f64,
    pub standard_error: f64,
    pub orbits: usize,
}

pub fn mc_variance(sums: &[f64], n_steps: usize) -> McVariance {
    let r = sums.len();
    let var = sample_variance(sums) / n_steps as f64;
    let m = mean(sums);
    let m4: Vec<f64> = sums.iter().map(|s| (s - m).powi(4)).collect();
    let m4 = mean(&m4) / (n_steps as f64).powi(2);
    // Var(s²) ≈ (μ₄ − σ⁴(r−3)/(r−1))/r.
    let rf = r as f64;
    let v = if r > 3 {
        (m4 - var * var * (rf - 3.0) / (rf - 1.0)) / rf
    } else {
        0.0
    };
    McVariance {
        sigma2: var,
        standard_error: v.max(0.0).sqrt(),
        orbits: r,
    }
}

/// Combines per-ω Monte-Carlo estimates. With several ω the standard error
/// comes from their spread, which includes the ω-to-ω variation.
pub fn combine_mc(per_omega: &[McVariance]) -> McVariance {
    let vals: Vec<f64> = per_omega.iter().map(|m| m.sigma2).collect();
    let orbits = per_omega.iter().map(|m| m.orbits).sum();
    if per_omega.len() == 1 {
        return per_omega[0];
    }
    McVariance {
        sigma2: mean(&vals),
        standard_error: (sample_variance(&vals) / vals.len() as f64).sqrt(),
        orbits,
    }
}
