//! Commands. Every command builds its inputs from an [`Experiment`], fans
//! independent work out on the current rayon pool, collects results in input
//! order and writes artifacts single-threaded.

use rayon::prelude::*;
use serde::Serialize;

use qresponse_core::cone::{
    cone_membership, cone_q, contraction_profile, distortion_bound, MembershipMode,
};
use qresponse_core::environment::derive_seed;
use qresponse_core::response::{
    default_terms, derivative_operator, response_verify, ResponseSettings,
};
use qresponse_core::statistics::{
    aggregate_annealed, aggregate_derivative, aggregate_variance, annealed_terms,
    center_observable, combine_mc, derivative_terms, mc_variance, orbit_averaged_sigma2,
    variance_terms, BirkhoffSampler, McVariance, SeriesSettings,
};
use qresponse_core::transfer::default_depth;
use qresponse_core::{Cocycle, GridFunction, MapFamilySpec, OmegaWindow};

use crate::config::Experiment;
use crate::error::RunError;
use crate::io::{ArtifactDir, Cell, Table};
use crate::stats::{ks_normal, KsTest};

/// Equivariance tolerance reported alongside the density.
pub const DENSITY_TOL: f64 = 1e-8;
/// Orbits per parallel Monte-Carlo task.
pub const MC_CHUNK: u64 = 64;
/// Points at which composite-branch distortion is sampled.
pub const DISTORTION_SAMPLES: usize = 64;
/// Deepest composition examined by the `cone` command.
pub const DISTORTION_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Response,
    Correlations,
    Variance,
    Annealed,
    Cone,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Density,
        Command::Response,
        Command::Correlations,
        Command::Variance,
        Command::Annealed,
        Command::Cone,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Response => "response",
            Command::Correlations => "correlations",
            Command::Variance => "variance",
            Command::Annealed => "annealed",
            Command::Cone => "cone",
            Command::Report => "report",
        }
    }
}

/// Runs `f` over `items` in parallel and returns results in input order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> qresponse_core::Result<R> + Sync + Send,
) -> Result<Vec<R>, RunError> {
    let out: Vec<qresponse_core::Result<R>> = items.par_iter().map(f).collect();
    out.into_iter().map(|r| r.map_err(RunError::from)).collect()
}

/// Birkhoff sums for orbits `0..orbits` in fixed-size chunks, so the result
/// does not depend on the number of threads.
pub fn mc_sums(
    sampler: &BirkhoffSampler<'_>,
    master: u64,
    orbits: u64,
) -> Result<Vec<f64>, RunError> {
    let chunks: Vec<u64> = (0..orbits.div_ceil(MC_CHUNK)).collect();
    let parts = par_map(&chunks, |&c| {
        let first = c * MC_CHUNK;
        sampler.samples(master, first, MC_CHUNK.min(orbits - first))
    })?;
    Ok(parts.concat())
}

/// Pullback depth: the configured value or the largest default over `windows`.
pub fn depth_for(exp: &Experiment, windows: &[OmegaWindow]) -> Result<usize, RunError> {
    if let Some(d) = exp.config.pullback_depth {
        return Ok(d);
    }
    let depths = par_map(windows, |w| default_depth(&exp.family, w))?;
    Ok(depths.into_iter().max().unwrap_or(1))
}

/// Response-series length: the configured value or the largest default over
/// `windows`, from `‖L̂h‖_{C¹}` at position −1.
pub fn n_terms_for(
    exp: &Experiment,
    windows: &[OmegaWindow],
    depth: usize,
) -> Result<usize, RunError> {
    if let Some(n) = exp.config.options.n_terms {
        return Ok(n);
    }
    let c0 = Cocycle::new(&exp.family, 0.0, exp.resolution())?;
    let terms = par_map(windows, |w| {
        let before = w.shift(-1)?;
        let h = c0.density_at(&before, 0, depth)?;
        let lhat = derivative_operator(&c0, &before, &h)?;
        default_terms(&exp.family, w, lhat.c1_norm())
    })?;
    Ok(terms.into_iter().max().unwrap_or(1))
}

pub fn series_settings(
    exp: &Experiment,
    windows: &[OmegaWindow],
) -> Result<SeriesSettings, RunError> {
    let depth = depth_for(exp, windows)?;
    Ok(SeriesSettings {
        resolution: exp.resolution(),
        depth,
        n_max: exp.config.n_max,
        n_terms: n_terms_for(exp, windows, depth)?,
    })
}

fn grid_table(columns: Vec<&'static str>, fs: &[&GridFunction]) -> Table {
    let mut t = Table::new(columns);
    let n = fs[0].resolution();
    for j in 0..n {
        let mut row = vec![Cell::Num(fs[0].x(j))];
        row.extend(fs.iter().map(|f| Cell::Num(f.values()[j])));
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub eps: f64,
    pub depth: usize,
    pub equivariance_residual: f64,
    pub min: f64,
}

pub fn run_density(exp: &Experiment, dir: &ArtifactDir) -> Result<DensitySummary, RunError> {
    let w = exp.window(0)?;
    let eps = exp.config.options.eps;
    let depth = depth_for(exp, std::slice::from_ref(&w))?;
    let c = Cocycle::new(&exp.family, eps, exp.resolution())?;
    let e = c.equivariant_density(&w, depth, DENSITY_TOL)?;
    if let Some(d) = e.suggested_depth {
        log::warn!(
            "equivariance residual {:e} above {DENSITY_TOL:e}; try pullback_depth ≥ {d}",
            e.residual
        );
    }
    dir.write_csv("density.csv", &grid_table(vec!["x", "h"], &[&e.density]))?;
    Ok(DensitySummary {
        eps,
        depth: e.depth,
        equivariance_residual: e.residual,
        min: e.min,
    })
}

/// Contents of `response_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseJson {
    pub fitted_a: Option<f64>,
    #[serde(rename = "fitted_U1")]
    pub fitted_u1: f64,
    /// `[ε, r(ε)]` pairs.
    pub ladder: Vec<[f64; 2]>,
    pub tail: f64,
    pub series_terms_used: usize,
    /// `[ε, ‖h_ε − h‖_∞/ε]` pairs.
    pub stability: Vec<[f64; 2]>,
    pub stability_slope: f64,
    pub stability_ratio: f64,
    pub difference_slope: Option<f64>,
    pub hat_h_sup: f64,
    pub hat_h_mean: f64,
    pub resolution: usize,
    pub depth: usize,
}

pub fn response_json(
    spec: &MapFamilySpec,
    window: &OmegaWindow,
    ladder: &[f64],
    settings: ResponseSettings,
) -> Result<(ResponseJson, GridFunction), RunError> {
    let r = response_verify(spec, window, ladder, settings)?;
    let max = r.stability.iter().copied().fold(f64::MIN, f64::max);
    let min = r.stability.iter().copied().fold(f64::MAX, f64::min);
    let json = ResponseJson {
        fitted_a: r.fitted_a,
        fitted_u1: r.fitted_u1,
        ladder: r.ladder.iter().map(|(e, v)| [*e, *v]).collect(),
        tail: r.tail_estimate,
        series_terms_used: r.series_terms_used,
        stability: ladder
            .iter()
            .zip(&r.stability)
            .map(|(e, v)| [*e, *v])
            .collect(),
        stability_slope: r.stability_slope,
        stability_ratio: if min > 0.0 { max / min } else { f64::INFINITY },
        difference_slope: r.difference_slope,
        hat_h_sup: r.hat_h.sup_norm(),
        hat_h_mean: r.hat_h.integral(),
        resolution: settings.resolution,
        depth: settings.depth,
    };
    Ok((json, r.hat_h))
}

pub fn run_response(exp: &Experiment, dir: &ArtifactDir) -> Result<ResponseJson, RunError> {
    let w = exp.window(0)?;
    let ws = std::slice::from_ref(&w);
    let depth = depth_for(exp, ws)?;
    let settings = ResponseSettings {
        resolution: exp.resolution(),
        depth,
        n_terms: n_terms_for(exp, ws, depth)?,
    };
    let (json, hat_h) = response_json(&exp.family, &w, &exp.ladder, settings)?;
    dir.write_csv("hat_h.csv", &grid_table(vec!["x", "hat_h"], &[&hat_h]))?;
    dir.write_json("response_report.json", &json)?;
    Ok(json)
}

/// `decay.csv`: ω-averaged correlations `C_n` and the forward decay of the
/// centred observable times the density on the first ω.
pub fn run_correlations(exp: &Experiment, dir: &ArtifactDir) -> Result<Table, RunError> {
    let windows = exp.windows()?;
    let settings = series_settings(exp, &windows)?;
    let c = Cocycle::new(&exp.family, exp.config.options.eps, settings.resolution)?;
    let terms = par_map(&windows, |w| {
        variance_terms(&c, w, &exp.observable, &settings)
    })?;
    let summary = aggregate_variance(&terms)?;
    let w = &windows[0];
    let h = c.density_at(w, 0, settings.depth)?;
    let f = center_observable(
        &exp.observable.at(&exp.family, w, 0, settings.resolution)?,
        &h,
    )
    .mul(&h);
    let fit = c.decay_profile(w, &f, settings.n_max, exp.config.options.decay_beta)?;
    let mut t = Table::new(vec!["n", "correlation", "decay_norm", "decay_envelope"]);
    for n in 1..=settings.n_max {
        t.push(vec![
            Cell::Int(n as u64),
            Cell::Num(summary.correlation_terms[n - 1]),
            Cell::Num(fit.norms[n - 1]),
            Cell::Num(fit.envelope(n)),
        ]);
    }
    dir.write_csv("decay.csv", &t)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeJson {
    pub derivative_d: f64,
    pub d0_prime: f64,
    pub j1: f64,
    pub j2: f64,
    pub d2_terms: Vec<f64>,
    pub a_terms: Vec<f64>,
    pub sum_d2n: f64,
    pub sum_an: f64,
    pub max_abs_d1: f64,
    pub tail: f64,
    pub max_response_tail: f64,
    pub fd_delta: f64,
    pub fd_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloJson {
    pub orbits_per_omega: u64,
    pub steps: usize,
    pub burn_in: usize,
    pub sigma2: f64,
    pub standard_error: f64,
    /// Series value averaged over the same orbit positions.
    pub series_sigma2: f64,
    pub z_score: f64,
    pub within_3_se: bool,
    pub ks: KsTest,
}

/// Contents of `variance_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceJson {
    pub eps: f64,
    pub sigma2: f64,
    pub diagonal_term: f64,
    pub correlation_terms: Vec<f64>,
    pub truncation_n: usize,
    pub tail: f64,
    pub omega_samples: usize,
    pub omega_standard_error: f64,
    pub correlation_factor: f64,
    /// Term-wise derivative at ε = 0 with its finite-difference check.
    pub derivative: DerivativeJson,
    pub monte_carlo: Option<MonteCarloJson>,
}

/// Monte-Carlo variance over `windows` with the matching series values.
pub fn monte_carlo(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    eps: f64,
    observable: &qresponse_core::statistics::ObservableSpec,
    settings: &SeriesSettings,
    orbits: u64,
    steps: usize,
    burn_in: usize,
) -> Result<(McVariance, f64, Vec<f64>), RunError> {
    let c = Cocycle::new(spec, eps, settings.resolution)?;
    let mut per = Vec::with_capacity(windows.len());
    let mut series = Vec::with_capacity(windows.len());
    let mut first_sums = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let sampler = BirkhoffSampler::new(&c, w, observable, steps, burn_in, settings.depth)?;
        let sums = mc_sums(&sampler, derive_seed(w.seed(), 1), orbits)?;
        per.push(mc_variance(&sums, steps));
        series.push(orbit_averaged_sigma2(&c, w, observable, settings, steps)?);
        if i == 0 {
            first_sums = sums;
        }
    }
    let series_mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok((combine_mc(&per), series_mean, first_sums))
}

pub fn variance_json(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    eps: f64,
    observable: &qresponse_core::statistics::ObservableSpec,
    settings: &SeriesSettings,
    fd_delta: f64,
    mc: Option<(u64, usize, usize)>,
) -> Result<VarianceJson, RunError> {
    let at = |e: f64| -> Result<_, RunError> {
        let c = Cocycle::new(spec, e, settings.resolution)?;
        let terms = par_map(windows, |w| variance_terms(&c, w, observable, settings))?;
        Ok(aggregate_variance(&terms)?)
    };
    let v = at(eps)?;
    let fd = (at(fd_delta)?.sigma2 - at(-fd_delta)?.sigma2) / (2.0 * fd_delta);
    let c0 = Cocycle::new(spec, 0.0, settings.resolution)?;
    let d = aggregate_derivative(&par_map(windows, |w| {
        derivative_terms(&c0, w, observable, settings)
    })?)?;
    let monte_carlo = match mc {
        Some((orbits, steps, burn_in)) if orbits > 0 => {
            let (m, series, sums) = monte_carlo(
                spec, windows, eps, observable, settings, orbits, steps, burn_in,
            )?;
            let z = if m.standard_error > 0.0 {
                (m.sigma2 - series) / m.standard_error
            } else {
                0.0
            };
            let scaled: Vec<f64> = sums.iter().map(|s| s / (steps as f64).sqrt()).collect();
            Some(MonteCarloJson {
                orbits_per_omega: orbits,
                steps,
                burn_in,
                sigma2: m.sigma2,
                standard_error: m.standard_error,
                series_sigma2: series,
                z_score: z,
                within_3_se: z.abs() <= 3.0,
                ks: ks_normal(&scaled, None, series.max(0.0).sqrt()),
            })
        }
        _ => None,
    };
    Ok(VarianceJson {
        eps,
        sigma2: v.sigma2,
        diagonal_term: v.diagonal_term,
        correlation_terms: v.correlation_terms,
        truncation_n: v.truncation_n,
        tail: v.tail,
        omega_samples: windows.len(),
        omega_standard_error: v.omega_standard_error,
        correlation_factor: qresponse_core::statistics::CORRELATION_FACTOR,
        derivative: DerivativeJson {
            derivative_d: d.derivative_d,
            d0_prime: d.d0_prime,
            j1: d.j1,
            j2: d.j2,
            d2_terms: d.d2_terms,
            a_terms: d.a_terms,
            sum_d2n: d.sum_d2n,
            sum_an: d.sum_an,
            max_abs_d1: d.max_abs_d1,
            tail: d.tail,
            max_response_tail: d.max_response_tail,
            fd_delta,
            fd_derivative: fd,
        },
        monte_carlo,
    })
}

pub fn run_variance(exp: &Experiment, dir: &ArtifactDir) -> Result<VarianceJson, RunError> {
    let windows = exp.windows()?;
    let settings = series_settings(exp, &windows)?;
    let o = &exp.config.options;
    let json = variance_json(
        &exp.family,
        &windows,
        o.eps,
        &exp.observable,
        &settings,
        o.fd_delta,
        Some((o.mc_orbits, o.mc_steps, o.burn_in)),
    )?;
    dir.write_json("variance_report.json", &json)?;
    Ok(json)
}

/// Contents of `annealed_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedJson {
    pub analytic: f64,
    pub fd_slope: f64,
    /// `[ε, central difference]` pairs.
    pub slopes: Vec<[f64; 2]>,
    pub omega_samples: usize,
    pub abs_difference: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

pub fn annealed_json(
    spec: &MapFamilySpec,
    windows: &[OmegaWindow],
    phi: &qresponse_core::statistics::ObservableSpec,
    ladder: &[f64],
    settings: &SeriesSettings,
) -> Result<AnnealedJson, RunError> {
    let terms = par_map(windows, |w| annealed_terms(spec, w, phi, ladder, settings))?;
    let r = aggregate_annealed(&terms)?;
    let diff = (r.analytic - r.fd_slope).abs();
    let tol = (0.05 * r.fd_slope.abs()).max(1e-4);
    Ok(AnnealedJson {
        analytic: r.analytic,
        fd_slope: r.fd_slope,
        slopes: r.slopes.iter().map(|(e, s)| [*e, *s]).collect(),
        omega_samples: windows.len(),
        abs_difference: diff,
        tolerance: tol,
        agrees: diff <= tol,
    })
}

pub fn run_annealed(exp: &Experiment, dir: &ArtifactDir) -> Result<AnnealedJson, RunError> {
    let windows = exp.windows()?;
    let settings = series_settings(exp, &windows)?;
    let json = annealed_json(
        &exp.family,
        &windows,
        &exp.observable,
        &exp.ladder,
        &settings,
    )?;
    dir.write_json("annealed_report.json", &json)?;
    Ok(json)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionJson {
    pub n: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub pullback_sup: f64,
    pub pullback_variation: f64,
    pub pullback_min: f64,
}

/// Contents of `cone_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeJson {
    pub eps: f64,
    pub steepness: f64,
    pub q: f64,
    pub q_tail: f64,
    pub log_lipschitz_bound: f64,
    pub g_log_lipschitz: f64,
    pub g_is_member: bool,
    pub monotone: bool,
    pub conversion_margin: f64,
    pub distortion: Vec<DistortionJson>,
}

/// Profile of `f = 1` against `g = exp(observable)` at the first ω.
pub fn run_cone(exp: &Experiment, dir: &ArtifactDir) -> Result<ConeJson, RunError> {
    let w = exp.window(0)?;
    let o = &exp.config.options;
    let depth = depth_for(exp, std::slice::from_ref(&w))?;
    let n = exp.resolution();
    let c = Cocycle::new(&exp.family, o.eps, n)?;
    let params = cone_q(&exp.family, &w, o.cone_steepness, o.cone_truncation)?;
    let g = exp.observable.at(&exp.family, &w, 0, n)?.map(f64::exp);
    let m = cone_membership(&g, &params, MembershipMode::Derivative)?;
    let p = contraction_profile(&c, &w, &c.one(), &g, o.cone_n_max, depth)?;
    let mut t = Table::new(vec!["n", "d", "d_to_density", "sup_gap", "density_sup"]);
    for i in 0..p.d.len() {
        t.push(vec![
            Cell::Int(i as u64),
            Cell::Num(p.d[i]),
            Cell::Num(p.d_to_density[i]),
            Cell::Num(p.sup_gap[i]),
            Cell::Num(p.density_sup[i]),
        ]);
    }
    let ns: Vec<usize> = (1..=DISTORTION_MAX_N).collect();
    let distortion = par_map(&ns, |&k| distortion_bound(&c, &w, k, DISTORTION_SAMPLES))?
        .into_iter()
        .map(|r| DistortionJson {
            n: r.n,
            max_ratio: r.max_ratio,
            bound: r.bound,
            pullback_sup: r.pullback_sup,
            pullback_variation: r.pullback_variation,
            pullback_min: r.pullback_min,
        })
        .collect();
    let json = ConeJson {
        eps: o.eps,
        steepness: params.s,
        q: params.q,
        q_tail: params.tail,
        log_lipschitz_bound: params.log_lipschitz_bound(),
        g_log_lipschitz: m.log_lipschitz,
        g_is_member: m.member,
        monotone: p.is_monotone(1e-12),
        conversion_margin: p.conversion_margin(),
        distortion,
    };
    dir.write_csv("cone_profile.csv", &t)?;
    dir.write_json("cone_report.json", &json)?;
    Ok(json)
}

pub fn run_report(
    exp: &Experiment,
    dir: &ArtifactDir,
) -> Result<crate::acceptance::AcceptanceReport, RunError> {
    let report = crate::acceptance::run_all(exp.config.seed)?;
    dir.write_json("acceptance.json", &report)?;
    Ok(report)
}

/// Runs `command` and writes its artifacts plus a canonical copy of the
/// configuration into `dir`.
pub fn run(command: Command, exp: &Experiment, dir: &ArtifactDir) -> Result<(), RunError> {
    dir.write_json("config.json", &exp.config)?;
    match command {
        Command::Density => {
            let s = run_density(exp, dir)?;
            log::info!(
                "density: residual {:e} at depth {}",
                s.equivariance_residual,
                s.depth
            );
        }
        Command::Response => {
            let r = run_response(exp, dir)?;
            log::info!(
                "response: fitted a = {:?}, U1 = {:e}",
                r.fitted_a,
                r.fitted_u1
            );
        }
        Command::Correlations => {
            run_correlations(exp, dir)?;
        }
        Command::Variance => {
            let v = run_variance(exp, dir)?;
            log::info!(
                "variance: Σ² = {}, derivative {}",
                v.sigma2,
                v.derivative.derivative_d
            );
        }
        Command::Annealed => {
            let a = run_annealed(exp, dir)?;
            log::info!(
                "annealed: analytic {} vs difference {}",
                a.analytic,
                a.fd_slope
            );
        }
        Command::Cone => {
            run_cone(exp, dir)?;
        }
        Command::Report => {
            let r = run_report(exp, dir)?;
            log::info!("report: {} passed, {} failed", r.passed, r.failed);
        }
    }
    Ok(())
}
