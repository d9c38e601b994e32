//! The acceptance suite run by `qresponse report`. Every criterion uses fixed
//! families, resolutions and tolerances; only the random draws depend on the
//! configured seed. Reproducibility across thread counts is checked outside
//! the process, by comparing two `acceptance.json` files.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use qresponse_core::cone::{contraction_profile, distortion_bound, hilbert_metric_positive};
use qresponse_core::environment::derive_seed;
use qresponse_core::numeric::unit_f64;
use qresponse_core::response::{derivative_operator, response_function, ResponseSettings};
use qresponse_core::statistics::{
    derivative_terms, variance_terms, ObservableSpec, SeriesSettings,
};
use qresponse_core::{
    families, BaseProcessSpec, Cocycle, GridFunction, OmegaWindow, TrigPoly, TrigTerm,
};

use crate::error::RunError;
use crate::runner::{annealed_json, monte_carlo, response_json};
use crate::stats::{ks_normal, KsTest};

pub const N: usize = 256;
pub const DEPTH: usize = 60;
pub const LADDER: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];
pub const MC_ORBITS: u64 = 10_000;
pub const MC_STEPS: usize = 1000;
pub const MC_BURN_IN: usize = 50;
pub const ANNEALED_OMEGAS: usize = 100;
pub const RANDOM_PAIRS: usize = 20;
pub const RANDOM_FUNCTIONS: usize = 10;
pub const CRITERIA: u32 = 12;
/// Relative slack for comparisons against a maximum computed from the same data.
pub const ENVELOPE_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Measured quantities and the thresholds they are compared with.
    pub values: BTreeMap<String, f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `S_n/√n` of the variance Monte Carlo against `N(0, Σ²)`.
    pub clt_ks: Option<KsTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    pub diagnostics: Diagnostics,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

struct Outcome {
    passed: bool,
    values: Vec<(&'static str, f64)>,
    detail: String,
    ks: Option<KsTest>,
}

impl Outcome {
    fn new(passed: bool, values: Vec<(&'static str, f64)>, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            values,
            detail: detail.into(),
            ks: None,
        }
    }
}

type Step = Result<Outcome, RunError>;

pub fn name(id: u32) -> &'static str {
    match id {
        1 => "Fourier identities of the doubling map",
        2 => "equivariant density",
        3 => "closed-form response",
        4 => "effective response rate",
        5 => "statistical stability",
        6 => "null response",
        7 => "variance",
        8 => "variance derivative",
        9 => "annealed response",
        10 => "cone contraction",
        11 => "distortion and sup bound",
        12 => "derivative-operator consistency",
        _ => "unknown",
    }
}

fn random_window(
    seed: u64,
    index: u64,
    alphabet: usize,
    half_width: usize,
) -> Result<OmegaWindow, RunError> {
    Ok(OmegaWindow::generate(
        &BaseProcessSpec::uniform_iid(alphabet)?,
        derive_seed(seed, index),
        half_width,
    )?)
}

/// Band-limited trigonometric polynomial with `terms` modes and
/// coefficients uniform in `[−amp, amp]`.
fn random_poly(seed: u64, terms: u32, amp: f64) -> TrigPoly {
    let u = |k: u64| amp * (2.0 * unit_f64(derive_seed(seed, k)) - 1.0);
    TrigPoly::new(
        (1..=terms)
            .map(|m| TrigTerm::new(m, u(2 * m as u64), u(2 * m as u64 + 1)))
            .collect(),
    )
}

fn cos_mode(m: u32) -> GridFunction {
    GridFunction::from_fn(N, move |x| (2.0 * PI * m as f64 * x).cos())
}

fn sin_mode(m: u32) -> GridFunction {
    GridFunction::from_fn(N, move |x| (2.0 * PI * m as f64 * x).sin())
}

fn fourier_identities() -> Step {
    let spec = families::doubling();
    let c = Cocycle::new(&spec, 0.0, N)?;
    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    for (m1, m2) in [(cos_mode(1), cos_mode(2)), (sin_mode(1), sin_mode(2))] {
        e1 = e1.max(c.apply(0, &m1)?.sup_norm());
        e2 = e2.max(c.apply(0, &m2)?.sub(&m1).sup_norm());
    }
    let tol = 1e-10;
    Ok(Outcome::new(
        e1 <= tol && e2 <= tol,
        vec![
            ("l_e1_sup", e1),
            ("l_e2_minus_e1_sup", e2),
            ("tolerance", tol),
        ],
        "cosine and sine modes at N = 256",
    ))
}

fn equivariant_density(seed: u64) -> Step {
    let lin = families::random_linear();
    let w = random_window(seed, 2, 2, 200)?;
    let c = Cocycle::new(&lin, 0.0, N)?;
    let mut linear = 0.0f64;
    for rel in -5..=5 {
        linear = linear.max(c.density_at(&w, rel, DEPTH)?.add_scalar(-1.0).sup_norm());
    }
    let spec = families::nonlinear_pair();
    let w = random_window(seed, 3, 2, 200)?;
    let mut residual = 0.0f64;
    for eps in [0.0, 0.02, -0.04] {
        let c = Cocycle::new(&spec, eps, N)?;
        residual = residual.max(c.equivariant_density(&w, DEPTH, 1e-8)?.residual);
    }
    Ok(Outcome::new(
        linear <= 1e-10 && residual <= 1e-8,
        vec![
            ("linear_density_error", linear),
            ("linear_tolerance", 1e-10),
            ("nonlinear_equivariance_residual", residual),
            ("nonlinear_tolerance", 1e-8),
        ],
        "random linear family at 11 positions; nonlinear pair at ε ∈ {0, 0.02, −0.04}, depth 60",
    ))
}

fn closed_form_response() -> Step {
    let spec = families::doubling_sine(2);
    let c = Cocycle::new(&spec, 0.0, N)?;
    let w = OmegaWindow::constant(0, 200);
    let r = response_function(&c, &w, DEPTH, DEPTH)?;
    let err = r.hat_h.sub(&cos_mode(1).scale(-2.0 * PI)).sup_norm();
    Ok(Outcome::new(
        err <= 1e-6,
        vec![("error_sup", err), ("tolerance", 1e-6)],
        "2x + ε sin 4πx",
    ))
}

fn response_settings() -> ResponseSettings {
    ResponseSettings {
        resolution: N,
        depth: DEPTH,
        n_terms: DEPTH,
    }
}

/// Ladder reports for the closed-form family and the nonlinear pair.
fn ladder_reports(seed: u64) -> Result<[crate::runner::ResponseJson; 2], RunError> {
    let sin4 = families::doubling_sine(2);
    let (a, _) = response_json(
        &sin4,
        &OmegaWindow::constant(0, 200),
        &LADDER,
        response_settings(),
    )?;
    let pair = families::nonlinear_pair();
    let (b, _) = response_json(
        &pair,
        &random_window(seed, 4, 2, 200)?,
        &LADDER,
        response_settings(),
    )?;
    Ok([a, b])
}

fn response_rate(seed: u64) -> Step {
    let reports = ladder_reports(seed)?;
    let mut passed = true;
    let mut values = Vec::new();
    for (r, (ka, ku, kd)) in reports.iter().zip([
        ("sin4_fitted_a", "sin4_fitted_u1", "sin4_min_envelope_ratio"),
        ("pair_fitted_a", "pair_fitted_u1", "pair_min_envelope_ratio"),
    ]) {
        let a = r.fitted_a.unwrap_or(f64::NAN);
        // U1 is the maximum of r/ε^a, so the tightest point meets the
        // envelope up to the rounding of that quotient.
        let margin = r
            .ladder
            .iter()
            .map(|[e, res]| r.fitted_u1 * e.powf(a) / res)
            .fold(f64::INFINITY, f64::min);
        passed &= (0.8..=1.2).contains(&a) && margin >= 1.0 - ENVELOPE_ROUNDING;
        values.extend([(ka, a), (ku, r.fitted_u1), (kd, margin)]);
    }
    Ok(Outcome::new(
        passed,
        values,
        "ladder {1e-2, 3e-3, 1e-3, 3e-4}; a ∈ [0.8, 1.2] and U1 ε^a / r(ε) ≥ 1 on both families",
    ))
}

fn statistical_stability(seed: u64) -> Step {
    let reports = ladder_reports(seed)?;
    let (a, b) = (reports[0].stability_ratio, reports[1].stability_ratio);
    Ok(Outcome::new(
        a <= 2.0 && b <= 2.0,
        vec![("sin4_ratio", a), ("pair_ratio", b), ("tolerance", 2.0)],
        "max/min of ‖h_ε − h‖_∞/ε over the ladder",
    ))
}

fn null_response() -> Step {
    let spec = families::doubling_sine(1);
    let (r, _) = response_json(
        &spec,
        &OmegaWindow::constant(0, 200),
        &LADDER,
        response_settings(),
    )?;
    let slope = r.difference_slope.unwrap_or(f64::NAN);
    Ok(Outcome::new(
        r.hat_h_sup <= 1e-10 && slope >= 1.8,
        vec![
            ("hat_h_sup", r.hat_h_sup),
            ("hat_h_tolerance", 1e-10),
            ("difference_slope", slope),
            ("slope_minimum", 1.8),
        ],
        "2x + ε sin 2πx",
    ))
}

fn series(n_max: usize) -> SeriesSettings {
    SeriesSettings {
        resolution: N,
        depth: DEPTH,
        n_max,
        n_terms: DEPTH,
    }
}

fn cos1() -> ObservableSpec {
    ObservableSpec::uniform(TrigPoly::cos(1, 1.0))
}

fn variance(seed: u64) -> Step {
    let spec = families::doubling();
    let w = OmegaWindow::constant(0, MC_STEPS + MC_BURN_IN + 200);
    let s = series(40);
    let c = Cocycle::new(&spec, 0.0, N)?;
    let sigma2 = variance_terms(&c, &w, &cos1(), &s)?.sigma2();
    let err = (sigma2 - 0.5).abs();
    // The constant window has seed 0; mix in the configured seed for the orbits.
    let w = OmegaWindow::generate(
        &BaseProcessSpec::uniform_iid(1)?,
        derive_seed(seed, 7),
        w.half_width(),
    )?;
    let (mc, series_value, sums) = monte_carlo(
        &spec,
        std::slice::from_ref(&w),
        0.0,
        &cos1(),
        &s,
        MC_ORBITS,
        MC_STEPS,
        MC_BURN_IN,
    )?;
    let z = (mc.sigma2 - series_value) / mc.standard_error;
    let scaled: Vec<f64> = sums.iter().map(|v| v / (MC_STEPS as f64).sqrt()).collect();
    let mut out = Outcome::new(
        err <= 1e-8 && z.abs() <= 3.0,
        vec![
            ("sigma2", sigma2),
            ("sigma2_error", err),
            ("sigma2_tolerance", 1e-8),
            ("mc_sigma2", mc.sigma2),
            ("mc_standard_error", mc.standard_error),
            ("mc_z", z),
            ("z_tolerance", 3.0),
        ],
        "doubling map, f = cos 2πx; 10⁴ orbits × 10³ steps",
    );
    out.ks = Some(ks_normal(&scaled, Some(0.0), sigma2.sqrt()));
    Ok(out)
}

fn variance_derivative() -> Step {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 200);
    let s = series(40);
    let c0 = Cocycle::new(&spec, 0.0, N)?;
    let t = derivative_terms(&c0, &w, &cos1(), &s)?;
    let delta = 1e-3;
    let at = |e: f64| -> Result<f64, RunError> {
        Ok(variance_terms(&Cocycle::new(&spec, e, N)?, &w, &cos1(), &s)?.sigma2())
    };
    let fd = (at(delta)? - at(-delta)?) / (2.0 * delta);
    let d = t.derivative();
    let tol = (0.05 * fd.abs()).max(1e-4);
    let d21 = t.d2[0] + PI / 2.0;
    let d2_rest = t.d2[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a_max = t.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let components = [t.j1.abs(), t.j2.abs(), d21.abs(), d2_rest, a_max];
    Ok(Outcome::new(
        (d - fd).abs() <= tol && components.iter().all(|v| *v <= 1e-6),
        vec![
            ("derivative_d", d),
            ("fd_derivative", fd),
            ("tolerance", tol),
            ("j1", t.j1),
            ("j2", t.j2),
            ("d2_1_plus_half_pi", d21),
            ("d2_rest_max_abs", d2_rest),
            ("a_max_abs", a_max),
            ("component_tolerance", 1e-6),
        ],
        "2x + ε sin 4πx, f = cos 2πx, δ = 1e-3; correlation factor 2",
    ))
}

fn annealed(seed: u64) -> Step {
    let spec = families::mixed_perturbation();
    let windows = (0..ANNEALED_OMEGAS as u64)
        .map(|i| random_window(seed, 1000 + i, 2, 200))
        .collect::<Result<Vec<_>, _>>()?;
    let r = annealed_json(&spec, &windows, &cos1(), &LADDER, &series(1))?;
    Ok(Outcome::new(
        r.agrees,
        vec![
            ("analytic", r.analytic),
            ("fd_slope", r.fd_slope),
            ("abs_difference", r.abs_difference),
            ("tolerance", r.tolerance),
        ],
        "mixed two-symbol family, Φ = cos 2πx, 100 ω-samples",
    ))
}

fn positive(p: &TrigPoly) -> GridFunction {
    GridFunction::from_fn(N, |x| p.eval(x, 0).exp())
}

fn cone_contraction(seed: u64) -> Step {
    let spec = families::nonlinear_pair();
    let c = Cocycle::new(&spec, 0.01, N)?;
    let pairs: Vec<u64> = (0..RANDOM_PAIRS as u64).collect();
    let worst = pairs
        .par_iter()
        .map(|&i| -> Result<f64, RunError> {
            let w = random_window(seed, 2000 + i, 2, 200)?;
            let f = positive(&random_poly(derive_seed(seed, 3000 + i), 3, 0.5));
            let g = positive(&random_poly(derive_seed(seed, 4000 + i), 3, 0.5));
            let p = contraction_profile(&c, &w, &f, &g, 40, DEPTH)?;
            Ok(p.d
                .windows(2)
                .map(|d| d[1] - d[0])
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let doubling = families::doubling();
    let cd = Cocycle::new(&doubling, 0.0, N)?;
    let g = cos_mode(1).scale(0.5).add_scalar(1.0);
    let d40 =
        contraction_profile(&cd, &OmegaWindow::constant(0, 200), &cd.one(), &g, 40, 40)?.d[40];
    let ln3 = (hilbert_metric_positive(&cd.one(), &g)? - 3f64.ln()).abs();
    Ok(Outcome::new(
        worst <= 1e-12 && d40 <= 1e-6 && ln3 <= 1e-10,
        vec![
            ("max_profile_increase", worst),
            ("slack", 1e-12),
            ("doubling_d40", d40),
            ("d40_tolerance", 1e-6),
            ("ln3_error", ln3),
            ("ln3_tolerance", 1e-10),
        ],
        "20 random positive pairs on the nonlinear pair at ε = 0.01",
    ))
}

fn distortion(seed: u64) -> Step {
    let spec = families::nonlinear_pair();
    let w = random_window(seed, 5, 2, 200)?;
    let mut ratio_margin = f64::INFINITY;
    let mut sup_margin = f64::INFINITY;
    for eps in [0.0, 0.04] {
        let c = Cocycle::new(&spec, eps, N)?;
        for n in 1..=8 {
            let r = distortion_bound(&c, &w, n, 64)?;
            ratio_margin = ratio_margin.min(r.bound - r.max_ratio);
            sup_margin = sup_margin.min(1.0 + r.bound - r.pullback_sup);
        }
    }
    Ok(Outcome::new(
        ratio_margin >= 0.0 && sup_margin >= 0.0,
        vec![
            ("min_bound_minus_ratio", ratio_margin),
            ("min_one_plus_bound_minus_sup", sup_margin),
        ],
        "nonlinear pair, n = 1..8, ε ∈ {0, 0.04}",
    ))
}

/// `‖(L_δ − L_{−δ})f/2δ − L̂f‖_{C¹}` for the symbol at position 0.
fn derivative_gap(
    spec: &qresponse_core::MapFamilySpec,
    w: &OmegaWindow,
    f: &GridFunction,
    delta: f64,
) -> Result<f64, RunError> {
    let c0 = Cocycle::new(spec, 0.0, N)?;
    let exact = derivative_operator(&c0, w, f)?;
    let lp = Cocycle::new(spec, delta, N)?.apply_at(w, 0, f)?;
    let lm = Cocycle::new(spec, -delta, N)?.apply_at(w, 0, f)?;
    Ok(lp.sub(&lm).scale(0.5 / delta).sub(&exact).c1_norm())
}

fn derivative_consistency(seed: u64) -> Step {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 10);
    let mut gap = 0.0f64;
    let mut gap_small = 0.0f64;
    for i in 0..RANDOM_FUNCTIONS as u64 {
        let p = random_poly(derive_seed(seed, 5000 + i), 4, 0.5);
        let f = GridFunction::from_fn(N, |x| 1.0 + p.eval(x, 0));
        gap = gap.max(derivative_gap(&spec, &w, &f, 1e-4)?);
        gap_small = gap_small.max(derivative_gap(&spec, &w, &f, 1e-5)?);
    }
    let tol = 1e-6;
    Ok(Outcome::new(
        gap <= tol,
        vec![
            ("max_c1_gap", gap),
            ("tolerance", tol),
            ("max_c1_gap_delta_1e-5", gap_small),
            ("gap_ratio_1e-4_over_1e-5", gap / gap_small),
        ],
        "2x + ε sin 4πx, 10 random f of degree ≤ 4 at δ = 1e-4. A gap ratio near 100 identifies the δ² truncation \
         error (δ²/6)‖∂³_ε L_ε f‖_{C¹} of the central difference, which exceeds 1e-6 for this family",
    ))
}

fn evaluate(id: u32, seed: u64) -> Step {
    match id {
        1 => fourier_identities(),
        2 => equivariant_density(seed),
        3 => closed_form_response(),
        4 => response_rate(seed),
        5 => statistical_stability(seed),
        6 => null_response(),
        7 => variance(seed),
        8 => variance_derivative(),
        9 => annealed(seed),
        10 => cone_contraction(seed),
        11 => distortion(seed),
        12 => derivative_consistency(seed),
        _ => unreachable!("criterion {id}"),
    }
}

/// Runs criterion `id`. Computation errors become a failed criterion.
pub fn run_one(id: u32, seed: u64) -> (Criterion, Option<KsTest>) {
    let (passed, values, detail, ks) = match evaluate(id, seed) {
        Ok(o) => (
            o.passed,
            o.values
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            o.detail,
            o.ks,
        ),
        Err(e) => (false, BTreeMap::new(), format!("error: {e}"), None),
    };
    (
        Criterion {
            id,
            name: name(id).to_string(),
            passed,
            values,
            detail,
        },
        ks,
    )
}

pub fn run_all(seed: u64) -> Result<AcceptanceReport, RunError> {
    let ids: Vec<u32> = (1..=CRITERIA).collect();
    let results: Vec<(Criterion, Option<KsTest>)> =
        ids.par_iter().map(|&id| run_one(id, seed)).collect();
    let clt_ks = results.iter().find_map(|(_, k)| *k);
    let criteria: Vec<Criterion> = results.into_iter().map(|(c, _)| c).collect();
    let passed = criteria.iter().filter(|c| c.passed).count();
    Ok(AcceptanceReport {
        seed,
        failed: criteria.len() - passed,
        all_passed: passed == criteria.len(),
        passed,
        criteria,
        diagnostics: Diagnostics { clt_ks },
    })
}
