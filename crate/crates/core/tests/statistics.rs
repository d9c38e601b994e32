use qresponse_core::environment::derive_seed;
use qresponse_core::families;
use qresponse_core::statistics::{
    annealed_response, annealed_terms, combine_mc, derivative_terms, mc_variance,
    orbit_averaged_sigma2, variance_derivative, variance_fd_derivative, variance_sigma2,
    variance_terms, BirkhoffSampler, McVariance, ObservableSpec, SeriesSettings,
};
use qresponse_core::{
    BaseProcessSpec, Cocycle, MapFamilySpec, OmegaWindow, SymbolMap, TrigPoly, TrigTerm,
};
use std::f64::consts::PI;

const SETTINGS: SeriesSettings = SeriesSettings {
    resolution: 256,
    depth: 60,
    n_max: 40,
    n_terms: 60,
};

fn random_window(seed: u64, half_width: usize) -> OmegaWindow {
    OmegaWindow::generate(&BaseProcessSpec::uniform_iid(2).unwrap(), seed, half_width).unwrap()
}

fn cos1() -> ObservableSpec {
    ObservableSpec::uniform(TrigPoly::cos(1, 1.0))
}

/// Quenched Monte-Carlo variance at `window`, with the series averaged over
/// the same positions for comparison.
fn mc_and_series(
    spec: &MapFamilySpec,
    eps: f64,
    window: &OmegaWindow,
    f: &ObservableSpec,
    orbits: u64,
    steps: usize,
) -> (McVariance, f64) {
    let c = Cocycle::new(spec, eps, SETTINGS.resolution).unwrap();
    let sampler = BirkhoffSampler::new(&c, window, f, steps, 40, SETTINGS.depth).unwrap();
    let sums = sampler
        .samples(derive_seed(window.seed(), 1), 0, orbits)
        .unwrap();
    let mc = mc_variance(&sums, steps);
    let settings = SeriesSettings {
        n_max: 30,
        ..SETTINGS
    };
    let series = orbit_averaged_sigma2(&c, window, f, &settings, steps).unwrap();
    (mc, series)
}

#[test]
fn doubling_variance_closed_form() {
    let spec = families::doubling();
    let w = [OmegaWindow::constant(0, 200)];
    let v = variance_sigma2(&spec, &w, 0.0, &cos1(), &SETTINGS).unwrap();
    assert!((v.sigma2 - 0.5).abs() <= 1e-8, "{}", v.sigma2);
    assert!((v.diagonal_term - 0.5).abs() <= 1e-12);
    let constant = ObservableSpec::uniform(TrigPoly::constant(2.5));
    assert!(
        variance_sigma2(&spec, &w, 0.0, &constant, &SETTINGS)
            .unwrap()
            .sigma2
            .abs()
            < 1e-24
    );
}

#[test]
fn correlations_vanish_for_pure_modes_under_doubling() {
    let spec = families::doubling();
    let w = OmegaWindow::constant(0, 200);
    let c = Cocycle::new(&spec, 0.0, 256).unwrap();
    for m in 1..=12 {
        for p in [TrigPoly::cos(m, 1.0), TrigPoly::sin(m, 1.0)] {
            let t = variance_terms(&c, &w, &ObservableSpec::uniform(p), &SETTINGS).unwrap();
            assert!(t.correlations.iter().all(|v| v.abs() <= 1e-12), "mode {m}");
        }
    }
}

#[test]
fn random_linear_variance_matches_monte_carlo() {
    let spec = families::random_linear();
    let w = random_window(31, 1200);
    let (mc, series) = mc_and_series(&spec, 0.0, &w, &cos1(), 4000, 1000);
    assert!((series - 0.5).abs() < 1e-8);
    assert!(
        (mc.sigma2 - series).abs() <= 3.0 * mc.standard_error,
        "{mc:?} vs {series}"
    );
}

#[test]
fn variance_matches_monte_carlo_on_nonlinear_families() {
    let f = ObservableSpec::uniform(TrigPoly::new(vec![
        TrigTerm::new(1, 0.4, 1.0),
        TrigTerm::new(2, 0.0, 0.3),
    ]));
    for spec in [families::nonlinear_pair(), families::mixed_perturbation()] {
        let w = random_window(8, 700);
        for eps in [0.0, 0.5 * spec.eps_max(), -0.5 * spec.eps_max()] {
            let (mc, series) = mc_and_series(&spec, eps, &w, &f, 1000, 400);
            assert!(
                (mc.sigma2 - series).abs() <= 3.0 * mc.standard_error,
                "ε = {eps}: {mc:?} vs {series}"
            );
        }
    }
}

#[test]
fn fourier_oracle_for_the_derivative() {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 200);
    let c = Cocycle::new(&spec, 0.0, 256).unwrap();
    let t = derivative_terms(&c, &w, &cos1(), &SETTINGS).unwrap();
    assert!(t.j1.abs() <= 1e-6);
    assert!(t.j2.abs() <= 1e-6);
    assert!((t.d2[0] + PI / 2.0).abs() <= 1e-6);
    assert!(t.d2[1..].iter().all(|v| v.abs() <= 1e-6));
    assert!(t.a.iter().all(|v| v.abs() <= 1e-6));
    assert!((t.derivative() + PI).abs() <= 1e-6);
    let fd = variance_fd_derivative(&spec, &[w], &cos1(), 1e-3, &SETTINGS).unwrap();
    assert!(
        (t.derivative() - fd).abs() <= (0.05 * fd.abs()).max(1e-4),
        "{} vs {fd}",
        t.derivative()
    );
}

#[test]
fn derivative_matches_finite_differences_on_a_random_family() {
    let spec = families::nonlinear_pair();
    let windows: Vec<OmegaWindow> = (0..3)
        .map(|i| random_window(derive_seed(5, i), 200))
        .collect();
    let f = ObservableSpec::uniform(TrigPoly::new(vec![
        TrigTerm::new(1, 0.5, 1.0),
        TrigTerm::new(3, 0.2, 0.0),
    ]));
    let d = variance_derivative(&spec, &windows, &f, &SETTINGS).unwrap();
    let fd = variance_fd_derivative(&spec, &windows, &f, 1e-3, &SETTINGS).unwrap();
    assert!(d.tail < 1e-8 && d.max_response_tail < 1e-8);
    assert!(
        (d.derivative_d - fd).abs() <= (0.05 * fd.abs()).max(1e-4),
        "{} vs {fd}",
        d.derivative_d
    );
    assert!(d.max_abs_d1 <= 1e-12, "{}", d.max_abs_d1);
    assert!(d.j2.abs() <= 1e-12);
}

#[test]
fn zero_perturbation_has_zero_derivative() {
    let spec = MapFamilySpec::new(
        vec![SymbolMap::new(
            2,
            0.0,
            TrigPoly::sin(1, 0.04),
            TrigPoly::zero(),
        )],
        0.05,
    )
    .unwrap();
    let w = [OmegaWindow::constant(0, 200)];
    let d = variance_derivative(&spec, &w, &cos1(), &SETTINGS).unwrap();
    assert_eq!(d.derivative_d, 0.0);
    assert_eq!(
        variance_fd_derivative(&spec, &w, &cos1(), 1e-3, &SETTINGS).unwrap(),
        0.0
    );
}

#[test]
fn annealed_examples() {
    let ladder = [1e-2, 3e-3, 1e-3, 3e-4];
    let s = SeriesSettings {
        n_max: 1,
        ..SETTINGS
    };
    let spec = families::doubling_sine(2);
    let w = [OmegaWindow::constant(0, 200)];
    let r = annealed_response(&spec, &w, &cos1(), &ladder, &s).unwrap();
    assert!((r.analytic + PI).abs() < 1e-9);
    assert!((r.analytic - r.fd_slope).abs() <= (0.05 * r.fd_slope.abs()).max(1e-4));

    let flat = ObservableSpec::uniform(TrigPoly::constant(1.7));
    let spec = families::mixed_perturbation();
    let ws: Vec<OmegaWindow> = (0..4)
        .map(|i| random_window(derive_seed(2, i), 200))
        .collect();
    let r = annealed_response(&spec, &ws, &flat, &ladder, &s).unwrap();
    assert!(r.analytic.abs() < 1e-10 && r.fd_slope.abs() < 1e-9, "{r:?}");

    let r = annealed_response(&spec, &ws, &cos1(), &ladder, &s).unwrap();
    let per: Vec<f64> = ws
        .iter()
        .map(|w| {
            annealed_terms(&spec, w, &cos1(), &ladder, &s)
                .unwrap()
                .analytic
        })
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    assert!((r.analytic - mean).abs() <= 1e-12);
    assert!((r.analytic - r.fd_slope).abs() <= (0.05 * r.fd_slope.abs()).max(1e-4));
}

#[test]
fn symbol_dependent_observables() {
    let spec = families::nonlinear_pair();
    let f = ObservableSpec::new(vec![TrigPoly::cos(1, 1.0), TrigPoly::sin(2, 0.5)]).unwrap();
    assert!(f.check_alphabet(2).is_ok());
    assert!(f.check_alphabet(3).is_err());
    let w = random_window(4, 200);
    let c = Cocycle::new(&spec, 0.0, 256).unwrap();
    let t = variance_terms(&c, &w, &f, &SETTINGS).unwrap();
    assert!(t.sigma2() > 0.0);
    let tail = t.correlations.last().unwrap().abs();
    assert!(tail < 1e-12, "{tail}");
}

#[test]
fn monte_carlo_is_reproducible() {
    let spec = families::nonlinear_pair();
    let w = random_window(3, 300);
    let c = Cocycle::new(&spec, 0.01, 128).unwrap();
    let sampler = BirkhoffSampler::new(&c, &w, &cos1(), 100, 20, 40).unwrap();
    let a = sampler.samples(7, 0, 50).unwrap();
    let b = sampler.samples(7, 0, 50).unwrap();
    assert_eq!(a, b);
    let tail = sampler.samples(7, 25, 25).unwrap();
    assert_eq!(&a[25..], &tail[..]);
    let per = [mc_variance(&a[..25], 100), mc_variance(&a[25..], 100)];
    let combined = combine_mc(&per);
    assert_eq!(combined.orbits, 50);
}
