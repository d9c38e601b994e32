use proptest::prelude::*;
use qresponse_core::families;
use qresponse_core::response::{
    default_terms, derivative_operator, first_order_ratio, response_chain, response_function,
    response_verify, second_derivative_bound_check, telescoping_sum, ResponseSettings,
};
use qresponse_core::{
    BaseProcessSpec, Cocycle, GridFunction, MapFamilySpec, OmegaWindow, SymbolMap, TrigPoly,
    TrigTerm,
};
use std::f64::consts::PI;

const N: usize = 256;
const LADDER: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];
const SETTINGS: ResponseSettings = ResponseSettings {
    resolution: N,
    depth: 80,
    n_terms: 80,
};

fn random_window(seed: u64, half_width: usize) -> OmegaWindow {
    OmegaWindow::generate(&BaseProcessSpec::uniform_iid(2).unwrap(), seed, half_width).unwrap()
}

fn trig_poly(coeffs: &[(f64, f64)]) -> TrigPoly {
    TrigPoly::new(
        coeffs
            .iter()
            .enumerate()
            .map(|(i, (s, c))| TrigTerm::new(i as u32 + 1, *s, *c))
            .collect(),
    )
}

fn unperturbed_pair() -> MapFamilySpec {
    MapFamilySpec::new(
        vec![
            SymbolMap::new(2, 0.0, TrigPoly::sin(1, 0.04), TrigPoly::zero()),
            SymbolMap::new(3, 0.1, TrigPoly::cos(1, 0.05), TrigPoly::zero()),
        ],
        0.05,
    )
    .unwrap()
}

#[test]
fn derivative_operator_fourier_examples() {
    let w = OmegaWindow::constant(0, 10);
    let one = GridFunction::constant(N, 1.0);
    let s2 = families::doubling_sine(1);
    let c = Cocycle::new(&s2, 0.0, N).unwrap();
    assert!(derivative_operator(&c, &w, &one).unwrap().sup_norm() <= 1e-10);
    let s4 = families::doubling_sine(2);
    let c = Cocycle::new(&s4, 0.0, N).unwrap();
    let expected = GridFunction::from_fn(N, |x| -2.0 * PI * (2.0 * PI * x).cos());
    assert!(
        derivative_operator(&c, &w, &one)
            .unwrap()
            .sub(&expected)
            .sup_norm()
            < 1e-10
    );
}

#[test]
fn central_differences_carry_a_second_order_error() {
    // Sup over x = j/64 of |(L_δ1 − L_{−δ}1)/2δ + 2π cos 2πx| at δ = 1e-4 for
    // 2x + ε sin 4πx, from a 40-digit root-finding computation.
    const ORACLE: f64 = 2.923288514731458e-6;
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 10);
    let one = GridFunction::constant(N, 1.0);
    let c0 = Cocycle::new(&spec, 0.0, N).unwrap();
    let exact = derivative_operator(&c0, &w, &one).unwrap();
    let gap = |delta: f64| {
        let lp = Cocycle::new(&spec, delta, N)
            .unwrap()
            .apply_at(&w, 0, &one)
            .unwrap();
        let lm = Cocycle::new(&spec, -delta, N)
            .unwrap()
            .apply_at(&w, 0, &one)
            .unwrap();
        lp.sub(&lm).scale(0.5 / delta).sub(&exact)
    };
    let g = gap(1e-4);
    let sampled = (0..64).map(|j| g.values()[4 * j].abs()).fold(0.0, f64::max);
    assert!((sampled - ORACLE).abs() < 1e-10, "{sampled}");
    let ratio = g.sup_norm() / gap(1e-5).sup_norm();
    assert!((ratio - 100.0).abs() < 1.0, "{ratio}");
}

#[test]
fn closed_form_response() {
    let spec = families::doubling_sine(2);
    let c = Cocycle::new(&spec, 0.0, N).unwrap();
    let w = OmegaWindow::constant(0, 200);
    let r = response_function(&c, &w, 40, 40).unwrap();
    let expected = GridFunction::from_fn(N, |x| -2.0 * PI * (2.0 * PI * x).cos());
    assert!(r.hat_h.sub(&expected).sup_norm() <= 1e-6);
    let zero = families::doubling();
    let c = Cocycle::new(&zero, 0.0, N).unwrap();
    assert_eq!(
        response_function(&c, &w, 10, 10).unwrap().hat_h.sup_norm(),
        0.0
    );
}

#[test]
fn mixed_family_response_is_mean_zero_and_enveloped() {
    let spec = families::mixed_perturbation();
    let w = random_window(17, 200);
    let c = Cocycle::new(&spec, 0.0, N).unwrap();
    let n_terms = 60;
    let r = response_function(&c, &w, n_terms, 60).unwrap();
    assert!(r.hat_h.integral().abs() <= 1e-9);
    let mut bound = 0.0;
    for n in 0..=n_terms {
        let p = -(n as i64) - 1;
        let h = c.density_at(&w, p, 60).unwrap();
        let g = c
            .apply_derivative(spec.symbol_at(&w, p).unwrap(), &h)
            .unwrap();
        if n == 0 {
            bound += g.sup_norm();
        } else {
            let fit = c
                .decay_profile(&w.shift(-(n as i64)).unwrap(), &g, n, 1.0)
                .unwrap();
            bound += fit.envelope(n);
        }
    }
    let sup = r.hat_h.sup_norm();
    assert!(sup > 0.0 && sup <= bound, "{sup} > {bound}");
}

#[test]
fn response_chain_is_equivariant() {
    let spec = families::nonlinear_pair();
    let w = random_window(6, 200);
    let c = Cocycle::new(&spec, 0.0, N).unwrap();
    let chain = response_chain(&c, &w, 0, 3, 60, 60).unwrap();
    for p in 0..=3 {
        assert!(chain.response(p).integral().abs() < 1e-9);
        let single = response_function(&c, &w.shift(p).unwrap(), 60 + p as usize, 60).unwrap();
        assert!(single.hat_h.sub(chain.response(p)).sup_norm() < 1e-12);
    }
    assert!(chain.tail_estimate < 1e-8, "{}", chain.tail_estimate);
    let terms = default_terms(&spec, &w, chain.response(0).c1_norm()).unwrap();
    assert!(terms > 10 && terms <= 100);
}

#[test]
fn ladder_for_the_closed_form_family() {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 200);
    let r = response_verify(&spec, &w, &LADDER, SETTINGS).unwrap();
    let a = r.fitted_a.unwrap();
    assert!((0.8..=1.2).contains(&a), "{a}");
    for pair in r.ladder.windows(2) {
        assert!(pair[1].1 < pair[0].1);
    }
    for (eps, res) in &r.ladder {
        assert!(*res <= r.fitted_u1 * eps.powf(a) * (1.0 + 1e-12));
    }
    let max = r.stability.iter().cloned().fold(0.0, f64::max);
    let min = r.stability.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 2.0);
}

#[test]
fn ladder_for_a_random_nonlinear_family() {
    let spec = families::nonlinear_pair();
    let w = random_window(7, 400);
    let r = response_verify(&spec, &w, &LADDER, SETTINGS).unwrap();
    let a = r.fitted_a.unwrap();
    assert!((0.8..=1.2).contains(&a), "{a}");
}

#[test]
fn zero_perturbation_has_zero_residuals() {
    let spec = unperturbed_pair();
    let w = random_window(2, 200);
    let r = response_verify(&spec, &w, &LADDER, SETTINGS).unwrap();
    assert!(r.ladder.iter().all(|(_, v)| *v == 0.0));
    assert_eq!(r.fitted_a, None);
    assert_eq!(
        second_derivative_bound_check(&spec, &w, 1e-3, &GridFunction::constant(N, 1.0)).unwrap(),
        0.0
    );
}

#[test]
fn null_response_is_second_order() {
    let spec = families::doubling_sine(1);
    let w = OmegaWindow::constant(0, 200);
    let r = response_verify(&spec, &w, &LADDER, SETTINGS).unwrap();
    assert!(r.hat_h.sup_norm() <= 1e-10);
    assert!(r.difference_slope.unwrap() >= 1.8);
}

#[test]
fn bad_ladders_are_rejected() {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 200);
    assert!(response_verify(&spec, &w, &[1e-2, 3e-3, 1e-3], SETTINGS).is_err());
    assert!(response_verify(&spec, &w, &[1e-2, 3e-3, 3e-3, 1e-4], SETTINGS).is_err());
    assert!(response_verify(&spec, &w, &[0.06, 3e-3, 1e-3, 1e-4], SETTINGS).is_err());
}

#[test]
fn second_order_bound() {
    let spec = families::doubling_sine(2);
    let w = OmegaWindow::constant(0, 10);
    let one256 = GridFunction::constant(256, 1.0);
    let one512 = GridFunction::constant(512, 1.0);
    let r256 = second_derivative_bound_check(&spec, &w, 1e-3, &one256).unwrap();
    let r512 = second_derivative_bound_check(&spec, &w, 1e-3, &one512).unwrap();
    assert!(r256 > 0.0 && r256 <= 1.1, "{r256}");
    assert!((r256 - r512).abs() <= 1e-6);

    let nl = families::nonlinear_pair();
    let rw = random_window(1, 10);
    let f = GridFunction::from_fn(N, |x| 1.0 + 0.3 * (2.0 * PI * x).cos());
    assert!(second_derivative_bound_check(&nl, &rw, 1e-3, &f).unwrap() <= 1.1);
}

#[test]
fn telescoping_identity() {
    let spec = families::nonlinear_pair();
    let w = random_window(12, 400);
    let eps = 0.01;
    let h0 = Cocycle::new(&spec, 0.0, N)
        .unwrap()
        .density_at(&w, 0, 80)
        .unwrap();
    let he = Cocycle::new(&spec, eps, N)
        .unwrap()
        .density_at(&w, 0, 80)
        .unwrap();
    let sum = telescoping_sum(&spec, &w, eps, 80, SETTINGS).unwrap();
    let gap = he.sub(&h0).sub(&sum).sup_norm();
    assert!(gap < 1e-9, "{gap}");
}

fn band_limited() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn derivative_operator_has_mean_zero_range(coeffs in band_limited(), c0 in -2.0f64..2.0, seed in any::<u64>()) {
        let spec = families::nonlinear_pair();
        let w = random_window(seed, 4);
        let c = Cocycle::new(&spec, 0.0, N).unwrap();
        let p = trig_poly(&coeffs);
        let f = GridFunction::from_fn(N, |x| c0 + p.eval(x, 0));
        prop_assert!(derivative_operator(&c, &w, &f).unwrap().integral().abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn first_order_consistency(coeffs in band_limited(), c0 in -2.0f64..2.0, seed in any::<u64>()) {
        let spec = families::nonlinear_pair();
        let w = random_window(seed, 4);
        let p = trig_poly(&coeffs);
        let f = GridFunction::from_fn(128, |x| c0 + p.eval(x, 0));
        for eps in [-0.045, -0.01, 1e-3, 0.02, 0.045] {
            prop_assert!(first_order_ratio(&spec, &w, eps, &f).unwrap() <= 1.0);
        }
    }

    #[test]
    fn derivative_operator_is_a_derivative(coeffs in band_limited(), seed in any::<u64>()) {
        let spec = families::mixed_perturbation();
        let w = random_window(seed, 4);
        let p = trig_poly(&coeffs);
        let f = GridFunction::from_fn(N, |x| p.eval(x, 0));
        let c0 = Cocycle::new(&spec, 0.0, N).unwrap();
        let central = |delta: f64| {
            let lp = Cocycle::new(&spec, delta, N).unwrap().apply_at(&w, 0, &f).unwrap();
            let lm = Cocycle::new(&spec, -delta, N).unwrap().apply_at(&w, 0, &f).unwrap();
            lp.sub(&lm).scale(0.5 / delta)
        };
        // Richardson extrapolation removes the δ² term of the central difference.
        let extrapolated = central(5e-4).scale(4.0 / 3.0).sub(&central(1e-3).scale(1.0 / 3.0));
        let exact = derivative_operator(&c0, &w, &f).unwrap();
        let gap = extrapolated.sub(&exact).c1_norm();
        prop_assert!(gap <= 1e-6 * exact.c1_norm().max(1.0), "{}", gap);
    }

}
