//! Built-in map families used by the examples and tests.

use alloc::vec;

use crate::maps::{MapFamilySpec, SymbolMap};
use crate::trig::{TrigPoly, TrigTerm};

/// `x ↦ 2x` with no perturbation.
pub fn doubling() -> MapFamilySpec {
    MapFamilySpec::new(vec![SymbolMap::linear(2)], 0.05).expect("doubling map is expanding")
}

/// `x ↦ 2x + ε sin(2πνx)` with `ε_max = 0.05`.
pub fn doubling_sine(freq: u32) -> MapFamilySpec {
    MapFamilySpec::new(
        vec![SymbolMap::new(
            2,
            0.0,
            TrigPoly::zero(),
            TrigPoly::sin(freq, 1.0),
        )],
        0.05,
    )
    .expect("perturbed doubling map is expanding")
}

/// Two symbols, `x ↦ 2x` and `x ↦ 3x`.
pub fn random_linear() -> MapFamilySpec {
    MapFamilySpec::new(vec![SymbolMap::linear(2), SymbolMap::linear(3)], 0.05)
        .expect("linear maps are expanding")
}

/// Two nonlinear symbols with distinct degrees and perturbation directions:
/// `2x + 0.04 sin 2πx + 0.5ε sin 4πx` and `3x + 0.1 + 0.05 cos 2πx + 0.5ε cos 2πx`.
pub fn nonlinear_pair() -> MapFamilySpec {
    MapFamilySpec::new(
        vec![
            SymbolMap::new(2, 0.0, TrigPoly::sin(1, 0.04), TrigPoly::sin(2, 0.5)),
            SymbolMap::new(3, 0.1, TrigPoly::cos(1, 0.05), TrigPoly::cos(1, 0.5)),
        ],
        0.05,
    )
    .expect("built-in nonlinear family is expanding")
}

/// Random family mixing the two perturbations of [`doubling_sine`] by
/// symbol, on a nonlinear base.
pub fn mixed_perturbation() -> MapFamilySpec {
    MapFamilySpec::new(
        vec![
            SymbolMap::new(2, 0.0, TrigPoly::sin(1, 0.03), TrigPoly::sin(2, 1.0)),
            SymbolMap::new(
                2,
                0.0,
                TrigPoly::new(vec![TrigTerm::new(1, 0.0, 0.03)]),
                TrigPoly::sin(1, 1.0),
            ),
        ],
        0.05,
    )
    .expect("mixed family is expanding")
}
