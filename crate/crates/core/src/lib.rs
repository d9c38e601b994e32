//! Numerics for random full-branch expanding maps of the circle.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure,
//! deterministic computations:
//!
//! - [`environment`]: seeded symbol paths of an i.i.d. or Markov base process
//!   and their ψ-mixing coefficients.
//! - [`maps`]: trigonometric families `T_{ω,ε}(x) = kx + a + g₀(x) + εP(x) mod 1`,
//!   inverse branches with their jets and regularity constants.
//! - [`grid`] and [`transfer`]: trigonometric collocation of functions on the
//!   circle, transfer operators, cocycles, equivariant densities and decay
//!   profiles.
//! - [`response`]: the derivative operator, the response function and the
//!   empirical linear-response rate.
//! - [`statistics`]: centred observables, the CLT variance series, its
//!   ε-derivative and Birkhoff-sum sampling.
//! - [`cone`]: Hilbert projective metric diagnostics and distortion bounds.
//!
//! Parallel sweeps, file formats and the command line live in the companion
//! `qresponse` crate.

#![no_std]

extern crate alloc;

pub mod cone;
pub mod environment;
pub mod error;
pub mod families;
pub mod grid;
pub mod maps;
pub mod numeric;
pub mod response;
pub mod statistics;
pub mod transfer;
pub mod trig;

pub use environment::{BaseProcessSpec, MixingReport, OmegaWindow};
pub use error::{Error, Result};
pub use grid::{GridFunction, Spectrum};
pub use maps::{BranchJet, MapFamilySpec, RegularityConstants, SymbolMap};
pub use transfer::{Cocycle, DecayFit, Direction};
pub use trig::{TrigPoly, TrigTerm};
