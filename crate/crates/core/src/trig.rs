//! Real trigonometric polynomials with integer frequencies on `ℝ/ℤ`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// One term `sin·sin(2πνx) + cos·cos(2πνx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub freq: u32,
    pub sin: f64,
    pub cos: f64,
}

impl TrigTerm {
    pub const fn new(freq: u32, sin: f64, cos: f64) -> Self {
        TrigTerm { freq, sin, cos }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigPoly {
    terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        TrigPoly { terms }
    }

    pub fn zero() -> Self {
        TrigPoly::default()
    }

    pub fn sin(freq: u32, amp: f64) -> Self {
        TrigPoly::new(alloc::vec![TrigTerm::new(freq, amp, 0.0)])
    }

    pub fn cos(freq: u32, amp: f64) -> Self {
        TrigPoly::new(alloc::vec![TrigTerm::new(freq, 0.0, amp)])
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly::new(alloc::vec![TrigTerm::new(0, 0.0, c)])
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.sin == 0.0 && (t.cos == 0.0))
    }

    pub fn max_freq(&self) -> u32 {
        self.terms.iter().map(|t| t.freq).max().unwrap_or(0)
    }

    pub fn all_finite(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.sin.is_finite() && t.cos.is_finite())
    }

    /// `order`-th derivative at `x`.
    pub fn eval(&self, x: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            if t.freq == 0 {
                if order == 0 {
                    acc += t.cos;
                }
                continue;
            }
            let w = 2.0 * PI * t.freq as f64;
            let theta = w * x;
            let (s, c) = theta.sin_cos();
            // d^r/dx^r sin(wx) = w^r sin(wx + rπ/2), likewise for cos.
            let (ds, dc) = match order % 4 {
                0 => (s, c),
                1 => (c, -s),
                2 => (-s, -c),
                _ => (-c, s),
            };
            acc += w.powi(order as i32) * (t.sin * ds + t.cos * dc);
        }
        acc
    }

    /// `Σ (2πν)^order·√(sin² + cos²)`, an upper bound for `‖D^order p‖_∞`.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.freq > 0 || order == 0)
            .map(|t| {
                let w = 2.0 * PI * t.freq as f64;
                w.powi(order as i32) * t.sin.hypot(t.cos)
            })
            .sum()
    }
}
