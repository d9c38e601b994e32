//! Small numerical helpers shared by the modules: fixed-order summation,
//! least-squares lines and a radix-2 FFT.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Float math for no_std builds; shadowed by the inherent methods when std is
// linked into the final artifact.
#[allow(unused_imports)]
use num_traits::Float;

/// Pairwise (cascade) summation. The association order depends only on the
/// length of the slice, so results do not depend on how the inputs were
/// produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Least-squares line `y ≈ intercept + slope·x`. Returns `None` for fewer
/// than two points or a degenerate abscissa.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = mean(&xs[..n]);
    let my = mean(&ys[..n]);
    let sxy: Vec<f64> = (0..n).map(|i| (xs[i] - mx) * (ys[i] - my)).collect();
    let sxx: Vec<f64> = (0..n).map(|i| (xs[i] - mx) * (xs[i] - mx)).collect();
    let sxx = pairwise_sum(&sxx);
    if sxx <= 0.0 {
        return None;
    }
    let slope = pairwise_sum(&sxy) / sxx;
    Some((my - slope * mx, slope))
}

/// Tail `‖last‖·ρ/(1−ρ)` of a geometrically decaying sequence of
/// magnitudes, with `ρ` fitted on the second half of `norms`. Values at or
/// below `1e-13` count as exact zeros. Returns the tail and the fitted ratio;
/// a non-decaying sequence has an infinite tail.
pub fn geometric_tail(norms: &[f64]) -> (f64, Option<f64>) {
    const FLOOR: f64 = 1e-13;
    let Some(&last) = norms.last() else {
        return (0.0, None);
    };
    let last = last.abs();
    if last <= FLOOR {
        return (0.0, Some(0.0));
    }
    let skip = norms.len() / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, v)| v.abs() > FLOOR)
        .map(|(i, v)| (i as f64, v.abs().ln()))
        .unzip();
    match linear_fit(&xs, &ys) {
        Some((_, slope)) if slope < 0.0 => {
            let rho = slope.exp();
            (last * rho / (1.0 - rho), Some(rho))
        }
        Some((_, slope)) => (f64::INFINITY, Some(slope.exp())),
        None => (last, None),
    }
}

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on the unit circle `ℝ/ℤ`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}

/// In-place iterative radix-2 FFT. `inverse` uses the `+i` kernel and does
/// not normalise.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles computed directly rather than by recurrence to keep the
        // error at a few ulps for large transforms.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| {
                let ang = sign * 2.0 * PI * k as f64 / len as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let mut start = 0;
        while start < n {
            for k in 0..half {
                let u = data[start + k];
                let v = data[start + k + half] * twiddles[k];
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Uniform sample in `[0, 1)` from 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs = [1.0, 2.0, 3.5, -0.25, 1e-3];
        assert!((pairwise_sum(&xs) - 6.251).abs() < 1e-14);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn fft_matches_direct_dft() {
        let n = 32;
        let data: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos() - 0.2))
            .collect();
        for inverse in [false, true] {
            let mut fast = data.clone();
            fft_in_place(&mut fast, inverse);
            let sign = if inverse { 1.0 } else { -1.0 };
            for (m, got) in fast.iter().enumerate() {
                let direct: Complex64 = data
                    .iter()
                    .enumerate()
                    .map(|(j, z)| {
                        let ang = sign * 2.0 * PI * (j * m) as f64 / n as f64;
                        z * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum();
                assert!((got - direct).norm() < 1e-12, "mode {m}");
            }
        }
    }

    #[test]
    fn fft_of_single_mode() {
        let n = 16;
        let mut data: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((2.0 * PI * 3.0 * j as f64 / n as f64).cos(), 0.0))
            .collect();
        fft_in_place(&mut data, false);
        for (m, c) in data.iter().enumerate() {
            let expected = if m == 3 || m == n - 3 {
                n as f64 / 2.0
            } else {
                0.0
            };
            assert!(
                (c.re - expected).abs() < 1e-12 && c.im.abs() < 1e-12,
                "mode {m}: {c}"
            );
        }
        fft_in_place(&mut data, true);
        for (j, c) in data.iter().enumerate() {
            let x = (2.0 * PI * 3.0 * j as f64 / n as f64).cos();
            assert!((c.re / n as f64 - x).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (b, m) = linear_fit(&xs, &ys).unwrap();
        assert!((b - 2.0).abs() < 1e-14 && (m + 0.5).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn geometric_tail_of_halving() {
        let norms: Vec<f64> = (0..10).map(|i| 0.5f64.powi(i)).collect();
        let (tail, rho) = geometric_tail(&norms);
        assert!((rho.unwrap() - 0.5).abs() < 1e-12);
        assert!((tail - 0.5f64.powi(9)).abs() < 1e-12);
        assert_eq!(geometric_tail(&[1.0, 0.0]).0, 0.0);
        assert!(geometric_tail(&[1.0, 2.0, 4.0]).0.is_infinite());
    }

    #[test]
    fn frac_and_distance() {
        assert_eq!(frac(-0.25), 0.75);
        assert_eq!(frac(3.0), 0.0);
        assert!((circle_distance(0.95, 0.05) - 0.1).abs() < 1e-15);
    }
}
