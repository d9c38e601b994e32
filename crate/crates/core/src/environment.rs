//! The random environment: a stationary symbol process `(ω_k)_{k∈ℤ}` with
//! the left shift, viewed through finite seeded windows.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::numeric::unit_f64;

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Law of the base process.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseProcessSpec {
    Iid {
        weights: Vec<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    },
}

fn check_probability_vector(field: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::config(field, "empty probability vector"));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::config(
            field,
            format!("entry {x} is negative or not finite"),
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::config(field, format!("entries sum to {s}, not 1")));
    }
    Ok(())
}

impl BaseProcessSpec {
    pub fn iid(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector("weights", &weights)?;
        Ok(BaseProcessSpec::Iid { weights })
    }

    pub fn uniform_iid(alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::config("alphabet", "must be positive"));
        }
        Self::iid(vec![1.0 / alphabet as f64; alphabet])
    }

    /// Markov chain with the given row-stochastic matrix. The stationary
    /// distribution is computed, never supplied.
    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = transition.len();
        if k == 0 {
            return Err(Error::config("transition", "empty matrix"));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != k {
                return Err(Error::config(
                    "transition",
                    format!("row {i} has {} entries, expected {k}", row.len()),
                ));
            }
            check_probability_vector(&format!("transition[{i}]"), row)?;
        }
        let stationary = stationary_distribution(&transition);
        let image = vec_mat(&stationary, &transition);
        let err = image
            .iter()
            .zip(&stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > STATIONARY_TOL {
            return Err(Error::config(
                "transition",
                format!("stationary distribution residual {err:e} exceeds {STATIONARY_TOL:e}"),
            ));
        }
        Ok(BaseProcessSpec::Markov {
            transition,
            stationary,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            BaseProcessSpec::Iid { weights } => weights.len(),
            BaseProcessSpec::Markov { transition, .. } => transition.len(),
        }
    }

    /// Marginal law of a single symbol.
    pub fn marginal(&self) -> &[f64] {
        match self {
            BaseProcessSpec::Iid { weights } => weights,
            BaseProcessSpec::Markov { stationary, .. } => stationary,
        }
    }

    /// Whether every state can reach every other state. I.i.d. processes
    /// count as irreducible.
    pub fn is_irreducible(&self) -> bool {
        match self {
            BaseProcessSpec::Iid { .. } => true,
            BaseProcessSpec::Markov { transition, .. } => {
                let k = transition.len();
                (0..k).all(|start| {
                    let mut seen = vec![false; k];
                    let mut queue = VecDeque::from([start]);
                    seen[start] = true;
                    while let Some(i) = queue.pop_front() {
                        for j in 0..k {
                            if transition[i][j] > 0.0 && !seen[j] {
                                seen[j] = true;
                                queue.push_back(j);
                            }
                        }
                    }
                    seen.iter().all(|s| *s)
                })
            }
        }
    }
}

fn vec_mat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let k = v.len();
    (0..k)
        .map(|j| (0..k).map(|i| v[i] * m[i][j]).sum())
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

/// Stationary law by Cesàro-type power iteration of the lazy chain
/// `(P + I)/2` started from the uniform law; converges for every finite
/// chain and returns the uniform law for the identity matrix.
fn stationary_distribution(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.len();
    let mut pi = vec![1.0 / k as f64; k];
    if let Some(direct) = solve_stationary(p) {
        return direct;
    }
    for _ in 0..1_000_000 {
        let step = vec_mat(&pi, p);
        let next: Vec<f64> = pi.iter().zip(&step).map(|(a, b)| 0.5 * (a + b)).collect();
        let change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if change < 1e-16 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter().map(|x| x / s).collect()
}

/// Solves `π(P − I) = 0`, `Σπ = 1` by Gaussian elimination with partial
/// pivoting. Returns `None` when the system is singular (reducible chain)
/// or the solution has negative entries.
fn solve_stationary(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = p.len();
    // Rows of the system are columns of (P − I)ᵀ; the last row is replaced by
    // the normalisation.
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut row: Vec<f64> = (0..k)
                .map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 })
                .collect();
            row.push(0.0);
            row
        })
        .collect();
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    for c in col..=k {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
    }
    let pi: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    if pi.iter().any(|x| *x < -1e-14) {
        return None;
    }
    let pi: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    Some(pi.iter().map(|x| x / s).collect())
}

/// Seed for the `index`-th member of a sweep, derived from the master seed by
/// a keyed counter (ChaCha stream selection), independent of thread count.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn sample_categorical(p: &[f64], u: f64) -> u32 {
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i as u32;
        }
    }
    // Rounding left u above the cumulative total: take the last state with
    // positive mass.
    p.iter().rposition(|w| *w > 0.0).unwrap_or(0) as u32
}

/// Finite view of a bi-infinite symbol path: `symbols[j + N]` holds `ω_j` for
/// `j ∈ [−N, N]`, and `cursor` records how often the path has been shifted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaWindow {
    seed: u64,
    half_width: usize,
    symbols: Vec<u32>,
    cursor: i64,
}

impl OmegaWindow {
    /// Samples the path deterministically from `(spec, seed)`. Markov paths
    /// start from the stationary law at position `−N`.
    pub fn generate(spec: &BaseProcessSpec, seed: u64, half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::config("half_width", "must be at least 1"));
        }
        let len = 2 * half_width + 1;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut symbols = Vec::with_capacity(len);
        match spec {
            BaseProcessSpec::Iid { weights } => {
                for _ in 0..len {
                    symbols.push(sample_categorical(weights, unit_f64(rng.next_u64())));
                }
            }
            BaseProcessSpec::Markov {
                transition,
                stationary,
            } => {
                let mut state = sample_categorical(stationary, unit_f64(rng.next_u64()));
                symbols.push(state);
                for _ in 1..len {
                    state =
                        sample_categorical(&transition[state as usize], unit_f64(rng.next_u64()));
                    symbols.push(state);
                }
            }
        }
        Ok(OmegaWindow {
            seed,
            half_width,
            symbols,
            cursor: 0,
        })
    }

    /// Window whose every symbol is `symbol`; the deterministic environment.
    pub fn constant(symbol: u32, half_width: usize) -> Self {
        OmegaWindow {
            seed: 0,
            half_width,
            symbols: vec![symbol; 2 * half_width + 1],
            cursor: 0,
        }
    }

    /// Builds a window directly from `ω_{−N}, …, ω_N`.
    pub fn from_symbols(symbols: Vec<u32>) -> Result<Self> {
        if symbols.len() % 2 == 0 || symbols.len() < 3 {
            return Err(Error::config(
                "symbols",
                "length must be odd and at least 3",
            ));
        }
        Ok(OmegaWindow {
            seed: 0,
            half_width: symbols.len() / 2,
            symbols,
            cursor: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn cursor(&self) -> i64 {
        self.cursor
    }

    /// Raw path `ω_{−N}, …, ω_N` in absolute coordinates.
    pub fn raw_symbols(&self) -> &[u32] {
        &self.symbols
    }

    fn absolute(&self, rel: i64) -> Result<usize> {
        let pos = self.cursor + rel;
        if pos.unsigned_abs() as usize > self.half_width {
            return Err(Error::WindowOverflow {
                position: pos,
                half_width: self.half_width,
            });
        }
        Ok((pos + self.half_width as i64) as usize)
    }

    /// Symbol at relative index `rel`, i.e. `(σ^{cursor} ω)_{rel}`.
    pub fn symbol(&self, rel: i64) -> Result<u32> {
        Ok(self.symbols[self.absolute(rel)?])
    }

    /// Checks that every relative index in `lo..=hi` is addressable.
    pub fn require(&self, lo: i64, hi: i64) -> Result<()> {
        self.absolute(lo)?;
        self.absolute(hi)?;
        Ok(())
    }

    /// `σ^k`: the symbol at relative index `j` of the result is the symbol at
    /// `j + k` of `self`.
    pub fn shift(&self, k: i64) -> Result<Self> {
        let cursor = self.cursor + k;
        if cursor.unsigned_abs() as usize > self.half_width {
            return Err(Error::WindowOverflow {
                position: cursor,
                half_width: self.half_width,
            });
        }
        Ok(OmegaWindow {
            cursor,
            ..self.clone()
        })
    }

    pub fn max_symbol(&self) -> u32 {
        self.symbols.iter().copied().max().unwrap_or(0)
    }
}

/// Estimated ψ-mixing coefficients by lag.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub lags: Vec<usize>,
    /// `max_{i,j} (Pⁿ(i,j)/π_j − 1)`: the upper coefficient.
    pub psi_upper: Vec<f64>,
    /// `max_{i,j} |Pⁿ(i,j)/π_j − 1|`.
    pub psi_two_sided: Vec<f64>,
    /// `false` for reducible chains, where ratios against `π` lose meaning.
    pub reliable: bool,
}

/// ψ-mixing coefficients for lags `1..=max_lag` via matrix powers.
pub fn psi_mixing_estimate(spec: &BaseProcessSpec, max_lag: usize) -> MixingReport {
    let lags: Vec<usize> = (1..=max_lag).collect();
    match spec {
        BaseProcessSpec::Iid { .. } => MixingReport {
            psi_upper: vec![0.0; max_lag],
            psi_two_sided: vec![0.0; max_lag],
            lags,
            reliable: true,
        },
        BaseProcessSpec::Markov {
            transition,
            stationary,
        } => {
            let reliable = spec.is_irreducible();
            let k = transition.len();
            let mut power = transition.clone();
            let mut upper = Vec::with_capacity(max_lag);
            let mut two_sided = Vec::with_capacity(max_lag);
            for lag in 1..=max_lag {
                if lag > 1 {
                    power = mat_mul(&power, transition);
                }
                let mut up = 0.0f64;
                let mut two = 0.0f64;
                for i in 0..k {
                    if stationary[i] <= 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        if stationary[j] <= 0.0 {
                            continue;
                        }
                        let dev = power[i][j] / stationary[j] - 1.0;
                        up = up.max(dev);
                        two = two.max(dev.abs());
                    }
                }
                upper.push(up.max(0.0));
                two_sided.push(two);
            }
            MixingReport {
                lags,
                psi_upper: upper,
                psi_two_sided: two_sided,
                reliable,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(stay: f64) -> BaseProcessSpec {
        BaseProcessSpec::markov(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]]).unwrap()
    }

    #[test]
    fn iid_generation_is_deterministic() {
        let spec = BaseProcessSpec::uniform_iid(2).unwrap();
        let a = OmegaWindow::generate(&spec, 17, 50).unwrap();
        let b = OmegaWindow::generate(&spec, 17, 50).unwrap();
        assert_eq!(a, b);
        let c = OmegaWindow::generate(&spec, 18, 50).unwrap();
        assert_ne!(a.raw_symbols(), c.raw_symbols());
    }

    #[test]
    fn identity_chain_is_constant() {
        let spec = BaseProcessSpec::markov(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        for seed in 0..5 {
            let w = OmegaWindow::generate(&spec, seed, 40).unwrap();
            let s0 = w.raw_symbols()[0];
            assert!(w.raw_symbols().iter().all(|s| *s == s0));
        }
        assert!(!spec.is_irreducible());
        assert!(!psi_mixing_estimate(&spec, 3).reliable);
    }

    #[test]
    fn uniform_frequency_law_of_large_numbers() {
        let spec = BaseProcessSpec::uniform_iid(2).unwrap();
        let w = OmegaWindow::generate(&spec, 5, 50_000).unwrap();
        let zeros = w.raw_symbols().iter().filter(|s| **s == 0).count();
        let freq = zeros as f64 / w.raw_symbols().len() as f64;
        assert!((0.49..=0.51).contains(&freq), "frequency {freq}");
    }

    #[test]
    fn shift_laws() {
        let spec = BaseProcessSpec::uniform_iid(3).unwrap();
        let w = OmegaWindow::generate(&spec, 9, 20).unwrap();
        assert_eq!(w.shift(0).unwrap(), w);
        assert_eq!(w.shift(1).unwrap().shift(-1).unwrap(), w);
        assert_eq!(w.shift(3).unwrap().symbol(0).unwrap(), w.symbol(3).unwrap());
        for j in -10..=10 {
            assert_eq!(
                w.shift(4).unwrap().symbol(j).unwrap(),
                w.symbol(j + 4).unwrap()
            );
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let w = OmegaWindow::constant(0, 5);
        assert!(matches!(w.symbol(6), Err(Error::WindowOverflow { .. })));
        assert!(w.shift(6).is_err());
        let s = w.shift(3).unwrap();
        assert!(s.symbol(2).is_ok());
        assert!(s.symbol(3).is_err());
        assert!(s.require(-8, 2).is_ok());
        assert!(s.require(-9, 2).is_err());
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(matches!(
            BaseProcessSpec::markov(vec![vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::Config { .. })
        ));
        assert!(BaseProcessSpec::iid(vec![0.5, -0.1, 0.6]).is_err());
        assert!(BaseProcessSpec::markov(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn markov_stationary_distribution() {
        let spec = BaseProcessSpec::markov(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let pi = spec.marginal();
        assert!((pi[0] - 0.75).abs() < 1e-12 && (pi[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn psi_iid_is_zero() {
        let spec = BaseProcessSpec::iid(vec![0.2, 0.8]).unwrap();
        let r = psi_mixing_estimate(&spec, 10);
        assert!(r.psi_upper.iter().all(|x| *x == 0.0));
        assert_eq!(r.lags, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn psi_two_state_matches_second_eigenvalue() {
        let r = psi_mixing_estimate(&two_state(0.9), 30);
        for (lag, psi) in r.lags.iter().zip(&r.psi_upper) {
            let expected = 0.8f64.powi(*lag as i32);
            assert!(
                (psi - expected).abs() < 1e-12,
                "lag {lag}: {psi} vs {expected}"
            );
        }
        assert!(r.psi_upper.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.reliable);
    }

    #[test]
    fn psi_half_stay_is_independent() {
        let r = psi_mixing_estimate(&two_state(0.5), 8);
        assert!(r
            .psi_upper
            .iter()
            .chain(&r.psi_two_sided)
            .all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn derive_seed_is_a_pure_function() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
    }
}
