//! Experiment configuration: a single JSON file, parsed with field paths in
//! every error and validated against the core constructors.

use qresponse_core::environment::derive_seed;
use qresponse_core::families;
use qresponse_core::response::default_ladder;
use qresponse_core::statistics::ObservableSpec;
use qresponse_core::{BaseProcessSpec, MapFamilySpec, OmegaWindow, SymbolMap, TrigPoly, TrigTerm};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

pub const MAX_RESOLUTION: usize = 4096;
pub const MAX_OMEGA_SAMPLES: usize = 10_000;
pub const LADDER_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseProcessConfig {
    Iid { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub freq: u32,
    #[serde(default)]
    pub sin: f64,
    #[serde(default)]
    pub cos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub degree: u32,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub base: Vec<TermConfig>,
    #[serde(default)]
    pub perturbation: Vec<TermConfig>,
}

/// Either a built-in family by name or an explicit list of symbols.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFamilyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<SymbolConfig>>,
}

/// One observable for every symbol, or one per symbol.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<Vec<TermConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_symbol: Option<Vec<Vec<TermConfig>>>,
}

/// Settings that only some commands read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandOptions {
    /// Parameter value for `density`, `correlations`, `variance` and `cone`.
    pub eps: f64,
    pub n_terms: Option<usize>,
    pub window_half_width: Option<usize>,
    /// Monte-Carlo orbits per ω for `variance`; 0 disables the cross-check.
    pub mc_orbits: u64,
    pub mc_steps: usize,
    pub burn_in: usize,
    pub fd_delta: f64,
    pub decay_beta: f64,
    pub cone_steepness: f64,
    pub cone_truncation: usize,
    pub cone_n_max: usize,
}

impl Default for CommandOptions {
    fn default() -> Self {
        CommandOptions {
            eps: 0.0,
            n_terms: None,
            window_half_width: None,
            mc_orbits: 0,
            mc_steps: 1000,
            burn_in: 50,
            fd_delta: 1e-3,
            decay_beta: 1.0,
            cone_steepness: qresponse_core::cone::DEFAULT_STEEPNESS,
            cone_truncation: 60,
            cone_n_max: 40,
        }
    }
}

fn default_resolution() -> usize {
    qresponse_core::transfer::DEFAULT_RESOLUTION
}

fn default_n_max() -> usize {
    40
}

fn default_omega_samples() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_process: BaseProcessConfig,
    pub map_family: MapFamilyConfig,
    pub observable: ObservableConfig,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default)]
    pub pullback_depth: Option<usize>,
    #[serde(default)]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_omega_samples")]
    pub omega_samples: usize,
    #[serde(default)]
    pub options: CommandOptions,
}

/// A validated configuration with the core objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base: BaseProcessSpec,
    pub family: MapFamilySpec,
    pub observable: ObservableSpec,
    pub ladder: Vec<f64>,
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> RunError {
    RunError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Re-roots a core validation error under `prefix`.
fn prefixed(prefix: &str, e: qresponse_core::Error) -> RunError {
    match e {
        qresponse_core::Error::Config { field, reason } => {
            field_error(format!("{prefix}.{field}"), reason)
        }
        other => field_error(prefix, other.to_string()),
    }
}

fn trig(terms: &[TermConfig], field: &str) -> Result<TrigPoly, RunError> {
    for (i, t) in terms.iter().enumerate() {
        if !t.sin.is_finite() || !t.cos.is_finite() {
            return Err(field_error(
                format!("{field}[{i}]"),
                "coefficients must be finite",
            ));
        }
    }
    Ok(TrigPoly::new(
        terms
            .iter()
            .map(|t| TrigTerm::new(t.freq, t.sin, t.cos))
            .collect(),
    ))
}

pub fn builtin_family(name: &str) -> Option<MapFamilySpec> {
    Some(match name {
        "doubling" => families::doubling(),
        "doubling_sin2pi" => families::doubling_sine(1),
        "doubling_sin4pi" => families::doubling_sine(2),
        "random_linear" => families::random_linear(),
        "nonlinear_pair" => families::nonlinear_pair(),
        "mixed_perturbation" => families::mixed_perturbation(),
        _ => return None,
    })
}

pub const BUILTIN_FAMILIES: [&str; 6] = [
    "doubling",
    "doubling_sin2pi",
    "doubling_sin4pi",
    "random_linear",
    "nonlinear_pair",
    "mixed_perturbation",
];

impl MapFamilyConfig {
    fn build(&self) -> Result<MapFamilySpec, RunError> {
        match (&self.builtin, &self.symbols) {
            (Some(name), None) => {
                if self.eps_max.is_some() {
                    return Err(field_error(
                        "map_family.eps_max",
                        "built-in families fix their own ε_max",
                    ));
                }
                builtin_family(name).ok_or_else(|| {
                    field_error(
                        "map_family.builtin",
                        format!(
                            "unknown family `{name}`; known: {}",
                            BUILTIN_FAMILIES.join(", ")
                        ),
                    )
                })
            }
            (None, Some(symbols)) => {
                let eps_max = self.eps_max.ok_or_else(|| {
                    field_error("map_family.eps_max", "required with explicit symbols")
                })?;
                let mut maps = Vec::with_capacity(symbols.len());
                for (i, s) in symbols.iter().enumerate() {
                    let field = format!("map_family.symbols[{i}]");
                    if !s.drift.is_finite() {
                        return Err(field_error(format!("{field}.drift"), "must be finite"));
                    }
                    maps.push(SymbolMap::new(
                        s.degree,
                        s.drift,
                        trig(&s.base, &format!("{field}.base"))?,
                        trig(&s.perturbation, &format!("{field}.perturbation"))?,
                    ));
                }
                MapFamilySpec::new(maps, eps_max).map_err(|e| prefixed("map_family", e))
            }
            _ => Err(field_error(
                "map_family",
                "give exactly one of `builtin` or `symbols`",
            )),
        }
    }
}

impl ObservableConfig {
    fn build(&self) -> Result<ObservableSpec, RunError> {
        match (&self.uniform, &self.per_symbol) {
            (Some(terms), None) => Ok(ObservableSpec::uniform(trig(terms, "observable.uniform")?)),
            (None, Some(profiles)) => {
                let polys = profiles
                    .iter()
                    .enumerate()
                    .map(|(i, t)| trig(t, &format!("observable.per_symbol[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                ObservableSpec::new(polys).map_err(|e| prefixed("observable", e))
            }
            _ => Err(field_error(
                "observable",
                "give exactly one of `uniform` or `per_symbol`",
            )),
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, naming the path of the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                String::from("<root>")
            } else {
                path
            };
            field_error(field, e.into_inner().to_string())
        })
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(self) -> Result<Experiment, RunError> {
        let base = match &self.base_process {
            BaseProcessConfig::Iid { weights } => BaseProcessSpec::iid(weights.clone()),
            BaseProcessConfig::Markov { transition } => BaseProcessSpec::markov(transition.clone()),
        }
        .map_err(|e| prefixed("base_process", e))?;
        let family = self.map_family.build()?;
        let observable = self.observable.build()?;

        let k = family.alphabet_size();
        if base.alphabet_size() != k {
            let field = match self.base_process {
                BaseProcessConfig::Iid { .. } => "base_process.weights",
                BaseProcessConfig::Markov { .. } => "base_process.transition",
            };
            return Err(field_error(
                field,
                format!(
                    "alphabet size {} does not match the {k} symbols of map_family",
                    base.alphabet_size()
                ),
            ));
        }
        if observable.check_alphabet(k).is_err() {
            return Err(field_error(
                "observable.per_symbol",
                format!("{} profiles for {k} symbols", observable.profiles()),
            ));
        }

        let n = self.grid_resolution;
        if !(8..=MAX_RESOLUTION).contains(&n) || !n.is_power_of_two() {
            return Err(field_error(
                "grid_resolution",
                format!("must be a power of two in [8, {MAX_RESOLUTION}]"),
            ));
        }
        if self.pullback_depth == Some(0) {
            return Err(field_error("pullback_depth", "must be at least 1"));
        }
        if self.n_max == 0 || self.n_max > 1000 {
            return Err(field_error("n_max", "must be in [1, 1000]"));
        }
        if self.omega_samples == 0 || self.omega_samples > MAX_OMEGA_SAMPLES {
            return Err(field_error(
                "omega_samples",
                format!("must be in [1, {MAX_OMEGA_SAMPLES}]"),
            ));
        }
        let o = &self.options;
        family
            .check_eps(o.eps)
            .map_err(|e| field_error("options.eps", e.to_string()))?;
        if !(o.fd_delta > 0.0) || family.check_eps(o.fd_delta).is_err() {
            return Err(field_error(
                "options.fd_delta",
                "must be positive and inside the parameter interval",
            ));
        }
        if o.mc_steps == 0 {
            return Err(field_error("options.mc_steps", "must be at least 1"));
        }
        if !(o.decay_beta > 0.0) {
            return Err(field_error("options.decay_beta", "must be positive"));
        }
        if o.n_terms == Some(0) {
            return Err(field_error("options.n_terms", "must be at least 1"));
        }
        if o.cone_n_max == 0 {
            return Err(field_error("options.cone_n_max", "must be at least 1"));
        }

        let ladder = match &self.eps_ladder {
            Some(l) => l.clone(),
            None => default_ladder(family.eps_max(), LADDER_POINTS),
        };
        if ladder.len() < 4 {
            return Err(field_error("eps_ladder", "needs at least 4 points"));
        }
        if ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(field_error("eps_ladder", "must be strictly decreasing"));
        }
        if ladder
            .iter()
            .any(|e| !(*e > 0.0) || family.check_eps(*e).is_err())
        {
            return Err(field_error(
                "eps_ladder",
                "points must be positive and inside the parameter interval",
            ));
        }
        Ok(Experiment {
            config: self,
            base,
            family,
            observable,
            ladder,
        })
    }
}

impl Experiment {
    pub fn resolution(&self) -> usize {
        self.config.grid_resolution
    }

    /// Half-width that covers every lookback and lookahead the commands use.
    pub fn half_width(&self) -> usize {
        let o = &self.config.options;
        o.window_half_width.unwrap_or_else(|| {
            let depth = self
                .config
                .pullback_depth
                .unwrap_or(qresponse_core::transfer::MAX_DEFAULT_DEPTH);
            let terms = o
                .n_terms
                .unwrap_or(qresponse_core::response::MAX_DEFAULT_TERMS);
            let ahead = self.config.n_max.max(o.cone_n_max)
                + if o.mc_orbits > 0 {
                    o.mc_steps + o.burn_in
                } else {
                    0
                };
            depth + terms + ahead + 16
        })
    }

    /// ω-sample `i`, seeded by `derive_seed(seed, i)`.
    pub fn window(&self, i: usize) -> Result<OmegaWindow, RunError> {
        OmegaWindow::generate(
            &self.base,
            derive_seed(self.config.seed, i as u64),
            self.half_width(),
        )
        .map_err(RunError::from)
    }

    pub fn windows(&self) -> Result<Vec<OmegaWindow>, RunError> {
        (0..self.config.omega_samples)
            .map(|i| self.window(i))
            .collect()
    }
}
