use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A specification or argument failed validation. `field` names the
    /// offending input.
    #[error("invalid configuration in `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A symbol outside the addressable range of an [`crate::OmegaWindow`]
    /// was requested.
    #[error("window overflow: position {position} outside [-{half_width}, {half_width}]")]
    WindowOverflow { position: i64, half_width: usize },

    /// ε lies outside the open parameter interval of the family.
    #[error("epsilon {eps} outside (-{eps_max}, {eps_max})")]
    EpsilonDomain { eps: f64, eps_max: f64 },

    /// Newton/bisection failed to invert a branch.
    #[error("inverse branch {branch} of symbol {symbol} did not converge at x = {x} (residual {residual:e})")]
    Inversion {
        symbol: usize,
        branch: usize,
        x: f64,
        residual: f64,
    },

    /// Composite-branch enumeration would exceed the branch cap.
    #[error("composite branch count {count} exceeds the cap {cap}")]
    BranchCap { count: u64, cap: u64 },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A function required to be positive is not.
    #[error("function must be strictly positive (min {min:e})")]
    NonPositive { min: f64 },

    /// An iterative quantity did not reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
