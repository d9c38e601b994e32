use serde::Serialize;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("window overflow: {0}")]
    WindowOverflow(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Convergence(_) => 3,
            RunError::WindowOverflow(_) => 4,
            RunError::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config { .. } => "config",
            RunError::Convergence(_) => "convergence",
            RunError::WindowOverflow(_) => "window_overflow",
            RunError::Io { .. } => "io",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: ErrorBody {
                kind: self.kind(),
                exit_code: self.exit_code(),
                field: match self {
                    RunError::Config { field, .. } => Some(field.clone()),
                    _ => None,
                },
                message: self.to_string(),
            },
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<qresponse_core::Error> for RunError {
    fn from(e: qresponse_core::Error) -> Self {
        use qresponse_core::Error as E;
        match e {
            E::Config { field, reason } => RunError::Config { field, reason },
            E::EpsilonDomain { .. } => RunError::Config {
                field: String::from("eps"),
                reason: e.to_string(),
            },
            E::Precondition(_) | E::BranchCap { .. } => RunError::Config {
                field: String::from("<derived>"),
                reason: e.to_string(),
            },
            E::WindowOverflow { .. } => RunError::WindowOverflow(e.to_string()),
            E::Inversion { .. } | E::NonPositive { .. } | E::Convergence(_) => {
                RunError::Convergence(e.to_string())
            }
        }
    }
}

/// Machine-readable error, written to stderr as one JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use qresponse_core::Error as E;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let cases = [
            (
                E::Config {
                    field: "x".into(),
                    reason: "y".into(),
                },
                2,
            ),
            (
                E::EpsilonDomain {
                    eps: 0.1,
                    eps_max: 0.05,
                },
                2,
            ),
            (
                E::BranchCap {
                    count: 1 << 17,
                    cap: 1 << 16,
                },
                2,
            ),
            (E::Convergence("slow".into()), 3),
            (E::NonPositive { min: -1.0 }, 3),
            (
                E::Inversion {
                    symbol: 0,
                    branch: 1,
                    x: 0.5,
                    residual: 1.0,
                },
                3,
            ),
            (
                E::WindowOverflow {
                    position: 11,
                    half_width: 10,
                },
                4,
            ),
        ];
        for (e, code) in cases {
            let r = RunError::from(e);
            assert_eq!(r.exit_code(), code, "{r}");
            assert_eq!(r.record().error.exit_code, code);
        }
        let r = RunError::from(E::Config {
            field: "weights".into(),
            reason: "bad".into(),
        });
        assert_eq!(r.record().error.field.as_deref(), Some("weights"));
    }
}
