//! CLI error taxonomy with a stable exit-code contract:
//! 1 usage/config, 2 data, 3 fit failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Fit(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Fit(_) => "fit",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Fit(m) => m,
        }
    }

    /// The machine-readable object printed to stderr on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "code": self.exit_code(),
                "message": self.message(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

/// Library fit errors surface as fit failures; data-shape problems as data
/// errors.
pub fn from_fit_error(e: pmcgd::Error) -> CliError {
    use pmcgd::Error::*;
    match e {
        EmptyData | DimensionMismatch { .. } | TooFewObservations { .. } => {
            CliError::Data(e.to_string())
        }
        InvalidParameter { .. } => CliError::Usage(e.to_string()),
        other => CliError::Fit(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 2);
        assert_eq!(CliError::Fit("x".into()).exit_code(), 3);
    }

    #[test]
    fn json_error_is_machine_readable() {
        let err = CliError::Data("bad cell".into());
        let value: serde_json::Value = serde_json::from_str(&err.to_json()).unwrap();
        assert_eq!(value["error"]["code"], 2);
        assert_eq!(value["error"]["kind"], "data");
    }
}
