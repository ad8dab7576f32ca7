use std::fmt;

/// One problem found while reading a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, 0 when the issue is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error(transparent)]
    Solver(#[from] extrastep::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace {path}: {message}")]
    Trace { path: String, message: String },
    #[error("verification failed: {0}")]
    Verification(String),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(vec![ConfigIssue { line: 0, message: message.into() }])
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 config error, 2 runtime error, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(extrastep::Error::Parameter(_)) | CliError::Solver(extrastep::Error::Regime(_)) => 1,
            CliError::Verification(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
