use std::fmt;
use std::process::ExitCode;

/// Ways a run can end other than success.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: unknown flags, missing values, unreadable config.
    Usage(String),
    /// Inputs outside an operation's domain, or unreadable data files.
    Domain(String),
    /// A solver or budget failure on valid inputs.
    Runtime(String),
    /// A verification check failed; the report has been written.
    Regression(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Regression(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Failure::Domain(e.to_string())
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Domain(m) => write!(f, "{m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
            Failure::Regression(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<isoprofile::Error> for Failure {
    fn from(e: isoprofile::Error) -> Self {
        use isoprofile::Error::*;
        match e {
            Resource(_) | Solver(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}
