use std::io;

use thiserror::Error;

/// Harness failure carrying the process exit contract: 2 invalid input,
/// 3 resource budget, 4 engine failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("resource budget: {0}")]
    Resource(String),

    #[error("engine failure: {0}")]
    Engine(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) => 2,
            Error::Resource(_) => 3,
            Error::Engine(_) | Error::Io { .. } => 4,
        }
    }

    /// Prefixes the message with the spec line the failing job came from.
    /// Line 0 marks a spec built from command-line flags; no prefix then.
    pub fn at_line(self, line: usize) -> Self {
        if line == 0 {
            return self;
        }
        let tag = format!("spec line {line}: ");
        match self {
            Error::Invalid(m) => Error::Invalid(format!("{tag}{m}")),
            Error::Resource(m) => Error::Resource(format!("{tag}{m}")),
            Error::Engine(m) => Error::Engine(format!("{tag}{m}")),
            Error::Io { context, source } => Error::Io {
                context: format!("{tag}{context}"),
                source,
            },
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<ring_core::Error> for Error {
    fn from(e: ring_core::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

impl From<exact_analysis::Error> for Error {
    fn from(e: exact_analysis::Error) -> Self {
        use exact_analysis::Error as E;
        match e {
            E::InvalidInput(_) | E::Ring(_) => Error::Invalid(e.to_string()),
            E::StateBudget { .. } | E::MemoryGuard { .. } | E::MoveFanout { .. } => {
                Error::Resource(e.to_string())
            }
            E::Solve(_) => Error::Engine(e.to_string()),
        }
    }
}

impl From<pairing_formulas::Error> for Error {
    fn from(e: pairing_formulas::Error) -> Self {
        use pairing_formulas::Error as E;
        match e {
            E::InvalidInput(_) | E::Ring(_) => Error::Invalid(e.to_string()),
            E::TermBudget { .. } | E::Truncation { .. } => Error::Resource(e.to_string()),
            E::Starvation { .. } => Error::Engine(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(Error::Invalid("x".into()).exit_code(), 2);
        assert_eq!(Error::Resource("x".into()).exit_code(), 3);
        assert_eq!(Error::Engine("x".into()).exit_code(), 4);
    }

    #[test]
    fn line_context_prefixes_once() {
        let e = Error::Resource("over budget".into()).at_line(3);
        assert_eq!(e.to_string(), "resource budget: spec line 3: over budget");
        assert_eq!(e.exit_code(), 3);
        let e = Error::Invalid("bad".into()).at_line(0);
        assert_eq!(e.to_string(), "invalid input: bad");
    }

    #[test]
    fn library_errors_map_to_the_right_codes() {
        let e: Error = exact_analysis::Error::StateBudget {
            states: 10,
            budget: 5,
        }
        .into();
        assert_eq!(e.exit_code(), 3);
        let e: Error = pairing_formulas::Error::Starvation { prob: 1e-5 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: Error = ring_core::Error::RingSize(4).into();
        assert_eq!(e.exit_code(), 2);
    }
}
