//! Exit-code taxonomy, chosen for scriptability:
//! 2 parse / invalid config, 3 missing input, 4 degenerate computation,
//! 5 validation failure. Anything else exits 1.

use anyhow::Error;

pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    pub fn parse(error: impl Into<Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }

    pub fn missing_input(error: impl Into<Error>) -> Self {
        Failure { code: 3, error: error.into() }
    }

    pub fn degenerate(error: impl Into<Error>) -> Self {
        Failure { code: 4, error: error.into() }
    }

    pub fn validation(error: impl Into<Error>) -> Self {
        Failure { code: 5, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(error: std::io::Error) -> Self {
        Failure { code: 1, error: error.into() }
    }
}
