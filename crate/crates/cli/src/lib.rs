//! Command implementations behind the `micellar` binary.

pub mod gap;
pub mod run;
pub mod verify;

use std::fmt;

/// Error carrying the process exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration; exit status 2.
    Config(String),
    /// Invariant violation or numerical failure during execution; exit status 3.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<micellar_core::Error> for Failure {
    fn from(e: micellar_core::Error) -> Self {
        if e.is_configuration() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("i/o: {e}"))
    }
}
