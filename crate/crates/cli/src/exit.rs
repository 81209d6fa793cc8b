//! Exit codes and the machine-readable error report.
//!
//! | code | meaning                                         |
//! |------|-------------------------------------------------|
//! | 0    | success                                         |
//! | 1    | internal error                                  |
//! | 2    | command-line usage error                        |
//! | 3    | invalid argument or law specification           |
//! | 4    | outside the mathematical domain (e.g. t < t₀)   |
//! | 5    | collision count exceeded the configured cap     |
//! | 6    | numerical instability in the ODE solver         |
//! | 7    | I/O or serialisation failure                    |
//! | 8    | `verify` ran and at least one check failed      |

use kac_core::Error;
use serde::Serialize;

pub const OK: u8 = 0;
pub const INTERNAL: u8 = 1;
pub const USAGE: u8 = 2;
pub const INVALID_ARGUMENT: u8 = 3;
pub const DOMAIN: u8 = 4;
pub const NU_CAP: u8 = 5;
pub const INSTABILITY: u8 = 6;
pub const IO: u8 = 7;
pub const CHECK_FAILED: u8 = 8;

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: u8,
}

fn root(err: &Error) -> &Error {
    match err {
        Error::Chunk { source, .. } => root(source),
        other => other,
    }
}

pub fn classify(err: &Error) -> ErrorReport {
    let (kind, code) = match root(err) {
        Error::Argument(_) | Error::Parse(_) | Error::Range { .. } => {
            ("invalid_argument", INVALID_ARGUMENT)
        }
        Error::Domain(_) => ("domain", DOMAIN),
        Error::CollisionCap { .. } => ("nu_cap", NU_CAP),
        Error::Instability { .. } => ("instability", INSTABILITY),
        Error::Io(_) | Error::Json(_) => ("io", IO),
        Error::Chunk { .. } => ("internal", INTERNAL),
    };
    ErrorReport {
        error: kind,
        message: err.to_string(),
        exit_code: code,
    }
}
