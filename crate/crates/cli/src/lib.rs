//! Library surface of the pipeline CLI, kept separate from the binary so the
//! command implementations can be driven from integration tests.

pub mod commands;
pub mod config;
pub mod report;

use bfcb_core::error::Error;

/// Process exit code for one error class: 2 for configuration problems,
/// 3 for numerical failures, 4 for I/O and file-format problems.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Numerical(_) | Error::DegenerateCentroid { .. } => 3,
        Error::Io { .. } | Error::Format(_) | Error::CorruptReport(_) => 4,
    }
}
