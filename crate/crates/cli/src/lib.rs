//! Library side of the `xrank` binary: argument definitions, subcommand
//! handlers and the toy embedder.

pub mod commands;
pub mod toy;

use xrank_core::ingest::IngestError;
use xrank_core::rules::RulesError;

pub use commands::{run, Cli, Command, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// 2 for unreadable or malformed input, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<IngestError>() {
            return match e {
                IngestError::DuplicateId { .. } | IngestError::Invalid(_) => EXIT_INVALID,
                _ => EXIT_IO,
            };
        }
        if let Some(e) = cause.downcast_ref::<RulesError>() {
            return match e {
                RulesError::Io(_) | RulesError::Parse { .. } => EXIT_IO,
                _ => EXIT_INVALID,
            };
        }
    }
    EXIT_INVALID
}
