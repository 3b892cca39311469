//! Subcommand implementations. Each returns the process exit code on
//! success; errors map to exit codes in `main`.

pub mod convert;
pub mod simulate;
pub mod stats;
