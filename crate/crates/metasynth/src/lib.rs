//! Files, benchmarking and the command-line front end for `metasynth-core`.

pub mod bench;
pub mod cli;
pub mod format;
pub mod plot;
pub mod solve;
pub mod trace_io;
