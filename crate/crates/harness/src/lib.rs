//! Files, checkpoints, evaluation, benchmarking and the `jssp` command line
//! around `jssp-core`.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod eval;
pub mod format;
pub mod io;
pub mod training;
