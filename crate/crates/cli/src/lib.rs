//! Study files, reports and subcommands behind the `redlab` binary.

pub mod commands;
pub mod report;
pub mod study_file;
