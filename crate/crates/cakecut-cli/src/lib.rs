//! File formats, reports and oracle suites behind the `cakecut` binary.

pub mod commands;
pub mod format;
pub mod oracle;
pub mod report;
pub mod trace;
