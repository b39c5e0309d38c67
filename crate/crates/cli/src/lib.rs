//! Instance file format and command-line front end.

pub mod app;
pub mod format;
