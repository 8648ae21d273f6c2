//! Command-line companion to `taj-core`: text format, map files, the
//! interpreter, and the analysis driver.

pub mod annotmap;
pub mod driver;
pub mod exec;
pub mod text;
