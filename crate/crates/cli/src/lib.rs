//! Command-line harness around `petlab`: solver runs, spectra, parameter
//! sweeps and the acceptance checks, written out as CSV, JSON and SVG.

pub mod commands;
pub mod output;
pub mod presets;
pub mod verify;

pub use commands::exit_code;
