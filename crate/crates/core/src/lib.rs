//! Periodic traveling waves of the fractional KdV equation: spectral
//! operators, closed-form and small-amplitude waves, the Petviashvili
//! iteration and the spectrum of its linearization.

pub mod error;
pub mod exact;
pub mod petviashvili;
pub mod special;
pub mod spectrum;
pub mod spectral;
pub mod stokes;

pub use error::{Error, Result};
pub use exact::{Convention, Provenance, WaveSolution};
pub use spectral::{Field, SpectralGrid, SymbolSpec, Variant};
