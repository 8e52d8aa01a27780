//! Spectral time-splitting solvers for the Maxwell–Dirac system and its
//! semi-classical and non-relativistic limits.

pub mod diagnostics;
pub mod dirac;
pub mod error;
pub mod field;
pub mod grid;
pub mod md;
pub mod runner;
pub mod sp;
pub mod wkb;

pub use error::{Error, Result};
pub use field::{gaussian_spinor, total_charge, ExternalFields, PotentialState, SimConfig, Splitting, SpinorField};
pub use grid::{GridSpec, Spectral, C64};
