//! Radial positive solutions of `M⁺(D²u) + μu/r² = uᵖ` in the punctured unit ball.
//!
//! The crate is organised around the pipeline
//! constants → barriers → monotone construction → Emden–Fowler dynamics →
//! asymptotic classification, with comparison harnesses checking the
//! ordering claims along the way.

pub mod barriers;
pub mod classifier;
pub mod comparison;
pub mod constants;
pub mod emden_fowler;
pub mod error;
pub mod io;
pub mod monotone_scheme;
pub mod radial_pucci;

pub use error::{Error, Result};
