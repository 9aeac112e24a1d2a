//! Simulation lab for the margin-endowed Gaussian mixture with randomly
//! flipped labels.
//!
//! The crate covers the full pipeline: sampling labelled data and passing the
//! labels through a flip / randomized-response channel ([`datagen`]), fitting
//! the averaging classifier and retraining it on its own hard predictions
//! ([`linear`]), measuring population error exactly or by Monte Carlo
//! ([`evaluation`]), evaluating the closed-form error and sample-complexity
//! bounds ([`bounds`]) and running seeded sweeps over all of it
//! ([`experiments`]).

pub mod bounds;
pub mod datagen;
mod error;
pub mod evaluation;
pub mod experiments;
pub mod linear;
pub mod quadrature;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
