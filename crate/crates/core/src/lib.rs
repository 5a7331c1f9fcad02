//! Structure-preserving fully-discrete schemes for the one-dimensional
//! stochastic Klein-Gordon-Schrödinger system with additive noise.

pub mod diagnostics;
pub mod dst;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod linalg;
pub mod montecarlo;
pub mod noise;
pub mod spatial;

pub use error::{Result, SkgsError};
