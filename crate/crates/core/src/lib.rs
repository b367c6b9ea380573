//! Stable super-resolution of nonnegative spike signals from low-pass data.
//!
//! The crate covers the discrete forward models ([`spectral`]), Poisson
//! observation noise ([`noise`]), Rayleigh-regular supports ([`rayleigh`]),
//! recovery by `min ||s - Qx||_1 s.t. x >= 0` ([`solver`]), dual certificates
//! and the stability bounds they imply ([`certificate`]), the spectrum
//! flattening filter for the triangular kernel ([`flattening`]), and the
//! converse constructions bounding any method's noise amplification
//! ([`adversarial`]). [`experiments`] composes these into reproducible runs.

pub mod adversarial;
pub mod certificate;
pub mod error;
pub mod experiments;
pub mod flattening;
pub mod grid;
pub mod io;
pub mod noise;
pub mod rayleigh;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, GridSignal};
pub use spectral::{FourierMultiplier, ForwardOperator, OperatorKind};
