//! Entangled orbital-angular-momentum photons through Kolmogorov turbulence,
//! with beacon-driven adaptive-optics correction.
//!
//! The pipeline: split-step propagation of Laguerre-Gaussian modes and a
//! Gaussian beacon through shared random phase screens ([`turbulence`],
//! [`field`]), optional phase correction ([`ao`]), projection onto the OAM
//! basis at the receiver ([`modes`]), and disorder-averaged two-photon
//! states with their entanglement and CGLMP Bell parameters
//! ([`entanglement`], [`bell`]). [`harness`] drives deterministic parallel
//! sweeps over turbulence strengths.

pub mod ao;
pub mod bell;
pub mod entanglement;
pub mod error;
pub mod fft;
pub mod field;
pub mod harness;
pub mod linalg;
pub mod modes;
pub mod parallel;
pub mod rng;
pub mod turbulence;

pub use error::{Error, Result};
