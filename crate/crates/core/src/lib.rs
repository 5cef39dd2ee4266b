//! Physical-layer neighbor discovery by multiuser detection.
//!
//! A node listening on a slotted multiple-access channel decides which of
//! its peers it can hear above an activity threshold, from chip-rate
//! observations of their randomly transmitted signatures. This crate
//! provides the pieces end to end:
//!
//! - [`signatures`]: m-sequence signatures and the correlator algebra
//!   (Gram matrix, decorrelating pseudo-inverse, zero-forcing and MMOE
//!   banks);
//! - [`channel`]: random session realizations (Rayleigh fading, slotted
//!   activity) and synthesis of the received slot vectors;
//! - [`detectors`]: the coherent/incoherent integration detectors, the
//!   linear test family, and exhaustive ML/MAP reference oracles for tiny
//!   scales;
//! - [`analysis`]: closed-form false-alarm/miss series, their unconditional
//!   averages, asymptotic threshold formulas, and threshold optimization.

pub mod analysis;
pub mod channel;
pub mod detectors;
pub mod error;
pub mod signatures;

pub use error::{Error, Result};
