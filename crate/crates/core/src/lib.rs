//! One-bit-ADC angle-of-arrival estimation and analog receive beamforming for
//! mmWave MIMO.
//!
//! The crate is organized bottom-up:
//!
//! * [`signal`] synthesizes array responses, narrowband and clustered wideband
//!   channels, noisy observations and their 1-bit quantization.
//! * [`likelihood`] evaluates the log-domain coherent and noncoherent 1-bit
//!   likelihood objectives.
//! * [`estimation`] runs the two-step (coarse grid, bracketed refinement)
//!   angle estimator and effective-gain estimation.
//! * [`beamforming`] builds the phase-shifter beamformers and the SNR metrics.
//! * [`harness`] drives seeded Monte-Carlo experiments and writes CSV rows.

pub mod beamforming;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod likelihood;
pub mod signal;

pub use error::{Error, Result};
