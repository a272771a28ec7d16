//! Uplink rate analysis and phase-shift design for cell-free massive MIMO
//! assisted by reconfigurable intelligent surfaces, with transceiver
//! hardware impairments and surface phase noise.
//!
//! The crate is organised around a closed-form ergodic rate and the tools
//! that check and use it:
//!
//! - [`scenario`] builds configurations and large-scale statistics.
//! - [`channel`] draws small-scale realizations.
//! - [`closedform`] evaluates the four expectation terms and the rate.
//! - [`montecarlo`] estimates the same terms by simulation.
//! - [`asymptotics`] holds the special-case and power-scaling formulas.
//! - [`reform`] re-expresses the rate with stacked matrices.
//! - [`optimizer`] adds gradients and accelerated gradient ascent.
//! - [`experiments`] runs sweeps and the verification suite.

pub mod asymptotics;
pub mod channel;
pub mod closedform;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod optimizer;
pub mod reform;
pub mod scenario;

/// Double-precision complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

pub use error::{Error, Result};
