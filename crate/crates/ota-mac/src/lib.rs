//! Over-the-air distributed optimization across a Gaussian multiple access
//! channel.
//!
//! `K` clients hold stochastic gradient estimates and must convey their
//! average to a server through a shared additive Gaussian channel under a
//! per-client power constraint. This crate implements:
//!
//! * [`channel`] — the Gaussian MAC, ASK amplitude grids, minimum-distance
//!   decoding of the superposed constellation, and the decoding-failure
//!   union bound;
//! * [`quantize`] — the stochastic uniform quantizer, the randomized
//!   Hadamard rotation, and the correlated-sampling quantizer driven by
//!   shared randomness;
//! * [`lattice`] — carry-free base-`w` packing of quantizer digits and the
//!   successive-cancellation digit extraction;
//! * [`schemes`] — the end-to-end digital schemes (UQ-OTA and the
//!   side-information-assisted WZ-OTA), the analog scaled-transmission
//!   baseline, and parameter selection;
//! * [`optimize`] — projected SGD with the deviation-driven learning rate
//!   and the gradient oracles used in experiments;
//! * [`harness`] — experiment configuration, sweeps, and CSV/.dat output.
//!
//! The `ota-mac` binary exposes the harness on the command line.

pub mod channel;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod optimize;
pub mod quantize;
pub mod rng;
pub mod schemes;

pub use error::{Error, Result};
