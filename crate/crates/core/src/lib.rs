//! Matched-filter precoding for distributed massive MU-MIMO downlinks.
//!
//! The crate synthesizes correlated Rayleigh channels with unequal link
//! gains and imperfect CSI, evaluates the finite-size expected per-user
//! SINR of a matched-filter (conjugate beamforming) precoder, and computes
//! its large-system limit. The [`harness`] module drives the experiments
//! and the `massim` command line tool.
//!
//! Module map:
//!
//! * [`correlation`]: x-pol array geometry and the exponential/Kronecker
//!   transmit correlation matrix with its spectral data.
//! * [`linkgain`]: statistical (path loss + log-normal shadowing) and
//!   limiting-profile link gain generators and their averages.
//! * [`channel`]: channel synthesis, the imperfect-CSI model and the
//!   per-user composite gain spectrum.
//! * [`mf`]: matched-filter SINR: finite-size expectation, Monte Carlo
//!   downlink oracle and the asymptotic limit with its special cases.
//! * [`harness`]: experiment configuration, runners, CDFs, CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod correlation;
pub mod error;
pub mod harness;
pub mod linkgain;
pub mod mf;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
