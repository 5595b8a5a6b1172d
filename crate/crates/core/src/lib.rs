//! Joint sub-band allocation, power allocation and discrete phase-shift design
//! for RIS-assisted two-way multi-pair OFDM links.
//!
//! The crate is organised along the processing chain:
//!
//! - [`channel`]: geometry, multipath taps, RIS cascades and per-sub-band
//!   frequency responses.
//! - [`rate_model`]: SNR, rates, the max-min weighted sum-rate objective and
//!   the weighted-MMSE surrogate.
//! - [`allocation`]: greedy max-min sub-band assignment and (iterative)
//!   waterfilling.
//! - [`phase_design`]: codebook projection, eigen-based initialisation, the
//!   projected-subgradient phase update and an exhaustive small-scale oracle.
//! - [`harness`]: the outer alternating loop, the scheme variants, seeded
//!   Monte-Carlo sweeps and CSV output.
//! - [`verify`]: a self-contained invariant and oracle battery used by the
//!   `verify` CLI subcommand.

pub mod allocation;
pub mod channel;
pub mod config;
pub mod harness;
pub mod phase_design;
pub mod rate_model;
pub mod verify;

mod error;

pub use error::{Error, Result};

pub use num_complex::Complex64;
