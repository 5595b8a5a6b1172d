//! Reflection-coefficient design.
//!
//! - [`project`] maps arbitrary complex values onto the codebook.
//! - [`init`] builds the starting point from the dominant eigenvector of a
//!   multiplier-weighted gain matrix.
//! - [`psg`] refines it with a projected subgradient method on the
//!   weighted-MMSE surrogate.
//! - [`oracle`] enumerates every codebook vector at small scale.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::Codebook;
use crate::rate_model::PhaseVector;

pub mod init;
pub mod oracle;
pub mod psg;

pub use init::{init_phase, init_phase_state, min_channel_gain, InitSolverState};
pub use oracle::{codebook_candidates, exhaustive_phase_oracle, ENUMERATION_CAP};
pub use psg::{
    direction_gradient, psg_optimize, refresh_state, step_size, subgradient,
    update_receive_filters, update_weights, PsgOutcome, PsgSettings,
};

/// Angular slack under which two codebook points count as equidistant.
const TIE_TOLERANCE: f64 = 1e-9;

/// Nearest codebook index for a single value. Zero maps to index zero and
/// exact ties go to the lower index.
pub fn nearest_index(z: Complex64, bits: u32) -> u32 {
    if z == Complex64::new(0.0, 0.0) {
        return 0;
    }
    let levels = 1u64 << bits;
    let mut angle = z.arg();
    if angle < 0.0 {
        angle += 2.0 * PI;
    }
    let pos = angle * levels as f64 / (2.0 * PI);
    let below = pos.floor();
    let frac = pos - below;
    let lo = (below as u64) % levels;
    let hi = (lo + 1) % levels;
    let pick = if frac < 0.5 - TIE_TOLERANCE {
        lo
    } else if frac > 0.5 + TIE_TOLERANCE {
        hi
    } else {
        lo.min(hi)
    };
    pick as u32
}

/// Elementwise projection onto the codebook.
pub fn project(z: &[Complex64], codebook: Codebook) -> PhaseVector {
    match codebook {
        Codebook::Continuous => {
            let angles: Vec<f64> = z
                .iter()
                .map(|&x| {
                    if x == Complex64::new(0.0, 0.0) {
                        0.0
                    } else {
                        x.arg()
                    }
                })
                .collect();
            PhaseVector::from_angles(&angles)
        }
        Codebook::Discrete { bits } => {
            PhaseVector::from_indices(z.iter().map(|&x| nearest_index(x, bits)).collect(), bits)
        }
    }
}
