//! Outer alternating optimisation, scheme variants and Monte-Carlo sweeps.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::allocation::{allocate_subbands, iterative_waterfill, uniform_power_owned};
use crate::channel::{build_realization, ChannelRealization};
use crate::config::{Codebook, SystemConfig};
use crate::phase_design::{codebook_candidates, init_phase, psg_optimize, PsgSettings};
use crate::rate_model::{weighted_sumrates, Allocation, DirectionalRates, PhaseVector};
use crate::{Error, Result};

mod monte_carlo;
mod output;
pub mod stats;

pub use monte_carlo::{
    monte_carlo, run_trial, summarize, trial_rng, RngPurpose, SummaryRow, SweepPoint,
};
pub use output::{format_sig, write_csv, CSV_HEADER};

/// Design variants compared in the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// Eigen initialisation, PSG phase updates and iterative waterfilling.
    OptPsg,
    /// PSG phase updates with each node's budget split evenly over its bands.
    UniPowPsg,
    /// Phases frozen at the eigen initialisation; waterfilling only.
    InitialPss,
    /// PSG and waterfilling from a random codebook vector.
    RandInitialPsg,
    /// Random phases, frozen; waterfilling only.
    RandPss,
    /// Direct links only.
    NoRis,
    /// Exhaustive joint search over codebook vectors (with waterfilling) for
    /// the eigen-initialised allocation; tiny surfaces only.
    OracleTiny,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::OptPsg,
        SchemeId::UniPowPsg,
        SchemeId::InitialPss,
        SchemeId::RandInitialPsg,
        SchemeId::RandPss,
        SchemeId::NoRis,
        SchemeId::OracleTiny,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::OptPsg => "optPSG",
            SchemeId::UniPowPsg => "uniPowPSG",
            SchemeId::InitialPss => "initialPSs",
            SchemeId::RandInitialPsg => "randInitialPSG",
            SchemeId::RandPss => "randPSs",
            SchemeId::NoRis => "noRIS",
            SchemeId::OracleTiny => "oracleTiny",
        }
    }

    fn updates_phase(self) -> bool {
        matches!(
            self,
            SchemeId::OptPsg | SchemeId::UniPowPsg | SchemeId::RandInitialPsg
        )
    }

    fn waterfills(self) -> bool {
        !matches!(self, SchemeId::UniPowPsg)
    }

    fn random_start(self) -> bool {
        matches!(self, SchemeId::RandInitialPsg | SchemeId::RandPss)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = SchemeId::ALL.iter().map(|s| s.name()).collect();
                Error::config(format!(
                    "unknown scheme '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Everything a scheme produced on one realization.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: SchemeId,
    pub rates: DirectionalRates,
    pub allocation: Allocation,
    pub phase: PhaseVector,
    pub outer_iters: usize,
    /// False when the outer loop hit its iteration cap.
    pub converged: bool,
    /// Objective after the initial power allocation and after every outer iteration.
    pub trace: Vec<f64>,
}

impl SchemeOutcome {
    pub fn objective(&self) -> f64 {
        self.rates.min()
    }
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scheme: SchemeId,
    pub ris_elements: usize,
    pub codebook: Codebook,
    pub trial: usize,
    pub seed: u64,
    pub min_sumrate: f64,
    pub dir_sumrates: [f64; 2],
    pub outer_iters: usize,
    pub converged: bool,
    pub wall_ms: u64,
}

/// Draw a realization from `rng` and run `scheme` on it.
pub fn run_scheme<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    scheme: SchemeId,
    rng: &mut R,
) -> Result<SchemeOutcome> {
    let ch = build_realization(cfg, rng);
    run_scheme_on(cfg, &ch, scheme, rng)
}

/// Run `scheme` on a given realization. `rng` is only consumed by the
/// random-phase schemes.
pub fn run_scheme_on<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    scheme: SchemeId,
    rng: &mut R,
) -> Result<SchemeOutcome> {
    let ch: Cow<'_, ChannelRealization> = if scheme == SchemeId::NoRis {
        Cow::Owned(ch.without_ris())
    } else {
        Cow::Borrowed(ch)
    };
    let ch = ch.as_ref();
    let elements = ch.elements();
    let initial = if scheme.random_start() {
        PhaseVector::random(elements, cfg.codebook, rng)
    } else {
        init_phase(ch, cfg.codebook, cfg.lambda_grid_points)?
    };
    let owners = allocate_subbands(cfg, ch, initial.as_slice())?;

    if scheme == SchemeId::OracleTiny {
        return joint_oracle(cfg, ch, owners);
    }

    let power = if scheme.waterfills() {
        iterative_waterfill(cfg, ch, &owners, initial.as_slice())
    } else {
        uniform_power_owned(cfg, &owners)
    };
    let mut alloc = Allocation::new(owners, power);
    let mut psi = initial;
    let mut objective = weighted_sumrates(cfg, ch, &alloc, psi.as_slice()).min();
    let mut trace = vec![objective];
    let mut converged = false;
    let mut outer_iters = 0;
    let settings = PsgSettings::from_config(cfg);

    while outer_iters < cfg.outer_max_iters {
        outer_iters += 1;
        if scheme.updates_phase() {
            psi = psg_optimize(cfg, ch, &alloc, &psi, settings).best;
        }
        if scheme.waterfills() {
            alloc.set_powers(iterative_waterfill(cfg, ch, alloc.owners(), psi.as_slice()));
        }
        let updated = weighted_sumrates(cfg, ch, &alloc, psi.as_slice()).min();
        trace.push(updated);
        let change = (updated - objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
        objective = updated;
        if change < cfg.outer_tol {
            converged = true;
            break;
        }
    }

    Ok(SchemeOutcome {
        scheme,
        rates: weighted_sumrates(cfg, ch, &alloc, psi.as_slice()),
        allocation: alloc,
        phase: psi,
        outer_iters,
        converged,
        trace,
    })
}

/// Best codebook vector with its waterfilled powers for a fixed assignment.
/// Upper-bounds every scheme that shares the assignment.
fn joint_oracle(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    owners: Vec<crate::rate_model::NodeLink>,
) -> Result<SchemeOutcome> {
    let mut best: Option<(PhaseVector, Vec<f64>, f64)> = None;
    for cand in codebook_candidates(ch.elements(), cfg.codebook)? {
        let power = iterative_waterfill(cfg, ch, &owners, cand.as_slice());
        let alloc = Allocation::new(owners.clone(), power);
        let value = weighted_sumrates(cfg, ch, &alloc, cand.as_slice()).min();
        if best.as_ref().is_none_or(|(_, _, b)| value > *b) {
            best = Some((cand, alloc.powers().to_vec(), value));
        }
    }
    let (phase, power, value) = best.expect("at least one candidate");
    let allocation = Allocation::new(owners, power);
    Ok(SchemeOutcome {
        scheme: SchemeId::OracleTiny,
        rates: weighted_sumrates(cfg, ch, &allocation, phase.as_slice()),
        allocation,
        phase,
        outer_iters: 1,
        converged: true,
        trace: vec![value],
    })
}
