use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stats::{mean, standard_error};
use super::{run_scheme_on, SchemeId, TrialResult};
use crate::channel::build_realization;
use crate::config::{Codebook, SystemConfig};
use crate::Result;

/// One (R, B) point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub ris_elements: usize,
    pub codebook: Codebook,
}

/// Independent random streams of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngPurpose {
    Channel,
    Scheme,
}

/// Stream for `(seed, trial, purpose)`. The channel stream does not depend
/// on the sweep point, so every point and scheme of a trial sees the same
/// geometry and direct links.
pub fn trial_rng(seed: u64, trial: usize, purpose: RngPurpose) -> ChaCha8Rng {
    let salt = match purpose {
        RngPurpose::Channel => 0,
        RngPurpose::Scheme => 0x9E37_79B9_7F4A_7C15,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(trial as u64);
    rng
}

/// Run every scheme on one shared realization.
pub fn run_trial(
    cfg: &SystemConfig,
    schemes: &[SchemeId],
    point: SweepPoint,
    trial: usize,
    timing: bool,
) -> Result<Vec<TrialResult>> {
    let cfg = cfg.with_ris(point.ris_elements, point.codebook);
    cfg.validate()?;
    let ch = build_realization(&cfg, &mut trial_rng(cfg.seed, trial, RngPurpose::Channel));
    schemes
        .iter()
        .map(|&scheme| {
            let mut rng = trial_rng(cfg.seed, trial, RngPurpose::Scheme);
            let started = Instant::now();
            let out = run_scheme_on(&cfg, &ch, scheme, &mut rng)?;
            let wall_ms = if timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            Ok(TrialResult {
                scheme,
                ris_elements: point.ris_elements,
                codebook: point.codebook,
                trial,
                seed: cfg.seed,
                min_sumrate: out.objective(),
                dir_sumrates: out.rates.0,
                outer_iters: out.outer_iters,
                converged: out.converged,
                wall_ms,
            })
        })
        .collect()
}

/// Sweep every point for `trials` paired trials. Rows are ordered by point,
/// then trial, then scheme. Wall-clock time is recorded only when `timing`
/// is set, so that untimed runs are bit-for-bit reproducible.
pub fn monte_carlo(
    cfg: &SystemConfig,
    schemes: &[SchemeId],
    sweep: &[SweepPoint],
    trials: usize,
    timing: bool,
) -> Result<Vec<TrialResult>> {
    let mut rows = Vec::with_capacity(sweep.len() * trials * schemes.len());
    for &point in sweep {
        let per_trial: Vec<Vec<TrialResult>> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, schemes, point, t, timing))
            .collect::<Result<_>>()?;
        rows.extend(per_trial.into_iter().flatten());
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: SchemeId,
    pub ris_elements: usize,
    pub codebook: Codebook,
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Mean and standard error of the objective per (scheme, R, B), in order of
/// first appearance.
pub fn summarize(rows: &[TrialResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(SchemeId, usize, Codebook)> = Vec::new();
    for r in rows {
        let key = (r.scheme, r.ris_elements, r.codebook);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scheme, ris_elements, codebook)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.scheme == scheme && r.ris_elements == ris_elements && r.codebook == codebook
                })
                .map(|r| r.min_sumrate)
                .collect();
            SummaryRow {
                scheme,
                ris_elements,
                codebook,
                trials: values.len(),
                mean: mean(&values),
                std_error: standard_error(&values),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioParams;

    #[test]
    fn empty_sweep_gives_empty_table() {
        let cfg = ScenarioParams::reference().build().unwrap();
        let rows = monte_carlo(&cfg, &[SchemeId::OptPsg], &[], 3, false).unwrap();
        assert!(rows.is_empty());
        assert!(summarize(&rows).is_empty());
    }

    #[test]
    fn runs_are_reproducible_and_paired() {
        let cfg = ScenarioParams::reference().build().unwrap();
        let sweep = [SweepPoint {
            ris_elements: 4,
            codebook: Codebook::Discrete { bits: 1 },
        }];
        let schemes = [SchemeId::OptPsg, SchemeId::NoRis];
        let a = monte_carlo(&cfg, &schemes, &sweep, 2, false).unwrap();
        let b = monte_carlo(&cfg, &schemes, &sweep, 2, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!((a[0].trial, a[0].scheme), (0, SchemeId::OptPsg));
        assert_eq!((a[1].trial, a[1].scheme), (0, SchemeId::NoRis));
        let summary = summarize(&a);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].trials, 2);
    }

    #[test]
    fn streams_differ_by_trial_and_purpose() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 0, RngPurpose::Channel).random();
        let b: u64 = trial_rng(1, 1, RngPurpose::Channel).random();
        let c: u64 = trial_rng(1, 0, RngPurpose::Scheme).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
