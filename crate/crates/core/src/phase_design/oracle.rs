//! Exhaustive search over every discrete codebook vector.

use crate::channel::ChannelRealization;
use crate::config::{Codebook, SystemConfig};
use crate::rate_model::{min_weighted_sumrate, Allocation, PhaseVector};
use crate::{Error, Result};

/// Largest number of candidates the exhaustive search will visit.
pub const ENUMERATION_CAP: u128 = 1 << 16;

/// All `2^(B R)` codebook vectors in lexicographic order of their index
/// digits (element 0 varies fastest).
pub fn codebook_candidates(
    elements: usize,
    codebook: Codebook,
) -> Result<impl Iterator<Item = PhaseVector>> {
    let Codebook::Discrete { bits } = codebook else {
        return Err(Error::ContinuousCodebook);
    };
    let total_bits = bits as u128 * elements as u128;
    let candidates = if total_bits >= 127 {
        u128::MAX
    } else {
        1u128 << total_bits
    };
    if candidates > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            candidates,
            cap: ENUMERATION_CAP,
        });
    }
    let mask = (1u64 << bits) - 1;
    Ok((0..candidates as u64).map(move |n| {
        let idx = (0..elements)
            .map(|r| ((n >> (bits as usize * r)) & mask) as u32)
            .collect();
        PhaseVector::from_indices(idx, bits)
    }))
}

/// Codebook vector maximising the min weighted sum-rate for fixed
/// allocation and powers, with its objective. The first maximiser wins ties.
pub fn exhaustive_phase_oracle(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
) -> Result<(PhaseVector, f64)> {
    let mut best: Option<(PhaseVector, f64)> = None;
    for cand in codebook_candidates(ch.elements(), cfg.codebook)? {
        let value = min_weighted_sumrate(cfg, ch, alloc, cand.as_slice());
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((cand, value));
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{allocate_subbands, uniform_power_owned};
    use crate::channel::build_realization;
    use crate::config::ScenarioParams;
    use crate::phase_design::{psg_optimize, PsgSettings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(r: usize, seed: u64) -> (SystemConfig, ChannelRealization, Allocation) {
        let mut p = ScenarioParams::tiny();
        p.ris_elements = r;
        let cfg = p.build().unwrap();
        let ch = build_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let psi = PhaseVector::identity(r, cfg.codebook);
        let owners = allocate_subbands(&cfg, &ch, psi.as_slice()).unwrap();
        let power = uniform_power_owned(&cfg, &owners);
        (cfg, ch, Allocation::new(owners, power))
    }

    #[test]
    fn enumeration_counts_and_cap() {
        assert_eq!(
            codebook_candidates(3, Codebook::Discrete { bits: 1 })
                .unwrap()
                .count(),
            8
        );
        assert_eq!(
            codebook_candidates(2, Codebook::Discrete { bits: 2 })
                .unwrap()
                .count(),
            16
        );
        assert!(matches!(
            codebook_candidates(17, Codebook::Discrete { bits: 1 }),
            Err(Error::EnumerationCap { .. })
        ));
        assert!(matches!(
            codebook_candidates(2, Codebook::Continuous),
            Err(Error::ContinuousCodebook)
        ));
    }

    #[test]
    fn single_element_picks_better_of_two() {
        let (cfg, ch, alloc) = setup(1, 3);
        let (best, value) = exhaustive_phase_oracle(&cfg, &ch, &alloc).unwrap();
        let a = min_weighted_sumrate(
            &cfg,
            &ch,
            &alloc,
            PhaseVector::from_indices(vec![0], 1).as_slice(),
        );
        let b = min_weighted_sumrate(
            &cfg,
            &ch,
            &alloc,
            PhaseVector::from_indices(vec![1], 1).as_slice(),
        );
        assert_eq!(value, a.max(b));
        assert_eq!(best.indices().unwrap()[0], if b > a { 1 } else { 0 });
    }

    #[test]
    fn two_elements_match_manual_enumeration() {
        for seed in 0..20 {
            let (cfg, ch, alloc) = setup(2, seed);
            let (_, value) = exhaustive_phase_oracle(&cfg, &ch, &alloc).unwrap();
            let manual = [[0, 0], [1, 0], [0, 1], [1, 1]]
                .iter()
                .map(|i| {
                    min_weighted_sumrate(
                        &cfg,
                        &ch,
                        &alloc,
                        PhaseVector::from_indices(i.to_vec(), 1).as_slice(),
                    )
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(value, manual);

            let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
            let random = PhaseVector::random(2, cfg.codebook, &mut rng);
            let rand_value = min_weighted_sumrate(&cfg, &ch, &alloc, random.as_slice());
            let psg = psg_optimize(&cfg, &ch, &alloc, &random, PsgSettings::from_config(&cfg));
            assert!(value >= -psg.best_objective - 1e-12);
            assert!(-psg.best_objective >= rand_value - 1e-12);
        }
    }
}
