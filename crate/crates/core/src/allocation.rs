//! Greedy max-min sub-band assignment and waterfilling power allocation.
//!
//! All argmax/argmin searches break ties toward the lowest index: sub-band
//! first, then pair, then direction.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::rate_model::{effective_gain, NodeLink};
use crate::{Error, Result};

/// Per-band spectral efficiency `log2(1 + gamma)` of `link` under uniform
/// power `P / V`, used to rank sub-bands during assignment.
pub fn uniform_power_rates(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    psi: &[Complex64],
    link: NodeLink,
) -> Vec<f64> {
    let v_count = ch.subbands();
    let p = cfg.max_power[link.pair][link.dir.index()] / v_count as f64;
    (0..v_count)
        .map(|v| {
            let gain = effective_gain(
                ch.g(link.pair, v, link.dir),
                ch.h(link.pair, v, link.dir),
                psi,
            );
            (1.0 + p * gain.norm_sqr() / cfg.noise[link.pair][v]).log2()
        })
        .collect()
}

fn best_available(rates: &[f64], available: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (v, (&r, &free)) in rates.iter().zip(available).enumerate() {
        if free && best.is_none_or(|b| r > rates[b]) {
            best = Some(v);
        }
    }
    best
}

/// Assign every sub-band to exactly one node-direction.
///
/// First each node-direction, in order, claims its best band. Then the
/// node-direction with the smallest accumulated rate repeatedly claims its
/// best remaining band until none are left. Returns the owner of each band.
pub fn allocate_subbands(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    psi: &[Complex64],
) -> Result<Vec<NodeLink>> {
    let v_count = ch.subbands();
    let links: Vec<NodeLink> = NodeLink::all(cfg.pairs).collect();
    if v_count < links.len() {
        return Err(Error::config(format!(
            "{v_count} sub-bands cannot serve {} node-directions",
            links.len()
        )));
    }
    let rates: Vec<Vec<f64>> = links
        .iter()
        .map(|&l| uniform_power_rates(cfg, ch, psi, l))
        .collect();
    let mut available = vec![true; v_count];
    let mut owner: Vec<Option<NodeLink>> = vec![None; v_count];
    let mut accumulated = vec![0.0; links.len()];

    for (j, &link) in links.iter().enumerate() {
        let v = best_available(&rates[j], &available).expect("enough sub-bands checked above");
        accumulated[j] = rates[j][v];
        available[v] = false;
        owner[v] = Some(link);
    }

    for _ in links.len()..v_count {
        let mut j = 0;
        for (cand, &acc) in accumulated.iter().enumerate() {
            if acc < accumulated[j] {
                j = cand;
            }
        }
        let v = best_available(&rates[j], &available).expect("loop runs once per free band");
        accumulated[j] += rates[j][v];
        available[v] = false;
        owner[v] = Some(links[j]);
    }

    Ok(owner
        .into_iter()
        .map(|o| o.expect("every band assigned"))
        .collect())
}

/// `P / V` on every owned band (the assignment-stage assumption).
pub fn uniform_power(cfg: &SystemConfig, owners: &[NodeLink]) -> Vec<f64> {
    let v_count = owners.len() as f64;
    owners
        .iter()
        .map(|o| cfg.max_power[o.pair][o.dir.index()] / v_count)
        .collect()
}

/// Each node's budget split evenly over the bands it owns.
pub fn uniform_power_owned(cfg: &SystemConfig, owners: &[NodeLink]) -> Vec<f64> {
    owners
        .iter()
        .map(|o| {
            let count = owners.iter().filter(|x| *x == o).count() as f64;
            cfg.max_power[o.pair][o.dir.index()] / count
        })
        .collect()
}

/// Closed-form waterfilling over the `allocated` bands:
/// `p_v = [ (P + sum 1/w) / n - 1/w_v ]^+`.
///
/// `gains` are the normalised channel gains `|hbar|^2 / sigma^2`; every
/// allocated band must have a positive gain.
pub fn waterfill(allocated: &[bool], gains: &[f64], budget: f64) -> Vec<f64> {
    assert_eq!(allocated.len(), gains.len());
    let mut count = 0usize;
    let mut inv_sum = 0.0;
    for (&a, &w) in allocated.iter().zip(gains) {
        if a {
            assert!(
                w > 0.0,
                "waterfilling needs positive gains on allocated bands"
            );
            count += 1;
            inv_sum += 1.0 / w;
        }
    }
    if count == 0 {
        return vec![0.0; gains.len()];
    }
    let level = (budget + inv_sum) / count as f64;
    allocated
        .iter()
        .zip(gains)
        .map(|(&a, &w)| if a { (level - 1.0 / w).max(0.0) } else { 0.0 })
        .collect()
}

/// Waterfilling result for one node: per-band power and the bands that
/// survived pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillRow {
    pub power: Vec<f64>,
    pub active: Vec<bool>,
}

/// Waterfill, then repeatedly drop the weakest allocated band while any
/// allocated band gets no power.
pub fn iterative_waterfill_row(allocated: &[bool], gains: &[f64], budget: f64) -> WaterfillRow {
    let mut active: Vec<bool> = allocated
        .iter()
        .zip(gains)
        .map(|(&a, &w)| a && w > 0.0 && w.is_finite())
        .collect();

    if !active.iter().any(|&a| a) {
        // nothing usable: put the whole budget on the strongest allocated band
        let mut power = vec![0.0; gains.len()];
        let mut best: Option<usize> = None;
        for (v, (&a, &w)) in allocated.iter().zip(gains).enumerate() {
            if a && best.is_none_or(|b| w > gains[b]) {
                best = Some(v);
            }
        }
        if let Some(b) = best {
            power[b] = budget;
            active[b] = true;
        }
        return WaterfillRow { power, active };
    }

    loop {
        let power = waterfill(&active, gains, budget);
        let starved = active.iter().zip(&power).any(|(&a, &p)| a && p <= 0.0);
        if !starved {
            return WaterfillRow { power, active };
        }
        let mut weakest: Option<usize> = None;
        for (v, (&a, &w)) in active.iter().zip(gains).enumerate() {
            if a && weakest.is_none_or(|b| w < gains[b]) {
                weakest = Some(v);
            }
        }
        active[weakest.expect("a starved band is active")] = false;
    }
}

/// Normalised gains `|g + h^H psi|^2 / sigma^2` of the band owners.
pub fn band_gains(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    owners: &[NodeLink],
    psi: &[Complex64],
) -> Vec<f64> {
    owners
        .iter()
        .enumerate()
        .map(|(v, o)| {
            let gain = effective_gain(ch.g(o.pair, v, o.dir), ch.h(o.pair, v, o.dir), psi);
            gain.norm_sqr() / cfg.noise[o.pair][v]
        })
        .collect()
}

/// Iterative waterfilling for every node-direction. Pruned bands keep their
/// owner and receive zero power.
pub fn iterative_waterfill(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    owners: &[NodeLink],
    psi: &[Complex64],
) -> Vec<f64> {
    let gains = band_gains(cfg, ch, owners, psi);
    let mut power = vec![0.0; owners.len()];
    for link in NodeLink::all(cfg.pairs) {
        let allocated: Vec<bool> = owners.iter().map(|o| *o == link).collect();
        let row = iterative_waterfill_row(
            &allocated,
            &gains,
            cfg.max_power[link.pair][link.dir.index()],
        );
        for (v, &a) in allocated.iter().enumerate() {
            if a {
                power[v] = row.power[v];
            }
        }
    }
    power
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioParams;
    use crate::rate_model::{Direction, PhaseVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sum_rate(gains: &[f64], power: &[f64]) -> f64 {
        gains
            .iter()
            .zip(power)
            .map(|(w, p)| (1.0 + w * p).log2())
            .sum()
    }

    #[test]
    fn two_band_assignment_is_forced() {
        let cfg = ScenarioParams::tiny().build().unwrap();
        let ch = crate::channel::build_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let psi = PhaseVector::identity(2, cfg.codebook);
        let owners = allocate_subbands(&cfg, &ch, psi.as_slice()).unwrap();
        let fwd = NodeLink::new(0, Direction::Forward);
        let rates = uniform_power_rates(&cfg, &ch, psi.as_slice(), fwd);
        let best = if rates[1] > rates[0] { 1 } else { 0 };
        assert_eq!(owners[best], fwd);
        assert_eq!(owners[1 - best], NodeLink::new(0, Direction::Reverse));
    }

    #[test]
    fn identical_bands_follow_tie_break_order() {
        let mut p = ScenarioParams::reference();
        p.pairs = 2;
        p.subbands = 6;
        p.ris_elements = 0;
        p.taps_direct = 1;
        p.taps_to_ris = 1;
        p.taps_from_ris = 1;
        let cfg = p.build().unwrap();
        let ch = crate::channel::ChannelRealization::from_frequency_response(
            2,
            6,
            0,
            vec![Complex64::new(1e-5, 0.0); 24],
            vec![],
        );
        let owners = allocate_subbands(&cfg, &ch, &[]).unwrap();
        let l = |k, d| NodeLink::new(k, d);
        use Direction::*;
        // phase 1 claims bands 0..3 in link order; afterwards every link has
        // the same accumulated rate, so (0, Forward) then (0, Reverse) win.
        assert_eq!(
            owners,
            vec![
                l(0, Forward),
                l(0, Reverse),
                l(1, Forward),
                l(1, Reverse),
                l(0, Forward),
                l(0, Reverse)
            ]
        );
    }

    #[test]
    fn too_few_subbands_is_a_config_error() {
        let cfg = ScenarioParams::reference().build().unwrap();
        let ch = crate::channel::ChannelRealization::from_frequency_response(
            3,
            4,
            0,
            vec![Complex64::new(1.0, 0.0); 24],
            vec![],
        );
        assert!(matches!(
            allocate_subbands(&cfg, &ch, &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn uniform_power_examples() {
        let cfg = ScenarioParams::reference().build().unwrap();
        let l = NodeLink::new(0, Direction::Forward);
        let mut owners = vec![NodeLink::new(1, Direction::Reverse); 16];
        owners[3] = l;
        let p = uniform_power(&cfg, &owners);
        assert!((p[3] - cfg.max_power[0][0] / 16.0).abs() < 1e-15);
        let spent: f64 = owners
            .iter()
            .zip(&p)
            .filter(|(o, _)| **o == l)
            .map(|(_, p)| p)
            .sum();
        assert!(spent <= cfg.max_power[0][0]);
        let q = uniform_power_owned(&cfg, &owners);
        assert!((q[3] - cfg.max_power[0][0]).abs() < 1e-15);
        assert!((q[0] - cfg.max_power[1][1] / 15.0).abs() < 1e-15);
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill(&[true], &[3.0], 2.0), vec![2.0]);
        assert_eq!(waterfill(&[true, true], &[5.0, 5.0], 2.0), vec![1.0, 1.0]);
        let p = waterfill(&[true, true], &[4.0, 1.0], 1.0);
        assert!((p[0] - 0.875).abs() < 1e-15 && (p[1] - 0.125).abs() < 1e-15);
        assert!((p[0] + 0.25 - (p[1] + 1.0)).abs() < 1e-15);
        assert_eq!(waterfill(&[false, true], &[0.0, 2.0], 1.0), vec![0.0, 1.0]);
    }

    #[test]
    fn iterative_waterfill_examples() {
        let row = iterative_waterfill_row(&[true; 3], &[2.0; 3], 3.0);
        assert_eq!(row.power, vec![1.0; 3]);
        assert_eq!(row.active, vec![true; 3]);

        let row = iterative_waterfill_row(&[true, true], &[1e9, 1e-9], 1e-3);
        assert_eq!(row.power, vec![1e-3, 0.0]);
        assert_eq!(row.active, vec![true, false]);

        // zero-gain bands are dropped up front; all-zero keeps the first band
        let row = iterative_waterfill_row(&[true, true, false], &[0.0, 2.0, 9.0], 1.0);
        assert_eq!(row.power, vec![0.0, 1.0, 0.0]);
        let row = iterative_waterfill_row(&[true, true], &[0.0, 0.0], 1.0);
        assert_eq!(row.power, vec![1.0, 0.0]);
    }

    #[test]
    fn iterative_waterfill_beats_feasible_baselines() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let gains: Vec<f64> = (0..6)
                .map(|_| 10f64.powf(rng.random_range(-1.0..1.5)))
                .collect();
            let budget = rng.random_range(0.05..3.0);
            let row = iterative_waterfill_row(&[true; 6], &gains, budget);
            let total: f64 = row.power.iter().sum();
            assert!((total - budget).abs() < 1e-9);

            let uniform = vec![budget / 6.0; 6];
            let plain = waterfill(&[true; 6], &gains, budget);
            let scale = budget / plain.iter().sum::<f64>();
            let plain_feasible: Vec<f64> = plain.iter().map(|p| p * scale).collect();
            let best = sum_rate(&gains, &row.power);
            assert!(best >= sum_rate(&gains, &uniform) - 1e-12);
            assert!(best >= sum_rate(&gains, &plain_feasible) - 1e-12);
        }
    }

    #[test]
    fn scenario_allocation_satisfies_constraints() {
        let cfg = ScenarioParams::reference()
            .build()
            .unwrap()
            .with_ris(8, crate::config::Codebook::Continuous);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let ch = crate::channel::build_realization(&cfg, &mut rng);
            let psi = PhaseVector::random(8, cfg.codebook, &mut rng);
            let owners = allocate_subbands(&cfg, &ch, psi.as_slice()).unwrap();
            let power = iterative_waterfill(&cfg, &ch, &owners, psi.as_slice());
            let alloc = crate::rate_model::Allocation::new(owners, power);
            alloc.check_constraints(&cfg).unwrap();
        }
    }

    proptest! {
        #[test]
        fn water_level_is_flat_and_budget_is_met(
            gains in proptest::collection::vec(1e-3f64..1e3, 1..8),
            budget in 1e-3f64..10.0,
        ) {
            let alloc = vec![true; gains.len()];
            let row = iterative_waterfill_row(&alloc, &gains, budget);
            let total: f64 = row.power.iter().sum();
            prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1.0));
            let levels: Vec<f64> = row.power.iter().zip(&gains)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, w)| p + 1.0 / w)
                .collect();
            let level = levels[0];
            for l in &levels {
                prop_assert!((l - level).abs() <= 1e-9 * level.max(1.0));
            }
            // pruned bands sit at or above the water level
            for (p, w) in row.power.iter().zip(&gains) {
                if *p == 0.0 {
                    prop_assert!(1.0 / w >= level - 1e-9 * level.max(1.0));
                }
            }
        }
    }
}
