//! SNR, rates, the max-min weighted sum-rate objective and the
//! weighted-MMSE surrogate built on top of them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::config::{Codebook, SystemConfig};

/// Transmission direction of a node pair. `Forward` is first node to second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Forward, Direction::Reverse];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Reverse => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Direction {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

/// A transmitting node: pair index plus direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLink {
    pub pair: usize,
    pub dir: Direction,
}

impl NodeLink {
    pub fn new(pair: usize, dir: Direction) -> Self {
        NodeLink { pair, dir }
    }

    /// All node-directions in tie-break order: pair first, then direction.
    pub fn all(pairs: usize) -> impl Iterator<Item = NodeLink> {
        (0..pairs).flat_map(|k| Direction::ALL.into_iter().map(move |d| NodeLink::new(k, d)))
    }
}

/// Unit-modulus reflection coefficients.
///
/// Discrete vectors are always built from integer codebook indices, so their
/// phases are exactly `2 pi b / 2^B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    psi: Vec<Complex64>,
    codebook: Codebook,
    indices: Option<Vec<u32>>,
}

/// Codebook point `b` for a `bits`-bit codebook.
pub fn codebook_point(b: u32, bits: u32) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * b as f64 / (1u64 << bits) as f64)
}

impl PhaseVector {
    pub fn from_indices(indices: Vec<u32>, bits: u32) -> Self {
        let levels = 1u64 << bits;
        assert!(
            indices.iter().all(|&b| (b as u64) < levels),
            "codebook index out of range"
        );
        let psi = indices.iter().map(|&b| codebook_point(b, bits)).collect();
        PhaseVector {
            psi,
            codebook: Codebook::Discrete { bits },
            indices: Some(indices),
        }
    }

    /// Continuous-codebook vector from phases in radians.
    pub fn from_angles(angles: &[f64]) -> Self {
        PhaseVector {
            psi: angles
                .iter()
                .map(|&a| Complex64::from_polar(1.0, a))
                .collect(),
            codebook: Codebook::Continuous,
            indices: None,
        }
    }

    /// Every coefficient equal to one (index zero for discrete codebooks).
    pub fn identity(elements: usize, codebook: Codebook) -> Self {
        match codebook {
            Codebook::Continuous => Self::from_angles(&vec![0.0; elements]),
            Codebook::Discrete { bits } => Self::from_indices(vec![0; elements], bits),
        }
    }

    /// Uniformly random codebook vector.
    pub fn random<R: Rng + ?Sized>(elements: usize, codebook: Codebook, rng: &mut R) -> Self {
        match codebook {
            Codebook::Continuous => {
                let angles: Vec<f64> = (0..elements)
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect();
                Self::from_angles(&angles)
            }
            Codebook::Discrete { bits } => {
                let levels = 1u32 << bits;
                let idx = (0..elements).map(|_| rng.random_range(0..levels)).collect();
                Self::from_indices(idx, bits)
            }
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn codebook(&self) -> Codebook {
        self.codebook
    }

    /// Codebook indices; `None` for continuous vectors.
    pub fn indices(&self) -> Option<&[u32]> {
        self.indices.as_deref()
    }
}

/// Sub-band ownership and per-band transmit power.
///
/// Each sub-band has exactly one owner, so the indicator `eta[k][v][i]` is
/// `owner(v) == (k, i)`. A band whose power was driven to zero by
/// waterfilling keeps its owner and simply carries no power.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    owners: Vec<NodeLink>,
    power: Vec<f64>,
}

impl Allocation {
    pub fn new(owners: Vec<NodeLink>, power: Vec<f64>) -> Self {
        assert_eq!(owners.len(), power.len(), "one power value per sub-band");
        Allocation { owners, power }
    }

    pub fn subbands(&self) -> usize {
        self.owners.len()
    }

    pub fn owners(&self) -> &[NodeLink] {
        &self.owners
    }

    pub fn owner(&self, v: usize) -> NodeLink {
        self.owners[v]
    }

    pub fn powers(&self) -> &[f64] {
        &self.power
    }

    pub fn power(&self, v: usize) -> f64 {
        self.power[v]
    }

    pub fn set_powers(&mut self, power: Vec<f64>) {
        assert_eq!(power.len(), self.owners.len());
        self.power = power;
    }

    pub fn eta(&self, pair: usize, v: usize, dir: Direction) -> bool {
        self.owners[v] == NodeLink::new(pair, dir)
    }

    pub fn p(&self, pair: usize, v: usize, dir: Direction) -> f64 {
        if self.eta(pair, v, dir) {
            self.power[v]
        } else {
            0.0
        }
    }

    pub fn bands_of(&self, link: NodeLink) -> impl Iterator<Item = usize> + '_ {
        self.owners
            .iter()
            .enumerate()
            .filter(move |(_, o)| **o == link)
            .map(|(v, _)| v)
    }

    /// Check the budget, non-negativity and ownership constraints.
    pub fn check_constraints(&self, cfg: &SystemConfig) -> Result<(), String> {
        if self.owners.len() != cfg.subbands {
            return Err(format!(
                "{} sub-bands allocated, expected {}",
                self.owners.len(),
                cfg.subbands
            ));
        }
        for link in NodeLink::all(cfg.pairs) {
            let mut owned = 0usize;
            let mut spent = 0.0;
            for v in self.bands_of(link) {
                owned += 1;
                spent += self.power[v];
            }
            if owned == 0 {
                return Err(format!("{link:?} owns no sub-band"));
            }
            let budget = cfg.max_power[link.pair][link.dir.index()];
            if spent > budget + 1e-9 {
                return Err(format!(
                    "{link:?} spends {spent} W over its {budget} W budget"
                ));
            }
        }
        if let Some(o) = self.owners.iter().find(|o| o.pair >= cfg.pairs) {
            return Err(format!("sub-band owned by unknown pair {o:?}"));
        }
        if let Some(p) = self.power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(format!("invalid power {p}"));
        }
        Ok(())
    }
}

/// Receive filters, MSE weights and surrogate values, one filter and weight
/// per sub-band (the receiving node is implied by the band's owner).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub filters: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// `f_i` per direction.
    pub objectives: [f64; 2],
}

impl SurrogateState {
    /// `f = max_i f_i`.
    pub fn objective(&self) -> f64 {
        self.objectives[0].max(self.objectives[1])
    }
}

/// `g + h^H psi`.
#[inline]
pub fn effective_gain(g: Complex64, h: &[Complex64], psi: &[Complex64]) -> Complex64 {
    assert_eq!(
        h.len(),
        psi.len(),
        "reflected channel and phase vector lengths differ"
    );
    h.iter()
        .zip(psi)
        .fold(g, |acc, (hr, pr)| acc + hr.conj() * pr)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    /// bps/Hz, already divided by the sub-band count.
    pub rate: f64,
    pub snr: f64,
}

pub fn snr(power: f64, gain: Complex64, noise: f64) -> f64 {
    power * gain.norm_sqr() / noise
}

pub fn rate(power: f64, gain: Complex64, noise: f64, allocated: bool, subbands: usize) -> Rate {
    let snr = snr(power, gain, noise);
    let rate = if allocated {
        (1.0 + snr).log2() / subbands as f64
    } else {
        0.0
    };
    Rate { rate, snr }
}

/// Weighted sum-rate of each direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalRates(pub [f64; 2]);

impl DirectionalRates {
    pub fn get(&self, dir: Direction) -> f64 {
        self.0[dir.index()]
    }

    pub fn min(&self) -> f64 {
        self.0[0].min(self.0[1])
    }
}

pub fn weighted_sumrates(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
) -> DirectionalRates {
    let mut sums = [0.0; 2];
    for (v, owner) in alloc.owners().iter().enumerate() {
        let k = owner.pair;
        let gain = effective_gain(ch.g(k, v, owner.dir), ch.h(k, v, owner.dir), psi);
        let r = rate(alloc.power(v), gain, cfg.noise[k][v], true, ch.subbands());
        sums[owner.dir.index()] += cfg.weights[k] * r.rate;
    }
    DirectionalRates(sums)
}

/// The max-min objective: the smaller of the two directional weighted sum-rates.
pub fn min_weighted_sumrate(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
) -> f64 {
    weighted_sumrates(cfg, ch, alloc, psi).min()
}

/// MSE of the estimate `u * y` in its expanded quadratic form in `psi`.
pub fn mse(
    power: f64,
    g: Complex64,
    h: &[Complex64],
    psi: &[Complex64],
    u: Complex64,
    noise: f64,
) -> f64 {
    let sp = power.sqrt();
    let u2 = u.norm_sqr();
    // h^H psi, shared by the linear term pi*psi and the quadratic term psi^H Pi psi
    let h_psi: Complex64 = h.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
    let pi_psi = (sp * g.conj() * u2 - u) * h_psi;
    let quad = u2 * h_psi.norm_sqr();
    1.0 + 2.0 * sp * (pi_psi - u * g).re + power * (quad + (u * g).norm_sqr()) + noise * u2
}

/// `|1 - sqrt(p) u hbar|^2 + sigma^2 |u|^2`.
#[inline]
pub fn mse_compact(power: f64, gain: Complex64, u: Complex64, noise: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - power.sqrt() * u * gain).norm_sqr() + noise * u.norm_sqr()
}

/// One surrogate term `(eta / V) (w eps - log2 w - 1)`.
#[inline]
pub fn surrogate_term(allocated: bool, subbands: usize, weight: f64, mse: f64) -> f64 {
    if !allocated {
        return 0.0;
    }
    (weight * mse - weight.log2() - 1.0) / subbands as f64
}

/// `[f_1, f_2]` for the filters and weights in `state`.
pub fn surrogate_objective(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
    state: &SurrogateState,
) -> [f64; 2] {
    let mut f = [0.0; 2];
    for (v, owner) in alloc.owners().iter().enumerate() {
        let k = owner.pair;
        let gain = effective_gain(ch.g(k, v, owner.dir), ch.h(k, v, owner.dir), psi);
        let eps = mse_compact(alloc.power(v), gain, state.filters[v], cfg.noise[k][v]);
        f[owner.dir.index()] +=
            cfg.weights[k] * surrogate_term(true, ch.subbands(), state.weights[v], eps);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn effective_gain_examples() {
        assert_eq!(
            effective_gain(c(1.0, 0.0), &[c(0.0, 0.0)], &[c(1.0, 0.0)]),
            c(1.0, 0.0)
        );
        let g = effective_gain(
            c(0.0, 0.0),
            &[c(1.0, 0.0), c(1.0, 0.0)],
            &[c(1.0, 0.0), c(1.0, 0.0)],
        );
        assert_eq!(g, c(2.0, 0.0));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate(0.0, c(1.0, 0.0), 1.0, true, 16).rate, 0.0);
        let r = rate(1.0, c(1.0, 0.0), 1.0, true, 16);
        assert!((r.rate - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(rate(1.0, c(1.0, 0.0), 1.0, false, 16).rate, 0.0);

        let p = crate::config::dbm_to_watts(25.0);
        let sigma2 = crate::config::dbm_to_watts(-110.0);
        let r = rate(p, c(1e-5, 0.0), sigma2, true, 16);
        let gamma = 0.316_227_766_016_837_94 * 1e-10 / 1e-14;
        assert!((r.snr - gamma).abs() < 1e-9 * gamma);
        assert!((r.snr - 3_162.277_660_168_379).abs() < 1e-6);
        assert!((r.rate - (1.0 + gamma).log2() / 16.0).abs() < 1e-14);
    }

    #[test]
    fn phase_vector_construction_is_exact() {
        let pv = PhaseVector::from_indices(vec![0, 1, 2, 3], 2);
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (a, b) in pv.as_slice().iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cb in [Codebook::Continuous, Codebook::Discrete { bits: 3 }] {
            let pv = PhaseVector::random(20, cb, &mut rng);
            assert!(pv.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        r: usize,
    ) -> (
        f64,
        Complex64,
        Vec<Complex64>,
        Vec<Complex64>,
        Complex64,
        f64,
    ) {
        let p = rng.random_range(0.01..2.0);
        let g = complex_normal(rng);
        let h: Vec<_> = (0..r).map(|_| complex_normal(rng)).collect();
        let psi: Vec<_> = (0..r)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..6.3)))
            .collect();
        let u = complex_normal(rng);
        let noise = rng.random_range(0.01..1.0);
        (p, g, h, psi, u, noise)
    }

    #[test]
    fn mse_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let (p, g, h, psi, u, noise) = random_instance(&mut rng, 6);
            let gain = effective_gain(g, &h, &psi);
            let a = mse(p, g, &h, &psi, u, noise);
            let b = mse_compact(p, gain, u, noise);
            assert!((a - b).abs() < 1e-12 * b.max(1.0), "{a} vs {b}");
        }
        assert_eq!(
            mse(
                1.0,
                c(1.0, 0.0),
                &[c(1.0, 0.0)],
                &[c(1.0, 0.0)],
                c(0.0, 0.0),
                1.0
            ),
            1.0
        );
    }

    #[test]
    fn mmse_filter_gives_inverse_snr_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let (p, g, h, psi, _, noise) = random_instance(&mut rng, 4);
            let gain = effective_gain(g, &h, &psi);
            let xi = gain.conj();
            let u = p.sqrt() * xi / (p * xi.norm_sqr() + noise);
            let eps = mse(p, g, &h, &psi, u, noise);
            let gamma = snr(p, gain, noise);
            assert!((eps - 1.0 / (1.0 + gamma)).abs() < 1e-12);
            assert!(eps > 0.0 && eps <= 1.0);
        }
    }

    #[test]
    fn surrogate_term_examples() {
        assert_eq!(surrogate_term(true, 16, 1.0, 1.0), 0.0);
        let eps = 0.2;
        let got = surrogate_term(true, 16, 1.0 / eps, eps);
        assert!((got - eps.log2() / 16.0).abs() < 1e-15);
        assert_eq!(surrogate_term(false, 16, 3.0, 0.5), 0.0);
    }

    fn symmetric_setup() -> (SystemConfig, ChannelRealization, Allocation) {
        let mut p = crate::config::ScenarioParams::reference();
        p.pairs = 1;
        p.subbands = 4;
        p.ris_elements = 1;
        p.taps_direct = 1;
        p.taps_to_ris = 1;
        p.taps_from_ris = 1;
        let cfg = p.build().unwrap();
        let direct = vec![c(1e-5, 2e-5); 8];
        let reflected = vec![c(3e-6, 0.0); 8];
        let ch = ChannelRealization::from_frequency_response(1, 4, 1, direct, reflected);
        let f = NodeLink::new(0, Direction::Forward);
        let r = NodeLink::new(0, Direction::Reverse);
        let alloc = Allocation::new(vec![f, r, f, r], vec![0.1; 4]);
        (cfg, ch, alloc)
    }

    #[test]
    fn symmetric_and_zero_power_objectives() {
        let (cfg, ch, mut alloc) = symmetric_setup();
        let psi = [c(1.0, 0.0)];
        let rates = weighted_sumrates(&cfg, &ch, &alloc, &psi);
        assert_eq!(rates.0[0], rates.0[1]);
        assert_eq!(rates.min(), rates.0[0]);
        alloc.set_powers(vec![0.0; 4]);
        assert_eq!(min_weighted_sumrate(&cfg, &ch, &alloc, &psi), 0.0);
    }

    #[test]
    fn objective_matches_hand_sum() {
        let mut p = crate::config::ScenarioParams::tiny();
        p.weights = Some(vec![1.7]);
        let cfg = p.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ch = crate::channel::build_realization(&cfg, &mut rng);
        let f = NodeLink::new(0, Direction::Forward);
        let r = NodeLink::new(0, Direction::Reverse);
        let alloc = Allocation::new(vec![r, f], vec![0.2, 0.3]);
        let psi = PhaseVector::from_indices(vec![1, 0], 1);
        // hand evaluation
        let s = psi.as_slice();
        let hb1 = ch.g(0, 1, Direction::Forward)
            + ch.h(0, 1, Direction::Forward)[0].conj() * s[0]
            + ch.h(0, 1, Direction::Forward)[1].conj() * s[1];
        let hb2 = ch.g(0, 0, Direction::Reverse)
            + ch.h(0, 0, Direction::Reverse)[0].conj() * s[0]
            + ch.h(0, 0, Direction::Reverse)[1].conj() * s[1];
        let d1 = 1.7 * (1.0 + 0.3 * hb1.norm_sqr() / cfg.noise[0][1]).log2() / 2.0;
        let d2 = 1.7 * (1.0 + 0.2 * hb2.norm_sqr() / cfg.noise[0][0]).log2() / 2.0;
        let rates = weighted_sumrates(&cfg, &ch, &alloc, s);
        assert!((rates.0[0] - d1).abs() < 1e-12);
        assert!((rates.0[1] - d2).abs() < 1e-12);
        assert!((min_weighted_sumrate(&cfg, &ch, &alloc, s) - d1.min(d2)).abs() < 1e-12);
    }

    #[test]
    fn constraint_checks() {
        let (cfg, _, alloc) = symmetric_setup();
        alloc.check_constraints(&cfg).unwrap();
        let f = NodeLink::new(0, Direction::Forward);
        let lopsided = Allocation::new(vec![f; 4], vec![0.0; 4]);
        assert!(lopsided.check_constraints(&cfg).is_err());
        let r = NodeLink::new(0, Direction::Reverse);
        let over = Allocation::new(vec![f, r, f, r], vec![0.3, 0.0, 0.3, 0.0]);
        assert!(over.check_constraints(&cfg).is_err());
        assert!(alloc.eta(0, 0, Direction::Forward));
        assert!(!alloc.eta(0, 0, Direction::Reverse));
        assert_eq!(alloc.p(0, 0, Direction::Reverse), 0.0);
        assert_eq!(alloc.bands_of(r).collect::<Vec<_>>(), vec![1, 3]);
    }

    proptest! {
        #[test]
        fn rate_is_monotone_in_power_and_gain(
            p in 0.0f64..10.0, dp in 0.0f64..10.0,
            g in 0.0f64..10.0, dg in 0.0f64..10.0,
            noise in 1e-3f64..10.0,
        ) {
            let base = rate(p, c(g, 0.0), noise, true, 8);
            let more_p = rate(p + dp, c(g, 0.0), noise, true, 8);
            let more_g = rate(p, c(g + dg, 0.0), noise, true, 8);
            prop_assert!(base.snr >= 0.0);
            prop_assert!(more_p.rate >= base.rate);
            prop_assert!(more_g.rate >= base.rate);
        }
    }
}
