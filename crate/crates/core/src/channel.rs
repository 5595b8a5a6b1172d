//! Geometry, multipath taps, RIS cascades and per-sub-band frequency responses.
//!
//! DFT convention: `F[v][n] = exp(-j 2 pi v n / V)`. The direct response on
//! sub-band `v` is `g = sum_n F[v][n] g_time[n]`. The reflected vector `h`
//! stores the *conjugate* of each cascaded column's DFT sample, so that
//! `g + h^H psi` is exactly the DFT of the composite time-domain channel
//! `g_time + H_time psi`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::config::SystemConfig;
use crate::rate_model::Direction;

pub type Point = [f64; 3];

/// Node positions, one `[first, second]` entry per pair, plus the RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub nodes: Vec<[Point; 2]>,
    pub ris: Point,
}

pub fn distance(a: Point, b: Point) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Geometry {
    pub fn direct_distance(&self, pair: usize) -> f64 {
        let [a, b] = self.nodes[pair];
        distance(a, b)
    }

    /// Transmitter of `dir` to the RIS.
    pub fn to_ris_distance(&self, pair: usize, dir: Direction) -> f64 {
        distance(self.nodes[pair][dir.index()], self.ris)
    }

    /// RIS to the receiver of `dir`.
    pub fn from_ris_distance(&self, pair: usize, dir: Direction) -> f64 {
        distance(self.ris, self.nodes[pair][dir.other().index()])
    }
}

fn sample_in_sphere<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    if radius == 0.0 {
        return center;
    }
    loop {
        let offset: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        if offset.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return std::array::from_fn(|d| center[d] + radius * offset[d]);
        }
    }
}

/// Place every pair's first node in cluster 1 and second node in cluster 2,
/// uniformly inside each sphere (rejection sampling in the bounding cube).
pub fn sample_geometry<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Geometry {
    let nodes = (0..cfg.pairs)
        .map(|_| {
            let first = sample_in_sphere(cfg.cluster_centers[0], cfg.cluster_radius, rng);
            let second = sample_in_sphere(cfg.cluster_centers[1], cfg.cluster_radius, rng);
            [first, second]
        })
        .collect();
    Geometry {
        nodes,
        ris: cfg.ris_position,
    }
}

/// Linear path gain `ref_loss * (d / ref_distance)^-exponent`.
pub fn path_loss(distance: f64, exponent: f64, ref_loss: f64, ref_distance: f64) -> f64 {
    assert!(
        distance > 0.0,
        "link distance must be positive, got {distance}"
    );
    ref_loss * (distance / ref_distance).powf(-exponent)
}

/// Normalised exponential power-delay profile; sums to one.
pub fn pdp_profile(len: usize, decay: f64) -> Vec<f64> {
    let scale = (1.0 - decay) / (1.0 - decay.powi(len as i32));
    (0..len).map(|l| scale * decay.powi(l as i32)).collect()
}

/// Circularly-symmetric `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Direct,
    ToRis,
    FromRis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapVector {
    pub taps: Vec<Complex64>,
    pub kind: LinkKind,
}

/// Draw `len` independent taps with variance `gain * pdp_profile(len, decay)[l]`.
pub fn sample_taps<R: Rng + ?Sized>(
    len: usize,
    decay: f64,
    gain: f64,
    kind: LinkKind,
    rng: &mut R,
) -> TapVector {
    let taps = pdp_profile(len, decay)
        .into_iter()
        .map(|w| (gain * w).sqrt() * complex_normal(rng))
        .collect();
    TapVector { taps, kind }
}

/// Linear convolution of the node-to-RIS and RIS-to-node taps, zero-padded to `len`.
pub fn cascade_reflected(
    to_ris: &[Complex64],
    from_ris: &[Complex64],
    len: usize,
) -> Vec<Complex64> {
    let conv_len = to_ris.len() + from_ris.len() - 1;
    assert!(
        conv_len <= len,
        "cascaded channel of length {conv_len} does not fit into {len} sub-bands"
    );
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (a, &x) in to_ris.iter().enumerate() {
        for (b, &y) in from_ris.iter().enumerate() {
            out[a + b] += x * y;
        }
    }
    out
}

/// Zero-pad `taps` to `len`.
pub fn zero_pad(taps: &[Complex64], len: usize) -> Vec<Complex64> {
    assert!(
        taps.len() <= len,
        "{} taps do not fit into {len} sub-bands",
        taps.len()
    );
    let mut out = taps.to_vec();
    out.resize(len, Complex64::new(0.0, 0.0));
    out
}

/// V-point DFT of a length-V tap sequence (see the module docs for the sign).
pub fn freq_response(padded: &[Complex64]) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_forward(padded.len());
    let mut buf = padded.to_vec();
    fft.process(&mut buf);
    buf
}

/// Time-domain taps kept with a realization so frequency responses can be re-derived.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTaps {
    /// Indexed `pair * 2 + direction`.
    pub direct: Vec<TapVector>,
    /// Indexed `(pair * 2 + direction) * R + element`.
    pub to_ris: Vec<TapVector>,
    /// Same indexing as `to_ris`.
    pub from_ris: Vec<TapVector>,
}

/// Frequency-domain channels for every (pair, sub-band, direction).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pairs: usize,
    subbands: usize,
    elements: usize,
    /// `g`, indexed by [`Self::link_index`].
    direct: Vec<Complex64>,
    /// `h`, `elements` consecutive entries per link index.
    reflected: Vec<Complex64>,
    pub geometry: Option<Geometry>,
    pub taps: Option<RawTaps>,
}

impl ChannelRealization {
    /// Assemble from frequency-domain values. `direct` holds one entry per
    /// (pair, sub-band, direction) and `reflected` `elements` entries for each.
    pub fn from_frequency_response(
        pairs: usize,
        subbands: usize,
        elements: usize,
        direct: Vec<Complex64>,
        reflected: Vec<Complex64>,
    ) -> Self {
        assert_eq!(
            direct.len(),
            pairs * subbands * 2,
            "direct gain count mismatch"
        );
        assert_eq!(
            reflected.len(),
            direct.len() * elements,
            "reflected gain count mismatch"
        );
        ChannelRealization {
            pairs,
            subbands,
            elements,
            direct,
            reflected,
            geometry: None,
            taps: None,
        }
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    #[inline]
    pub fn link_index(&self, pair: usize, subband: usize, dir: Direction) -> usize {
        (pair * self.subbands + subband) * 2 + dir.index()
    }

    #[inline]
    pub fn g(&self, pair: usize, subband: usize, dir: Direction) -> Complex64 {
        self.direct[self.link_index(pair, subband, dir)]
    }

    #[inline]
    pub fn h(&self, pair: usize, subband: usize, dir: Direction) -> &[Complex64] {
        let start = self.link_index(pair, subband, dir) * self.elements;
        &self.reflected[start..start + self.elements]
    }

    /// The same direct channels with the RIS removed (zero elements).
    pub fn without_ris(&self) -> Self {
        ChannelRealization {
            elements: 0,
            reflected: Vec::new(),
            taps: self.taps.as_ref().map(|t| RawTaps {
                direct: t.direct.clone(),
                to_ris: Vec::new(),
                from_ris: Vec::new(),
            }),
            ..self.clone()
        }
    }

    /// Composite time-domain impulse response `g_time + H_time psi` (length V),
    /// rebuilt from the retained taps.
    pub fn composite_impulse_response(
        &self,
        pair: usize,
        dir: Direction,
        psi: &[Complex64],
    ) -> Option<Vec<Complex64>> {
        let taps = self.taps.as_ref()?;
        assert_eq!(psi.len(), self.elements);
        let link = pair * 2 + dir.index();
        let mut out = zero_pad(&taps.direct[link].taps, self.subbands);
        for (r, &coef) in psi.iter().enumerate() {
            let idx = link * self.elements + r;
            let cascade = cascade_reflected(
                &taps.to_ris[idx].taps,
                &taps.from_ris[idx].taps,
                self.subbands,
            );
            for (o, c) in out.iter_mut().zip(cascade) {
                *o += coef * c;
            }
        }
        Some(out)
    }
}

/// Draw one full channel realization.
///
/// Random draws happen in a fixed order: geometry, then every direct channel,
/// then the reflected channels element by element. Realizations that share a
/// seed therefore share geometry and direct links regardless of `R`, and the
/// first `R` elements of a larger surface coincide with a smaller one.
pub fn build_realization<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let k_count = cfg.pairs;
    let v_count = cfg.subbands;
    let r_count = cfg.ris_elements;
    let geometry = sample_geometry(cfg, rng);
    let exps = cfg.path_loss_exponents;
    let taps = cfg.tap_counts;
    let pl = |d: f64, beta: f64| path_loss(d, beta, cfg.ref_path_loss, cfg.ref_distance);

    let mut direct_taps = Vec::with_capacity(k_count * 2);
    for k in 0..k_count {
        let gain = pl(geometry.direct_distance(k), exps.direct);
        for _dir in Direction::ALL {
            direct_taps.push(sample_taps(
                taps.direct,
                cfg.pdp_decay,
                gain,
                LinkKind::Direct,
                rng,
            ));
        }
    }

    let empty = TapVector {
        taps: Vec::new(),
        kind: LinkKind::ToRis,
    };
    let mut to_ris = vec![empty.clone(); k_count * 2 * r_count];
    let mut from_ris = vec![empty; k_count * 2 * r_count];
    for r in 0..r_count {
        for k in 0..k_count {
            for dir in Direction::ALL {
                let idx = (k * 2 + dir.index()) * r_count + r;
                let g_in = pl(geometry.to_ris_distance(k, dir), exps.to_ris);
                let g_out = pl(geometry.from_ris_distance(k, dir), exps.from_ris);
                to_ris[idx] = sample_taps(taps.to_ris, cfg.pdp_decay, g_in, LinkKind::ToRis, rng);
                from_ris[idx] =
                    sample_taps(taps.from_ris, cfg.pdp_decay, g_out, LinkKind::FromRis, rng);
            }
        }
    }

    let raw = RawTaps {
        direct: direct_taps,
        to_ris,
        from_ris,
    };
    let mut realization = realization_from_taps(k_count, v_count, r_count, &raw);
    realization.geometry = Some(geometry);
    realization.taps = Some(raw);
    realization
}

/// Compute the frequency-domain channels for a set of time-domain taps.
pub fn realization_from_taps(
    pairs: usize,
    subbands: usize,
    elements: usize,
    raw: &RawTaps,
) -> ChannelRealization {
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(subbands);
    let transform = |taps: Vec<Complex64>| {
        let mut buf = taps;
        fft.process(&mut buf);
        buf
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut direct = vec![zero; pairs * subbands * 2];
    let mut reflected = vec![zero; pairs * subbands * 2 * elements];
    for k in 0..pairs {
        for dir in Direction::ALL {
            let link = k * 2 + dir.index();
            let spectrum = transform(zero_pad(&raw.direct[link].taps, subbands));
            for (v, s) in spectrum.into_iter().enumerate() {
                direct[(k * subbands + v) * 2 + dir.index()] = s;
            }
            for r in 0..elements {
                let idx = link * elements + r;
                let cascade =
                    cascade_reflected(&raw.to_ris[idx].taps, &raw.from_ris[idx].taps, subbands);
                for (v, s) in transform(cascade).into_iter().enumerate() {
                    let base = ((k * subbands + v) * 2 + dir.index()) * elements;
                    reflected[base + r] = s.conj();
                }
            }
        }
    }
    ChannelRealization::from_frequency_response(pairs, subbands, elements, direct, reflected)
}
