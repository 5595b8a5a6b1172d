//! Scenario constants, built-in profiles and key-value overrides.
//!
//! Powers and noise are entered in dBm and reference path loss in dB; they are
//! converted to linear units once, when a [`ScenarioParams`] is turned into a
//! [`SystemConfig`]. Everything downstream works in watts and linear gains.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Set of admissible reflection coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codebook {
    /// Any unit-modulus value (infinite resolution).
    Continuous,
    /// `2^bits` uniformly spaced phases starting at angle zero.
    Discrete { bits: u32 },
}

impl Codebook {
    /// Number of codebook points, `None` when continuous.
    pub fn levels(&self) -> Option<u64> {
        match *self {
            Codebook::Continuous => None,
            Codebook::Discrete { bits } => Some(1u64 << bits),
        }
    }
}

impl fmt::Display for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codebook::Continuous => f.write_str("inf"),
            Codebook::Discrete { bits } => write!(f, "{bits}"),
        }
    }
}

impl FromStr for Codebook {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "continuous" | "∞" => Ok(Codebook::Continuous),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::config(format!("bad codebook resolution '{s}'")))?;
                if bits == 0 || bits > 30 {
                    return Err(Error::config(format!(
                        "codebook bits must lie in 1..=30, got {bits}"
                    )));
                }
                Ok(Codebook::Discrete { bits })
            }
        }
    }
}

/// One value per link class: direct node-node, node-to-RIS and RIS-to-node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams<T> {
    pub direct: T,
    pub to_ris: T,
    pub from_ris: T,
}

/// All constants of one scenario, in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of node pairs `K`.
    pub pairs: usize,
    /// Number of OFDM sub-bands `V`.
    pub subbands: usize,
    /// Number of RIS elements `R`.
    pub ris_elements: usize,
    pub codebook: Codebook,
    /// Maximum transmit power in watts, indexed `[pair][direction]`.
    pub max_power: Vec<[f64; 2]>,
    /// Noise power in watts, indexed `[pair][subband]`.
    pub noise: Vec<Vec<f64>>,
    /// Sum-rate weight of each pair.
    pub weights: Vec<f64>,
    /// Path loss at the reference distance (linear).
    pub ref_path_loss: f64,
    /// Reference distance in metres.
    pub ref_distance: f64,
    pub path_loss_exponents: LinkParams<f64>,
    pub tap_counts: LinkParams<usize>,
    /// Exponential power-delay-profile decay, strictly inside (0, 1).
    pub pdp_decay: f64,
    pub ris_position: [f64; 3],
    /// Sphere centres for the first and second node of every pair.
    pub cluster_centers: [[f64; 3]; 2],
    pub cluster_radius: f64,
    /// Blend coefficient used for the subgradient when both directions tie.
    pub tau: f64,
    /// Inner projected-subgradient iterations.
    pub psg_iterations: usize,
    /// Relative objective change that stops the outer alternating loop.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Resolution of the multiplier line search used by the initialiser.
    pub lambda_grid_points: usize,
    pub seed: u64,
}

impl SystemConfig {
    /// Check every structural and physical invariant.
    pub fn validate(&self) -> Result<()> {
        let k = self.pairs;
        let v = self.subbands;
        if k == 0 {
            return Err(Error::config("at least one node pair is required"));
        }
        if v < 2 * k {
            return Err(Error::config(format!(
                "{v} sub-bands cannot give each of the {} node-directions one band",
                2 * k
            )));
        }
        if let Codebook::Discrete { bits } = self.codebook {
            if bits == 0 {
                return Err(Error::config("discrete codebook needs at least one bit"));
            }
        }
        if !(self.pdp_decay > 0.0 && self.pdp_decay < 1.0) {
            return Err(Error::config(format!(
                "power-delay decay must lie in (0, 1), got {}",
                self.pdp_decay
            )));
        }
        if self.max_power.len() != k || self.noise.len() != k || self.weights.len() != k {
            return Err(Error::config(
                "power, noise and weight tables must have one entry per pair",
            ));
        }
        for (pair, powers) in self.max_power.iter().enumerate() {
            if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::config(format!(
                    "pair {pair}: powers must be positive"
                )));
            }
        }
        for (pair, row) in self.noise.iter().enumerate() {
            if row.len() != v {
                return Err(Error::config(format!(
                    "pair {pair}: expected {v} noise entries, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::config(format!(
                    "pair {pair}: noise must be positive"
                )));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("sum-rate weights must be positive"));
        }
        if !(self.ref_path_loss > 0.0 && self.ref_distance > 0.0) {
            return Err(Error::config(
                "reference path loss and distance must be positive",
            ));
        }
        let taps = self.tap_counts;
        if taps.direct == 0 || taps.to_ris == 0 || taps.from_ris == 0 {
            return Err(Error::config("every link needs at least one delay tap"));
        }
        if taps.direct > v {
            return Err(Error::config(format!(
                "direct channel has {} taps but only {v} sub-bands",
                taps.direct
            )));
        }
        if taps.to_ris + taps.from_ris - 1 > v {
            return Err(Error::config(format!(
                "cascaded channel length {} exceeds {v} sub-bands",
                taps.to_ris + taps.from_ris - 1
            )));
        }
        if self.cluster_radius < 0.0 {
            return Err(Error::config("cluster radius must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!(
                "tau must lie in [0, 1], got {}",
                self.tau
            )));
        }
        if self.lambda_grid_points < 2 {
            return Err(Error::config(
                "the multiplier grid needs at least two points",
            ));
        }
        if self.outer_max_iters == 0 {
            return Err(Error::config("at least one outer iteration is required"));
        }
        if self.outer_tol.is_nan() || self.outer_tol < 0.0 {
            return Err(Error::config("outer tolerance must be non-negative"));
        }
        Ok(())
    }

    /// Copy with a different RIS size and codebook.
    pub fn with_ris(&self, ris_elements: usize, codebook: Codebook) -> Self {
        SystemConfig {
            ris_elements,
            codebook,
            ..self.clone()
        }
    }
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Codebook as it appears in a config file: an integer bit count or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodebookParam {
    Bits(u32),
    Label(String),
}

impl CodebookParam {
    fn resolve(&self) -> Result<Codebook> {
        match self {
            CodebookParam::Bits(b) => b.to_string().parse(),
            CodebookParam::Label(s) => s.parse(),
        }
    }
}

impl From<Codebook> for CodebookParam {
    fn from(c: Codebook) -> Self {
        match c {
            Codebook::Continuous => CodebookParam::Label("inf".into()),
            Codebook::Discrete { bits } => CodebookParam::Bits(bits),
        }
    }
}

/// Human-facing scenario description (dBm, dB). Every field can be
/// overridden from a TOML file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub pairs: usize,
    pub subbands: usize,
    pub ris_elements: usize,
    pub codebook: CodebookParam,
    pub max_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power_dbm_per_node: Option<Vec<[f64; 2]>>,
    pub noise_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dbm_per_subband: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub ref_path_loss_db: f64,
    pub ref_distance_m: f64,
    pub exponent_direct: f64,
    pub exponent_to_ris: f64,
    pub exponent_from_ris: f64,
    pub taps_direct: usize,
    pub taps_to_ris: usize,
    pub taps_from_ris: usize,
    pub pdp_decay: f64,
    pub ris_position: [f64; 3],
    pub cluster_center_1: [f64; 3],
    pub cluster_center_2: [f64; 3],
    pub cluster_radius: f64,
    pub tau: f64,
    pub psg_iterations: usize,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub lambda_grid_points: usize,
    pub seed: u64,
}

impl ScenarioParams {
    /// Simulation parameters of the reference scenario: K = 3, V = 16,
    /// 25 dBm per node, -110 dBm noise, RIS at (0, 0, 10) m, clusters of
    /// radius 5 m around (+-35, 0, 5) m.
    pub fn reference() -> Self {
        ScenarioParams {
            pairs: 3,
            subbands: 16,
            ris_elements: 45,
            codebook: CodebookParam::Label("inf".into()),
            max_power_dbm: 25.0,
            max_power_dbm_per_node: None,
            noise_dbm: -110.0,
            noise_dbm_per_subband: None,
            weights: None,
            ref_path_loss_db: -30.0,
            ref_distance_m: 1.0,
            exponent_direct: 3.5,
            exponent_to_ris: 2.2,
            exponent_from_ris: 2.2,
            taps_direct: 8,
            taps_to_ris: 4,
            taps_from_ris: 4,
            pdp_decay: 0.5,
            ris_position: [0.0, 0.0, 10.0],
            cluster_center_1: [-35.0, 0.0, 5.0],
            cluster_center_2: [35.0, 0.0, 5.0],
            cluster_radius: 5.0,
            tau: 0.5,
            psg_iterations: 100,
            outer_tol: 1e-4,
            outer_max_iters: 20,
            lambda_grid_points: 101,
            seed: 42,
        }
    }

    /// Single pair, two sub-bands, two one-bit elements: small enough for
    /// exhaustive phase enumeration. Tap counts shrink so that every
    /// cascade still fits inside two sub-bands.
    pub fn tiny() -> Self {
        ScenarioParams {
            pairs: 1,
            subbands: 2,
            ris_elements: 2,
            codebook: CodebookParam::Bits(1),
            taps_direct: 2,
            taps_to_ris: 1,
            taps_from_ris: 2,
            ..Self::reference()
        }
    }

    /// Apply a TOML document on top of these parameters.
    pub fn apply_overrides(&self, toml_text: &str) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(toml_text)
            .map_err(|e| Error::config(format!("cannot parse config file: {e}")))?;
        let mut base = toml::Table::try_from(self)
            .map_err(|e| Error::config(format!("cannot serialise profile: {e}")))?;
        for (key, value) in overrides {
            base.insert(key, value);
        }
        toml::Value::Table(base)
            .try_into()
            .map_err(|e| Error::config(format!("bad config field: {e}")))
    }

    pub fn codebook(&self) -> Result<Codebook> {
        self.codebook.resolve()
    }

    /// Convert to linear units and validate.
    pub fn build(&self) -> Result<SystemConfig> {
        let k = self.pairs;
        let v = self.subbands;
        let max_power = match &self.max_power_dbm_per_node {
            Some(rows) => rows
                .iter()
                .map(|r| [dbm_to_watts(r[0]), dbm_to_watts(r[1])])
                .collect(),
            None => vec![[dbm_to_watts(self.max_power_dbm); 2]; k],
        };
        let noise = match &self.noise_dbm_per_subband {
            Some(rows) => rows
                .iter()
                .map(|r| r.iter().copied().map(dbm_to_watts).collect())
                .collect(),
            None => vec![vec![dbm_to_watts(self.noise_dbm); v]; k],
        };
        let cfg = SystemConfig {
            pairs: k,
            subbands: v,
            ris_elements: self.ris_elements,
            codebook: self.codebook()?,
            max_power,
            noise,
            weights: self.weights.clone().unwrap_or_else(|| vec![1.0; k]),
            ref_path_loss: db_to_linear(self.ref_path_loss_db),
            ref_distance: self.ref_distance_m,
            path_loss_exponents: LinkParams {
                direct: self.exponent_direct,
                to_ris: self.exponent_to_ris,
                from_ris: self.exponent_from_ris,
            },
            tap_counts: LinkParams {
                direct: self.taps_direct,
                to_ris: self.taps_to_ris,
                from_ris: self.taps_from_ris,
            },
            pdp_decay: self.pdp_decay,
            ris_position: self.ris_position,
            cluster_centers: [self.cluster_center_1, self.cluster_center_2],
            cluster_radius: self.cluster_radius,
            tau: self.tau,
            psg_iterations: self.psg_iterations,
            outer_tol: self.outer_tol,
            outer_max_iters: self.outer_max_iters,
            lambda_grid_points: self.lambda_grid_points,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A named scenario plus its default sweep.
#[derive(Debug, Clone)]
pub struct Profile {
    pub name: &'static str,
    pub params: ScenarioParams,
    pub ris_sizes: Vec<usize>,
    pub codebooks: Vec<Codebook>,
}

impl Profile {
    pub const NAMES: [&'static str; 3] = ["paper-fig2a", "paper-fig2b", "tiny"];

    pub fn by_name(name: &str) -> Result<Self> {
        let reference = ScenarioParams::reference();
        match name {
            "paper-fig2a" => Ok(Profile {
                name: "paper-fig2a",
                params: reference,
                ris_sizes: vec![5, 15, 25, 35, 45],
                codebooks: vec![Codebook::Continuous],
            }),
            "paper-fig2b" => Ok(Profile {
                name: "paper-fig2b",
                params: reference,
                ris_sizes: vec![45],
                codebooks: (1..=5)
                    .map(|bits| Codebook::Discrete { bits })
                    .chain(std::iter::once(Codebook::Continuous))
                    .collect(),
            }),
            "tiny" => Ok(Profile {
                name: "tiny",
                params: ScenarioParams::tiny(),
                ris_sizes: vec![2],
                codebooks: vec![Codebook::Discrete { bits: 1 }],
            }),
            other => Err(Error::config(format!(
                "unknown profile '{other}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_profile_is_valid() {
        let cfg = ScenarioParams::reference().build().unwrap();
        assert_eq!(cfg.pairs, 3);
        assert_eq!(cfg.subbands, 16);
        assert!((cfg.max_power[0][0] - 0.316_227_766_016_837_94).abs() < 1e-15);
        assert!((cfg.noise[2][15] - 1e-14).abs() < 1e-28);
        assert!((cfg.ref_path_loss - 1e-3).abs() < 1e-18);
        ScenarioParams::tiny().build().unwrap();
    }

    #[test]
    fn codebook_parsing() {
        assert_eq!("inf".parse::<Codebook>().unwrap(), Codebook::Continuous);
        assert_eq!(
            "3".parse::<Codebook>().unwrap(),
            Codebook::Discrete { bits: 3 }
        );
        assert!("0".parse::<Codebook>().is_err());
        assert!("x".parse::<Codebook>().is_err());
        assert_eq!(Codebook::Discrete { bits: 2 }.levels(), Some(4));
    }

    #[test]
    fn overrides_replace_fields_and_reject_unknown_keys() {
        let base = ScenarioParams::reference();
        let p = base
            .apply_overrides("pairs = 2\nmax_power_dbm = 20.0\ncodebook = 3\nweights = [1.0, 2.0]")
            .unwrap();
        assert_eq!(p.pairs, 2);
        assert_eq!(p.codebook().unwrap(), Codebook::Discrete { bits: 3 });
        let cfg = p.build().unwrap();
        assert_eq!(cfg.weights, vec![1.0, 2.0]);
        assert!((cfg.max_power[1][1] - 0.1).abs() < 1e-15);

        assert!(base.apply_overrides("bogus = 1").is_err());
        assert!(base.apply_overrides("pairs = \"three\"").is_err());
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut p = ScenarioParams::reference();
        p.subbands = 5;
        assert!(p.build().is_err());

        let mut p = ScenarioParams::reference();
        p.pdp_decay = 1.0;
        assert!(p.build().is_err());

        let mut p = ScenarioParams::reference();
        p.taps_to_ris = 10;
        p.taps_from_ris = 8;
        assert!(p.build().is_err());

        let mut p = ScenarioParams::reference();
        p.weights = Some(vec![1.0, 0.0, 1.0]);
        assert!(p.build().is_err());
    }

    #[test]
    fn profiles_resolve() {
        for name in Profile::NAMES {
            let profile = Profile::by_name(name).unwrap();
            profile.params.build().unwrap();
        }
        assert!(Profile::by_name("nope").is_err());
    }
}
