//! Projected subgradient refinement of the reflection coefficients on the
//! weighted-MMSE surrogate.
//!
//! Each iteration refreshes the MMSE receive filters and weights at the
//! current coefficients, forms a subgradient of `f = max(f_1, f_2)`, takes a
//! normalised step of length `1 / t` and projects back onto the codebook.
//! Gradients are Wirtinger derivatives with respect to `conj(psi)`.

use num_complex::Complex64;

use super::project;
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::rate_model::{
    effective_gain, mse_compact, surrogate_objective, Allocation, Direction, PhaseVector,
    SurrogateState,
};

/// Gap below which the two directional surrogates count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Subgradient norm below which the iterate is treated as stationary.
pub const STATIONARY_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsgSettings {
    pub iterations: usize,
    pub tau: f64,
}

impl PsgSettings {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        PsgSettings {
            iterations: cfg.psg_iterations,
            tau: cfg.tau,
        }
    }
}

/// MMSE receive filter `sqrt(p) xi / (p |xi|^2 + sigma^2)` for `xi = conj(hbar)`.
#[inline]
pub fn receive_filter(power: f64, xi: Complex64, noise: f64) -> Complex64 {
    power.sqrt() * xi / (power * xi.norm_sqr() + noise)
}

fn band_gains(ch: &ChannelRealization, alloc: &Allocation, psi: &[Complex64]) -> Vec<Complex64> {
    alloc
        .owners()
        .iter()
        .enumerate()
        .map(|(v, o)| effective_gain(ch.g(o.pair, v, o.dir), ch.h(o.pair, v, o.dir), psi))
        .collect()
}

/// One MMSE filter per sub-band, for the receiver of the band's owner.
pub fn update_receive_filters(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
) -> Vec<Complex64> {
    band_gains(ch, alloc, psi)
        .into_iter()
        .enumerate()
        .map(|(v, gain)| {
            let k = alloc.owner(v).pair;
            receive_filter(alloc.power(v), gain.conj(), cfg.noise[k][v])
        })
        .collect()
}

/// `w = 1 / eps`.
pub fn update_weights(mses: &[f64]) -> Vec<f64> {
    mses.iter()
        .map(|&e| {
            assert!(e > 0.0, "MSE must be positive, got {e}");
            1.0 / e
        })
        .collect()
}

/// Filters and weights refreshed at `psi`, with the surrogate values they give.
pub fn refresh_state(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
) -> SurrogateState {
    let filters = update_receive_filters(cfg, ch, alloc, psi);
    let gains = band_gains(ch, alloc, psi);
    let mses: Vec<f64> = gains
        .iter()
        .zip(&filters)
        .enumerate()
        .map(|(v, (&gain, &u))| {
            mse_compact(alloc.power(v), gain, u, cfg.noise[alloc.owner(v).pair][v])
        })
        .collect();
    let mut state = SurrogateState {
        filters,
        weights: update_weights(&mses),
        objectives: [0.0; 2],
    };
    state.objectives = surrogate_objective(cfg, ch, alloc, psi, &state);
    state
}

/// Gradient of `f_i` with respect to `conj(psi)` at fixed filters and weights:
/// `sum (kappa_k / V) w h (p |u|^2 hbar - sqrt(p) conj(u))` over the bands of `dir`.
pub fn direction_gradient(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
    state: &SurrogateState,
    dir: Direction,
) -> Vec<Complex64> {
    let mut grad = vec![Complex64::new(0.0, 0.0); ch.elements()];
    let v_count = ch.subbands() as f64;
    for (v, owner) in alloc.owners().iter().enumerate() {
        if owner.dir != dir {
            continue;
        }
        let k = owner.pair;
        let h = ch.h(k, v, dir);
        let gain = effective_gain(ch.g(k, v, dir), h, psi);
        let p = alloc.power(v);
        let u = state.filters[v];
        let coef = (cfg.weights[k] / v_count)
            * state.weights[v]
            * (p * u.norm_sqr() * gain - p.sqrt() * u.conj());
        for (gr, hr) in grad.iter_mut().zip(h) {
            *gr += hr * coef;
        }
    }
    grad
}

/// Subgradient of `max(f_1, f_2)`: the larger direction's gradient, or the
/// `tau`-blend when the two tie.
pub fn subgradient(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
    state: &SurrogateState,
    tau: f64,
) -> Vec<Complex64> {
    let [f1, f2] = state.objectives;
    if (f1 - f2).abs() <= TIE_TOLERANCE {
        let g1 = direction_gradient(cfg, ch, alloc, psi, state, Direction::Forward);
        let g2 = direction_gradient(cfg, ch, alloc, psi, state, Direction::Reverse);
        g1.iter()
            .zip(&g2)
            .map(|(a, b)| a * tau + b * (1.0 - tau))
            .collect()
    } else {
        let dir = if f1 > f2 {
            Direction::Forward
        } else {
            Direction::Reverse
        };
        direction_gradient(cfg, ch, alloc, psi, state, dir)
    }
}

/// Diminishing step `1 / t` for `t >= 1`.
pub fn step_size(t: usize) -> f64 {
    assert!(t >= 1);
    1.0 / t as f64
}

#[derive(Debug, Clone)]
pub struct PsgOutcome {
    pub best: PhaseVector,
    /// Surrogate `f` of `best`, equal to minus its min weighted sum-rate.
    pub best_objective: f64,
    /// Best `f` seen after each iteration, starting with the warm start.
    pub trace: Vec<f64>,
}

/// Run the projected subgradient method for `settings.iterations` steps from
/// `start`, returning the best iterate. The warm start is iterate zero, so
/// the result is never worse than the input.
pub fn psg_optimize(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    start: &PhaseVector,
    settings: PsgSettings,
) -> PsgOutcome {
    assert_eq!(
        start.len(),
        ch.elements(),
        "phase vector length must match the surface"
    );
    let codebook = start.codebook();
    let mut psi = start.clone();
    let mut state = refresh_state(cfg, ch, alloc, psi.as_slice());
    let mut best = psi.clone();
    let mut best_objective = state.objective();
    let mut trace = Vec::with_capacity(settings.iterations + 1);
    trace.push(best_objective);
    if psi.is_empty() {
        return PsgOutcome {
            best,
            best_objective,
            trace,
        };
    }

    for t in 1..=settings.iterations {
        let delta = subgradient(cfg, ch, alloc, psi.as_slice(), &state, settings.tau);
        let norm = delta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm >= STATIONARY_NORM {
            let step = step_size(t) / norm;
            let moved: Vec<Complex64> = psi
                .as_slice()
                .iter()
                .zip(&delta)
                .map(|(p, d)| p - d * step)
                .collect();
            psi = project(&moved, codebook);
            state = refresh_state(cfg, ch, alloc, psi.as_slice());
            if state.objective() < best_objective {
                best_objective = state.objective();
                best = psi.clone();
            }
        }
        trace.push(best_objective);
    }
    PsgOutcome {
        best,
        best_objective,
        trace,
    }
}
