//! Eigen-based initialisation of the reflection coefficients.
//!
//! The relaxed problem maximises `min_i psit^H Ht_i psit` over the augmented
//! vector `psit = [psi; 1]` with `||psit||^2 <= R + 1`, where
//!
//! ```text
//! Ht_i = [ H_i^H H_i    H_i^H g_i ]
//!        [ g_i^H H_i    0         ]
//! ```
//!
//! and `g_i`, `H_i` stack the direct gains and the rows `h^H` of every
//! (pair, sub-band) in direction `i`. For a multiplier `lambda` the
//! stationary points are eigenvectors of `Ht(lambda) = Ht_2 + lambda (Ht_1 - Ht_2)`;
//! the dominant one is scored for each `lambda` on a uniform grid over
//! `[0, 1]` and the best is scaled by its last entry and projected.

use num_complex::Complex64;

use super::project;
use crate::channel::ChannelRealization;
use crate::config::Codebook;
use crate::rate_model::{effective_gain, Direction, PhaseVector};
use crate::{Error, Result};

/// Dense Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.dim + j] += value;
    }

    /// `a + t (b - a)`.
    pub fn interpolate(a: &Self, b: &Self, t: f64) -> Self {
        assert_eq!(a.dim, b.dim);
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| x + (y - x) * t)
            .collect();
        HermitianMatrix { dim: a.dim, data }
    }

    pub fn matvec(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (row, o) in self.data.chunks_exact(self.dim).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `x^H M x` (real for Hermitian `M`).
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec(x, &mut y);
        x.iter()
            .zip(&y)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Augmented gain matrix `Ht_i` for one direction.
pub fn gain_matrix(ch: &ChannelRealization, dir: Direction) -> HermitianMatrix {
    let r_count = ch.elements();
    let mut m = HermitianMatrix::zeros(r_count + 1);
    for k in 0..ch.pairs() {
        for v in 0..ch.subbands() {
            let h = ch.h(k, v, dir);
            let g = ch.g(k, v, dir);
            for a in 0..r_count {
                for b in 0..r_count {
                    m.add(a, b, h[a] * h[b].conj());
                }
                let cross = h[a] * g;
                m.add(a, r_count, cross);
                m.add(r_count, a, cross.conj());
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterationSettings {
    /// Residual tolerance on the matrix scaled to unit 1-norm.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PowerIterationSettings {
    fn default() -> Self {
        PowerIterationSettings {
            tol: 1e-10,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit-norm eigenvector.
    pub vector: Vec<Complex64>,
    /// `||M x - value x||` for the returned vector.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(x: &mut [Complex64]) -> f64 {
    let n = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|z| *z /= n);
    }
    n
}

/// Deterministic generic starting vector.
pub fn default_start(dim: usize) -> Vec<Complex64> {
    (0..dim)
        .map(|j| Complex64::new(1.0, 0.1 + j as f64 / dim as f64))
        .collect()
}

/// Eigenpair for the algebraically largest eigenvalue of a Hermitian matrix.
///
/// Runs power iteration on `M / c + I` with `c = ||M||_1`, which is positive
/// semidefinite, so its dominant eigenvalue belongs to the largest eigenvalue
/// of `M` even when `M` is indefinite. The returned pair has `converged`
/// unset if the residual did not reach the tolerance.
pub fn principal_eigenpair(
    m: &HermitianMatrix,
    start: &[Complex64],
    settings: PowerIterationSettings,
) -> Eigenpair {
    let n = m.dim();
    let mut x = start.to_vec();
    if normalize(&mut x) == 0.0 {
        x = default_start(n);
        normalize(&mut x);
    }
    let scale = m.norm_one();
    if scale == 0.0 {
        return Eigenpair {
            value: 0.0,
            vector: x,
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut iterations = 0;
    loop {
        m.matvec(&x, &mut y);
        y.iter_mut().for_each(|z| *z /= scale);
        let mu: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re;
        let residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - a * mu).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let converged = residual <= settings.tol;
        if converged || iterations >= settings.max_iters {
            return Eigenpair {
                value: mu * scale,
                vector: x,
                residual: residual * scale,
                iterations,
                converged,
            };
        }
        for (a, b) in x.iter_mut().zip(&y) {
            *a += b;
        }
        normalize(&mut x);
        iterations += 1;
    }
}

/// The solver state at the selected multiplier.
#[derive(Debug, Clone)]
pub struct InitSolverState {
    pub lambda1: f64,
    pub matrix: HermitianMatrix,
    pub eigenvalue: f64,
    /// Principal eigenvector scaled to squared norm `R + 1`.
    pub eigenvector: Vec<Complex64>,
    /// `min_i u^H Ht_i u` for the scaled eigenvector.
    pub score: f64,
    pub residual: f64,
}

/// Line search over the multiplier grid.
pub fn init_phase_state(ch: &ChannelRealization, grid_points: usize) -> Result<InitSolverState> {
    assert!(
        grid_points >= 2,
        "multiplier grid needs at least two points"
    );
    let dim = ch.elements() + 1;
    let forward = gain_matrix(ch, Direction::Forward);
    let reverse = gain_matrix(ch, Direction::Reverse);
    let settings = PowerIterationSettings::default();
    let target_norm = (dim as f64).sqrt();

    let mut best: Option<InitSolverState> = None;
    let mut warm = default_start(dim);
    for step in 0..grid_points {
        let lambda1 = step as f64 / (grid_points - 1) as f64;
        let matrix = HermitianMatrix::interpolate(&reverse, &forward, lambda1);
        let mut pair = principal_eigenpair(&matrix, &warm, settings);
        if !pair.converged {
            // resume from where the neighbour-seeded run stopped
            pair = principal_eigenpair(&matrix, &pair.vector, settings);
        }
        if !pair.converged {
            return Err(Error::EigenNotConverged {
                lambda: lambda1,
                residual: pair.residual,
                iterations: 2 * settings.max_iters,
            });
        }
        warm.clone_from(&pair.vector);
        let scaled: Vec<Complex64> = pair.vector.iter().map(|z| z * target_norm).collect();
        let score = forward
            .quadratic_form(&scaled)
            .min(reverse.quadratic_form(&scaled));
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(InitSolverState {
                lambda1,
                matrix,
                eigenvalue: pair.value,
                eigenvector: scaled,
                score,
                residual: pair.residual,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Relaxed (pre-projection) coefficients from the selected eigenvector:
/// the first `R` entries divided by the last, or their raw phases when the
/// last entry vanishes.
pub fn relaxed_phase(state: &InitSolverState) -> Vec<Complex64> {
    let r_count = state.eigenvector.len() - 1;
    let last = state.eigenvector[r_count];
    let head = &state.eigenvector[..r_count];
    if last.norm() < 1e-10 {
        head.to_vec()
    } else {
        head.iter().map(|z| z / last).collect()
    }
}

/// Initial reflection coefficients for the given codebook.
pub fn init_phase(
    ch: &ChannelRealization,
    codebook: Codebook,
    grid_points: usize,
) -> Result<PhaseVector> {
    if ch.elements() == 0 {
        return Ok(PhaseVector::identity(0, codebook));
    }
    let state = init_phase_state(ch, grid_points)?;
    Ok(project(&relaxed_phase(&state), codebook))
}

/// Effective channel gain `||g_i + H_i psi||^2` summed over pairs and sub-bands.
pub fn channel_gain(ch: &ChannelRealization, dir: Direction, psi: &[Complex64]) -> f64 {
    let mut total = 0.0;
    for k in 0..ch.pairs() {
        for v in 0..ch.subbands() {
            total += effective_gain(ch.g(k, v, dir), ch.h(k, v, dir), psi).norm_sqr();
        }
    }
    total
}

/// Smaller of the two directional channel gains.
pub fn min_channel_gain(ch: &ChannelRealization, psi: &[Complex64]) -> f64 {
    channel_gain(ch, Direction::Forward, psi).min(channel_gain(ch, Direction::Reverse, psi))
}
