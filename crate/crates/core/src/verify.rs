//! Invariant and oracle battery.
//!
//! Every check recomputes its reference values along an independent path
//! (naive DFT of the time-domain composite channel, brute-force grids, a
//! separate re-implementation of the greedy assignment) and reports the
//! worst discrepancy it saw.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{allocate_subbands, iterative_waterfill, iterative_waterfill_row};
use crate::channel::{build_realization, complex_normal, ChannelRealization};
use crate::config::{Codebook, ScenarioParams, SystemConfig};
use crate::harness::{run_scheme_on, stats::mean, SchemeId};
use crate::phase_design::{
    direction_gradient, exhaustive_phase_oracle, psg_optimize, refresh_state, PsgSettings,
};
use crate::rate_model::{surrogate_objective, Allocation, Direction, NodeLink, PhaseVector};
use crate::Result;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn below(name: &'static str, metric: f64, tolerance: f64, detail: String) -> Self {
        CheckReport {
            name,
            metric,
            tolerance,
            passed: metric < tolerance,
            detail,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} metric={:.3e} tol={:.1e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.metric,
            self.tolerance,
            self.detail
        )
    }
}

fn instance_rng(seed: u64, instance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance as u64);
    rng
}

/// Reference system with `R` elements and continuous phases.
pub fn reference_config(ris_elements: usize) -> SystemConfig {
    ScenarioParams::reference()
        .build()
        .expect("built-in profile is valid")
        .with_ris(ris_elements, Codebook::Continuous)
}

/// `X[v] = sum_n x[n] exp(-j 2 pi v n / N)`, evaluated term by term.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|v| {
            x.iter()
                .enumerate()
                .map(|(t, &xt)| {
                    xt * Complex64::from_polar(1.0, -2.0 * PI * ((v * t) % n) as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

/// Effective per-band gains of `(pair, dir)` from the time-domain taps.
fn time_domain_gains(
    ch: &ChannelRealization,
    pair: usize,
    dir: Direction,
    psi: &[Complex64],
) -> Vec<Complex64> {
    let impulse = ch
        .composite_impulse_response(pair, dir, psi)
        .expect("realization keeps its taps");
    naive_dft(&impulse)
}

/// Weighted sum-rates per direction, recomputed from the time domain.
fn oracle_sumrates(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    alloc: &Allocation,
    psi: &[Complex64],
) -> [f64; 2] {
    let v_count = ch.subbands();
    let mut sums = [0.0; 2];
    for link in NodeLink::all(cfg.pairs) {
        let gains = time_domain_gains(ch, link.pair, link.dir, psi);
        for v in alloc.bands_of(link) {
            let snr = alloc.power(v) * gains[v].norm_sqr() / cfg.noise[link.pair][v];
            sums[link.dir.index()] += cfg.weights[link.pair] * (1.0 + snr).log2() / v_count as f64;
        }
    }
    sums
}

struct Instance {
    cfg: SystemConfig,
    ch: ChannelRealization,
    alloc: Allocation,
    psi: PhaseVector,
}

fn random_instance(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Instance {
    let ch = build_realization(cfg, rng);
    let psi = PhaseVector::random(cfg.ris_elements, cfg.codebook, rng);
    let owners = allocate_subbands(cfg, &ch, psi.as_slice()).expect("valid profile");
    let power = iterative_waterfill(cfg, &ch, &owners, psi.as_slice());
    Instance {
        cfg: cfg.clone(),
        ch,
        alloc: Allocation::new(owners, power),
        psi,
    }
}

/// After refreshing filters and weights, each surrogate value equals minus
/// the weighted sum-rate of its direction.
pub fn check_surrogate_identity(instances: usize, seed: u64) -> CheckReport {
    let cfg = reference_config(16);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let inst = random_instance(&cfg, &mut instance_rng(seed, i));
        let state = refresh_state(&inst.cfg, &inst.ch, &inst.alloc, inst.psi.as_slice());
        let rates = oracle_sumrates(&inst.cfg, &inst.ch, &inst.alloc, inst.psi.as_slice());
        for (f, rate) in state.objectives.iter().zip(rates) {
            worst = worst.max((f + rate).abs());
        }
    }
    CheckReport::below(
        "surrogate-identity",
        worst,
        1e-9,
        format!("{instances} instances, K=3 V=16 R=16, both directions"),
    )
}

/// Central differences of each surrogate direction against `2 Re{d^H grad}`.
pub fn check_gradient(instances: usize, directions: usize, seed: u64) -> CheckReport {
    let cfg = reference_config(16);
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let inst = random_instance(&cfg, &mut rng);
        let psi = inst.psi.as_slice();
        let state = refresh_state(&inst.cfg, &inst.ch, &inst.alloc, psi);
        for _ in 0..directions {
            let d: Vec<Complex64> = (0..psi.len()).map(|_| complex_normal(&mut rng)).collect();
            let norm = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let d: Vec<Complex64> = d.iter().map(|z| z / norm).collect();
            let shifted = |s: f64| -> Vec<Complex64> {
                psi.iter().zip(&d).map(|(p, dz)| p + dz * s).collect()
            };
            let plus =
                surrogate_objective(&inst.cfg, &inst.ch, &inst.alloc, &shifted(step), &state);
            let minus =
                surrogate_objective(&inst.cfg, &inst.ch, &inst.alloc, &shifted(-step), &state);
            for dir in Direction::ALL {
                let grad = direction_gradient(&inst.cfg, &inst.ch, &inst.alloc, psi, &state, dir);
                let analytic = 2.0
                    * d.iter()
                        .zip(&grad)
                        .map(|(a, b)| a.conj() * b)
                        .sum::<Complex64>()
                        .re;
                let numeric = (plus[dir.index()] - minus[dir.index()]) / (2.0 * step);
                let scale = analytic.abs().max(numeric.abs()).max(1e-12);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    CheckReport::below(
        "gradient",
        worst,
        1e-4,
        format!("{instances} instances x {directions} directions, relative error"),
    )
}

/// Frequency-domain channels against a naive DFT of the composite impulse
/// response, for random phases. Reports the larger of the worst absolute
/// error and the worst error relative to the band's magnitude scale.
pub fn check_dft(realizations: usize, seed: u64) -> CheckReport {
    let cfg = reference_config(16);
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for i in 0..realizations {
        let mut rng = instance_rng(seed, i);
        let ch = build_realization(&cfg, &mut rng);
        let psi = PhaseVector::random(cfg.ris_elements, cfg.codebook, &mut rng);
        for k in 0..cfg.pairs {
            for dir in Direction::ALL {
                let expected = time_domain_gains(&ch, k, dir, psi.as_slice());
                let scale = expected
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE);
                for (v, e) in expected.iter().enumerate() {
                    let h = ch.h(k, v, dir);
                    let got = ch.g(k, v, dir)
                        + h.iter()
                            .zip(psi.as_slice())
                            .map(|(a, b)| a.conj() * b)
                            .sum::<Complex64>();
                    let err = (got - e).norm();
                    worst_abs = worst_abs.max(err);
                    worst_rel = worst_rel.max(err / scale);
                }
            }
        }
    }
    CheckReport::below(
        "dft-equivalence",
        worst_abs.max(worst_rel),
        1e-10,
        format!("{realizations} realizations, abs {worst_abs:.2e}, rel {worst_rel:.2e}"),
    )
}

fn sum_log_rate(gains: &[f64], power: &[f64]) -> f64 {
    gains
        .iter()
        .zip(power)
        .map(|(w, p)| (1.0 + w * p).log2())
        .sum()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Best rate on the simplex grid `{budget * c / steps : sum c = steps}`,
/// with the grid spacing.
pub fn grid_waterfill(gains: &[f64], budget: f64, min_points: usize) -> (f64, f64) {
    let n = gains.len();
    let mut steps = 1;
    while n > 1 && binomial(steps + n - 1, n - 1) < min_points {
        steps += 1;
    }
    let mut counts = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn visit(
        idx: usize,
        left: usize,
        counts: &mut [usize],
        steps: usize,
        gains: &[f64],
        budget: f64,
        best: &mut f64,
    ) {
        if idx + 1 == counts.len() {
            counts[idx] = left;
            let p: Vec<f64> = counts
                .iter()
                .map(|&c| budget * c as f64 / steps as f64)
                .collect();
            *best = best.max(sum_log_rate(gains, &p));
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            visit(idx + 1, left - c, counts, steps, gains, budget, best);
        }
    }
    visit(0, steps, &mut counts, steps, gains, budget, &mut best);
    (best, budget / steps as f64)
}

/// Iterative waterfilling against a simplex grid search and its KKT water
/// levels. Metric: worst KKT residual; the grid comparison gates `passed`.
pub fn check_waterfill(instances: usize, seed: u64) -> CheckReport {
    let mut worst_kkt: f64 = 0.0;
    let mut grid_failures = 0;
    let mut worst_gap: f64 = 0.0;
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let n = rng.random_range(1..=4);
        let gains: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.random_range(-1.0..2.0)))
            .collect();
        let budget = 10f64.powf(rng.random_range(-1.0..1.0));
        let row = iterative_waterfill_row(&vec![true; n], &gains, budget);
        let p = &row.power;

        let spent: f64 = p.iter().sum();
        let mut kkt = (spent - budget).abs() / budget;
        let levels: Vec<f64> = (0..n)
            .filter(|&v| p[v] > 0.0)
            .map(|v| p[v] + 1.0 / gains[v])
            .collect();
        let level = mean(&levels);
        for &l in &levels {
            kkt = kkt.max((l - level).abs() / level);
        }
        // bands left dry must sit above the water
        for v in (0..n).filter(|&v| p[v] <= 0.0) {
            kkt = kkt.max(((level - 1.0 / gains[v]) / level).max(0.0));
        }
        worst_kkt = worst_kkt.max(kkt);

        let closed = sum_log_rate(&gains, p);
        let (grid, spacing) = grid_waterfill(&gains, budget, 10_000);
        // moving one grid step changes the rate by at most max(w)/ln2 per band
        let resolution =
            n as f64 * spacing * gains.iter().cloned().fold(0.0, f64::max) / std::f64::consts::LN_2;
        worst_gap = worst_gap.max(closed - grid);
        if closed < grid - 1e-12 || closed - grid > resolution {
            grid_failures += 1;
        }
    }
    let mut report = CheckReport::below(
        "waterfilling",
        worst_kkt,
        1e-9,
        format!("{instances} instances, grid mismatches {grid_failures}, max closed-grid gap {worst_gap:.2e}"),
    );
    report.passed &= grid_failures == 0;
    report
}

/// Greedy assignment re-derived from time-domain gains.
pub fn reference_assignment(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    psi: &[Complex64],
) -> Vec<(usize, Direction)> {
    let v_count = cfg.subbands;
    let mut links = Vec::new();
    for k in 0..cfg.pairs {
        links.push((k, Direction::Forward));
        links.push((k, Direction::Reverse));
    }
    let rates: Vec<Vec<f64>> = links
        .iter()
        .map(|&(k, dir)| {
            let p = cfg.max_power[k][dir.index()] / v_count as f64;
            time_domain_gains(ch, k, dir, psi)
                .iter()
                .enumerate()
                .map(|(v, gain)| (1.0 + p * gain.norm_sqr() / cfg.noise[k][v]).log2())
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; v_count];
    let mut total = vec![0.0; links.len()];
    let claim = |j: usize, owner: &mut Vec<Option<usize>>, total: &mut Vec<f64>| {
        let mut order: Vec<usize> = (0..v_count).filter(|&v| owner[v].is_none()).collect();
        // stable sort keeps the lower index first among equal rates
        order.sort_by(|&a, &b| rates[j][b].total_cmp(&rates[j][a]));
        let v = order[0];
        owner[v] = Some(j);
        total[j] += rates[j][v];
    };
    for j in 0..links.len() {
        claim(j, &mut owner, &mut total);
    }
    while owner.iter().any(Option::is_none) {
        let mut order: Vec<usize> = (0..links.len()).collect();
        order.sort_by(|&a, &b| total[a].total_cmp(&total[b]));
        claim(order[0], &mut owner, &mut total);
    }
    owner
        .into_iter()
        .map(|j| links[j.expect("assigned")])
        .collect()
}

/// Production assignment against [`reference_assignment`]. Metric: number of
/// disagreeing instances.
pub fn check_assignment(instances: usize, seed: u64) -> CheckReport {
    let cfg = reference_config(16);
    let mut mismatches = 0;
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let ch = build_realization(&cfg, &mut rng);
        let psi = PhaseVector::random(cfg.ris_elements, cfg.codebook, &mut rng);
        let got: Vec<(usize, Direction)> = allocate_subbands(&cfg, &ch, psi.as_slice())
            .expect("valid profile")
            .iter()
            .map(|o| (o.pair, o.dir))
            .collect();
        if got != reference_assignment(&cfg, &ch, psi.as_slice()) {
            mismatches += 1;
        }
    }
    CheckReport::below(
        "assignment",
        mismatches as f64,
        0.5,
        format!("{instances} instances, {} agree", instances - mismatches),
    )
}

/// Paired tiny-scale comparison of the full design against exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub design: Vec<f64>,
    pub oracle: Vec<f64>,
    /// Trials where the phase-only oracle (fixed powers) fell below the
    /// projected subgradient result from the same powers.
    pub phase_oracle_violations: usize,
}

impl OracleComparison {
    pub fn bound_violations(&self) -> usize {
        self.design
            .iter()
            .zip(&self.oracle)
            .filter(|(d, o)| *d > *o)
            .count()
    }

    pub fn mean_ratio(&self) -> f64 {
        mean(&self.design) / mean(&self.oracle)
    }
}

pub fn compare_with_oracle(trials: usize, seed: u64) -> Result<OracleComparison> {
    let cfg = ScenarioParams::tiny().build()?;
    let mut out = OracleComparison {
        design: Vec::with_capacity(trials),
        oracle: Vec::with_capacity(trials),
        phase_oracle_violations: 0,
    };
    for i in 0..trials {
        let mut rng = instance_rng(seed, i);
        let ch = build_realization(&cfg, &mut rng);
        let design = run_scheme_on(&cfg, &ch, SchemeId::OptPsg, &mut rng)?;
        let oracle = run_scheme_on(&cfg, &ch, SchemeId::OracleTiny, &mut rng)?;
        out.design.push(design.objective());
        out.oracle.push(oracle.objective());

        let psg = psg_optimize(
            &cfg,
            &ch,
            &design.allocation,
            &design.phase,
            PsgSettings::from_config(&cfg),
        );
        let (_, best) = exhaustive_phase_oracle(&cfg, &ch, &design.allocation)?;
        if -psg.best_objective > best + 1e-12 {
            out.phase_oracle_violations += 1;
        }
    }
    Ok(out)
}

/// Oracle soundness: the exhaustive search is never beaten.
pub fn check_oracle(trials: usize, seed: u64) -> Result<CheckReport> {
    let cmp = compare_with_oracle(trials, seed)?;
    let violations = cmp.bound_violations() + cmp.phase_oracle_violations;
    Ok(CheckReport::below(
        "oracle-bound",
        violations as f64,
        0.5,
        format!(
            "{trials} tiny trials, mean design/oracle = {:.4}",
            cmp.mean_ratio()
        ),
    ))
}

/// Constraints and monotone outer traces for every scheme on a few
/// reference realizations. Metric: number of violations.
pub fn check_invariants(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut violations = Vec::new();
    for (i, codebook) in (0..instances).zip(
        [Codebook::Continuous, Codebook::Discrete { bits: 2 }]
            .into_iter()
            .cycle(),
    ) {
        let cfg = reference_config(12).with_ris(12, codebook);
        let mut rng = instance_rng(seed, i);
        let ch = build_realization(&cfg, &mut rng);
        for scheme in SchemeId::ALL
            .into_iter()
            .filter(|s| *s != SchemeId::OracleTiny)
        {
            let out = run_scheme_on(&cfg, &ch, scheme, &mut rng.clone())?;
            if let Err(e) = out.allocation.check_constraints(&cfg) {
                violations.push(format!("{scheme}: {e}"));
            }
            if out
                .phase
                .as_slice()
                .iter()
                .any(|z| (z.norm() - 1.0).abs() > 1e-12)
            {
                violations.push(format!("{scheme}: non-unit phase"));
            }
            if scheme != SchemeId::NoRis && out.phase.codebook() != codebook {
                violations.push(format!("{scheme}: wrong codebook"));
            }
            if out.trace.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12)) {
                violations.push(format!("{scheme}: decreasing outer trace"));
            }
        }
    }
    let detail = if violations.is_empty() {
        format!("{instances} realizations, all schemes")
    } else {
        violations.join("; ")
    };
    Ok(CheckReport::below(
        "invariants",
        violations.len() as f64,
        0.5,
        detail,
    ))
}

/// The whole battery at the acceptance sizes.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_surrogate_identity(100, seed),
        check_gradient(20, 5, seed),
        check_dft(100, seed),
        check_waterfill(50, seed),
        check_assignment(100, seed),
        check_oracle(200, seed)?,
        check_invariants(4, seed)?,
    ])
}
