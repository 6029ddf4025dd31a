use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::apc::{run_apc_loop_on, run_slo_baseline, steady_state, Allocator, ApcOptions, ColdStart, Solver};
use super::scenario::Scenario;
use crate::allocation::PfRule;
use crate::error::Result;
use crate::rates::SnrTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Mlo(Solver, Allocator),
    Slo,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Mlo(s, a) => write!(f, "{s}+{a}"),
            Algorithm::Slo => f.write_str("slo"),
        }
    }
}

/// The four curves compared across SNR.
pub const LADDER: [Algorithm; 4] = [
    Algorithm::Mlo(Solver::Optimal, Allocator::Pf),
    Algorithm::Mlo(Solver::Greedy, Allocator::Pf),
    Algorithm::Mlo(Solver::Greedy, Allocator::Rr),
    Algorithm::Slo,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Target mean link SNR per point; `None` keeps the scenario's SNRs.
    pub snr_points: Vec<Option<f64>>,
    /// MCS applied to every channel; `None` keeps the configured MCS.
    pub mcs_points: Vec<Option<u8>>,
    pub rounds: u32,
    pub iterations: usize,
    /// Trailing iterations averaged into the steady state.
    pub steady_window: usize,
    pub algorithms: Vec<Algorithm>,
    pub pf_rule: PfRule,
    pub cold_start: ColdStart,
}

impl SweepConfig {
    pub fn new(snr_points: Vec<Option<f64>>, rounds: u32) -> Self {
        Self {
            snr_points,
            mcs_points: vec![None],
            rounds,
            iterations: 12,
            steady_window: 6,
            algorithms: LADDER.to_vec(),
            pf_rule: PfRule::default(),
            cold_start: ColdStart::default(),
        }
    }
}

/// Per-point statistics over Monte Carlo rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub algorithm: String,
    pub snr_db: Option<f64>,
    pub mcs: Option<u8>,
    pub rounds: u32,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub spread_mean: f64,
    pub spread_std: f64,
}

/// Link SNRs of Monte Carlo round `round`: random links use seed
/// `scenario.seed + round`, then each in-range link gets uniform jitter.
pub fn round_snr(scenario: &Scenario, round: u64) -> SnrTensor {
    let seed = scenario.seed.wrapping_add(round);
    let base = scenario.snr_tensor(seed);
    let j = scenario.snr_jitter_db;
    if j > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        base.map_in_range(|v| v + rng.gen_range(-j..=j))
    } else {
        base
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Steady-state throughput and spread of one algorithm on one SNR draw.
pub fn evaluate(
    scenario: &Scenario,
    snr: &SnrTensor,
    algorithm: Algorithm,
    mcs: Option<u8>,
    cfg: &SweepConfig,
) -> Result<(f64, f64)> {
    match algorithm {
        Algorithm::Slo => {
            let r = run_slo_baseline(scenario, snr, mcs)?;
            Ok((r.aggregate_throughput, r.fairness_spread))
        }
        Algorithm::Mlo(solver, allocator) => {
            let mut opts = ApcOptions::new(solver, allocator, cfg.iterations);
            opts.pf_rule = cfg.pf_rule;
            opts.cold_start = cfg.cold_start;
            if let Some(m) = mcs {
                opts.mcs_schedule = vec![(0, m)];
            }
            let reports = run_apc_loop_on(scenario, snr, &opts)?;
            let w = cfg.steady_window.clamp(1, reports.len().max(1));
            let tail = &reports[reports.len().saturating_sub(w)..];
            let spread = tail.iter().map(|r| r.fairness_spread).sum::<f64>() / tail.len().max(1) as f64;
            Ok((steady_state(&reports, w), spread))
        }
    }
}

/// Run every (algorithm, SNR, MCS, round) combination in parallel and
/// summarize each point. Output order is (MCS, SNR, algorithm) as configured.
pub fn run_monte_carlo(scenario: &Scenario, cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    let rounds = cfg.rounds.max(1);
    let mut jobs = Vec::new();
    for (mi, &mcs) in cfg.mcs_points.iter().enumerate() {
        for (si, &snr) in cfg.snr_points.iter().enumerate() {
            for (ai, &alg) in cfg.algorithms.iter().enumerate() {
                for r in 0..rounds {
                    jobs.push((mi, si, ai, r, mcs, snr, alg));
                }
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(mi, si, ai, r, mcs, target, alg)| {
            let base = round_snr(scenario, r as u64);
            let snr = match target {
                Some(t) => base.with_mean(t),
                None => base,
            };
            evaluate(scenario, &snr, alg, mcs, cfg).map(|v| ((mi, si, ai, r), v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = results;
    results.sort_by_key(|(k, _)| *k);

    let mut out = Vec::new();
    for chunk in results.chunk_by(|a, b| (a.0 .0, a.0 .1, a.0 .2) == (b.0 .0, b.0 .1, b.0 .2)) {
        let (mi, si, ai, _) = chunk[0].0;
        let tp: Vec<f64> = chunk.iter().map(|(_, v)| v.0).collect();
        let sp: Vec<f64> = chunk.iter().map(|(_, v)| v.1).collect();
        let (throughput_mean, throughput_std) = mean_std(&tp);
        let (spread_mean, spread_std) = mean_std(&sp);
        out.push(SweepPoint {
            algorithm: cfg.algorithms[ai].to_string(),
            snr_db: cfg.snr_points[si],
            mcs: cfg.mcs_points[mi],
            rounds,
            throughput_mean,
            throughput_std,
            spread_mean,
            spread_std,
        });
    }
    Ok(out)
}
