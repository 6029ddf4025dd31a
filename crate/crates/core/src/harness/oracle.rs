use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::apc::bootstrap_selection;
use super::scenario::Scenario;
use crate::allocation::{allocate_pf, LinkSelection, PfRule, RadioBudget, ThroughputState};
use crate::dcf::{saturation_throughput, simulate_dcf_slots, DcfParams};
use crate::error::Result;
use crate::pairing::{
    build_incidence, check_total_unimodularity, objective_value, pair_exhaustive, pair_optimal_lp,
    solve_joint_mmkp_bruteforce, PairingInstance,
};
use crate::rates::{average_over_channels, build_rate_tensor, AverageRateMatrix, RateTensor};

/// Two-stage pipeline against exhaustive joint search on one rate tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointComparison {
    pub seed: u64,
    pub m_stas: usize,
    /// Bits/s.
    pub two_stage: f64,
    /// Bits/s.
    pub bruteforce: f64,
    pub bruteforce_leaves: u64,
    /// Seconds; `None` unless timing was requested.
    pub two_stage_time: Option<f64>,
    pub bruteforce_time: Option<f64>,
}

/// Rate tensor for a comparison: contender counts from the bootstrap selection.
pub fn comparison_tensor(scenario: &Scenario, seed: u64) -> Result<RateTensor> {
    let snr = scenario.snr_tensor(seed);
    let counts = bootstrap_selection(scenario, &snr).counts();
    build_rate_tensor(&scenario.model, &snr, &counts, None)
}

/// LP pairing followed by one PF allocation from a cold EWMA.
pub fn two_stage_throughput(scenario: &Scenario, c: &RateTensor) -> Result<f64> {
    let sta_limits = scenario.sta_radio_limits();
    let instance = PairingInstance::new(average_over_channels(c), scenario.ap_radio_limits(), sta_limits.clone())?;
    let x = pair_optimal_lp(&instance)?;
    let edges = c.to_edges();
    let phi = (0..c.f_count).map(|f| edges.channel_mean(f)).collect();
    let state = ThroughputState::new(phi, scenario.ewma_horizon)?;
    let prev = LinkSelection::empty(c.f_count, c.n_count, c.m_count);
    let budget = RadioBudget::from_pairing(&x, &sta_limits);
    let a = allocate_pf(&x, &budget, &sta_limits, &edges, &state, &prev, PfRule::default())?;
    Ok(a.selection.throughput(&edges))
}

/// Compare both approaches on the first `m` STAs of the scenario.
pub fn compare_joint(scenario: &Scenario, seed: u64, m: usize, timings: bool) -> Result<JointComparison> {
    let sub = scenario.with_first_stas(m)?;
    let c = comparison_tensor(&sub, seed)?;

    let t0 = Instant::now();
    let two_stage = two_stage_throughput(&sub, &c)?;
    let two_stage_time = t0.elapsed().as_secs_f64();

    let instance = PairingInstance::new(average_over_channels(&c), sub.ap_radio_limits(), sub.sta_radio_limits())?;
    let t1 = Instant::now();
    let joint = solve_joint_mmkp_bruteforce(&c, &instance)?;
    let bruteforce_time = t1.elapsed().as_secs_f64();

    Ok(JointComparison {
        seed,
        m_stas: m,
        two_stage,
        bruteforce: joint.objective,
        bruteforce_leaves: joint.leaves,
        two_stage_time: timings.then_some(two_stage_time),
        bruteforce_time: timings.then_some(bruteforce_time),
    })
}

/// LP pairing against the exhaustive optimum on one random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCheck {
    pub instance: usize,
    pub n_aps: usize,
    pub m_stas: usize,
    pub lp_objective: f64,
    pub exhaustive_objective: f64,
    pub feasible: bool,
}

impl LpCheck {
    /// Feasible and within `rel_tol` of the exhaustive optimum.
    pub fn passes(&self, rel_tol: f64) -> bool {
        let scale = self.exhaustive_objective.abs().max(1.0);
        self.feasible && (self.lp_objective - self.exhaustive_objective).abs() <= rel_tol * scale
    }
}

/// Random instance with `N <= max_n`, `M <= max_m`, `D ~ U[0, 1)` and AP
/// capacities drawn until they can serve every STA.
pub fn random_pairing_instance<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Result<PairingInstance> {
    let n = rng.gen_range(1..=max_n.max(1));
    let m = rng.gen_range(1..=max_m.max(1));
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    let sta = (0..m).map(|_| rng.gen_range(1..=3)).collect();
    let ap = loop {
        let caps: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=m as u32)).collect();
        if caps.iter().sum::<u32>() as usize >= m {
            break caps;
        }
    };
    PairingInstance::new(AverageRateMatrix::from_rows(&rows)?, ap, sta)
}

/// Solve `count` random instances with the LP and with dynamic programming.
pub fn check_lp_random(count: usize, max_n: usize, max_m: usize, seed: u64) -> Result<Vec<LpCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count)
        .map(|_| random_pairing_instance(&mut rng, max_n, max_m))
        .collect::<Result<Vec<_>>>()?;
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let x = pair_optimal_lp(inst)?;
            let (_, best) = pair_exhaustive(inst)?;
            let feasible = x.is_feasible(&inst.ap_radio_limits) && (0..inst.m_stas()).all(|m| x.col_sum(m) == 1);
            Ok(LpCheck {
                instance: i,
                n_aps: inst.n_aps(),
                m_stas: inst.m_stas(),
                lp_objective: objective_value(&x, &inst.d)?,
                exhaustive_objective: best,
                feasible,
            })
        })
        .collect()
}

/// Analytical against simulated normalized throughput at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfCheck {
    pub n: u32,
    pub per: f64,
    pub analytical: f64,
    pub simulated: f64,
    pub rel_error: f64,
}

/// Cross-check the saturation model with the slot simulator on a grid.
pub fn validate_dcf(
    params: &DcfParams,
    ns: &[u32],
    pers: &[f64],
    mcs_rate: f64,
    slots: u64,
    seed: u64,
) -> Result<Vec<DcfCheck>> {
    let grid: Vec<(u32, f64)> = ns.iter().flat_map(|&n| pers.iter().map(move |&p| (n, p))).collect();
    grid.par_iter()
        .enumerate()
        .map(|(i, &(n, per))| {
            let analytical = saturation_throughput(params, n, per, mcs_rate)?;
            let simulated = simulate_dcf_slots(params, n, per, mcs_rate, slots, seed.wrapping_add(i as u64))?.throughput();
            let rel_error = if analytical > 0.0 {
                (simulated - analytical).abs() / analytical
            } else {
                simulated.abs()
            };
            Ok(DcfCheck { n, per, analytical, simulated, rel_error })
        })
        .collect()
}

/// Unimodularity audit result for one incidence shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuCheck {
    pub n_aps: usize,
    pub m_stas: usize,
    pub max_submatrix: usize,
    pub unimodular: bool,
    pub checked: u64,
}

/// Audit the pairing incidence for every `1 <= N <= max_n`, `1 <= M <= max_m`.
pub fn audit_incidence(max_n: usize, max_m: usize, max_submatrix: usize) -> Vec<TuCheck> {
    let shapes: Vec<(usize, usize)> = (1..=max_n).flat_map(|n| (1..=max_m).map(move |m| (n, m))).collect();
    shapes
        .par_iter()
        .map(|&(n, m)| {
            let report = check_total_unimodularity(&build_incidence(n, m).rows, max_submatrix);
            TuCheck { n_aps: n, m_stas: m, max_submatrix, unimodular: report.unimodular, checked: report.checked }
        })
        .collect()
}
