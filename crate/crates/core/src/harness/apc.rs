use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::allocation::{
    allocate_pf, allocate_rr, ewma_update, fairness_spread, LinkSelection, PfRule, RadioBudget, ThroughputState,
};
use crate::error::{Error, Result};
use crate::pairing::{pair_greedy, pair_optimal_lp, PairingInstance, PairingMatrix};
use crate::rates::{average_over_channels, build_rate_tensor, AverageRateMatrix, RateTensor, SnrTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Greedy,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocator {
    Pf,
    Rr,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Greedy => "greedy",
            Solver::Optimal => "optimal",
        })
    }
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocator::Pf => "pf",
            Allocator::Rr => "rr",
        })
    }
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Solver::Greedy),
            "optimal" => Ok(Solver::Optimal),
            _ => Err(Error::InvalidInput(format!("unknown solver {s:?}"))),
        }
    }
}

impl FromStr for Allocator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pf" => Ok(Allocator::Pf),
            "rr" => Ok(Allocator::Rr),
            _ => Err(Error::InvalidInput(format!("unknown allocator {s:?}"))),
        }
    }
}

/// Initial per-channel EWMA value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColdStart {
    /// Mean of `C` over all edges of the channel.
    #[default]
    AllEdgesMean,
    /// Mean rate of the bootstrap selection, falling back to the all-edges mean.
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApcOptions {
    pub solver: Solver,
    pub allocator: Allocator,
    pub iterations: usize,
    pub pf_rule: PfRule,
    pub cold_start: ColdStart,
    /// `(first iteration, mcs)` steps applied to every channel; empty keeps
    /// the configured MCS.
    pub mcs_schedule: Vec<(usize, u8)>,
    /// Record per-iteration wall time.
    pub timings: bool,
}

impl ApcOptions {
    pub fn new(solver: Solver, allocator: Allocator, iterations: usize) -> Self {
        Self {
            solver,
            allocator,
            iterations,
            pf_rule: PfRule::default(),
            cold_start: ColdStart::default(),
            mcs_schedule: Vec::new(),
            timings: false,
        }
    }

    pub fn algorithm(&self) -> String {
        format!("{}+{}", self.solver, self.allocator)
    }

    fn mcs_at(&self, iteration: usize) -> Option<u8> {
        self.mcs_schedule.iter().rev().find(|(from, _)| *from <= iteration).map(|&(_, mcs)| mcs)
    }
}

/// Channel links handed to one STA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLink {
    pub channel: usize,
    /// Index of the STA radio carrying the link.
    pub link: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaRecommendation {
    pub sta: String,
    pub ap: Option<String>,
    pub links: Vec<ChannelLink>,
}

/// Neighbor-report style association advice for every STA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub stas: Vec<StaRecommendation>,
}

impl Recommendation {
    pub fn build(scenario: &Scenario, x: &PairingMatrix, s: &LinkSelection) -> Self {
        let stas = scenario
            .stas
            .iter()
            .enumerate()
            .map(|(m, sta)| {
                let ap = x.ap_of(m);
                let links = match ap {
                    Some(n) => (0..s.f_count)
                        .filter(|&f| s.is_selected(f, n * s.m_count + m))
                        .enumerate()
                        .map(|(link, channel)| ChannelLink { channel, link })
                        .collect(),
                    None => Vec::new(),
                };
                StaRecommendation { sta: sta.id.clone(), ap: ap.map(|n| scenario.aps[n].id.clone()), links }
            })
            .collect();
        Self { stas }
    }

    /// Every recommended link is paired and selected.
    pub fn is_consistent(&self, scenario: &Scenario, x: &PairingMatrix, s: &LinkSelection) -> bool {
        self.stas.iter().enumerate().all(|(m, r)| match &r.ap {
            None => r.links.is_empty() && x.ap_of(m).is_none(),
            Some(id) => {
                let n = scenario.aps.iter().position(|a| &a.id == id);
                n.is_some_and(|n| {
                    x.get(n, m) && r.links.iter().all(|l| s.is_selected(l.channel, n * s.m_count + m))
                })
            }
        })
    }
}

/// One APC period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub algorithm: String,
    /// Mean in-range link SNR.
    pub snr_db: f64,
    /// MCS shared by all channels, if they share one.
    pub mcs: Option<u8>,
    pub pairing: PairingMatrix,
    /// Selection in force at the end of the period.
    pub selection: LinkSelection,
    pub per_channel_phi: Vec<f64>,
    /// Period-mean selected rate over `Phi`, per channel; `None` when idle.
    pub fairness_ratios: Vec<Option<f64>>,
    /// Period mean of the selected rate sum, bits/s.
    pub aggregate_throughput: f64,
    /// Selected rate sum of `selection`, bits/s.
    pub selection_throughput: f64,
    pub fairness_spread: f64,
    /// Contender counts used to build this period's rates.
    pub contenders: Vec<u32>,
    pub unallocated: Vec<(usize, usize)>,
    pub recommendation: Recommendation,
    /// Seconds; only recorded on request so result files stay reproducible.
    pub wall_time: Option<f64>,
}

/// Each STA on its strongest AP, using its best `r(m)` channels.
pub fn bootstrap_selection(scenario: &Scenario, snr: &SnrTensor) -> LinkSelection {
    let (f_count, n_count, m_count) = snr.shape();
    let mut s = LinkSelection::empty(f_count, n_count, m_count);
    let db = |f, n, m| snr.get(f, n, m).unwrap_or(f64::NEG_INFINITY);
    for m in 0..m_count {
        let best_ap = (0..n_count)
            .map(|n| (n, (0..f_count).map(|f| db(f, n, m)).fold(f64::NEG_INFINITY, f64::max)))
            .fold((0, f64::NEG_INFINITY), |acc, (n, v)| if v > acc.1 { (n, v) } else { acc });
        let n = best_ap.0;
        let mut chans: Vec<usize> = (0..f_count).filter(|&f| snr.get(f, n, m).is_some()).collect();
        chans.sort_by(|&a, &b| db(b, n, m).total_cmp(&db(a, n, m)));
        for f in chans.into_iter().take(scenario.stas[m].radios as usize) {
            s.set(f, n * m_count + m, true);
        }
    }
    s
}

/// Round-robin slice weights: bandwidth over the narrowest channel's bandwidth.
pub fn rr_weights(scenario: &Scenario) -> Vec<u32> {
    let min = scenario.model.channels.iter().map(|c| c.bandwidth_mhz).min().unwrap_or(1).max(1);
    scenario.model.channels.iter().map(|c| (c.bandwidth_mhz / min).max(1)).collect()
}

fn shared_mcs(scenario: &Scenario, over: Option<u8>) -> Option<u8> {
    over.or_else(|| {
        let first = scenario.model.channels.first()?.mcs;
        scenario.model.channels.iter().all(|c| c.mcs == first).then_some(first)
    })
}

pub fn solve_pairing(solver: Solver, instance: &PairingInstance) -> Result<PairingMatrix> {
    match solver {
        Solver::Greedy => pair_greedy(instance),
        Solver::Optimal => pair_optimal_lp(instance),
    }
}

/// Run the collect/pair/allocate/recommend loop on the scenario's own SNRs.
pub fn run_apc_loop(scenario: &Scenario, opts: &ApcOptions) -> Result<Vec<IterationReport>> {
    run_apc_loop_on(scenario, &scenario.snr(), opts)
}

/// Run the loop on explicit link SNRs.
///
/// Each iteration is one period: rates are rebuilt from the previous period's
/// mean contender counts, STAs are paired on the channel-averaged rates, and
/// the allocator runs `slots_per_period` scheduling slots against the EWMA.
pub fn run_apc_loop_on(scenario: &Scenario, snr: &SnrTensor, opts: &ApcOptions) -> Result<Vec<IterationReport>> {
    let (f_count, n_count, m_count) = snr.shape();
    if (f_count, n_count, m_count) != (scenario.f_count(), scenario.n_count(), scenario.m_count()) {
        return Err(Error::InvalidInput("SNR tensor does not match the scenario".into()));
    }
    let ap_limits = scenario.ap_radio_limits();
    let sta_limits = scenario.sta_radio_limits();
    let weights = rr_weights(scenario);
    let slots = scenario.slots_per_period as usize;
    let snr_db = snr.mean_in_range().unwrap_or(f64::NAN);

    let mut prev = bootstrap_selection(scenario, snr);
    let mut counts = prev.counts();
    let mut state: Option<ThroughputState> = None;
    let mut reports = Vec::with_capacity(opts.iterations);
    for it in 0..opts.iterations {
        let started = Instant::now();
        let ctx = |e: Error| e.context(format!("iteration {it}"));
        let mcs = opts.mcs_at(it);
        let c = build_rate_tensor(&scenario.model, snr, &counts, mcs).map_err(ctx)?;
        let edges = c.to_edges();
        let mut st = match state.take() {
            Some(s) => s,
            None => {
                let phi = (0..f_count)
                    .map(|f| match opts.cold_start {
                        ColdStart::AllEdgesMean => edges.channel_mean(f),
                        ColdStart::Bootstrap => {
                            let mu = prev.channel_mean_rate(&edges, f);
                            if mu > 0.0 { mu } else { edges.channel_mean(f) }
                        }
                    })
                    .collect();
                ThroughputState::new(phi, scenario.ewma_horizon)?
            }
        };

        let d = average_over_channels(&c);
        let instance = PairingInstance::new(d, ap_limits.clone(), sta_limits.clone())?;
        let x = solve_pairing(opts.solver, &instance).map_err(ctx)?;
        let budget = RadioBudget::from_pairing(&x, &sta_limits);

        let mut sel = prev.clone();
        let mut unallocated = Vec::new();
        if opts.allocator == Allocator::Rr {
            (sel, unallocated) = allocate_rr(&x, &budget, &sta_limits, f_count, &weights, it).map_err(ctx)?;
        }
        let mut mu_sum = vec![0.0; f_count];
        let mut agg_sum = 0.0;
        let mut count_sum = vec![0u64; f_count];
        for _ in 0..slots {
            match opts.allocator {
                Allocator::Pf => {
                    let a = allocate_pf(&x, &budget, &sta_limits, &edges, &st, &prev, opts.pf_rule).map_err(ctx)?;
                    st = a.state;
                    sel = a.selection;
                    unallocated = a.unallocated;
                }
                Allocator::Rr => st = ewma_update(&st, &sel, &edges).commit(),
            }
            for (f, mu) in sel.channel_mean_rates(&edges).into_iter().enumerate() {
                mu_sum[f] += mu;
            }
            for (f, k) in sel.counts().into_iter().enumerate() {
                count_sum[f] += k as u64;
            }
            agg_sum += sel.throughput(&edges);
            prev = sel.clone();
        }

        let ratios: Vec<Option<f64>> = (0..f_count)
            .map(|f| {
                (mu_sum[f] > 0.0).then(|| {
                    let mean = mu_sum[f] / slots as f64;
                    if st.phi_cur[f] > 0.0 { mean / st.phi_cur[f] } else { f64::INFINITY }
                })
            })
            .collect();
        let active: Vec<f64> = ratios.iter().flatten().copied().collect();
        let recommendation = Recommendation::build(scenario, &x, &sel);
        reports.push(IterationReport {
            iteration: it,
            algorithm: opts.algorithm(),
            snr_db,
            mcs: shared_mcs(scenario, mcs),
            selection_throughput: sel.throughput(&edges),
            pairing: x,
            selection: sel,
            per_channel_phi: st.phi_cur.clone(),
            fairness_ratios: ratios,
            aggregate_throughput: agg_sum / slots as f64,
            fairness_spread: fairness_spread(&active),
            contenders: counts.clone(),
            unallocated,
            recommendation,
            wall_time: opts.timings.then(|| started.elapsed().as_secs_f64()),
        });
        counts = count_sum.iter().map(|&k| (k as f64 / slots as f64).round() as u32).collect();
        state = Some(st);
    }
    Ok(reports)
}

/// Mean aggregate throughput over the last `window` reports.
pub fn steady_state(reports: &[IterationReport], window: usize) -> f64 {
    let w = window.clamp(1, reports.len().max(1));
    let tail = &reports[reports.len().saturating_sub(w)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|r| r.aggregate_throughput).sum::<f64>() / tail.len() as f64
}

/// First iteration `k >= 1` from which the spread stays below `threshold`.
pub fn convergence_iteration(reports: &[IterationReport], threshold: f64) -> Option<usize> {
    let mut first = None;
    for (i, r) in reports.iter().enumerate().skip(1).rev() {
        if r.fairness_spread < threshold {
            first = Some(i);
        } else {
            break;
        }
    }
    first
}

/// Single-link baseline: one radio per device, each AP on its configured
/// channel, STAs paired by LP on that channel's rate. Contention is iterated
/// until the per-channel STA counts settle.
pub fn run_slo_baseline(scenario: &Scenario, snr: &SnrTensor, mcs: Option<u8>) -> Result<IterationReport> {
    let (f_count, n_count, m_count) = snr.shape();
    let ap_limits = scenario.ap_radio_limits();
    let chan: Vec<usize> = scenario.aps.iter().map(|a| a.slo_channel).collect();
    let share = (m_count as f64 / n_count as f64).round().max(1.0) as u32;
    let mut counts = vec![0u32; f_count];
    for &f in &chan {
        counts[f] += share;
    }
    let mut last: Option<(PairingMatrix, RateTensor, Vec<u32>)> = None;
    for _ in 0..10 {
        let c = build_rate_tensor(&scenario.model, snr, &counts, mcs)?;
        let values: Vec<f64> = (0..n_count).flat_map(|n| (0..m_count).map(move |m| (n, m))).map(|(n, m)| c.get(chan[n], n, m)).collect();
        let d = AverageRateMatrix::new(n_count, m_count, values)?;
        let instance = PairingInstance::new(d, ap_limits.clone(), vec![1; m_count])?;
        let x = pair_optimal_lp(&instance)?;
        let mut next = vec![0u32; f_count];
        for n in 0..n_count {
            next[chan[n]] += x.row_sum(n);
        }
        let settled = next == counts;
        last = Some((x, c, counts.clone()));
        if settled {
            break;
        }
        counts = next;
    }
    let (x, c, used_counts) = last.expect("at least one contention round");
    let mut sel = LinkSelection::empty(f_count, n_count, m_count);
    for (n, m) in x.edges() {
        sel.set(chan[n], n * m_count + m, true);
    }
    let edges = c.to_edges();
    let rates = sel.channel_mean_rates(&edges);
    let throughput = sel.throughput(&edges);
    Ok(IterationReport {
        iteration: 0,
        algorithm: "slo".into(),
        snr_db: snr.mean_in_range().unwrap_or(f64::NAN),
        mcs: shared_mcs(scenario, mcs),
        recommendation: Recommendation::build(scenario, &x, &sel),
        pairing: x,
        selection: sel,
        per_channel_phi: rates.clone(),
        fairness_ratios: rates.iter().map(|&r| (r > 0.0).then_some(1.0)).collect(),
        aggregate_throughput: throughput,
        selection_throughput: throughput,
        fairness_spread: 0.0,
        contenders: used_counts,
        unallocated: Vec::new(),
        wall_time: None,
    })
}
