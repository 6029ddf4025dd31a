//! Stage-2 radio-link allocation: proportional-fair and round-robin schedulers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{radio_budget, PairingMatrix};
use crate::rates::EdgeRateMatrix;

/// Binary `F x |E|` channel-to-edge selection, edge `e = n * M + m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkSelection {
    pub f_count: usize,
    pub n_count: usize,
    pub m_count: usize,
    s: Vec<bool>,
}

impl LinkSelection {
    pub fn empty(f_count: usize, n_count: usize, m_count: usize) -> Self {
        Self { f_count, n_count, m_count, s: vec![false; f_count * n_count * m_count] }
    }

    pub fn edge_count(&self) -> usize {
        self.n_count * self.m_count
    }

    pub fn is_selected(&self, f: usize, e: usize) -> bool {
        self.s[f * self.edge_count() + e]
    }

    pub fn set(&mut self, f: usize, e: usize, v: bool) {
        let i = f * self.edge_count() + e;
        self.s[i] = v;
    }

    /// Selected edges on channel `f`.
    pub fn edges_on(&self, f: usize) -> Vec<usize> {
        (0..self.edge_count()).filter(|&e| self.is_selected(f, e)).collect()
    }

    /// Number of selected links per channel.
    pub fn counts(&self) -> Vec<u32> {
        (0..self.f_count).map(|f| self.edges_on(f).len() as u32).collect()
    }

    /// Selected `(f, n, m)` triples.
    pub fn links(&self) -> Vec<(usize, usize, usize)> {
        let mc = self.m_count;
        (0..self.f_count)
            .flat_map(|f| self.edges_on(f).into_iter().map(move |e| (f, e / mc, e % mc)))
            .collect()
    }

    /// Links used by each AP.
    pub fn ap_usage(&self) -> Vec<u32> {
        let mut used = vec![0; self.n_count];
        for (_, n, _) in self.links() {
            used[n] += 1;
        }
        used
    }

    /// Links used by each STA.
    pub fn sta_usage(&self) -> Vec<u32> {
        let mut used = vec![0; self.m_count];
        for (_, _, m) in self.links() {
            used[m] += 1;
        }
        used
    }

    /// `sum_f sum_e S[f][e] C[f][e]`.
    pub fn throughput(&self, c: &EdgeRateMatrix) -> f64 {
        (0..self.f_count).map(|f| self.edges_on(f).iter().map(|&e| c.get(f, e)).sum::<f64>()).sum()
    }

    /// Mean rate of the selected edges on channel `f`, 0 when none is selected.
    pub fn channel_mean_rate(&self, c: &EdgeRateMatrix, f: usize) -> f64 {
        let edges = self.edges_on(f);
        if edges.is_empty() {
            0.0
        } else {
            edges.iter().map(|&e| c.get(f, e)).sum::<f64>() / edges.len() as f64
        }
    }

    pub fn channel_mean_rates(&self, c: &EdgeRateMatrix) -> Vec<f64> {
        (0..self.f_count).map(|f| self.channel_mean_rate(c, f)).collect()
    }
}

/// Per-channel EWMA throughput.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputState {
    pub phi_prev: Vec<f64>,
    pub phi_cur: Vec<f64>,
    pub horizon_t: u32,
}

impl ThroughputState {
    pub fn new(phi: Vec<f64>, horizon_t: u32) -> Result<Self> {
        if horizon_t == 0 {
            return Err(Error::InvalidInput("EWMA horizon must be at least 1".into()));
        }
        if phi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("throughput averages must be finite and non-negative".into()));
        }
        Ok(Self { phi_prev: phi.clone(), phi_cur: phi, horizon_t })
    }

    /// `sum_f log Phi_f`, the PF utility.
    pub fn utility(&self) -> f64 {
        self.phi_cur.iter().map(|v| v.ln()).sum()
    }

    /// Promote the current average to the previous one.
    pub fn commit(mut self) -> Self {
        self.phi_prev.clone_from(&self.phi_cur);
        self
    }
}

/// `R~(n)` per AP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioBudget {
    pub r_tilde: Vec<u32>,
}

impl RadioBudget {
    pub fn from_pairing(x: &PairingMatrix, sta_radio_limits: &[u32]) -> Self {
        Self { r_tilde: radio_budget(x, sta_radio_limits) }
    }
}

/// `Phi_cur = (1 - 1/T) Phi_prev + mean_rate(S) / T` per channel.
pub fn ewma_update(state: &ThroughputState, s: &LinkSelection, c: &EdgeRateMatrix) -> ThroughputState {
    let t = state.horizon_t.max(1) as f64;
    let phi_cur = state
        .phi_prev
        .iter()
        .enumerate()
        .map(|(f, &prev)| (1.0 - 1.0 / t) * prev + s.channel_mean_rate(c, f) / t)
        .collect();
    ThroughputState { phi_prev: state.phi_prev.clone(), phi_cur, horizon_t: state.horizon_t }
}

/// Mean selected rate over `Phi_cur` on channel `f`; infinite when `Phi_cur` is 0.
pub fn pf_metric(state: &ThroughputState, s: &LinkSelection, c: &EdgeRateMatrix, f: usize) -> f64 {
    let phi = state.phi_cur[f];
    if phi <= 0.0 {
        return f64::INFINITY;
    }
    s.channel_mean_rate(c, f) / phi
}

/// `(max - min) / mean`.
pub fn fairness_spread(metrics: &[f64]) -> f64 {
    if metrics.is_empty() {
        return 0.0;
    }
    let (lo, hi) = metrics.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    (hi - lo) / mean
}

/// How the PF scheduler ranks channels for an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PfRule {
    /// Each edge ranks channels by its own `C[f][e] / Phi_f`.
    #[default]
    EdgeRatio,
    /// One channel list per call, sorted by the channel fairness ratio.
    ChannelPriority,
    /// Rank by the channel mean rate with the edge tentatively added, over `Phi_f`.
    CandidateMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub selection: LinkSelection,
    pub state: ThroughputState,
    /// Paired edges `(n, m)` that received no channel.
    pub unallocated: Vec<(usize, usize)>,
}

/// Visit order: descending best-channel rate, ties by edge index.
fn edge_order(pairing: &PairingMatrix, c: &EdgeRateMatrix) -> Vec<(usize, usize)> {
    let best = |&(n, m): &(usize, usize)| {
        let e = c.edge_index(n, m);
        (0..c.f_count).map(|f| c.get(f, e)).fold(0.0f64, f64::max)
    };
    let mut edges = pairing.edges();
    edges.sort_by(|a, b| best(b).total_cmp(&best(a)));
    edges
}

fn check_shapes(pairing: &PairingMatrix, budget: &RadioBudget, sta_radios: &[u32], c: &EdgeRateMatrix) -> Result<()> {
    if pairing.n_count != c.n_count
        || pairing.m_count != c.m_count
        || budget.r_tilde.len() != c.n_count
        || sta_radios.len() != c.m_count
    {
        return Err(Error::InvalidInput("pairing, budget and rate shapes disagree".into()));
    }
    Ok(())
}

/// One PF scheduling step.
///
/// Updates `Phi_cur` from the previous selection, ranks channels, gives every
/// paired edge up to `min(r(m), F)` channels within the AP budget `R~(n)`,
/// then commits `Phi_prev <- Phi_cur`. Zero-rate links are never selected.
pub fn allocate_pf(
    pairing: &PairingMatrix,
    budget: &RadioBudget,
    sta_radios: &[u32],
    c: &EdgeRateMatrix,
    state: &ThroughputState,
    prev: &LinkSelection,
    rule: PfRule,
) -> Result<Allocation> {
    check_shapes(pairing, budget, sta_radios, c)?;
    let f_count = c.f_count;
    if state.phi_prev.len() != f_count {
        return Err(Error::InvalidInput("throughput state length differs from channel count".into()));
    }
    let st = ewma_update(state, prev, c);
    let phi = &st.phi_cur;
    let ratio = |num: f64, f: usize| if phi[f] > 0.0 { num / phi[f] } else { f64::INFINITY };

    let priority: Vec<usize> = {
        let p: Vec<f64> = (0..f_count).map(|f| pf_metric(&st, prev, c, f)).collect();
        let mut order: Vec<usize> = (0..f_count).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        order
    };

    let mut sel = LinkSelection::empty(f_count, c.n_count, c.m_count);
    let mut sums = vec![0.0; f_count];
    let mut counts = vec![0usize; f_count];
    let mut ap_used = vec![0u32; c.n_count];
    let mut unallocated = Vec::new();
    for (n, m) in edge_order(pairing, c) {
        let e = c.edge_index(n, m);
        let want = (sta_radios[m] as usize).min(f_count);
        let mut ranked: Vec<usize> = match rule {
            PfRule::ChannelPriority => priority.clone(),
            PfRule::EdgeRatio => {
                let mut o: Vec<usize> = (0..f_count).collect();
                o.sort_by(|&a, &b| ratio(c.get(b, e), b).total_cmp(&ratio(c.get(a, e), a)));
                o
            }
            PfRule::CandidateMean => Vec::new(),
        };
        let mut taken = 0;
        let mut used = vec![false; f_count];
        while taken < want {
            if rule == PfRule::CandidateMean {
                let score = |f: usize| ratio((sums[f] + c.get(f, e)) / (counts[f] + 1) as f64, f);
                ranked = (0..f_count).filter(|&f| !used[f]).collect();
                ranked.sort_by(|&a, &b| score(b).total_cmp(&score(a)));
                ranked.truncate(1);
            }
            let pick = ranked.iter().copied().find(|&f| !used[f]);
            let Some(f) = pick else { break };
            used[f] = true;
            if c.get(f, e) <= 0.0 || ap_used[n] + 1 > budget.r_tilde[n] {
                continue;
            }
            sel.set(f, e, true);
            sums[f] += c.get(f, e);
            counts[f] += 1;
            ap_used[n] += 1;
            taken += 1;
        }
        if taken == 0 {
            unallocated.push((n, m));
        }
    }
    Ok(Allocation { selection: sel, state: st.commit(), unallocated })
}

/// Weighted round-robin: channel `f` appears `weights[f]` times in a cyclic
/// sequence that edges consume in edge-index order, starting at `offset`.
pub fn allocate_rr(
    pairing: &PairingMatrix,
    budget: &RadioBudget,
    sta_radios: &[u32],
    f_count: usize,
    weights: &[u32],
    offset: usize,
) -> Result<(LinkSelection, Vec<(usize, usize)>)> {
    if weights.len() != f_count || weights.contains(&0) {
        return Err(Error::InvalidInput("round-robin needs one positive weight per channel".into()));
    }
    if budget.r_tilde.len() != pairing.n_count || sta_radios.len() != pairing.m_count {
        return Err(Error::InvalidInput("pairing, budget and radio shapes disagree".into()));
    }
    let seq: Vec<usize> = (0..f_count).flat_map(|f| std::iter::repeat(f).take(weights[f] as usize)).collect();
    let mut sel = LinkSelection::empty(f_count, pairing.n_count, pairing.m_count);
    let mut ap_used = vec![0u32; pairing.n_count];
    let mut cursor = offset % seq.len();
    let mut unallocated = Vec::new();
    for (n, m) in pairing.edges() {
        let e = n * pairing.m_count + m;
        let want = (sta_radios[m] as usize).min(f_count);
        let mut used = vec![false; f_count];
        let mut taken = 0;
        for _ in 0..want {
            if ap_used[n] >= budget.r_tilde[n] {
                break;
            }
            let Some(t) = (0..seq.len()).find(|&t| !used[seq[(cursor + t) % seq.len()]]) else { break };
            let f = seq[(cursor + t) % seq.len()];
            cursor = (cursor + t + 1) % seq.len();
            used[f] = true;
            sel.set(f, e, true);
            ap_used[n] += 1;
            taken += 1;
        }
        if taken == 0 {
            unallocated.push((n, m));
        }
    }
    Ok((sel, unallocated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::RateTensor;

    fn rates(f: usize, n: usize, m: usize, v: Vec<f64>) -> EdgeRateMatrix {
        RateTensor::new(f, n, m, v).unwrap().to_edges()
    }

    fn all_to_ap0(m: usize) -> PairingMatrix {
        PairingMatrix::from_rows(&[vec![1; m]]).unwrap()
    }

    #[test]
    fn ewma_edge_cases() {
        let c = rates(2, 1, 1, vec![100.0, 50.0]);
        let mut s = LinkSelection::empty(2, 1, 1);
        s.set(0, 0, true);
        let st = ThroughputState::new(vec![10.0, 10.0], 1).unwrap();
        assert_eq!(ewma_update(&st, &s, &c).phi_cur, vec![100.0, 0.0]);
        let st = ThroughputState::new(vec![10.0, 10.0], 4).unwrap();
        assert_eq!(ewma_update(&st, &s, &c).phi_cur, vec![32.5, 7.5]);
    }

    #[test]
    fn ewma_converges_geometrically() {
        let c = rates(1, 1, 1, vec![80.0]);
        let mut s = LinkSelection::empty(1, 1, 1);
        s.set(0, 0, true);
        let mut st = ThroughputState::new(vec![0.0], 10).unwrap();
        let mut err = 80.0;
        for _ in 0..50 {
            st = ewma_update(&st, &s, &c).commit();
            let e = (80.0 - st.phi_cur[0]).abs();
            assert!((e - err * 0.9).abs() < 1e-9);
            err = e;
        }
    }

    #[test]
    fn metric_scaling() {
        let c = rates(1, 1, 1, vec![50.0]);
        let mut s = LinkSelection::empty(1, 1, 1);
        s.set(0, 0, true);
        let st = ThroughputState::new(vec![50.0], 100).unwrap();
        assert_eq!(pf_metric(&st, &s, &c, 0), 1.0);
        let half = ThroughputState::new(vec![25.0], 100).unwrap();
        assert_eq!(pf_metric(&half, &s, &c, 0), 2.0);
        let zero = ThroughputState::new(vec![0.0], 100).unwrap();
        assert!(pf_metric(&zero, &s, &c, 0).is_infinite());
    }

    #[test]
    fn spread_arithmetic() {
        assert_eq!(fairness_spread(&[2.0, 2.0, 2.0]), 0.0);
        assert_eq!(fairness_spread(&[1.0, 3.0]), 1.0);
    }

    #[test]
    fn pf_picks_dominant_channel() {
        let c = rates(2, 1, 1, vec![100.0, 10.0]);
        let x = all_to_ap0(1);
        let b = RadioBudget::from_pairing(&x, &[1]);
        let st = ThroughputState::new(vec![50.0, 50.0], 100).unwrap();
        for rule in [PfRule::EdgeRatio, PfRule::ChannelPriority, PfRule::CandidateMean] {
            let prev = LinkSelection::empty(2, 1, 1);
            let a = allocate_pf(&x, &b, &[1], &c, &st, &prev, rule).unwrap();
            if rule != PfRule::ChannelPriority {
                assert!(a.selection.is_selected(0, 0), "{rule:?}");
            }
            assert_eq!(a.selection.links().len(), 1);
        }
    }

    #[test]
    fn pf_single_channel_respects_budget() {
        let c = rates(1, 1, 3, vec![5.0, 6.0, 7.0]);
        let x = all_to_ap0(3);
        let b = RadioBudget { r_tilde: vec![2] };
        let st = ThroughputState::new(vec![1.0], 100).unwrap();
        let prev = LinkSelection::empty(1, 1, 3);
        let a = allocate_pf(&x, &b, &[1, 1, 1], &c, &st, &prev, PfRule::EdgeRatio).unwrap();
        assert_eq!(a.selection.counts(), vec![2]);
        assert_eq!(a.unallocated, vec![(0, 0)]);
    }

    #[test]
    fn rr_slices() {
        let x = all_to_ap0(3);
        let b = RadioBudget::from_pairing(&x, &[1, 1, 1]);
        let (s, _) = allocate_rr(&x, &b, &[1, 1, 1], 3, &[1, 1, 1], 0).unwrap();
        assert_eq!(s.counts(), vec![1, 1, 1]);

        let x = all_to_ap0(7);
        let b = RadioBudget::from_pairing(&x, &[1; 7]);
        let (s, _) = allocate_rr(&x, &b, &[1; 7], 3, &[1, 2, 4], 0).unwrap();
        assert_eq!(s.counts(), vec![1, 2, 4]);
        let (again, _) = allocate_rr(&x, &b, &[1; 7], 3, &[1, 2, 4], 0).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rr_multi_radio_uses_distinct_channels() {
        let x = all_to_ap0(2);
        let b = RadioBudget::from_pairing(&x, &[2, 2]);
        let (s, _) = allocate_rr(&x, &b, &[2, 2], 3, &[1, 2, 4], 2).unwrap();
        assert_eq!(s.sta_usage(), vec![2, 2]);
        assert_eq!(s.ap_usage(), vec![4]);
    }
}
