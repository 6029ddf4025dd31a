//! Stage-1 AP-STA pairing.

mod incidence;
mod mmkp;
mod simplex;

pub use incidence::{build_incidence, check_total_unimodularity, IncidenceMatrix, TuReport};
pub use mmkp::{solve_joint_mmkp_bruteforce, JointSolution, MMKP_MAX_CHANNELS, MMKP_MAX_EDGES};
pub use simplex::{maximize, LpProblem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::AverageRateMatrix;

/// A pairing problem over the channel-averaged rates `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingInstance {
    pub d: AverageRateMatrix,
    /// `R(n)`.
    pub ap_radio_limits: Vec<u32>,
    /// `r(m)`.
    pub sta_radio_limits: Vec<u32>,
}

impl PairingInstance {
    pub fn new(d: AverageRateMatrix, ap_radio_limits: Vec<u32>, sta_radio_limits: Vec<u32>) -> Result<Self> {
        let inst = Self { d, ap_radio_limits, sta_radio_limits };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_aps(&self) -> usize {
        self.d.n_count
    }

    pub fn m_stas(&self) -> usize {
        self.d.m_count
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_aps() == 0 || self.m_stas() == 0 {
            return Err(Error::InvalidInput("pairing needs at least one AP and one STA".into()));
        }
        if self.ap_radio_limits.len() != self.n_aps() || self.sta_radio_limits.len() != self.m_stas() {
            return Err(Error::InvalidInput("radio limit lengths do not match D".into()));
        }
        if self.ap_radio_limits.iter().chain(&self.sta_radio_limits).any(|&r| r == 0) {
            return Err(Error::InvalidInput("radio counts must be at least 1".into()));
        }
        Ok(())
    }

    fn require_capacity(&self) -> Result<()> {
        let cap: u64 = self.ap_radio_limits.iter().map(|&r| r as u64).sum();
        if cap < self.m_stas() as u64 {
            return Err(Error::Infeasible(format!(
                "APs offer {cap} radio links for {} STAs",
                self.m_stas()
            )));
        }
        Ok(())
    }
}

/// Binary `N x M` association matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairingMatrix {
    pub n_count: usize,
    pub m_count: usize,
    x: Vec<u8>,
}

impl PairingMatrix {
    pub fn zeros(n_count: usize, m_count: usize) -> Self {
        Self { n_count, m_count, x: vec![0; n_count * m_count] }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) || rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidInput("pairing rows must be equal-length 0/1 vectors".into()));
        }
        Ok(Self { n_count: n, m_count: m, x: rows.concat() })
    }

    pub fn get(&self, n: usize, m: usize) -> bool {
        self.x[n * self.m_count + m] == 1
    }

    pub fn set(&mut self, n: usize, m: usize, v: bool) {
        self.x[n * self.m_count + m] = v as u8;
    }

    pub fn row_sum(&self, n: usize) -> u32 {
        self.x[n * self.m_count..(n + 1) * self.m_count].iter().map(|&v| v as u32).sum()
    }

    pub fn col_sum(&self, m: usize) -> u32 {
        (0..self.n_count).map(|n| self.x[n * self.m_count + m] as u32).sum()
    }

    /// AP serving STA `m`, if any.
    pub fn ap_of(&self, m: usize) -> Option<usize> {
        (0..self.n_count).find(|&n| self.get(n, m))
    }

    /// Selected edges `(n, m)` in edge-index order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_count)
            .flat_map(|n| (0..self.m_count).map(move |m| (n, m)))
            .filter(|&(n, m)| self.get(n, m))
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.x.chunks(self.m_count.max(1)).map(<[u8]>::to_vec).collect()
    }

    /// Every STA served exactly once and every AP within `R(n)`.
    pub fn is_feasible(&self, ap_limits: &[u32]) -> bool {
        (0..self.m_count).all(|m| self.col_sum(m) == 1)
            && (0..self.n_count).all(|n| self.row_sum(n) <= ap_limits[n])
    }
}

/// `sum x[n][m] * d[n][m]`.
pub fn objective_value(x: &PairingMatrix, d: &AverageRateMatrix) -> Result<f64> {
    if x.n_count != d.n_count || x.m_count != d.m_count {
        return Err(Error::InvalidInput(format!(
            "pairing is {}x{} but D is {}x{}",
            x.n_count, x.m_count, d.n_count, d.m_count
        )));
    }
    Ok(x.edges().iter().map(|&(n, m)| d.get(n, m)).sum())
}

/// Greedy pairing: visit `(n, m)` by descending `D`, ties by `(n, m)`.
pub fn pair_greedy(instance: &PairingInstance) -> Result<PairingMatrix> {
    instance.validate()?;
    let (n_count, m_count) = (instance.n_aps(), instance.m_stas());
    let mut order: Vec<(usize, usize)> =
        (0..n_count).flat_map(|n| (0..m_count).map(move |m| (n, m))).collect();
    // Stable sort keeps the (n, m) order among equal values.
    order.sort_by(|a, b| instance.d.get(b.0, b.1).total_cmp(&instance.d.get(a.0, a.1)));
    let mut x = PairingMatrix::zeros(n_count, m_count);
    let mut row = vec![0u32; n_count];
    let mut served = vec![false; m_count];
    for (n, m) in order {
        if !served[m] && row[n] < instance.ap_radio_limits[n] {
            x.set(n, m, true);
            served[m] = true;
            row[n] += 1;
        }
    }
    let unserved: Vec<usize> = (0..m_count).filter(|&m| !served[m]).collect();
    if !unserved.is_empty() {
        return Err(Error::Infeasible(format!("greedy pairing left STAs {unserved:?} unserved")));
    }
    Ok(x)
}

/// Options for the LP pairing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LpOptions {
    /// Use `A_M x <= 1` instead of equality, allowing unserved STAs.
    pub relaxed: bool,
}

/// Size of the tie-break bonus relative to the largest `D` entry.
const TIE_BREAK: f64 = 1e-10;

/// Optimal pairing from the LP relaxation, solved at a vertex.
pub fn pair_optimal_lp(instance: &PairingInstance) -> Result<PairingMatrix> {
    pair_optimal_lp_with(instance, LpOptions::default())
}

pub fn pair_optimal_lp_with(instance: &PairingInstance, opts: LpOptions) -> Result<PairingMatrix> {
    instance.validate()?;
    if !opts.relaxed {
        instance.require_capacity()?;
    }
    let (n_count, m_count) = (instance.n_aps(), instance.m_stas());
    let e_count = n_count * m_count;
    // Work on D / max|D| plus a tiny bonus that shrinks convexly with the
    // edge index, so ties resolve toward low-index edges.
    let scale = instance.d.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let c: Vec<f64> = (0..e_count)
        .map(|e| {
            let (n, m) = (e / m_count, e % m_count);
            let w = (e_count - e) as f64 / e_count as f64;
            instance.d.get(n, m) / scale + TIE_BREAK * w * w
        })
        .collect();

    let mut sta_rows = vec![vec![0.0; e_count]; m_count];
    let mut ap_rows = vec![vec![0.0; e_count]; n_count];
    for n in 0..n_count {
        for m in 0..m_count {
            sta_rows[m][n * m_count + m] = 1.0;
            ap_rows[n][n * m_count + m] = 1.0;
        }
    }
    let ap_rhs: Vec<f64> = instance.ap_radio_limits.iter().map(|&r| r as f64).collect();
    let problem = if opts.relaxed {
        LpProblem {
            c,
            a_eq: vec![],
            b_eq: vec![],
            a_le: sta_rows.into_iter().chain(ap_rows).collect(),
            b_le: vec![1.0; m_count].into_iter().chain(ap_rhs).collect(),
        }
    } else {
        LpProblem { c, a_eq: sta_rows, b_eq: vec![1.0; m_count], a_le: ap_rows, b_le: ap_rhs }
    };
    let sol = maximize(&problem)?;

    let mut x = PairingMatrix::zeros(n_count, m_count);
    for (e, &v) in sol.iter().enumerate() {
        let r = v.round();
        if (v - r).abs() > 1e-9 || !(r == 0.0 || r == 1.0) {
            return Err(Error::Solver(format!("LP vertex is fractional at edge {e} (x = {v})")));
        }
        x.set(e / m_count, e % m_count, r == 1.0);
    }
    let served_ok = (0..m_count).all(|m| {
        let s = x.col_sum(m);
        if opts.relaxed { s <= 1 } else { s == 1 }
    });
    let ap_ok = (0..n_count).all(|n| x.row_sum(n) <= instance.ap_radio_limits[n]);
    if !served_ok || !ap_ok {
        return Err(Error::Solver("rounded LP solution violates the pairing constraints".into()));
    }
    Ok(x)
}

/// Exact optimum by dynamic programming over remaining AP capacities.
///
/// Exponential in `N` only; intended as an independent check on small instances.
pub fn pair_exhaustive(instance: &PairingInstance) -> Result<(PairingMatrix, f64)> {
    instance.validate()?;
    instance.require_capacity()?;
    let (n_count, m_count) = (instance.n_aps(), instance.m_stas());
    let caps: Vec<usize> = instance.ap_radio_limits.iter().map(|&r| (r as usize).min(m_count)).collect();
    let states: usize = caps.iter().map(|c| c + 1).product();
    if states.saturating_mul(m_count) > 50_000_000 {
        return Err(Error::SizeLimit(format!("{states} capacity states")));
    }
    let encode = |used: &[usize]| used.iter().zip(&caps).fold(0, |acc, (&u, &c)| acc * (c + 1) + u);
    let decode = |mut s: usize| {
        let mut used = vec![0; n_count];
        for n in (0..n_count).rev() {
            used[n] = s % (caps[n] + 1);
            s /= caps[n] + 1;
        }
        used
    };
    // best[m][s]: best value for STAs m.. given usage state s.
    let mut best = vec![vec![f64::NEG_INFINITY; states]; m_count + 1];
    best[m_count].iter_mut().for_each(|v| *v = 0.0);
    for m in (0..m_count).rev() {
        for s in 0..states {
            let mut used = decode(s);
            let mut v = f64::NEG_INFINITY;
            for n in 0..n_count {
                if used[n] < caps[n] {
                    used[n] += 1;
                    v = v.max(instance.d.get(n, m) + best[m + 1][encode(&used)]);
                    used[n] -= 1;
                }
            }
            best[m][s] = v;
        }
    }
    if best[0][0] == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no assignment serves every STA".into()));
    }
    let mut x = PairingMatrix::zeros(n_count, m_count);
    let mut used = vec![0; n_count];
    for m in 0..m_count {
        let target = best[m][encode(&used)];
        let n = (0..n_count)
            .find(|&n| {
                used[n] < caps[n] && {
                    used[n] += 1;
                    let ok = instance.d.get(n, m) + best[m + 1][encode(&used)] == target;
                    used[n] -= 1;
                    ok
                }
            })
            .ok_or_else(|| Error::Solver("dynamic programme backtrack failed".into()))?;
        used[n] += 1;
        x.set(n, m, true);
    }
    Ok((x, best[0][0]))
}

/// `R~(n) = sum_m X[n][m] r(m)`.
pub fn radio_budget(x: &PairingMatrix, sta_radio_limits: &[u32]) -> Vec<u32> {
    (0..x.n_count)
        .map(|n| (0..x.m_count).filter(|&m| x.get(n, m)).map(|m| sta_radio_limits[m]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(rows: &[Vec<f64>], r: Vec<u32>) -> PairingInstance {
        let d = AverageRateMatrix::from_rows(rows).unwrap();
        let m = d.m_count;
        PairingInstance::new(d, r, vec![1; m]).unwrap()
    }

    #[test]
    fn greedy_is_suboptimal_on_the_cross_instance() {
        let i = inst(&[vec![9.0, 8.0], vec![7.0, 1.0]], vec![1, 1]);
        let g = pair_greedy(&i).unwrap();
        assert_eq!(g.rows(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(objective_value(&g, &i.d).unwrap(), 10.0);
        let o = pair_optimal_lp(&i).unwrap();
        assert_eq!(o.rows(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(objective_value(&o, &i.d).unwrap(), 15.0);
    }

    #[test]
    fn forced_assignment() {
        let i = inst(&[vec![5.0]], vec![1]);
        assert_eq!(pair_greedy(&i).unwrap().rows(), vec![vec![1]]);
        assert_eq!(pair_optimal_lp(&i).unwrap().rows(), vec![vec![1]]);
    }

    #[test]
    fn greedy_ties_prefer_low_indices() {
        let i = inst(&[vec![3.0, 3.0], vec![3.0, 3.0]], vec![1, 1]);
        assert_eq!(pair_greedy(&i).unwrap().rows(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(pair_optimal_lp(&i).unwrap().rows(), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn capacity_shortfall_is_infeasible() {
        let i = inst(&[vec![1.0, 2.0, 3.0]], vec![2]);
        assert!(matches!(pair_greedy(&i), Err(Error::Infeasible(_))));
        assert!(matches!(pair_optimal_lp(&i), Err(Error::Infeasible(_))));
        let relaxed = pair_optimal_lp_with(&i, LpOptions { relaxed: true }).unwrap();
        assert_eq!(relaxed.rows(), vec![vec![0, 1, 1]]);
    }

    #[test]
    fn unconstrained_argmax() {
        let i = inst(&[vec![1.0, 9.0, 2.0], vec![4.0, 3.0, 8.0]], vec![3, 3]);
        let x = pair_optimal_lp(&i).unwrap();
        assert_eq!(x.rows(), vec![vec![0, 1, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn objective_shape_mismatch() {
        let d = AverageRateMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(objective_value(&PairingMatrix::zeros(2, 2), &d).is_err());
        assert_eq!(objective_value(&PairingMatrix::zeros(1, 2), &d).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_agrees_on_cross_instance() {
        let i = inst(&[vec![9.0, 8.0], vec![7.0, 1.0]], vec![1, 1]);
        let (x, v) = pair_exhaustive(&i).unwrap();
        assert_eq!(v, 15.0);
        assert!(x.is_feasible(&i.ap_radio_limits));
    }

    #[test]
    fn budget_sums_sta_radios() {
        let x = PairingMatrix::from_rows(&[vec![1, 0, 1], vec![0, 1, 0]]).unwrap();
        assert_eq!(radio_budget(&x, &[2, 3, 1]), vec![3, 3]);
    }
}
