use serde::{Deserialize, Serialize};

use super::PairingInstance;
use crate::error::{Error, Result};
use crate::rates::RateTensor;

/// Largest `N * M` the exhaustive joint search accepts.
pub const MMKP_MAX_EDGES: usize = 16;
/// Largest channel count the exhaustive joint search accepts.
pub const MMKP_MAX_CHANNELS: usize = 3;

/// Best joint association and channel selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    /// Selected `(f, n, m)` links.
    pub links: Vec<(usize, usize, usize)>,
    /// Bits/s.
    pub objective: f64,
    /// Complete assignments visited.
    pub leaves: u64,
}

#[derive(Clone, Copy)]
struct Choice {
    ap: usize,
    mask: u32,
    size: u32,
    value: f64,
}

struct Search<'a> {
    options: Vec<Vec<Choice>>,
    limits: &'a [u32],
    used: Vec<u32>,
    current: Vec<usize>,
    value: f64,
    best_value: f64,
    best: Vec<usize>,
    leaves: u64,
}

impl Search<'_> {
    fn visit(&mut self, m: usize) {
        if m == self.options.len() {
            self.leaves += 1;
            if self.value > self.best_value {
                self.best_value = self.value;
                self.best.clone_from(&self.current);
            }
            return;
        }
        for k in 0..self.options[m].len() {
            let c = self.options[m][k];
            if c.size > 0 && self.used[c.ap] + c.size > self.limits[c.ap] {
                continue;
            }
            self.used[c.ap] += c.size;
            self.value += c.value;
            self.current[m] = k;
            self.visit(m + 1);
            self.value -= c.value;
            self.used[c.ap] -= c.size;
        }
    }
}

/// Exhaustive search over joint `(AP, channel set)` choices per STA.
///
/// Every STA either stays unserved or picks one AP and between 1 and `r(m)`
/// channels; each AP carries at most `R(n)` links in total. No bounding is
/// applied, so run time grows exponentially with the number of STAs.
pub fn solve_joint_mmkp_bruteforce(tensor: &RateTensor, instance: &PairingInstance) -> Result<JointSolution> {
    instance.validate()?;
    let (f_count, n_count, m_count) = (tensor.f_count, tensor.n_count, tensor.m_count);
    if n_count != instance.n_aps() || m_count != instance.m_stas() {
        return Err(Error::InvalidInput("tensor and instance disagree on N or M".into()));
    }
    if n_count * m_count > MMKP_MAX_EDGES || f_count > MMKP_MAX_CHANNELS || f_count == 0 {
        return Err(Error::SizeLimit(format!(
            "N*M = {} (max {MMKP_MAX_EDGES}), F = {f_count} (1..={MMKP_MAX_CHANNELS})",
            n_count * m_count
        )));
    }
    let options: Vec<Vec<Choice>> = (0..m_count)
        .map(|m| {
            let r = instance.sta_radio_limits[m];
            let mut opts = vec![Choice { ap: 0, mask: 0, size: 0, value: 0.0 }];
            for n in 0..n_count {
                for mask in 1u32..(1 << f_count) {
                    let size = mask.count_ones();
                    if size <= r {
                        let value = (0..f_count).filter(|f| mask >> f & 1 == 1).map(|f| tensor.get(f, n, m)).sum();
                        opts.push(Choice { ap: n, mask, size, value });
                    }
                }
            }
            opts
        })
        .collect();
    let mut s = Search {
        options,
        limits: &instance.ap_radio_limits,
        used: vec![0; n_count],
        current: vec![0; m_count],
        value: 0.0,
        best_value: 0.0,
        best: vec![0; m_count],
        leaves: 0,
    };
    s.visit(0);
    let mut links = Vec::new();
    for (m, &k) in s.best.iter().enumerate() {
        let c = s.options[m][k];
        for f in 0..f_count {
            if c.mask >> f & 1 == 1 {
                links.push((f, c.ap, m));
            }
        }
    }
    links.sort_unstable();
    Ok(JointSolution { links, objective: s.best_value, leaves: s.leaves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::AverageRateMatrix;

    fn instance(n: usize, m: usize, big_r: u32, r: u32) -> PairingInstance {
        PairingInstance::new(AverageRateMatrix::new(n, m, vec![0.0; n * m]).unwrap(), vec![big_r; n], vec![r; m])
            .unwrap()
    }

    #[test]
    fn single_link() {
        let t = RateTensor::new(1, 1, 1, vec![10.0]).unwrap();
        let s = solve_joint_mmkp_bruteforce(&t, &instance(1, 1, 1, 1)).unwrap();
        assert_eq!(s.objective, 10.0);
        assert_eq!(s.links, vec![(0, 0, 0)]);
    }

    #[test]
    fn zero_tensor() {
        let t = RateTensor::zeros(2, 2, 2);
        assert_eq!(solve_joint_mmkp_bruteforce(&t, &instance(2, 2, 2, 2)).unwrap().objective, 0.0);
    }

    #[test]
    fn respects_ap_budget_and_single_ap() {
        // One AP with one link: only the better STA gets it.
        let t = RateTensor::new(2, 1, 2, vec![5.0, 7.0, 6.0, 1.0]).unwrap();
        let s = solve_joint_mmkp_bruteforce(&t, &instance(1, 2, 1, 2)).unwrap();
        assert_eq!(s.objective, 7.0);
        // Two APs: a STA may not mix APs across channels.
        let t = RateTensor::new(2, 2, 1, vec![10.0, 0.0, 0.0, 10.0]).unwrap();
        let s = solve_joint_mmkp_bruteforce(&t, &instance(2, 1, 2, 2)).unwrap();
        assert_eq!(s.objective, 10.0);
    }

    #[test]
    fn size_guard() {
        let t = RateTensor::zeros(4, 1, 1);
        assert!(matches!(solve_joint_mmkp_bruteforce(&t, &instance(1, 1, 1, 1)), Err(Error::SizeLimit(_))));
        let t = RateTensor::zeros(1, 3, 6);
        assert!(matches!(solve_joint_mmkp_bruteforce(&t, &instance(3, 6, 1, 1)), Err(Error::SizeLimit(_))));
    }
}
