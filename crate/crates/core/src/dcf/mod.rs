//! Saturated 802.11 DCF throughput (Bianchi fixed point) and a slot-level simulator.

mod sim;

pub use sim::{simulate_dcf_slots, ArrivalMode, DcfSimulator, SimStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ACK frame body in bytes.
pub const ACK_BYTES: u32 = 14;

/// DCF timing and backoff parameters. Durations are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcfParams {
    pub slot_time: f64,
    pub sifs: f64,
    pub difs: f64,
    /// `None` derives EIFS as SIFS + ACK + DIFS for the link rate.
    pub eifs: Option<f64>,
    pub phy_header: f64,
    pub ack_bytes: u32,
    pub payload_bytes: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub max_backoff_stage: u32,
    pub prop_delay: f64,
    pub ack_timeout: f64,
    /// Count a PHY error as a failed attempt for backoff doubling.
    pub phy_error_backoff: bool,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            slot_time: 9e-6,
            sifs: 16e-6,
            difs: 34e-6,
            eifs: None,
            phy_header: 20e-6,
            ack_bytes: ACK_BYTES,
            payload_bytes: 1500,
            cw_min: 16,
            cw_max: 1024,
            max_backoff_stage: 6,
            prop_delay: 0.1e-6,
            ack_timeout: 300e-6,
            phy_error_backoff: true,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("slot_time", self.slot_time),
            ("sifs", self.sifs),
            ("difs", self.difs),
            ("phy_header", self.phy_header),
            ("prop_delay", self.prop_delay),
            ("ack_timeout", self.ack_timeout),
        ];
        for (name, v) in durations {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("dcf.{name} must be a non-negative duration")));
            }
        }
        if let Some(e) = self.eifs {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::Validation("dcf.eifs must be a non-negative duration".into()));
            }
        }
        if self.slot_time <= 0.0 {
            return Err(Error::Validation("dcf.slot_time must be positive".into()));
        }
        if self.cw_min < 1 {
            return Err(Error::Validation("dcf.cw_min must be at least 1".into()));
        }
        let expected = (self.cw_min as u64) << self.max_backoff_stage.min(32);
        if self.max_backoff_stage > 32 || expected != self.cw_max as u64 {
            return Err(Error::Validation(format!(
                "dcf.cw_max must equal 2^m * cw_min ({} * 2^{} != {})",
                self.cw_min, self.max_backoff_stage, self.cw_max
            )));
        }
        Ok(())
    }

    /// Contention window at backoff stage `i`, capped at the last stage.
    pub fn window(&self, stage: u32) -> u32 {
        self.cw_min << stage.min(self.max_backoff_stage)
    }
}

/// Per-slot transmit probability and conditional failure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentionState {
    pub n_contenders: u32,
    pub tau: f64,
    /// Probability that an attempt fails (collision, plus PHY error when it feeds backoff).
    pub p_cond_collision: f64,
}

/// Durations of an idle slot's busy counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirtimeDurations {
    pub t_success: f64,
    pub t_collision: f64,
    pub t_phy_error: f64,
    /// Mean payload airtime E[Pkt].
    pub payload_airtime: f64,
}

const FIXED_POINT_TOL: f64 = 1e-10;
const BISECTION_CAP: usize = 400;

/// Right-hand side of the Bianchi map: the transmit probability implied by `p`.
///
/// Uses the form `2 / (W + 1 + p W sum_{i<m} (2p)^i)`, which is equivalent to
/// the textbook expression and has no removable singularity at `p = 1/2`.
pub fn bianchi_tau_of_p(w: f64, m: u32, p: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 0..m {
        sum += term;
        term *= 2.0 * p;
    }
    2.0 / (w + 1.0 + p * w * sum)
}

fn failure_prob(tau: f64, n: u32, per: f64) -> f64 {
    1.0 - (1.0 - tau).powi(n as i32 - 1) * (1.0 - per)
}

/// Solve the collision-only fixed point (PER does not enter backoff).
pub fn solve_bianchi_fixed_point(params: &DcfParams, n_contenders: u32) -> Result<ContentionState> {
    solve_fixed_point_with_per(params, n_contenders, 0.0)
}

/// Solve the fixed point where a failed attempt has probability
/// `1 - (1 - tau)^(n-1) (1 - per)`.
///
/// With `per = 0` this is the classic model. Bisection on `tau` works because
/// `tau - G(p(tau))` is strictly increasing.
pub fn solve_fixed_point_with_per(
    params: &DcfParams,
    n_contenders: u32,
    per: f64,
) -> Result<ContentionState> {
    if n_contenders == 0 {
        return Err(Error::InvalidInput("at least one contender is required".into()));
    }
    if !(0.0..=1.0).contains(&per) {
        return Err(Error::InvalidInput(format!("per {per} outside [0, 1]")));
    }
    let w = params.cw_min as f64;
    let m = params.max_backoff_stage;
    let residual = |tau: f64| tau - bianchi_tau_of_p(w, m, failure_prob(tau, n_contenders, per));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let r = residual(tau).abs();
    if !(tau > 0.0 && tau < 1.0) || r > FIXED_POINT_TOL {
        return Err(Error::Solver(format!(
            "Bianchi fixed point did not converge for n = {n_contenders} (residual {r:e})"
        )));
    }
    Ok(ContentionState {
        n_contenders,
        tau,
        p_cond_collision: failure_prob(tau, n_contenders, per),
    })
}

/// Success, collision and PHY-error durations at the given PHY rate (bits/s).
pub fn airtime_durations(params: &DcfParams, mcs_rate: f64) -> Result<AirtimeDurations> {
    if !mcs_rate.is_finite() || mcs_rate <= 0.0 {
        return Err(Error::InvalidInput(format!("PHY rate must be positive, got {mcs_rate}")));
    }
    let payload = params.payload_bytes as f64 * 8.0 / mcs_rate;
    let ack = params.phy_header + params.ack_bytes as f64 * 8.0 / mcs_rate;
    let eifs = params.eifs.unwrap_or(params.sifs + ack + params.difs);
    let h = params.phy_header;
    let d = params.prop_delay;
    let t_success = h + payload + params.sifs + d + ack + params.difs + d;
    let t_collision = h + payload + d + eifs;
    Ok(AirtimeDurations {
        t_success,
        t_collision,
        t_phy_error: t_collision,
        payload_airtime: payload,
    })
}

/// Fraction of channel time spent on successfully delivered payload.
pub fn normalized_throughput(
    state: &ContentionState,
    durations: &AirtimeDurations,
    per: f64,
    params: &DcfParams,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&per) {
        return Err(Error::InvalidInput(format!("per {per} outside [0, 1]")));
    }
    let n = state.n_contenders as i32;
    let tau = state.tau;
    let p_tr = 1.0 - (1.0 - tau).powi(n);
    if p_tr <= 0.0 {
        return Ok(0.0);
    }
    let p_s = n as f64 * tau * (1.0 - tau).powi(n - 1) / p_tr;
    let num = (1.0 - per) * p_s * p_tr * durations.payload_airtime;
    let den = (1.0 - p_tr) * params.slot_time
        + p_tr * p_s * (1.0 - per) * durations.t_success
        + p_tr * (1.0 - p_s) * durations.t_collision
        + p_tr * p_s * per * durations.t_phy_error;
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Normalized throughput for `n` saturated contenders at one PHY rate and PER.
///
/// The fixed point includes PER when `params.phy_error_backoff` is set.
pub fn saturation_throughput(params: &DcfParams, n: u32, per: f64, mcs_rate: f64) -> Result<f64> {
    let backoff_per = if params.phy_error_backoff { per } else { 0.0 };
    let state = solve_fixed_point_with_per(params, n, backoff_per)?;
    let durations = airtime_durations(params, mcs_rate)?;
    normalized_throughput(&state, &durations, per, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn picard(params: &DcfParams, n: u32, per: f64) -> f64 {
        let w = params.cw_min as f64;
        let mut tau = 0.05;
        for _ in 0..100_000 {
            let next = bianchi_tau_of_p(w, params.max_backoff_stage, failure_prob(tau, n, per));
            tau = 0.9 * tau + 0.1 * next;
        }
        tau
    }

    #[test]
    fn table_ii_defaults_are_consistent() {
        DcfParams::default().validate().unwrap();
        let bad = DcfParams { cw_max: 1000, ..DcfParams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_station_closed_form() {
        let p = DcfParams::default();
        let s = solve_bianchi_fixed_point(&p, 1).unwrap();
        assert_eq!(s.p_cond_collision, 0.0);
        assert_relative_eq!(s.tau, 2.0 / 17.0, max_relative = 1e-12);
    }

    #[test]
    fn bisection_matches_damped_picard() {
        let p = DcfParams::default();
        for (n, per) in [(10, 0.0), (3, 0.2), (25, 0.1)] {
            let s = solve_fixed_point_with_per(&p, n, per).unwrap();
            assert!((s.tau - picard(&p, n, per)).abs() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn tau_decreases_with_contenders() {
        let p = DcfParams::default();
        let taus: Vec<f64> =
            (2..=50).map(|n| solve_bianchi_fixed_point(&p, n).unwrap().tau).collect();
        assert!(taus.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn durations() {
        let p = DcfParams::default();
        let d = airtime_durations(&p, 68.8e6).unwrap();
        assert_relative_eq!(d.payload_airtime, 12000.0 / 68.8e6);
        assert!((d.payload_airtime - 174.4e-6).abs() < 0.1e-6);
        assert_relative_eq!(d.t_collision, d.t_success - p.prop_delay, max_relative = 1e-12);
        assert_eq!(d.t_phy_error, d.t_collision);

        let empty = DcfParams { payload_bytes: 0, ..p.clone() };
        let d0 = airtime_durations(&empty, 68.8e6).unwrap();
        let ack = p.phy_header + 112.0 / 68.8e6;
        let expected = p.phy_header + p.sifs + p.prop_delay + ack + p.difs + p.prop_delay;
        assert_relative_eq!(d0.t_success, expected, max_relative = 1e-12);
    }

    #[test]
    fn throughput_edges() {
        let p = DcfParams::default();
        let rate = 68.8e6;
        assert_eq!(saturation_throughput(&p, 5, 1.0, rate).unwrap(), 0.0);
        let s = solve_bianchi_fixed_point(&p, 1).unwrap();
        let d = airtime_durations(&p, rate).unwrap();
        let closed = s.tau * d.payload_airtime / ((1.0 - s.tau) * p.slot_time + s.tau * d.t_success);
        assert_relative_eq!(normalized_throughput(&s, &d, 0.0, &p).unwrap(), closed, max_relative = 1e-12);
        assert!(normalized_throughput(&s, &d, 1.5, &p).is_err());
    }
}
