//! PHY abstraction: SINR, EESM effective SNR, PER curves and MCS data rates.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convert decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to decibels.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Received signal, inter-stream interference and noise for one subcarrier/stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrComponents {
    pub signal: f64,
    pub inter_stream_interference: f64,
    pub noise: f64,
}

/// `S / (I + N)` in linear scale.
pub fn sinr(c: &SinrComponents) -> Result<f64> {
    let all = [c.signal, c.inter_stream_interference, c.noise];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "SINR components must be finite and non-negative, got {c:?}"
        )));
    }
    if c.noise <= 0.0 {
        return Err(Error::InvalidInput("noise power must be positive".into()));
    }
    Ok(c.signal / (c.inter_stream_interference + c.noise))
}

/// Linear SINR values indexed by subcarrier (rows) and spatial stream (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierSinrGrid {
    values: Vec<f64>,
    n_sc: usize,
    n_ss: usize,
}

impl SubcarrierSinrGrid {
    /// Row-major `n_sc x n_ss` grid.
    pub fn new(values: Vec<f64>, n_sc: usize, n_ss: usize) -> Result<Self> {
        if n_sc == 0 || n_ss == 0 {
            return Err(Error::InvalidInput("SINR grid must be non-empty".into()));
        }
        if values.len() != n_sc * n_ss {
            return Err(Error::InvalidInput(format!(
                "SINR grid has {} values, expected {n_sc}x{n_ss}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "SINR values must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { values, n_sc, n_ss })
    }

    /// Grid where every subcarrier and stream sees the same linear SINR.
    pub fn uniform(value: f64, n_sc: usize, n_ss: usize) -> Result<Self> {
        Self::new(vec![value; n_sc * n_ss], n_sc, n_ss)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_sc
    }

    pub fn n_streams(&self) -> usize {
        self.n_ss
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, subcarrier: usize, stream: usize) -> f64 {
        self.values[subcarrier * self.n_ss + stream]
    }
}

/// EESM tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EesmParams {
    pub beta: f64,
}

impl Default for EesmParams {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

/// Exponential effective SNR mapping, linear in and out.
///
/// Evaluated in shifted log-sum-exp form so large `gamma / beta` ratios do
/// not underflow.
pub fn eesm_effective_snr(grid: &SubcarrierSinrGrid, params: EesmParams) -> Result<f64> {
    let beta = params.beta;
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidInput(format!("EESM beta must be positive, got {beta}")));
    }
    let v = grid.values();
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean = v.iter().map(|g| (-(g - lo) / beta).exp()).sum::<f64>() / v.len() as f64;
    let eff = lo - beta * mean.ln();
    Ok(eff.clamp(lo, hi))
}

/// Packet error rate as a function of effective SNR (dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerCurve {
    /// Linear interpolation through `(esnr_db, per)` points, clamped at the ends.
    Table { points: Vec<(f64, f64)> },
    /// `1 / (1 + exp(slope * (esnr_db - midpoint_db)))`.
    Logistic { midpoint_db: f64, slope: f64 },
}

impl PerCurve {
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let curve = PerCurve::Table { points };
        curve.validate()?;
        Ok(curve)
    }

    pub fn logistic(midpoint_db: f64, slope: f64) -> Result<Self> {
        let curve = PerCurve::Logistic { midpoint_db, slope };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PerCurve::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidInput("PER table has no points".into()));
                }
                for (i, &(x, p)) in points.iter().enumerate() {
                    if !x.is_finite() || !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidInput(format!(
                            "PER table row {}: ({x}, {p}) out of range",
                            i + 1
                        )));
                    }
                    if i > 0 {
                        let (px, pp) = points[i - 1];
                        if x <= px {
                            return Err(Error::InvalidInput(format!(
                                "PER table row {}: esnr_db must be strictly increasing",
                                i + 1
                            )));
                        }
                        if p > pp {
                            return Err(Error::InvalidInput(format!(
                                "PER table row {}: per must be non-increasing",
                                i + 1
                            )));
                        }
                    }
                }
                Ok(())
            }
            PerCurve::Logistic { midpoint_db, slope } => {
                if !midpoint_db.is_finite() || !slope.is_finite() || *slope <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "logistic PER needs finite midpoint and positive slope, got ({midpoint_db}, {slope})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Parse a CSV with header `esnr_db,per`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            esnr_db: f64,
            per: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Config(format!("PER table: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["esnr_db", "per"] {
            return Err(Error::Config(format!(
                "PER table header must be `esnr_db,per`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Config(format!("PER table row {}: {e}", i + 1)))?;
            points.push((row.esnr_db, row.per));
        }
        PerCurve::table(points).map_err(|e| Error::Config(e.to_string()))
    }

    /// PER at the given effective SNR in dB.
    pub fn per_lookup(&self, esnr_db: f64) -> f64 {
        match self {
            PerCurve::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if esnr_db <= first.0 {
                    return first.1;
                }
                if esnr_db >= last.0 {
                    return last.1;
                }
                let hi = points.partition_point(|p| p.0 < esnr_db);
                let (x1, y1) = points[hi];
                if x1 == esnr_db {
                    return y1;
                }
                let (x0, y0) = points[hi - 1];
                y0 + (y1 - y0) * (esnr_db - x0) / (x1 - x0)
            }
            PerCurve::Logistic { midpoint_db, slope } => {
                let z = slope * (esnr_db - midpoint_db);
                // exp overflows to inf for large z, which still yields 0.
                (1.0 / (1.0 + z.exp())).clamp(0.0, 1.0)
            }
        }
    }
}

/// Modulation, coding rate and OFDM numerology for one MCS at one bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub mcs_index: u8,
    pub n_sd: u32,
    pub n_bpscs: u32,
    pub coding_rate: f64,
    /// Seconds.
    pub t_dft: f64,
    /// Seconds.
    pub t_gi: f64,
}

/// HE/EHT symbol duration without guard interval.
pub const T_DFT_HE: f64 = 12.8e-6;
/// VHT symbol duration without guard interval.
pub const T_DFT_VHT: f64 = 3.2e-6;
pub const T_GI_DEFAULT: f64 = 0.8e-6;

/// `(bits per subcarrier, coding-rate numerator, denominator)` for MCS 0-11.
const MCS_TABLE: [(u32, u32, u32); 12] = [
    (1, 1, 2),
    (2, 1, 2),
    (2, 3, 4),
    (4, 1, 2),
    (4, 3, 4),
    (6, 2, 3),
    (6, 3, 4),
    (6, 5, 6),
    (8, 3, 4),
    (8, 5, 6),
    (10, 3, 4),
    (10, 5, 6),
];

/// Data subcarriers of a full-bandwidth HE resource unit.
pub fn n_sd_for_bandwidth(bandwidth_mhz: u32) -> Result<u32> {
    match bandwidth_mhz {
        20 => Ok(234),
        40 => Ok(468),
        80 => Ok(980),
        160 => Ok(1960),
        other => Err(Error::InvalidInput(format!("unsupported bandwidth {other} MHz"))),
    }
}

/// Bits per subcarrier and coding rate of an MCS index.
pub fn modulation(mcs: u8) -> Result<(u32, f64)> {
    MCS_TABLE
        .get(mcs as usize)
        .map(|&(b, n, d)| (b, n as f64 / d as f64))
        .ok_or_else(|| Error::InvalidInput(format!("MCS {mcs} outside 0..=11")))
}

impl McsEntry {
    /// Entry for `mcs` at `bandwidth_mhz` with the given symbol timing.
    pub fn new(mcs: u8, bandwidth_mhz: u32, t_dft: f64, t_gi: f64) -> Result<Self> {
        let (n_bpscs, coding_rate) = modulation(mcs)?;
        let entry = Self {
            mcs_index: mcs,
            n_sd: n_sd_for_bandwidth(bandwidth_mhz)?,
            n_bpscs,
            coding_rate,
            t_dft,
            t_gi,
        };
        entry.validate()?;
        Ok(entry)
    }

    /// Entry with 11ax symbol timing (12.8 us + 0.8 us guard interval).
    pub fn he(mcs: u8, bandwidth_mhz: u32) -> Result<Self> {
        Self::new(mcs, bandwidth_mhz, T_DFT_HE, T_GI_DEFAULT)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_sd >= 1
            && [1, 2, 4, 6, 8, 10].contains(&self.n_bpscs)
            && self.coding_rate > 0.0
            && self.coding_rate <= 1.0
            && self.t_dft > 0.0
            && self.t_gi >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid MCS entry {self:?}")))
        }
    }
}

/// PHY data rate in bits/s.
pub fn mcs_data_rate(entry: &McsEntry, n_streams: u32) -> f64 {
    n_streams as f64 * entry.n_sd as f64 * entry.n_bpscs as f64 * entry.coding_rate
        / (entry.t_dft + entry.t_gi)
}

/// Default logistic PER curve for an MCS.
///
/// The midpoint sits `gap_db` above the Shannon SNR needed for the MCS
/// spectral efficiency, `10 log10(2^(bits * rate) - 1)`.
pub fn default_per_curve(mcs: u8, gap_db: f64, slope: f64) -> Result<PerCurve> {
    let (bits, rate) = modulation(mcs)?;
    let efficiency = bits as f64 * rate;
    let midpoint = linear_to_db(2f64.powf(efficiency) - 1.0) + gap_db;
    PerCurve::logistic(midpoint, slope)
}
