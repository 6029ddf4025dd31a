//! Channel data rates: PHY abstraction composed with the DCF throughput model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dcf::{saturation_throughput, DcfParams};
use crate::error::{Error, Result};
use crate::phy::{
    db_to_linear, default_per_curve, eesm_effective_snr, linear_to_db, mcs_data_rate, EesmParams,
    McsEntry, PerCurve, SubcarrierSinrGrid, T_DFT_HE, T_GI_DEFAULT,
};

/// Frequency band of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "2.4")]
    Ghz2_4,
    #[serde(rename = "5")]
    Ghz5,
    #[serde(rename = "6")]
    Ghz6,
}

impl Band {
    pub fn allowed_bandwidths(self) -> &'static [u32] {
        match self {
            Band::Ghz2_4 => &[20, 40],
            Band::Ghz5 => &[20, 40, 80],
            Band::Ghz6 => &[20, 40, 80, 160],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Ghz2_4 => "2.4",
            Band::Ghz5 => "5",
            Band::Ghz6 => "6",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub band: Band,
    pub bandwidth_mhz: u32,
    pub mcs: u8,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.band.allowed_bandwidths().contains(&self.bandwidth_mhz) {
            return Err(Error::Validation(format!(
                "{} MHz is not available on the {} GHz band",
                self.bandwidth_mhz,
                self.band.label()
            )));
        }
        crate::phy::modulation(self.mcs).map(|_| ()).map_err(|e| Error::Validation(e.to_string()))
    }
}

/// Where PER curves come from, per MCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerModel {
    /// Gap above the Shannon threshold for the built-in logistic midpoints.
    pub gap_db: f64,
    pub slope: f64,
    /// Fall back to the built-in logistic family for MCS without an explicit curve.
    pub builtin: bool,
    pub curves: BTreeMap<u8, PerCurve>,
}

impl Default for PerModel {
    fn default() -> Self {
        Self {
            gap_db: 1.0,
            slope: 1.0,
            builtin: true,
            curves: BTreeMap::new(),
        }
    }
}

impl PerModel {
    pub fn curve(&self, mcs: u8) -> Result<PerCurve> {
        if let Some(c) = self.curves.get(&mcs) {
            return Ok(c.clone());
        }
        if self.builtin {
            default_per_curve(mcs, self.gap_db, self.slope)
        } else {
            Err(Error::Config(format!("no PER curve configured for MCS {mcs}")))
        }
    }
}

/// Per-link SNR in dB for every `(f, n, m)`; `None` marks an out-of-range link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTensor {
    f_count: usize,
    n_count: usize,
    m_count: usize,
    values: Vec<Option<f64>>,
}

impl SnrTensor {
    pub fn new(f_count: usize, n_count: usize, m_count: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != f_count * n_count * m_count {
            return Err(Error::InvalidInput(format!(
                "SNR tensor needs {} entries, got {}",
                f_count * n_count * m_count,
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("SNR values must be finite".into()));
        }
        Ok(Self { f_count, n_count, m_count, values })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.f_count, self.n_count, self.m_count)
    }

    fn idx(&self, f: usize, n: usize, m: usize) -> usize {
        (f * self.n_count + n) * self.m_count + m
    }

    pub fn get(&self, f: usize, n: usize, m: usize) -> Option<f64> {
        self.values[self.idx(f, n, m)]
    }

    pub fn set(&mut self, f: usize, n: usize, m: usize, v: Option<f64>) {
        let i = self.idx(f, n, m);
        self.values[i] = v;
    }

    /// Mean SNR over in-range links.
    pub fn mean_in_range(&self) -> Option<f64> {
        let (s, k) = self.values.iter().flatten().fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
        (k > 0).then(|| s / k as f64)
    }

    /// Add `db` to every in-range link.
    pub fn shifted(&self, db: f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut().flatten() {
            *v += db;
        }
        out
    }

    /// Shift so the in-range mean equals `target_db`.
    pub fn with_mean(&self, target_db: f64) -> Self {
        match self.mean_in_range() {
            Some(mean) => self.shifted(target_db - mean),
            None => self.clone(),
        }
    }

    pub fn map_in_range(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut().flatten() {
            *v = f(*v);
        }
        out
    }
}

/// Everything needed to turn link SNRs into channel data rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub channels: Vec<ChannelSpec>,
    pub per: PerModel,
    pub eesm_beta: f64,
    pub eesm_beta_per_mcs: BTreeMap<u8, f64>,
    /// Seconds.
    pub t_dft: f64,
    /// Seconds.
    pub t_gi: f64,
    pub n_streams: u32,
    pub dcf: DcfParams,
    /// Multiply by PER instead of relying on the success factor inside Tpt.
    pub literal_per_factor: bool,
}

impl RateModel {
    pub fn new(channels: Vec<ChannelSpec>) -> Self {
        Self {
            channels,
            per: PerModel::default(),
            eesm_beta: 1.0,
            eesm_beta_per_mcs: BTreeMap::new(),
            t_dft: T_DFT_HE,
            t_gi: T_GI_DEFAULT,
            n_streams: 1,
            dcf: DcfParams::default(),
            literal_per_factor: false,
        }
    }

    pub fn eesm_params(&self, mcs: u8) -> EesmParams {
        EesmParams {
            beta: self.eesm_beta_per_mcs.get(&mcs).copied().unwrap_or(self.eesm_beta),
        }
    }

    /// PHY rate of channel `f` when it runs `mcs`.
    pub fn phy_rate(&self, f: usize, mcs: u8) -> Result<f64> {
        let ch = &self.channels[f];
        let entry = McsEntry::new(mcs, ch.bandwidth_mhz, self.t_dft, self.t_gi)?;
        Ok(mcs_data_rate(&entry, self.n_streams))
    }

    /// Rate of one link on channel `f` given its SINR grid and contender count.
    pub fn link_rate(
        &self,
        f: usize,
        mcs: u8,
        grid: &SubcarrierSinrGrid,
        n_contenders: u32,
    ) -> Result<f64> {
        let esnr = eesm_effective_snr(grid, self.eesm_params(mcs))?;
        let per = self.per.curve(mcs)?.per_lookup(linear_to_db(esnr));
        let rate = self.phy_rate(f, mcs)?;
        let tpt = saturation_throughput(&self.dcf, n_contenders.max(1), per, rate)?;
        Ok(channel_rate(per, tpt, rate, self.literal_per_factor))
    }
}

/// `Tpt * rate`, or `per * Tpt * rate` when `literal` is set.
///
/// Tpt already carries the `(1 - per)` success factor, so the default form
/// does not apply PER a second time.
pub fn channel_rate(per: f64, tpt: f64, mcs_rate: f64, literal: bool) -> f64 {
    if literal {
        per * tpt * mcs_rate
    } else {
        tpt * mcs_rate
    }
}

/// `C[f][n][m]` in bits/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTensor {
    pub f_count: usize,
    pub n_count: usize,
    pub m_count: usize,
    values: Vec<f64>,
}

impl RateTensor {
    pub fn new(f_count: usize, n_count: usize, m_count: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != f_count * n_count * m_count {
            return Err(Error::InvalidInput(format!(
                "rate tensor needs {} entries, got {}",
                f_count * n_count * m_count,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("rates must be finite and non-negative".into()));
        }
        Ok(Self { f_count, n_count, m_count, values })
    }

    pub fn zeros(f_count: usize, n_count: usize, m_count: usize) -> Self {
        Self { f_count, n_count, m_count, values: vec![0.0; f_count * n_count * m_count] }
    }

    pub fn get(&self, f: usize, n: usize, m: usize) -> f64 {
        self.values[(f * self.n_count + n) * self.m_count + m]
    }

    pub fn set(&mut self, f: usize, n: usize, m: usize, v: f64) {
        self.values[(f * self.n_count + n) * self.m_count + m] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flatten to `F x |E|` with edge `e = n * M + m`.
    pub fn to_edges(&self) -> EdgeRateMatrix {
        EdgeRateMatrix {
            f_count: self.f_count,
            n_count: self.n_count,
            m_count: self.m_count,
            values: self.values.clone(),
        }
    }
}

/// `C[f][e]` with edge index `e = n * M + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRateMatrix {
    pub f_count: usize,
    pub n_count: usize,
    pub m_count: usize,
    values: Vec<f64>,
}

impl EdgeRateMatrix {
    pub fn edge_count(&self) -> usize {
        self.n_count * self.m_count
    }

    pub fn edge_index(&self, n: usize, m: usize) -> usize {
        n * self.m_count + m
    }

    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        (e / self.m_count, e % self.m_count)
    }

    pub fn get(&self, f: usize, e: usize) -> f64 {
        self.values[f * self.edge_count() + e]
    }

    pub fn to_tensor(&self) -> RateTensor {
        RateTensor {
            f_count: self.f_count,
            n_count: self.n_count,
            m_count: self.m_count,
            values: self.values.clone(),
        }
    }

    /// Mean over all edges of channel `f`.
    pub fn channel_mean(&self, f: usize) -> f64 {
        let e = self.edge_count();
        if e == 0 {
            return 0.0;
        }
        self.values[f * e..(f + 1) * e].iter().sum::<f64>() / e as f64
    }
}

/// `D[n][m]`, the mean of the rate tensor over channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRateMatrix {
    pub n_count: usize,
    pub m_count: usize,
    values: Vec<f64>,
}

impl AverageRateMatrix {
    pub fn new(n_count: usize, m_count: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_count * m_count {
            return Err(Error::InvalidInput(format!(
                "rate matrix needs {} entries, got {}",
                n_count * m_count,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rates must be finite".into()));
        }
        Ok(Self { n_count, m_count, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged rate matrix".into()));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.m_count + m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            n_count: self.n_count,
            m_count: self.m_count,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

/// Build `C` from link SNRs and per-channel contender counts.
///
/// Scalar SNRs expand to a uniform SINR grid, so the effective SNR equals the
/// link SNR. `mcs_override` replaces every channel's MCS.
pub fn build_rate_tensor(
    model: &RateModel,
    snr: &SnrTensor,
    counts: &[u32],
    mcs_override: Option<u8>,
) -> Result<RateTensor> {
    let (f_count, n_count, m_count) = snr.shape();
    if f_count != model.channels.len() || counts.len() != f_count {
        return Err(Error::InvalidInput(format!(
            "{} channels configured but SNR tensor has {f_count} and {} contender counts",
            model.channels.len(),
            counts.len()
        )));
    }
    let mut out = RateTensor::zeros(f_count, n_count, m_count);
    for f in 0..f_count {
        let mcs = mcs_override.unwrap_or(model.channels[f].mcs);
        // Make a missing curve a configuration error even when every link is out of range.
        model.per.curve(mcs)?;
        for n in 0..n_count {
            for m in 0..m_count {
                if let Some(db) = snr.get(f, n, m) {
                    let grid = SubcarrierSinrGrid::uniform(db_to_linear(db), 1, 1)?;
                    out.set(f, n, m, model.link_rate(f, mcs, &grid, counts[f])?);
                }
            }
        }
    }
    Ok(out)
}

/// Unweighted mean over the channel axis.
pub fn average_over_channels(tensor: &RateTensor) -> AverageRateMatrix {
    let (f_count, n_count, m_count) = (tensor.f_count, tensor.n_count, tensor.m_count);
    let mut values = vec![0.0; n_count * m_count];
    for f in 0..f_count {
        for n in 0..n_count {
            for m in 0..m_count {
                values[n * m_count + m] += tensor.get(f, n, m);
            }
        }
    }
    if f_count > 0 {
        for v in &mut values {
            *v /= f_count as f64;
        }
    }
    AverageRateMatrix { n_count, m_count, values }
}
