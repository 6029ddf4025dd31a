use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcf::DcfParams;
use crate::error::{Error, Result};
use crate::phy::PerCurve;
use crate::rates::{ChannelSpec, PerModel, RateModel, SnrTensor};

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("scenario_3ap_15sta", include_str!("../../fixtures/scenario_3ap_15sta.toml")),
    ("scenario_2ap_joint", include_str!("../../fixtures/scenario_2ap_joint.toml")),
    ("scenario_slo", include_str!("../../fixtures/scenario_slo.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSpec {
    pub id: String,
    /// `R(n)`.
    pub radios: u32,
    /// Channel used in single-link operation.
    pub slo_channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaSpec {
    pub id: String,
    /// `r(m)`.
    pub radios: u32,
}

/// How one link's SNR is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkSpec {
    OutOfRange,
    Db(f64),
    /// Drawn uniformly from the scenario's random range.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSnr {
    pub low_db: f64,
    pub high_db: f64,
}

/// A validated network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub ewma_horizon: u32,
    pub slots_per_period: u32,
    pub monte_carlo_rounds: u32,
    /// Half-width of the per-round uniform SNR perturbation in Monte Carlo runs.
    pub snr_jitter_db: f64,
    pub aps: Vec<ApSpec>,
    pub stas: Vec<StaSpec>,
    pub model: RateModel,
    pub random_snr: Option<RandomSnr>,
    /// `F x N x M`, same layout as the rate tensor.
    links: Vec<LinkSpec>,
}

impl Scenario {
    pub fn f_count(&self) -> usize {
        self.model.channels.len()
    }

    pub fn n_count(&self) -> usize {
        self.aps.len()
    }

    pub fn m_count(&self) -> usize {
        self.stas.len()
    }

    pub fn link(&self, f: usize, n: usize, m: usize) -> LinkSpec {
        self.links[(f * self.n_count() + n) * self.m_count() + m]
    }

    pub fn ap_radio_limits(&self) -> Vec<u32> {
        self.aps.iter().map(|a| a.radios).collect()
    }

    pub fn sta_radio_limits(&self) -> Vec<u32> {
        self.stas.iter().map(|s| s.radios).collect()
    }

    /// Link SNRs with random entries drawn from `seed`.
    pub fn snr_tensor(&self, seed: u64) -> SnrTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = self
            .links
            .iter()
            .map(|l| match *l {
                LinkSpec::OutOfRange => None,
                LinkSpec::Db(v) => Some(v),
                LinkSpec::Random => {
                    let r = self.random_snr.expect("validated: random links need a range");
                    Some(if r.high_db > r.low_db { rng.gen_range(r.low_db..r.high_db) } else { r.low_db })
                }
            })
            .collect();
        SnrTensor::new(self.f_count(), self.n_count(), self.m_count(), values)
            .expect("validated: tensor shape matches the scenario")
    }

    /// Link SNRs for the scenario's own seed.
    pub fn snr(&self) -> SnrTensor {
        self.snr_tensor(self.seed)
    }

    /// The same network with only the first `m` STAs.
    pub fn with_first_stas(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m_count() {
            return Err(Error::InvalidInput(format!("cannot keep {m} of {} STAs", self.m_count())));
        }
        let (f_count, n_count, m_old) = (self.f_count(), self.n_count(), self.m_count());
        let mut links = Vec::with_capacity(f_count * n_count * m);
        for f in 0..f_count {
            for n in 0..n_count {
                links.extend_from_slice(&self.links[(f * n_count + n) * m_old..][..m]);
            }
        }
        Ok(Self { stas: self.stas[..m].to_vec(), links, ..self.clone() })
    }

    /// A bundled scenario by name.
    pub fn bundled(name: &str) -> Result<Self> {
        let text = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::Config(format!("no bundled scenario named {name:?}")))?;
        Self::from_toml_str(text, None)
    }

    /// Parse and validate a TOML document. Relative PER table paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve(base_dir)
    }
}

/// Load a scenario file, or a bundled scenario when `path` names one and no
/// such file exists.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    if !path.exists() {
        if let Some(name) = path.to_str() {
            if BUNDLED.iter().any(|(n, _)| *n == name) {
                return Scenario::bundled(name);
            }
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Scenario::from_toml_str(&text, path.parent())
        .map_err(|e| e.context(path.display()))
}

fn default_horizon() -> u32 {
    100
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_horizon")]
    ewma_horizon: u32,
    #[serde(default = "default_horizon")]
    slots_per_period: u32,
    #[serde(default = "default_one")]
    monte_carlo_rounds: u32,
    #[serde(default)]
    snr_jitter_db: f64,
    #[serde(default)]
    literal_per_factor: bool,
    #[serde(default)]
    channels: Vec<ChannelSpec>,
    #[serde(default)]
    aps: Vec<RawAp>,
    #[serde(default)]
    stas: Vec<RawSta>,
    random_snr: Option<RandomSnr>,
    #[serde(default)]
    per: RawPer,
    #[serde(default)]
    eesm: RawEesm,
    #[serde(default)]
    phy: RawPhy,
    #[serde(default)]
    dcf: DcfParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAp {
    id: String,
    radios: u32,
    slo_channel: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSta {
    id: String,
    radios: u32,
    #[serde(default)]
    snr_db: BTreeMap<String, SnrValue>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SnrValue {
    Scalar(SnrEntry),
    PerChannel(Vec<SnrEntry>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SnrEntry {
    Db(f64),
    Tag(String),
}

impl SnrEntry {
    fn to_link(&self, sta: &str, ap: &str) -> Result<LinkSpec> {
        match self {
            SnrEntry::Db(v) if v.is_finite() => Ok(LinkSpec::Db(*v)),
            SnrEntry::Db(v) => Err(Error::Validation(format!("stas.{sta}.snr_db.{ap}: {v} is not finite"))),
            SnrEntry::Tag(t) if t == "oor" => Ok(LinkSpec::OutOfRange),
            SnrEntry::Tag(t) => Err(Error::Validation(format!(
                "stas.{sta}.snr_db.{ap}: expected a number or \"oor\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPer {
    gap_db: f64,
    slope: f64,
    builtin: bool,
    /// MCS index to CSV path.
    tables: BTreeMap<String, PathBuf>,
    logistic: BTreeMap<String, RawLogistic>,
}

impl Default for RawPer {
    fn default() -> Self {
        let d = PerModel::default();
        Self { gap_db: d.gap_db, slope: d.slope, builtin: d.builtin, tables: BTreeMap::new(), logistic: BTreeMap::new() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLogistic {
    midpoint_db: f64,
    slope: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEesm {
    beta: f64,
    per_mcs: BTreeMap<String, f64>,
}

impl Default for RawEesm {
    fn default() -> Self {
        Self { beta: 1.0, per_mcs: BTreeMap::new() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPhy {
    t_dft_us: f64,
    t_gi_us: f64,
    streams: u32,
}

impl Default for RawPhy {
    fn default() -> Self {
        Self { t_dft_us: 12.8, t_gi_us: 0.8, streams: 1 }
    }
}

fn parse_mcs(key: &str, field: &str) -> Result<u8> {
    let mcs: u8 = key
        .parse()
        .map_err(|_| Error::Validation(format!("{field}: key {key:?} is not an MCS index")))?;
    crate::phy::modulation(mcs).map_err(|e| Error::Validation(format!("{field}: {e}")))?;
    Ok(mcs)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl RawScenario {
    fn resolve(self, base_dir: Option<&Path>) -> Result<Scenario> {
        if self.channels.is_empty() {
            return Err(invalid("channels: at least one channel is required"));
        }
        if self.aps.is_empty() {
            return Err(invalid("aps: at least one AP is required"));
        }
        if self.stas.is_empty() {
            return Err(invalid("stas: at least one STA is required"));
        }
        for (f, ch) in self.channels.iter().enumerate() {
            ch.validate().map_err(|e| invalid(format!("channels[{f}]: {e}")))?;
        }
        if self.ewma_horizon == 0 || self.slots_per_period == 0 || self.monte_carlo_rounds == 0 {
            return Err(invalid("ewma_horizon, slots_per_period and monte_carlo_rounds must be at least 1"));
        }
        if !self.snr_jitter_db.is_finite() || self.snr_jitter_db < 0.0 {
            return Err(invalid("snr_jitter_db must be a non-negative number"));
        }
        if let Some(r) = self.random_snr {
            if !(r.low_db.is_finite() && r.high_db.is_finite() && r.low_db <= r.high_db) {
                return Err(invalid("random_snr: need finite low_db <= high_db"));
            }
        }
        self.dcf.validate()?;

        let f_count = self.channels.len();
        let mut seen = HashSet::new();
        for id in self.aps.iter().map(|a| &a.id).chain(self.stas.iter().map(|s| &s.id)) {
            if !seen.insert(id.as_str()) {
                return Err(invalid(format!("duplicate device id {id:?}")));
            }
        }
        let mut aps = Vec::with_capacity(self.aps.len());
        for (n, a) in self.aps.iter().enumerate() {
            if a.radios == 0 {
                return Err(invalid(format!("aps.{}: radios must be at least 1", a.id)));
            }
            let slo_channel = a.slo_channel.unwrap_or(n % f_count);
            if slo_channel >= f_count {
                return Err(invalid(format!("aps.{}: slo_channel {slo_channel} out of range", a.id)));
            }
            aps.push(ApSpec { id: a.id.clone(), radios: a.radios, slo_channel });
        }

        let (n_count, m_count) = (self.aps.len(), self.stas.len());
        let fallback = if self.random_snr.is_some() { LinkSpec::Random } else { LinkSpec::OutOfRange };
        let mut links = vec![fallback; f_count * n_count * m_count];
        let mut stas = Vec::with_capacity(m_count);
        for (m, s) in self.stas.iter().enumerate() {
            if s.radios == 0 {
                return Err(invalid(format!("stas.{}: radios must be at least 1", s.id)));
            }
            for (ap_id, value) in &s.snr_db {
                let n = self
                    .aps
                    .iter()
                    .position(|a| &a.id == ap_id)
                    .ok_or_else(|| invalid(format!("stas.{}.snr_db: unknown AP {ap_id:?}", s.id)))?;
                let per_channel: Vec<SnrEntry> = match value {
                    SnrValue::Scalar(e) => vec![e.clone(); f_count],
                    SnrValue::PerChannel(v) if v.len() == f_count => v.clone(),
                    SnrValue::PerChannel(v) => {
                        return Err(invalid(format!(
                            "stas.{}.snr_db.{ap_id}: {} values for {f_count} channels",
                            s.id,
                            v.len()
                        )))
                    }
                };
                for (f, e) in per_channel.iter().enumerate() {
                    links[(f * n_count + n) * m_count + m] = e.to_link(&s.id, ap_id)?;
                }
            }
            let reachable = (0..f_count)
                .flat_map(|f| (0..n_count).map(move |n| (f, n)))
                .any(|(f, n)| links[(f * n_count + n) * m_count + m] != LinkSpec::OutOfRange);
            if !reachable {
                return Err(invalid(format!("stas.{}: no AP in range", s.id)));
            }
            stas.push(StaSpec { id: s.id.clone(), radios: s.radios });
        }

        let mut per = PerModel {
            gap_db: self.per.gap_db,
            slope: self.per.slope,
            builtin: self.per.builtin,
            curves: BTreeMap::new(),
        };
        if !(per.slope.is_finite() && per.slope > 0.0 && per.gap_db.is_finite()) {
            return Err(invalid("per: slope must be positive and gap_db finite"));
        }
        for (key, l) in &self.per.logistic {
            let mcs = parse_mcs(key, "per.logistic")?;
            let curve = PerCurve::logistic(l.midpoint_db, l.slope)
                .map_err(|e| invalid(format!("per.logistic.{key}: {e}")))?;
            per.curves.insert(mcs, curve);
        }
        for (key, path) in &self.per.tables {
            let mcs = parse_mcs(key, "per.tables")?;
            let full = match base_dir {
                Some(d) if path.is_relative() => d.join(path),
                _ => path.clone(),
            };
            let file = std::fs::File::open(&full).map_err(|source| Error::Io { path: full.clone(), source })?;
            let curve = PerCurve::from_csv(file).map_err(|e| e.context(full.display()))?;
            per.curves.insert(mcs, curve);
        }
        for ch in &self.channels {
            per.curve(ch.mcs)?;
        }

        if !(self.eesm.beta.is_finite() && self.eesm.beta > 0.0) {
            return Err(invalid("eesm.beta must be positive"));
        }
        let mut eesm_beta_per_mcs = BTreeMap::new();
        for (key, &beta) in &self.eesm.per_mcs {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(invalid(format!("eesm.per_mcs.{key} must be positive")));
            }
            eesm_beta_per_mcs.insert(parse_mcs(key, "eesm.per_mcs")?, beta);
        }
        if !(self.phy.t_dft_us > 0.0 && self.phy.t_gi_us >= 0.0 && self.phy.streams >= 1) {
            return Err(invalid("phy: need t_dft_us > 0, t_gi_us >= 0 and streams >= 1"));
        }

        let model = RateModel {
            channels: self.channels,
            per,
            eesm_beta: self.eesm.beta,
            eesm_beta_per_mcs,
            t_dft: self.phy.t_dft_us * 1e-6,
            t_gi: self.phy.t_gi_us * 1e-6,
            n_streams: self.phy.streams,
            dcf: self.dcf,
            literal_per_factor: self.literal_per_factor,
        };
        Ok(Scenario {
            name: self.name,
            seed: self.seed,
            ewma_horizon: self.ewma_horizon,
            slots_per_period: self.slots_per_period,
            monte_carlo_rounds: self.monte_carlo_rounds,
            snr_jitter_db: self.snr_jitter_db,
            aps,
            stas,
            model,
            random_snr: self.random_snr,
            links,
        })
    }
}
