use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::apc::IterationReport;
use super::sweep::SweepPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidInput(format!("unknown format {s:?}"))),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: "<output>".into(), source },
        other => Error::InvalidInput(format!("CSV encoding failed: {other:?}")),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io { path: "<output>".into(), source: e }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write iteration reports. CSV carries the scalar columns plus one `phi_f`
/// column per channel; JSON carries the full records.
pub fn write_reports<W: Write>(mut w: W, reports: &[IterationReport], format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, reports).map_err(|e| Error::InvalidInput(e.to_string()))?;
            writeln!(w).map_err(io_err)
        }
        Format::Csv => {
            let f_count = reports.iter().map(|r| r.per_channel_phi.len()).max().unwrap_or(0);
            let mut out = csv::Writer::from_writer(w);
            let mut header: Vec<String> = ["iteration", "algorithm", "snr_db", "mcs", "aggregate_throughput_bps", "fairness_spread"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend((1..=f_count).map(|f| format!("phi_{f}")));
            header.push("wall_time_s".into());
            out.write_record(&header).map_err(csv_err)?;
            for r in reports {
                let mut row = vec![
                    r.iteration.to_string(),
                    r.algorithm.clone(),
                    r.snr_db.to_string(),
                    opt(r.mcs),
                    r.aggregate_throughput.to_string(),
                    r.fairness_spread.to_string(),
                ];
                row.extend((0..f_count).map(|f| opt(r.per_channel_phi.get(f))));
                row.push(opt(r.wall_time));
                out.write_record(&row).map_err(csv_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}

/// Write sweep statistics.
pub fn write_sweep<W: Write>(mut w: W, points: &[SweepPoint], format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, points).map_err(|e| Error::InvalidInput(e.to_string()))?;
            writeln!(w).map_err(io_err)
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for p in points {
                out.serialize(p).map_err(csv_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}

/// Write reports to `path`, failing on an empty report list.
pub fn emit_results(reports: &[IterationReport], format: Format, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to emit".into()));
    }
    let with_path = |e: Error| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_path_buf(), source },
        other => other,
    };
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut buf = std::io::BufWriter::new(file);
    write_reports(&mut buf, reports, format).map_err(with_path)?;
    buf.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
