//! `mlo`: run the pairing and allocation loop, sweeps and solver checks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mlo_core::allocation::PfRule;
use mlo_core::dcf::DcfParams;
use mlo_core::harness::{
    audit_incidence, check_lp_random, compare_joint, load_scenario, run_apc_loop, run_monte_carlo, validate_dcf,
    write_reports, write_sweep, Algorithm, Allocator, ApcOptions, ColdStart, Format, Scenario, Solver, SweepConfig,
    LADDER,
};
use mlo_core::phy::{mcs_data_rate, McsEntry};
use mlo_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mlo", version, about = "AP-STA pairing and radio-link allocation for multi-link Wi-Fi")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the periodic pairing and allocation loop on one scenario.
    Run(RunArgs),
    /// Monte Carlo sweep over SNR and MCS points.
    Sweep(SweepArgs),
    /// Compare the analytical DCF model with the slot simulator.
    ValidateDcf(DcfArgs),
    /// Compare solvers against exhaustive search.
    Oracle(OracleArgs),
    /// Audit total unimodularity of the pairing incidence matrix.
    CheckTu(TuArgs),
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file or bundled scenario name.
    #[arg(long, default_value = "scenario_3ap_15sta")]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "optimal")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "pf")]
    allocator: AllocatorArg,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// MCS steps as `ITER:MCS`, e.g. `0:9,10:6`.
    #[arg(long, value_delimiter = ',', value_parser = parse_mcs_step)]
    mcs_schedule: Vec<(usize, u8)>,
    #[arg(long, value_enum, default_value = "edge-ratio")]
    pf_rule: PfRuleArg,
    #[arg(long, value_enum, default_value = "mean")]
    cold_start: ColdStartArg,
    /// Record wall time per iteration.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "scenario_3ap_15sta")]
    scenario: PathBuf,
    /// Target mean SNRs in dB; the scenario's own SNRs when omitted.
    #[arg(long, value_delimiter = ',')]
    snr: Vec<f64>,
    /// MCS values applied to every channel.
    #[arg(long, value_delimiter = ',')]
    mcs: Vec<u8>,
    /// Monte Carlo rounds; the scenario's count when omitted.
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long, default_value_t = 12)]
    iterations: usize,
    /// Trailing iterations averaged into the steady state.
    #[arg(long, default_value_t = 6)]
    window: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// With `--allocator`, sweep only that algorithm instead of the full ladder.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    allocator: Option<AllocatorArg>,
    #[arg(long, value_enum, default_value = "edge-ratio")]
    pf_rule: PfRuleArg,
    #[arg(long, value_enum, default_value = "mean")]
    cold_start: ColdStartArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DcfArgs {
    /// Scenario supplying DCF parameters; defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20")]
    n: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3")]
    per: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// PHY rate; MCS 3 at 40 MHz when omitted.
    #[arg(long)]
    rate_mbps: Option<f64>,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    /// Two-stage pipeline against exhaustive joint search.
    Joint,
    /// LP pairing against exhaustive pairing on random instances.
    Lp,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "joint")]
    kind: OracleKind,
    #[arg(long, default_value = "scenario_2ap_joint")]
    scenario: PathBuf,
    /// First seed; joint runs use the scenario seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds per STA count; the scenario's round count when omitted.
    #[arg(long)]
    rounds: Option<u32>,
    /// Largest STA prefix compared.
    #[arg(long, default_value_t = 8)]
    max_stas: usize,
    /// Random instances for `--kind lp`.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Record solver wall times.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct TuArgs {
    #[arg(long, default_value_t = 6)]
    max_aps: usize,
    #[arg(long, default_value_t = 6)]
    max_stas: usize,
    #[arg(long, default_value_t = 5)]
    max_submatrix: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocatorArg {
    Pf,
    Rr,
}

#[derive(Clone, Copy, ValueEnum)]
enum PfRuleArg {
    EdgeRatio,
    ChannelPriority,
    CandidateMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColdStartArg {
    Mean,
    Bootstrap,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Greedy => Solver::Greedy,
            SolverArg::Optimal => Solver::Optimal,
        }
    }
}

impl From<AllocatorArg> for Allocator {
    fn from(a: AllocatorArg) -> Self {
        match a {
            AllocatorArg::Pf => Allocator::Pf,
            AllocatorArg::Rr => Allocator::Rr,
        }
    }
}

impl From<PfRuleArg> for PfRule {
    fn from(r: PfRuleArg) -> Self {
        match r {
            PfRuleArg::EdgeRatio => PfRule::EdgeRatio,
            PfRuleArg::ChannelPriority => PfRule::ChannelPriority,
            PfRuleArg::CandidateMean => PfRule::CandidateMean,
        }
    }
}

impl From<ColdStartArg> for ColdStart {
    fn from(c: ColdStartArg) -> Self {
        match c {
            ColdStartArg::Mean => ColdStart::AllEdgesMean,
            ColdStartArg::Bootstrap => ColdStart::Bootstrap,
        }
    }
}

fn parse_mcs_step(s: &str) -> std::result::Result<(usize, u8), String> {
    let (it, mcs) = s.split_once(':').ok_or_else(|| format!("expected ITER:MCS, got {s:?}"))?;
    let it = it.trim().parse().map_err(|_| format!("bad iteration in {s:?}"))?;
    let mcs = mcs.trim().parse().map_err(|_| format!("bad MCS in {s:?}"))?;
    Ok((it, mcs))
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// Results were written but a check failed; carries the exit code and reason.
    CheckFailed(u8, String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(code, msg)) => {
            eprintln!("mlo: {msg}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("mlo: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateDcf(a) => dcf(a),
        Command::Oracle(a) => oracle(a),
        Command::CheckTu(a) => check_tu(a),
    }
}

fn scenario_with_seed(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut s = load_scenario(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn with_output(output: &Output, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &output.out {
        Some(path) => {
            let io_err = |source| Error::Io { path: path.clone(), source };
            let file = File::create(path).map_err(io_err)?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(|e| match e {
                Error::Io { source, .. } => Error::Io { path: path.clone(), source },
                other => other,
            })?;
            w.flush().map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(|source| Error::Io { path: "<stdout>".into(), source })
        }
    }
}

fn write_rows<T: Serialize>(w: &mut dyn Write, rows: &[T], format: Format) -> Result<()> {
    let enc = |e: String| Error::InvalidInput(format!("encoding output failed: {e}"));
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, rows).map_err(|e| enc(e.to_string()))?;
            writeln!(w).map_err(|source| Error::Io { path: "<output>".into(), source })
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r).map_err(|e| enc(e.to_string()))?;
            }
            out.flush().map_err(|source| Error::Io { path: "<output>".into(), source })
        }
    }
}

fn run(a: RunArgs) -> Result<Outcome> {
    let scenario = scenario_with_seed(&a.scenario, a.seed)?;
    let mut opts = ApcOptions::new(a.solver.into(), a.allocator.into(), a.iterations);
    opts.mcs_schedule = a.mcs_schedule;
    opts.pf_rule = a.pf_rule.into();
    opts.cold_start = a.cold_start.into();
    opts.timings = a.timings;
    let reports = run_apc_loop(&scenario, &opts)?;
    if reports.is_empty() {
        return Err(Error::InvalidInput("--iterations must be at least 1".into()));
    }
    let format = a.output.format.into();
    with_output(&a.output, |w| write_reports(w, &reports, format))?;
    Ok(Outcome::Ok)
}

fn sweep(a: SweepArgs) -> Result<Outcome> {
    let scenario = scenario_with_seed(&a.scenario, a.seed)?;
    let snr_points = if a.snr.is_empty() { vec![None] } else { a.snr.iter().map(|&s| Some(s)).collect() };
    let mut cfg = SweepConfig::new(snr_points, a.rounds.unwrap_or(scenario.monte_carlo_rounds));
    if !a.mcs.is_empty() {
        cfg.mcs_points = a.mcs.iter().map(|&m| Some(m)).collect();
    }
    cfg.iterations = a.iterations;
    cfg.steady_window = a.window;
    cfg.pf_rule = a.pf_rule.into();
    cfg.cold_start = a.cold_start.into();
    cfg.algorithms = match (a.solver, a.allocator) {
        (None, None) => LADDER.to_vec(),
        (s, al) => vec![Algorithm::Mlo(
            s.unwrap_or(SolverArg::Optimal).into(),
            al.unwrap_or(AllocatorArg::Pf).into(),
        )],
    };
    let points = run_monte_carlo(&scenario, &cfg)?;
    let format = a.output.format.into();
    with_output(&a.output, |w| write_sweep(w, &points, format))?;
    Ok(Outcome::Ok)
}

fn dcf(a: DcfArgs) -> Result<Outcome> {
    let params = match &a.scenario {
        Some(p) => load_scenario(p)?.model.dcf,
        None => DcfParams::default(),
    };
    let rate = match a.rate_mbps {
        Some(r) => r * 1e6,
        None => mcs_data_rate(&McsEntry::he(3, 40)?, 1),
    };
    let rows = validate_dcf(&params, &a.n, &a.per, rate, a.slots, a.seed)?;
    let format = a.output.format.into();
    with_output(&a.output, |w| write_rows(w, &rows, format))?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(if worst > a.tolerance {
        Outcome::CheckFailed(1, format!("largest relative error {worst:.4} exceeds {}", a.tolerance))
    } else {
        Outcome::Ok
    })
}

fn oracle(a: OracleArgs) -> Result<Outcome> {
    let format = a.output.format.into();
    match a.kind {
        OracleKind::Lp => {
            let rows = check_lp_random(a.instances, 4, 10, a.seed.unwrap_or(1))?;
            with_output(&a.output, |w| write_rows(w, &rows, format))?;
            let bad = rows.iter().filter(|r| !r.passes(1e-9)).count();
            Ok(if bad > 0 {
                Outcome::CheckFailed(2, format!("{bad} instances differ from the exhaustive optimum"))
            } else {
                Outcome::Ok
            })
        }
        OracleKind::Joint => {
            let scenario = scenario_with_seed(&a.scenario, a.seed)?;
            let rounds = a.rounds.unwrap_or(scenario.monte_carlo_rounds).max(1) as u64;
            let max_m = a.max_stas.min(scenario.m_count());
            let mut rows = Vec::new();
            for r in 0..rounds {
                for m in 1..=max_m {
                    rows.push(compare_joint(&scenario, scenario.seed.wrapping_add(r), m, a.timings)?);
                }
            }
            with_output(&a.output, |w| write_rows(w, &rows, format))?;
            let bad = rows.iter().filter(|r| r.bruteforce < r.two_stage * (1.0 - 1e-9)).count();
            Ok(if bad > 0 {
                Outcome::CheckFailed(2, format!("{bad} cases where the two-stage pipeline beats exhaustive search"))
            } else {
                Outcome::Ok
            })
        }
    }
}

fn check_tu(a: TuArgs) -> Result<Outcome> {
    let rows = audit_incidence(a.max_aps, a.max_stas, a.max_submatrix);
    let format = a.output.format.into();
    with_output(&a.output, |w| write_rows(w, &rows, format))?;
    let bad = rows.iter().filter(|r| !r.unimodular).count();
    Ok(if bad > 0 {
        Outcome::CheckFailed(2, format!("{bad} incidence shapes are not totally unimodular"))
    } else {
        Outcome::Ok
    })
}
