//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints its own PASS/FAIL line; exits non-zero if any check fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlo_core::dcf::DcfParams;
use mlo_core::harness::{
    audit_incidence, check_lp_random, compare_joint, convergence_iteration, run_apc_loop, run_monte_carlo,
    validate_dcf, Allocator, ApcOptions, Scenario, Solver, SweepConfig, LADDER,
};
use mlo_core::pairing::{objective_value, pair_greedy, pair_optimal_lp, PairingInstance};
use mlo_core::phy::{eesm_effective_snr, mcs_data_rate, EesmParams, McsEntry, SubcarrierSinrGrid};
use mlo_core::rates::AverageRateMatrix;

const FIXTURE: &str = "scenario_3ap_15sta";
const JOINT_FIXTURE: &str = "scenario_2ap_joint";
const SPREAD_THRESHOLD: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn lp_integrality() -> Outcome {
    let t = Instant::now();
    let rows = check_lp_random(1000, 4, 10, 2024).expect("lp check");
    let secs = t.elapsed().as_secs_f64();
    let worst = rows
        .iter()
        .map(|r| (r.lp_objective - r.exhaustive_objective).abs() / r.exhaustive_objective.abs().max(1.0))
        .fold(0.0, f64::max);
    let bad = rows.iter().filter(|r| !r.passes(1e-9)).count();
    outcome(
        bad == 0 && secs < 10.0,
        format!("{} instances, {bad} mismatches, worst rel gap {worst:.1e} (tol 1e-9), {secs:.2}s (limit 10s)", rows.len()),
    )
}

fn incidence_tu() -> Outcome {
    let t = Instant::now();
    let rows = audit_incidence(6, 6, 5);
    let secs = t.elapsed().as_secs_f64();
    let bad = rows.iter().filter(|r| !r.unimodular).count();
    let checked: u64 = rows.iter().map(|r| r.checked).sum();
    outcome(
        bad == 0 && secs < 60.0,
        format!("{} shapes up to 6x6, {checked} determinants, {bad} violations, {secs:.2}s (limit 60s)", rows.len()),
    )
}

fn greedy_gap() -> Outcome {
    let d = AverageRateMatrix::from_rows(&[vec![9.0, 8.0], vec![7.0, 1.0]]).unwrap();
    let inst = PairingInstance::new(d, vec![1, 1], vec![1, 1]).unwrap();
    let g = objective_value(&pair_greedy(&inst).unwrap(), &inst.d).unwrap();
    let o = objective_value(&pair_optimal_lp(&inst).unwrap(), &inst.d).unwrap();
    outcome(g == 10.0 && o == 15.0, format!("greedy {g}, optimal {o} (expected 10 and 15)"))
}

fn mcs_rates() -> Outcome {
    let mbps = |bw| mcs_data_rate(&McsEntry::he(3, bw).unwrap(), 1) / 1e6;
    let (r40, r80) = (mbps(40), mbps(80));
    let sig3 = |x: f64, want: f64| {
        let scale = 10f64.powi(x.abs().log10().floor() as i32 - 2);
        (x / scale).round() == (want / scale).round()
    };
    outcome(
        sig3(r40, 68.8) && sig3(r80, 144.1),
        format!("MCS3 40 MHz {r40:.2} Mbps (want 68.8), 80 MHz {r80:.2} Mbps (want 144.1), 3 significant figures"),
    )
}

fn dcf_validity() -> Outcome {
    let t = Instant::now();
    let rate = mcs_data_rate(&McsEntry::he(3, 40).unwrap(), 1);
    let rows = validate_dcf(&DcfParams::default(), &[2, 5, 10, 20], &[0.0, 0.1, 0.3], rate, 100_000, 11).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    outcome(
        worst <= 0.05 && secs < 120.0,
        format!("{} points at 1e5 slots, worst rel error {worst:.4} (tol 0.05), {secs:.2}s (limit 120s)", rows.len()),
    )
}

fn eesm_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let eff = |v: &[f64], beta: f64| {
        eesm_effective_snr(&SubcarrierSinrGrid::new(v.to_vec(), v.len(), 1).unwrap(), EesmParams { beta }).unwrap()
    };
    let (mut uniform_err, mut mean_err, mut violations) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..10_000 {
        let len = rng.gen_range(1..=64);
        let v: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.gen_range(-1.0..3.0))).collect();
        let beta = 10f64.powf(rng.gen_range(-1.0..2.0));

        let u = v[0];
        uniform_err = uniform_err.max((eff(&vec![u; len], beta) - u).abs() / u);

        let mean = v.iter().sum::<f64>() / len as f64;
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        mean_err = mean_err.max((eff(&v, 1e4 * max) - mean).abs() / mean);

        let e = eff(&v, beta);
        let mut raised = v.clone();
        let k = rng.gen_range(0..len);
        raised[k] *= 1.0 + rng.gen_range(0.01..1.0);
        let bounded = e >= min * (1.0 - 1e-12) && e <= max * (1.0 + 1e-12);
        let monotone = eff(&raised, beta) >= e * (1.0 - 1e-12);
        if !bounded || !monotone {
            violations += 1;
        }
    }
    outcome(
        uniform_err <= 1e-12 && mean_err <= 1e-3 && violations == 0,
        format!(
            "10^4 grids: uniform rel err {uniform_err:.1e} (tol 1e-12), large-beta vs mean {mean_err:.1e} (tol 1e-3), {violations} bound/monotonicity violations"
        ),
    )
}

fn fixture() -> Scenario {
    Scenario::bundled(FIXTURE).expect("bundled fixture")
}

fn pf_convergence() -> Outcome {
    let s = fixture();
    let t = Instant::now();
    let pf = run_apc_loop(&s, &ApcOptions::new(Solver::Optimal, Allocator::Pf, 40)).unwrap();
    let rr = run_apc_loop(&s, &ApcOptions::new(Solver::Optimal, Allocator::Rr, 120)).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pf_k = convergence_iteration(&pf, SPREAD_THRESHOLD);
    let rr_k = convergence_iteration(&rr, SPREAD_THRESHOLD);
    let rr_min = rr.iter().skip(1).map(|r| r.fairness_spread).fold(f64::MAX, f64::min);
    let pf_ok = pf_k.is_some_and(|k| k <= 20);
    let rr_ok = rr_k.map_or(true, |k| k > 100);
    outcome(
        pf_ok && rr_ok && secs < 30.0,
        format!(
            "PF settles below {SPREAD_THRESHOLD} at iteration {pf_k:?} (limit 20); RR settles at {rr_k:?} over 120 iterations (min spread {rr_min:.3}); {secs:.2}s (limit 30s)"
        ),
    )
}

fn pf_reconvergence() -> Outcome {
    let s = fixture();
    let switch = 10;
    let mut opts = ApcOptions::new(Solver::Optimal, Allocator::Pf, switch + 40);
    opts.mcs_schedule = vec![(0, 9), (switch, 6)];
    let h = run_apc_loop(&s, &opts).unwrap();
    let k = convergence_iteration(&h[switch..], SPREAD_THRESHOLD);
    let jump = h[switch].fairness_spread;
    outcome(
        k.is_some_and(|k| k <= 30),
        format!("MCS 9 -> 6 at iteration {switch}: spread {jump:.3} at the switch, back below {SPREAD_THRESHOLD} after {k:?} iterations (limit 30)"),
    )
}

fn dominance_ladder() -> Outcome {
    let s = fixture();
    let points = [5.0, 10.0, 15.0, 20.0];
    let cfg = SweepConfig::new(points.iter().map(|&p| Some(p)).collect(), 1);
    let res = run_monte_carlo(&s, &cfg).unwrap();
    let slack = 0.01;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let v: Vec<f64> = res[i * LADDER.len()..(i + 1) * LADDER.len()].iter().map(|r| r.throughput_mean).collect();
        let ordered = v.windows(2).all(|w| w[0] >= w[1] * (1.0 - slack));
        ok &= ordered;
        parts.push(format!(
            "{p} dB [{}]{}",
            v.iter().map(|x| format!("{:.1}", x / 1e6)).collect::<Vec<_>>().join(" >= "),
            if ordered { "" } else { " out of order" }
        ));
    }
    let top = &res[3 * LADDER.len()..];
    let gap = top[0].throughput_mean - top[1].throughput_mean;
    ok &= gap > 0.0;
    outcome(
        ok,
        format!("Mbps, opt+pf/greedy+pf/greedy+rr/slo, 1% slack: {}; optimal-greedy gap at 20 dB {:.1} Mbps (> 0)", parts.join("; "), gap / 1e6),
    )
}

fn joint_vs_two_stage() -> Outcome {
    let s = Scenario::bundled(JOINT_FIXTURE).unwrap();
    let rounds = s.monte_carlo_rounds as u64;
    let (mut dominated, mut slower, mut total) = (0, 0, 0);
    let mut brute_time = [0.0; 9];
    let mut two_time = [0.0; 9];
    for r in 0..rounds {
        for m in 1..=8 {
            let c = compare_joint(&s, s.seed + r, m, true).unwrap();
            total += 1;
            if c.bruteforce >= c.two_stage * (1.0 - 1e-9) {
                dominated += 1;
            }
            let (tb, tt) = (c.bruteforce_time.unwrap(), c.two_stage_time.unwrap());
            brute_time[m] += tb / rounds as f64;
            two_time[m] += tt / rounds as f64;
            if m >= 6 && tb > tt {
                slower += 1;
            }
        }
    }
    let needed_slower = 3 * rounds as usize;
    outcome(
        dominated == total && slower == needed_slower,
        format!(
            "{rounds} seeds x M=1..8: brute force >= two-stage in {dominated}/{total}; brute force slower for M>=6 in {slower}/{needed_slower}; mean brute-force time M=4 {:.1e}s, M=6 {:.1e}s, M=8 {:.1e}s vs two-stage {:.1e}s",
            brute_time[4], brute_time[6], brute_time[8], two_time[8]
        ),
    )
}

fn stationarity() -> Outcome {
    let s = fixture();
    let h = run_apc_loop(&s, &ApcOptions::new(Solver::Optimal, Allocator::Pf, 40)).unwrap();
    let ratios: Vec<f64> = h.last().unwrap().fairness_ratios.iter().flatten().copied().collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let dev = max / min - 1.0;
    outcome(
        ratios.len() >= 2 && dev <= 0.05,
        format!(
            "ratios on {} active channels [{}], max/min - 1 = {dev:.2e} (tol 0.05)",
            ratios.len(),
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mlo");
    let dir = tempfile::tempdir().unwrap();
    let invocations: &[&[&str]] = &[
        &["run", "--seed", "5", "--iterations", "12", "--format", "csv"],
        &["run", "--seed", "5", "--iterations", "12", "--allocator", "rr", "--solver", "greedy", "--format", "json"],
        &["run", "--scenario", "scenario_2ap_joint", "--seed", "3", "--iterations", "6", "--mcs-schedule", "0:6,3:3"],
        &["sweep", "--seed", "5", "--snr", "10,20", "--rounds", "2", "--iterations", "6", "--window", "3"],
        &["sweep", "--scenario", "scenario_slo", "--seed", "2", "--rounds", "3", "--format", "json"],
        &["validate-dcf", "--seed", "9", "--slots", "20000", "--n", "2,5"],
        &["oracle", "--seed", "4", "--rounds", "2", "--max-stas", "5"],
        &["oracle", "--kind", "lp", "--seed", "4", "--instances", "50", "--format", "json"],
        &["check-tu", "--max-aps", "3", "--max-stas", "3", "--max-submatrix", "3"],
    ];
    let mut failures = Vec::new();
    for (i, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("out_{i}_{rep}"));
            let status = Command::new(bin).args(*args).arg("--out").arg(&path).status().unwrap();
            if !status.success() {
                failures.push(format!("`{}` exited with {status}", args.join(" ")));
            }
            outputs.push(read(&path));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            failures.push(format!("`{}` output differs between runs", args.join(" ")));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} invocations, each run twice, byte-identical files", invocations.len())
        } else {
            failures.join("; ")
        },
    )
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn main() {
    let checks: [(&str, Check); 12] = [
        ("LP pairing integral and optimal", lp_integrality),
        ("pairing incidence totally unimodular", incidence_tu),
        ("greedy pairing suboptimal on 2x2 exhibit", greedy_gap),
        ("MCS data rates", mcs_rates),
        ("DCF model against slot simulator", dcf_validity),
        ("EESM properties", eesm_properties),
        ("PF converges, RR does not", pf_convergence),
        ("PF re-converges after MCS drop", pf_reconvergence),
        ("throughput ladder across SNR", dominance_ladder),
        ("exhaustive joint search vs two-stage", joint_vs_two_stage),
        ("PF fairness ratios equalize", stationarity),
        ("CLI output deterministic", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || f == &id.to_string()) {
            continue;
        }
        let o = check();
        println!("[{id:>2}] {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
