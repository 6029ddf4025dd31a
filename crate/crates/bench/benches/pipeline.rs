use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use mlo_core::allocation::{allocate_pf, LinkSelection, PfRule, RadioBudget, ThroughputState};
use mlo_core::dcf::{saturation_throughput, DcfParams};
use mlo_core::harness::{
    bootstrap_selection, comparison_tensor, run_apc_loop, two_stage_throughput, Allocator, ApcOptions, Scenario,
    Solver,
};
use mlo_core::pairing::{pair_greedy, pair_optimal_lp, solve_joint_mmkp_bruteforce, PairingInstance};
use mlo_core::rates::{average_over_channels, build_rate_tensor};

fn fixture() -> Scenario {
    Scenario::bundled("scenario_3ap_15sta").unwrap()
}

fn rates(c: &mut Criterion) {
    let s = fixture();
    let snr = s.snr();
    let counts = bootstrap_selection(&s, &snr).counts();
    c.bench_function("rate_tensor_3ap_15sta", |b| {
        b.iter(|| build_rate_tensor(&s.model, black_box(&snr), &counts, None).unwrap())
    });
    let p = DcfParams::default();
    c.bench_function("saturation_throughput_n10", |b| {
        b.iter(|| saturation_throughput(&p, black_box(10), 0.1, 144.1e6).unwrap())
    });
}

fn stages(c: &mut Criterion) {
    let s = fixture();
    let snr = s.snr();
    let counts = bootstrap_selection(&s, &snr).counts();
    let tensor = build_rate_tensor(&s.model, &snr, &counts, None).unwrap();
    let inst = PairingInstance::new(average_over_channels(&tensor), s.ap_radio_limits(), s.sta_radio_limits()).unwrap();
    c.bench_function("pair_optimal_lp_3x15", |b| b.iter(|| pair_optimal_lp(black_box(&inst)).unwrap()));
    c.bench_function("pair_greedy_3x15", |b| b.iter(|| pair_greedy(black_box(&inst)).unwrap()));

    let x = pair_optimal_lp(&inst).unwrap();
    let edges = tensor.to_edges();
    let state = ThroughputState::new((0..tensor.f_count).map(|f| edges.channel_mean(f)).collect(), s.ewma_horizon).unwrap();
    let prev = LinkSelection::empty(tensor.f_count, tensor.n_count, tensor.m_count);
    let budget = RadioBudget::from_pairing(&x, &inst.sta_radio_limits);
    c.bench_function("allocate_pf_3x15", |b| {
        b.iter(|| allocate_pf(&x, &budget, &inst.sta_radio_limits, &edges, black_box(&state), &prev, PfRule::EdgeRatio).unwrap())
    });
}

fn apc_loop(c: &mut Criterion) {
    let s = fixture();
    let mut g = c.benchmark_group("apc_loop_20_iterations");
    g.sample_size(20);
    for (solver, allocator) in [(Solver::Optimal, Allocator::Pf), (Solver::Greedy, Allocator::Rr)] {
        let opts = ApcOptions::new(solver, allocator, 20);
        g.bench_function(opts.algorithm(), |b| b.iter(|| run_apc_loop(black_box(&s), &opts).unwrap()));
    }
    g.finish();
}

fn joint(c: &mut Criterion) {
    let s = Scenario::bundled("scenario_2ap_joint").unwrap();
    let mut g = c.benchmark_group("joint_vs_two_stage");
    g.sample_size(10);
    for m in [2usize, 4, 6] {
        let sub = s.with_first_stas(m).unwrap();
        let tensor = comparison_tensor(&sub, s.seed).unwrap();
        let inst =
            PairingInstance::new(average_over_channels(&tensor), sub.ap_radio_limits(), sub.sta_radio_limits()).unwrap();
        g.bench_with_input(BenchmarkId::new("bruteforce", m), &m, |b, _| {
            b.iter(|| solve_joint_mmkp_bruteforce(black_box(&tensor), &inst).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("two_stage", m), &m, |b, _| {
            b.iter(|| two_stage_throughput(&sub, black_box(&tensor)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, rates, stages, apc_loop, joint);
criterion_main!(benches);
