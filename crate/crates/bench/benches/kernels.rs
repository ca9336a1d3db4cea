use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsma_satcom::channel::assemble;
use rsma_satcom::conic::{ClarabelSolver, ConicSolver};
use rsma_satcom::csit::qbar_closed_form;
use rsma_satcom::geometry::{drop_users, hex_layout};
use rsma_satcom::optimizer::{build_subproblem, solve_with, step};
use rsma_satcom::rates::{approx_rate, ergodic_rate_mc};
use rsma_satcom::{CsitStatistics, ObjectiveMode, Scenario, SicMode};
use rsma_satcom_bench::{desk_instance, initial_state};

fn channel(c: &mut Criterion) {
    let s = Scenario::full_scale();
    let layout = hex_layout(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let drop = drop_users(&s, &layout, &mut rng);
    c.bench_function("assemble_full", |b| {
        b.iter(|| assemble(&s, black_box(&drop), &mut rng))
    });
    let h = assemble(&s, &drop, &mut rng).h_est;
    c.bench_function("csit_stats_full", |b| {
        b.iter(|| CsitStatistics::from_estimates(black_box(&h), 0.1))
    });
    c.bench_function("qbar_7", |b| b.iter(|| qbar_closed_form(7, black_box(0.1))));
}

fn rates(c: &mut Criterion) {
    let inst = desk_instance(3);
    let st = initial_state(&inst, SicMode::Rsma);
    let bf = st.beamformers();
    c.bench_function("approx_rate_desk", |b| {
        b.iter(|| approx_rate(black_box(&inst.stats.hbar_mat[0]), &bf, 0, 1.0))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("ergodic_mc_1000", |b| {
        b.iter(|| ergodic_rate_mc(&inst.channel.h_est[0], &bf, 0, 0.1, 1.0, 1000, &mut rng))
    });
}

fn optimizer(c: &mut Criterion) {
    let inst = desk_instance(5);
    let mut group = c.benchmark_group("optimizer");
    group.sample_size(20);
    for sic in [SicMode::Rsma, SicMode::Sdma] {
        let st = initial_state(&inst, sic);
        let name = format!("{sic:?}").to_lowercase();
        group.bench_with_input(BenchmarkId::new("build_subproblem", &name), &st, |b, st| {
            b.iter(|| build_subproblem(st, &inst.stats, &inst.scenario))
        });
        let sub = build_subproblem(&st, &inst.stats, &inst.scenario);
        let solver = ClarabelSolver::default();
        group.bench_with_input(
            BenchmarkId::new("clarabel_subproblem", &name),
            &sub,
            |b, sub| b.iter(|| solver.solve(&sub.program).unwrap()),
        );
        group.bench_with_input(BenchmarkId::new("step", &name), &st, |b, st| {
            b.iter(|| step(st, &inst.stats, &inst.scenario).unwrap())
        });
    }
    group.sample_size(10);
    for sic in [SicMode::Rsma, SicMode::Sdma] {
        let name = format!("{sic:?}").to_lowercase();
        group.bench_function(BenchmarkId::new("solve_ee_desk", &name), |b| {
            b.iter(|| {
                solve_with(
                    &ClarabelSolver::default(),
                    &inst.scenario,
                    &inst.stats,
                    sic,
                    ObjectiveMode::Ee,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, channel, rates, optimizer);
criterion_main!(benches);
