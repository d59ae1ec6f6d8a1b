//! Criterion benches: planner heuristics, explanation searches, and the
//! benchmark matrix in serial vs thread-pool mode.
//!
//! Build with `--no-default-features` to measure the purely sequential
//! build; the `matrix/parallel` bench only exists under the `parallel`
//! feature.

use criterion::{criterion_group, criterion_main, Criterion};

use reconcile_core::explain::{mce_exact, mme_all, MmeOptions, MrpInstance};
use reconcile_core::fixtures::BUILTIN;
use reconcile_core::ground::ground;
use reconcile_core::matrix::{builtin_problems, run_matrix, ExplainerKind, MatrixConfig};
use reconcile_core::perturb::{inject, FaultSpec};
use reconcile_core::planner::{optimal_plan, search, Budget, Heuristic, Outcome};
use reconcile_core::space::Granularity;

fn bw_instance(problem: &str, seed: u64, n_faults: usize) -> MrpInstance {
    let model = BUILTIN
        .iter()
        .find(|f| f.domain == "blocksworld" && f.problem == problem)
        .unwrap()
        .model()
        .unwrap();
    let human = inject(&model, &FaultSpec::removals(seed, n_faults)).unwrap();
    let plan = match optimal_plan(&ground(&model), &Budget::default()).outcome {
        Outcome::Solved { plan, .. } => plan,
        _ => unreachable!(),
    };
    MrpInstance::new(&model, &human, plan, Granularity::Lifted, Budget::default()).unwrap()
}

fn bench_planner(c: &mut Criterion) {
    let task = ground(
        &BUILTIN
            .iter()
            .find(|f| f.domain == "blocksworld" && f.problem == "p04")
            .unwrap()
            .model()
            .unwrap(),
    );
    let budget = Budget::default();
    let mut group = c.benchmark_group("planner");
    group.bench_function("astar_hmax", |b| {
        b.iter(|| search(&task, &budget, Heuristic::HMax, None))
    });
    group.bench_function("blind", |b| {
        b.iter(|| search(&task, &budget, Heuristic::Blind, None))
    });
    group.finish();
}

fn bench_mce(c: &mut Criterion) {
    let inst = bw_instance("p02", 21, 5);
    let budget = Budget::default();
    let mut group = c.benchmark_group("mce");
    group.bench_function("with_heuristic", |b| b.iter(|| mce_exact(&inst, true, &budget).unwrap()));
    group.bench_function("no_heuristic", |b| b.iter(|| mce_exact(&inst, false, &budget).unwrap()));
    group.finish();
}

fn bench_mme(c: &mut Criterion) {
    let inst = bw_instance("p01", 31, 8);
    let budget = Budget::default();
    let mut group = c.benchmark_group("mme");
    group.sample_size(10);
    group.bench_function("pruned", |b| {
        b.iter(|| mme_all(&inst, &budget, MmeOptions { prune: true, cap: 16 }).unwrap())
    });
    group.bench_function("unpruned", |b| {
        b.iter(|| mme_all(&inst, &budget, MmeOptions { prune: false, cap: 16 }).unwrap())
    });
    group.finish();
}

fn bench_matrix(c: &mut Criterion) {
    let problems = builtin_problems(Some(&["blocksworld".to_owned()]));
    let base = MatrixConfig {
        specs: vec![FaultSpec::removals(5, 4), FaultSpec::removals(6, 4), FaultSpec::removals(7, 4)],
        explainers: vec![ExplainerKind::Mce, ExplainerKind::MceApprox, ExplainerKind::Mme],
        repeats: 1,
        stable: true,
        jobs: 1,
        ..MatrixConfig::default()
    };
    let mut group = c.benchmark_group("matrix");
    group.sample_size(10);
    group.bench_function("serial", |b| b.iter(|| run_matrix(&problems, &base)));
    #[cfg(feature = "parallel")]
    {
        let parallel = MatrixConfig { jobs: 0, ..base.clone() };
        group.bench_function("parallel", |b| b.iter(|| run_matrix(&problems, &parallel)));
    }
    group.finish();
}

criterion_group!(benches, bench_planner, bench_mce, bench_mme, bench_matrix);
criterion_main!(benches);
