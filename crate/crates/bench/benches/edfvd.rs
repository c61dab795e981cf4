use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use imc_edfvd::analysis::{self, XPolicy};
use imc_edfvd::experiment::{self, Axis, SweepConfig};
use imc_edfvd::gen::{self, GenParams};
use imc_edfvd::quality;
use imc_edfvd::rational::rat;
use imc_edfvd::sim::{self, Scenario};
use imc_edfvd::speedup;
use imc_edfvd::ModelKind;
use imc_edfvd_bench::{edfvd_set, generated_sets};

fn bench_analysis(c: &mut Criterion) {
    let sets = generated_sets(100, rat(4, 5), ModelKind::Imc);
    c.bench_function("imc_test/100 sets", |b| {
        b.iter(|| {
            for ts in &sets {
                black_box(analysis::imc_test(ts, XPolicy::Min).unwrap());
            }
        })
    });
    let (ts, x) = edfvd_set(ModelKind::Imc);
    c.bench_function("optimize_quality", |b| b.iter(|| quality::optimize_quality(black_box(&ts), &x)));
}

fn bench_speedup(c: &mut Criterion) {
    c.bench_function("speedup/reference table", |b| {
        b.iter(|| speedup::speedup_table(&speedup::REFERENCE_ALPHAS, &speedup::REFERENCE_LAMBDAS))
    });
    c.bench_function("speedup/grid step 0.01", |b| b.iter(|| speedup::max_speedup_search(black_box(0.01))));
}

fn bench_sim(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    for kind in [ModelKind::Imc, ModelKind::Emc] {
        let (ts, x) = edfvd_set(kind);
        let horizon = sim::default_horizon(&ts);
        group.bench_function(format!("{kind} full budgets"), |b| {
            b.iter(|| sim::simulate(&ts, &x, &Scenario::full_budgets(7), &horizon).unwrap())
        });
        let trace = sim::simulate(&ts, &x, &Scenario::full_budgets(7), &horizon).unwrap();
        group.bench_function(format!("{kind} check_trace"), |b| b.iter(|| sim::check_trace(&ts, &x, &trace)));
    }
    group.finish();
}

fn bench_gen(c: &mut Criterion) {
    let mut seed = 0;
    c.bench_function("generate_task_set", |b| {
        b.iter_batched(
            || {
                seed += 1;
                GenParams::default().with_seed(seed)
            },
            |p| gen::generate_task_set(&p).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let cfg = SweepConfig {
        sets_per_point: 100,
        ..SweepConfig::new(Axis::Uavg, experiment::decimal_range("0.4", "0.95", "0.05"), GenParams::default())
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("uavg 12 points x 100 sets", |b| b.iter(|| experiment::run_sweep(&cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_analysis, bench_speedup, bench_sim, bench_gen);
criterion_main!(benches);
