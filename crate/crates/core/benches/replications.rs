use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use midas_me::montecarlo::{Execution, Scenario, ScenarioRun};

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario_run");
    group.sample_size(10);
    for &(t, jmax) in &[(48usize, 9usize), (120, 24)] {
        let sc = Scenario::new(t, jmax, 2.0, 0.5, 0.5).with_reps(200).with_seed(7);
        group.throughput(Throughput::Elements(sc.reps as u64));
        for (label, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, format!("T{t}_j{jmax}")), &sc, |b, sc| {
                b.iter(|| ScenarioRun::execute(sc, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
