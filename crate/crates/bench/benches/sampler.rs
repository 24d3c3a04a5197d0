use criterion::{criterion_group, criterion_main, Criterion};
use ordprior::{fit_posterior, BetaPriorId, CutpointPriorId, SamplerConfig};
use ordprior_bench::skewed_trial;

fn short_fit(c: &mut Criterion) {
    let data = skewed_trial(10, 100, 11);
    let cfg = SamplerConfig { chains: 2, warmup_iters: 300, sampling_iters: 300, seed: 5, ..SamplerConfig::default() };
    let beta = BetaPriorId::Normal100.spec();
    let cut = CutpointPriorId::Dir1.spec(10);
    let mut group = c.benchmark_group("nuts");
    group.sample_size(10);
    group.bench_function("fit_j10_n100_dir1", |b| b.iter(|| fit_posterior(&data, &beta, &cut, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, short_fit);
criterion_main!(benches);
