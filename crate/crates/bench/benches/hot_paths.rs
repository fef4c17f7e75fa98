use criterion::{criterion_group, criterion_main, Criterion};
use ewaglm_bench::gaussian_posterior;
use ndarray::Array1;

fn bench_posterior_eval(c: &mut Criterion) {
    let post = gaussian_posterior(200, 50);
    let beta = Array1::from_elem(50, 0.01);
    c.bench_function("log_posterior_unnormalized n=200 p=50", |b| {
        b.iter(|| post.log_posterior_unnormalized(criterion::black_box(&beta)).unwrap())
    });
    c.bench_function("log_posterior_gradient n=200 p=50", |b| {
        b.iter(|| post.log_posterior_gradient(criterion::black_box(&beta)).unwrap())
    });
}

fn bench_sampler(c: &mut Criterion) {
    use ewaglm::SamplerConfig;
    let post = gaussian_posterior(100, 20);
    let mut cfg = SamplerConfig::basic(500, 7);
    cfg.n_chains = 1;
    c.bench_function("mala 500 iters n=100 p=20", |b| {
        b.iter(|| ewaglm::run_chains(&post, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_posterior_eval, bench_sampler);
criterion_main!(benches);
