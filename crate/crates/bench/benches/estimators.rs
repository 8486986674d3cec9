//! Hot-path benchmarks: body sampling, gauge evaluation, the norm
//! estimator, exhaustive sign search and Haar rotation generation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use multinorm::balancing::min_signs_bruteforce;
use multinorm::bodies::Exponent;
use multinorm::norms::estimate_norm;
use multinorm::sampling::{sample_haar_rotation, BodySampler};
use multinorm::{BodySpec, BodyTuple, RngStream, WeightVector};

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_body_n32");
    for p in ["1", "2", "4", "inf"] {
        let body = BodySpec::parse(&format!("lp:{p}:32:vol1")).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p), &body, |b, body| {
            let mut sampler = BodySampler::new(body);
            let mut rng = RngStream::new(1).rng();
            let mut out = vec![0.0; 32];
            b.iter(|| {
                sampler.sample_into(&mut rng, &mut out);
                out[0]
            });
        });
    }
    group.finish();
}

fn bench_gauge(c: &mut Criterion) {
    let mut group = c.benchmark_group("gauge_n32");
    let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
    for p in ["1", "2", "4", "inf"] {
        let body = BodySpec::parse(&format!("lp:{p}:32:vol1")).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p), &body, |b, body| {
            b.iter(|| body.gauge(&x));
        });
    }
    group.finish();
}

fn bench_norm_estimate(c: &mut Criterion) {
    let body = BodySpec::parse("cube:16:vol1").unwrap();
    let t = WeightVector::new(vec![0.25; 16]).unwrap();
    c.bench_function("estimate_norm_cube16_s16_n2000", |b| {
        b.iter(|| {
            estimate_norm(
                &BodyTuple::Common(body.clone()),
                &t,
                &body,
                2_000,
                RngStream::new(7),
            )
            .unwrap()
            .value
        });
    });
}

fn bench_bruteforce(c: &mut Criterion) {
    let body = BodySpec::lp(Exponent::Infinity, 8).unwrap().normalized();
    let mut sampler = BodySampler::new(&body);
    let mut rng = RngStream::new(3).rng();
    let points: Vec<Vec<f64>> = (0..16)
        .map(|_| {
            let mut x = vec![0.0; 8];
            sampler.sample_into(&mut rng, &mut x);
            x
        })
        .collect();
    c.bench_function("bruteforce_signs_s16_n8", |b| {
        b.iter(|| min_signs_bruteforce(&points, &body).unwrap().achieved);
    });
}

fn bench_haar(c: &mut Criterion) {
    c.bench_function("haar_rotation_n64", |b| {
        let mut rng = RngStream::new(5).rng();
        b.iter(|| sample_haar_rotation(64, &mut rng));
    });
}

criterion_group!(
    benches,
    bench_sampling,
    bench_gauge,
    bench_norm_estimate,
    bench_bruteforce,
    bench_haar
);
criterion_main!(benches);
