//! Per-cluster fan-out on the default rayon pool versus a single worker.
//! Build with `--no-default-features` to measure the sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use reflect_core::abstractor::AbstractorSpec;
use reflect_core::eval::{evaluate, ReferenceMode};
use reflect_core::par;
use reflect_core::supervision::{build_records, OracleCriterion, PorConfig};
use reflect_core::synthetic::{toy_corpus, ToyCorpusSpec};
use reflect_core::Pipeline;

fn pools() -> Vec<(String, ThreadPool)> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let mode = if par::is_parallel() {
        "rayon"
    } else {
        "sequential-build"
    };
    let mut out = vec![(format!("{mode}/1-thread"), build(1))];
    if threads > 1 {
        out.push((format!("{mode}/{threads}-threads"), build(threads)));
    }
    out
}

fn bench(c: &mut Criterion) {
    let pipeline = Pipeline::with_abstractor(AbstractorSpec::concat(30)).unwrap();
    let data = toy_corpus(&ToyCorpusSpec {
        clusters: 64,
        ..Default::default()
    });
    let criterion = OracleCriterion {
        min_select: 1,
        ..Default::default()
    };
    let por = PorConfig::default();
    let records = build_records(
        &data,
        &criterion,
        &por,
        &pipeline.tokenizer,
        &pipeline.rouge,
    )
    .unwrap();
    let params = pipeline.extractor.init_params(0).unwrap();

    let mut group = c.benchmark_group("toy-64");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("build_records", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    build_records(
                        black_box(&data),
                        &criterion,
                        &por,
                        &pipeline.tokenizer,
                        &pipeline.rouge,
                    )
                })
            })
        });
        group.bench_function(BenchmarkId::new("evaluate_sr", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    evaluate(
                        &pipeline,
                        black_box(&data),
                        &params,
                        true,
                        ReferenceMode::Generated,
                        Some(&records),
                    )
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
