use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use scinews_bench::{abstracts, text, DOV_RESPONSE, MALFORMED_RESPONSE};
use scinews_core::detection::parse_verdict;
use scinews_core::retrieval::{Bm25Index, Bm25Params};
use scinews_core::text_metrics::rouge2;

fn bm25(c: &mut Criterion) {
    let mut group = c.benchmark_group("bm25_top_k");
    for docs in [1_000usize, 7_087] {
        let index = Bm25Index::build(&abstracts(docs, 200), Bm25Params::default()).unwrap();
        let query = text(99, 400);
        group.bench_with_input(BenchmarkId::from_parameter(docs), &docs, |b, _| {
            b.iter(|| index.top_k(black_box(&query), 3))
        });
    }
    group.finish();
    c.bench_function("bm25_build_1000", |b| {
        let docs = abstracts(1_000, 200);
        b.iter(|| Bm25Index::build(black_box(&docs), Bm25Params::default()).unwrap())
    });
}

fn rouge(c: &mut Criterion) {
    let candidate = text(1, 300);
    let reference = text(2, 250);
    c.bench_function("rouge2_300x250", |b| b.iter(|| rouge2(black_box(&candidate), black_box(&reference))));
}

fn verdicts(c: &mut Criterion) {
    c.bench_function("parse_verdict_fenced", |b| b.iter(|| parse_verdict(black_box(DOV_RESPONSE), true)));
    c.bench_function("parse_verdict_repaired", |b| b.iter(|| parse_verdict(black_box(MALFORMED_RESPONSE), true)));
}

criterion_group!(benches, bm25, rouge, verdicts);
criterion_main!(benches);
