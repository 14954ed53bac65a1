use criterion::{criterion_group, criterion_main, Criterion};
use sinr_bench::synthetic_corpus;
use sinr_core::cooc::{accumulate_cooc, build_vocab, pmi_filter, CorpusConfig};

fn bench_cooc(c: &mut Criterion) {
    let corpus = synthetic_corpus(20_000, 20, 5_000, 7);
    let cfg = CorpusConfig {
        min_count: 5,
        ..CorpusConfig::default()
    };
    let vocab = build_vocab(&corpus, &cfg, &[]).unwrap();
    let acc = accumulate_cooc(&corpus, &vocab, &cfg).unwrap();

    let mut group = c.benchmark_group("cooc");
    group.sample_size(10);
    group.bench_function("vocabulary", |b| b.iter(|| build_vocab(&corpus, &cfg, &[]).unwrap()));
    group.bench_function("accumulate", |b| b.iter(|| accumulate_cooc(&corpus, &vocab, &cfg).unwrap()));
    group.bench_function("pmi_filter", |b| b.iter(|| pmi_filter(&acc, &vocab).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_cooc);
criterion_main!(benches);
