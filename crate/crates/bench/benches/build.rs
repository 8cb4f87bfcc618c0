use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use branchsearch_bench::{corpus_for, power_law_index};
use branchsearch_core::tree::select_term;
use branchsearch_core::{build_index, build_tree, store, synthetic, Artifact, TreeParams};

fn index_build(c: &mut Criterion) {
    let (docs, vocab) = corpus_for(&power_law_index(5_000, 1_000, 1));
    c.bench_function("index/5k docs x 1k terms", |b| b.iter(|| build_index(black_box(&docs), &vocab).unwrap()));
}

fn tree_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("tree");
    group.sample_size(10);
    for &(docs, terms) in &[(10_000, 1_000), (50_000, 2_000)] {
        let index = power_law_index(docs, terms, 2);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{docs}x{terms}")), &index, |b, index| {
            b.iter(|| build_tree(index, &TreeParams::default()))
        });
    }
    group.finish();
}

fn root_selection(c: &mut Criterion) {
    let index = power_law_index(20_000, 2_000, 3);
    let all: Vec<u32> = (0..index.n_docs() as u32).collect();
    let params = TreeParams::default();
    c.bench_function("select_term/root 20k x 2k", |b| b.iter(|| select_term(black_box(&all), 1, &[], &index, &params)));
}

fn artifact_io(c: &mut Criterion) {
    let index = synthetic::bernoulli_index(20_000, 500, 0.05, 4);
    let vocab = synthetic::vocabulary_for(&index);
    let artifact = Artifact::from_index(vocab, index, &TreeParams::default()).unwrap();
    let bytes = store::to_bytes(&artifact);
    c.bench_function("store/encode", |b| b.iter(|| store::to_bytes(black_box(&artifact))));
    c.bench_function("store/decode", |b| b.iter(|| store::from_bytes(black_box(&bytes)).unwrap()));
}

criterion_group!(benches, index_build, tree_build, root_selection, artifact_io);
criterion_main!(benches);
