use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use xrank_core::ingest::read_synset_graph;

fn bench(c: &mut Criterion) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/wordnet.tsv");
    let graph = read_synset_graph(&path).unwrap();
    let ids = graph.synsets().to_vec();
    let pairs: Vec<_> = ids.iter().flat_map(|a| ids.iter().map(move |b| (a, b))).collect();

    let mut group = c.benchmark_group("path_similarity");
    group.bench_function("all_pairs_warm", |b| {
        b.iter(|| pairs.iter().filter_map(|(a, b)| graph.path_similarity(a, b).ok()).sum::<f64>())
    });
    group.bench_function("parse_then_all_pairs", |b| {
        b.iter(|| {
            let g = read_synset_graph(&path).unwrap();
            pairs.iter().filter_map(|(a, b)| g.path_similarity(a, b).ok()).sum::<f64>()
        })
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
