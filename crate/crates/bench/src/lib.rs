//! Seeded inputs shared by the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xrank_core::{EmbeddingMatrix, WeightedBipartiteGraph};

pub fn random_graph(left: usize, right: usize, seed: u64) -> WeightedBipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..left * right).map(|_| rng.gen_range(0.0..1.0)).collect();
    WeightedBipartiteGraph::new(left, right, w).unwrap()
}

/// Gaussian-ish rows named `{prefix}{i}`.
pub fn random_embeddings(n: usize, dim: usize, prefix: &str, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let v = (0..dim)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>())
                .collect();
            (format!("{prefix}{i:05}"), v)
        })
        .collect();
    EmbeddingMatrix::from_rows(rows).unwrap()
}
