//! Hashed bag-of-tokens sentence embedder, good enough to exercise the pipeline.

use std::hash::Hasher;

use fnv::FnvHasher;
use xrank_core::text::tokenize;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyText;

impl std::fmt::Display for EmptyText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no sentence contains a token")
    }
}

impl std::error::Error for EmptyText {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyEmbedder {
    dim: usize,
    seed: u64,
}

impl ToyEmbedder {
    /// # Panics
    /// If `dim` is 0.
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn bucket(&self, token: &str) -> usize {
        let mut h = FnvHasher::default();
        h.write(&self.seed.to_le_bytes());
        h.write(token.as_bytes());
        (h.finish() % self.dim as u64) as usize
    }

    /// L2-normalized token counts of one sentence; `None` when it has no tokens.
    pub fn embed_sentence(&self, sentence: &str) -> Option<Vec<f64>> {
        let tokens = tokenize(sentence);
        if tokens.is_empty() {
            return None;
        }
        let mut v = vec![0.0; self.dim];
        for t in tokens {
            v[self.bucket(&t.text.to_lowercase())] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Some(v)
    }

    /// Mean of the per-sentence vectors. Sentences without tokens are skipped.
    pub fn embed<S: AsRef<str>>(&self, sentences: &[S]) -> Result<Vec<f64>, EmptyText> {
        let vecs: Vec<Vec<f64>> = sentences
            .iter()
            .filter_map(|s| self.embed_sentence(s.as_ref()))
            .collect();
        if vecs.is_empty() {
            return Err(EmptyText);
        }
        let mut mean = vec![0.0; self.dim];
        for v in &vecs {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        let n = vecs.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}

impl Default for ToyEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM, 0)
    }
}
