//! Exhaustive cosine ranking and the classic retrieval metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{EmbeddingMatrix, FailureRecord};

/// Queries scored together by one worker.
const QUERY_BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("query {0:?} has no ground truth")]
    MissingGroundTruth(String),
    #[error("ground truth {image_id:?} of query {query_id:?} is not a corpus id")]
    UnknownGroundTruth { query_id: String, image_id: String },
    #[error("nothing to summarize")]
    EmptyInput,
    #[error("cutoff k must be at least 1")]
    InvalidCutoff,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `dot(u, v) / (|u| |v|)` in `f64`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, RankError> {
    if u.len() != v.len() {
        return Err(RankError::DimMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(RankError::ZeroNorm);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Where one query's ground truth landed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPosition {
    pub query_id: String,
    pub gt_image_id: String,
    /// 1-based.
    pub gt_rank: usize,
    pub top1_id: String,
}

impl RankPosition {
    pub fn is_failure(&self) -> bool {
        self.gt_rank > 1
    }

    pub fn to_failure(&self) -> Option<FailureRecord> {
        self.is_failure().then(|| FailureRecord {
            query_id: self.query_id.clone(),
            gt_image_id: self.gt_image_id.clone(),
            retrieved_image_id: self.top1_id.clone(),
            gt_rank: self.gt_rank,
        })
    }
}

/// Full ranking for one query: every corpus row index, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub position: RankPosition,
    pub candidates: Vec<usize>,
}

impl RankResult {
    pub fn candidate_ids<'a>(&'a self, corpus: &'a EmbeddingMatrix) -> impl Iterator<Item = &'a str> + 'a {
        self.candidates.iter().map(move |&i| corpus.ids()[i].as_str())
    }
}

/// Shared scoring state: corpus norms and the id order used to break ties.
struct Scorer<'a> {
    queries: &'a EmbeddingMatrix,
    corpus: &'a EmbeddingMatrix,
    corpus_norms: Vec<f64>,
    id_order: Vec<usize>,
    gt_index: Vec<usize>,
}

impl<'a> Scorer<'a> {
    fn new(
        queries: &'a EmbeddingMatrix,
        corpus: &'a EmbeddingMatrix,
        ground_truth: &HashMap<String, String>,
    ) -> Result<Self, RankError> {
        if queries.dim() != corpus.dim() {
            return Err(RankError::DimMismatch(queries.dim(), corpus.dim()));
        }
        let by_id: HashMap<&str, usize> = corpus
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let gt_index = queries
            .ids()
            .iter()
            .map(|q| {
                let img = ground_truth
                    .get(q)
                    .ok_or_else(|| RankError::MissingGroundTruth(q.clone()))?;
                by_id
                    .get(img.as_str())
                    .copied()
                    .ok_or_else(|| RankError::UnknownGroundTruth {
                        query_id: q.clone(),
                        image_id: img.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut sorted: Vec<usize> = (0..corpus.len()).collect();
        sorted.sort_by(|&a, &b| corpus.ids()[a].cmp(&corpus.ids()[b]));
        let mut id_order = vec![0; corpus.len()];
        for (rank, idx) in sorted.into_iter().enumerate() {
            id_order[idx] = rank;
        }
        Ok(Self {
            queries,
            corpus,
            corpus_norms: corpus.rows().map(norm).collect(),
            id_order,
            gt_index,
        })
    }

    fn scores(&self, q: usize) -> Vec<f64> {
        let row = self.queries.row(q);
        let nq = norm(row);
        self.corpus
            .rows()
            .zip(&self.corpus_norms)
            .map(|(c, nc)| dot(row, c) / (nq * nc))
            .collect()
    }

    /// Descending score, then ascending corpus id.
    fn cmp(&self, scores: &[f64], a: usize, b: usize) -> Ordering {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(self.id_order[a].cmp(&self.id_order[b]))
    }

    fn position(&self, q: usize, gt_rank: usize, top1: usize) -> RankPosition {
        RankPosition {
            query_id: self.queries.ids()[q].clone(),
            gt_image_id: self.corpus.ids()[self.gt_index[q]].clone(),
            gt_rank,
            top1_id: self.corpus.ids()[top1].clone(),
        }
    }

    fn full(&self, q: usize) -> RankResult {
        let scores = self.scores(q);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| self.cmp(&scores, a, b));
        let gt = self.gt_index[q];
        let gt_rank = order.iter().position(|&i| i == gt).unwrap() + 1;
        RankResult {
            position: self.position(q, gt_rank, order[0]),
            candidates: order,
        }
    }

    /// Same answer as [`Self::full`] without sorting: count what beats the ground truth.
    fn compact(&self, q: usize) -> RankPosition {
        let scores = self.scores(q);
        let gt = self.gt_index[q];
        let mut ahead = 0;
        let mut top1 = 0;
        for i in 0..scores.len() {
            if self.cmp(&scores, i, gt) == Ordering::Less {
                ahead += 1;
            }
            if self.cmp(&scores, i, top1) == Ordering::Less {
                top1 = i;
            }
        }
        self.position(q, ahead + 1, top1)
    }

    fn run<T: Send>(&self, f: impl Fn(&Self, usize) -> T + Sync) -> Vec<T> {
        let idx: Vec<usize> = (0..self.queries.len()).collect();
        idx.par_chunks(QUERY_BLOCK)
            .flat_map_iter(|block| block.iter().map(|&q| f(self, q)).collect::<Vec<_>>())
            .collect()
    }
}

/// Scores every query against every corpus and sorts the candidates.
/// `ground_truth` maps query id to the id of its corpus row.
pub fn rank_all(
    queries: &EmbeddingMatrix,
    corpus: &EmbeddingMatrix,
    ground_truth: &HashMap<String, String>,
) -> Result<Vec<RankResult>, RankError> {
    let scorer = Scorer::new(queries, corpus, ground_truth)?;
    Ok(scorer.run(Scorer::full))
}

/// Like [`rank_all`] but keeps only the ground-truth rank and top hit, in
/// `O(N)` memory per query.
pub fn rank_positions(
    queries: &EmbeddingMatrix,
    corpus: &EmbeddingMatrix,
    ground_truth: &HashMap<String, String>,
) -> Result<Vec<RankPosition>, RankError> {
    let scorer = Scorer::new(queries, corpus, ground_truth)?;
    Ok(scorer.run(Scorer::compact))
}

/// Aggregate retrieval metrics over a set of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub n_queries: usize,
    pub recall_at: BTreeMap<usize, f64>,
    pub mrr_at: BTreeMap<usize, f64>,
    pub median_rank: f64,
    pub fail_fraction: f64,
    pub failures: Vec<FailureRecord>,
}

/// `[1, 5, 10, n]` with duplicates removed.
pub fn default_cutoffs(n: usize) -> Vec<usize> {
    let mut ks = vec![1, 5, 10, n.max(1)];
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Recall@k, MRR@k (queries ranked beyond k contribute 0), lower median rank
/// and the failure list.
pub fn summarize(results: &[RankPosition], ks: &[usize]) -> Result<RankSummary, RankError> {
    if results.is_empty() {
        return Err(RankError::EmptyInput);
    }
    if ks.contains(&0) {
        return Err(RankError::InvalidCutoff);
    }
    let n = results.len() as f64;
    let mut recall_at = BTreeMap::new();
    let mut mrr_at = BTreeMap::new();
    for &k in ks {
        let within = results.iter().filter(|r| r.gt_rank <= k);
        let (hits, rr) = within.fold((0usize, 0.0f64), |(h, s), r| (h + 1, s + 1.0 / r.gt_rank as f64));
        recall_at.insert(k, hits as f64 / n);
        mrr_at.insert(k, rr / n);
    }
    let mut ranks: Vec<usize> = results.iter().map(|r| r.gt_rank).collect();
    ranks.sort_unstable();
    let median_rank = ranks[(ranks.len() - 1) / 2] as f64;
    let failures: Vec<FailureRecord> = results.iter().filter_map(RankPosition::to_failure).collect();
    Ok(RankSummary {
        n_queries: results.len(),
        recall_at,
        mrr_at,
        median_rank,
        fail_fraction: failures.len() as f64 / n,
        failures,
    })
}

/// Per-query CSV: `query_id,gt_rank,top1_id`.
pub fn write_rank_csv(w: impl Write, results: &[RankPosition]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["query_id", "gt_rank", "top1_id"])?;
    for r in results {
        wtr.write_record([r.query_id.as_str(), &r.gt_rank.to_string(), r.top1_id.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(rank: usize) -> RankPosition {
        RankPosition {
            query_id: format!("q{rank}"),
            gt_image_id: "g".into(),
            gt_rank: rank,
            top1_id: if rank == 1 { "g".into() } else { "other".into() },
        }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let c = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((c - 0.974_631_846).abs() < 1e-9, "{c}");
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(RankError::ZeroNorm));
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(RankError::DimMismatch(1, 2)));
    }

    #[test]
    fn single_query_single_corpus() {
        let q = EmbeddingMatrix::from_rows(vec![("q".into(), vec![0.3, 0.1])]).unwrap();
        let c = EmbeddingMatrix::from_rows(vec![("c".into(), vec![-1.0, 2.0])]).unwrap();
        let gt = HashMap::from([("q".to_string(), "c".to_string())]);
        let r = rank_all(&q, &c, &gt).unwrap();
        assert_eq!(r[0].position.gt_rank, 1);
        assert_eq!(r[0].candidates, vec![0]);
    }

    #[test]
    fn exact_match_wins_over_orthogonal_rows() {
        let q = EmbeddingMatrix::from_rows(vec![("q".into(), vec![0.0, 1.0, 0.0])]).unwrap();
        let c = EmbeddingMatrix::from_rows(vec![
            ("a".into(), vec![1.0, 0.0, 0.0]),
            ("b".into(), vec![0.0, 1.0, 0.0]),
            ("c".into(), vec![0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let gt = HashMap::from([("q".to_string(), "b".to_string())]);
        let r = rank_all(&q, &c, &gt).unwrap();
        assert_eq!(r[0].position.gt_rank, 1);
        assert_eq!(r[0].candidate_ids(&c).collect::<Vec<_>>(), vec!["b", "a", "c"]);
        assert_eq!(rank_positions(&q, &c, &gt).unwrap()[0], r[0].position);
    }

    #[test]
    fn ties_break_by_corpus_id() {
        let q = EmbeddingMatrix::from_rows(vec![("q".into(), vec![1.0, 0.0])]).unwrap();
        let c = EmbeddingMatrix::from_rows(vec![
            ("z".into(), vec![1.0, 0.0]),
            ("m".into(), vec![2.0, 0.0]),
            ("a".into(), vec![3.0, 0.0]),
        ])
        .unwrap();
        let gt = HashMap::from([("q".to_string(), "z".to_string())]);
        let r = rank_all(&q, &c, &gt).unwrap();
        assert_eq!(r[0].candidate_ids(&c).collect::<Vec<_>>(), vec!["a", "m", "z"]);
        assert_eq!(r[0].position.gt_rank, 3);
        assert_eq!(r[0].position.top1_id, "a");
        assert_eq!(rank_positions(&q, &c, &gt).unwrap()[0], r[0].position);
    }

    #[test]
    fn ground_truth_errors() {
        let q = EmbeddingMatrix::from_rows(vec![("q".into(), vec![1.0])]).unwrap();
        let c = EmbeddingMatrix::from_rows(vec![("c".into(), vec![1.0])]).unwrap();
        assert!(matches!(rank_all(&q, &c, &HashMap::new()), Err(RankError::MissingGroundTruth(_))));
        let gt = HashMap::from([("q".to_string(), "x".to_string())]);
        assert!(matches!(rank_all(&q, &c, &gt), Err(RankError::UnknownGroundTruth { .. })));
        let c2 = EmbeddingMatrix::from_rows(vec![("c".into(), vec![1.0, 0.0])]).unwrap();
        assert!(matches!(rank_all(&q, &c2, &gt), Err(RankError::DimMismatch(1, 2))));
    }

    #[test]
    fn all_first() {
        let s = summarize(&[pos(1), pos(1)], &[1, 5]).unwrap();
        assert_eq!(s.recall_at[&1], 1.0);
        assert_eq!(s.mrr_at[&5], 1.0);
        assert_eq!(s.median_rank, 1.0);
        assert!(s.failures.is_empty());
        assert_eq!(s.fail_fraction, 0.0);
    }

    #[test]
    fn ranks_1_2_4() {
        let s = summarize(&[pos(1), pos(2), pos(4)], &[1, 3]).unwrap();
        assert!((s.recall_at[&1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.mrr_at[&3] - 0.5).abs() < 1e-12);
        let all = summarize(&[pos(1), pos(2), pos(4)], &[4]).unwrap();
        assert!((all.mrr_at[&4] - 0.583_333_333_333).abs() < 1e-9);
        assert_eq!(all.median_rank, 2.0);
        assert_eq!(all.failures.len(), 2);
        assert_eq!(all.failures[1].retrieved_image_id, "other");
    }

    #[test]
    fn nothing_within_k() {
        let s = summarize(&[pos(3), pos(3), pos(3), pos(3)], &[2]).unwrap();
        assert_eq!(s.recall_at[&2], 0.0);
        assert_eq!(s.mrr_at[&2], 0.0);
    }

    #[test]
    fn even_count_takes_lower_median() {
        let s = summarize(&[pos(1), pos(2), pos(5), pos(9)], &[1]).unwrap();
        assert_eq!(s.median_rank, 2.0);
    }

    #[test]
    fn summarize_errors() {
        assert_eq!(summarize(&[], &[1]), Err(RankError::EmptyInput));
        assert_eq!(summarize(&[pos(1)], &[0]), Err(RankError::InvalidCutoff));
    }

    #[test]
    fn cutoffs() {
        assert_eq!(default_cutoffs(64), vec![1, 5, 10, 64]);
        assert_eq!(default_cutoffs(5), vec![1, 5, 10]);
    }

    #[test]
    fn rank_csv() {
        let mut out = Vec::new();
        write_rank_csv(&mut out, &[pos(1), pos(3)]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "query_id,gt_rank,top1_id\nq1,1,g\nq3,3,other\n");
    }
}
