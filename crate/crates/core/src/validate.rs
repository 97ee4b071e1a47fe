//! Cross-file consistency checks for a loaded dataset.

use std::collections::HashSet;

use serde::Serialize;

use crate::types::{CorpusRecord, EmbeddingMatrix, ImageAnnotation, QueryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Annotation,
    Query,
    Corpus,
    QueryEmbedding,
    CorpusEmbedding,
}

/// One broken invariant found while validating a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Defect {
    /// A query's ground-truth image has no annotation.
    DanglingGroundTruth { query_id: String, image_id: String },
    /// A corpus record for an image that has no annotation.
    DanglingCorpus { image_id: String },
    /// An embedding row whose id matches no record of the expected kind.
    UnknownEmbeddingId { matrix: RecordKind, id: String },
    /// A record with no embedding row.
    MissingEmbedding { matrix: RecordKind, id: String },
    DimMismatch { query_dim: usize, corpus_dim: usize },
    DuplicateId { record: RecordKind, id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub defects: Vec<Defect>,
}

fn duplicates<'a>(
    ids: impl Iterator<Item = &'a str>,
    record: RecordKind,
    out: &mut Vec<Defect>,
) -> HashSet<&'a str> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            out.push(Defect::DuplicateId {
                record,
                id: id.to_string(),
            });
        }
    }
    seen
}

fn check_embedding_ids(
    matrix: &EmbeddingMatrix,
    kind: RecordKind,
    expected: &HashSet<&str>,
    out: &mut Vec<Defect>,
) {
    let present: HashSet<&str> = matrix.ids().iter().map(String::as_str).collect();
    for id in matrix.ids() {
        if !expected.contains(id.as_str()) {
            out.push(Defect::UnknownEmbeddingId {
                matrix: kind,
                id: id.clone(),
            });
        }
    }
    let mut missing: Vec<&str> = expected.difference(&present).copied().collect();
    missing.sort_unstable();
    out.extend(missing.into_iter().map(|id| Defect::MissingEmbedding {
        matrix: kind,
        id: id.to_string(),
    }));
}

/// Reports every broken cross reference, dimension mismatch and duplicate id.
/// Defects are collected, never raised.
pub fn validate_dataset(
    annotations: &[ImageAnnotation],
    queries: &[QueryRecord],
    corpora: &[CorpusRecord],
    query_embeddings: &EmbeddingMatrix,
    corpus_embeddings: &EmbeddingMatrix,
) -> ValidationReport {
    let mut defects = Vec::new();

    let images = duplicates(
        annotations.iter().map(ImageAnnotation::image_id),
        RecordKind::Annotation,
        &mut defects,
    );
    let query_ids = duplicates(
        queries.iter().map(|q| q.query_id.as_str()),
        RecordKind::Query,
        &mut defects,
    );
    let corpus_ids = duplicates(
        corpora.iter().map(|c| c.image_id.as_str()),
        RecordKind::Corpus,
        &mut defects,
    );
    // EmbeddingMatrix already rejects duplicate ids at construction.

    for q in queries {
        if !images.contains(q.image_id.as_str()) {
            defects.push(Defect::DanglingGroundTruth {
                query_id: q.query_id.clone(),
                image_id: q.image_id.clone(),
            });
        }
    }
    for c in corpora {
        if !images.contains(c.image_id.as_str()) {
            defects.push(Defect::DanglingCorpus {
                image_id: c.image_id.clone(),
            });
        }
    }

    if query_embeddings.dim() != corpus_embeddings.dim() {
        defects.push(Defect::DimMismatch {
            query_dim: query_embeddings.dim(),
            corpus_dim: corpus_embeddings.dim(),
        });
    }
    check_embedding_ids(query_embeddings, RecordKind::QueryEmbedding, &query_ids, &mut defects);
    check_embedding_ids(corpus_embeddings, RecordKind::CorpusEmbedding, &corpus_ids, &mut defects);

    ValidationReport {
        ok: defects.is_empty(),
        defects,
    }
}
