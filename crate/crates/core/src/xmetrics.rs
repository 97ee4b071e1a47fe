//! Explainable failure metrics: CA, NCS, CE and SD, per failure and in aggregate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{max_weight_full_matching, min_weight_full_matching, WeightedBipartiteGraph};
use crate::types::{AnnotationIndex, FailureRecord, ImageAnnotation, SynsetId};
use crate::wordnet::{SynsetGraph, WordnetError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XMetricsError {
    #[error("ground-truth image {0:?} has no annotated concepts")]
    EmptyGroundTruthConcepts(String),
    #[error("size threshold must be finite and > 0 (got {0})")]
    InvalidThreshold(f64),
    #[error("no annotation for image {0:?}")]
    UnknownImage(String),
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Wordnet(#[from] WordnetError),
}

/// Share of ground-truth synsets that also appear in the retrieved image.
pub fn concept_agreement(gt: &ImageAnnotation, rt: &ImageAnnotation) -> Result<f64, XMetricsError> {
    let g = gt.concept_set();
    if g.is_empty() {
        return Err(XMetricsError::EmptyGroundTruthConcepts(gt.image_id().to_owned()));
    }
    let r = rt.concept_set();
    Ok(g.intersection(&r).count() as f64 / g.len() as f64)
}

/// `(gt synset, retrieved synset, path similarity)`.
pub type NcsPair = (SynsetId, SynsetId, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct NonCommonSimilarity {
    /// `None` when either image has no exclusive synsets.
    pub ncs: Option<f64>,
    pub pairs: Vec<NcsPair>,
}

/// Average path similarity of the best pairing between the synsets exclusive
/// to each image. Unreachable pairs weigh 0.
pub fn non_common_similarity(
    gt: &ImageAnnotation,
    rt: &ImageAnnotation,
    graph: &SynsetGraph,
) -> Result<NonCommonSimilarity, WordnetError> {
    let (g, r) = (gt.concept_set(), rt.concept_set());
    let dg: Vec<&SynsetId> = g.difference(&r).copied().collect();
    let dr: Vec<&SynsetId> = r.difference(&g).copied().collect();
    if dg.is_empty() || dr.is_empty() {
        return Ok(NonCommonSimilarity { ncs: None, pairs: Vec::new() });
    }
    let mut w = Vec::with_capacity(dg.len() * dr.len());
    for a in &dg {
        for b in &dr {
            w.push(match graph.path_similarity(a, b) {
                Ok(ps) => ps,
                Err(WordnetError::Unreachable(..)) => 0.0,
                Err(e) => return Err(e),
            });
        }
    }
    let bg = WeightedBipartiteGraph::new(dg.len(), dr.len(), w).expect("finite non-empty weights");
    let m = max_weight_full_matching(&bg);
    let pairs = m
        .pairs
        .iter()
        .map(|&(i, j)| (dg[i].clone(), dr[j].clone(), bg.weight(i, j)))
        .collect();
    Ok(NonCommonSimilarity { ncs: m.average(), pairs })
}

/// Sum of multiplicity differences over synsets present in both images.
pub fn concept_enumeration(gt: &ImageAnnotation, rt: &ImageAnnotation) -> usize {
    let r = rt.multiset();
    gt.multiset()
        .iter()
        .filter_map(|(s, &mg)| r.get(s).map(|&mr| mg.abs_diff(mr)))
        .sum()
}

/// Optimal same-synset box pairing for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySizes {
    pub synset: SynsetId,
    /// Relative area difference of each matched pair, gt order.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeDisagreement {
    pub binary_count: usize,
    pub match_count: usize,
    /// `binary_count / match_count`, `None` without common categories.
    pub avg: Option<f64>,
    /// Sum over categories of the mean matched difference.
    pub optimistic: f64,
    pub categories: Vec<CategorySizes>,
}

/// `|a - b| / min(a, b)` for area fractions `a`, `b > 0`.
pub fn relative_area_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.min(b)
}

/// Pairs the boxes of every common category by least relative area
/// difference and counts pairs at or above `threshold`.
pub fn size_disagreement(
    gt: &ImageAnnotation,
    rt: &ImageAnnotation,
    threshold: f64,
) -> Result<SizeDisagreement, XMetricsError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(XMetricsError::InvalidThreshold(threshold));
    }
    let r_counts = rt.multiset();
    let mut out = SizeDisagreement {
        binary_count: 0,
        match_count: 0,
        avg: None,
        optimistic: 0.0,
        categories: Vec::new(),
    };
    for synset in gt.multiset().keys().filter(|s| r_counts.contains_key(*s)) {
        let fractions = |img: &ImageAnnotation| -> Vec<f64> {
            img.instances_of(synset)
                .map(|i| i.bbox.area() / img.image_area())
                .collect()
        };
        let (ag, ar) = (fractions(gt), fractions(rt));
        let w = ag
            .iter()
            .flat_map(|a| ar.iter().map(move |b| relative_area_difference(*a, *b)))
            .collect();
        let bg = WeightedBipartiteGraph::new(ag.len(), ar.len(), w).expect("finite non-empty weights");
        let m = min_weight_full_matching(&bg);
        let differences: Vec<f64> = m.pairs.iter().map(|&(i, j)| bg.weight(i, j)).collect();
        out.binary_count += differences.iter().filter(|&&d| d >= threshold).count();
        out.match_count += differences.len();
        out.optimistic += m.average().unwrap_or(0.0);
        out.categories.push(CategorySizes {
            synset: (*synset).clone(),
            differences,
        });
    }
    if out.match_count > 0 {
        out.avg = Some(out.binary_count as f64 / out.match_count as f64);
    }
    Ok(out)
}

/// All four metrics for one failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureExplanation {
    pub failure: FailureRecord,
    pub ca: f64,
    pub ncs: Option<f64>,
    pub ncs_pairs: Vec<NcsPair>,
    pub ce: usize,
    pub sd_binary_count: usize,
    pub sd_match_count: usize,
    pub sd_avg: Option<f64>,
    pub sd_optimistic: f64,
}

fn lookup<'a>(annotations: &'a AnnotationIndex, id: &str) -> Result<&'a ImageAnnotation, XMetricsError> {
    annotations
        .get(id)
        .ok_or_else(|| XMetricsError::UnknownImage(id.to_owned()))
}

pub fn explain_failure(
    failure: &FailureRecord,
    annotations: &AnnotationIndex,
    graph: &SynsetGraph,
    threshold: f64,
) -> Result<FailureExplanation, XMetricsError> {
    let gt = lookup(annotations, &failure.gt_image_id)?;
    let rt = lookup(annotations, &failure.retrieved_image_id)?;
    let ca = concept_agreement(gt, rt)?;
    let ncs = non_common_similarity(gt, rt, graph)?;
    let sd = size_disagreement(gt, rt, threshold)?;
    Ok(FailureExplanation {
        failure: failure.clone(),
        ca,
        ncs: ncs.ncs,
        ncs_pairs: ncs.pairs,
        ce: concept_enumeration(gt, rt),
        sd_binary_count: sd.binary_count,
        sd_match_count: sd.match_count,
        sd_avg: sd.avg,
        sd_optimistic: sd.optimistic,
    })
}

/// [`explain_failure`] over many failures in parallel; output keeps input order.
pub fn explain_all(
    failures: &[FailureRecord],
    annotations: &AnnotationIndex,
    graph: &SynsetGraph,
    threshold: f64,
) -> Result<Vec<FailureExplanation>, XMetricsError> {
    failures
        .par_iter()
        .map(|f| explain_failure(f, annotations, graph, threshold))
        .collect()
}

/// Failure-set averages. Serialized column names follow the report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub n_failures: usize,
    #[serde(rename = "ca")]
    pub avg_ca: f64,
    #[serde(rename = "ncs")]
    pub avg_ncs: Option<f64>,
    #[serde(rename = "ce")]
    pub ce_avg: f64,
    pub ce_mode: usize,
    /// Mean of the binary per-failure SD.
    #[serde(rename = "sd")]
    pub avg_sd: Option<f64>,
    pub sd_optimistic: Option<f64>,
    pub obj_hit: u64,
    pub obj_miss: u64,
    pub matched_synset_pct: f64,
    pub avg_enum_disagreement_pct: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

/// Most frequent value; the smallest one wins a tie.
fn mode(values: impl Iterator<Item = usize>) -> Option<usize> {
    let mut counts = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(usize, usize)>, (v, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((v, c)),
        })
        .map(|(v, _)| v)
}

pub fn aggregate(
    explanations: &[FailureExplanation],
    annotations: &AnnotationIndex,
) -> Result<GlobalReport, XMetricsError> {
    if explanations.is_empty() {
        return Err(XMetricsError::EmptyInput);
    }
    let (mut obj_hit, mut obj_miss) = (0u64, 0u64);
    let (mut common_synsets, mut gt_synsets) = (0usize, 0usize);
    let mut enum_pct = Vec::with_capacity(explanations.len());
    for e in explanations {
        let gt = lookup(annotations, &e.failure.gt_image_id)?;
        let rt = lookup(annotations, &e.failure.retrieved_image_id)?;
        let (mg, mr) = (gt.multiset(), rt.multiset());
        if mg.is_empty() {
            return Err(XMetricsError::EmptyGroundTruthConcepts(gt.image_id().to_owned()));
        }
        let mut hit = 0usize;
        let mut common = 0usize;
        let mut unequal = 0usize;
        for (s, &g) in &mg {
            if let Some(&r) = mr.get(s) {
                hit += g.min(r);
                common += 1;
                unequal += usize::from(g != r);
            }
        }
        obj_hit += hit as u64;
        obj_miss += (gt.instances().len() - hit) as u64;
        common_synsets += common;
        gt_synsets += mg.len();
        enum_pct.push(unequal as f64 / mg.len() as f64 * 100.0);
    }
    Ok(GlobalReport {
        n_failures: explanations.len(),
        avg_ca: mean(explanations.iter().map(|e| e.ca)).unwrap(),
        avg_ncs: mean(explanations.iter().filter_map(|e| e.ncs)),
        ce_avg: mean(explanations.iter().map(|e| e.ce as f64)).unwrap(),
        ce_mode: mode(explanations.iter().map(|e| e.ce)).unwrap(),
        avg_sd: mean(explanations.iter().filter_map(|e| e.sd_avg)),
        sd_optimistic: mean(
            explanations
                .iter()
                .filter(|e| e.sd_match_count > 0)
                .map(|e| e.sd_optimistic),
        ),
        obj_hit,
        obj_miss,
        matched_synset_pct: common_synsets as f64 / gt_synsets as f64 * 100.0,
        avg_enum_disagreement_pct: mean(enum_pct.into_iter()).unwrap(),
    })
}
