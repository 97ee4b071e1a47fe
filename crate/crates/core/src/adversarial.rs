//! Attribute-level query perturbation and the rank shifts it causes.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{ColorTable, NamedColor};
use crate::ranker::{cosine_similarity, RankError, RankPosition};
use crate::text::{is_single_token, mirror_case, tokenize, Token};
use crate::types::{EmbeddingMatrix, QueryRecord};
use crate::wordnet::SynsetGraph;

pub const DEFAULT_COLOR_THRESHOLD: f64 = 150.0;
pub const SIZE_LARGE: [&str; 4] = ["large", "big", "enormous", "huge"];
pub const SIZE_SMALL: [&str; 4] = ["small", "little", "minor", "tiny"];

/// A query counts as re-embedded when `cos(original, perturbed)` is below
/// `1 - CHANGE_TOLERANCE`.
pub const CHANGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversarialError {
    #[error("no color at distance >= {threshold} from {color:?}")]
    NoDistantColor { color: String, threshold: f64 },
    #[error("color distance threshold must be finite and > 0 (got {0})")]
    InvalidThreshold(f64),
    #[error("query {0:?} missing from one of the rankings")]
    MissingQuery(String),
    #[error("no re-embedded queries to compare")]
    EmptyInput,
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Antonym,
    ColorAll,
    ColorIn,
    Size,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub rng_seed: u64,
    /// Minimum RGB distance between a color and its replacement.
    pub color_distance_threshold: f64,
    /// Replacement pool for [`PerturbationKind::ColorIn`].
    pub dataset_colors: BTreeSet<String>,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, rng_seed: u64) -> Self {
        Self {
            kind,
            rng_seed,
            color_distance_threshold: DEFAULT_COLOR_THRESHOLD,
            dataset_colors: BTreeSet::new(),
        }
    }

    fn check(&self) -> Result<(), AdversarialError> {
        let t = self.color_distance_threshold;
        let color = matches!(self.kind, PerturbationKind::ColorAll | PerturbationKind::ColorIn);
        if color && !(t.is_finite() && t > 0.0) {
            return Err(AdversarialError::InvalidThreshold(t));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    /// Index of the first replaced token.
    pub position: usize,
    pub old_token: String,
    pub new_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedQuery {
    pub query_id: String,
    pub original_text: String,
    pub perturbed_text: String,
    pub substitutions: Vec<Substitution>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Perturbation {
    Applied(PerturbedQuery),
    NotApplicable,
}

impl Perturbation {
    pub fn applied(self) -> Option<PerturbedQuery> {
        match self {
            Perturbation::Applied(p) => Some(p),
            Perturbation::NotApplicable => None,
        }
    }
}

/// Independent of the order in which queries are processed.
fn query_rng(seed: u64, query_id: &str) -> ChaCha8Rng {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(query_id.as_bytes());
    ChaCha8Rng::seed_from_u64(h.finish())
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Longest color name starting at token `i`, as `(word count, color)`.
/// Words of a multi-word name must be separated by whitespace only.
fn color_at<'t>(text: &str, tokens: &[Token<'_>], i: usize, colors: &'t ColorTable) -> Option<(usize, &'t NamedColor)> {
    let longest = colors.max_words().min(tokens.len() - i);
    (1..=longest).rev().find_map(|len| {
        let span = &tokens[i..i + len];
        let spaced = span
            .windows(2)
            .all(|w| text[w[0].end..w[1].start].chars().all(char::is_whitespace));
        if !spaced {
            return None;
        }
        let name = span.iter().map(|t| t.text.to_lowercase()).collect::<Vec<_>>().join(" ");
        colors.get(&name).map(|c| (len, c))
    })
}

/// Every table color mentioned anywhere in `texts`.
pub fn mentioned_colors<'a>(texts: impl IntoIterator<Item = &'a str>, colors: &ColorTable) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    for text in texts {
        let tokens = tokenize(text);
        let mut i = 0;
        while i < tokens.len() {
            match color_at(text, &tokens, i, colors) {
                Some((len, c)) => {
                    found.insert(c.name.clone());
                    i += len;
                }
                None => i += 1,
            }
        }
    }
    found
}

/// Rewrites every qualifying token of `query` according to `spec`.
pub fn perturb(
    query: &QueryRecord,
    spec: &PerturbationSpec,
    graph: &SynsetGraph,
    colors: &ColorTable,
) -> Result<Perturbation, AdversarialError> {
    spec.check()?;
    let text = query.text.as_str();
    let tokens = tokenize(text);
    let mut rng = query_rng(spec.rng_seed, &query.query_id);
    // (byte start, byte end, replacement, token position)
    let mut edits: Vec<(usize, usize, String, usize)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        let lower = tok.text.to_lowercase();
        let mut consumed = 1;
        match spec.kind {
            PerturbationKind::Antonym => {
                if let Some(set) = graph.antonyms_ref(&lower) {
                    let pool: Vec<&String> = set.iter().filter(|a| is_single_token(a)).collect();
                    if !pool.is_empty() {
                        let new = pick(&mut rng, &pool);
                        edits.push((tok.start, tok.end, mirror_case(tok.text, new), i));
                    }
                }
            }
            PerturbationKind::Size => {
                let pool = if SIZE_LARGE.contains(&lower.as_str()) {
                    Some(&SIZE_SMALL)
                } else if SIZE_SMALL.contains(&lower.as_str()) {
                    Some(&SIZE_LARGE)
                } else {
                    None
                };
                if let Some(pool) = pool {
                    let new = pick(&mut rng, pool);
                    edits.push((tok.start, tok.end, mirror_case(tok.text, new), i));
                }
            }
            PerturbationKind::ColorAll | PerturbationKind::ColorIn => {
                if let Some((len, old)) = color_at(text, &tokens, i, colors) {
                    let threshold = spec.color_distance_threshold;
                    let words = old.word_count();
                    let pool: Vec<&NamedColor> = colors
                        .colors()
                        .iter()
                        .filter(|c| {
                            c.word_count() == words
                                && c.name.split(' ').all(is_single_token)
                                && c.distance(old) >= threshold
                                && (spec.kind == PerturbationKind::ColorAll || spec.dataset_colors.contains(&c.name))
                        })
                        .collect();
                    if pool.is_empty() {
                        return Err(AdversarialError::NoDistantColor {
                            color: old.name.clone(),
                            threshold,
                        });
                    }
                    let new = pick(&mut rng, &pool);
                    assert!(new.distance(old) >= threshold);
                    let cased = tokens[i..i + len]
                        .iter()
                        .zip(new.name.split(' '))
                        .map(|(t, w)| mirror_case(t.text, w))
                        .collect::<Vec<_>>()
                        .join(" ");
                    edits.push((tok.start, tokens[i + len - 1].end, cased, i));
                    consumed = len;
                }
            }
        }
        i += consumed;
    }
    if edits.is_empty() {
        return Ok(Perturbation::NotApplicable);
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut substitutions = Vec::with_capacity(edits.len());
    for (start, end, new, position) in edits {
        out.push_str(&text[last..start]);
        out.push_str(&new);
        last = end;
        substitutions.push(Substitution {
            position,
            old_token: text[start..end].to_owned(),
            new_token: new,
        });
    }
    out.push_str(&text[last..]);
    Ok(Perturbation::Applied(PerturbedQuery {
        query_id: query.query_id.clone(),
        original_text: query.text.clone(),
        perturbed_text: out,
        substitutions,
    }))
}

/// Perturbs all queries in parallel and keeps the applicable ones, in input order.
pub fn perturb_all(
    queries: &[QueryRecord],
    spec: &PerturbationSpec,
    graph: &SynsetGraph,
    colors: &ColorTable,
) -> Result<Vec<PerturbedQuery>, AdversarialError> {
    let all: Vec<Perturbation> = queries
        .par_iter()
        .map(|q| perturb(q, spec, graph, colors))
        .collect::<Result<_, _>>()?;
    Ok(all.into_iter().filter_map(Perturbation::applied).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applicability {
    pub n_queries: usize,
    pub n_perturbed: usize,
    /// 0 for an empty query set.
    pub fraction: f64,
}

pub fn applicability_stats(n_queries: usize, perturbed: &[PerturbedQuery]) -> Applicability {
    let fraction = if n_queries == 0 {
        0.0
    } else {
        perturbed.len() as f64 / n_queries as f64
    };
    Applicability {
        n_queries,
        n_perturbed: perturbed.len(),
        fraction,
    }
}

/// Ids of adversarial rows whose embedding differs from the original row.
pub fn changed_representations(
    original: &EmbeddingMatrix,
    adversarial: &EmbeddingMatrix,
) -> Result<BTreeSet<String>, AdversarialError> {
    let mut changed = BTreeSet::new();
    for (i, id) in adversarial.ids().iter().enumerate() {
        let j = original
            .index_of(id)
            .ok_or_else(|| AdversarialError::MissingQuery(id.clone()))?;
        if cosine_similarity(original.row(j), adversarial.row(i))? < 1.0 - CHANGE_TOLERANCE {
            changed.insert(id.clone());
        }
    }
    Ok(changed)
}

/// How ground-truth ranks moved for re-embedded queries. "Lower" means a
/// larger rank number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankDelta {
    pub n_perturbed: usize,
    pub lower: usize,
    pub higher: usize,
    pub same: usize,
    pub lower_pct: f64,
    pub higher_pct: f64,
    pub same_pct: f64,
}

pub fn rerank_delta(
    original: &[RankPosition],
    adversarial: &[RankPosition],
    changed: &BTreeSet<String>,
) -> Result<RerankDelta, AdversarialError> {
    if changed.is_empty() {
        return Err(AdversarialError::EmptyInput);
    }
    let index = |rs: &'_ [RankPosition]| -> HashMap<String, usize> {
        rs.iter().map(|r| (r.query_id.clone(), r.gt_rank)).collect()
    };
    let (before, after) = (index(original), index(adversarial));
    let (mut lower, mut higher, mut same) = (0, 0, 0);
    for id in changed {
        let missing = || AdversarialError::MissingQuery(id.clone());
        let (b, a) = (*before.get(id).ok_or_else(missing)?, *after.get(id).ok_or_else(missing)?);
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => lower += 1,
            std::cmp::Ordering::Less => higher += 1,
            std::cmp::Ordering::Equal => same += 1,
        }
    }
    let n = changed.len();
    let pct = |c: usize| c as f64 / n as f64 * 100.0;
    Ok(RerankDelta {
        n_perturbed: n,
        lower,
        higher,
        same,
        lower_pct: pct(lower),
        higher_pct: pct(higher),
        same_pct: pct(same),
    })
}
