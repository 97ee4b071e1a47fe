//! Ranking, explainable failure metrics and adversarial re-ranking for
//! text-to-image retrieval.
//!
//! The crate ranks every corpus against every query by cosine similarity,
//! reports the usual Recall@k / MRR@k / median rank numbers, and then explains
//! each failure (ground truth not at rank 1) by comparing the annotated scene
//! concepts of the ground-truth and retrieved images:
//!
//! * **CA** concept agreement: share of ground-truth synsets also retrieved.
//! * **NCS** non-common concept similarity: mean WordNet path similarity of an
//!   optimal pairing of the synsets exclusive to each image.
//! * **CE** concept enumeration: multiplicity mismatch over shared synsets.
//! * **SD** size disagreement: optimally paired same-synset boxes whose
//!   relative areas differ by at least a threshold.
//!
//! The [`adversarial`] module perturbs salient query attributes (antonyms,
//! colors, sizes) and measures how ground-truth ranks move.

pub mod adversarial;
pub mod color;
pub mod ingest;
pub mod matching;
pub mod ranker;
pub mod rules;
pub mod text;
pub mod types;
pub mod validate;
pub mod wordnet;
pub mod xmetrics;

pub use adversarial::{
    perturb, perturb_all, rerank_delta, AdversarialError, Perturbation, PerturbationKind, PerturbationSpec,
    PerturbedQuery, RerankDelta,
};
pub use color::{ColorTable, NamedColor};
pub use matching::{max_weight_full_matching, min_weight_full_matching, Matching, WeightedBipartiteGraph};
pub use ranker::{rank_all, rank_positions, summarize, RankError, RankPosition, RankResult, RankSummary};
pub use types::{
    AnnotationIndex, BoundingBox, ConceptInstance, CorpusRecord, EmbeddingMatrix, FailureRecord, ImageAnnotation,
    QueryRecord, SynsetId, TypeError,
};
pub use validate::{validate_dataset, Defect, ValidationReport};
pub use wordnet::{SynsetGraph, SynsetGraphBuilder, WordnetError};
pub use xmetrics::{aggregate, explain_all, explain_failure, FailureExplanation, GlobalReport, XMetricsError};
pub use rules::{label_distribution, mine_rules, HumanLabelRecord, Label, Rule, RulesError};
