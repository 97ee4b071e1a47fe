//! Shared domain types.
//!
//! Everything here is validated on construction and immutable afterwards, so
//! values can be shared freely between worker threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Violations of a domain type invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("invalid synset id {0:?}: expected `<lemma>.<n|v|a|r|s>.<NN>`")]
    InvalidSynsetId(String),
    #[error("bounding box must have finite, non-negative coordinates and w > 0, h > 0 (got [{x}, {y}, {w}, {h}])")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("image {0:?} must have positive width and height")]
    InvalidImageSize(String),
    #[error("corpus {0:?} has no sentences")]
    EmptyCorpus(String),
    #[error("embedding matrix: {0}")]
    InvalidMatrix(String),
    #[error("failure for query {query_id:?} has gt_rank {gt_rank}; failures need rank >= 2")]
    NotAFailure { query_id: String, gt_rank: usize },
}

/// WordNet synset name such as `zebra.n.01`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SynsetId(String);

impl SynsetId {
    pub fn new(s: impl Into<String>) -> Result<Self, TypeError> {
        let s = s.into();
        if is_valid_synset(&s) {
            Ok(Self(s))
        } else {
            Err(TypeError::InvalidSynsetId(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The lemma part, e.g. `zebra` for `zebra.n.01`.
    pub fn lemma(&self) -> &str {
        // validated: at least two dots from the right
        let end = self.0.len() - 5;
        &self.0[..end]
    }
}

fn is_valid_synset(s: &str) -> bool {
    let mut parts = s.rsplitn(3, '.');
    let (Some(index), Some(pos), Some(lemma)) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    index.len() == 2
        && index.bytes().all(|b| b.is_ascii_digit())
        && matches!(pos, "n" | "v" | "a" | "r" | "s")
        && !lemma.is_empty()
        && lemma
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b"_-'.".contains(&b))
}

impl TryFrom<String> for SynsetId {
    type Error = TypeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<SynsetId> for String {
    fn from(id: SynsetId) -> Self {
        id.0
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Axis-aligned box in absolute pixels of the owning image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, TypeError> {
        let ok = [x, y, w, h].iter().all(|v| v.is_finite() && *v >= 0.0) && w > 0.0 && h > 0.0;
        if ok {
            Ok(Self { x, y, w, h })
        } else {
            Err(TypeError::InvalidBox { x, y, w, h })
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// One annotated object: a synset and its box.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptInstance {
    pub synset: SynsetId,
    pub bbox: BoundingBox,
}

/// All concept instances annotated for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    image_id: String,
    width: u32,
    height: u32,
    instances: Vec<ConceptInstance>,
}

impl ImageAnnotation {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        instances: Vec<ConceptInstance>,
    ) -> Result<Self, TypeError> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(TypeError::EmptyField("image_id"));
        }
        if width == 0 || height == 0 {
            return Err(TypeError::InvalidImageSize(image_id));
        }
        Ok(Self {
            image_id,
            width,
            height,
            instances,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn image_area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }

    pub fn instances(&self) -> &[ConceptInstance] {
        &self.instances
    }

    /// Deduplicated synsets present in the image.
    pub fn concept_set(&self) -> BTreeSet<&SynsetId> {
        self.instances.iter().map(|i| &i.synset).collect()
    }

    /// Multiplicity of every synset category.
    pub fn multiset(&self) -> BTreeMap<&SynsetId, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(&inst.synset).or_insert(0) += 1;
        }
        counts
    }

    /// Instances of one category, in annotation order.
    pub fn instances_of<'a>(
        &'a self,
        synset: &'a SynsetId,
    ) -> impl Iterator<Item = &'a ConceptInstance> + 'a {
        self.instances.iter().filter(move |i| &i.synset == synset)
    }
}

/// Annotations addressable by image id.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    items: Vec<ImageAnnotation>,
    by_id: HashMap<String, usize>,
}

impl AnnotationIndex {
    /// Later duplicates of an id are ignored; run validation first to catch them.
    pub fn new(items: Vec<ImageAnnotation>) -> Self {
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, a) in items.iter().enumerate() {
            by_id.entry(a.image_id.clone()).or_insert(i);
        }
        Self { items, by_id }
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageAnnotation> {
        self.by_id.get(image_id).map(|&i| &self.items[i])
    }

    pub fn items(&self) -> &[ImageAnnotation] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A caption query and the id of the image it describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub image_id: String,
    pub text: String,
}

/// The region descriptions of one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub image_id: String,
    pub sentences: Vec<String>,
}

impl CorpusRecord {
    pub fn new(image_id: impl Into<String>, sentences: Vec<String>) -> Result<Self, TypeError> {
        let rec = Self {
            image_id: image_id.into(),
            sentences,
        };
        rec.check()?;
        Ok(rec)
    }

    pub(crate) fn check(&self) -> Result<(), TypeError> {
        if self.image_id.is_empty() {
            return Err(TypeError::EmptyField("image_id"));
        }
        if self.sentences.is_empty() {
            return Err(TypeError::EmptyCorpus(self.image_id.clone()));
        }
        Ok(())
    }
}

/// Dense row-per-item matrix of embeddings, held in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// `data` is row-major with `ids.len() * dim` entries.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self, TypeError> {
        if dim == 0 {
            return Err(TypeError::InvalidMatrix("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(TypeError::InvalidMatrix(format!(
                "{} ids x dim {} needs {} values, got {}",
                ids.len(),
                dim,
                ids.len() * dim,
                data.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(TypeError::InvalidMatrix(format!("duplicate id {id:?}")));
            }
        }
        for (id, row) in ids.iter().zip(data.chunks_exact(dim)) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(TypeError::InvalidMatrix(format!("row {id:?} has non-finite entries")));
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(TypeError::InvalidMatrix(format!("row {id:?} has zero norm")));
            }
        }
        Ok(Self { ids, dim, data })
    }

    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self, TypeError> {
        let dim = rows.first().map_or(0, |(_, r)| r.len());
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, row) in rows {
            if row.len() != dim {
                return Err(TypeError::InvalidMatrix(format!(
                    "row {id:?} has length {}, expected {dim}",
                    row.len()
                )));
            }
            ids.push(id);
            data.extend(row);
        }
        Self::new(ids, dim, data)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// A query whose ground-truth image was not ranked first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub query_id: String,
    pub gt_image_id: String,
    pub retrieved_image_id: String,
    pub gt_rank: usize,
}

impl FailureRecord {
    pub fn new(
        query_id: impl Into<String>,
        gt_image_id: impl Into<String>,
        retrieved_image_id: impl Into<String>,
        gt_rank: usize,
    ) -> Result<Self, TypeError> {
        let rec = Self {
            query_id: query_id.into(),
            gt_image_id: gt_image_id.into(),
            retrieved_image_id: retrieved_image_id.into(),
            gt_rank,
        };
        rec.check()?;
        Ok(rec)
    }

    pub(crate) fn check(&self) -> Result<(), TypeError> {
        if self.gt_rank < 2 {
            return Err(TypeError::NotAFailure {
                query_id: self.query_id.clone(),
                gt_rank: self.gt_rank,
            });
        }
        Ok(())
    }
}
