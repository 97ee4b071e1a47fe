//! Path similarity and adjective antonyms over a preprocessed WordNet export.
//!
//! The graph holds noun synsets with undirected hypernym/hyponym adjacency and
//! a symmetric adjective antonym table keyed by lemma. Path similarity is
//! `1 / (1 + d)` where `d` is the breadth-first distance between two synsets.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::num::NonZeroUsize;
use std::sync::Mutex;

use lru::LruCache;
use thiserror::Error;

use crate::types::SynsetId;

const DEFAULT_CACHE_CAPACITY: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordnetError {
    #[error("unknown synset {0}")]
    UnknownSynset(String),
    #[error("no hypernym path between {0} and {1}")]
    Unreachable(String, String),
    #[error("synset {0} declared twice")]
    DuplicateSynset(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
}

/// Incrementally assembles a [`SynsetGraph`]. Edges may only reference nodes
/// that were added before them.
#[derive(Debug, Default)]
pub struct SynsetGraphBuilder {
    names: Vec<SynsetId>,
    index: HashMap<SynsetId, u32>,
    edges: Vec<(u32, u32)>,
    antonyms: BTreeMap<String, BTreeSet<String>>,
}

impl SynsetGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_synset(&mut self, id: SynsetId) -> Result<(), WordnetError> {
        if self.index.contains_key(&id) {
            return Err(WordnetError::DuplicateSynset(id.to_string()));
        }
        self.index.insert(id.clone(), self.names.len() as u32);
        self.names.push(id);
        Ok(())
    }

    pub fn add_hypernym(&mut self, child: &SynsetId, parent: &SynsetId) -> Result<(), WordnetError> {
        let c = self.lookup(child)?;
        let p = self.lookup(parent)?;
        if c == p {
            return Err(WordnetError::SelfLoop(child.to_string()));
        }
        self.edges.push((c, p));
        Ok(())
    }

    /// Registers `a` and `b` as antonyms of each other.
    pub fn add_antonym(&mut self, a: &str, b: &str) {
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        self.antonyms.entry(a.clone()).or_default().insert(b.clone());
        self.antonyms.entry(b).or_default().insert(a);
    }

    fn lookup(&self, id: &SynsetId) -> Result<u32, WordnetError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| WordnetError::UnknownSynset(id.to_string()))
    }

    pub fn build(self) -> SynsetGraph {
        self.build_with_cache(DEFAULT_CACHE_CAPACITY)
    }

    pub fn build_with_cache(self, capacity: usize) -> SynsetGraph {
        let mut adjacency = vec![Vec::new(); self.names.len()];
        let mut hypernyms = Vec::with_capacity(self.edges.len());
        let mut seen = std::collections::HashSet::new();
        for (c, p) in self.edges {
            if seen.insert((c, p)) {
                hypernyms.push((c, p));
                adjacency[c as usize].push(p);
                adjacency[p as usize].push(c);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        SynsetGraph {
            names: self.names,
            index: self.index,
            adjacency,
            hypernyms,
            antonyms: self.antonyms,
            cache: NonZeroUsize::new(capacity).map(|cap| Mutex::new(LruCache::new(cap))),
        }
    }
}

/// Noun taxonomy plus adjective antonym table. Immutable once built; the
/// distance cache is internally synchronized so queries may run concurrently.
pub struct SynsetGraph {
    names: Vec<SynsetId>,
    index: HashMap<SynsetId, u32>,
    adjacency: Vec<Vec<u32>>,
    hypernyms: Vec<(u32, u32)>,
    antonyms: BTreeMap<String, BTreeSet<String>>,
    cache: Option<Mutex<LruCache<(u32, u32), Option<u32>>>>,
}

impl std::fmt::Debug for SynsetGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SynsetGraph")
            .field("synsets", &self.names.len())
            .field("hypernym_edges", &self.hypernyms.len())
            .field("antonym_lemmas", &self.antonyms.len())
            .finish()
    }
}

impl PartialEq for SynsetGraph {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.adjacency == other.adjacency
            && self.antonyms == other.antonyms
    }
}

impl SynsetGraph {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: &SynsetId) -> bool {
        self.index.contains_key(id)
    }

    /// Synsets in declaration order.
    pub fn synsets(&self) -> &[SynsetId] {
        &self.names
    }

    /// `(child, parent)` hypernym edges in declaration order, duplicates removed.
    pub fn hypernym_edges(&self) -> impl Iterator<Item = (&SynsetId, &SynsetId)> {
        self.hypernyms
            .iter()
            .map(|&(c, p)| (&self.names[c as usize], &self.names[p as usize]))
    }

    /// The full symmetric antonym table.
    pub fn antonym_table(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.antonyms
    }

    fn node(&self, id: &SynsetId) -> Result<u32, WordnetError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| WordnetError::UnknownSynset(id.to_string()))
    }

    /// Number of edges on the shortest hypernym/hyponym path, `None` when the
    /// two synsets lie in different components.
    pub fn distance(&self, a: &SynsetId, b: &SynsetId) -> Result<Option<u32>, WordnetError> {
        let (a, b) = (self.node(a)?, self.node(b)?);
        if a == b {
            return Ok(Some(0));
        }
        let key = (a.min(b), a.max(b));
        if let Some(cache) = &self.cache {
            if let Some(d) = cache.lock().unwrap().get(&key) {
                return Ok(*d);
            }
        }
        let d = self.bfs(key.0, key.1);
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().put(key, d);
        }
        Ok(d)
    }

    fn bfs(&self, from: u32, to: u32) -> Option<u32> {
        let mut dist = vec![u32::MAX; self.names.len()];
        let mut queue = VecDeque::new();
        dist[from as usize] = 0;
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            let next = dist[v as usize] + 1;
            for &w in &self.adjacency[v as usize] {
                if dist[w as usize] == u32::MAX {
                    if w == to {
                        return Some(next);
                    }
                    dist[w as usize] = next;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// `1 / (1 + d)` over the shortest path. Fails with
    /// [`WordnetError::Unreachable`] when no path exists.
    pub fn path_similarity(&self, a: &SynsetId, b: &SynsetId) -> Result<f64, WordnetError> {
        match self.distance(a, b)? {
            Some(d) => Ok(1.0 / (1.0 + f64::from(d))),
            None => Err(WordnetError::Unreachable(a.to_string(), b.to_string())),
        }
    }

    /// Antonyms of an adjective lemma; empty for unknown words.
    pub fn antonyms_of(&self, lemma: &str) -> BTreeSet<String> {
        self.antonyms
            .get(&lemma.to_lowercase())
            .cloned()
            .unwrap_or_default()
    }

    /// Borrowing variant of [`Self::antonyms_of`]; `lemma` must be lowercase.
    pub fn antonyms_ref(&self, lemma: &str) -> Option<&BTreeSet<String>> {
        self.antonyms.get(lemma).filter(|s| !s.is_empty())
    }
}
