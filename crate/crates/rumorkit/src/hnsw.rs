//! Hierarchical navigable-small-world index over normalized vectors, with a
//! brute-force kNN oracle for recall measurement.
//!
//! Vectors are normalized at insert time, so cosine distance reduces to
//! `1 - dot`. Construction is single-writer; a finished index is immutable
//! and safe to query from many threads.

use crate::embed;
use crate::model::{EmbeddingRecord, Label, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BinaryHeap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("level draw must lie in (0, 1], got {0}")]
    OutOfRangeDraw(f64),
    #[error("index is empty")]
    EmptyIndex,
    #[error("no valid entry nodes at layer {layer}")]
    EmptyIndexLayer { layer: usize },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("query vector has zero norm")]
    ZeroNorm,
    #[error("query vector has a non-finite component")]
    NonFiniteQuery,
    #[error("records list is empty")]
    EmptyCorpus,
    #[error("invalid index parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Record(#[from] ModelError),
}

/// Construction and search parameters.
///
/// `level_multiplier` defaults to `1 / ln(m)`, which keeps the expected layer
/// population geometric in `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Maximum neighbors per node on layers >= 1.
    pub m: usize,
    /// Maximum neighbors per node on layer 0.
    pub m0: usize,
    /// Beam width while inserting.
    pub ef_construction: usize,
    /// Beam width while querying.
    pub ef_search: usize,
    /// Scale of the exponential level distribution.
    pub level_multiplier: f64,
    pub rng_seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        let m = 16;
        Self {
            m,
            m0: 2 * m,
            ef_construction: 200,
            ef_search: 100,
            level_multiplier: 1.0 / (m as f64).ln(),
            rng_seed: 0,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.m < 2 {
            return Err(IndexError::InvalidParams(format!("m must be >= 2, got {}", self.m)));
        }
        if self.m0 < self.m {
            return Err(IndexError::InvalidParams(format!(
                "m0 must be >= m, got m0={} m={}",
                self.m0, self.m
            )));
        }
        if self.ef_construction < self.m {
            return Err(IndexError::InvalidParams(format!(
                "ef_construction must be >= m, got {}",
                self.ef_construction
            )));
        }
        if self.ef_search < 1 {
            return Err(IndexError::InvalidParams("ef_search must be >= 1".into()));
        }
        if !(self.level_multiplier > 0.0) || !self.level_multiplier.is_finite() {
            return Err(IndexError::InvalidParams(format!(
                "level_multiplier must be positive, got {}",
                self.level_multiplier
            )));
        }
        Ok(())
    }
}

/// Layer drawn from a uniform variate: `floor(-ln(u) * level_multiplier)`.
pub fn assign_level(uniform_draw: f64, level_multiplier: f64) -> Result<usize, IndexError> {
    if !(uniform_draw > 0.0 && uniform_draw <= 1.0) {
        return Err(IndexError::OutOfRangeDraw(uniform_draw));
    }
    Ok((-uniform_draw.ln() * level_multiplier).floor() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub(crate) id: String,
    pub(crate) label: Label,
    pub(crate) event: Option<String>,
    pub(crate) level: usize,
    /// Normalized vector.
    pub(crate) vector: Vec<f64>,
    /// Adjacency lists for layers 0..=level.
    pub(crate) neighbors: Vec<Vec<u32>>,
}

/// Heap entry ordered by (distance, node index) so traversal is deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Layered proximity graph over normalized vectors.
#[derive(Debug, Clone)]
pub struct HnswIndex {
    params: HnswParams,
    dim: usize,
    nodes: Vec<Node>,
    entry_point: Option<u32>,
    id_lookup: HashMap<String, u32>,
    rng: ChaCha8Rng,
}

impl HnswIndex {
    pub fn new(dim: usize, params: HnswParams) -> Result<Self, IndexError> {
        params.validate()?;
        if dim == 0 {
            return Err(IndexError::InvalidParams("dimension must be positive".into()));
        }
        let rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        Ok(Self {
            params,
            dim,
            nodes: Vec::new(),
            entry_point: None,
            id_lookup: HashMap::new(),
            rng,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn contains(&self, id: &str) -> bool {
        self.id_lookup.contains_key(id)
    }

    pub fn node_index(&self, id: &str) -> Option<u32> {
        self.id_lookup.get(id).copied()
    }

    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.node_index(id).map(|i| self.nodes[i as usize].label)
    }

    pub fn event_of(&self, id: &str) -> Option<&str> {
        self.node_index(id)
            .and_then(|i| self.nodes[i as usize].event.as_deref())
    }

    pub fn max_level(&self) -> Option<usize> {
        self.entry_point.map(|e| self.nodes[e as usize].level)
    }

    pub(crate) fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Neighbor count of one node at one layer (0 when the node does not
    /// reach the layer); used by diagnostics and tests.
    pub fn degree_at(&self, node: u32, layer: usize) -> usize {
        self.nodes[node as usize]
            .neighbors
            .get(layer)
            .map_or(0, Vec::len)
    }

    pub(crate) fn entry_point(&self) -> Option<u32> {
        self.entry_point
    }

    /// Rebuilds an index from persisted parts. The level generator is
    /// fast-forwarded by one draw per node so later inserts continue the
    /// original sequence.
    pub(crate) fn from_parts(
        params: HnswParams,
        dim: usize,
        nodes: Vec<Node>,
        entry_point: Option<u32>,
    ) -> Result<Self, IndexError> {
        let mut index = Self::new(dim, params)?;
        for (i, node) in nodes.iter().enumerate() {
            if index.id_lookup.insert(node.id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicateId(node.id.clone()));
            }
        }
        for _ in 0..nodes.len() {
            let _: f64 = index.rng.random();
        }
        index.nodes = nodes;
        index.entry_point = entry_point;
        Ok(index)
    }

    fn distance(&self, query: &[f64], node: u32) -> f64 {
        1.0 - embed::dot(query, &self.nodes[node as usize].vector)
    }

    /// Best-first expansion at one layer: keeps a candidate frontier and a
    /// result set of at most `ef`, stopping when the nearest unexpanded
    /// candidate is farther than the worst result. Results are sorted
    /// ascending by distance.
    pub fn search_layer(
        &self,
        query: &[f64],
        entries: &[u32],
        ef: usize,
        layer: usize,
    ) -> Result<Vec<(u32, f64)>, IndexError> {
        if entries.is_empty()
            || entries.iter().any(|&e| {
                (e as usize) >= self.nodes.len() || self.nodes[e as usize].level < layer
            })
        {
            return Err(IndexError::EmptyIndexLayer { layer });
        }
        let ef = ef.max(1);
        let mut visited = vec![false; self.nodes.len()];
        let mut frontier = BinaryHeap::new(); // min-heap via Reverse
        let mut results: BinaryHeap<HeapEntry> = BinaryHeap::new(); // max-heap, worst on top

        for &entry in entries {
            if visited[entry as usize] {
                continue;
            }
            visited[entry as usize] = true;
            let entry = HeapEntry {
                dist: self.distance(query, entry),
                node: entry,
            };
            frontier.push(std::cmp::Reverse(entry));
            results.push(entry);
        }
        while results.len() > ef {
            results.pop();
        }

        while let Some(std::cmp::Reverse(current)) = frontier.pop() {
            let worst = results.peek().map_or(f64::INFINITY, |w| w.dist);
            if results.len() >= ef && current.dist > worst {
                break;
            }
            for &neighbor in &self.nodes[current.node as usize].neighbors[layer] {
                if visited[neighbor as usize] {
                    continue;
                }
                visited[neighbor as usize] = true;
                let dist = self.distance(query, neighbor);
                let worst = results.peek().map_or(f64::INFINITY, |w| w.dist);
                if results.len() < ef || dist < worst {
                    let entry = HeapEntry {
                        dist,
                        node: neighbor,
                    };
                    frontier.push(std::cmp::Reverse(entry));
                    results.push(entry);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let sorted = results.into_sorted_vec();
        Ok(sorted.into_iter().map(|e| (e.node, e.dist)).collect())
    }

    /// Diversity-aware neighbor selection: walking candidates by ascending
    /// distance, a candidate is kept only while it is closer to the base
    /// point than to every already-kept neighbor. Deterministic given the
    /// candidate order.
    fn select_neighbors(&self, candidates: &[(u32, f64)], cap: usize) -> Vec<(u32, f64)> {
        let mut selected: Vec<(u32, f64)> = Vec::with_capacity(cap);
        for &(node, dist) in candidates {
            if selected.len() == cap {
                break;
            }
            let diverse = selected.iter().all(|&(kept, _)| {
                dist < 1.0
                    - embed::dot(
                        &self.nodes[node as usize].vector,
                        &self.nodes[kept as usize].vector,
                    )
            });
            if diverse {
                selected.push((node, dist));
            }
        }
        selected
    }

    /// Re-selects the neighbor list of `node` at `layer` when it overflows;
    /// evicted edges are removed from both endpoints to preserve symmetry.
    fn prune_neighbors(&mut self, node: u32, layer: usize, cap: usize) {
        if self.nodes[node as usize].neighbors[layer].len() <= cap {
            return;
        }
        let base = self.nodes[node as usize].vector.clone();
        let mut ranked: Vec<HeapEntry> = self.nodes[node as usize].neighbors[layer]
            .iter()
            .map(|&n| HeapEntry {
                dist: 1.0 - embed::dot(&base, &self.nodes[n as usize].vector),
                node: n,
            })
            .collect();
        ranked.sort_unstable();
        let candidates: Vec<(u32, f64)> = ranked.iter().map(|e| (e.node, e.dist)).collect();
        let kept: Vec<u32> = self
            .select_neighbors(&candidates, cap)
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        let evicted: Vec<u32> = candidates
            .iter()
            .map(|&(n, _)| n)
            .filter(|n| !kept.contains(n))
            .collect();
        self.nodes[node as usize].neighbors[layer] = kept;
        for other in evicted {
            self.nodes[other as usize].neighbors[layer].retain(|&n| n != node);
        }
    }

    /// Inserts a validated record; the vector is normalized on entry.
    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<(), IndexError> {
        let record = crate::model::validate_record(record, self.dim)?;
        if self.contains(&record.id) {
            return Err(IndexError::DuplicateId(record.id));
        }
        // one uniform draw per insert, mapped from [0, 1) to (0, 1]
        let u = 1.0 - self.rng.random::<f64>();
        let level = assign_level(u, self.params.level_multiplier)?;
        let vector = embed::normalize(&record.vector).map_err(|_| IndexError::ZeroNorm)?;

        let new_index = self.nodes.len() as u32;
        self.nodes.push(Node {
            id: record.id.clone(),
            label: record.label,
            event: record.event.clone(),
            level,
            vector: vector.clone(),
            neighbors: vec![Vec::new(); level + 1],
        });
        self.id_lookup.insert(record.id, new_index);

        let Some(entry) = self.entry_point else {
            self.entry_point = Some(new_index);
            return Ok(());
        };
        let top_level = self.nodes[entry as usize].level;

        // greedy descent with a beam of one through layers above the new level
        let mut entries = vec![entry];
        for layer in (level + 1..=top_level).rev() {
            entries = self
                .search_layer(&vector, &entries, 1, layer)?
                .into_iter()
                .map(|(n, _)| n)
                .collect();
        }

        // connect on every shared layer, carrying the candidate set downwards
        for layer in (0..=level.min(top_level)).rev() {
            let candidates = self.search_layer(&vector, &entries, self.params.ef_construction, layer)?;
            let cap = if layer == 0 { self.params.m0 } else { self.params.m };
            for (neighbor, _) in self.select_neighbors(&candidates, cap) {
                self.nodes[new_index as usize].neighbors[layer].push(neighbor);
                self.nodes[neighbor as usize].neighbors[layer].push(new_index);
                self.prune_neighbors(neighbor, layer, cap);
            }
            entries = candidates.into_iter().map(|(n, _)| n).collect();
        }

        if level > top_level {
            self.entry_point = Some(new_index);
        }
        Ok(())
    }

    /// Top-k most similar records with an explicit query beam width.
    pub fn search_knn_with_ef(
        &self,
        query: &[f64],
        k: usize,
        ef: usize,
    ) -> Result<Vec<(String, f64)>, IndexError> {
        let entry = self.entry_point.ok_or(IndexError::EmptyIndex)?;
        if query.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            }
            .into());
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFiniteQuery);
        }
        let query = embed::normalize(query).map_err(|_| IndexError::ZeroNorm)?;

        let mut entries = vec![entry];
        for layer in (1..=self.nodes[entry as usize].level).rev() {
            entries = self
                .search_layer(&query, &entries, 1, layer)?
                .into_iter()
                .map(|(n, _)| n)
                .collect();
        }
        let results = self.search_layer(&query, &entries, ef.max(k), 0)?;
        Ok(results
            .into_iter()
            .take(k)
            .map(|(node, dist)| {
                let similarity = (1.0 - dist).clamp(-1.0, 1.0);
                (self.nodes[node as usize].id.clone(), similarity)
            })
            .collect())
    }

    /// Top-k most similar records, ranked by descending cosine similarity.
    ///
    /// When `k` exceeds the corpus size, every record is returned.
    pub fn search_knn(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, IndexError> {
        self.search_knn_with_ef(query, k, self.params.ef_search)
    }

    /// Walks the whole graph checking the structural invariants: per-layer
    /// symmetry, degree caps, layer containment, and the entry point holding
    /// the maximum level.
    pub fn validate_structure(&self) -> Result<(), String> {
        match self.entry_point {
            None => {
                if !self.nodes.is_empty() {
                    return Err("non-empty index without an entry point".into());
                }
                return Ok(());
            }
            Some(entry) => {
                let max_level = self.nodes.iter().map(|n| n.level).max().unwrap_or(0);
                if self.nodes[entry as usize].level != max_level {
                    return Err(format!(
                        "entry point level {} is not the maximum {max_level}",
                        self.nodes[entry as usize].level
                    ));
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.neighbors.len() != node.level + 1 {
                return Err(format!("node {i} has {} layers, expected {}", node.neighbors.len(), node.level + 1));
            }
            let norm = embed::norm(&node.vector);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(format!("node {i} vector norm {norm} is not 1"));
            }
            for (layer, list) in node.neighbors.iter().enumerate() {
                let cap = if layer == 0 { self.params.m0 } else { self.params.m };
                if list.len() > cap {
                    return Err(format!("node {i} layer {layer} degree {} exceeds cap {cap}", list.len()));
                }
                let mut seen = std::collections::HashSet::new();
                for &neighbor in list {
                    if neighbor as usize == i {
                        return Err(format!("node {i} has a self edge at layer {layer}"));
                    }
                    if !seen.insert(neighbor) {
                        return Err(format!("node {i} has duplicate edges at layer {layer}"));
                    }
                    let other = self
                        .nodes
                        .get(neighbor as usize)
                        .ok_or_else(|| format!("node {i} links to missing node {neighbor}"))?;
                    if other.level < layer {
                        return Err(format!(
                            "node {i} links to node {neighbor} above its level at layer {layer}"
                        ));
                    }
                    if !other.neighbors[layer].contains(&(i as u32)) {
                        return Err(format!(
                            "edge {i} -> {neighbor} at layer {layer} is not symmetric"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact top-k by cosine similarity over raw records, descending; ties broken
/// by lexicographic id. The independent oracle for [`HnswIndex::search_knn`].
pub fn brute_force_knn(
    records: &[EmbeddingRecord],
    query: &[f64],
    k: usize,
) -> Result<Vec<(String, f64)>, IndexError> {
    if records.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let mut scored = Vec::with_capacity(records.len());
    for record in records {
        let similarity = embed::cosine_similarity(&record.vector, query).map_err(|e| match e {
            embed::EmbedError::ZeroNorm => IndexError::ZeroNorm,
            other => IndexError::InvalidParams(other.to_string()),
        })?;
        scored.push((record.id.clone(), similarity));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
