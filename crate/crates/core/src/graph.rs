//! Layered-graph data model for Sankey diagrams.
//!
//! A diagram with `n` layers becomes an `n`-level graph whose edges connect
//! successive levels only. Links spanning more than one level are broken into
//! unit-span chains through inserted dummy vertices, each chain edge carrying
//! the original flow value. In cycle form, links from the last level back to
//! the first are kept aside as the binding edge set.
//!
//! Levels and edge pairs are indexed 0-based throughout the library; the file
//! formats use 1-based levels and are converted at the boundary.

use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;

/// Node declaration: id plus 0-based level index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNode {
    pub id: String,
    pub level: usize,
}

/// One flow between two declared nodes. Values must be strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowLink {
    pub source: String,
    pub target: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMeta {
    pub name: String,
    pub dummy: bool,
}

/// Edge inside one edge set; endpoints are canonical vertex indices of the
/// pair's two levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S> {
    pub src: usize,
    pub dst: usize,
    pub weight: S,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("flow value for link {link_source} -> {target} must be positive, got {value}")]
    NonPositiveValue {
        link_source: String,
        target: String,
        value: f64,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("duplicate link {0} -> {1}")]
    DuplicateLink(String, String),
    #[error("unknown node id `{0}`")]
    UnknownId(String),
    #[error("self link on `{0}`")]
    SelfLink(String),
    #[error("link {link_source} (level {from}) -> {target} (level {to}) does not span forward; only last-to-first links are allowed, and only in cycle form")]
    BackwardLink {
        link_source: String,
        target: String,
        from: usize,
        to: usize,
    },
    #[error("graph needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("level {0} has no vertices")]
    EmptyLevel(usize),
    #[error("vertex `{id}` in level {level} has no {side} neighbors")]
    MissingNeighbors {
        id: String,
        level: usize,
        side: &'static str,
    },
    #[error("edge pair index {index} out of range for {pairs} pairs")]
    PairOutOfRange { index: usize, pairs: usize },
    #[error("edge pair {0} addresses binding links, but the graph has none")]
    NoBindingEdges(usize),
    #[error("ordering does not cover level {level}: expected {expected} vertices, got {got}")]
    OrderingSizeMismatch {
        level: usize,
        expected: usize,
        got: usize,
    },
    #[error("ordering for level {level} is not a permutation")]
    OrderingNotPermutation { level: usize },
}

/// Vertices partitioned into levels, weighted edges between successive
/// levels, and an optional binding edge set closing the cycle form.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph<S> {
    levels: Vec<Vec<VertexMeta>>,
    edge_sets: Vec<Vec<Edge<S>>>,
    binding: Option<Vec<Edge<S>>>,
}

impl<S: Scalar> LayeredGraph<S> {
    /// Build a layered graph from node declarations and links.
    ///
    /// Canonical vertex order within each level is declaration order, with
    /// dummies appended in link order. A link spanning k levels becomes k
    /// chained edges through k-1 dummies, each carrying the link's value.
    /// With `cycle` set, links from the last level to the first populate the
    /// binding edge set instead.
    pub fn ingest(
        nodes: &[FlowNode],
        links: &[FlowLink],
        cycle: bool,
    ) -> Result<Self, GraphError> {
        let mut by_id: HashMap<String, (usize, usize)> = HashMap::new();
        let mut n = 0usize;
        for node in nodes {
            n = n.max(node.level + 1);
        }
        if n < 2 {
            return Err(GraphError::TooFewLevels(n));
        }

        let mut levels: Vec<Vec<VertexMeta>> = vec![Vec::new(); n];
        for node in nodes {
            let idx = levels[node.level].len();
            if by_id
                .insert(node.id.clone(), (node.level, idx))
                .is_some()
            {
                return Err(GraphError::DuplicateId(node.id.clone()));
            }
            levels[node.level].push(VertexMeta {
                name: node.id.clone(),
                dummy: false,
            });
        }

        let mut edge_sets: Vec<Vec<Edge<S>>> = vec![Vec::new(); n - 1];
        let mut binding: Vec<Edge<S>> = Vec::new();
        let mut seen_links: HashMap<(usize, usize, usize, usize), ()> = HashMap::new();

        for link in links {
            if link.value <= 0.0 {
                return Err(GraphError::NonPositiveValue {
                    link_source: link.source.clone(),
                    target: link.target.clone(),
                    value: link.value,
                });
            }
            if link.source == link.target {
                return Err(GraphError::SelfLink(link.source.clone()));
            }
            let &(src_level, src_idx) = by_id
                .get(link.source.as_str())
                .ok_or_else(|| GraphError::UnknownId(link.source.clone()))?;
            let &(dst_level, dst_idx) = by_id
                .get(link.target.as_str())
                .ok_or_else(|| GraphError::UnknownId(link.target.clone()))?;
            if seen_links
                .insert((src_level, src_idx, dst_level, dst_idx), ())
                .is_some()
            {
                return Err(GraphError::DuplicateLink(
                    link.source.clone(),
                    link.target.clone(),
                ));
            }
            let weight = S::from_config(link.value);

            if dst_level > src_level {
                // Forward link, chained through dummies when it spans levels.
                let mut prev = (src_level, src_idx);
                for crossed in src_level + 1..dst_level {
                    let idx = levels[crossed].len();
                    let name =
                        format!("__{}_to_{}_at_{}", link.source, link.target, crossed + 1);
                    if by_id.insert(name.clone(), (crossed, idx)).is_some() {
                        return Err(GraphError::DuplicateId(name));
                    }
                    levels[crossed].push(VertexMeta { name, dummy: true });
                    edge_sets[prev.0].push(Edge {
                        src: prev.1,
                        dst: idx,
                        weight,
                    });
                    prev = (crossed, idx);
                }
                edge_sets[prev.0].push(Edge {
                    src: prev.1,
                    dst: dst_idx,
                    weight,
                });
            } else if cycle && src_level == n - 1 && dst_level == 0 {
                binding.push(Edge {
                    src: src_idx,
                    dst: dst_idx,
                    weight,
                });
            } else {
                return Err(GraphError::BackwardLink {
                    link_source: link.source.clone(),
                    target: link.target.clone(),
                    from: src_level + 1,
                    to: dst_level + 1,
                });
            }
        }

        let graph = LayeredGraph {
            levels,
            edge_sets,
            binding: cycle.then_some(binding),
        };
        graph.validate_connectivity()?;
        Ok(graph)
    }

    /// Every level must be populated, every non-first vertex needs a left
    /// neighbor and every non-last vertex a right neighbor; the barycentre
    /// normalizations divide by those neighbor weight sums, so anything
    /// less is rejected up front. Binding links do not count: stage 1 runs
    /// on the parallel skeleton alone.
    fn validate_connectivity(&self) -> Result<(), GraphError> {
        let n = self.levels.len();
        for (i, level) in self.levels.iter().enumerate() {
            if level.is_empty() {
                return Err(GraphError::EmptyLevel(i + 1));
            }
        }
        for i in 0..n {
            let mut has_left = vec![i == 0; self.levels[i].len()];
            let mut has_right = vec![i == n - 1; self.levels[i].len()];
            if i > 0 {
                for e in &self.edge_sets[i - 1] {
                    has_left[e.dst] = true;
                }
            }
            if i < n - 1 {
                for e in &self.edge_sets[i] {
                    has_right[e.src] = true;
                }
            }
            for (idx, meta) in self.levels[i].iter().enumerate() {
                let side = if !has_left[idx] {
                    "left"
                } else if !has_right[idx] {
                    "right"
                } else {
                    continue;
                };
                return Err(GraphError::MissingNeighbors {
                    id: meta.name.clone(),
                    level: i + 1,
                    side,
                });
            }
        }
        Ok(())
    }

    /// Replace every weight w by max(log10 w, 1e-6), keeping weights
    /// strictly positive so the stochastic normalizations stay defined.
    pub fn log_transform(&self) -> Self {
        let eps = S::from_config(1e-6);
        let map = |edges: &Vec<Edge<S>>| {
            edges
                .iter()
                .map(|e| Edge {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight.log10().max(eps),
                })
                .collect()
        };
        LayeredGraph {
            levels: self.levels.clone(),
            edge_sets: self.edge_sets.iter().map(map).collect(),
            binding: self.binding.as_ref().map(map),
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    pub fn vertex(&self, level: usize, idx: usize) -> &VertexMeta {
        &self.levels[level][idx]
    }

    pub fn level_vertices(&self, level: usize) -> &[VertexMeta] {
        &self.levels[level]
    }

    /// Number of addressable edge pairs: n-1 parallel pairs, plus the
    /// binding pair (index n-1) when the graph is cycle form.
    pub fn pair_count(&self) -> usize {
        self.edge_sets.len() + usize::from(self.has_binding())
    }

    pub fn parallel_pair_count(&self) -> usize {
        self.edge_sets.len()
    }

    /// Levels joined by edge pair `pair`: (i, i+1) for parallel pairs,
    /// (n-1, 0) for the binding pair.
    pub fn pair_levels(&self, pair: usize) -> (usize, usize) {
        if pair < self.edge_sets.len() {
            (pair, pair + 1)
        } else {
            (self.levels.len() - 1, 0)
        }
    }

    /// Edges of pair `pair`; index n-1 addresses the binding set.
    pub fn edges(&self, pair: usize) -> Result<&[Edge<S>], GraphError> {
        if pair < self.edge_sets.len() {
            Ok(&self.edge_sets[pair])
        } else if pair == self.edge_sets.len() {
            match &self.binding {
                Some(b) if !b.is_empty() => Ok(b),
                _ => Err(GraphError::NoBindingEdges(pair)),
            }
        } else {
            Err(GraphError::PairOutOfRange {
                index: pair,
                pairs: self.pair_count(),
            })
        }
    }

    pub fn has_binding(&self) -> bool {
        self.binding.as_ref().is_some_and(|b| !b.is_empty())
    }

    pub fn is_cycle_form(&self) -> bool {
        self.binding.is_some()
    }

    pub fn binding_edges(&self) -> Option<&[Edge<S>]> {
        self.binding.as_deref().filter(|b| !b.is_empty())
    }

    pub fn edge_count(&self) -> usize {
        self.edge_sets.iter().map(Vec::len).sum::<usize>()
            + self.binding.as_ref().map_or(0, Vec::len)
    }

    /// Total weight entering a vertex, binding links included.
    pub fn in_flow(&self, level: usize, idx: usize) -> S {
        let mut total = S::zero();
        if level > 0 {
            for e in &self.edge_sets[level - 1] {
                if e.dst == idx {
                    total = total + e.weight;
                }
            }
        } else if let Some(binding) = &self.binding {
            for e in binding {
                if e.dst == idx {
                    total = total + e.weight;
                }
            }
        }
        total
    }

    /// Total weight leaving a vertex, binding links included.
    pub fn out_flow(&self, level: usize, idx: usize) -> S {
        let n = self.levels.len();
        let mut total = S::zero();
        if level < n - 1 {
            for e in &self.edge_sets[level] {
                if e.src == idx {
                    total = total + e.weight;
                }
            }
        } else if let Some(binding) = &self.binding {
            for e in binding {
                if e.src == idx {
                    total = total + e.weight;
                }
            }
        }
        total
    }
}

/// Per-level permutations: `level(i)[rank]` is the canonical index of the
/// vertex placed at `rank`, rank 0 uppermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    per_level: Vec<Vec<usize>>,
}

impl Ordering {
    pub fn new(per_level: Vec<Vec<usize>>) -> Self {
        Ordering { per_level }
    }

    pub fn identity<S: Scalar>(g: &LayeredGraph<S>) -> Self {
        Ordering {
            per_level: (0..g.level_count())
                .map(|i| (0..g.level_size(i)).collect())
                .collect(),
        }
    }

    pub fn level(&self, i: usize) -> &[usize] {
        &self.per_level[i]
    }

    pub fn per_level(&self) -> &[Vec<usize>] {
        &self.per_level
    }

    pub fn set_level(&mut self, i: usize, perm: Vec<usize>) {
        self.per_level[i] = perm;
    }

    /// rank-of lookup for one level: `ranks[canonical_idx] = rank`.
    pub fn ranks(&self, i: usize) -> Vec<usize> {
        let mut ranks = vec![0usize; self.per_level[i].len()];
        for (rank, &idx) in self.per_level[i].iter().enumerate() {
            ranks[idx] = rank;
        }
        ranks
    }

    pub fn reversed(&self) -> Self {
        Ordering {
            per_level: self
                .per_level
                .iter()
                .map(|perm| perm.iter().rev().copied().collect())
                .collect(),
        }
    }

    pub fn validate<S: Scalar>(&self, g: &LayeredGraph<S>) -> Result<(), GraphError> {
        if self.per_level.len() != g.level_count() {
            return Err(GraphError::OrderingSizeMismatch {
                level: self.per_level.len().min(g.level_count()),
                expected: g.level_count(),
                got: self.per_level.len(),
            });
        }
        for (i, perm) in self.per_level.iter().enumerate() {
            let size = g.level_size(i);
            if perm.len() != size {
                return Err(GraphError::OrderingSizeMismatch {
                    level: i,
                    expected: size,
                    got: perm.len(),
                });
            }
            let mut seen = vec![false; size];
            for &idx in perm {
                if idx >= size || seen[idx] {
                    return Err(GraphError::OrderingNotPermutation { level: i });
                }
                seen[idx] = true;
            }
        }
        Ok(())
    }
}

/// Stable descending sort of one level by position value: ties keep the
/// current rank order, larger positions rank higher (uppermost).
pub fn order_by_descending_position<S: Scalar>(current: &[usize], positions: &[S]) -> Vec<usize> {
    let mut perm = current.to_vec();
    perm.sort_by(|&a, &b| {
        positions[b]
            .partial_cmp(&positions[a])
            .expect("position values must be finite")
    });
    perm
}
