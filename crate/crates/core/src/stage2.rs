//! Stage 2: partition refinement.
//!
//! Every level tiles [0, 1] into equal blocks, one per vertex, assigned by
//! rank with rank 0 nearest 1 (uppermost, matching larger-position-is-higher
//! everywhere else). Each edge pins one point inside each endpoint's block;
//! a vertex's barycentre is then computed from the points its neighbors show
//! it, rather than from whole-vertex positions, which lets two vertices
//! trade places even when their plain barycentres tie.
//!
//! A sweep revisits levels in route order: recompute barycentres, re-sort
//! the level (stable ties), and when the level's ordering changed, reassign
//! blocks and rewrite the points it owns from the opposing points, scaled
//! into the new block. An unchanged level keeps its points, so a sweep that
//! changes nothing is a genuine fixed point. The run keeps the best ordering
//! seen, the input included, and never degrades it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crossing::{crossing_report, interconnection, CrossingReport};
use crate::graph::{order_by_descending_position, GraphError, LayeredGraph, Ordering};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum Stage2Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid stage-2 configuration: {0}")]
    InvalidConfig(String),
}

/// The block of one vertex: the sub-interval of [0, 1] its level assigns it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block<S> {
    pub level: usize,
    pub rank: usize,
    pub base: S,
    pub height: S,
}

impl<S: Scalar> Block<S> {
    /// Block for 0-based `rank` in a level of `size` vertices; rank 0 is
    /// uppermost and receives the block nearest 1.
    pub fn for_rank(level: usize, rank: usize, size: usize) -> Self {
        let size_s = S::from_config(size as f64);
        Block {
            level,
            rank,
            base: S::from_config((size - 1 - rank) as f64) / size_s,
            height: S::one() / size_s,
        }
    }
}

/// The two endpoint positions of one edge: `src` lies in the source
/// vertex's block, `dst` in the target's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoints<S> {
    pub src: S,
    pub dst: S,
}

/// Endpoint positions for every edge, aligned with the graph's edge sets
/// (binding pair last in cycle form).
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap<S> {
    pub per_pair: Vec<Vec<EdgePoints<S>>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Stage2Config {
    /// Mixing factor for the random component of the barycentre rows.
    pub alpha2: f64,
    /// Hard sweep bound M.
    pub max_sweeps: usize,
    /// Consecutive unchanged sweeps that declare convergence.
    pub stability_window: usize,
    pub seed: u64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            alpha2: 0.1,
            max_sweeps: 100,
            stability_window: 3,
            seed: 0,
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<(), Stage2Error> {
        if !(0.0..=1.0).contains(&self.alpha2) {
            return Err(Stage2Error::InvalidConfig(format!(
                "alpha2 must lie in [0, 1], got {}",
                self.alpha2
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Stage2Error::InvalidConfig("max_sweeps must be >= 1".into()));
        }
        if self.stability_window == 0 {
            return Err(Stage2Error::InvalidConfig(
                "stability_window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepRoute {
    /// Levels 2..n left to right.
    Forward,
    /// Levels n-1..1 right to left.
    Backward,
    /// All levels in circular order, wrapping neighbor sets through the
    /// binding pair.
    Cyclic,
}

/// Initial endpoint positions: the points a vertex owns toward one side are
/// spread evenly inside its block, ordered like the neighbors' own ranks,
/// the block split into (neighbor count + 1) equal segments with the
/// top-ranked neighbor's point uppermost.
pub fn init_points<S: Scalar>(g: &LayeredGraph<S>, ordering: &Ordering) -> PointMap<S> {
    let mut per_pair = Vec::with_capacity(g.pair_count());
    for pair in 0..g.pair_count() {
        let edges = g.edges(pair).expect("pair index within pair_count");
        let (left_level, right_level) = g.pair_levels(pair);
        let left_ranks = ordering.ranks(left_level);
        let right_ranks = ordering.ranks(right_level);
        let mut points = vec![
            EdgePoints {
                src: S::zero(),
                dst: S::zero()
            };
            edges.len()
        ];

        // Source-side points: group the pair's edges per source vertex.
        let mut by_src: Vec<Vec<usize>> = vec![Vec::new(); g.level_size(left_level)];
        let mut by_dst: Vec<Vec<usize>> = vec![Vec::new(); g.level_size(right_level)];
        for (e_idx, e) in edges.iter().enumerate() {
            by_src[e.src].push(e_idx);
            by_dst[e.dst].push(e_idx);
        }
        for (v, owned) in by_src.iter_mut().enumerate() {
            owned.sort_by_key(|&e_idx| right_ranks[edges[e_idx].dst]);
            let block = Block::<S>::for_rank(
                left_level,
                left_ranks[v],
                g.level_size(left_level),
            );
            let segments = S::from_config((owned.len() + 1) as f64);
            for (mu, &e_idx) in owned.iter().enumerate() {
                let coeff = S::from_config((owned.len() - mu) as f64) / segments;
                points[e_idx].src = block.base + coeff * block.height;
            }
        }
        for (v, owned) in by_dst.iter_mut().enumerate() {
            owned.sort_by_key(|&e_idx| left_ranks[edges[e_idx].src]);
            let block = Block::<S>::for_rank(
                right_level,
                right_ranks[v],
                g.level_size(right_level),
            );
            let segments = S::from_config((owned.len() + 1) as f64);
            for (mu, &e_idx) in owned.iter().enumerate() {
                let coeff = S::from_config((owned.len() - mu) as f64) / segments;
                points[e_idx].dst = block.base + coeff * block.height;
            }
        }
        per_pair.push(points);
    }
    PointMap { per_pair }
}

/// Two-sided barycentre from per-edge points: each side dots a stochastic
/// row against the dense vector of points the neighbors show this vertex
/// (zero at non-neighbors), and the result averages the available sides.
pub fn local_barycentre<S: Scalar>(
    left: Option<(&[S], &[S])>,
    right: Option<(&[S], &[S])>,
) -> S {
    let side = |pair: Option<(&[S], &[S])>| {
        pair.map(|(row, points)| {
            row.iter()
                .zip(points)
                .map(|(&r, &p)| r * p)
                .sum::<S>()
        })
    };
    match (side(left), side(right)) {
        (Some(l), Some(r)) => (l + r) / S::from_config(2.0),
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => S::zero(),
    }
}

// Per-vertex mixed stochastic rows for one pair; None where the vertex has
// no neighbors through the pair (possible on the binding pair only).
struct MixedRows<S> {
    // Indexed by the pair's right-level vertex, width = left level size.
    left: Vec<Option<Vec<S>>>,
    // Indexed by the pair's left-level vertex, width = right level size.
    right: Vec<Option<Vec<S>>>,
}

fn mixed_row<S: Scalar>(weights: Vec<S>, alpha: f64, rng: &mut impl Rng) -> Option<Vec<S>> {
    let sum: S = weights.iter().copied().sum();
    if sum <= S::zero() {
        return None;
    }
    let a = S::from_config(alpha);
    let keep = S::one() - a;
    let mut noise: Vec<S> = (0..weights.len())
        .map(|_| S::from_config(rng.random::<f64>()))
        .collect();
    let noise_sum: S = noise.iter().copied().sum();
    if noise_sum > S::zero() {
        for v in &mut noise {
            *v = *v / noise_sum;
        }
    }
    Some(
        weights
            .iter()
            .zip(&noise)
            .map(|(&w, &s)| keep * w / sum + a * s)
            .collect(),
    )
}

/// Refinement state for one run: ordering, points, and the mixed rows drawn
/// once up front so sweeps are deterministic and fixed points are real.
pub struct RefineState<'g, S> {
    graph: &'g LayeredGraph<S>,
    ordering: Ordering,
    points: PointMap<S>,
    rows: Vec<MixedRows<S>>,
    // Per (level, vertex): (neighbor index, pair, edge index) on each side.
    left_index: Vec<Vec<Vec<(usize, usize, usize)>>>,
    right_index: Vec<Vec<Vec<(usize, usize, usize)>>>,
}

impl<'g, S: Scalar> RefineState<'g, S> {
    pub fn new(
        graph: &'g LayeredGraph<S>,
        start: &Ordering,
        alpha2: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, Stage2Error> {
        start.validate(graph)?;
        let n = graph.level_count();
        let mut left_index: Vec<Vec<Vec<(usize, usize, usize)>>> = (0..n)
            .map(|i| vec![Vec::new(); graph.level_size(i)])
            .collect();
        let mut right_index = left_index.clone();
        let mut rows = Vec::with_capacity(graph.pair_count());

        for pair in 0..graph.pair_count() {
            let edges = graph.edges(pair)?;
            let (left_level, right_level) = graph.pair_levels(pair);
            for (e_idx, e) in edges.iter().enumerate() {
                right_index[left_level][e.src].push((e.dst, pair, e_idx));
                left_index[right_level][e.dst].push((e.src, pair, e_idx));
            }
            let m = interconnection(graph, pair)?;
            let left = (0..m.cols())
                .map(|j| {
                    let col: Vec<S> = (0..m.rows()).map(|k| m.get(k, j)).collect();
                    mixed_row(col, alpha2, rng)
                })
                .collect();
            let right = (0..m.rows())
                .map(|j| mixed_row(m.as_mat().row(j).to_vec(), alpha2, rng))
                .collect();
            rows.push(MixedRows { left, right });
        }

        Ok(RefineState {
            graph,
            points: init_points(graph, start),
            ordering: start.clone(),
            rows,
            left_index,
            right_index,
        })
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn points(&self) -> &PointMap<S> {
        &self.points
    }

    fn left_pair(&self, level: usize, cyclic: bool) -> Option<usize> {
        if level > 0 {
            Some(level - 1)
        } else if cyclic && self.graph.has_binding() {
            Some(self.graph.level_count() - 1)
        } else {
            None
        }
    }

    fn right_pair(&self, level: usize, cyclic: bool) -> Option<usize> {
        let n = self.graph.level_count();
        if level < n - 1 {
            Some(level)
        } else if cyclic && self.graph.has_binding() {
            Some(n - 1)
        } else {
            None
        }
    }

    fn barycentre(&self, level: usize, v: usize, cyclic: bool) -> S {
        let left = self.left_pair(level, cyclic).and_then(|pair| {
            self.rows[pair].left[v].as_ref().map(|row| {
                let mut points = vec![S::zero(); row.len()];
                for &(nbr, p, e_idx) in &self.left_index[level][v] {
                    if p == pair {
                        points[nbr] = self.points.per_pair[p][e_idx].src;
                    }
                }
                (row, points)
            })
        });
        let right = self.right_pair(level, cyclic).and_then(|pair| {
            self.rows[pair].right[v].as_ref().map(|row| {
                let mut points = vec![S::zero(); row.len()];
                for &(nbr, p, e_idx) in &self.right_index[level][v] {
                    if p == pair {
                        points[nbr] = self.points.per_pair[p][e_idx].dst;
                    }
                }
                (row, points)
            })
        });
        local_barycentre(
            left.as_ref().map(|(row, pts)| (row.as_slice(), pts.as_slice())),
            right.as_ref().map(|(row, pts)| (row.as_slice(), pts.as_slice())),
        )
    }

    /// Re-rank one level from fresh barycentres. Only when the ordering
    /// actually changed are blocks reassigned and owned points rewritten
    /// from the opposing endpoints (most recent values, in sweep order).
    fn visit_level(&mut self, level: usize, cyclic: bool) -> bool {
        let size = self.graph.level_size(level);
        let positions: Vec<S> = (0..size)
            .map(|v| self.barycentre(level, v, cyclic))
            .collect();
        let new_perm = order_by_descending_position(self.ordering.level(level), &positions);
        if new_perm == self.ordering.level(level) {
            return false;
        }
        self.ordering.set_level(level, new_perm);

        let ranks = self.ordering.ranks(level);
        for (v, &rank) in ranks.iter().enumerate() {
            let block = Block::<S>::for_rank(level, rank, size);
            for &(_, pair, e_idx) in &self.left_index[level][v] {
                let opposite = self.points.per_pair[pair][e_idx].src;
                self.points.per_pair[pair][e_idx].dst = block.base + block.height * opposite;
            }
            for &(_, pair, e_idx) in &self.right_index[level][v] {
                let opposite = self.points.per_pair[pair][e_idx].dst;
                self.points.per_pair[pair][e_idx].src = block.base + block.height * opposite;
            }
        }
        true
    }

    /// One pass over the route's levels; true when any level re-ranked.
    pub fn sweep(&mut self, route: SweepRoute) -> bool {
        let n = self.graph.level_count();
        let mut changed = false;
        match route {
            SweepRoute::Forward => {
                for level in 1..n {
                    changed |= self.visit_level(level, false);
                }
            }
            SweepRoute::Backward => {
                for level in (0..n - 1).rev() {
                    changed |= self.visit_level(level, false);
                }
            }
            SweepRoute::Cyclic => {
                for level in 0..n {
                    changed |= self.visit_level(level, true);
                }
            }
        }
        changed
    }
}

/// Refine `start` with bounded sweeps: parallel runs alternate forward and
/// backward passes, cyclic runs circle every level. Returns the best
/// ordering seen (input included, so the result never degrades), its full
/// crossing report, and the number of sweeps executed.
pub fn run_stage2<S: Scalar>(
    g: &LayeredGraph<S>,
    start: &Ordering,
    cfg: &Stage2Config,
    cyclic: bool,
) -> Result<(Ordering, CrossingReport<S>, usize), Stage2Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = RefineState::new(g, start, cfg.alpha2, &mut rng)?;

    let mut best_report = crossing_report(g, start)?;
    let mut best_ordering = start.clone();
    let mut unchanged = 0usize;
    let mut sweeps = 0usize;

    while sweeps < cfg.max_sweeps {
        let route = if cyclic {
            SweepRoute::Cyclic
        } else if sweeps.is_multiple_of(2) {
            SweepRoute::Forward
        } else {
            SweepRoute::Backward
        };
        sweeps += 1;
        if state.sweep(route) {
            unchanged = 0;
            let report = crossing_report(g, state.ordering())?;
            if report.weighted < best_report.weighted {
                best_report = report;
                best_ordering = state.ordering().clone();
            }
        } else {
            unchanged += 1;
            if unchanged >= cfg.stability_window {
                break;
            }
        }
    }

    Ok((best_ordering, best_report, sweeps))
}
