//! Vertex orderings that minimize weighted edge crossings in layered Sankey
//! diagrams, for both the parallel form and the cycle form (binding links
//! from the last level back to the first).
//!
//! The pipeline has two stages. Stage 1 composes the levels' normalized
//! interconnection matrices into a square Markov transition matrix, orders
//! level 1 by the eigenvector of the second-largest-magnitude eigenvalue,
//! propagates positions to the remaining levels, and keeps the best of N
//! randomized repeats. Stage 2 refines that ordering with back-and-forth
//! partition-refinement sweeps (circular sweeps in cycle form), tracking the
//! best ordering seen so the result never degrades.
//!
//! Alongside the pipeline live an exhaustive exact solver, the classic
//! unweighted barycentre baseline, a random-instance generator, and a
//! harness that measures heuristic/optimal crossing ratios over a grid of
//! random cases.
//!
//! Core math is generic over the scalar type through [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below pin the common concrete choices.

pub mod bench;
pub mod crossing;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod scalar;
pub mod stage1;
pub mod stage2;

pub use bench::{random_instance, ratio, robust_test, Method, RatioResult, RobustCase};
pub use crossing::{
    apply_ordering, crossing_report, interconnection, weighted_crossing_level, CrossingReport,
    InterconnectionMatrix,
};
pub use graph::{FlowLink, FlowNode, GraphError, LayeredGraph, Ordering};
pub use oracle::{bc_method, brute_force_optimal, OracleError};
pub use scalar::Scalar;
pub use stage1::{run_stage1, second_eigenvector, PositionVector, Stage1Config, TransitionMatrix};
pub use stage2::{init_points, run_stage2, Block, PointMap, Stage2Config, SweepRoute};

pub type LayeredGraph64 = graph::LayeredGraph<f64>;
pub type LayeredGraph32 = graph::LayeredGraph<f32>;
pub type CrossingReport64 = crossing::CrossingReport<f64>;
pub type CrossingReport32 = crossing::CrossingReport<f32>;
pub type InterconnectionMatrix64 = crossing::InterconnectionMatrix<f64>;
pub type TransitionMatrix64 = stage1::TransitionMatrix<f64>;
