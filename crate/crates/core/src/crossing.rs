//! Weighted interconnection matrices and crossing metrics.
//!
//! The weighted crossing of one ordered level pair sums, over every pair of
//! rows j < k and columns p < q, the product m[j][q] * m[k][p]: two edges
//! cross exactly when the upper-left endpoint connects to the lower-right
//! one while the lower-left connects to the upper-right.

use serde::Serialize;

use crate::graph::{GraphError, LayeredGraph, Ordering};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// Weighted biadjacency between two adjacent levels, rows indexing the left
/// level and columns the right, both in canonical vertex order until an
/// ordering is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionMatrix<S> {
    mat: Mat<S>,
}

impl<S: Scalar> InterconnectionMatrix<S> {
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        InterconnectionMatrix {
            mat: Mat::from_rows(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn cols(&self) -> usize {
        self.mat.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.mat.get(r, c)
    }

    pub fn row_sum(&self, r: usize) -> S {
        self.mat.row_sum(r)
    }

    pub fn col_sum(&self, c: usize) -> S {
        self.mat.col_sum(c)
    }

    pub fn as_mat(&self) -> &Mat<S> {
        &self.mat
    }

    /// Entry-wise map to unit weights, for the unweighted crossing count.
    pub fn unit_weights(&self) -> Self {
        let mut mat = Mat::zeros(self.rows(), self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if self.get(r, c) > S::zero() {
                    mat.set(r, c, S::one());
                }
            }
        }
        InterconnectionMatrix { mat }
    }
}

/// Interconnection matrix of edge pair `pair` in canonical vertex order.
/// Pair index n-1 addresses the binding set and requires cycle form.
pub fn interconnection<S: Scalar>(
    g: &LayeredGraph<S>,
    pair: usize,
) -> Result<InterconnectionMatrix<S>, GraphError> {
    let edges = g.edges(pair)?;
    let (left, right) = g.pair_levels(pair);
    let mut mat = Mat::zeros(g.level_size(left), g.level_size(right));
    for e in edges {
        mat.set(e.src, e.dst, e.weight);
    }
    Ok(InterconnectionMatrix { mat })
}

/// Reorder rows by `row_perm` and columns by `col_perm` (rank -> canonical
/// index). Plain index permutation; no transformation matrices are built.
pub fn apply_ordering<S: Scalar>(
    m: &InterconnectionMatrix<S>,
    row_perm: &[usize],
    col_perm: &[usize],
) -> Result<InterconnectionMatrix<S>, GraphError> {
    if row_perm.len() != m.rows() {
        return Err(GraphError::OrderingSizeMismatch {
            level: 0,
            expected: m.rows(),
            got: row_perm.len(),
        });
    }
    if col_perm.len() != m.cols() {
        return Err(GraphError::OrderingSizeMismatch {
            level: 0,
            expected: m.cols(),
            got: col_perm.len(),
        });
    }
    let mut mat = Mat::zeros(m.rows(), m.cols());
    for (r, &src_r) in row_perm.iter().enumerate() {
        for (c, &src_c) in col_perm.iter().enumerate() {
            mat.set(r, c, m.get(src_r, src_c));
        }
    }
    Ok(InterconnectionMatrix { mat })
}

/// Weighted crossing of one already-ordered level pair; direct O(r²c²)
/// evaluation of the double pair sum.
pub fn weighted_crossing_level<S: Scalar>(m: &InterconnectionMatrix<S>) -> S {
    let mut total = S::zero();
    for j in 0..m.rows() {
        for k in j + 1..m.rows() {
            for p in 0..m.cols() {
                let lower = m.get(k, p);
                if lower == S::zero() {
                    continue;
                }
                for q in p + 1..m.cols() {
                    total = total + m.get(j, q) * lower;
                }
            }
        }
    }
    total
}

/// Weighted and unweighted totals for a whole ordered graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport<S> {
    pub weighted: S,
    pub unweighted: u64,
    /// One weighted entry per edge pair, binding pair last in cycle form.
    pub per_level: Vec<S>,
}

/// Evaluate an ordering: weighted crossings per edge pair (the binding pair
/// included when present), their sum, and the unit-weight count.
pub fn crossing_report<S: Scalar>(
    g: &LayeredGraph<S>,
    ordering: &Ordering,
) -> Result<CrossingReport<S>, GraphError> {
    ordering.validate(g)?;
    let mut per_level = Vec::with_capacity(g.pair_count());
    let mut unweighted = S::zero();
    for pair in 0..g.pair_count() {
        let (left, right) = g.pair_levels(pair);
        let m = interconnection(g, pair)?;
        let ordered = apply_ordering(&m, ordering.level(left), ordering.level(right))?;
        per_level.push(weighted_crossing_level(&ordered));
        unweighted = unweighted + weighted_crossing_level(&ordered.unit_weights());
    }
    Ok(CrossingReport {
        weighted: per_level.iter().copied().sum(),
        unweighted: unweighted
            .round()
            .to_u64()
            .expect("unweighted crossing count fits in u64"),
        per_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FlowLink, FlowNode};

    fn im(rows: &[Vec<f64>]) -> InterconnectionMatrix<f64> {
        InterconnectionMatrix::from_rows(rows)
    }

    #[test]
    fn interconnection_from_graph() {
        let g: LayeredGraph<f64> = LayeredGraph::ingest(
            &[
                FlowNode {
                    id: "v1".into(),
                    level: 0,
                },
                FlowNode {
                    id: "u1".into(),
                    level: 1,
                },
                FlowNode {
                    id: "u2".into(),
                    level: 1,
                },
            ],
            &[
                FlowLink {
                    source: "v1".into(),
                    target: "u1".into(),
                    value: 3.0,
                },
                FlowLink {
                    source: "v1".into(),
                    target: "u2".into(),
                    value: 1.0,
                },
            ],
            false,
        )
        .unwrap();
        let m = interconnection(&g, 0).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.cols(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn complete_bipartite_two_by_two() {
        let m = im(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn binding_pair_requires_cycle_form() {
        let g: LayeredGraph<f64> = LayeredGraph::ingest(
            &[
                FlowNode {
                    id: "a".into(),
                    level: 0,
                },
                FlowNode {
                    id: "b".into(),
                    level: 1,
                },
            ],
            &[FlowLink {
                source: "a".into(),
                target: "b".into(),
                value: 1.0,
            }],
            false,
        )
        .unwrap();
        assert!(interconnection(&g, 1).is_err());
        assert!(matches!(
            interconnection(&g, 7),
            Err(GraphError::PairOutOfRange { .. })
        ));
    }

    #[test]
    fn apply_identity_keeps_matrix() {
        let m = im(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = apply_ordering(&m, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn apply_row_swap() {
        let m = im(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = apply_ordering(&m, &[1, 0], &[0, 1]).unwrap();
        assert_eq!(out, im(&[vec![3.0, 4.0], vec![1.0, 2.0]]));
    }

    #[test]
    fn apply_double_reversal() {
        let m = im(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = apply_ordering(&m, &[1, 0], &[1, 0]).unwrap();
        assert_eq!(out, im(&[vec![4.0, 3.0], vec![2.0, 1.0]]));
    }

    #[test]
    fn apply_dimension_mismatch() {
        let m = im(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(apply_ordering(&m, &[0], &[0, 1]).is_err());
    }

    #[test]
    fn crossing_single_inversion() {
        assert_eq!(weighted_crossing_level(&im(&[vec![0.0, 2.0], vec![3.0, 0.0]])), 6.0);
    }

    #[test]
    fn crossing_parallel_edges() {
        assert_eq!(weighted_crossing_level(&im(&[vec![2.0, 0.0], vec![0.0, 3.0]])), 0.0);
    }

    #[test]
    fn crossing_complete_unit() {
        assert_eq!(weighted_crossing_level(&im(&[vec![1.0, 1.0], vec![1.0, 1.0]])), 1.0);
    }

    #[test]
    fn report_on_two_level_graph() {
        let g: LayeredGraph<f64> = LayeredGraph::ingest(
            &[
                FlowNode {
                    id: "a".into(),
                    level: 0,
                },
                FlowNode {
                    id: "b".into(),
                    level: 0,
                },
                FlowNode {
                    id: "c".into(),
                    level: 1,
                },
                FlowNode {
                    id: "d".into(),
                    level: 1,
                },
            ],
            &[
                FlowLink {
                    source: "a".into(),
                    target: "d".into(),
                    value: 2.0,
                },
                FlowLink {
                    source: "b".into(),
                    target: "c".into(),
                    value: 3.0,
                },
            ],
            false,
        )
        .unwrap();
        let report = crossing_report(&g, &Ordering::identity(&g)).unwrap();
        assert_eq!(report.weighted, 6.0);
        assert_eq!(report.unweighted, 1);
        assert_eq!(report.per_level, vec![6.0]);

        // Swapping one side removes the crossing.
        let swapped = Ordering::new(vec![vec![0, 1], vec![1, 0]]);
        let report = crossing_report(&g, &swapped).unwrap();
        assert_eq!(report.weighted, 0.0);
        assert_eq!(report.unweighted, 0);
    }
}
