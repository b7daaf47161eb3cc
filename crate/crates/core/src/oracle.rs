//! Exact reference solver and the classic unweighted barycentre baseline.

use thiserror::Error;

use crate::crossing::{
    apply_ordering, crossing_report, interconnection, weighted_crossing_level, CrossingReport,
};
use crate::graph::{GraphError, LayeredGraph, Ordering};
use crate::scalar::Scalar;

/// Default cap on the number of orderings the exact solver may enumerate.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{required} orderings exceed the enumeration budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// All permutations of 0..n in lexicographic order.
fn lex_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = vec![perm.clone()];
    // Classic next-permutation steps until the sequence is fully reversed.
    while let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) {
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
        out.push(perm.clone());
    }
    out
}

/// Exhaustive minimum-weighted-crossing ordering. Enumerates per-level
/// permutations depth first with partial sums pruned against the best found
/// so far; per-pair crossing costs are tabulated up front so the walk is
/// table lookups. Ties resolve to the lexicographically first assignment.
pub fn brute_force_optimal<S: Scalar>(
    g: &LayeredGraph<S>,
    budget: u64,
) -> Result<(Ordering, CrossingReport<S>), OracleError> {
    let n = g.level_count();
    let mut required: u128 = 1;
    for i in 0..n {
        required = required.saturating_mul(factorial(g.level_size(i)));
        if required > budget as u128 {
            return Err(OracleError::BudgetExceeded { required, budget });
        }
    }

    let perms: Vec<Vec<Vec<usize>>> = (0..n).map(|i| lex_permutations(g.level_size(i))).collect();

    // cost[pair][a][b]: weighted crossing of the pair under the a-th left
    // and b-th right permutation.
    let mut cost: Vec<Vec<Vec<S>>> = Vec::with_capacity(g.pair_count());
    for pair in 0..g.pair_count() {
        let (left, right) = g.pair_levels(pair);
        let m = interconnection(g, pair)?;
        let table = perms[left]
            .iter()
            .map(|pl| {
                perms[right]
                    .iter()
                    .map(|pr| {
                        let ordered = apply_ordering(&m, pl, pr).expect("perm sizes match");
                        weighted_crossing_level(&ordered)
                    })
                    .collect()
            })
            .collect();
        cost.push(table);
    }
    let binding_pair = (g.pair_count() > g.parallel_pair_count()).then(|| g.pair_count() - 1);

    struct Search<'a, S> {
        perms: &'a [Vec<Vec<usize>>],
        cost: &'a [Vec<Vec<S>>],
        binding_pair: Option<usize>,
        best_score: S,
        best: Vec<usize>,
    }

    impl<S: Scalar> Search<'_, S> {
        fn dfs(&mut self, level: usize, partial: S, chosen: &mut Vec<usize>) {
            let n = self.perms.len();
            if level == n {
                let total = match self.binding_pair {
                    Some(p) => partial + self.cost[p][chosen[n - 1]][chosen[0]],
                    None => partial,
                };
                if total < self.best_score {
                    self.best_score = total;
                    self.best.clone_from(chosen);
                }
                return;
            }
            for c in 0..self.perms[level].len() {
                let step = if level == 0 {
                    partial
                } else {
                    partial + self.cost[level - 1][chosen[level - 1]][c]
                };
                if step >= self.best_score {
                    continue;
                }
                chosen[level] = c;
                self.dfs(level + 1, step, chosen);
            }
        }
    }

    let mut search = Search {
        perms: &perms,
        cost: &cost,
        binding_pair,
        best_score: S::infinity(),
        best: vec![0; n],
    };
    search.dfs(0, S::zero(), &mut vec![0; n]);
    let Search { best, .. } = search;

    let ordering = Ordering::new(
        best.iter()
            .enumerate()
            .map(|(i, &c)| perms[i][c].clone())
            .collect(),
    );
    let report = crossing_report(g, &ordering)?;
    Ok((ordering, report))
}

/// Classic barycentre heuristic: every neighbor counts equally, positions
/// are plain rank numbers, and levels re-sort ascending by mean neighbor
/// rank in alternating passes. Compared by weighted crossing for fairness,
/// with the best ordering seen returned.
pub fn bc_method<S: Scalar>(
    g: &LayeredGraph<S>,
    iters: usize,
) -> Result<(Ordering, CrossingReport<S>), GraphError> {
    let n = g.level_count();
    let mut ordering = Ordering::identity(g);
    let mut best_report = crossing_report(g, &ordering)?;
    let mut best_ordering = ordering.clone();

    // Unweighted neighbor lists over the parallel pairs.
    let mut left_nbrs: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|i| vec![Vec::new(); g.level_size(i)])
        .collect();
    let mut right_nbrs = left_nbrs.clone();
    for pair in 0..g.parallel_pair_count() {
        for e in g.edges(pair)? {
            right_nbrs[pair][e.src].push(e.dst);
            left_nbrs[pair + 1][e.dst].push(e.src);
        }
    }

    for pass in 0..iters {
        let mut changed = false;
        let forward = pass % 2 == 0;
        let levels: Vec<usize> = if forward {
            (1..n).collect()
        } else {
            (0..n - 1).rev().collect()
        };
        for level in levels {
            let nbr_level = if forward { level - 1 } else { level + 1 };
            let nbrs = if forward {
                &left_nbrs[level]
            } else {
                &right_nbrs[level]
            };
            let nbr_ranks = ordering.ranks(nbr_level);
            let current = ordering.level(level).to_vec();
            let ranks = ordering.ranks(level);
            let barycentre: Vec<f64> = (0..g.level_size(level))
                .map(|v| {
                    if nbrs[v].is_empty() {
                        ranks[v] as f64
                    } else {
                        nbrs[v].iter().map(|&u| nbr_ranks[u] as f64).sum::<f64>()
                            / nbrs[v].len() as f64
                    }
                })
                .collect();
            let mut perm = current.clone();
            perm.sort_by(|&a, &b| {
                barycentre[a]
                    .partial_cmp(&barycentre[b])
                    .expect("finite barycentres")
            });
            if perm != current {
                ordering.set_level(level, perm);
                changed = true;
            }
        }
        let report = crossing_report(g, &ordering)?;
        if report.weighted < best_report.weighted {
            best_report = report;
            best_ordering = ordering.clone();
        }
        if !changed {
            break;
        }
    }
    Ok((best_ordering, best_report))
}
