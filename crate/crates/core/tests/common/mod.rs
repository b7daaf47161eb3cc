//! Helpers shared by the integration suites: independent crossing oracles
//! and small random generators.
#![allow(dead_code)] // each test binary uses its own subset

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sankey_core::crossing::InterconnectionMatrix;
use sankey_core::graph::{LayeredGraph, Ordering};

/// Pairwise edge-inversion oracle: enumerate every pair of nonzero entries
/// and add the weight product when the pair strictly inverts. Independent of
/// the four-fold summation the library uses.
pub fn inversion_oracle(m: &InterconnectionMatrix<f64>) -> f64 {
    let mut edges = Vec::new();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let w = m.get(r, c);
            if w != 0.0 {
                edges.push((r, c, w));
            }
        }
    }
    let mut total = 0.0;
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let (r1, c1, w1) = edges[i];
            let (r2, c2, w2) = edges[j];
            if (r1 < r2 && c1 > c2) || (r2 < r1 && c2 > c1) {
                total += w1 * w2;
            }
        }
    }
    total
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random matrix with zero and nonzero cells mixed, up to 5x5.
pub fn random_sparse_matrix(rng: &mut ChaCha8Rng) -> InterconnectionMatrix<f64> {
    let rows = rng.random_range(1..=5usize);
    let cols = rng.random_range(1..=5usize);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random::<f64>() < 0.55 {
                        rng.random_range(0.1..10.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    InterconnectionMatrix::from_rows(&data)
}

pub fn random_ordering(g: &LayeredGraph<f64>, rng: &mut ChaCha8Rng) -> Ordering {
    let per_level = (0..g.level_count())
        .map(|i| {
            let mut perm: Vec<usize> = (0..g.level_size(i)).collect();
            for k in (1..perm.len()).rev() {
                let j = rng.random_range(0..=k);
                perm.swap(k, j);
            }
            perm
        })
        .collect();
    Ordering::new(per_level)
}
