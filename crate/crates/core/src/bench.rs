//! Random-case generator and the robust-test harness comparing both stages
//! and the BC baseline against the exact oracle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{FlowLink, FlowNode, GraphError, LayeredGraph};
use crate::oracle::{bc_method, brute_force_optimal, OracleError};
use crate::scalar::Scalar;
use crate::stage1::{run_stage1, Stage1Config, Stage1Error};
use crate::stage2::{run_stage2, Stage2Config, Stage2Error};

/// Regularizer for the ratio (x + eps) / (y + eps), keeping 0/0 at 1.
pub const RATIO_EPSILON: f64 = 1e-9;

/// Resampling attempts before the generator gives up on a case.
const RESAMPLE_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Stage1(#[from] Stage1Error),
    #[error(transparent)]
    Stage2(#[from] Stage2Error),
    #[error("invalid robust case: {0}")]
    InvalidCase(String),
    #[error("no connected instance found in {RESAMPLE_LIMIT} attempts for n={n}, v_bar={v_bar}, density={density}")]
    ResampleLimit { n: usize, v_bar: usize, density: f64 },
}

/// One random-case specification: `n` levels of `v_bar` vertices, each
/// cross-level vertex pair wired with probability `density`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustCase {
    pub n: usize,
    pub v_bar: usize,
    pub density: f64,
    pub seed: u64,
    /// Realized edge total, the case's complexity estimate; filled in once
    /// the instance is generated.
    pub edge_count: Option<usize>,
}

impl RobustCase {
    pub fn new(n: usize, v_bar: usize, density: f64, seed: u64) -> Self {
        RobustCase {
            n,
            v_bar,
            density,
            seed,
            edge_count: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n < 2 {
            return Err(BenchError::InvalidCase(format!(
                "need at least 2 levels, got {}",
                self.n
            )));
        }
        if self.v_bar == 0 {
            return Err(BenchError::InvalidCase("v_bar must be >= 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(BenchError::InvalidCase(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        Ok(())
    }

    /// Orderings the exact solver would enumerate: (v_bar!)^n.
    pub fn orderings(&self) -> u128 {
        let fact: u128 = (1..=self.v_bar as u128).product();
        (0..self.n).fold(1u128, |acc, _| acc.saturating_mul(fact))
    }
}

/// Generate the case's graph: edges drawn independently per cross-level
/// pair, weights i.i.d. uniform(1, 100), resampled in full until every
/// vertex keeps the neighbors the pipeline needs. Deterministic per seed.
pub fn random_instance<S: Scalar>(case: &RobustCase) -> Result<LayeredGraph<S>, BenchError> {
    case.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let nodes: Vec<FlowNode> = (0..case.n)
        .flat_map(|level| {
            (0..case.v_bar).map(move |k| FlowNode {
                id: format!("n{level}_{k}"),
                level,
            })
        })
        .collect();

    for _ in 0..RESAMPLE_LIMIT {
        let mut links = Vec::new();
        for level in 0..case.n - 1 {
            for src in 0..case.v_bar {
                for dst in 0..case.v_bar {
                    if rng.random::<f64>() < case.density {
                        links.push(FlowLink {
                            source: format!("n{level}_{src}"),
                            target: format!("n{}_{dst}", level + 1),
                            value: rng.random_range(1.0..100.0),
                        });
                    }
                }
            }
        }
        match LayeredGraph::ingest(&nodes, &links, false) {
            Ok(g) => return Ok(g),
            Err(GraphError::MissingNeighbors { .. }) => continue,
            Err(err) => return Err(err.into()),
        }
    }
    Err(BenchError::ResampleLimit {
        n: case.n,
        v_bar: case.v_bar,
        density: case.density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stage1,
    Stage2,
    Bc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Stage1 => "stage1",
            Method::Stage2 => "stage2",
            Method::Bc => "bc",
        }
    }
}

/// One harness row: a method's weighted crossing x against the oracle's y.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioResult {
    pub case: RobustCase,
    pub method: Method,
    pub weighted: f64,
    pub unweighted: u64,
    pub oracle_weighted: f64,
    pub ratio: f64,
}

/// Regularized quotient (x + eps) / (y + eps) with eps = 1e-9.
pub fn ratio(x: f64, y: f64) -> f64 {
    (x + RATIO_EPSILON) / (y + RATIO_EPSILON)
}

#[derive(Debug, Clone)]
pub struct RobustTestConfig {
    /// (levels, vertices per level) cells.
    pub grid: Vec<(usize, usize)>,
    pub cases_per_cell: usize,
    pub density: f64,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub bc_iters: usize,
    pub budget: u64,
}

impl Default for RobustTestConfig {
    fn default() -> Self {
        RobustTestConfig {
            grid: vec![(3, 3), (3, 4), (4, 3), (4, 4)],
            cases_per_cell: 10,
            density: 0.5,
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            bc_iters: 100,
            budget: crate::oracle::DEFAULT_BUDGET,
        }
    }
}

/// Run stage 1, stage 2 and the BC baseline against the exact oracle on
/// every case of the grid, three rows per case.
pub fn robust_test<S: Scalar>(cfg: &RobustTestConfig) -> Result<Vec<RatioResult>, BenchError> {
    let mut rows = Vec::new();
    for &(n, v_bar) in &cfg.grid {
        for case_idx in 0..cfg.cases_per_cell {
            let mut case = RobustCase::new(n, v_bar, cfg.density, case_idx as u64);
            let g: LayeredGraph<S> = random_instance(&case)?;
            case.edge_count = Some(g.edge_count());

            let (_, oracle) = brute_force_optimal(&g, cfg.budget)?;
            let oracle_weighted = oracle.weighted.to_f64().unwrap();

            let (stage1_ordering, stage1_report) = run_stage1(&g, &cfg.stage1)?;
            let (_, stage2_report, _) = run_stage2(&g, &stage1_ordering, &cfg.stage2, false)?;
            let (_, bc_report) = bc_method(&g, cfg.bc_iters)?;

            for (method, report) in [
                (Method::Stage1, &stage1_report),
                (Method::Stage2, &stage2_report),
                (Method::Bc, &bc_report),
            ] {
                let weighted = report.weighted.to_f64().unwrap();
                rows.push(RatioResult {
                    case: case.clone(),
                    method,
                    weighted,
                    unweighted: report.unweighted,
                    oracle_weighted,
                    ratio: ratio(weighted, oracle_weighted),
                });
            }
        }
    }
    Ok(rows)
}

/// CSV rendering of harness rows, one line per (case, method).
pub fn rows_to_csv(rows: &[RatioResult]) -> String {
    let mut out = String::from("n,v_bar,seed,edges,method,weighted,unweighted,oracle_weighted,ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.case.n,
            row.case.v_bar,
            row.case.seed,
            row.case.edge_count.unwrap_or(0),
            row.method.as_str(),
            row.weighted,
            row.unweighted,
            row.oracle_weighted,
            row.ratio,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_regularizes_zero_over_zero() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
    }

    #[test]
    fn ratio_plain_quotient() {
        assert!((ratio(3.0, 2.0) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn full_density_is_complete_bipartite() {
        let case = RobustCase::new(3, 3, 1.0, 0);
        let g: LayeredGraph<f64> = random_instance(&case).unwrap();
        assert_eq!(g.edge_count(), 2 * 9);
    }

    #[test]
    fn generator_is_deterministic() {
        let case = RobustCase::new(3, 4, 0.5, 42);
        let a: LayeredGraph<f64> = random_instance(&case).unwrap();
        let b: LayeredGraph<f64> = random_instance(&case).unwrap();
        assert_eq!(a, b);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn crossing_free_cell_yields_unit_ratios() {
        // Single-vertex levels cannot cross; x = y = 0 regularizes to 1.
        let cfg = RobustTestConfig {
            grid: vec![(3, 1)],
            cases_per_cell: 2,
            density: 1.0,
            stage1: Stage1Config {
                repeats: 5,
                ..Stage1Config::default()
            },
            ..RobustTestConfig::default()
        };
        let rows = robust_test::<f64>(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert_eq!(row.weighted, 0.0);
            assert_eq!(row.ratio, 1.0);
        }
    }

    #[test]
    fn generated_weights_in_range() {
        let case = RobustCase::new(3, 3, 0.7, 7);
        let g: LayeredGraph<f64> = random_instance(&case).unwrap();
        for pair in 0..g.parallel_pair_count() {
            for e in g.edges(pair).unwrap() {
                assert!(e.weight >= 1.0 && e.weight < 100.0);
            }
        }
    }

    #[test]
    fn mean_edge_count_tracks_binomial_expectation() {
        // n=3, v_bar=3, density=0.5: 18 candidate edges, expectation 9.
        let mut total = 0usize;
        for seed in 0..10u64 {
            let case = RobustCase::new(3, 3, 0.5, seed);
            let g: LayeredGraph<f64> = random_instance(&case).unwrap();
            total += g.edge_count();
        }
        let mean = total as f64 / 10.0;
        assert!((6.0..12.5).contains(&mean), "mean edge count {mean} out of range");
    }

    #[test]
    fn orderings_estimate() {
        assert_eq!(RobustCase::new(3, 3, 0.5, 0).orderings(), 216);
        assert_eq!(RobustCase::new(4, 4, 0.5, 0).orderings(), 331_776);
    }

    #[test]
    fn invalid_cases_rejected() {
        assert!(RobustCase::new(1, 3, 0.5, 0).validate().is_err());
        assert!(RobustCase::new(3, 0, 0.5, 0).validate().is_err());
        assert!(RobustCase::new(3, 3, 0.0, 0).validate().is_err());
        assert!(RobustCase::new(3, 3, 1.5, 0).validate().is_err());
    }

    #[test]
    fn small_harness_run_has_oracle_dominance() {
        let cfg = RobustTestConfig {
            grid: vec![(3, 3)],
            cases_per_cell: 3,
            stage1: Stage1Config {
                repeats: 10,
                ..Stage1Config::default()
            },
            ..RobustTestConfig::default()
        };
        let rows = robust_test::<f64>(&cfg).unwrap();
        assert_eq!(rows.len(), 9);
        for row in &rows {
            assert!(row.weighted >= row.oracle_weighted);
            assert!(row.ratio > 0.0);
        }
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("n,v_bar,seed,edges,method,"));
        assert_eq!(csv.lines().count(), 10);
    }
}
