//! `sankey-order`: order, score and render layered Sankey diagrams.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sankey_core::bench::{robust_test, rows_to_csv, Method, RobustTestConfig};
use sankey_core::crossing::{crossing_report, CrossingReport};
use sankey_core::graph::{GraphError, Ordering};
use sankey_core::io::{ordering_from_json, ordering_to_json, FlowFile, IoError};
use sankey_core::oracle::{brute_force_optimal, OracleError, DEFAULT_BUDGET};
use sankey_core::stage1::{run_stage1, Stage1Config};
use sankey_core::stage2::{run_stage2, Stage2Config};
use sankey_core::LayeredGraph64;

#[derive(Parser)]
#[command(
    name = "sankey-order",
    version,
    about = "Weighted crossing minimization for layered Sankey diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-stage pipeline on a flow file and write the ordering,
    /// crossing report, run metadata and optional SVG.
    Layout(LayoutArgs),
    /// Score a user-supplied ordering file against a flow file.
    Score(ScoreArgs),
    /// Run the randomized robust-test grid against the exact solver.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Flow file: JSON, or CSV (`source,target,value`) with `--nodes`.
    input: PathBuf,
    /// Node sidecar (`id,level`) for CSV input.
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Treat last-to-first links as binding links (cycle form).
    #[arg(long)]
    cycle: bool,
    /// Replace each weight by max(log10(w), 1e-6) before ordering.
    #[arg(long)]
    log_weights: bool,
}

#[derive(Args)]
struct StageArgs {
    /// Stage-1 random mixing factor.
    #[arg(long, default_value_t = 0.01)]
    alpha1: f64,
    /// Stage-2 random mixing factor.
    #[arg(long, default_value_t = 0.1)]
    alpha2: f64,
    /// Stage-1 best-in-N repeat count.
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    /// Stage-2 sweep cap.
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    /// Consecutive unchanged sweeps declaring stage-2 convergence.
    #[arg(long, default_value_t = 3)]
    stability_window: usize,
    /// Master seed for both stages.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl StageArgs {
    fn stage1(&self) -> Stage1Config {
        Stage1Config {
            alpha1: self.alpha1,
            repeats: self.repeats,
            seed: self.seed,
            ..Stage1Config::default()
        }
    }

    fn stage2(&self) -> Stage2Config {
        Stage2Config {
            alpha2: self.alpha2,
            max_sweeps: self.max_sweeps,
            stability_window: self.stability_window,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct LayoutArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    stages: StageArgs,
    /// Where to write the ordering JSON.
    #[arg(long, default_value = "ordering.json")]
    ordering: PathBuf,
    /// Where to write the crossing report CSV.
    #[arg(long, default_value = "report.csv")]
    report: PathBuf,
    /// Where to write run metadata JSON.
    #[arg(long, default_value = "meta.json")]
    meta: PathBuf,
    /// Also render the final layout as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Also run the exact solver when feasible and report it.
    #[arg(long)]
    oracle: bool,
    /// Enumeration budget for `--oracle`.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Ordering JSON file to score.
    ordering: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid cells as `<levels>x<vertices>`, comma separated.
    #[arg(long, default_value = "3x3,3x4,4x3,4x4")]
    grid: String,
    /// Random cases per cell.
    #[arg(long, default_value_t = 10)]
    cases: usize,
    /// Edge probability per cross-level vertex pair.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[command(flatten)]
    stages: StageArgs,
    /// Where to write the per-case CSV.
    #[arg(long, default_value = "bench.csv")]
    csv: PathBuf,
    /// Stage-1 ratio threshold.
    #[arg(long, default_value_t = 2.0)]
    stage1_ratio: f64,
    /// Stage-2 ratio threshold.
    #[arg(long, default_value_t = 1.5)]
    stage2_ratio: f64,
    /// Fraction of cases that must meet each threshold.
    #[arg(long, default_value_t = 0.8)]
    min_fraction: f64,
    /// Enumeration budget per case for the exact solver.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

/// Errors mapped onto the exit codes: 2 for input/parse problems, 1 for
/// infeasible inputs and failed thresholds.
enum CliError {
    Input(String),
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(err: IoError) -> Self {
        match err {
            IoError::Graph(inner) => CliError::Infeasible(inner.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(err: GraphError) -> Self {
        CliError::Infeasible(err.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|err| CliError::Input(format!("cannot read {}: {err}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|err| CliError::Infeasible(format!("cannot write {}: {err}", path.display())))
}

fn load_graph(args: &InputArgs) -> Result<LayeredGraph64, CliError> {
    let text = read_file(&args.input)?;
    let file = if args.input.extension().is_some_and(|e| e == "csv") {
        let nodes_path = args.nodes.as_ref().ok_or_else(|| {
            CliError::Input("CSV input needs --nodes <id,level sidecar>".into())
        })?;
        let nodes_text = read_file(nodes_path)?;
        FlowFile::from_csv(&text, &nodes_text)?
    } else {
        FlowFile::from_json(&text)?
    };
    let graph: LayeredGraph64 = file.into_graph(args.cycle)?;
    Ok(if args.log_weights {
        graph.log_transform()
    } else {
        graph
    })
}

fn report_line(stage: &str, report: &CrossingReport<f64>) -> String {
    format!("{stage},{},{}\n", report.weighted, report.unweighted)
}

fn cmd_layout(args: &LayoutArgs) -> Result<u8, CliError> {
    let graph = load_graph(&args.input)?;
    let cfg1 = args.stages.stage1();
    let cfg2 = args.stages.stage2();

    let (stage1_ordering, stage1_report) = run_stage1(&graph, &cfg1)
        .map_err(|err| CliError::Infeasible(format!("stage 1 failed: {err}")))?;
    let (ordering, stage2_report, sweeps) =
        run_stage2(&graph, &stage1_ordering, &cfg2, graph.is_cycle_form())
            .map_err(|err| CliError::Infeasible(format!("stage 2 failed: {err}")))?;

    let oracle = if args.oracle {
        match brute_force_optimal(&graph, args.budget) {
            Ok((_, report)) => Some(report),
            Err(OracleError::BudgetExceeded { required, budget }) => {
                eprintln!("oracle skipped: {required} orderings exceed budget {budget}");
                None
            }
            Err(OracleError::Graph(err)) => return Err(err.into()),
        }
    } else {
        None
    };

    let ordering_json = serde_json::to_string_pretty(&ordering_to_json(&graph, &ordering))
        .expect("ordering serializes");
    write_file(&args.ordering, &(ordering_json + "\n"))?;

    let mut report_csv = String::from("stage,weighted,unweighted\n");
    report_csv.push_str(&report_line("stage1", &stage1_report));
    report_csv.push_str(&report_line("stage2", &stage2_report));
    if let Some(oracle_report) = &oracle {
        report_csv.push_str(&report_line("oracle", oracle_report));
    }
    write_file(&args.report, &report_csv)?;

    let meta = json!({
        "input": args.input.input.display().to_string(),
        "parameters": {
            "alpha1": args.stages.alpha1,
            "alpha2": args.stages.alpha2,
            "repeats": args.stages.repeats,
            "max_sweeps": args.stages.max_sweeps,
            "stability_window": args.stages.stability_window,
            "seed": args.stages.seed,
            "cycle": graph.is_cycle_form(),
            "log_weights": args.input.log_weights,
            "eig_tol": cfg1.eig_tol,
            "eig_max_iter": cfg1.eig_max_iter,
        },
        "block_base_corrected": true,
        "sweeps_used": sweeps,
        "stage1": {"weighted": stage1_report.weighted, "unweighted": stage1_report.unweighted},
        "stage2": {"weighted": stage2_report.weighted, "unweighted": stage2_report.unweighted},
        "oracle": oracle.as_ref().map(|r| json!({"weighted": r.weighted, "unweighted": r.unweighted})),
    });
    write_file(
        &args.meta,
        &(serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n"),
    )?;

    if let Some(svg_path) = &args.svg {
        write_file(svg_path, &svg::render_svg(&graph, &ordering))?;
    }

    println!(
        "stage1: weighted {} unweighted {}",
        stage1_report.weighted, stage1_report.unweighted
    );
    println!(
        "stage2: weighted {} unweighted {} (in {sweeps} sweeps)",
        stage2_report.weighted, stage2_report.unweighted
    );
    if let Some(oracle_report) = &oracle {
        println!(
            "oracle: weighted {} unweighted {}",
            oracle_report.weighted, oracle_report.unweighted
        );
    }
    Ok(0)
}

fn cmd_score(args: &ScoreArgs) -> Result<u8, CliError> {
    let graph = load_graph(&args.input)?;
    let text = read_file(&args.ordering)?;
    let ordering: Ordering = ordering_from_json(&graph, &text)?;
    let report = crossing_report(&graph, &ordering)?;
    println!("weighted {}", report.weighted);
    println!("unweighted {}", report.unweighted);
    Ok(0)
}

fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>, CliError> {
    spec.split(',')
        .map(|cell| {
            let (n, v) = cell
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::Input(format!("bad grid cell `{cell}`")))?;
            let n = n
                .parse()
                .map_err(|_| CliError::Input(format!("bad level count in `{cell}`")))?;
            let v = v
                .parse()
                .map_err(|_| CliError::Input(format!("bad vertex count in `{cell}`")))?;
            Ok((n, v))
        })
        .collect()
}

fn cmd_bench(args: &BenchArgs) -> Result<u8, CliError> {
    let mut grid = Vec::new();
    for (n, v_bar) in parse_grid(&args.grid)? {
        let orderings =
            sankey_core::RobustCase::new(n, v_bar, args.density.max(0.01), 0).orderings();
        if orderings > args.budget as u128 {
            eprintln!(
                "skipping cell {n}x{v_bar}: {orderings} orderings exceed budget {}",
                args.budget
            );
            continue;
        }
        grid.push((n, v_bar));
    }
    if grid.is_empty() {
        return Err(CliError::Infeasible(
            "no brute-force-feasible grid cells left".into(),
        ));
    }

    let cfg = RobustTestConfig {
        grid,
        cases_per_cell: args.cases,
        density: args.density,
        stage1: args.stages.stage1(),
        stage2: args.stages.stage2(),
        bc_iters: 100,
        budget: args.budget,
    };
    let rows = robust_test::<f64>(&cfg)
        .map_err(|err| CliError::Infeasible(format!("robust test failed: {err}")))?;
    write_file(&args.csv, &rows_to_csv(&rows))?;

    let fraction = |method: Method, threshold: f64| {
        let sel: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.ratio)
            .collect();
        let ok = sel.iter().filter(|&&r| r <= threshold).count();
        (ok, sel.len(), ok as f64 / sel.len().max(1) as f64)
    };

    let (ok1, n1, frac1) = fraction(Method::Stage1, args.stage1_ratio);
    let (ok2, n2, frac2) = fraction(Method::Stage2, args.stage2_ratio);
    let pass1 = frac1 >= args.min_fraction;
    let pass2 = frac2 >= args.min_fraction;
    println!(
        "stage1 ratio <= {}: {ok1}/{n1} ({:.1}%) -> {}",
        args.stage1_ratio,
        frac1 * 100.0,
        if pass1 { "PASS" } else { "FAIL" }
    );
    println!(
        "stage2 ratio <= {}: {ok2}/{n2} ({:.1}%) -> {}",
        args.stage2_ratio,
        frac2 * 100.0,
        if pass2 { "PASS" } else { "FAIL" }
    );
    Ok(if pass1 && pass2 { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Layout(args) => cmd_layout(args),
        Command::Score(args) => cmd_score(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
