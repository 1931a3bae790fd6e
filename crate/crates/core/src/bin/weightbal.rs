use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use weightbal::digraph::{Digraph, GraphFile};
use weightbal::feasibility::{check_circulation_bruteforce, check_circulation_flow, BoundsFile, Violation};
use weightbal::harness::{check_invariants, read_trace, run_experiment, ExperimentConfig, TraceMeta};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "weightbal", version, about = "Integer weight balancing on digraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random strongly connected digraph as JSON.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether bounds admit a balanced integer assignment.
    Feasible {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        bounds: PathBuf,
        /// Enumerate subsets instead of solving a max-flow problem.
        #[arg(long)]
        brute_force: bool,
    },
    /// Run an experiment config, one run per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-validate a trace CSV.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        check_invariants: bool,
        /// Metadata sidecar; defaults to the one next to the trace.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
}

type Failure = Box<dyn std::error::Error>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn generate(n: usize, p: f64, seed: u64, out: &Path) -> Result<u8, Failure> {
    let g = Digraph::random_strongly_connected(n, p, seed)?;
    let mut text = serde_json::to_string(&GraphFile::from(&g))?;
    text.push('\n');
    std::fs::write(out, text)?;
    Ok(0)
}

fn feasible(graph: &Path, bounds: &Path, brute_force: bool) -> Result<u8, Failure> {
    let g = read_json::<GraphFile>(graph)?.to_digraph()?;
    let b = read_json::<BoundsFile>(bounds)?.to_bounds(&g)?;
    let verdict = if brute_force {
        check_circulation_bruteforce(&g, &b)?
    } else {
        check_circulation_flow(&g, &b)
    };
    let pair = |e: usize| {
        let edge = g.edge(e);
        [edge.from.0, edge.to.0]
    };
    let report = match &verdict.violation {
        None => json!({ "feasible": true }),
        Some(Violation::EdgeInterval(e)) => json!({ "feasible": false, "edge": pair(*e) }),
        Some(Violation::Cut(w)) => json!({
            "feasible": false,
            "subset": w.subset,
            "in_edges": w.in_edges.iter().map(|&e| pair(e)).collect::<Vec<_>>(),
            "out_edges": w.out_edges.iter().map(|&e| pair(e)).collect::<Vec<_>>(),
            "in_lower": w.in_lower,
            "out_upper": w.out_upper,
        }),
    };
    println!("{report}");
    Ok(if verdict.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn run(config: &Path, out_dir: &Path) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let summaries = run_experiment(&cfg, out_dir)?;
    let converged = summaries.iter().filter(|s| s.converged).count();
    println!("{converged}/{} runs converged; output in {}", summaries.len(), out_dir.display());
    Ok(0)
}

fn replay(trace: &Path, check: bool, meta: Option<&Path>) -> Result<u8, Failure> {
    let rows = read_trace(trace)?;
    let sidecar = meta.map(Path::to_path_buf).unwrap_or_else(|| TraceMeta::sidecar_path(trace));
    let meta = if sidecar.exists() { Some(TraceMeta::load(&sidecar)?) } else { None };
    if !check {
        println!("{} rows", rows.len());
        return Ok(0);
    }
    let report = check_invariants(&rows, meta.as_ref());
    println!("{}", serde_json::to_string(&report)?);
    Ok(if report.ok() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate { n, p, seed, out } => generate(*n, *p, *seed, out),
        Command::Feasible {
            graph,
            bounds,
            brute_force,
        } => feasible(graph, bounds, *brute_force),
        Command::Run { config, out_dir } => run(config, out_dir),
        Command::Replay {
            trace,
            check_invariants,
            meta,
        } => replay(trace, *check_invariants, meta.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
