//! Execute one configured run per seed and collect summaries.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Algorithm, BoundsSource, DelayMode, ExperimentConfig, GraphSource};
use super::instances::{random_feasible_bounds, random_tight_bounds};
use super::tracefile::{write_trace, TraceError, TraceMeta};
use super::derive_seed;
use crate::balancer_capacity::{order_from_pairs, run_cap, seeded_incident_orders, CapBalancer, CapMode, Incident};
use crate::balancer_capacity_unreliable::{run_unreliable, UnreliableBalancer, UnreliableProtocol, UnreliableRunOptions};
use crate::balancer_delay::{run_delay, DelayBalancer, DelayRunOptions, DelayVariant};
use crate::balancer_sync::{run_sync, seeded_orderings, SyncState};
use crate::centralized::run_centralized;
use crate::digraph::{Digraph, EdgeId, GraphFile, NodeId, Weights};
use crate::error::RunError;
use crate::feasibility::{BoundsFile, CapacityBounds, IntBounds};
use crate::netsim::{DelayPolicy, Fabric, LinkModel};
use crate::trace::{abs_sum, TraceRow};

pub const DEFAULT_MAX_ROUNDS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub algorithm: String,
    pub converged: bool,
    pub rounds: u64,
    /// Distance from the goal: total imbalance, or total deviation from the
    /// targets for `cap-targeted`.
    pub final_epsilon: u64,
    /// First eight bytes of SHA-256 over the final weights, hex encoded.
    pub weights_digest: String,
    pub messages_sent: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
    pub final_weights: Weights,
    pub graph: Digraph,
    pub bounds: Option<IntBounds>,
}

/// Hex of the first 8 bytes of SHA-256 over little-endian weights.
pub fn weights_digest(w: &[i64]) -> String {
    let mut h = Sha256::new();
    for v in w {
        h.update(v.to_le_bytes());
    }
    let out = h.finalize();
    out[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn io_config(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("{}: {e}", path.display()))
}

pub fn load_graph(src: &GraphSource, seed: u64) -> Result<Digraph, RunError> {
    match src {
        GraphSource::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_config(p, e))?;
            let gf: GraphFile = serde_json::from_str(&text).map_err(|e| io_config(p, e))?;
            Ok(gf.to_digraph()?)
        }
        GraphSource::Inline(gf) => Ok(gf.to_digraph()?),
        GraphSource::Random { n, p } => Ok(Digraph::random_strongly_connected(*n, *p, seed)?),
    }
}

pub fn load_bounds(src: &BoundsSource, g: &Digraph, seed: u64) -> Result<CapacityBounds, RunError> {
    let bounds_seed = derive_seed(seed, 3);
    match src {
        BoundsSource::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_config(p, e))?;
            let bf: BoundsFile = serde_json::from_str(&text).map_err(|e| io_config(p, e))?;
            Ok(bf.to_bounds(g)?)
        }
        BoundsSource::Inline(bf) => Ok(bf.to_bounds(g)?),
        BoundsSource::Uniform { lower, upper } => Ok(CapacityBounds::uniform(g, *lower, *upper)?),
        BoundsSource::RandomFeasible { spread } => random_feasible_bounds(g, bounds_seed, *spread),
        BoundsSource::RandomTight { max_lower, max_width } => random_tight_bounds(g, bounds_seed, *max_lower, *max_width),
    }
}

fn pair_edge(g: &Digraph, pair: [usize; 2]) -> Result<EdgeId, RunError> {
    g.edge_id(pair[0], pair[1])
        .ok_or_else(|| RunError::Config(format!("{} -> {} is not an edge", pair[0], pair[1])))
}

fn out_orderings(cfg: &ExperimentConfig, g: &Digraph, seed: u64) -> Result<Vec<Vec<EdgeId>>, RunError> {
    match &cfg.orders {
        Some(orders) => orders
            .iter()
            .map(|list| list.iter().map(|&p| pair_edge(g, p)).collect())
            .collect(),
        None => Ok(seeded_orderings(g, derive_seed(seed, 1))),
    }
}

fn incident_orders(cfg: &ExperimentConfig, g: &Digraph, seed: u64) -> Result<Vec<Vec<Incident>>, RunError> {
    match &cfg.orders {
        Some(orders) => {
            if orders.len() != g.node_count() {
                return Err(RunError::Config(format!("{} orders for {} nodes", orders.len(), g.node_count())));
            }
            g.nodes()
                .zip(orders)
                .map(|(j, list)| {
                    let pairs: Vec<(usize, usize)> = list.iter().map(|p| (p[0], p[1])).collect();
                    order_from_pairs(g, j, &pairs)
                })
                .collect()
        }
        None => Ok(seeded_incident_orders(g, derive_seed(seed, 1))),
    }
}

pub fn build_fabric(cfg: &ExperimentConfig, g: &Digraph, seed: u64) -> Result<Fabric, RunError> {
    let m = g.edge_count();
    let taus = cfg.link.tau_max.expand(m)?;
    let qs = cfg.link.drop_prob.expand(m)?;
    let mut links = Vec::with_capacity(2 * m);
    for e in 0..m {
        let link = LinkModel::new(taus[e], qs[e]).map_err(|err| RunError::Config(err.to_string()))?;
        links.extend([link, link]);
    }
    let policy = match &cfg.link.delay_script {
        Some(script) => {
            let mut overrides = HashMap::new();
            for s in script {
                overrides.insert((pair_edge(g, s.edge)?, s.send_round), s.delay);
            }
            DelayPolicy::Scripted {
                default: cfg.link.default_delay,
                overrides,
            }
        }
        None => match cfg.link.delay_mode {
            DelayMode::Uniform => DelayPolicy::Uniform,
            DelayMode::Max => DelayPolicy::Max,
        },
    };
    let fabric_seed = cfg.link.seed.unwrap_or_else(|| derive_seed(seed, 2));
    Fabric::new(g, links, policy, fabric_seed).map_err(|e| RunError::Config(e.to_string()))
}

struct Raw {
    trace: Vec<TraceRow>,
    weights: Weights,
    rounds: u64,
    converged: bool,
    messages: u64,
}

fn cap_mode(cfg: &ExperimentConfig) -> CapMode {
    match cfg.algorithm {
        Algorithm::CapEnhanced => CapMode::Enhanced,
        Algorithm::CapNaive => CapMode::Naive,
        Algorithm::CapTargeted => CapMode::Targeted(cfg.targets.clone().unwrap_or_default()),
        _ => CapMode::Standard,
    }
}

fn execute(cfg: &ExperimentConfig, g: &Digraph, bounds: Option<&CapacityBounds>, seed: u64) -> Result<Raw, RunError> {
    let n = g.node_count();
    let max_rounds = cfg.max_rounds.unwrap_or(DEFAULT_MAX_ROUNDS);
    let init_weight = cfg.init_weight.unwrap_or(n as i64);
    let raw = match cfg.algorithm {
        Algorithm::Centralized => {
            let r = run_centralized(g, cfg.max_rounds.unwrap_or(n as u64))?;
            Raw {
                rounds: r.iterations,
                converged: true,
                messages: 0,
                weights: r.final_weights,
                trace: r.trace,
            }
        }
        Algorithm::Sync => {
            let s = SyncState::with_orderings(g, init_weight, out_orderings(cfg, g, seed)?)?;
            let r = run_sync(g, s, cfg.max_rounds)?;
            Raw {
                rounds: r.rounds,
                converged: true,
                messages: 0,
                weights: r.weights,
                trace: r.trace,
            }
        }
        Algorithm::SyncAsyncScript => {
            let mut s = SyncState::with_orderings(g, init_weight, out_orderings(cfg, g, seed)?)?;
            let mut trace = vec![TraceRow::new(0, g.imbalances(&s.weights)?)];
            for &j in cfg.activations.as_deref().unwrap_or_default() {
                if j >= n {
                    return Err(RunError::Config(format!("activation of node {j} with n = {n}")));
                }
                s.step_async(g, NodeId(j));
                trace.push(TraceRow::new(s.round, g.imbalances(&s.weights)?));
            }
            let converged = trace.last().is_some_and(|r| r.epsilon == 0);
            Raw {
                rounds: s.round,
                converged,
                messages: 0,
                weights: s.weights,
                trace,
            }
        }
        Algorithm::Delay | Algorithm::DelayEvent => {
            let variant = if cfg.algorithm == Algorithm::Delay {
                DelayVariant::AlwaysTransmit
            } else {
                DelayVariant::EventTriggered
            };
            let b = DelayBalancer::new(g, out_orderings(cfg, g, seed)?, variant, build_fabric(cfg, g, seed)?)?;
            let r = run_delay(
                b,
                DelayRunOptions {
                    max_rounds,
                    record_history: false,
                },
            )?;
            Raw {
                rounds: r.rounds,
                converged: r.converged,
                messages: r.messages_sent,
                weights: r.final_weights,
                trace: r.trace,
            }
        }
        Algorithm::Cap | Algorithm::CapEnhanced | Algorithm::CapNaive | Algorithm::CapTargeted => {
            let b = bounds.ok_or_else(|| RunError::Config("bounds required".into()))?;
            let cap = CapBalancer::new(g, b, cap_mode(cfg), incident_orders(cfg, g, seed)?, cfg.initial_weights.clone())?;
            let r = run_cap(cap, max_rounds);
            Raw {
                rounds: r.rounds,
                converged: r.converged,
                messages: 0,
                weights: r.weights,
                trace: r.trace,
            }
        }
        Algorithm::CapDelay | Algorithm::CapEvent | Algorithm::CapDrop => {
            let b = bounds.ok_or_else(|| RunError::Config("bounds required".into()))?;
            let protocol = match cfg.algorithm {
                Algorithm::CapDelay => UnreliableProtocol::DelayedChanges,
                Algorithm::CapEvent => UnreliableProtocol::EventTriggered,
                _ => UnreliableProtocol::TwoPhase,
            };
            let u = UnreliableBalancer::new(
                g,
                b,
                protocol,
                incident_orders(cfg, g, seed)?,
                build_fabric(cfg, g, seed)?,
                cfg.initial_weights.clone(),
            )?;
            let r = run_unreliable(
                u,
                UnreliableRunOptions {
                    max_rounds,
                    record_history: false,
                },
            )?;
            Raw {
                rounds: r.rounds,
                converged: r.converged,
                messages: r.messages_sent,
                weights: r.weights,
                trace: r.trace,
            }
        }
    };
    Ok(raw)
}

/// One complete run for `seed`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome, RunError> {
    let g = load_graph(&cfg.graph, seed)?;
    let bounds = match (&cfg.bounds, cfg.algorithm.needs_bounds()) {
        (Some(src), true) => Some(load_bounds(src, &g, seed)?),
        _ => None,
    };
    let raw = execute(cfg, &g, bounds.as_ref(), seed)?;
    let final_x = g.imbalances(&raw.weights)?;
    let final_epsilon = match (&cfg.algorithm, &cfg.targets) {
        (Algorithm::CapTargeted, Some(t)) => final_x.iter().zip(t).map(|(x, t)| (x - t).unsigned_abs()).sum(),
        _ => abs_sum(&final_x),
    };
    Ok(RunOutcome {
        summary: RunSummary {
            seed,
            algorithm: cfg.algorithm.name(),
            converged: raw.converged,
            rounds: raw.rounds,
            final_epsilon,
            weights_digest: weights_digest(&raw.weights),
            messages_sent: raw.messages,
        },
        trace: raw.trace,
        final_weights: raw.weights,
        bounds: bounds.map(|b| b.integer_bounds()),
        graph: g,
    })
}

/// Mean total imbalance per round across runs; finished runs hold their
/// last value.
pub fn mean_epsilon(outcomes: &[RunOutcome]) -> Vec<f64> {
    let len = outcomes.iter().map(|o| o.trace.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let total: u64 = outcomes
                .iter()
                .filter_map(|o| o.trace.get(k).or(o.trace.last()).map(|r| r.epsilon))
                .sum();
            total as f64 / outcomes.len().max(1) as f64
        })
        .collect()
}

fn write_err(e: TraceError) -> RunError {
    RunError::Config(format!("writing output: {e}"))
}

/// Run every seed, writing traces, sidecars, `summary.json` and
/// `mean_epsilon.csv` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RunSummary>, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_config(out_dir, e))?;
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let o = run_seed(cfg, seed)?;
        if cfg.write_traces {
            let path = out_dir.join(format!("trace_seed{seed}.csv"));
            write_trace(&path, &o.trace, o.graph.node_count()).map_err(write_err)?;
            let meta = TraceMeta {
                algorithm: cfg.algorithm.name(),
                seed,
                n: o.graph.node_count(),
                monotone: cfg.algorithm.monotone() && !(cfg.algorithm == Algorithm::CapDrop && cfg.link.lossy()),
                final_weights: o.final_weights.clone(),
                lower: o.bounds.as_ref().map(|b| b.lower.clone()),
                upper: o.bounds.as_ref().map(|b| b.upper.clone()),
            };
            meta.save(&TraceMeta::sidecar_path(&path)).map_err(write_err)?;
        }
        outcomes.push(o);
    }
    let summaries: Vec<RunSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    let mut text = serde_json::to_string_pretty(&summaries).map_err(|e| RunError::Config(e.to_string()))?;
    text.push('\n');
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, text).map_err(|e| io_config(&summary_path, e))?;
    let mut mean = String::from("round,mean_epsilon\n");
    for (k, v) in mean_epsilon(&outcomes).iter().enumerate() {
        mean.push_str(&format!("{k},{v}\n"));
    }
    let mean_path = out_dir.join("mean_epsilon.csv");
    std::fs::write(&mean_path, mean).map_err(|e| io_config(&mean_path, e))?;
    Ok(summaries)
}
