//! Synchronous distributed balancing: positive nodes spread their in-weight
//! evenly over their out-edges, strongly negative nodes shed weight down to
//! an imbalance of -1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::balancer_delay::allocate_weights;
use crate::digraph::{Digraph, EdgeId, NodeId, Weights};
use crate::error::RunError;
use crate::trace::TraceRow;

/// A seeded permutation of every node's out-edges.
pub fn seeded_orderings(g: &Digraph, seed: u64) -> Vec<Vec<EdgeId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    g.nodes()
        .map(|j| {
            let mut order = g.out_edges(j).to_vec();
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

pub(crate) fn validate_orderings(g: &Digraph, orderings: &[Vec<EdgeId>]) -> Result<(), RunError> {
    if orderings.len() != g.node_count() {
        return Err(RunError::Config(format!(
            "{} orderings given for {} nodes",
            orderings.len(),
            g.node_count()
        )));
    }
    for j in g.nodes() {
        let mut sorted = orderings[j.0].clone();
        sorted.sort_unstable();
        if sorted != g.out_edges(j) {
            return Err(RunError::Config(format!(
                "ordering for node {j} is not a permutation of its out-edges"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncState {
    pub weights: Weights,
    pub orderings: Vec<Vec<EdgeId>>,
    pub round: u64,
}

#[derive(Debug, Clone)]
pub struct SyncRunResult {
    pub weights: Weights,
    pub rounds: u64,
    pub trace: Vec<TraceRow>,
}

/// New out-weights of `j` aligned with `ordering`, or `None` if `j` holds still.
fn node_update(g: &Digraph, w: &[i64], j: NodeId, ordering: &[EdgeId]) -> Option<Vec<i64>> {
    let in_sum: i64 = g.in_edges(j).iter().map(|&e| w[e]).sum();
    let out_sum: i64 = g.out_edges(j).iter().map(|&e| w[e]).sum();
    let x = in_sum - out_sum;
    let degree = ordering.len() as i64;
    if x > 0 {
        Some(allocate_weights(in_sum, ordering.len()).ok()?)
    } else if x < -1 {
        if in_sum / degree >= 1 {
            Some(allocate_weights(in_sum + 1, ordering.len()).ok()?)
        } else {
            Some(vec![1; ordering.len()])
        }
    } else {
        None
    }
}

impl SyncState {
    pub fn new(g: &Digraph, init_weight: i64, ordering_seed: u64) -> Result<Self, RunError> {
        Self::with_orderings(g, init_weight, seeded_orderings(g, ordering_seed))
    }

    pub fn with_orderings(g: &Digraph, init_weight: i64, orderings: Vec<Vec<EdgeId>>) -> Result<Self, RunError> {
        if init_weight < 1 {
            return Err(RunError::BadInitWeight(init_weight));
        }
        if !g.is_strongly_connected() {
            return Err(RunError::NotStronglyConnected);
        }
        validate_orderings(g, &orderings)?;
        let weights = vec![init_weight; g.edge_count()];
        let n = g.node_count() as i64;
        if init_weight == n {
            let eps = g.total_imbalance(&weights)? as i64;
            assert!(eps <= n * n * (n - 2), "initial imbalance {eps} exceeds n^2 (n - 2)");
        }
        Ok(Self {
            weights,
            orderings,
            round: 0,
        })
    }

    fn apply(&mut self, j: NodeId, new: Vec<i64>) {
        for (&e, v) in self.orderings[j.0].iter().zip(new) {
            self.weights[e] = v;
        }
    }

    /// Every node acts on the same frozen weights.
    pub fn step(&mut self, g: &Digraph) {
        let frozen = self.weights.clone();
        for j in g.nodes() {
            if let Some(new) = node_update(g, &frozen, j, &self.orderings[j.0]) {
                self.apply(j, new);
            }
        }
        self.round += 1;
    }

    /// Only `active` applies its rule.
    pub fn step_async(&mut self, g: &Digraph, active: NodeId) {
        if let Some(new) = node_update(g, &self.weights, active, &self.orderings[active.0]) {
            self.apply(active, new);
        }
        self.round += 1;
    }
}

/// The round budget `m^2 * eps0 / 2`.
pub fn sync_budget(g: &Digraph, eps0: u64) -> u64 {
    let m = g.edge_count() as u64;
    m * m * eps0 / 2
}

pub fn run_sync(g: &Digraph, mut s: SyncState, max_rounds: Option<u64>) -> Result<SyncRunResult, RunError> {
    let eps0 = g.total_imbalance(&s.weights)?;
    let budget = max_rounds.unwrap_or_else(|| sync_budget(g, eps0));
    let mut trace = Vec::new();
    let start = s.round;
    loop {
        let row = TraceRow::new(s.round, g.imbalances(&s.weights)?);
        let done = row.epsilon == 0;
        trace.push(row);
        if done {
            return Ok(SyncRunResult {
                weights: s.weights,
                rounds: s.round - start,
                trace,
            });
        }
        if s.round - start >= budget {
            return Err(RunError::Diverged { budget });
        }
        s.step(g);
    }
}
