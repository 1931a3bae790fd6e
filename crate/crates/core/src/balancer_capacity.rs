//! Balancing under per-edge integer capacity intervals with a reliable,
//! instantaneous exchange of proposed changes between edge endpoints.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::digraph::{Digraph, EdgeId, NodeId, Weights};
use crate::error::RunError;
use crate::feasibility::{CapacityBounds, IntBounds};
use crate::trace::TraceRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// The node is the edge's tail.
    Out,
    /// The node is the edge's head.
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incident {
    pub edge: EdgeId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapMode {
    /// Only positive nodes act, down to zero.
    Standard,
    /// Positive nodes go to zero, nodes below -1 go up to -1.
    Enhanced,
    /// Every nonzero node drives itself to zero. Can cycle.
    Naive,
    /// Enhanced rule around per-node target imbalances.
    Targeted(Vec<i64>),
}

impl CapMode {
    /// Imbalance node `j` will aim for, if it acts at all.
    fn aim(&self, j: NodeId, x: i64) -> Option<i64> {
        match self {
            CapMode::Standard => (x > 0).then_some(0),
            CapMode::Enhanced => match x {
                x if x > 0 => Some(0),
                x if x < -1 => Some(-1),
                _ => None,
            },
            CapMode::Naive => (x != 0).then_some(0),
            CapMode::Targeted(t) => {
                let t = t[j.0];
                match x - t {
                    y if y > 0 => Some(t),
                    y if y < -1 => Some(t - 1),
                    _ => None,
                }
            }
        }
    }

    fn goal_reached(&self, x: &[i64]) -> bool {
        match self {
            CapMode::Targeted(t) => x == t.as_slice(),
            _ => x.iter().all(|&v| v == 0),
        }
    }
}

/// Per-node incident-edge order and round-robin cursor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapNodeState {
    pub id: NodeId,
    pub order: Vec<Incident>,
    pub cursor: usize,
}

/// One seeded permutation over each node's combined out- and in-edges.
pub fn seeded_incident_orders(g: &Digraph, seed: u64) -> Vec<Vec<Incident>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    g.nodes()
        .map(|j| {
            let mut order = incident_edges(g, j);
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

fn incident_edges(g: &Digraph, j: NodeId) -> Vec<Incident> {
    let outs = g.out_edges(j).iter().map(|&edge| Incident { edge, role: Role::Out });
    let ins = g.in_edges(j).iter().map(|&edge| Incident { edge, role: Role::In });
    outs.chain(ins).collect()
}

/// Order for node `j` given as a list of `(from, to)` pairs.
pub fn order_from_pairs(g: &Digraph, j: NodeId, pairs: &[(usize, usize)]) -> Result<Vec<Incident>, RunError> {
    pairs
        .iter()
        .map(|&(from, to)| {
            let edge = g
                .edge_id(from, to)
                .ok_or_else(|| RunError::Config(format!("{from} -> {to} is not an edge")))?;
            let role = if from == j.0 {
                Role::Out
            } else if to == j.0 {
                Role::In
            } else {
                return Err(RunError::Config(format!("{from} -> {to} is not incident to node {j}")));
            };
            Ok(Incident { edge, role })
        })
        .collect()
}

pub(crate) fn validate_incident_orders(g: &Digraph, orders: &[Vec<Incident>]) -> Result<(), RunError> {
    if orders.len() != g.node_count() {
        return Err(RunError::Config(format!("{} orders for {} nodes", orders.len(), g.node_count())));
    }
    for j in g.nodes() {
        let mut got: Vec<(EdgeId, bool)> = orders[j.0].iter().map(|i| (i.edge, i.role == Role::Out)).collect();
        let mut want: Vec<(EdgeId, bool)> = incident_edges(g, j).iter().map(|i| (i.edge, i.role == Role::Out)).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(RunError::Config(format!("order for node {j} does not cover its incident edges exactly")));
        }
    }
    Ok(())
}

/// Walk `order` from `cursor`, one unit per visited edge, moving the node's
/// imbalance from `current` toward `aim`. Out-edges go up to lower the
/// imbalance, in-edges go down. Stops when the aim is met or after a full
/// sweep with nothing applicable. Returns changes aligned with `order`.
pub(crate) fn round_robin_walk(
    order: &[Incident],
    cursor: &mut usize,
    value: impl Fn(Incident) -> i64,
    ib: &IntBounds,
    current: i64,
    aim: i64,
) -> Vec<i64> {
    let d = order.len();
    let mut change = vec![0i64; d];
    let mut residual = current;
    let mut idle = 0;
    while residual != aim && idle < d {
        let pos = *cursor;
        *cursor = (*cursor + 1) % d;
        let inc = order[pos];
        let Incident { edge, role } = inc;
        let lower_imbalance = residual > aim;
        // +1 on an out-edge or -1 on an in-edge lowers the imbalance
        let step = match (role, lower_imbalance) {
            (Role::Out, true) | (Role::In, false) => 1,
            (Role::Out, false) | (Role::In, true) => -1,
        };
        let next = value(inc) + change[pos] + step;
        if ib.contains(edge, next) {
            change[pos] += step;
            residual += if lower_imbalance { -1 } else { 1 };
            idle = 0;
        } else {
            idle += 1;
        }
    }
    change
}

#[derive(Debug, Clone)]
pub struct CapBalancer<'g> {
    g: &'g Digraph,
    ib: IntBounds,
    mode: CapMode,
    nodes: Vec<CapNodeState>,
    weights: Weights,
    round: u64,
    clamp_engaged: u64,
}

impl<'g> CapBalancer<'g> {
    /// Weights start at `ceil(l)` unless `initial` is given.
    pub fn new(
        g: &'g Digraph,
        b: &CapacityBounds,
        mode: CapMode,
        orders: Vec<Vec<Incident>>,
        initial: Option<Weights>,
    ) -> Result<Self, RunError> {
        let ib = check_bounds(g, b)?;
        validate_incident_orders(g, &orders)?;
        if let CapMode::Targeted(t) = &mode {
            if t.len() != g.node_count() || t.iter().sum::<i64>() != 0 {
                return Err(RunError::Config("targets need one entry per node and must sum to zero".into()));
            }
        }
        let weights = initial_weights(g, &ib, initial)?;
        let nodes = g
            .nodes()
            .zip(orders)
            .map(|(id, order)| CapNodeState { id, order, cursor: 0 })
            .collect();
        Ok(Self {
            g,
            ib,
            mode,
            nodes,
            weights,
            round: 0,
            clamp_engaged: 0,
        })
    }

    pub fn seeded(g: &'g Digraph, b: &CapacityBounds, mode: CapMode, seed: u64) -> Result<Self, RunError> {
        Self::new(g, b, mode, seeded_incident_orders(g, seed), None)
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn nodes(&self) -> &[CapNodeState] {
        &self.nodes
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn clamp_engaged(&self) -> u64 {
        self.clamp_engaged
    }

    pub fn imbalances(&self) -> Vec<i64> {
        self.g.imbalances(&self.weights).expect("weights cover the graph")
    }

    /// Proposal of node `j` on the current weights, aligned with its order.
    pub fn propose_changes(&mut self, j: NodeId, x: i64) -> Vec<i64> {
        let node = &mut self.nodes[j.0];
        let Some(aim) = self.mode.aim(j, x) else {
            return vec![0; node.order.len()];
        };
        let w = &self.weights;
        let change = round_robin_walk(&node.order, &mut node.cursor, |inc| w[inc.edge], &self.ib, x, aim);
        if self.mode == CapMode::Standard {
            for (inc, &c) in node.order.iter().zip(&change) {
                assert!(
                    (inc.role == Role::Out && c >= 0) || (inc.role == Role::In && c <= 0),
                    "positive node proposed a change against its role"
                );
            }
        }
        change
    }

    /// All nodes propose on the same weights, then both endpoint changes
    /// land on each edge, clamped to its bounds.
    pub fn step(&mut self) {
        let x = self.imbalances();
        let mut delta = vec![0i64; self.g.edge_count()];
        for j in self.g.nodes() {
            let change = self.propose_changes(j, x[j.0]);
            for (inc, c) in self.nodes[j.0].order.iter().zip(change) {
                delta[inc.edge] += c;
            }
        }
        for (e, d) in delta.into_iter().enumerate() {
            let raw = self.weights[e] + d;
            let clamped = self.ib.clamp(e, raw);
            if clamped != raw {
                self.clamp_engaged += 1;
            }
            self.weights[e] = clamped;
        }
        self.round += 1;
    }

    pub fn goal_reached(&self) -> bool {
        self.mode.goal_reached(&self.imbalances())
    }
}

pub(crate) fn check_bounds(g: &Digraph, b: &CapacityBounds) -> Result<IntBounds, RunError> {
    if !g.is_strongly_connected() {
        return Err(RunError::NotStronglyConnected);
    }
    let ib = b.integer_bounds();
    if let Some(e) = (0..g.edge_count()).find(|&e| ib.lower[e] > ib.upper[e]) {
        let edge = g.edge(e);
        return Err(RunError::InfeasibleInterval {
            from: edge.from.0,
            to: edge.to.0,
        });
    }
    Ok(ib)
}

pub(crate) fn initial_weights(g: &Digraph, ib: &IntBounds, initial: Option<Weights>) -> Result<Weights, RunError> {
    match initial {
        None => Ok(ib.lower.clone()),
        Some(w) => {
            if w.len() != g.edge_count() || w.iter().enumerate().any(|(e, &v)| !ib.contains(e, v)) {
                return Err(RunError::Config("initial weights must cover every edge within its bounds".into()));
            }
            Ok(w)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapRunResult {
    pub weights: Weights,
    pub rounds: u64,
    /// Row `k` is the state at the start of round `k`.
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub clamp_engaged: u64,
}

/// Step until the goal is reached or `max_rounds` rounds have run.
pub fn run_cap(mut b: CapBalancer<'_>, max_rounds: u64) -> CapRunResult {
    let mut trace = Vec::new();
    loop {
        let x = b.imbalances();
        let done = b.mode.goal_reached(&x);
        trace.push(TraceRow::new(b.round, x));
        if done || b.round >= max_rounds {
            return CapRunResult {
                weights: b.weights,
                rounds: b.round,
                trace,
                converged: done,
                clamp_engaged: b.clamp_engaged,
            };
        }
        b.step();
    }
}
