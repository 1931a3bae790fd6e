//! Capacity-constrained balancing over imperfect links.
//!
//! Every edge is owned by its tail, which holds the true weight; the head
//! holds a perceived copy that never exceeds it. Three protocols are covered:
//! change amounts over delayed links, the same with event-triggered
//! processing, and a two-phase desired-weight handshake over lossy links.

use crate::balancer_capacity::{check_bounds, initial_weights, round_robin_walk, validate_incident_orders, Incident, Role};
use crate::digraph::{Digraph, NodeId, Weights};
use crate::error::RunError;
use crate::feasibility::{CapacityBounds, IntBounds};
use crate::netsim::{Channel, Deliveries, Direction, Fabric, Message, MessageKind};
use crate::trace::TraceRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnreliableProtocol {
    /// Change amounts, bounded delays, every node every round.
    DelayedChanges,
    /// Change amounts, bounded delays, nodes wake only on arrivals.
    EventTriggered,
    /// Desired weight out, new weight back, within one round; lossy links.
    TwoPhase,
}

/// Sum of change amounts in `arrivals`.
pub fn aggregate_delayed_changes(arrivals: &[Message]) -> Result<i64, RunError> {
    arrivals.iter().try_fold(0, |acc, m| {
        if m.kind == MessageKind::ChangeAmount {
            Ok(acc + m.value)
        } else {
            Err(RunError::Protocol(format!("expected a change amount, got {:?}", m.kind)))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercNodeState {
    pub id: NodeId,
    pub order: Vec<Incident>,
    pub cursor: usize,
}

#[derive(Debug, Clone)]
pub struct UnreliableBalancer<'g> {
    g: &'g Digraph,
    ib: IntBounds,
    protocol: UnreliableProtocol,
    nodes: Vec<PercNodeState>,
    /// True weights, held by each edge's tail.
    weights: Weights,
    /// Perceived weights, held by each edge's head.
    perceived: Weights,
    /// Own changes waiting to be applied next round, by the tail and head.
    pending_tail: Vec<i64>,
    pending_head: Vec<i64>,
    fabric: Fabric,
    round: u64,
    clamp_engaged: u64,
}

/// Change amounts summed per edge, split by which endpoint receives them.
struct Arrivals {
    at_tail: Vec<i64>,
    at_head: Vec<i64>,
    woke: Vec<bool>,
}

impl<'g> UnreliableBalancer<'g> {
    pub fn new(
        g: &'g Digraph,
        b: &CapacityBounds,
        protocol: UnreliableProtocol,
        orders: Vec<Vec<Incident>>,
        fabric: Fabric,
        initial: Option<Weights>,
    ) -> Result<Self, RunError> {
        let ib = check_bounds(g, b)?;
        validate_incident_orders(g, &orders)?;
        let weights = initial_weights(g, &ib, initial)?;
        let m = g.edge_count();
        Ok(Self {
            g,
            ib,
            protocol,
            nodes: g
                .nodes()
                .zip(orders)
                .map(|(id, order)| PercNodeState { id, order, cursor: 0 })
                .collect(),
            perceived: weights.clone(),
            weights,
            pending_tail: vec![0; m],
            pending_head: vec![0; m],
            fabric,
            round: 0,
            clamp_engaged: 0,
        })
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn perceived(&self) -> &[i64] {
        &self.perceived
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn clamp_engaged(&self) -> u64 {
        self.clamp_engaged
    }

    pub fn imbalances(&self) -> Vec<i64> {
        self.g.imbalances(&self.weights).expect("weights cover the graph")
    }

    /// Perceived in-weight sum minus true out-weight sum, per node.
    pub fn perceived_imbalances(&self) -> Vec<i64> {
        let mut x = vec![0i64; self.g.node_count()];
        for (e, edge) in self.g.edges().iter().enumerate() {
            x[edge.to.0] += self.perceived[e];
            x[edge.from.0] -= self.weights[e];
        }
        x
    }

    fn clamp(&mut self, e: usize, v: i64) -> i64 {
        let c = self.ib.clamp(e, v);
        if c != v {
            self.clamp_engaged += 1;
        }
        c
    }

    /// Value node `j` sees on an incident edge.
    fn local_value(weights: &[i64], perceived: &[i64], inc: Incident) -> i64 {
        match inc.role {
            Role::Out => weights[inc.edge],
            Role::In => perceived[inc.edge],
        }
    }

    /// Proposal of `j` aligned with its order; empty unless `x_p > 0`.
    fn propose(&mut self, j: NodeId, x_p: i64) -> Vec<i64> {
        let node = &mut self.nodes[j.0];
        if x_p <= 0 {
            return vec![0; node.order.len()];
        }
        let (w, p) = (&self.weights, &self.perceived);
        round_robin_walk(&node.order, &mut node.cursor, |inc| Self::local_value(w, p, inc), &self.ib, x_p, 0)
    }

    fn node_perceived_imbalance(&self, j: NodeId) -> i64 {
        let inflow: i64 = self.g.in_edges(j).iter().map(|&e| self.perceived[e]).sum();
        let outflow: i64 = self.g.out_edges(j).iter().map(|&e| self.weights[e]).sum();
        inflow - outflow
    }

    fn send_changes(&mut self, j: NodeId, change: &[i64]) {
        for (inc, &c) in self.nodes[j.0].order.iter().zip(change) {
            if c == 0 {
                continue;
            }
            let channel = match inc.role {
                Role::Out => Channel::forward(inc.edge),
                Role::In => Channel::backward(inc.edge),
            };
            self.fabric.send(channel, MessageKind::ChangeAmount, c);
        }
    }

    fn arrivals_by_edge(&self, deliveries: &Deliveries) -> Result<Arrivals, RunError> {
        let m = self.g.edge_count();
        // changes arriving at the tail (from the head) and at the head (from the tail)
        let mut at_tail = vec![0i64; m];
        let mut at_head = vec![0i64; m];
        let mut woke = vec![false; self.g.node_count()];
        for (j, msgs) in deliveries {
            woke[j.0] = true;
            for msg in msgs {
                let amount = aggregate_delayed_changes(std::slice::from_ref(msg))?;
                match msg.channel.dir {
                    Direction::Backward => at_tail[msg.channel.edge] += amount,
                    Direction::Forward => at_head[msg.channel.edge] += amount,
                }
            }
        }
        Ok(Arrivals { at_tail, at_head, woke })
    }

    /// Start-of-round bookkeeping; returns which nodes heard something.
    fn absorb(&mut self) -> Result<Vec<bool>, RunError> {
        let deliveries = self.fabric.deliver(self.round);
        let Arrivals { at_tail, at_head, woke } = self.arrivals_by_edge(&deliveries)?;
        for e in 0..self.g.edge_count() {
            let f = self.weights[e] + at_tail[e] + self.pending_tail[e];
            self.weights[e] = self.clamp(e, f);
            let p = self.perceived[e] + at_head[e] + self.pending_head[e];
            self.perceived[e] = self.clamp(e, p);
        }
        self.pending_tail.iter_mut().for_each(|c| *c = 0);
        self.pending_head.iter_mut().for_each(|c| *c = 0);
        Ok(woke)
    }

    /// Record `change` as own pending changes (delayed protocol) or apply
    /// them at once (event-triggered protocol).
    fn commit_own(&mut self, j: NodeId, change: &[i64], immediate: bool) {
        let order = self.nodes[j.0].order.clone();
        for (inc, &c) in order.iter().zip(change) {
            match (inc.role, immediate) {
                (Role::Out, false) => self.pending_tail[inc.edge] += c,
                (Role::In, false) => self.pending_head[inc.edge] += c,
                (Role::Out, true) => {
                    let v = self.weights[inc.edge] + c;
                    self.weights[inc.edge] = self.clamp(inc.edge, v);
                }
                (Role::In, true) => {
                    let v = self.perceived[inc.edge] + c;
                    self.perceived[inc.edge] = self.clamp(inc.edge, v);
                }
            }
        }
    }

    fn act_change_protocol(&mut self, woke: &[bool]) {
        let immediate = self.protocol == UnreliableProtocol::EventTriggered;
        for j in self.g.nodes() {
            if immediate && self.round > 0 && !woke[j.0] {
                continue;
            }
            let x_p = self.node_perceived_imbalance(j);
            let change = self.propose(j, x_p);
            if change.iter().all(|&c| c == 0) {
                continue;
            }
            self.send_changes(j, &change);
            self.commit_own(j, &change, immediate);
        }
    }

    /// Both handshake phases of one round.
    fn two_phase_round(&mut self) {
        let m = self.g.edge_count();
        // desired values: the tail's for its out-edges, the head's for its in-edges
        let mut desired_tail = self.weights.clone();
        let mut desired_head = self.perceived.clone();
        for j in self.g.nodes() {
            let x_p = self.node_perceived_imbalance(j);
            let change = self.propose(j, x_p);
            for (inc, c) in self.nodes[j.0].order.iter().zip(change) {
                match inc.role {
                    Role::Out => desired_tail[inc.edge] += c,
                    Role::In => desired_head[inc.edge] += c,
                }
            }
        }
        let base = 2 * self.round;
        for (e, &d) in desired_head.iter().enumerate() {
            self.fabric.send(Channel::backward(e), MessageKind::DesiredWeight, d);
        }
        let mut heard = vec![None; m];
        for msgs in self.fabric.deliver(base + 1).into_values() {
            for msg in msgs {
                heard[msg.channel.edge] = Some(msg.value);
            }
        }
        for e in 0..m {
            let from_head = heard[e].unwrap_or(self.weights[e]);
            let f = from_head + desired_tail[e] - self.weights[e];
            self.weights[e] = self.clamp(e, f);
            self.fabric.send(Channel::forward(e), MessageKind::FullWeight, self.weights[e]);
        }
        let mut echoed = vec![None; m];
        for msgs in self.fabric.deliver(base + 2).into_values() {
            for msg in msgs {
                echoed[msg.channel.edge] = Some(msg.value);
            }
        }
        for e in 0..m {
            self.perceived[e] = echoed[e].unwrap_or(desired_head[e]);
        }
    }

    /// Receive phase; returns which nodes heard something. The two-phase
    /// protocol exchanges everything inside [`Self::act`].
    fn receive(&mut self) -> Result<Vec<bool>, RunError> {
        match self.protocol {
            UnreliableProtocol::TwoPhase => Ok(vec![false; self.g.node_count()]),
            _ => self.absorb(),
        }
    }

    fn act(&mut self, woke: &[bool]) {
        match self.protocol {
            UnreliableProtocol::TwoPhase => self.two_phase_round(),
            _ => self.act_change_protocol(woke),
        }
        self.round += 1;
    }

    pub fn step(&mut self) -> Result<(), RunError> {
        let woke = self.receive()?;
        self.act(&woke);
        Ok(())
    }

    fn settled(&self) -> bool {
        self.imbalances().iter().all(|&x| x == 0)
            && self.perceived == self.weights
            && self.fabric.is_empty()
            && self.pending_tail.iter().chain(&self.pending_head).all(|&c| c == 0)
    }
}

#[derive(Debug, Clone)]
pub struct UnreliableRunResult {
    pub weights: Weights,
    pub rounds: u64,
    /// Row `k`: true and perceived imbalances once round `k`'s arrivals
    /// have been absorbed.
    pub trace: Vec<TraceRow>,
    /// Perceived weights at each trace row, when requested.
    pub perceived_history: Vec<Weights>,
    pub weight_history: Vec<Weights>,
    pub converged: bool,
    pub messages_sent: u64,
    pub clamp_engaged: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnreliableRunOptions {
    pub max_rounds: u64,
    pub record_history: bool,
}

/// Run until balanced with nothing in flight, or until the budget runs out.
pub fn run_unreliable(mut b: UnreliableBalancer<'_>, opts: UnreliableRunOptions) -> Result<UnreliableRunResult, RunError> {
    let mut trace = Vec::new();
    let mut perceived_history = Vec::new();
    let mut weight_history = Vec::new();
    loop {
        let woke = b.receive()?;
        let row = TraceRow::new(b.round, b.imbalances()).with_perceived(&b.perceived_imbalances());
        trace.push(row);
        if opts.record_history {
            perceived_history.push(b.perceived.clone());
            weight_history.push(b.weights.clone());
        }
        let converged = b.settled();
        if converged || b.round >= opts.max_rounds {
            return Ok(UnreliableRunResult {
                rounds: b.round,
                messages_sent: b.fabric.stats().sent,
                clamp_engaged: b.clamp_engaged,
                weights: b.weights,
                trace,
                perceived_history,
                weight_history,
                converged,
            });
        }
        b.act(&woke);
    }
}
