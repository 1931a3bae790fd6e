//! Delay-tolerant balancing with non-decreasing weights. Nodes act on the
//! largest in-weight value they have heard so far; the event-triggered
//! variant only recomputes and retransmits when that view changes.

use thiserror::Error;

use crate::digraph::{Digraph, EdgeId, NodeId, Weights};
use crate::error::RunError;
use crate::netsim::{Channel, Direction, Fabric, Message, MessageKind};
use crate::trace::TraceRow;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocationError {
    #[error("cannot allocate over zero out-edges")]
    ZeroOutDegree,
}

/// Spread `in_sum` over `out_degree` edges: everyone gets `in_sum / D`, the
/// first `in_sum % D` positions one more. Positions follow priority order.
pub fn allocate_weights(in_sum: i64, out_degree: usize) -> Result<Vec<i64>, AllocationError> {
    if out_degree == 0 {
        return Err(AllocationError::ZeroOutDegree);
    }
    let d = out_degree as i64;
    let (base, extra) = (in_sum.div_euclid(d), in_sum.rem_euclid(d));
    Ok((0..d).map(|p| base + i64::from(p < extra)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayVariant {
    AlwaysTransmit,
    EventTriggered,
}

/// One node's local view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayNodeState {
    pub id: NodeId,
    /// Out-edges in priority order.
    pub priority: Vec<EdgeId>,
    /// Aligned with `priority`.
    pub out_weights: Vec<i64>,
    /// Sorted in-edges.
    pub in_edges: Vec<EdgeId>,
    /// Aligned with `in_edges`.
    pub perceived_in: Vec<i64>,
}

impl DelayNodeState {
    pub fn new(g: &Digraph, id: NodeId, priority: Vec<EdgeId>) -> Self {
        Self {
            id,
            out_weights: vec![1; priority.len()],
            priority,
            in_edges: g.in_edges(id).to_vec(),
            perceived_in: vec![1; g.in_degree(id)],
        }
    }

    /// Apply the max rule to arriving full weights. Returns whether any
    /// perceived value grew.
    pub fn receive_updates(&mut self, msgs: &[Message]) -> Result<bool, RunError> {
        let mut changed = false;
        for m in msgs {
            if m.kind != MessageKind::FullWeight || m.channel.dir != Direction::Forward {
                return Err(RunError::Protocol(format!("node {} got unexpected {:?}", self.id, m.kind)));
            }
            let slot = self
                .in_edges
                .binary_search(&m.channel.edge)
                .map_err(|_| RunError::Protocol(format!("edge {} does not enter node {}", m.channel.edge, self.id)))?;
            if m.value > self.perceived_in[slot] {
                self.perceived_in[slot] = m.value;
                changed = true;
            }
        }
        Ok(changed)
    }

    pub fn delayed_imbalance(&self) -> i64 {
        self.perceived_in.iter().sum::<i64>() - self.out_weights.iter().sum::<i64>()
    }

    /// Rebalance out-weights if the delayed imbalance is positive.
    pub fn compute(&mut self) {
        if self.delayed_imbalance() > 0 {
            let in_sum = self.perceived_in.iter().sum();
            self.out_weights = allocate_weights(in_sum, self.priority.len()).expect("strongly connected nodes have out-edges");
        }
    }

    fn transmit(&self, fabric: &mut Fabric) {
        for (&e, &w) in self.priority.iter().zip(&self.out_weights) {
            fabric.send(Channel::forward(e), MessageKind::FullWeight, w);
        }
    }

    /// Send only the out-weights that differ from `before`.
    fn transmit_changes(&self, before: &[i64], fabric: &mut Fabric) {
        for ((&e, &w), &old) in self.priority.iter().zip(&self.out_weights).zip(before) {
            if w != old {
                fabric.send(Channel::forward(e), MessageKind::FullWeight, w);
            }
        }
    }
}

/// A running delay-tolerant protocol instance.
#[derive(Debug, Clone)]
pub struct DelayBalancer<'g> {
    g: &'g Digraph,
    variant: DelayVariant,
    nodes: Vec<DelayNodeState>,
    fabric: Fabric,
    round: u64,
}

impl<'g> DelayBalancer<'g> {
    pub fn new(g: &'g Digraph, priorities: Vec<Vec<EdgeId>>, variant: DelayVariant, fabric: Fabric) -> Result<Self, RunError> {
        if !g.is_strongly_connected() {
            return Err(RunError::NotStronglyConnected);
        }
        crate::balancer_sync::validate_orderings(g, &priorities)?;
        let nodes = g
            .nodes()
            .zip(priorities)
            .map(|(j, p)| DelayNodeState::new(g, j, p))
            .collect();
        Ok(Self {
            g,
            variant,
            nodes,
            fabric,
            round: 0,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn nodes(&self) -> &[DelayNodeState] {
        &self.nodes
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn true_weights(&self) -> Weights {
        let mut w = vec![0; self.g.edge_count()];
        for node in &self.nodes {
            for (&e, &v) in node.priority.iter().zip(&node.out_weights) {
                w[e] = v;
            }
        }
        w
    }

    pub fn perceived_weights(&self) -> Weights {
        let mut w = vec![0; self.g.edge_count()];
        for node in &self.nodes {
            for (&e, &v) in node.in_edges.iter().zip(&node.perceived_in) {
                w[e] = v;
            }
        }
        w
    }

    /// Receive phase of the current round. Returns which nodes saw a change.
    fn receive(&mut self) -> Result<Vec<bool>, RunError> {
        let arrivals = self.fabric.deliver(self.round);
        let mut changed = vec![false; self.nodes.len()];
        for (j, msgs) in arrivals {
            changed[j.0] = self.nodes[j.0].receive_updates(&msgs)?;
        }
        Ok(changed)
    }

    fn act(&mut self, changed: &[bool]) {
        for (j, node) in self.nodes.iter_mut().enumerate() {
            match self.variant {
                DelayVariant::AlwaysTransmit => {
                    node.compute();
                    node.transmit(&mut self.fabric);
                }
                // repeats of an unchanged weight carry nothing under the max rule
                DelayVariant::EventTriggered if self.round == 0 || changed[j] => {
                    let before = node.out_weights.clone();
                    node.compute();
                    node.transmit_changes(&before, &mut self.fabric);
                }
                DelayVariant::EventTriggered => {}
            }
        }
        self.round += 1;
    }

    /// One full round: receive, compute, transmit.
    pub fn step(&mut self) -> Result<(), RunError> {
        let changed = self.receive()?;
        self.act(&changed);
        Ok(())
    }

    fn snapshot(&self) -> TraceRow {
        let w = self.true_weights();
        let p = self.perceived_weights();
        let x = self.g.imbalances(&w).expect("weights cover the graph");
        let delayed: Vec<i64> = self.nodes.iter().map(DelayNodeState::delayed_imbalance).collect();
        debug_assert_eq!(p.len(), w.len());
        TraceRow::new(self.round, x).with_perceived(&delayed)
    }
}

#[derive(Debug, Clone)]
pub struct DelayRunResult {
    pub final_weights: Weights,
    /// First round at which the true weights are balanced and every head
    /// knows the exact weight of each incoming edge.
    pub rounds: u64,
    /// Row `k`: true imbalances at the start of round `k` and the delayed
    /// imbalance after that round's receive phase.
    pub trace: Vec<TraceRow>,
    /// Perceived weights after each receive phase, when requested.
    pub perceived_history: Vec<Weights>,
    /// True weights at the start of each round, when requested.
    pub true_history: Vec<Weights>,
    pub messages_sent: u64,
    /// Transmissions made after convergence while the fabric drained.
    /// Always-transmit runs keep sending forever and report 0 here.
    pub messages_after_convergence: u64,
    pub converged: bool,
}

impl DelayRunResult {
    pub fn require_converged(self) -> Result<Self, RunError> {
        if self.converged {
            Ok(self)
        } else {
            Err(RunError::Diverged { budget: self.rounds })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DelayRunOptions {
    pub max_rounds: u64,
    pub record_history: bool,
}

pub fn run_delay(mut b: DelayBalancer<'_>, opts: DelayRunOptions) -> Result<DelayRunResult, RunError> {
    let mut trace = Vec::new();
    let mut perceived_history = Vec::new();
    let mut true_history = Vec::new();
    loop {
        let start_weights = b.true_weights();
        let changed = b.receive()?;
        let perceived = b.perceived_weights();
        let row = b.snapshot();
        let converged = row.epsilon == 0 && perceived == start_weights;
        trace.push(row);
        if opts.record_history {
            perceived_history.push(perceived);
            true_history.push(start_weights.clone());
        }
        if converged {
            let rounds = b.round;
            let sent_at_convergence = b.fabric.stats().sent;
            let mut after = 0;
            if b.variant == DelayVariant::EventTriggered {
                b.act(&changed);
                while !b.fabric.is_empty() && b.round <= opts.max_rounds {
                    b.step()?;
                }
                after = b.fabric.stats().sent - sent_at_convergence;
            }
            return Ok(DelayRunResult {
                final_weights: start_weights,
                rounds,
                trace,
                perceived_history,
                true_history,
                messages_sent: sent_at_convergence,
                messages_after_convergence: after,
                converged: true,
            });
        }
        if b.round >= opts.max_rounds {
            return Ok(DelayRunResult {
                final_weights: b.true_weights(),
                rounds: b.round,
                trace,
                perceived_history,
                true_history,
                messages_sent: b.fabric.stats().sent,
                messages_after_convergence: 0,
                converged: false,
            });
        }
        b.act(&changed);
    }
}
