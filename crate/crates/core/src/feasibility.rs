//! Integer circulation feasibility for capacity-bounded edge weights.
//!
//! Two independent deciders are provided: exhaustive subset enumeration for
//! small graphs and a lower-bounded circulation solved as a max-flow problem.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digraph::{Digraph, EdgeId, NodeId, Weights};

const SNAP_TOLERANCE: f64 = 1e-9;
pub const BRUTE_FORCE_MAX_NODES: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum FeasibilityError {
    #[error("no bound given for edge {0} -> {1}")]
    MissingBound(usize, usize),
    #[error("bound given for {0} -> {1}, which is not an edge")]
    UnknownEdge(usize, usize),
    #[error("duplicate bound for edge {0} -> {1}")]
    DuplicateBound(usize, usize),
    #[error("lower bound {lower} on edge {from} -> {to} must be positive")]
    NonPositiveLowerBound { from: usize, to: usize, lower: f64 },
    #[error("interval [{lower}, {upper}] on edge {from} -> {to} is empty")]
    InvertedInterval { from: usize, to: usize, lower: f64, upper: f64 },
    #[error("subset enumeration supports at most {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },
}

/// `ceil` after snapping values within 1e-9 of an integer onto it.
pub fn snapped_ceil(v: f64) -> i64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_TOLERANCE {
        r as i64
    } else {
        v.ceil() as i64
    }
}

pub fn snapped_floor(v: f64) -> i64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_TOLERANCE {
        r as i64
    } else {
        v.floor() as i64
    }
}

/// Real-valued `[l, u]` per edge, indexed by [`EdgeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityBounds {
    intervals: Vec<(f64, f64)>,
}

/// Integer images `ceil(l)` and `floor(u)` of a [`CapacityBounds`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntBounds {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
}

impl IntBounds {
    pub fn contains(&self, e: EdgeId, w: i64) -> bool {
        self.lower[e] <= w && w <= self.upper[e]
    }

    pub fn clamp(&self, e: EdgeId, w: i64) -> i64 {
        w.max(self.lower[e]).min(self.upper[e])
    }
}

impl CapacityBounds {
    /// Bounds aligned with `g`'s canonical edge order.
    pub fn new(g: &Digraph, intervals: Vec<(f64, f64)>) -> Result<Self, FeasibilityError> {
        if intervals.len() != g.edge_count() {
            let e = g.edge(intervals.len().min(g.edge_count().saturating_sub(1)));
            return Err(FeasibilityError::MissingBound(e.from.0, e.to.0));
        }
        for (e, &(lower, upper)) in intervals.iter().enumerate() {
            let edge = g.edge(e);
            let (from, to) = (edge.from.0, edge.to.0);
            if lower.is_nan() || lower <= 0.0 {
                return Err(FeasibilityError::NonPositiveLowerBound { from, to, lower });
            }
            if upper.is_nan() || upper < lower {
                return Err(FeasibilityError::InvertedInterval { from, to, lower, upper });
            }
        }
        Ok(Self { intervals })
    }

    /// Build from `(from, to, l, u)` rows in any order; every edge must appear once.
    pub fn from_rows(g: &Digraph, rows: &[(usize, usize, f64, f64)]) -> Result<Self, FeasibilityError> {
        let mut slots: Vec<Option<(f64, f64)>> = vec![None; g.edge_count()];
        for &(from, to, l, u) in rows {
            let e = g
                .edge_id(from, to)
                .ok_or(FeasibilityError::UnknownEdge(from, to))?;
            if slots[e].replace((l, u)).is_some() {
                return Err(FeasibilityError::DuplicateBound(from, to));
            }
        }
        let mut intervals = Vec::with_capacity(slots.len());
        for (e, slot) in slots.into_iter().enumerate() {
            let edge = g.edge(e);
            intervals.push(slot.ok_or(FeasibilityError::MissingBound(edge.from.0, edge.to.0))?);
        }
        Self::new(g, intervals)
    }

    pub fn uniform(g: &Digraph, lower: f64, upper: f64) -> Result<Self, FeasibilityError> {
        Self::new(g, vec![(lower, upper); g.edge_count()])
    }

    pub fn interval(&self, e: EdgeId) -> (f64, f64) {
        self.intervals[e]
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn integer_bounds(&self) -> IntBounds {
        IntBounds {
            lower: self.intervals.iter().map(|&(l, _)| snapped_ceil(l)).collect(),
            upper: self.intervals.iter().map(|&(_, u)| snapped_floor(u)).collect(),
        }
    }
}

/// On-disk bounds description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsFile {
    pub bounds: Vec<(usize, usize, f64, f64)>,
}

impl BoundsFile {
    pub fn to_bounds(&self, g: &Digraph) -> Result<CapacityBounds, FeasibilityError> {
        CapacityBounds::from_rows(g, &self.bounds)
    }

    pub fn from_bounds(g: &Digraph, b: &CapacityBounds) -> Self {
        Self {
            bounds: g
                .edges()
                .iter()
                .zip(b.intervals())
                .map(|(e, &(l, u))| (e.from.0, e.to.0, l, u))
                .collect(),
        }
    }
}

/// A node subset whose forced inflow exceeds the largest possible outflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutWitness {
    pub subset: Vec<NodeId>,
    pub in_edges: Vec<EdgeId>,
    pub out_edges: Vec<EdgeId>,
    pub in_lower: i64,
    pub out_upper: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// `ceil(l) > floor(u)` on this edge.
    EdgeInterval(EdgeId),
    Cut(CutWitness),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub violation: Option<Violation>,
}

impl FeasibilityVerdict {
    fn feasible() -> Self {
        Self {
            feasible: true,
            violation: None,
        }
    }

    fn infeasible(v: Violation) -> Self {
        Self {
            feasible: false,
            violation: Some(v),
        }
    }

    pub fn witness(&self) -> Option<&CutWitness> {
        match &self.violation {
            Some(Violation::Cut(w)) => Some(w),
            _ => None,
        }
    }
}

pub fn check_edge_intervals(g: &Digraph, b: &CapacityBounds) -> Vec<(EdgeId, bool)> {
    let ib = b.integer_bounds();
    (0..g.edge_count())
        .map(|e| (e, ib.lower[e] <= ib.upper[e]))
        .collect()
}

fn first_bad_interval(ib: &IntBounds) -> Option<EdgeId> {
    (0..ib.lower.len()).find(|&e| ib.lower[e] > ib.upper[e])
}

/// Evaluate the cut condition for `members` (a membership mask).
pub fn evaluate_cut(g: &Digraph, ib: &IntBounds, members: &[bool]) -> CutWitness {
    let mut in_edges = Vec::new();
    let mut out_edges = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        match (members[edge.from.0], members[edge.to.0]) {
            (false, true) => in_edges.push(e),
            (true, false) => out_edges.push(e),
            _ => {}
        }
    }
    CutWitness {
        subset: (0..g.node_count()).filter(|&v| members[v]).map(NodeId).collect(),
        in_lower: in_edges.iter().map(|&e| ib.lower[e]).sum(),
        out_upper: out_edges.iter().map(|&e| ib.upper[e]).sum(),
        in_edges,
        out_edges,
    }
}

impl CutWitness {
    pub fn is_violated(&self) -> bool {
        self.in_lower > self.out_upper
    }
}

/// Enumerate every proper nonempty subset in increasing bitmask order.
pub fn check_circulation_bruteforce(g: &Digraph, b: &CapacityBounds) -> Result<FeasibilityVerdict, FeasibilityError> {
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(FeasibilityError::TooManyNodes {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let ib = b.integer_bounds();
    if let Some(e) = first_bad_interval(&ib) {
        return Ok(FeasibilityVerdict::infeasible(Violation::EdgeInterval(e)));
    }
    let full = (1u32 << n) - 1;
    let mut members = vec![false; n];
    for mask in 1..full {
        for (v, m) in members.iter_mut().enumerate() {
            *m = mask & (1 << v) != 0;
        }
        let cut = evaluate_cut(g, &ib, &members);
        if cut.is_violated() {
            return Ok(FeasibilityVerdict::infeasible(Violation::Cut(cut)));
        }
    }
    Ok(FeasibilityVerdict::feasible())
}

struct FlowNet {
    head: Vec<usize>,
    cap: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Returns the arc index; its reverse is `index ^ 1`.
    fn add_arc(&mut self, from: usize, to: usize, cap: i64) -> usize {
        let id = self.head.len();
        self.head.push(to);
        self.cap.push(cap);
        self.adj[from].push(id);
        self.head.push(from);
        self.cap.push(0);
        self.adj[to].push(id + 1);
        id
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let mut via = vec![usize::MAX; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for &a in &self.adj[v] {
                    let u = self.head[a];
                    if self.cap[a] > 0 && !seen[u] {
                        seen[u] = true;
                        via[u] = a;
                        queue.push_back(u);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while v != s {
                let a = via[v];
                push = push.min(self.cap[a]);
                v = self.head[a ^ 1];
            }
            let mut v = t;
            while v != s {
                let a = via[v];
                self.cap[a] -= push;
                self.cap[a ^ 1] += push;
                v = self.head[a ^ 1];
            }
            total += push;
        }
    }

    fn residual_reach(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.adj[v] {
                let u = self.head[a];
                if self.cap[a] > 0 && !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

enum FlowOutcome {
    Balanced(Weights),
    Violated(Violation),
}

fn solve_circulation(g: &Digraph, b: &CapacityBounds) -> FlowOutcome {
    let ib = b.integer_bounds();
    if let Some(e) = first_bad_interval(&ib) {
        return FlowOutcome::Violated(Violation::EdgeInterval(e));
    }
    let n = g.node_count();
    let (source, sink) = (n, n + 1);
    let mut net = FlowNet::new(n + 2);
    // forced inflow minus forced outflow per node
    let mut excess = vec![0i64; n];
    let mut arcs = Vec::with_capacity(g.edge_count());
    for (e, edge) in g.edges().iter().enumerate() {
        arcs.push(net.add_arc(edge.from.0, edge.to.0, ib.upper[e] - ib.lower[e]));
        excess[edge.to.0] += ib.lower[e];
        excess[edge.from.0] -= ib.lower[e];
    }
    let mut demand = 0;
    for (v, &x) in excess.iter().enumerate() {
        if x > 0 {
            net.add_arc(source, v, x);
            demand += x;
        } else if x < 0 {
            net.add_arc(v, sink, -x);
        }
    }
    let flow = net.max_flow(source, sink);
    if flow == demand {
        let weights = arcs
            .iter()
            .enumerate()
            .map(|(e, &a)| ib.lower[e] + net.cap[a ^ 1])
            .collect();
        return FlowOutcome::Balanced(weights);
    }
    let reach = net.residual_reach(source);
    let cut = evaluate_cut(g, &ib, &reach[..n]);
    debug_assert!(cut.is_violated());
    FlowOutcome::Violated(Violation::Cut(cut))
}

/// Decide feasibility with a max-flow reduction; on failure the witness is
/// the source side of the residual min cut.
pub fn check_circulation_flow(g: &Digraph, b: &CapacityBounds) -> FeasibilityVerdict {
    match solve_circulation(g, b) {
        FlowOutcome::Balanced(_) => FeasibilityVerdict::feasible(),
        FlowOutcome::Violated(v) => FeasibilityVerdict::infeasible(v),
    }
}

/// A balanced integer assignment within the bounds, if one exists.
pub fn find_balanced_weights_oracle(g: &Digraph, b: &CapacityBounds) -> Option<Weights> {
    match solve_circulation(g, b) {
        FlowOutcome::Balanced(w) => Some(w),
        FlowOutcome::Violated(_) => None,
    }
}
