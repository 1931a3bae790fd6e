//! Directed graph storage, imbalance arithmetic and random strongly connected
//! generation.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of an edge in the canonical edge list of its [`Digraph`].
pub type EdgeId = usize;

/// Integer edge weights indexed by [`EdgeId`].
pub type Weights = Vec<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("a digraph needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("node index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("weight vector has {got} entries, graph has {expected} edges")]
    MissingWeight { expected: usize, got: usize },
}

/// A simple digraph with edges sorted by `(from, to)`.
///
/// Adjacency is kept as edge ids, so `out_edges(j)` lists the edges leaving
/// `j` in increasing head order and `in_edges(j)` the edges entering `j` in
/// increasing tail order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
}

impl Digraph {
    pub fn new(n: usize, edge_pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut edges = Vec::with_capacity(edge_pairs.len());
        for &(from, to) in edge_pairs {
            for index in [from, to] {
                if index >= n {
                    return Err(GraphError::IndexOutOfRange { index, n });
                }
            }
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            edges.push(Edge {
                from: NodeId(from),
                to: NodeId(to),
            });
        }
        edges.sort();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].from.0, w[0].to.0));
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out_adj[e.from.0].push(id);
            in_adj[e.to.0].push(id);
        }
        // edges are sorted by tail, so in-lists come out sorted by tail too
        Ok(Self {
            n,
            edges,
            out_adj,
            in_adj,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }

    pub fn out_edges(&self, j: NodeId) -> &[EdgeId] {
        &self.out_adj[j.0]
    }

    pub fn in_edges(&self, j: NodeId) -> &[EdgeId] {
        &self.in_adj[j.0]
    }

    pub fn out_neighbors(&self, j: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_adj[j.0].iter().map(move |&e| self.edges[e].to)
    }

    pub fn in_neighbors(&self, j: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_adj[j.0].iter().map(move |&e| self.edges[e].from)
    }

    pub fn out_degree(&self, j: NodeId) -> usize {
        self.out_adj[j.0].len()
    }

    pub fn in_degree(&self, j: NodeId) -> usize {
        self.in_adj[j.0].len()
    }

    pub fn edge_id(&self, from: usize, to: usize) -> Option<EdgeId> {
        let key = Edge {
            from: NodeId(from),
            to: NodeId(to),
        };
        self.edges.binary_search(&key).ok()
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.from.0, e.to.0)).collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        let forward = reach_from(self.n, NodeId(0), |v| self.out_neighbors(v).collect());
        if forward.iter().any(|&r| !r) {
            return false;
        }
        let backward = reach_from(self.n, NodeId(0), |v| self.in_neighbors(v).collect());
        backward.iter().all(|&r| r)
    }

    fn check_weights(&self, w: &[i64]) -> Result<(), GraphError> {
        if w.len() != self.edges.len() {
            return Err(GraphError::MissingWeight {
                expected: self.edges.len(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// In-weight sum minus out-weight sum at `j`.
    pub fn node_imbalance(&self, w: &[i64], j: NodeId) -> Result<i64, GraphError> {
        self.check_weights(w)?;
        Ok(self.imbalance_unchecked(w, j))
    }

    pub(crate) fn imbalance_unchecked(&self, w: &[i64], j: NodeId) -> i64 {
        let inflow: i64 = self.in_adj[j.0].iter().map(|&e| w[e]).sum();
        let outflow: i64 = self.out_adj[j.0].iter().map(|&e| w[e]).sum();
        inflow - outflow
    }

    pub fn imbalances(&self, w: &[i64]) -> Result<Vec<i64>, GraphError> {
        self.check_weights(w)?;
        let mut x = vec![0i64; self.n];
        for (e, edge) in self.edges.iter().enumerate() {
            x[edge.to.0] += w[e];
            x[edge.from.0] -= w[e];
        }
        Ok(x)
    }

    pub fn total_imbalance(&self, w: &[i64]) -> Result<u64, GraphError> {
        Ok(self.imbalances(w)?.iter().map(|x| x.unsigned_abs()).sum())
    }

    /// A Hamiltonian cycle over a seeded permutation, plus each remaining
    /// ordered pair independently with probability `extra_edge_prob`.
    pub fn random_strongly_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut present = vec![false; n * n];
        let mut pairs = Vec::new();
        for i in 0..n {
            let (a, b) = (perm[i], perm[(i + 1) % n]);
            if !present[a * n + b] {
                present[a * n + b] = true;
                pairs.push((a, b));
            }
        }
        let p = extra_edge_prob.clamp(0.0, 1.0);
        for a in 0..n {
            for b in 0..n {
                if a == b || present[a * n + b] {
                    continue;
                }
                if rng.gen_bool(p) {
                    present[a * n + b] = true;
                    pairs.push((a, b));
                }
            }
        }
        Self::new(n, &pairs)
    }
}

fn reach_from(n: usize, start: NodeId, next: impl Fn(NodeId) -> Vec<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start.0] = true;
    while let Some(v) = queue.pop_front() {
        for u in next(v) {
            if !seen[u.0] {
                seen[u.0] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// On-disk graph description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphFile {
    pub fn to_digraph(&self) -> Result<Digraph, GraphError> {
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        Digraph::new(self.n, &pairs)
    }
}

impl From<&Digraph> for GraphFile {
    fn from(g: &Digraph) -> Self {
        Self {
            n: g.node_count(),
            edges: g.edges().iter().map(|e| [e.from.0, e.to.0]).collect(),
        }
    }
}
