//! Global-knowledge baseline: push the largest surplus along a shortest path
//! to the largest deficit until every node is balanced.

use std::collections::VecDeque;

use crate::digraph::{Digraph, EdgeId, NodeId, Weights};
use crate::error::RunError;
use crate::trace::TraceRow;

#[derive(Debug, Clone)]
pub struct CentralizedResult {
    pub final_weights: Weights,
    pub iterations: u64,
    /// Row `k` is the state before iteration `k`; the last row is balanced.
    pub trace: Vec<TraceRow>,
}

/// Shortest path by BFS, visiting out-neighbours in increasing index order.
fn shortest_path(g: &Digraph, from: NodeId, to: NodeId) -> Option<Vec<EdgeId>> {
    let n = g.node_count();
    let mut via: Vec<Option<EdgeId>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from.0] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &e in g.out_edges(v) {
            let u = g.edge(e).to;
            if !seen[u.0] {
                seen[u.0] = true;
                via[u.0] = Some(e);
                queue.push_back(u);
            }
        }
    }
    if !seen[to.0] {
        return None;
    }
    let mut path = Vec::new();
    let mut v = to;
    while v != from {
        let e = via[v.0]?;
        path.push(e);
        v = g.edge(e).from;
    }
    path.reverse();
    Some(path)
}

pub fn run_centralized(g: &Digraph, max_iter: u64) -> Result<CentralizedResult, RunError> {
    if !g.is_strongly_connected() {
        return Err(RunError::NotStronglyConnected);
    }
    let mut w: Weights = vec![1; g.edge_count()];
    let mut trace = Vec::new();
    for iteration in 0.. {
        let x = g.imbalances(&w)?;
        let row = TraceRow::new(iteration, x.clone());
        let balanced = row.epsilon == 0;
        trace.push(row);
        if balanced {
            return Ok(CentralizedResult {
                final_weights: w,
                iterations: iteration,
                trace,
            });
        }
        if iteration >= max_iter {
            break;
        }
        // ties go to the lowest index; max_by_key keeps the last maximum, min_by_key the first minimum
        let plus = (0..x.len()).rev().max_by_key(|&j| x[j]).expect("n >= 2");
        let minus = (0..x.len()).min_by_key(|&j| x[j]).expect("n >= 2");
        let surplus = x[plus];
        let path = shortest_path(g, NodeId(plus), NodeId(minus)).ok_or(RunError::NotStronglyConnected)?;
        for e in path {
            w[e] += surplus;
        }
    }
    Err(RunError::Diverged { budget: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_ring_needs_no_iterations() {
        let g = Digraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let r = run_centralized(&g, 10).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.final_weights, vec![1; 4]);
    }

    #[test]
    fn three_node_one_iteration() {
        let g = Digraph::new(3, &[(0, 1), (1, 2), (2, 0), (0, 2)]).unwrap();
        let r = run_centralized(&g, 10).unwrap();
        assert_eq!(r.iterations, 1);
        // only the edge 2 -> 0 is raised
        assert_eq!(r.final_weights[g.edge_id(2, 0).unwrap()], 2);
        assert_eq!(r.final_weights.iter().sum::<i64>(), 5);
    }

    #[test]
    fn rejects_weakly_connected() {
        let g = Digraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(run_centralized(&g, 10), Err(RunError::NotStronglyConnected)));
    }
}
