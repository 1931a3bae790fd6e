#![allow(dead_code)]

use weightbal::balancer_capacity::{order_from_pairs, Incident};
use weightbal::feasibility::CapacityBounds;
use weightbal::{Digraph, EdgeId, NodeId};

/// Eight-node, four-cycle digraph used for the async walkthrough. Nodes are
/// 1-based here and shifted on construction.
pub fn eight_node() -> Digraph {
    let one_based = [
        (1, 2), (2, 3), (3, 1),
        (2, 4), (4, 5), (5, 3), (3, 2),
        (4, 6), (6, 7), (7, 5), (5, 4),
        (6, 8), (8, 7), (7, 6),
        (8, 1),
    ];
    let pairs: Vec<_> = one_based.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
    Digraph::new(8, &pairs).unwrap()
}

/// Activation sequence (1-based) that balances `eight_node` from unit weights.
pub const EIGHT_NODE_ACTIVATIONS: [usize; 25] = [
    1, 2, 3, //
    1, 2, 4, 5, 3, 2, 3, //
    1, 2, 4, 6, 7, 5, 4, 5, 3, 2, 3, //
    1, 2, 4, 6,
];

/// Out-edges of every node in ascending edge-id order.
pub fn sorted_orderings(g: &Digraph) -> Vec<Vec<EdgeId>> {
    g.nodes().map(|j| g.out_edges(j).to_vec()).collect()
}

pub const SIX_NODE_EDGES: [(usize, usize); 12] = [
    (1, 3), (2, 3),
    (3, 1), (3, 2), (3, 4),
    (4, 5), (4, 6),
    (5, 1), (5, 3), (5, 4),
    (6, 2), (6, 4),
];

pub fn six_node() -> Digraph {
    let pairs: Vec<_> = SIX_NODE_EDGES.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
    Digraph::new(6, &pairs).unwrap()
}

/// Out-edge priorities for `six_node`; listed order is top priority first.
pub fn six_node_priorities(g: &Digraph) -> Vec<Vec<EdgeId>> {
    let by_node: [&[usize]; 6] = [&[3], &[3], &[1, 2, 4], &[5, 6], &[1, 3, 4], &[2, 4]];
    by_node
        .iter()
        .enumerate()
        .map(|(j, targets)| targets.iter().map(|&t| g.edge_id(j, t - 1).unwrap()).collect())
        .collect()
}

pub fn ring4() -> Digraph {
    Digraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
}

/// Each ring node handles its out-edge first, then its in-edge.
pub fn ring4_orders(g: &Digraph) -> Vec<Vec<Incident>> {
    (0..4)
        .map(|j| order_from_pairs(g, NodeId(j), &[(j, (j + 1) % 4), ((j + 3) % 4, j)]).unwrap())
        .collect()
}

pub fn ring4_bounds(g: &Digraph) -> CapacityBounds {
    CapacityBounds::uniform(g, 1.0, 2.0).unwrap()
}

pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}
