//! Invariants checked over generated graphs, weights and bounds.

mod common;

use proptest::prelude::*;
use weightbal::balancer_capacity::{run_cap, CapBalancer, CapMode};
use weightbal::balancer_delay::allocate_weights;
use weightbal::balancer_sync::{run_sync, SyncState};
use weightbal::centralized::run_centralized;
use weightbal::feasibility::{
    check_circulation_bruteforce, check_circulation_flow, evaluate_cut, find_balanced_weights_oracle, Violation,
};
use weightbal::harness::instances::{random_feasible_bounds, random_tight_bounds};
use weightbal::Digraph;

/// Transitive closure by Floyd–Warshall; independent of the BFS check.
fn closure_strongly_connected(n: usize, pairs: &[(usize, usize)]) -> bool {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in pairs {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r.iter().all(|row| row.iter().all(|&v| v))
}

fn neg_set(x: &[i64]) -> Vec<usize> {
    (0..x.len()).filter(|&j| x[j] < 0).collect()
}

fn arb_pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..8).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let pairs = (0..n * n)
                .filter(|&i| bits[i] && i / n != i % n)
                .map(|i| (i / n, i % n))
                .collect();
            (n, pairs)
        })
    })
}

fn arb_weighted() -> impl Strategy<Value = (Digraph, Vec<i64>)> {
    (2usize..12, 0.0f64..0.6, any::<u64>()).prop_flat_map(|(n, p, seed)| {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let m = g.edge_count();
        (Just(g), proptest::collection::vec(1i64..50, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn imbalance_identities((g, w) in arb_weighted()) {
        let x = g.imbalances(&w).unwrap();
        prop_assert_eq!(x.iter().sum::<i64>(), 0);
        let eps = g.total_imbalance(&w).unwrap();
        prop_assert_eq!(eps % 2, 0);
        let neg: i64 = x.iter().filter(|&&v| v < 0).map(|v| -v).sum();
        prop_assert_eq!(eps, 2 * neg as u64);
    }

    #[test]
    fn cut_identity((g, w) in arb_weighted(), mask in any::<u32>()) {
        let n = g.node_count();
        let members: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        let x = g.imbalances(&w).unwrap();
        let inside: i64 = (0..n).filter(|&v| members[v]).map(|v| x[v]).sum();
        // with degenerate bounds at w the cut sums are the boundary flows
        let ib = weightbal::feasibility::IntBounds { lower: w.clone(), upper: w.clone() };
        let cut = evaluate_cut(&g, &ib, &members);
        prop_assert_eq!(inside, cut.in_lower - cut.out_upper);
    }

    #[test]
    fn allocation_shape(in_sum in 0i64..10_000, d in 1usize..40) {
        let a = allocate_weights(in_sum, d).unwrap();
        prop_assert_eq!(a.len(), d);
        prop_assert_eq!(a.iter().sum::<i64>(), in_sum);
        prop_assert!(a.windows(2).all(|p| p[0] >= p[1] && p[0] - p[1] <= 1));
        let next = allocate_weights(in_sum + 1, d).unwrap();
        prop_assert!(a.iter().zip(&next).all(|(x, y)| x <= y));
    }

    #[test]
    fn generator_is_strongly_connected(n in 2usize..25, p in 0.0f64..0.5, seed in any::<u64>()) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        prop_assert!(g.is_strongly_connected());
        prop_assert!(closure_strongly_connected(n, &g.edge_pairs()));
        prop_assert_eq!(g.edge_pairs(), Digraph::random_strongly_connected(n, p, seed).unwrap().edge_pairs());
    }

    #[test]
    fn strong_connectivity_matches_closure((n, pairs) in arb_pairs()) {
        let g = Digraph::new(n, &pairs).unwrap();
        prop_assert_eq!(g.is_strongly_connected(), closure_strongly_connected(n, &pairs));
    }

    #[test]
    fn sync_run_invariants(n in 2usize..15, p in 0.0f64..0.4, seed in any::<u64>(), init in 1i64..5) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let s = SyncState::new(&g, init, seed).unwrap();
        let r = run_sync(&g, s, None).unwrap();
        prop_assert_eq!(g.total_imbalance(&r.weights).unwrap(), 0);
        prop_assert!(r.weights.iter().all(|&w| w >= 1));
        for pair in r.trace.windows(2) {
            prop_assert_eq!(pair[1].imbalances.iter().sum::<i64>(), 0);
            prop_assert!(pair[1].epsilon <= pair[0].epsilon);
        }
    }

    #[test]
    fn centralized_iteration_bound(n in 3usize..20, p in 0.0f64..0.4, seed in any::<u64>()) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let eps0 = g.total_imbalance(&vec![1; g.edge_count()]).unwrap();
        let r = run_centralized(&g, 10 * n as u64).unwrap();
        prop_assert_eq!(g.total_imbalance(&r.final_weights).unwrap(), 0);
        prop_assert!(r.iterations <= ((n - 1) as u64).min(eps0 / 2));
    }

    #[test]
    fn flow_agrees_with_bruteforce(n in 2usize..9, p in 0.0f64..0.5, seed in any::<u64>(), lo in 1u32..4, width in 0u32..4) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let b = random_tight_bounds(&g, seed ^ 0x5eed, lo, width).unwrap();
        let flow = check_circulation_flow(&g, &b);
        let brute = check_circulation_bruteforce(&g, &b).unwrap();
        prop_assert_eq!(flow.feasible, brute.feasible);
        let ib = b.integer_bounds();
        match &flow.violation {
            None => {
                let w = find_balanced_weights_oracle(&g, &b).unwrap();
                prop_assert_eq!(g.total_imbalance(&w).unwrap(), 0);
                prop_assert!(w.iter().enumerate().all(|(e, &v)| ib.contains(e, v)));
            }
            Some(Violation::Cut(c)) => {
                let mut members = vec![false; n];
                for v in &c.subset {
                    members[v.0] = true;
                }
                prop_assert!(evaluate_cut(&g, &ib, &members).is_violated());
            }
            Some(Violation::EdgeInterval(e)) => prop_assert!(ib.lower[*e] > ib.upper[*e]),
        }
    }

    #[test]
    fn capacity_stays_in_bounds(n in 2usize..12, p in 0.0f64..0.4, seed in any::<u64>(), spread in 0u32..3) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let b = random_feasible_bounds(&g, seed, spread).unwrap();
        let ib = b.integer_bounds();
        let mut bal = CapBalancer::seeded(&g, &b, CapMode::Standard, seed).unwrap();
        let mut eps = g.total_imbalance(bal.weights()).unwrap();
        let mut negative = neg_set(&bal.imbalances());
        for _ in 0..5_000 {
            if eps == 0 {
                break;
            }
            bal.step();
            let now = neg_set(&bal.imbalances());
            prop_assert!(common::is_subset(&now, &negative));
            negative = now;
            prop_assert!(bal.weights().iter().enumerate().all(|(e, &v)| ib.contains(e, v)));
            let next = g.total_imbalance(bal.weights()).unwrap();
            prop_assert!(next <= eps);
            eps = next;
        }
        prop_assert_eq!(eps, 0);
        prop_assert_eq!(bal.clamp_engaged(), 0);
    }

    #[test]
    fn enhanced_mode_reaches_balance(n in 2usize..12, p in 0.0f64..0.4, seed in any::<u64>()) {
        let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
        let b = random_feasible_bounds(&g, seed, 2).unwrap();
        let r = run_cap(CapBalancer::seeded(&g, &b, CapMode::Enhanced, seed).unwrap(), 20_000);
        prop_assert!(r.converged);
        prop_assert_eq!(g.total_imbalance(&r.weights).unwrap(), 0);
    }
}
