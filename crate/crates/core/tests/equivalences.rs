//! Runs through the message fabric against their direct counterparts.

mod common;

use weightbal::balancer_capacity::{seeded_incident_orders, CapBalancer, CapMode};
use weightbal::balancer_capacity_unreliable::{run_unreliable, UnreliableBalancer, UnreliableProtocol, UnreliableRunOptions};
use weightbal::balancer_delay::{run_delay, DelayBalancer, DelayRunOptions, DelayVariant};
use weightbal::balancer_sync::{seeded_orderings, SyncState};
use weightbal::feasibility::CapacityBounds;
use weightbal::harness::instances::random_feasible_bounds;
use weightbal::netsim::{Channel, DelayPolicy, Fabric, LinkModel, MessageKind};
use weightbal::{Digraph, Weights};

const HIST: DelayRunOptions = DelayRunOptions { max_rounds: 100_000, record_history: true };
const UHIST: UnreliableRunOptions = UnreliableRunOptions { max_rounds: 100_000, record_history: true };

fn fabric(g: &Digraph, tau: u64, q: f64, policy: DelayPolicy, seed: u64) -> Fabric {
    Fabric::uniform(g, LinkModel::new(tau, q).unwrap(), policy, seed).unwrap()
}

fn delay_run(g: &Digraph, seed: u64, f: Fabric, v: DelayVariant) -> weightbal::balancer_delay::DelayRunResult {
    let b = DelayBalancer::new(g, seeded_orderings(g, seed), v, f).unwrap();
    run_delay(b, HIST).unwrap()
}

fn unreliable_run(
    g: &Digraph,
    b: &CapacityBounds,
    p: UnreliableProtocol,
    seed: u64,
    f: Fabric,
) -> weightbal::balancer_capacity_unreliable::UnreliableRunResult {
    let u = UnreliableBalancer::new(g, b, p, seeded_incident_orders(g, seed), f, None).unwrap();
    run_unreliable(u, UHIST).unwrap()
}

#[test]
fn fabric_replays_identically() {
    let g = Digraph::random_strongly_connected(10, 0.3, 4).unwrap();
    let schedule = |seed| {
        let mut f = fabric(&g, 10, 0.3, DelayPolicy::Uniform, seed);
        let mut out = Vec::new();
        for r in 0..30u64 {
            for e in 0..g.edge_count() {
                f.send(Channel::forward(e), MessageKind::FullWeight, r as i64);
                f.send(Channel::backward(e), MessageKind::DesiredWeight, r as i64);
            }
            for (node, msgs) in f.deliver(r + 1) {
                out.extend(msgs.iter().map(|m| (node, m.channel.id(), m.sent_round, m.deliver_round)));
            }
        }
        (out, f.stats())
    };
    let (a, sa) = schedule(9);
    let (b, sb) = schedule(9);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert!(sa.dropped > 0 && sa.delivered > 0);
    assert_ne!(a, schedule(10).0);
}

#[test]
fn zero_delay_fabric_matches_sync_trajectory() {
    for seed in 0..10 {
        let g = Digraph::random_strongly_connected(15, 0.2, seed).unwrap();
        let r = delay_run(&g, seed, Fabric::perfect(&g), DelayVariant::AlwaysTransmit);
        let mut s = SyncState::with_orderings(&g, 1, seeded_orderings(&g, seed)).unwrap();
        for (k, w) in r.true_history.iter().enumerate() {
            assert_eq!(&s.weights, w, "seed {seed} round {k}");
            s.step(&g);
        }
        assert_eq!(r.final_weights, s.weights);
    }
}

#[test]
fn delayed_weights_monotone_and_sandwiched() {
    for seed in 0..5 {
        let g = Digraph::random_strongly_connected(12, 0.25, seed).unwrap();
        let star = delay_run(&g, seed, Fabric::perfect(&g), DelayVariant::AlwaysTransmit);
        let tau = 4u64;
        let r = delay_run(&g, seed, fabric(&g, tau, 0.0, DelayPolicy::Uniform, seed + 100), DelayVariant::AlwaysTransmit);
        assert_eq!(r.final_weights, star.final_weights);
        let last = |h: &[Weights], k: usize| h.get(k).unwrap_or(h.last().unwrap()).clone();
        for k in 0..r.perceived_history.len() {
            let bar = &r.perceived_history[k];
            let fstar = last(&star.true_history, k);
            let later = last(&r.perceived_history, (k + 1) * (tau as usize + 1));
            assert!(bar.iter().zip(&fstar).all(|(a, b)| a <= b), "lower side, round {k}");
            assert!(fstar.iter().zip(&later).all(|(a, b)| a <= b), "upper side, round {k}");
            if k > 0 {
                let prev = &r.perceived_history[k - 1];
                assert!(prev.iter().zip(bar).all(|(a, b)| a <= b));
                let (t0, t1) = (&r.true_history[k - 1], &r.true_history[k]);
                assert!(t0.iter().zip(t1).all(|(a, b)| a <= b));
            }
            // staleness never exceeds the delay bound
            if k > tau as usize {
                let sent = &r.true_history[k - tau as usize - 1];
                assert!(sent.iter().zip(bar).all(|(a, b)| a <= b), "stale past bound at round {k}");
            }
        }
    }
}

#[test]
fn event_triggered_matches_and_goes_quiet() {
    for seed in 0..5 {
        let g = Digraph::random_strongly_connected(15, 0.2, seed).unwrap();
        let base = delay_run(&g, seed, Fabric::perfect(&g), DelayVariant::AlwaysTransmit);
        let e = delay_run(&g, seed, fabric(&g, 6, 0.0, DelayPolicy::Uniform, seed), DelayVariant::EventTriggered);
        assert!(e.converged);
        assert_eq!(e.final_weights, base.final_weights);
        assert_eq!(e.messages_after_convergence, 0);
    }
}

#[test]
fn change_protocol_without_delay_matches_direct_capacity_run() {
    for seed in 0..10 {
        let g = Digraph::random_strongly_connected(12, 0.25, seed).unwrap();
        let b = random_feasible_bounds(&g, seed, 2).unwrap();
        let r = unreliable_run(&g, &b, UnreliableProtocol::DelayedChanges, seed, Fabric::perfect(&g));
        assert!(r.converged);
        let mut direct = CapBalancer::new(&g, &b, CapMode::Standard, seeded_incident_orders(&g, seed), None).unwrap();
        for (k, w) in r.weight_history.iter().enumerate() {
            assert_eq!(direct.weights(), &w[..], "seed {seed} round {k}");
            assert_eq!(&r.perceived_history[k], w);
            direct.step();
        }
    }
}

#[test]
fn event_change_protocol_equals_max_delay_run() {
    for seed in 0..8 {
        let g = Digraph::random_strongly_connected(12, 0.25, seed).unwrap();
        let b = random_feasible_bounds(&g, seed, 2).unwrap();
        for (tau, policy) in [(3, DelayPolicy::Max), (7, DelayPolicy::Uniform)] {
            let six = unreliable_run(&g, &b, UnreliableProtocol::DelayedChanges, seed, fabric(&g, tau, 0.0, policy.clone(), seed));
            let seven = unreliable_run(&g, &b, UnreliableProtocol::EventTriggered, seed, fabric(&g, tau, 0.0, policy, seed));
            assert!(six.converged && seven.converged);
            assert_eq!(six.weight_history, seven.weight_history, "seed {seed} tau {tau}");
            assert_eq!(six.weights, seven.weights);
        }
    }
}

#[test]
fn two_phase_without_drops_matches_direct_capacity_run() {
    for seed in 0..10 {
        let g = Digraph::random_strongly_connected(12, 0.25, seed).unwrap();
        let b = random_feasible_bounds(&g, seed, 2).unwrap();
        let r = unreliable_run(&g, &b, UnreliableProtocol::TwoPhase, seed, Fabric::perfect(&g));
        assert!(r.converged);
        let direct = weightbal::balancer_capacity::run_cap(
            CapBalancer::new(&g, &b, CapMode::Standard, seeded_incident_orders(&g, seed), None).unwrap(),
            100_000,
        );
        assert_eq!(r.weights, direct.weights, "seed {seed}");
    }
}
