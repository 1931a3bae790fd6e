//! Random capacity-bound instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centralized::run_centralized;
use crate::digraph::Digraph;
use crate::error::RunError;
use crate::feasibility::CapacityBounds;

/// Bounds built around a balanced assignment, so they always admit one.
///
/// Each interval reaches up to `spread` integers below and above the
/// balanced weight, with fractional slack so ceiling and floor matter.
pub fn random_feasible_bounds(g: &Digraph, seed: u64, spread: u32) -> Result<CapacityBounds, RunError> {
    let balanced = run_centralized(g, g.node_count() as u64)?.final_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = i64::from(spread);
    let intervals = balanced
        .iter()
        .map(|&w| {
            let below = rng.gen_range(0..=spread);
            let above = rng.gen_range(0..=spread);
            let lower = ((w - below) as f64 - rng.gen_range(0.0..0.9)).max(0.5);
            let upper = (w + above) as f64 + rng.gen_range(0.0..0.9);
            (lower, upper)
        })
        .collect();
    Ok(CapacityBounds::new(g, intervals)?)
}

/// Narrow random intervals with `ceil(l) <= floor(u)` on every edge. The cut
/// conditions may or may not hold.
pub fn random_tight_bounds(g: &Digraph, seed: u64, max_lower: u32, max_width: u32) -> Result<CapacityBounds, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intervals = (0..g.edge_count())
        .map(|_| {
            let lower = rng.gen_range(1..=i64::from(max_lower.max(1)));
            let width = rng.gen_range(0..=i64::from(max_width));
            let l = lower as f64 - rng.gen_range(0.0..0.9);
            let u = (lower + width) as f64 + rng.gen_range(0.0..0.9);
            (l, u)
        })
        .collect();
    Ok(CapacityBounds::new(g, intervals)?)
}
