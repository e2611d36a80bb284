//! Rent-or-buy model of the merge decision for two agents.
//!
//! Each conflict resolved by splitting costs one independent replan
//! (`split_cost`); merging solves the whole two-agent problem once
//! (`merge_cost >= split_cost`). An adversary picks how many conflicts `m`
//! the instance takes to resolve by splitting alone, and the policy pays
//! either the splits it made or the splits plus the merge. The offline
//! optimum pays `min(m * split_cost, merge_cost)`.
//!
//! Sweeping the adversary exhaustively over integer `m` makes every bound
//! here checkable by direct evaluation: with restart the worst-case ratio
//! at the threshold `b = floor(merge_cost / split_cost)` is `2 - 1/b`;
//! without restart it is `1 + b - 1/b`. The same construction generalizes:
//! with the cost of solving any combined group known in advance, a restart
//! schedule over n agents can achieve a worst-case ratio of
//! `1 + ceil(n / 2)`; only the two-agent case is modeled and verified here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::policy::merge_probability;

/// Inputs of the two-agent model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Cost of one independent replan after a conflict.
    pub split_cost: f64,
    /// Cost of solving the combined agent; at least `split_cost`.
    pub merge_cost: f64,
    /// Merge threshold.
    pub threshold: u32,
    /// Adversary's choice: conflicts until splitting alone resolves the
    /// instance.
    pub conflicts: u32,
}

impl ModelParams {
    pub fn new(split_cost: f64, merge_cost: f64, threshold: u32, conflicts: u32) -> Self {
        debug_assert!(split_cost > 0.0 && merge_cost >= split_cost);
        debug_assert!(threshold >= 1 && conflicts >= 1);
        ModelParams {
            split_cost,
            merge_cost,
            threshold,
            conflicts,
        }
    }
}

/// Model cost of the restart policy: split until the threshold, then pay a
/// single merge.
pub fn cost_restart(p: &ModelParams) -> f64 {
    if p.conflicts < p.threshold {
        p.conflicts as f64 * p.split_cost
    } else {
        (p.threshold - 1) as f64 * p.split_cost + p.merge_cost
    }
}

/// Worst-case model cost of merging without restart: once the threshold is
/// reached, up to `threshold` nodes in the list each pay a merge.
pub fn cost_no_restart(p: &ModelParams) -> f64 {
    if p.conflicts < p.threshold {
        p.conflicts as f64 * p.split_cost
    } else {
        p.threshold as f64 * p.merge_cost + (p.threshold - 1) as f64 * p.split_cost
    }
}

/// What the offline optimum pays against adversary `m`.
pub fn offline_opt(split_cost: f64, merge_cost: f64, conflicts: u32) -> f64 {
    (conflicts as f64 * split_cost).min(merge_cost)
}

/// Whether the search restarts after a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartPolicy {
    Restart,
    NoRestart,
}

/// Worst-case competitive ratio of a policy at one threshold, found by an
/// exhaustive sweep of the adversary over `1..=max_conflicts`.
///
/// `max_conflicts >= 2 * threshold` suffices to expose the worst case.
pub fn worst_case_ratio(
    policy: RestartPolicy,
    split_cost: f64,
    merge_cost: f64,
    threshold: u32,
    max_conflicts: u32,
) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 1..=max_conflicts {
        let params = ModelParams::new(split_cost, merge_cost, threshold, m);
        let cost = match policy {
            RestartPolicy::Restart => cost_restart(&params),
            RestartPolicy::NoRestart => cost_no_restart(&params),
        };
        worst = worst.max(cost / offline_opt(split_cost, merge_cost, m));
    }
    worst
}

/// The integer threshold minimizing the worst-case ratio, ties broken
/// toward the smaller threshold. Sweeps `1..=max_threshold` with the same
/// adversary range for every candidate.
pub fn best_threshold(
    policy: RestartPolicy,
    split_cost: f64,
    merge_cost: f64,
    max_threshold: u32,
    max_conflicts: u32,
) -> (u32, f64) {
    let mut best = (1, f64::INFINITY);
    for b in 1..=max_threshold {
        let ratio = worst_case_ratio(policy, split_cost, merge_cost, b, max_conflicts);
        if ratio < best.1 {
            best = (b, ratio);
        }
    }
    best
}

/// Monte-Carlo estimate of the worst-case *expected* ratio of the
/// randomized restart policy, drawing the merge step from the hazard rule.
///
/// For each adversary value the expected cost is averaged over `trials`
/// seeded simulations; the maximum expected ratio over the sweep is
/// returned.
pub fn randomized_expected_ratio(
    split_cost: f64,
    merge_cost: f64,
    threshold: u32,
    max_conflicts: u32,
    trials: u32,
    seed: u64,
) -> f64 {
    debug_assert!(threshold >= 1 && trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for m in 1..=max_conflicts {
        let mut total = 0.0;
        for _ in 0..trials {
            // walk conflicts 1..=m; merging at conflict k pays the k-1
            // splits so far plus the merge, never merging pays m splits
            let mut cost = m as f64 * split_cost;
            for k in 1..=m.min(threshold) {
                if rng.gen::<f64>() < merge_probability(k, threshold) {
                    cost = (k - 1) as f64 * split_cost + merge_cost;
                    break;
                }
            }
            total += cost;
        }
        let expected = total / trials as f64;
        worst = worst.max(expected / offline_opt(split_cost, merge_cost, m));
    }
    worst
}
