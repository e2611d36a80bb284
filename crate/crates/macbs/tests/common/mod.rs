//! Shared test support: an independent brute-force optimum for small
//! instances, a constrained single-agent path enumerator, and a corpus
//! builder for random solvable instances.
//!
//! The joint oracle deliberately uses a different formulation from the
//! production planner: it searches (positions, parked-set) states with no
//! time axis, charges one unit per step for every agent that has not yet
//! irreversibly parked on its goal, and uses its own flood-fill distances.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use macbs::grid::{Agent, GridMap, Instance, Position};
use macbs::lowlevel::ConstraintSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleOutcome {
    Optimal(u32),
    Unsolvable,
    CapExceeded,
}

impl OracleOutcome {
    pub fn optimal(self) -> Option<u32> {
        match self {
            OracleOutcome::Optimal(c) => Some(c),
            _ => None,
        }
    }
}

fn flood(map: &GridMap, goal: Position) -> Vec<u32> {
    let mut dist = vec![u32::MAX; (map.width() * map.height()) as usize];
    dist[map.index(goal)] = 0;
    let mut queue = VecDeque::from([goal]);
    while let Some(p) = queue.pop_front() {
        for q in map.neighbors(p) {
            if dist[map.index(q)] == u32::MAX {
                dist[map.index(q)] = dist[map.index(p)] + 1;
                queue.push_back(q);
            }
        }
    }
    dist
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct OracleState {
    positions: Vec<Position>,
    parked: u32,
}

/// Exhaustive minimum sum-of-costs for an instance.
///
/// Agents move, wait, or (standing on their own goal) park; parking is free
/// and irreversible, every other action costs one unit. A parked agent
/// keeps occupying its goal cell. The cheapest way to park everyone equals
/// the optimal sum of individual path costs under the terminal-goal-waits-
/// are-free rule.
pub fn joint_optimum(instance: &Instance, expansion_cap: usize) -> OracleOutcome {
    let map = instance.map();
    let n = instance.num_agents();
    assert!(n <= 31, "parked set is a bitmask");
    let dists: Vec<Vec<u32>> = instance
        .agents()
        .iter()
        .map(|a| flood(map, a.goal))
        .collect();
    let starts: Vec<Position> = instance.agents().iter().map(|a| a.start).collect();
    let goals: Vec<Position> = instance.agents().iter().map(|a| a.goal).collect();
    if starts
        .iter()
        .zip(&dists)
        .any(|(&s, d)| d[map.index(s)] == u32::MAX)
    {
        return OracleOutcome::Unsolvable;
    }
    let full = (1u32 << n) - 1;
    let h = |state: &OracleState| -> u32 {
        state
            .positions
            .iter()
            .enumerate()
            .filter(|&(i, _)| state.parked & (1 << i) == 0)
            .map(|(i, &p)| dists[i][map.index(p)])
            .sum()
    };

    let root = OracleState {
        positions: starts,
        parked: 0,
    };
    let mut best: HashMap<OracleState, u32> = HashMap::new();
    best.insert(root.clone(), 0);
    let mut open: BinaryHeap<Reverse<(u32, u32, u64)>> = BinaryHeap::new();
    let mut stash: Vec<OracleState> = vec![root.clone()];
    open.push(Reverse((h(&root), 0, 0)));
    let mut expansions = 0usize;

    while let Some(Reverse((_, g, idx))) = open.pop() {
        let state = stash[idx as usize].clone();
        if best.get(&state).copied() != Some(g) {
            continue; // stale entry
        }
        if state.parked == full {
            return OracleOutcome::Optimal(g);
        }
        expansions += 1;
        if expansions > expansion_cap {
            return OracleOutcome::CapExceeded;
        }

        // per-agent options: (target, parks, step cost)
        let mut options: Vec<Vec<(Position, bool, u32)>> = Vec::with_capacity(n);
        for i in 0..n {
            let p = state.positions[i];
            if state.parked & (1 << i) != 0 {
                options.push(vec![(p, true, 0)]);
                continue;
            }
            let mut opts = Vec::with_capacity(7);
            if p == goals[i] {
                opts.push((p, true, 0)); // park here, forever
            }
            opts.push((p, false, 1)); // wait
            for q in map.neighbors(p) {
                if dists[i][map.index(q)] != u32::MAX {
                    opts.push((q, false, 1));
                }
            }
            options.push(opts);
        }

        let mut pick = vec![0usize; n];
        'product: loop {
            let chosen: Vec<(Position, bool, u32)> =
                pick.iter().enumerate().map(|(i, &c)| options[i][c]).collect();
            let legal = {
                let mut ok = true;
                'pairs: for i in 0..n {
                    for j in i + 1..n {
                        let (ti, tj) = (chosen[i].0, chosen[j].0);
                        if ti == tj {
                            ok = false;
                            break 'pairs;
                        }
                        let (fi, fj) = (state.positions[i], state.positions[j]);
                        if ti != fi && ti == fj && tj == fi {
                            ok = false;
                            break 'pairs;
                        }
                    }
                }
                ok
            };
            if legal {
                let mut parked = state.parked;
                let mut step_cost = 0;
                for (i, &(_, parks, cost)) in chosen.iter().enumerate() {
                    if parks {
                        parked |= 1 << i;
                    }
                    step_cost += cost;
                }
                let next = OracleState {
                    positions: chosen.iter().map(|c| c.0).collect(),
                    parked,
                };
                let g2 = g + step_cost;
                if best.get(&next).is_none_or(|&old| g2 < old) {
                    best.insert(next.clone(), g2);
                    stash.push(next.clone());
                    open.push(Reverse((g2 + h(&next), g2, (stash.len() - 1) as u64)));
                }
            }
            for i in (0..n).rev() {
                pick[i] += 1;
                if pick[i] < options[i].len() {
                    continue 'product;
                }
                pick[i] = 0;
            }
            break;
        }
    }
    OracleOutcome::Unsolvable
}

/// Minimum constrained single-agent cost by plain enumeration of every
/// explicit move sequence up to `max_len` entries. Cost is the start of the
/// terminal goal block, scanned directly off the sequence.
pub fn brute_force_single_cost(
    map: &GridMap,
    agent: usize,
    start: Position,
    goal: Position,
    constraints: &ConstraintSet,
    max_len: usize,
) -> Option<u32> {
    fn terminal_cost(
        seq: &[Position],
        goal: Position,
        agent: usize,
        constraints: &ConstraintSet,
    ) -> Option<u32> {
        if *seq.last().unwrap() != goal {
            return None;
        }
        // the sequence implies staying at the goal forever afterwards, so a
        // goal constraint beyond the explicit end invalidates it
        let end = (seq.len() - 1) as u32;
        if constraints
            .latest_vertex_block(agent, goal)
            .is_some_and(|t| t > end)
        {
            return None;
        }
        let mut arrival = seq.len() - 1;
        while arrival > 0 && seq[arrival - 1] == goal {
            arrival -= 1;
        }
        Some(arrival as u32)
    }

    if constraints.blocks_vertex(agent, 0, start) {
        return None;
    }
    let mut best: Option<u32> = None;
    let mut seq = vec![start];
    // iterative deepening is unnecessary at these sizes; plain DFS
    fn dfs(
        map: &GridMap,
        agent: usize,
        goal: Position,
        constraints: &ConstraintSet,
        max_len: usize,
        seq: &mut Vec<Position>,
        best: &mut Option<u32>,
    ) {
        if let Some(cost) = terminal_cost(seq, goal, agent, constraints) {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
        }
        if seq.len() >= max_len {
            return;
        }
        let here = *seq.last().unwrap();
        let t = seq.len() as u32 - 1;
        let moves: Vec<Position> = map
            .neighbors(here)
            .chain(std::iter::once(here))
            .collect();
        for next in moves {
            if constraints.blocks_vertex(agent, t + 1, next) {
                continue;
            }
            if next != here && constraints.blocks_edge(agent, t, here, next) {
                continue;
            }
            seq.push(next);
            dfs(map, agent, goal, constraints, max_len, seq, best);
            seq.pop();
        }
    }
    dfs(map, agent, goal, constraints, max_len, &mut seq, &mut best);
    best
}

/// A random solvable instance corpus with oracle optima attached.
///
/// Grids are at most `max_dim` per side with light random blocking; agent
/// counts are drawn from `agents`. Instances whose oracle run exceeds the
/// expansion cap are skipped, so every returned optimum is exact.
pub fn solvable_corpus(
    count: usize,
    seed: u64,
    max_dim: u32,
    agents: std::ops::RangeInclusive<usize>,
) -> Vec<(Instance, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let width = rng.gen_range(2..=max_dim);
        let height = rng.gen_range(2..=max_dim);
        let block_prob = [0.0, 0.1, 0.2][rng.gen_range(0..3)];
        let cells: Vec<bool> = (0..width * height)
            .map(|_| rng.gen::<f64>() >= block_prob)
            .collect();
        let Ok(map) = GridMap::new(width, height, cells) else {
            continue;
        };
        let n = rng.gen_range(agents.clone());
        let passable: Vec<Position> = map.passable_positions().collect();
        if passable.len() < n + 1 {
            continue;
        }
        let mut starts = passable.clone();
        starts.shuffle(&mut rng);
        let mut goals = passable.clone();
        goals.shuffle(&mut rng);
        let candidates: Vec<Agent> = starts
            .into_iter()
            .zip(goals)
            .take(n)
            .map(|(start, goal)| Agent { start, goal })
            .collect();
        let Ok(instance) = Instance::new(map, candidates) else {
            continue;
        };
        match joint_optimum(&instance, 2_000_000) {
            OracleOutcome::Optimal(optimum) => out.push((instance, optimum)),
            _ => continue,
        }
    }
    out
}
