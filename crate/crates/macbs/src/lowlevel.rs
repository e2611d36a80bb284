//! Constrained low-level planning: optimal space-time search for a single
//! agent, and optimal joint search for a meta-agent.
//!
//! This is the dominant cost center of the whole solver; the node-expansion
//! counters recorded here are the primary performance metric everywhere
//! else.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use thiserror::Error;

use crate::conflict::{Constraint, ConstraintSite};
use crate::grid::{Agent, GridMap, Position};
use crate::heuristic::{DistanceCache, HeuristicTable, UNREACHABLE};
use crate::path::Path;
use crate::solver::SearchStats;

/// A group of original agents planned jointly as one unit.
///
/// Members are kept sorted; the smallest member index identifies the group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaAgent(Vec<usize>);

impl MetaAgent {
    pub fn single(agent: usize) -> Self {
        MetaAgent(vec![agent])
    }

    /// Union of two disjoint groups.
    pub fn merged(a: &MetaAgent, b: &MetaAgent) -> Self {
        let mut members: Vec<usize> = a.0.iter().chain(b.0.iter()).copied().collect();
        members.sort_unstable();
        members.dedup();
        debug_assert_eq!(members.len(), a.size() + b.size(), "groups must be disjoint");
        MetaAgent(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.0.binary_search(&agent).is_ok()
    }

    /// Smallest member index; stable identifier for the group.
    pub fn representative(&self) -> usize {
        self.0[0]
    }
}

/// Constraints for one meta-agent, indexed for O(1) lookup during search.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    vertex: HashSet<(usize, u32, Position)>,
    edge: HashSet<(usize, u32, Position, Position)>,
    latest: u32,
}

impl ConstraintSet {
    pub fn new() -> Self {
        ConstraintSet::default()
    }

    pub fn from_constraints<'a, I: IntoIterator<Item = &'a Constraint>>(constraints: I) -> Self {
        let mut set = ConstraintSet::new();
        for c in constraints {
            set.insert(*c);
        }
        set
    }

    pub fn insert(&mut self, c: Constraint) {
        self.latest = self.latest.max(c.time);
        match c.site {
            ConstraintSite::Vertex(p) => {
                self.vertex.insert((c.agent, c.time, p));
            }
            ConstraintSite::Edge { from, to } => {
                self.edge.insert((c.agent, c.time, from, to));
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertex.len() + self.edge.len()
    }

    /// True if `agent` may not occupy `p` at `time`.
    pub fn blocks_vertex(&self, agent: usize, time: u32, p: Position) -> bool {
        self.vertex.contains(&(agent, time, p))
    }

    /// True if `agent` may not traverse `from -> to` between `time` and
    /// `time + 1`.
    pub fn blocks_edge(&self, agent: usize, time: u32, from: Position, to: Position) -> bool {
        self.edge.contains(&(agent, time, from, to))
    }

    /// Largest time index appearing in any constraint.
    pub fn latest_time(&self) -> u32 {
        self.latest
    }

    /// Latest time at which `agent` is forbidden from standing on `p`, if
    /// any. A path may only terminate at its goal after this time.
    pub fn latest_vertex_block(&self, agent: usize, p: Position) -> Option<u32> {
        self.vertex
            .iter()
            .filter(|&&(a, _, pos)| a == agent && pos == p)
            .map(|&(_, t, _)| t)
            .max()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    /// No path satisfies the constraints within the search horizon.
    #[error("no constrained path exists")]
    NoPath,
    /// The node or time budget ran out mid-search.
    #[error("search budget exhausted")]
    Budget,
}

/// Resource caps threaded through every low-level search.
#[derive(Debug, Clone, Copy, Default)]
pub struct Limits {
    pub node_cap: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Limits {
    pub fn none() -> Self {
        Limits::default()
    }

    fn node_exhausted(&self, expanded: u64) -> bool {
        self.node_cap.is_some_and(|cap| expanded >= cap)
    }

    fn deadline_passed(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

// Deadline polling interval, in expansions.
const TIME_CHECK_MASK: u64 = 0x3ff;

/// Minimum-cost constrained path for one agent, by best-first search over
/// (position, time) states with the memoized true distance as heuristic.
///
/// Ties in f are broken toward lower h, then by insertion order, which makes
/// the expansion sequence deterministic. States beyond
/// `latest constraint time + passable cells` are pruned; an unconstrained
/// agent never gains by waiting past the last constraint, so the bound
/// preserves optimality.
pub fn plan_single(
    map: &GridMap,
    agent: usize,
    start: Position,
    goal: Position,
    constraints: &ConstraintSet,
    table: &HeuristicTable,
    stats: &mut SearchStats,
    limits: &Limits,
) -> Result<Path, PlanError> {
    debug_assert_eq!(table.goal(), goal);
    if table.raw(map, start) == UNREACHABLE || constraints.blocks_vertex(agent, 0, start) {
        return Err(PlanError::NoPath);
    }
    let horizon = constraints.latest_time() as u64 + map.passable_count() as u64;
    let goal_free_after = constraints.latest_vertex_block(agent, goal).unwrap_or(0);

    // Arena of search states; the arena index doubles as the FIFO tiebreak.
    let mut nodes: Vec<(Position, u32, Option<usize>)> = vec![(start, 0, None)];
    let mut seen: HashSet<(Position, u32)> = HashSet::from([(start, 0)]);
    let mut open = BinaryHeap::new();
    open.push(Reverse((table.raw(map, start), table.raw(map, start), 0usize)));

    while let Some(Reverse((_, _, idx))) = open.pop() {
        let (pos, time, _) = nodes[idx];
        if pos == goal && time >= goal_free_after {
            return Ok(reconstruct_single(&nodes, idx));
        }
        if limits.node_exhausted(stats.expanded)
            || (stats.expanded & TIME_CHECK_MASK == 0 && limits.deadline_passed())
        {
            return Err(PlanError::Budget);
        }
        stats.expanded += 1;
        stats.expanded_weighted += 1;

        let next_time = time + 1;
        if next_time as u64 > horizon {
            continue;
        }
        for next in map.neighbors(pos).chain(std::iter::once(pos)) {
            if constraints.blocks_vertex(agent, next_time, next) {
                continue;
            }
            if next != pos && constraints.blocks_edge(agent, time, pos, next) {
                continue;
            }
            let h = table.raw(map, next);
            if h == UNREACHABLE || !seen.insert((next, next_time)) {
                continue;
            }
            nodes.push((next, next_time, Some(idx)));
            open.push(Reverse((next_time + h, h, nodes.len() - 1)));
        }
    }
    Err(PlanError::NoPath)
}

fn reconstruct_single(nodes: &[(Position, u32, Option<usize>)], mut idx: usize) -> Path {
    let mut positions = Vec::new();
    loop {
        positions.push(nodes[idx].0);
        match nodes[idx].2 {
            Some(parent) => idx = parent,
            None => break,
        }
    }
    positions.reverse();
    Path::new(positions)
}

/// One joint search state. `arrivals[i]` is the time member `i` most
/// recently reached its goal and has sat there since, so the summed cost so
/// far never charges a terminal goal block prematurely.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JointKey {
    positions: Vec<Position>,
    time: u32,
    arrivals: Vec<Option<u32>>,
}

struct JointNode {
    key: JointKey,
    parent: Option<usize>,
}

/// Minimum summed-cost paths for all members of a meta-agent, by best-first
/// search over the joint (positions, time) space.
///
/// Vertex and edge collisions between members are illegal transitions;
/// external constraints apply to the member they name. Each joint expansion
/// counts once toward `expanded` and `size` times toward
/// `expanded_weighted`. Groups of size 1 delegate to [`plan_single`].
pub fn plan_meta(
    map: &GridMap,
    meta: &MetaAgent,
    agents: &[Agent],
    constraints: &ConstraintSet,
    cache: &mut DistanceCache,
    stats: &mut SearchStats,
    limits: &Limits,
) -> Result<Vec<Path>, PlanError> {
    if meta.size() == 1 {
        let id = meta.representative();
        let table = cache.table(map, agents[id].goal);
        let path = plan_single(
            map,
            id,
            agents[id].start,
            agents[id].goal,
            constraints,
            &table,
            stats,
            limits,
        )?;
        return Ok(vec![path]);
    }

    let members = meta.members();
    let size = members.len();
    let tables: Vec<_> = members
        .iter()
        .map(|&id| cache.table(map, agents[id].goal))
        .collect();
    let starts: Vec<Position> = members.iter().map(|&id| agents[id].start).collect();
    let goals: Vec<Position> = members.iter().map(|&id| agents[id].goal).collect();

    for (i, &id) in members.iter().enumerate() {
        if tables[i].raw(map, starts[i]) == UNREACHABLE
            || constraints.blocks_vertex(id, 0, starts[i])
        {
            return Err(PlanError::NoPath);
        }
    }
    let horizon = constraints.latest_time() as u64
        + (map.passable_count() as u64).saturating_pow(size as u32);
    let goal_free_after: Vec<u32> = members
        .iter()
        .zip(&goals)
        .map(|(&id, &g)| constraints.latest_vertex_block(id, g).unwrap_or(0))
        .collect();

    let joint_h = |positions: &[Position]| -> u32 {
        let mut h = 0u32;
        for (i, &p) in positions.iter().enumerate() {
            let d = tables[i].raw(map, p);
            if d == UNREACHABLE {
                return UNREACHABLE;
            }
            h += d;
        }
        h
    };

    let root = JointKey {
        arrivals: starts
            .iter()
            .zip(&goals)
            .map(|(&s, &g)| (s == g).then_some(0))
            .collect(),
        positions: starts.clone(),
        time: 0,
    };
    let h0 = joint_h(&root.positions);
    if h0 == UNREACHABLE {
        return Err(PlanError::NoPath);
    }
    let mut seen: HashSet<JointKey> = HashSet::from([root.clone()]);
    let mut nodes = vec![JointNode {
        key: root,
        parent: None,
    }];
    let mut open = BinaryHeap::new();
    open.push(Reverse((h0, h0, 0usize)));

    // Per-member move lists are regenerated each expansion; joint successors
    // enumerate their cartesian product in member order.
    let mut move_lists: Vec<Vec<Position>> = vec![Vec::new(); size];

    while let Some(Reverse((_, _, idx))) = open.pop() {
        let (time, all_home) = {
            let key = &nodes[idx].key;
            (key.time, key.arrivals.iter().all(Option::is_some))
        };
        if all_home
            && goal_free_after
                .iter()
                .all(|&free_after| time >= free_after)
        {
            return Ok(reconstruct_meta(&nodes, idx, size));
        }
        if limits.node_exhausted(stats.expanded)
            || (stats.expanded & TIME_CHECK_MASK == 0 && limits.deadline_passed())
        {
            return Err(PlanError::Budget);
        }
        stats.expanded += 1;
        stats.expanded_weighted += size as u64;

        let next_time = time + 1;
        if next_time as u64 > horizon {
            continue;
        }
        let positions = nodes[idx].key.positions.clone();
        let arrivals = nodes[idx].key.arrivals.clone();
        for (i, list) in move_lists.iter_mut().enumerate() {
            let from = positions[i];
            let id = members[i];
            list.clear();
            for next in map.neighbors(from).chain(std::iter::once(from)) {
                if constraints.blocks_vertex(id, next_time, next) {
                    continue;
                }
                if next != from && constraints.blocks_edge(id, time, from, next) {
                    continue;
                }
                if tables[i].raw(map, next) == UNREACHABLE {
                    continue;
                }
                list.push(next);
            }
        }
        // an empty move list for any member kills the whole product
        if move_lists.iter().any(Vec::is_empty) {
            continue;
        }

        let mut choice = vec![0usize; size];
        'product: loop {
            let targets: Vec<Position> = choice
                .iter()
                .enumerate()
                .map(|(i, &c)| move_lists[i][c])
                .collect();
            if internal_moves_legal(&positions, &targets) {
                let key = JointKey {
                    arrivals: targets
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            if p == goals[i] {
                                arrivals[i].or(Some(next_time))
                            } else {
                                None
                            }
                        })
                        .collect(),
                    positions: targets,
                    time: next_time,
                };
                if !seen.contains(&key) {
                    let g: u32 = key
                        .arrivals
                        .iter()
                        .map(|a| a.unwrap_or(next_time))
                        .sum();
                    let h = joint_h(&key.positions);
                    seen.insert(key.clone());
                    nodes.push(JointNode {
                        key,
                        parent: Some(idx),
                    });
                    open.push(Reverse((g + h, h, nodes.len() - 1)));
                }
            }
            // advance the odometer over per-member move choices
            for i in (0..size).rev() {
                choice[i] += 1;
                if choice[i] < move_lists[i].len() {
                    continue 'product;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    Err(PlanError::NoPath)
}

fn internal_moves_legal(from: &[Position], to: &[Position]) -> bool {
    for i in 0..to.len() {
        for j in i + 1..to.len() {
            if to[i] == to[j] {
                return false;
            }
            if to[i] != from[i] && to[i] == from[j] && to[j] == from[i] {
                return false;
            }
        }
    }
    true
}

fn reconstruct_meta(nodes: &[JointNode], accept: usize, size: usize) -> Vec<Path> {
    let mut chain = Vec::new();
    let mut idx = accept;
    loop {
        chain.push(idx);
        match nodes[idx].parent {
            Some(parent) => idx = parent,
            None => break,
        }
    }
    chain.reverse();
    (0..size)
        .map(|i| Path::new(chain.iter().map(|&n| nodes[n].key.positions[i]).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridMap;
    use crate::path::path_cost;

    fn p(x: u32, y: u32) -> Position {
        Position::new(x, y)
    }

    fn plan(
        map: &GridMap,
        start: Position,
        goal: Position,
        constraints: &ConstraintSet,
    ) -> Result<(Path, u32), PlanError> {
        let table = HeuristicTable::build(map, goal);
        let mut stats = SearchStats::default();
        let path = plan_single(
            map,
            0,
            start,
            goal,
            constraints,
            &table,
            &mut stats,
            &Limits::none(),
        )?;
        let cost = path_cost(&path, goal).unwrap();
        Ok((path, cost))
    }

    #[test]
    fn unconstrained_straight_line() {
        let map = GridMap::open(4, 4);
        let (path, cost) = plan(&map, p(0, 0), p(3, 0), &ConstraintSet::new()).unwrap();
        assert_eq!(cost, 3);
        assert_eq!(path.len(), 4);
    }

    #[test]
    fn vertex_constraint_forces_a_wait() {
        // 1x3 corridor, block the middle cell at t=1: the only optimum waits
        // once. Expected cost 3 confirmed by enumerating every path of
        // length <= 5.
        let map = GridMap::open(3, 1);
        let mut cs = ConstraintSet::new();
        cs.insert(Constraint {
            agent: 0,
            time: 1,
            site: ConstraintSite::Vertex(p(1, 0)),
        });
        let (path, cost) = plan(&map, p(0, 0), p(2, 0), &cs).unwrap();
        assert_eq!(cost, 3);
        assert_eq!(path.at(1), p(0, 0));
    }

    #[test]
    fn goal_constraint_forces_departure_and_return() {
        // start == goal, goal blocked at t=2: leave and come back. Expected
        // cost 3 confirmed by enumerating every path of length <= 6.
        let map = GridMap::open(4, 4);
        let mut cs = ConstraintSet::new();
        cs.insert(Constraint {
            agent: 0,
            time: 2,
            site: ConstraintSite::Vertex(p(0, 0)),
        });
        let (path, cost) = plan(&map, p(0, 0), p(0, 0), &cs).unwrap();
        assert_eq!(cost, 3);
        assert_ne!(path.at(2), p(0, 0));
    }

    #[test]
    fn edge_constraint_blocks_a_traversal() {
        let map = GridMap::open(3, 1);
        let mut cs = ConstraintSet::new();
        cs.insert(Constraint {
            agent: 0,
            time: 0,
            site: ConstraintSite::Edge {
                from: p(0, 0),
                to: p(1, 0),
            },
        });
        let (_, cost) = plan(&map, p(0, 0), p(2, 0), &cs).unwrap();
        assert_eq!(cost, 3); // wait once, then go
    }

    #[test]
    fn boxed_in_goal_is_no_path() {
        let map = GridMap::from_ascii(&["..@.", "..@.", "..@."]);
        assert_eq!(
            plan(&map, p(0, 0), p(3, 1), &ConstraintSet::new()).unwrap_err(),
            PlanError::NoPath
        );
    }

    #[test]
    fn node_cap_trips_budget() {
        let map = GridMap::open(8, 8);
        let table = HeuristicTable::build(&map, p(7, 7));
        let mut stats = SearchStats::default();
        let limits = Limits {
            node_cap: Some(3),
            deadline: None,
        };
        let res = plan_single(
            &map,
            0,
            p(0, 0),
            p(7, 7),
            &ConstraintSet::new(),
            &table,
            &mut stats,
            &limits,
        );
        assert_eq!(res.unwrap_err(), PlanError::Budget);
    }

    fn joint(
        map: &GridMap,
        agents: &[Agent],
        constraints: &ConstraintSet,
    ) -> Result<(Vec<Path>, u32), PlanError> {
        let meta = (1..agents.len()).fold(MetaAgent::single(0), |acc, i| {
            MetaAgent::merged(&acc, &MetaAgent::single(i))
        });
        let mut cache = DistanceCache::new();
        let mut stats = SearchStats::default();
        let paths = plan_meta(
            map,
            &meta,
            agents,
            constraints,
            &mut cache,
            &mut stats,
            &Limits::none(),
        )?;
        let cost = paths
            .iter()
            .zip(agents)
            .map(|(path, a)| path_cost(path, a.goal).unwrap())
            .sum();
        Ok((paths, cost))
    }

    #[test]
    fn separable_agents_cost_the_sum_of_singles() {
        let map = GridMap::open(4, 2);
        let agents = [
            Agent {
                start: p(0, 0),
                goal: p(3, 0),
            },
            Agent {
                start: p(0, 1),
                goal: p(3, 1),
            },
        ];
        let (paths, cost) = joint(&map, &agents, &ConstraintSet::new()).unwrap();
        assert_eq!(cost, 6);
        assert!(crate::conflict::detect_conflicts(&paths).is_empty());
    }

    #[test]
    fn swap_on_a_two_cell_corridor_is_impossible() {
        let map = GridMap::open(2, 1);
        let agents = [
            Agent {
                start: p(0, 0),
                goal: p(1, 0),
            },
            Agent {
                start: p(1, 0),
                goal: p(0, 0),
            },
        ];
        assert_eq!(
            joint(&map, &agents, &ConstraintSet::new()).unwrap_err(),
            PlanError::NoPath
        );
    }

    #[test]
    fn corridor_crossing_uses_the_niche() {
        // A 5-cell corridor with a single niche below the middle; the
        // crossing agents must use it. Expected joint cost 11 confirmed by
        // exhaustive breadth-first search over the joint state space.
        let map = GridMap::from_ascii(&[".....", "@@.@@"]);
        let agents = [
            Agent {
                start: p(0, 0),
                goal: p(4, 0),
            },
            Agent {
                start: p(4, 0),
                goal: p(0, 0),
            },
        ];
        let (paths, cost) = joint(&map, &agents, &ConstraintSet::new()).unwrap();
        assert_eq!(cost, 11);
        assert!(crate::conflict::detect_conflicts(&paths).is_empty());
    }

    #[test]
    fn meta_of_one_delegates_to_single() {
        let map = GridMap::open(3, 3);
        let agents = [Agent {
            start: p(0, 0),
            goal: p(2, 2),
        }];
        let meta = MetaAgent::single(0);
        let mut cache = DistanceCache::new();
        let mut stats = SearchStats::default();
        let paths = plan_meta(
            &map,
            &meta,
            &agents,
            &ConstraintSet::new(),
            &mut cache,
            &mut stats,
            &Limits::none(),
        )
        .unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(path_cost(&paths[0], p(2, 2)).unwrap(), 4);
    }

    #[test]
    fn external_constraints_bind_the_named_member_only() {
        let map = GridMap::open(4, 2);
        let agents = [
            Agent {
                start: p(0, 0),
                goal: p(3, 0),
            },
            Agent {
                start: p(0, 1),
                goal: p(3, 1),
            },
        ];
        let mut cs = ConstraintSet::new();
        cs.insert(Constraint {
            agent: 1,
            time: 1,
            site: ConstraintSite::Vertex(p(1, 1)),
        });
        let (paths, cost) = joint(&map, &agents, &cs).unwrap();
        // member 0 unaffected, member 1 pays one extra step
        assert_eq!(path_cost(&paths[0], p(3, 0)).unwrap(), 3);
        assert_eq!(path_cost(&paths[1], p(3, 1)).unwrap(), 4);
        assert_eq!(cost, 7);
    }

    #[test]
    fn meta_agent_bookkeeping() {
        let a = MetaAgent::single(3);
        let b = MetaAgent::single(1);
        let m = MetaAgent::merged(&a, &b);
        assert_eq!(m.members(), &[1, 3]);
        assert_eq!(m.representative(), 1);
        assert!(m.contains(3));
        assert!(!m.contains(2));
    }
}
