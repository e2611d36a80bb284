//! Memoized true-distance heuristics.
//!
//! Distances to a goal are computed once by a breadth-first flood fill over
//! the map, ignoring constraints and other agents, and shared read-only by
//! every search that targets that goal.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use crate::grid::{GridMap, Position};

pub(crate) const UNREACHABLE: u32 = u32::MAX;

/// Exact shortest-path move counts from every passable cell to one goal.
#[derive(Debug, Clone)]
pub struct HeuristicTable {
    goal: Position,
    dist: Vec<u32>,
}

impl HeuristicTable {
    pub fn build(map: &GridMap, goal: Position) -> Self {
        let mut dist = vec![UNREACHABLE; map.width() as usize * map.height() as usize];
        if map.is_passable(goal) {
            dist[map.index(goal)] = 0;
            let mut queue = VecDeque::from([goal]);
            while let Some(p) = queue.pop_front() {
                let d = dist[map.index(p)];
                for q in map.neighbors(p) {
                    let idx = map.index(q);
                    if dist[idx] == UNREACHABLE {
                        dist[idx] = d + 1;
                        queue.push_back(q);
                    }
                }
            }
        }
        HeuristicTable { goal, dist }
    }

    pub fn goal(&self) -> Position {
        self.goal
    }

    /// Distance from `p` to the goal; `None` if unreachable.
    pub fn distance(&self, map: &GridMap, p: Position) -> Option<u32> {
        if !map.in_bounds(p) {
            return None;
        }
        match self.dist[map.index(p)] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    /// Raw lookup; `UNREACHABLE` encodes no path. The caller guarantees `p`
    /// is in bounds.
    pub(crate) fn raw(&self, map: &GridMap, p: Position) -> u32 {
        self.dist[map.index(p)]
    }
}

/// Exact shortest-path move count between two passable cells, ignoring
/// constraints and other agents. `None` means the goal is unreachable.
pub fn true_distance(map: &GridMap, from: Position, goal: Position) -> Option<u32> {
    HeuristicTable::build(map, goal).distance(map, from)
}

/// Per-goal table cache for one solver run.
#[derive(Debug, Default)]
pub struct DistanceCache {
    tables: HashMap<Position, Rc<HeuristicTable>>,
}

impl DistanceCache {
    pub fn new() -> Self {
        DistanceCache::default()
    }

    pub fn table(&mut self, map: &GridMap, goal: Position) -> Rc<HeuristicTable> {
        Rc::clone(
            self.tables
                .entry(goal)
                .or_insert_with(|| Rc::new(HeuristicTable::build(map, goal))),
        )
    }
}
