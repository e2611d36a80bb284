//! Grid maps, positions, and problem instances.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// A cell coordinate: `x` is the column, `y` is the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub x: u32,
    pub y: u32,
}

impl Position {
    pub const fn new(x: u32, y: u32) -> Self {
        Position { x, y }
    }

    pub fn manhattan(self, other: Position) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// True if the two cells are 4-adjacent (share an edge).
    pub fn adjacent(self, other: Position) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive")]
    EmptyDimensions,
    #[error("passability table has {actual} entries, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("grid has no passable cell")]
    NoPassableCell,
}

/// A 4-connected grid; cells are passable or blocked.
///
/// Vertices of the search graph are the passable cells, edges connect
/// 4-adjacent passable cells. Stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    passable: Vec<bool>,
}

impl GridMap {
    pub fn new(width: u32, height: u32, passable: Vec<bool>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyDimensions);
        }
        let expected = width as usize * height as usize;
        if passable.len() != expected {
            return Err(GridError::SizeMismatch {
                expected,
                actual: passable.len(),
            });
        }
        if !passable.iter().any(|&p| p) {
            return Err(GridError::NoPassableCell);
        }
        Ok(GridMap {
            width,
            height,
            passable,
        })
    }

    /// An obstacle-free grid.
    pub fn open(width: u32, height: u32) -> Self {
        GridMap::new(width, height, vec![true; width as usize * height as usize])
            .expect("open grid dimensions must be positive")
    }

    /// Builds a grid from rows of `.` (passable) and `@` (blocked).
    /// Convenient for tests and examples; panics on ragged input.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as u32;
        let mut passable = Vec::with_capacity((width * height) as usize);
        for row in rows {
            assert_eq!(row.chars().count() as u32, width, "ragged ascii grid");
            for c in row.chars() {
                passable.push(c != '@');
            }
        }
        GridMap::new(width, height, passable).expect("invalid ascii grid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn is_passable(&self, p: Position) -> bool {
        self.in_bounds(p) && self.passable[self.index(p)]
    }

    pub fn index(&self, p: Position) -> usize {
        p.y as usize * self.width as usize + p.x as usize
    }

    pub fn passable_count(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }

    /// Passable 4-neighbors in a fixed order: up, left, right, down.
    pub fn neighbors(&self, p: Position) -> impl Iterator<Item = Position> + '_ {
        let candidates = [
            (p.y > 0).then(|| Position::new(p.x, p.y - 1)),
            (p.x > 0).then(|| Position::new(p.x - 1, p.y)),
            Some(Position::new(p.x + 1, p.y)),
            Some(Position::new(p.x, p.y + 1)),
        ];
        candidates
            .into_iter()
            .flatten()
            .filter(move |&q| self.is_passable(q))
    }

    /// All passable cells in row-major order.
    pub fn passable_positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width)
                .map(move |x| Position::new(x, y))
                .filter(move |&p| self.is_passable(p))
        })
    }

    /// The connected component containing `from`, in BFS visit order.
    pub fn component_of(&self, from: Position) -> Vec<Position> {
        if !self.is_passable(from) {
            return Vec::new();
        }
        let mut seen = vec![false; self.passable.len()];
        seen[self.index(from)] = true;
        let mut queue = VecDeque::from([from]);
        let mut component = Vec::new();
        while let Some(p) = queue.pop_front() {
            component.push(p);
            for q in self.neighbors(p) {
                let idx = self.index(q);
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(q);
                }
            }
        }
        component
    }

    /// The largest connected component (ties broken by first cell in
    /// row-major order).
    pub fn largest_component(&self) -> Vec<Position> {
        let mut claimed = vec![false; self.passable.len()];
        let mut best: Vec<Position> = Vec::new();
        for p in self.passable_positions() {
            if claimed[self.index(p)] {
                continue;
            }
            let component = self.component_of(p);
            for &q in &component {
                claimed[self.index(q)] = true;
            }
            if component.len() > best.len() {
                best = component;
            }
        }
        best
    }
}

/// One agent's endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agent {
    pub start: Position,
    pub goal: Position,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance must have at least one agent")]
    NoAgents,
    #[error("agents {0} and {1} share the start {2}")]
    DuplicateStart(usize, usize, Position),
    #[error("agents {0} and {1} share the goal {2}")]
    DuplicateGoal(usize, usize, Position),
    #[error("agent {0} start {1} is not a passable cell")]
    BadStart(usize, Position),
    #[error("agent {0} goal {1} is not a passable cell")]
    BadGoal(usize, Position),
}

/// A problem instance: a map plus an ordered list of agents.
///
/// Construction enforces that starts are pairwise distinct, goals are
/// pairwise distinct, and every endpoint is passable.
#[derive(Debug, Clone)]
pub struct Instance {
    map: GridMap,
    agents: Vec<Agent>,
}

impl Instance {
    pub fn new(map: GridMap, agents: Vec<Agent>) -> Result<Self, InstanceError> {
        if agents.is_empty() {
            return Err(InstanceError::NoAgents);
        }
        for (i, agent) in agents.iter().enumerate() {
            if !map.is_passable(agent.start) {
                return Err(InstanceError::BadStart(i, agent.start));
            }
            if !map.is_passable(agent.goal) {
                return Err(InstanceError::BadGoal(i, agent.goal));
            }
            for (j, other) in agents.iter().enumerate().take(i) {
                if other.start == agent.start {
                    return Err(InstanceError::DuplicateStart(j, i, agent.start));
                }
                if other.goal == agent.goal {
                    return Err(InstanceError::DuplicateGoal(j, i, agent.goal));
                }
            }
        }
        Ok(Instance { map, agents })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }
}
