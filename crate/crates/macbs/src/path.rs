//! Time-indexed paths and the sum-of-costs objective.

use thiserror::Error;

use crate::grid::{Instance, Position};

/// A time-indexed sequence of positions; entry `t` is where the agent is at
/// step `t`. After the last entry the agent remains at its final position
/// forever.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path(Vec<Position>);

impl Path {
    /// Builds a path from an explicit position sequence. Panics if empty.
    pub fn new(positions: Vec<Position>) -> Self {
        assert!(!positions.is_empty(), "a path has at least its start");
        Path(positions)
    }

    /// Position at step `t`, applying the stay-forever rule past the end.
    pub fn at(&self, t: u32) -> Position {
        let idx = (t as usize).min(self.0.len() - 1);
        self.0[idx]
    }

    /// Number of explicit entries (at least 1).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Position {
        self.0[0]
    }

    pub fn last(&self) -> Position {
        *self.0.last().unwrap()
    }

    pub fn positions(&self) -> &[Position] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Position> {
        self.0.iter()
    }
}

impl From<Vec<Position>> for Path {
    fn from(positions: Vec<Position>) -> Self {
        Path::new(positions)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathCostError {
    #[error("path ends at {last}, not at the goal {goal}")]
    EndsOffGoal { last: Position, goal: Position },
    #[error("solution has {paths} paths for {agents} agents")]
    WrongPathCount { paths: usize, agents: usize },
}

/// Cost of a single path: the earliest step from which the agent sits at
/// `goal` through the end of the explicit sequence.
///
/// Every move and every wait costs 1, except waits in the terminal goal
/// block, which are free. A goal wait that is later followed by a departure
/// is charged like any other step.
pub fn path_cost(path: &Path, goal: Position) -> Result<u32, PathCostError> {
    if path.last() != goal {
        return Err(PathCostError::EndsOffGoal {
            last: path.last(),
            goal,
        });
    }
    let mut arrival = path.len() - 1;
    while arrival > 0 && path.positions()[arrival - 1] == goal {
        arrival -= 1;
    }
    Ok(arrival as u32)
}

/// Sum of individual path costs over all agents (the SIC objective).
pub fn sic(solution: &[Path], instance: &Instance) -> Result<u32, PathCostError> {
    if solution.len() != instance.num_agents() {
        return Err(PathCostError::WrongPathCount {
            paths: solution.len(),
            agents: instance.num_agents(),
        });
    }
    let mut total = 0;
    for (path, agent) in solution.iter().zip(instance.agents()) {
        total += path_cost(path, agent.goal)?;
    }
    Ok(total)
}
