//! Conflict detection between agent paths, and the constraints used to
//! resolve conflicts.

use std::fmt;

use crate::grid::Position;
use crate::path::Path;

/// Where a conflict happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConflictSite {
    /// Both agents occupy this cell at the conflict time.
    Vertex(Position),
    /// The agents traverse the same edge in opposite directions between
    /// `time` and `time + 1`; the stored direction is the lower agent's.
    Edge(Position, Position),
}

impl ConflictSite {
    fn kind_rank(self) -> u8 {
        match self {
            ConflictSite::Vertex(_) => 0,
            ConflictSite::Edge(..) => 1,
        }
    }
}

/// A collision between two agents' paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conflict {
    /// The two agents involved, lower index first.
    pub agents: (usize, usize),
    /// Step index: occupancy time for vertex conflicts, departure step for
    /// edge conflicts.
    pub time: u32,
    pub site: ConflictSite,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            ConflictSite::Vertex(p) => write!(
                f,
                "vertex conflict: agents {} and {} at {} at t={}",
                self.agents.0, self.agents.1, p, self.time
            ),
            ConflictSite::Edge(from, to) => write!(
                f,
                "edge conflict: agents {} and {} swap {}-{} at t={}",
                self.agents.0, self.agents.1, from, to, self.time
            ),
        }
    }
}

/// Returns every vertex and edge conflict among the paths, with each path
/// padded by its stay-forever rule up to the longest explicit length.
///
/// The result is sorted by (time, lower agent, vertex before edge, higher
/// agent); an empty result means the solution is collision-free.
pub fn detect_conflicts(solution: &[Path]) -> Vec<Conflict> {
    let mut conflicts = Vec::new();
    let max_len = solution.iter().map(Path::len).max().unwrap_or(0) as u32;
    for i in 0..solution.len() {
        for j in i + 1..solution.len() {
            let (a, b) = (&solution[i], &solution[j]);
            for t in 0..max_len {
                if a.at(t) == b.at(t) {
                    conflicts.push(Conflict {
                        agents: (i, j),
                        time: t,
                        site: ConflictSite::Vertex(a.at(t)),
                    });
                }
                if t + 1 < max_len
                    && a.at(t) != a.at(t + 1)
                    && a.at(t) == b.at(t + 1)
                    && a.at(t + 1) == b.at(t)
                {
                    conflicts.push(Conflict {
                        agents: (i, j),
                        time: t,
                        site: ConflictSite::Edge(a.at(t), a.at(t + 1)),
                    });
                }
            }
        }
    }
    conflicts.sort_by_key(|c| (c.time, c.agents.0, c.site.kind_rank(), c.agents.1));
    conflicts
}

/// What a constraint forbids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintSite {
    /// Occupying this cell at the constraint time.
    Vertex(Position),
    /// Traversing this directed edge between `time` and `time + 1`.
    Edge { from: Position, to: Position },
}

/// Forbids one agent from one occupancy or one directed edge traversal at
/// one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub agent: usize,
    pub time: u32,
    pub site: ConstraintSite,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            ConstraintSite::Vertex(p) => {
                write!(f, "agent {} may not be at {} at t={}", self.agent, p, self.time)
            }
            ConstraintSite::Edge { from, to } => write!(
                f,
                "agent {} may not move {}->{} at t={}",
                self.agent, from, to, self.time
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: u32, y: u32) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn two_agents_entering_one_cell() {
        let a = Path::new(vec![p(0, 0), p(1, 0)]);
        let b = Path::new(vec![p(2, 0), p(1, 0)]);
        let conflicts = detect_conflicts(&[a, b]);
        assert_eq!(
            conflicts,
            vec![Conflict {
                agents: (0, 1),
                time: 1,
                site: ConflictSite::Vertex(p(1, 0)),
            }]
        );
    }

    #[test]
    fn swap_is_an_edge_conflict() {
        let a = Path::new(vec![p(0, 0), p(0, 1)]);
        let b = Path::new(vec![p(0, 1), p(0, 0)]);
        let conflicts = detect_conflicts(&[a, b]);
        assert_eq!(
            conflicts,
            vec![Conflict {
                agents: (0, 1),
                time: 0,
                site: ConflictSite::Edge(p(0, 0), p(0, 1)),
            }]
        );
    }

    #[test]
    fn disjoint_corridors_have_no_conflicts() {
        let a = Path::new(vec![p(0, 0), p(1, 0), p(2, 0)]);
        let b = Path::new(vec![p(0, 2), p(1, 2), p(2, 2)]);
        assert!(detect_conflicts(&[a, b]).is_empty());
    }

    #[test]
    fn parked_agent_blocks_a_through_path() {
        // agent 0 stops at (1,0) at t=1; agent 1 passes through (1,0) at t=2
        let a = Path::new(vec![p(0, 0), p(1, 0)]);
        let b = Path::new(vec![p(3, 0), p(2, 0), p(1, 0), p(1, 1)]);
        let conflicts = detect_conflicts(&[a, b]);
        assert_eq!(
            conflicts,
            vec![Conflict {
                agents: (0, 1),
                time: 2,
                site: ConflictSite::Vertex(p(1, 0)),
            }]
        );
    }

    #[test]
    fn conflicts_are_sorted_and_complete() {
        // three agents meeting at the same cell at t=1 yields three pairwise
        // conflicts, ordered by agent ids
        let a = Path::new(vec![p(0, 1), p(1, 1)]);
        let b = Path::new(vec![p(1, 0), p(1, 1)]);
        let c = Path::new(vec![p(2, 1), p(1, 1)]);
        let conflicts = detect_conflicts(&[a, b, c]);
        let pairs: Vec<_> = conflicts.iter().map(|c| c.agents).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert!(conflicts.iter().all(|c| c.time == 1));
    }
}
