//! Full solution checking, used as the final gate on every solver answer.

use std::fmt;

use crate::conflict::{detect_conflicts, Conflict};
use crate::grid::{Instance, Position};
use crate::path::Path;

/// Why a solution is invalid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolutionDefect {
    WrongPathCount { paths: usize, agents: usize },
    WrongStart { agent: usize, found: Position, expected: Position },
    EndsOffGoal { agent: usize, found: Position, expected: Position },
    IllegalStep { agent: usize, time: u32, from: Position, to: Position },
    ImpassableCell { agent: usize, time: u32, at: Position },
    Conflicted(Conflict),
}

impl fmt::Display for SolutionDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionDefect::WrongPathCount { paths, agents } => {
                write!(f, "{paths} paths for {agents} agents")
            }
            SolutionDefect::WrongStart { agent, found, expected } => {
                write!(f, "agent {agent} starts at {found}, expected {expected}")
            }
            SolutionDefect::EndsOffGoal { agent, found, expected } => {
                write!(f, "agent {agent} ends at {found}, expected {expected}")
            }
            SolutionDefect::IllegalStep { agent, time, from, to } => {
                write!(f, "agent {agent} makes a non-adjacent step {from}->{to} at t={time}")
            }
            SolutionDefect::ImpassableCell { agent, time, at } => {
                write!(f, "agent {agent} stands on blocked cell {at} at t={time}")
            }
            SolutionDefect::Conflicted(c) => write!(f, "{c}"),
        }
    }
}

/// Checks starts, goals, adjacency, passability, and collision-freedom;
/// returns the first defect found.
pub fn check_solution(instance: &Instance, solution: &[Path]) -> Result<(), SolutionDefect> {
    if solution.len() != instance.num_agents() {
        return Err(SolutionDefect::WrongPathCount {
            paths: solution.len(),
            agents: instance.num_agents(),
        });
    }
    for (i, (path, agent)) in solution.iter().zip(instance.agents()).enumerate() {
        if path.first() != agent.start {
            return Err(SolutionDefect::WrongStart {
                agent: i,
                found: path.first(),
                expected: agent.start,
            });
        }
        if path.last() != agent.goal {
            return Err(SolutionDefect::EndsOffGoal {
                agent: i,
                found: path.last(),
                expected: agent.goal,
            });
        }
        for (t, window) in path.positions().windows(2).enumerate() {
            let (from, to) = (window[0], window[1]);
            if from != to && !from.adjacent(to) {
                return Err(SolutionDefect::IllegalStep {
                    agent: i,
                    time: t as u32,
                    from,
                    to,
                });
            }
        }
        for (t, &at) in path.positions().iter().enumerate() {
            if !instance.map().is_passable(at) {
                return Err(SolutionDefect::ImpassableCell {
                    agent: i,
                    time: t as u32,
                    at,
                });
            }
        }
    }
    match detect_conflicts(solution).into_iter().next() {
        Some(conflict) => Err(SolutionDefect::Conflicted(conflict)),
        None => Ok(()),
    }
}

/// True iff the solution is fully valid for the instance.
pub fn validate_solution(instance: &Instance, solution: &[Path]) -> bool {
    check_solution(instance, solution).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Agent, GridMap};

    fn p(x: u32, y: u32) -> Position {
        Position::new(x, y)
    }

    fn one_agent(map: GridMap, start: Position, goal: Position) -> Instance {
        Instance::new(map, vec![Agent { start, goal }]).unwrap()
    }

    #[test]
    fn straight_path_is_valid() {
        let instance = one_agent(GridMap::open(4, 1), p(0, 0), p(3, 0));
        let path = Path::new(vec![p(0, 0), p(1, 0), p(2, 0), p(3, 0)]);
        assert!(validate_solution(&instance, &[path]));
    }

    #[test]
    fn path_ending_off_goal_is_invalid() {
        let instance = one_agent(GridMap::open(4, 1), p(0, 0), p(3, 0));
        let path = Path::new(vec![p(0, 0), p(1, 0)]);
        assert_eq!(
            check_solution(&instance, &[path]),
            Err(SolutionDefect::EndsOffGoal {
                agent: 0,
                found: p(1, 0),
                expected: p(3, 0),
            })
        );
    }

    #[test]
    fn swapping_agents_are_invalid() {
        let map = GridMap::open(2, 2);
        let instance = Instance::new(
            map,
            vec![
                Agent { start: p(0, 0), goal: p(1, 0) },
                Agent { start: p(1, 0), goal: p(0, 0) },
            ],
        )
        .unwrap();
        let paths = vec![
            Path::new(vec![p(0, 0), p(1, 0)]),
            Path::new(vec![p(1, 0), p(0, 0)]),
        ];
        assert!(!validate_solution(&instance, &paths));
        assert!(matches!(
            check_solution(&instance, &paths),
            Err(SolutionDefect::Conflicted(_))
        ));
    }

    #[test]
    fn teleport_is_invalid() {
        let instance = one_agent(GridMap::open(4, 4), p(0, 0), p(3, 3));
        let path = Path::new(vec![p(0, 0), p(3, 3)]);
        assert!(matches!(
            check_solution(&instance, &[path]),
            Err(SolutionDefect::IllegalStep { .. })
        ));
    }
}
