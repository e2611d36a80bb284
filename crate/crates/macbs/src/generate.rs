//! Instance generators: 4x4 puzzle scenes, random map scenarios, and the
//! parametric two-chamber bottleneck family.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Agent, GridMap, Instance, Position};
use crate::movingai::ScenRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("puzzle scenes take 1..=15 agents, got {0}")]
    BadPuzzleSize(u32),
    #[error("map needs {needed} passable cells in one component, largest has {available}")]
    InsufficientCells { needed: usize, available: usize },
    #[error("scene needs at least {0}")]
    BadSceneParam(&'static str),
}

const PUZZLE_SIDE: u32 = 4;

/// A random scene on the obstacle-free 4x4 board with `n_tiles` agents,
/// biased toward scenes where conflicts are likely: scenes are resampled
/// until at least `ceil(n_tiles / 2)` agents' shortest-path envelopes
/// pairwise intersect.
///
/// On the open board an agent's envelope (the cells on any of its shortest
/// paths) is exactly the bounding rectangle of its endpoints, and a family
/// of axis-aligned rectangles is pairwise intersecting precisely when some
/// cell lies in all of them, so the bias check reduces to a coverage count.
pub fn gen_puzzle_instance(n_tiles: u32, seed: u64) -> Result<Instance, GenError> {
    gen_puzzle(n_tiles, seed, true)
}

/// Same sampler with the conflict-likeliness bias disabled: the first
/// drawn scene is returned as-is.
pub fn gen_puzzle_instance_unbiased(n_tiles: u32, seed: u64) -> Result<Instance, GenError> {
    gen_puzzle(n_tiles, seed, false)
}

fn gen_puzzle(n_tiles: u32, seed: u64, biased: bool) -> Result<Instance, GenError> {
    if !(1..=15).contains(&n_tiles) {
        return Err(GenError::BadPuzzleSize(n_tiles));
    }
    let map = GridMap::open(PUZZLE_SIDE, PUZZLE_SIDE);
    let cells: Vec<Position> = map.passable_positions().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_tiles as usize;
    let wanted = n_tiles.div_ceil(2);
    for attempt in 0u32.. {
        let mut starts = cells.clone();
        starts.shuffle(&mut rng);
        starts.truncate(n);
        let mut goals = cells.clone();
        goals.shuffle(&mut rng);
        goals.truncate(n);
        let agents: Vec<Agent> = starts
            .into_iter()
            .zip(goals)
            .map(|(start, goal)| Agent { start, goal })
            .collect();
        if !biased || max_envelope_overlap(&agents) >= wanted {
            let instance =
                Instance::new(map, agents).expect("distinct sampled endpoints are valid");
            return Ok(instance);
        }
        assert!(attempt < 1_000_000, "conflict bias cannot be satisfied");
    }
    unreachable!()
}

/// Largest number of agents whose endpoint rectangles share a cell.
fn max_envelope_overlap(agents: &[Agent]) -> u32 {
    let mut best = 0;
    for y in 0..PUZZLE_SIDE {
        for x in 0..PUZZLE_SIDE {
            let covered = agents
                .iter()
                .filter(|a| {
                    let (lo_x, hi_x) = (a.start.x.min(a.goal.x), a.start.x.max(a.goal.x));
                    let (lo_y, hi_y) = (a.start.y.min(a.goal.y), a.start.y.max(a.goal.y));
                    (lo_x..=hi_x).contains(&x) && (lo_y..=hi_y).contains(&y)
                })
                .count() as u32;
            best = best.max(covered);
        }
    }
    best
}

/// `n_agents` distinct starts and goals drawn uniformly from the map's
/// largest connected component, so every goal is reachable.
pub fn gen_random_scenario(
    map: &GridMap,
    n_agents: usize,
    seed: u64,
) -> Result<Instance, GenError> {
    let mut component = map.largest_component();
    let needed = 2 * n_agents;
    if component.len() < needed || n_agents == 0 {
        return Err(GenError::InsufficientCells {
            needed,
            available: component.len(),
        });
    }
    // BFS order depends on the discovery cell; sort for a stable base
    component.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    component.shuffle(&mut rng);
    let agents: Vec<Agent> = (0..n_agents)
        .map(|i| Agent {
            start: component[i],
            goal: component[n_agents + i],
        })
        .collect();
    Ok(Instance::new(map.clone(), agents).expect("distinct component cells are valid"))
}

/// Two open chambers joined by a one-cell-wide corridor, with one agent in
/// each chamber crossing to the far side.
///
/// Both agents' unique shortest paths run straight along the corridor row,
/// so every pair of independently planned optimal paths collides in the
/// middle.
pub fn make_bottleneck_scene(corridor_len: u32, chamber_size: u32) -> Result<Instance, GenError> {
    if corridor_len < 1 {
        return Err(GenError::BadSceneParam("a one-cell corridor"));
    }
    if chamber_size < 2 {
        return Err(GenError::BadSceneParam("chamber size two"));
    }
    let width = 2 * chamber_size + corridor_len;
    let height = chamber_size;
    let mid = chamber_size / 2;
    let mut passable = vec![false; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            let in_left = x < chamber_size;
            let in_right = x >= chamber_size + corridor_len;
            let in_corridor = y == mid && !in_left && !in_right;
            if in_left || in_right || in_corridor {
                passable[(y * width + x) as usize] = true;
            }
        }
    }
    let map = GridMap::new(width, height, passable).expect("scene dimensions are positive");
    let agents = vec![
        Agent {
            start: Position::new(0, mid),
            goal: Position::new(width - 1, mid),
        },
        Agent {
            start: Position::new(width - 1, mid),
            goal: Position::new(0, mid),
        },
    ];
    Ok(Instance::new(map, agents).expect("chamber endpoints are valid"))
}

/// Scenario records for persisting a generated instance.
pub fn instance_records(instance: &Instance, map_name: &str, bucket: u32) -> Vec<ScenRecord> {
    instance
        .agents()
        .iter()
        .map(|agent| ScenRecord {
            bucket,
            map_name: map_name.to_string(),
            width: instance.map().width(),
            height: instance.map().height(),
            start: agent.start,
            goal: agent.goal,
            optimal_length: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristic::true_distance;
    use crate::solver::{solve, MergeThreshold, SolverConfig, Variant};

    #[test]
    fn puzzle_sizes_are_enforced() {
        assert_eq!(gen_puzzle_instance(0, 1).unwrap_err(), GenError::BadPuzzleSize(0));
        assert_eq!(gen_puzzle_instance(16, 1).unwrap_err(), GenError::BadPuzzleSize(16));
        assert!(gen_puzzle_instance(15, 1).is_ok());
    }

    #[test]
    fn single_tile_puzzle_is_trivially_solvable() {
        let instance = gen_puzzle_instance(1, 3).unwrap();
        let result = solve(&instance, &SolverConfig::cbs());
        assert!(result.solved());
        assert_eq!(result.stats.splits, 0);
    }

    #[test]
    fn puzzle_generation_is_deterministic() {
        for seed in [0, 1, 99] {
            let a = gen_puzzle_instance(6, seed).unwrap();
            let b = gen_puzzle_instance(6, seed).unwrap();
            assert_eq!(a.agents(), b.agents());
        }
    }

    #[test]
    fn biased_scenes_have_overlapping_envelopes() {
        for seed in 0..20 {
            let instance = gen_puzzle_instance(9, seed).unwrap();
            assert!(max_envelope_overlap(instance.agents()) >= 5, "seed {seed}");
            assert_eq!(instance.num_agents(), 9);
        }
    }

    #[test]
    fn random_scenario_stays_in_one_component() {
        let map = GridMap::from_ascii(&[
            "....@..",
            "....@..",
            "....@..",
            ".......",
        ]);
        let instance = gen_random_scenario(&map, 4, 7).unwrap();
        for agent in instance.agents() {
            assert!(true_distance(&map, agent.start, agent.goal).is_some());
        }
        let again = gen_random_scenario(&map, 4, 7).unwrap();
        assert_eq!(instance.agents(), again.agents());
    }

    #[test]
    fn random_scenario_rejects_crowding() {
        let map = GridMap::open(2, 2);
        assert_eq!(
            gen_random_scenario(&map, 3, 0).unwrap_err(),
            GenError::InsufficientCells {
                needed: 6,
                available: 4
            }
        );
    }

    #[test]
    fn bottleneck_guarantees_a_conflict() {
        let instance = make_bottleneck_scene(1, 2).unwrap();
        let result = solve(&instance, &SolverConfig::cbs());
        assert!(result.solved());
        assert!(result.stats.splits >= 1, "independent optima must collide");
    }

    #[test]
    fn bottleneck_restart_signature() {
        for (corridor, chamber) in [(1, 2), (3, 3), (5, 4)] {
            let instance = make_bottleneck_scene(corridor, chamber).unwrap();
            let config = SolverConfig::new(Variant::MaCbsR, MergeThreshold::Finite(1));
            let result = solve(&instance, &config);
            assert!(result.solved());
            assert_eq!(result.stats.restarts, 1, "c={corridor} h={chamber}");
        }
    }

    #[test]
    fn longer_corridors_cost_strictly_more() {
        // optima confirmed by exhaustive joint search over the scene family
        let mut last = 0;
        for corridor in 1..=4 {
            let instance = make_bottleneck_scene(corridor, 3).unwrap();
            let cost = solve(&instance, &SolverConfig::cbs()).cost().unwrap();
            assert!(cost > last, "corridor {corridor}: {cost} !> {last}");
            last = cost;
        }
    }

    #[test]
    fn bad_scene_params_are_rejected() {
        assert!(make_bottleneck_scene(0, 2).is_err());
        assert!(make_bottleneck_scene(1, 1).is_err());
    }
}
