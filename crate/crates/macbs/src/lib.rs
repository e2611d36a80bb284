//! Sum-of-costs optimal multi-agent path finding on 4-connected grids.
//!
//! Agents move or wait one cell per step; a solution routes every agent
//! from its start to its goal with no two agents sharing a cell or swapping
//! along an edge at the same step. The objective is the sum of individual
//! path costs, where only waits in the terminal goal block are free.
//!
//! The high-level solver is a constraint-tree search that resolves
//! conflicts either by constraining one agent (splitting) or by merging the
//! conflicting pair into a jointly planned group, with pluggable merge
//! rules: a fixed conflict-count threshold, the same threshold with a full
//! search restart after each merge, a randomized hazard rule, and a delayed
//! rule that also requires the popped node to be strictly cheapest. A small
//! rent-or-buy model ([`model`]) pins down the worst-case guarantees the
//! threshold rule is built on.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example solve_bottleneck    # variants on a crossing scene
//! cargo run --release --example puzzle_sweep        # threshold sweep on 4x4 scenes
//! cargo run --release --example variant_shootout    # randomized and delayed rules
//! cargo run --release --example ski_rental_model    # competitive-ratio tables
//! cargo run --release --example movingai_maps       # .map/.scen parsing and solving
//! cargo run --release --example estimate_threshold  # picking the threshold from data
//! ```
//!
//! The `macbs` binary wraps the same library behind `solve`, `bench`,
//! `gen`, and `model` subcommands.

pub mod bench;
pub mod conflict;
pub mod generate;
pub mod grid;
pub mod heuristic;
pub mod lowlevel;
pub mod model;
pub mod movingai;
pub mod path;
pub mod policy;
pub mod solver;
pub mod validate;

pub use conflict::{detect_conflicts, Conflict, ConflictSite, Constraint, ConstraintSite};
pub use grid::{Agent, GridMap, Instance, Position};
pub use heuristic::{true_distance, DistanceCache, HeuristicTable};
pub use lowlevel::{plan_meta, plan_single, ConstraintSet, Limits, MetaAgent, PlanError};
pub use path::{path_cost, sic, Path};
pub use solver::{
    solve, solve_traced, MergeDecision, MergeThreshold, Outcome, SearchStats, SolveResult,
    SolverConfig, Variant,
};
pub use validate::{check_solution, validate_solution};
