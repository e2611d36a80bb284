//! The high-level constraint-tree search.
//!
//! One engine runs every variant: plain conflict-based search, merging with
//! a fixed conflict threshold, merging with a restart of the whole search,
//! and the randomized and delayed merge rules. A popped node either returns
//! its solution (no conflicts), splits on its first conflict, or merges the
//! conflicting pair into one jointly planned group.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::conflict::{detect_conflicts, Conflict, ConflictSite, Constraint, ConstraintSite};
use crate::grid::Instance;
use crate::heuristic::DistanceCache;
use crate::lowlevel::{plan_meta, ConstraintSet, Limits, MetaAgent, PlanError};
use crate::path::{sic, Path};
use crate::policy::{should_merge_delayed, should_merge_fixed, PolicyState};
use crate::validate::validate_solution;

/// Solver variant. The last three restart the search on every merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Never merge; resolve every conflict by splitting.
    Cbs,
    /// Merge after the threshold is reached, keeping the node list.
    MaCbs,
    /// Merge after the threshold is reached and restart the search.
    MaCbsR,
    /// Merge with the hazard probability at each conflict, then restart.
    Randomized,
    /// Merge only when the threshold is reached and the popped node is
    /// strictly cheaper than the next one, then restart.
    Delayed,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Cbs,
        Variant::MaCbs,
        Variant::MaCbsR,
        Variant::Randomized,
        Variant::Delayed,
    ];

    pub fn restarts_on_merge(self) -> bool {
        matches!(self, Variant::MaCbsR | Variant::Randomized | Variant::Delayed)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Variant::Cbs => "CBS",
            Variant::MaCbs => "MA-CBS",
            Variant::MaCbsR => "MA-CBS/R",
            Variant::Randomized => "MA-CBS/R-rand",
            Variant::Delayed => "MA-CBS/R-delayed",
        };
        f.write_str(name)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cbs" => Ok(Variant::Cbs),
            "ma-cbs" | "macbs" => Ok(Variant::MaCbs),
            "ma-cbs-r" | "macbs-r" | "ma-cbs/r" => Ok(Variant::MaCbsR),
            "ma-cbs-r-rand" | "randomized" | "rand" => Ok(Variant::Randomized),
            "ma-cbs-r-delayed" | "delayed" => Ok(Variant::Delayed),
            other => Err(format!(
                "unknown variant '{other}' (expected cbs, ma-cbs, ma-cbs-r, ma-cbs-r-rand, or ma-cbs-r-delayed)"
            )),
        }
    }
}

/// The merge threshold: merge a pair once it has conflicted this many times.
/// `Unbounded` disables merging, which reduces every variant to plain CBS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeThreshold {
    Finite(u32),
    Unbounded,
}

impl fmt::Display for MergeThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeThreshold::Finite(b) => write!(f, "{b}"),
            MergeThreshold::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for MergeThreshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "unbounded" => Ok(MergeThreshold::Unbounded),
            num => num
                .parse::<u32>()
                .ok()
                .filter(|&b| b >= 1)
                .map(MergeThreshold::Finite)
                .ok_or_else(|| format!("merge threshold must be a positive integer or 'inf', got '{s}'")),
        }
    }
}

/// How pairwise conflict counts are accumulated on each pop: only the
/// conflict chosen for resolution, or every conflict the node contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConflictCounting {
    #[default]
    ChosenPerPop,
    AllPerPop,
}

/// Solver configuration.
///
/// Agents that reach their goals stay there and keep blocking the cell for
/// everyone else; the cost model charges nothing for waits in the terminal
/// goal block and one unit for every other action.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    pub merge_threshold: MergeThreshold,
    /// Largest allowed combined group; pairs whose union would exceed it
    /// are never merged.
    pub max_meta_size: usize,
    /// Seed for the randomized merge rule.
    pub seed: u64,
    /// Cap on total low-level expansions.
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub conflict_counting: ConflictCounting,
}

impl SolverConfig {
    pub fn new(variant: Variant, merge_threshold: MergeThreshold) -> Self {
        SolverConfig {
            variant,
            merge_threshold,
            max_meta_size: 2,
            seed: 0,
            node_limit: None,
            time_limit: None,
            conflict_counting: ConflictCounting::ChosenPerPop,
        }
    }

    pub fn cbs() -> Self {
        SolverConfig::new(Variant::Cbs, MergeThreshold::Unbounded)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = Some(limit);
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

/// Search effort counters. All counters are monotone during a run;
/// `wall_time` is the only nondeterministic field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    /// Low-level expansions; joint expansions count once.
    pub expanded: u64,
    /// Low-level expansions with joint expansions weighted by group size.
    pub expanded_weighted: u64,
    /// High-level nodes popped from the node list.
    pub pops: u64,
    pub splits: u64,
    pub merges: u64,
    pub restarts: u64,
    pub wall_time: f64,
}

impl SearchStats {
    /// Every deterministic counter, for exact-equality comparisons.
    pub fn counts(&self) -> [u64; 6] {
        [
            self.expanded,
            self.expanded_weighted,
            self.pops,
            self.splits,
            self.merges,
            self.restarts,
        ]
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved { solution: Vec<Path>, cost: u32 },
    /// The node list emptied, or a merge produced an infeasible joint
    /// subproblem: no solution exists for this instance.
    Unsolvable,
    /// A node or time cap tripped before the search finished.
    Timeout,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub stats: SearchStats,
}

impl SolveResult {
    pub fn solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    pub fn cost(&self) -> Option<u32> {
        match &self.outcome {
            Outcome::Solved { cost, .. } => Some(*cost),
            _ => None,
        }
    }

    pub fn solution(&self) -> Option<&[Path]> {
        match &self.outcome {
            Outcome::Solved { solution, .. } => Some(solution),
            _ => None,
        }
    }
}

/// One recorded merge-or-split decision, emitted by [`solve_traced`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeDecision {
    /// Representatives of the two groups, lower first.
    pub pair: (usize, usize),
    /// The pair's conflict count at decision time.
    pub conflicts: u32,
    pub head_cost: u32,
    /// Cost at the head of the node list after the pop, if any.
    pub next_cost: Option<u32>,
    pub merged: bool,
}

/// A constraint-tree node.
struct CtNode {
    partition: Vec<MetaAgent>,
    /// Constraints plus the opposing agent of the conflict that spawned
    /// each; the opponent identifies constraints internal to a merge.
    constraints: Vec<(Constraint, usize)>,
    /// One path per original agent.
    paths: Vec<Path>,
    cost: u32,
    conflicts: Vec<Conflict>,
    seq: u64,
}

impl CtNode {
    fn meta_index_of(&self, agent: usize) -> usize {
        self.partition
            .iter()
            .position(|m| m.contains(agent))
            .expect("every agent belongs to exactly one group")
    }
}

struct Engine<'a> {
    instance: &'a Instance,
    cache: DistanceCache,
    policy: PolicyState,
    stats: SearchStats,
    limits: Limits,
    next_seq: u64,
    open: BinaryHeap<Reverse<(u32, u64, usize)>>,
    slots: Vec<Option<CtNode>>,
}

impl<'a> Engine<'a> {
    fn new(instance: &'a Instance, config: &SolverConfig, limits: Limits) -> Self {
        Engine {
            instance,
            cache: DistanceCache::new(),
            policy: PolicyState::new(config.seed),
            stats: SearchStats::default(),
            limits,
            next_seq: 0,
            open: BinaryHeap::new(),
            slots: Vec::new(),
        }
    }

    fn constraint_set_for(
        constraints: &[(Constraint, usize)],
        meta: &MetaAgent,
    ) -> ConstraintSet {
        ConstraintSet::from_constraints(
            constraints
                .iter()
                .filter(|(c, _)| meta.contains(c.agent))
                .map(|(c, _)| c),
        )
    }

    /// Plans every group of `partition` under `constraints` and assembles
    /// the per-agent path vector.
    fn plan_partition(
        &mut self,
        partition: &[MetaAgent],
        constraints: &[(Constraint, usize)],
    ) -> Result<Vec<Path>, PlanError> {
        let mut paths: Vec<Option<Path>> = vec![None; self.instance.num_agents()];
        for meta in partition {
            let set = Self::constraint_set_for(constraints, meta);
            let member_paths = plan_meta(
                self.instance.map(),
                meta,
                self.instance.agents(),
                &set,
                &mut self.cache,
                &mut self.stats,
                &self.limits,
            )?;
            for (&id, path) in meta.members().iter().zip(member_paths) {
                paths[id] = Some(path);
            }
        }
        Ok(paths.into_iter().map(Option::unwrap).collect())
    }

    fn make_node(
        &mut self,
        partition: Vec<MetaAgent>,
        constraints: Vec<(Constraint, usize)>,
        paths: Vec<Path>,
    ) -> CtNode {
        let cost = sic(&paths, self.instance).expect("planned paths end at their goals");
        let conflicts = detect_conflicts(&paths);
        let seq = self.next_seq;
        self.next_seq += 1;
        CtNode {
            partition,
            constraints,
            paths,
            cost,
            conflicts,
            seq,
        }
    }

    fn push(&mut self, node: CtNode) {
        let key = (node.cost, node.seq, self.slots.len());
        self.slots.push(Some(node));
        self.open.push(Reverse(key));
    }

    fn pop(&mut self) -> Option<CtNode> {
        let Reverse((_, _, slot)) = self.open.pop()?;
        Some(self.slots[slot].take().expect("open entries are live"))
    }

    fn peek_cost(&self) -> Option<u32> {
        self.open.peek().map(|Reverse((cost, _, _))| *cost)
    }

    fn reset_open(&mut self) {
        self.open.clear();
        self.slots.clear();
    }

    /// Replans just the group containing `agent` after `node`'s constraints
    /// were extended, producing a child node. `None` means the replan found
    /// no path and the child is discarded.
    fn child_with_constraint(
        &mut self,
        node: &CtNode,
        constraint: Constraint,
        opponent: usize,
    ) -> Result<Option<CtNode>, PlanError> {
        let mut constraints = node.constraints.clone();
        constraints.push((constraint, opponent));
        let meta = node.partition[node.meta_index_of(constraint.agent)].clone();
        let set = Self::constraint_set_for(&constraints, &meta);
        let planned = plan_meta(
            self.instance.map(),
            &meta,
            self.instance.agents(),
            &set,
            &mut self.cache,
            &mut self.stats,
            &self.limits,
        );
        let member_paths = match planned {
            Ok(paths) => paths,
            Err(PlanError::NoPath) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut paths = node.paths.clone();
        for (&id, path) in meta.members().iter().zip(member_paths) {
            paths[id] = path;
        }
        let child = self.make_node(node.partition.clone(), constraints, paths);
        debug_assert!(child.cost >= node.cost, "split children never get cheaper");
        Ok(Some(child))
    }

    /// Standard split: two children, each forbidding one side of the
    /// conflict for one agent. Children whose replan fails are dropped.
    fn split(&mut self, node: &CtNode, conflict: &Conflict) -> Result<Vec<CtNode>, PlanError> {
        let (a, b) = conflict.agents;
        let (site_a, site_b) = match conflict.site {
            ConflictSite::Vertex(p) => (ConstraintSite::Vertex(p), ConstraintSite::Vertex(p)),
            ConflictSite::Edge(from, to) => (
                ConstraintSite::Edge { from, to },
                ConstraintSite::Edge { from: to, to: from },
            ),
        };
        let mut children = Vec::new();
        for (agent, opponent, site) in [(a, b, site_a), (b, a, site_b)] {
            let constraint = Constraint {
                agent,
                time: conflict.time,
                site,
            };
            if let Some(child) = self.child_with_constraint(node, constraint, opponent)? {
                children.push(child);
            }
        }
        Ok(children)
    }

    /// Merge without restart: the pair becomes one group, constraints
    /// between its members are discarded, external constraints naming a
    /// member stay applied to that member, and only the new group is
    /// replanned.
    fn merge(&mut self, node: &CtNode, mi: usize, mj: usize) -> Result<Option<CtNode>, PlanError> {
        let merged = MetaAgent::merged(&node.partition[mi], &node.partition[mj]);
        let constraints: Vec<(Constraint, usize)> = node
            .constraints
            .iter()
            .filter(|(c, opponent)| !(merged.contains(c.agent) && merged.contains(*opponent)))
            .cloned()
            .collect();
        let mut partition: Vec<MetaAgent> = node
            .partition
            .iter()
            .enumerate()
            .filter(|&(idx, _)| idx != mi && idx != mj)
            .map(|(_, m)| m.clone())
            .collect();
        partition.push(merged.clone());

        let set = Self::constraint_set_for(&constraints, &merged);
        let planned = plan_meta(
            self.instance.map(),
            &merged,
            self.instance.agents(),
            &set,
            &mut self.cache,
            &mut self.stats,
            &self.limits,
        );
        let member_paths = match planned {
            Ok(paths) => paths,
            Err(PlanError::NoPath) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut paths = node.paths.clone();
        for (&id, path) in merged.members().iter().zip(member_paths) {
            paths[id] = path;
        }
        Ok(Some(self.make_node(partition, constraints, paths)))
    }

    /// Merge with restart: a fresh unconstrained root over the updated
    /// partition. The caller resets the node list to just this node; the
    /// partition change is permanent for the rest of the run.
    fn merge_restart(
        &mut self,
        node: &CtNode,
        mi: usize,
        mj: usize,
    ) -> Result<Option<CtNode>, PlanError> {
        let merged = MetaAgent::merged(&node.partition[mi], &node.partition[mj]);
        let mut partition: Vec<MetaAgent> = node
            .partition
            .iter()
            .enumerate()
            .filter(|&(idx, _)| idx != mi && idx != mj)
            .map(|(_, m)| m.clone())
            .collect();
        partition.push(merged);
        match self.plan_partition(&partition, &[]) {
            Ok(paths) => Ok(Some(self.make_node(partition, Vec::new(), paths))),
            Err(PlanError::NoPath) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Solves an instance, returning a minimum sum-of-costs solution, or
/// `Unsolvable`/`Timeout` with the statistics gathered so far. Runs are
/// deterministic for a fixed configuration, seed included.
pub fn solve(instance: &Instance, config: &SolverConfig) -> SolveResult {
    run(instance, config, None)
}

/// Like [`solve`], additionally recording every merge-or-split decision
/// made on a size-eligible conflicting pair.
pub fn solve_traced(instance: &Instance, config: &SolverConfig) -> (SolveResult, Vec<MergeDecision>) {
    let mut trace = Vec::new();
    let result = run(instance, config, Some(&mut trace));
    (result, trace)
}

fn run(
    instance: &Instance,
    config: &SolverConfig,
    mut trace: Option<&mut Vec<MergeDecision>>,
) -> SolveResult {
    let started = Instant::now();
    let limits = Limits {
        node_cap: config.node_limit,
        deadline: config.time_limit.map(|t| started + t),
    };
    let mut engine = Engine::new(instance, config, limits);

    let finish = |engine: Engine<'_>, outcome: Outcome| {
        let mut stats = engine.stats;
        stats.wall_time = started.elapsed().as_secs_f64();
        SolveResult { outcome, stats }
    };

    let singletons: Vec<MetaAgent> = (0..instance.num_agents()).map(MetaAgent::single).collect();
    match engine.plan_partition(&singletons, &[]) {
        Ok(paths) => {
            let root = engine.make_node(singletons, Vec::new(), paths);
            engine.push(root);
        }
        Err(PlanError::NoPath) => return finish(engine, Outcome::Unsolvable),
        Err(PlanError::Budget) => return finish(engine, Outcome::Timeout),
    }

    loop {
        let node_cap_hit = config
            .node_limit
            .is_some_and(|cap| engine.stats.expanded >= cap);
        let deadline_hit = config
            .time_limit
            .is_some_and(|t| started.elapsed() >= t);
        if node_cap_hit || deadline_hit {
            return finish(engine, Outcome::Timeout);
        }

        let Some(node) = engine.pop() else {
            return finish(engine, Outcome::Unsolvable);
        };
        engine.stats.pops += 1;

        if node.conflicts.is_empty() {
            debug_assert!(validate_solution(instance, &node.paths));
            let outcome = Outcome::Solved {
                cost: node.cost,
                solution: node.paths,
            };
            return finish(engine, outcome);
        }

        let conflict = node.conflicts[0];
        match config.conflict_counting {
            ConflictCounting::ChosenPerPop => {
                engine.policy.counter.record(conflict.agents.0, conflict.agents.1);
            }
            ConflictCounting::AllPerPop => {
                for c in &node.conflicts {
                    engine.policy.counter.record(c.agents.0, c.agents.1);
                }
            }
        }

        let mi = node.meta_index_of(conflict.agents.0);
        let mj = node.meta_index_of(conflict.agents.1);
        debug_assert_ne!(mi, mj, "group-internal conflicts cannot occur");
        let conflicts_seen = engine
            .policy
            .counter
            .cross_count(&node.partition[mi], &node.partition[mj]);
        let size_ok =
            node.partition[mi].size() + node.partition[mj].size() <= config.max_meta_size;

        let merge = size_ok
            && match config.variant {
                Variant::Cbs => false,
                Variant::MaCbs | Variant::MaCbsR => {
                    should_merge_fixed(conflicts_seen, config.merge_threshold)
                }
                Variant::Randomized => {
                    let reprs = (
                        node.partition[mi].representative(),
                        node.partition[mj].representative(),
                    );
                    engine
                        .policy
                        .should_merge_randomized(reprs, conflicts_seen, config.merge_threshold)
                }
                Variant::Delayed => should_merge_delayed(
                    conflicts_seen,
                    config.merge_threshold,
                    node.cost,
                    engine.peek_cost(),
                ),
            };

        if size_ok {
            if let Some(log) = trace.as_deref_mut() {
                let ra = node.partition[mi].representative();
                let rb = node.partition[mj].representative();
                log.push(MergeDecision {
                    pair: (ra.min(rb), ra.max(rb)),
                    conflicts: conflicts_seen,
                    head_cost: node.cost,
                    next_cost: engine.peek_cost(),
                    merged: merge,
                });
            }
        }

        if merge && config.variant.restarts_on_merge() {
            engine.stats.restarts += 1;
            engine.reset_open();
            match engine.merge_restart(&node, mi, mj) {
                Ok(Some(root)) => engine.push(root),
                Ok(None) => return finish(engine, Outcome::Unsolvable),
                Err(_) => return finish(engine, Outcome::Timeout),
            }
        } else if merge {
            engine.stats.merges += 1;
            match engine.merge(&node, mi, mj) {
                Ok(Some(child)) => engine.push(child),
                Ok(None) => {}
                Err(_) => return finish(engine, Outcome::Timeout),
            }
        } else {
            engine.stats.splits += 1;
            match engine.split(&node, &conflict) {
                Ok(children) => {
                    for child in children {
                        engine.push(child);
                    }
                }
                Err(_) => return finish(engine, Outcome::Timeout),
            }
        }
    }
}
