//! Benchmark harness: run solver variants over instance sets, aggregate the
//! search statistics, and render the results as CSV or markdown tables.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::conflict::detect_conflicts;
use crate::generate::{gen_puzzle_instance, gen_random_scenario, make_bottleneck_scene};
use crate::grid::Instance;
use crate::lowlevel::{plan_meta, ConstraintSet, Limits, MetaAgent};
use crate::movingai::{instances_from_scenario, parse_map, parse_scenario};
use crate::solver::{solve, MergeThreshold, Outcome, SearchStats, SolverConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            other => Err(format!("unknown format '{other}' (expected csv or md)")),
        }
    }
}

/// Where a run's instances come from. Exactly one source per run.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    /// Consecutive chunks of `agents` records from a scenario file.
    ScenChunks {
        map: PathBuf,
        scen: PathBuf,
        agents: usize,
        count: Option<usize>,
    },
    /// Seeded 4x4 puzzle scenes; seeds run `gen_seed..gen_seed + count`.
    Puzzle { tiles: u32, count: u64, gen_seed: u64 },
    /// Seeded random scenes on a map file.
    Random {
        map: PathBuf,
        agents: usize,
        count: u64,
        gen_seed: u64,
    },
    /// The cartesian family of bottleneck scenes.
    Bottleneck { corridors: Vec<u32>, chambers: Vec<u32> },
}

/// One benchmark run: a source, the variant/threshold grid, and limits.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: InstanceSource,
    pub variants: Vec<Variant>,
    pub thresholds: Vec<MergeThreshold>,
    pub max_meta_size: usize,
    pub seed: u64,
    pub node_limit: Option<u64>,
    pub time_limit: Option<f64>,
}

impl RunConfig {
    pub fn new(source: InstanceSource) -> Self {
        RunConfig {
            source,
            variants: vec![Variant::Cbs],
            thresholds: vec![MergeThreshold::Unbounded],
            max_meta_size: 2,
            seed: 0,
            node_limit: None,
            time_limit: None,
        }
    }

    fn solver_config(&self, variant: Variant, threshold: MergeThreshold) -> SolverConfig {
        let mut config = SolverConfig::new(variant, threshold);
        config.max_meta_size = self.max_meta_size;
        config.seed = self.seed;
        config.node_limit = self.node_limit;
        config.time_limit = self.time_limit.map(Duration::from_secs_f64);
        config
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadInput { path: PathBuf, message: String },
    #[error("bench spec line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("the source produced no usable instances")]
    NoInstances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Solved,
    Unsolvable,
    Timeout,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Solved => "solved",
            CellStatus::Unsolvable => "unsolvable",
            CellStatus::Timeout => "timeout",
        })
    }
}

/// Result of one (instance, variant, threshold) cell.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub instance: String,
    pub variant: Variant,
    pub threshold: MergeThreshold,
    pub cost: Option<u32>,
    pub status: CellStatus,
    pub stats: SearchStats,
}

/// Totals per (variant, threshold) over solved cells only; timeouts and
/// unsolvable cells count toward `attempted` but not the sums.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub variant: Variant,
    pub threshold: MergeThreshold,
    pub attempted: usize,
    pub solved: usize,
    pub cost: u64,
    pub expanded: u64,
    pub expanded_weighted: u64,
    pub pops: u64,
    pub splits: u64,
    pub merges: u64,
    pub restarts: u64,
    pub wall_time: f64,
}

impl Aggregate {
    pub fn coverage(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            100.0 * self.solved as f64 / self.attempted as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    pub totals: Vec<Aggregate>,
}

/// Loads or generates the run's instances. Instances that fail to build
/// (for example a scenario chunk with repeated endpoints) are reported on
/// stderr and skipped; the run continues with the rest.
pub fn materialize_instances(
    source: &InstanceSource,
) -> Result<Vec<(String, Instance)>, BenchError> {
    let mut out = Vec::new();
    match source {
        InstanceSource::ScenChunks {
            map,
            scen,
            agents,
            count,
        } => {
            let map_text = read(map)?;
            let grid = parse_map(&map_text).map_err(|e| BenchError::BadInput {
                path: map.clone(),
                message: e.to_string(),
            })?;
            let scen_text = read(scen)?;
            let scenario = parse_scenario(&scen_text).map_err(|e| BenchError::BadInput {
                path: scen.clone(),
                message: e.to_string(),
            })?;
            let chunks = instances_from_scenario(&grid, &scenario, *agents);
            let take = count.unwrap_or(chunks.len());
            for (i, chunk) in chunks.into_iter().take(take).enumerate() {
                let id = format!("{}#{i}", scen.display());
                match chunk {
                    Ok(instance) => out.push((id, instance)),
                    Err(e) => eprintln!("warning: skipping {id}: {e}"),
                }
            }
        }
        InstanceSource::Puzzle {
            tiles,
            count,
            gen_seed,
        } => {
            for seed in *gen_seed..gen_seed + count {
                let id = format!("puzzle{tiles}-s{seed}");
                match gen_puzzle_instance(*tiles, seed) {
                    Ok(instance) => out.push((id, instance)),
                    Err(e) => eprintln!("warning: skipping {id}: {e}"),
                }
            }
        }
        InstanceSource::Random {
            map,
            agents,
            count,
            gen_seed,
        } => {
            let map_text = read(map)?;
            let grid = parse_map(&map_text).map_err(|e| BenchError::BadInput {
                path: map.clone(),
                message: e.to_string(),
            })?;
            for seed in *gen_seed..gen_seed + count {
                let id = format!("random{agents}-s{seed}");
                match gen_random_scenario(&grid, *agents, seed) {
                    Ok(instance) => out.push((id, instance)),
                    Err(e) => eprintln!("warning: skipping {id}: {e}"),
                }
            }
        }
        InstanceSource::Bottleneck { corridors, chambers } => {
            for &corridor in corridors {
                for &chamber in chambers {
                    let id = format!("bottleneck-c{corridor}-h{chamber}");
                    match make_bottleneck_scene(corridor, chamber) {
                        Ok(instance) => out.push((id, instance)),
                        Err(e) => eprintln!("warning: skipping {id}: {e}"),
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(BenchError::NoInstances);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every (instance, variant, threshold) cell exactly once and
/// aggregates the totals.
///
/// Cells run in parallel; rows come back ordered by (instance, variant,
/// threshold) regardless of completion order, so reports are reproducible
/// byte-for-byte apart from wall times.
pub fn run_bench(config: &RunConfig) -> Result<RunReport, BenchError> {
    let instances = materialize_instances(&config.source)?;
    let mut cells = Vec::new();
    for (id, instance) in &instances {
        for &variant in &config.variants {
            for &threshold in &config.thresholds {
                cells.push((id.clone(), instance, variant, threshold));
            }
        }
    }
    let rows: Vec<RunRow> = cells
        .par_iter()
        .map(|(id, instance, variant, threshold)| {
            let solver_config = config.solver_config(*variant, *threshold);
            let result = solve(instance, &solver_config);
            let (status, cost) = match &result.outcome {
                Outcome::Solved { cost, .. } => (CellStatus::Solved, Some(*cost)),
                Outcome::Unsolvable => (CellStatus::Unsolvable, None),
                Outcome::Timeout => (CellStatus::Timeout, None),
            };
            RunRow {
                instance: id.clone(),
                variant: *variant,
                threshold: *threshold,
                cost,
                status,
                stats: result.stats,
            }
        })
        .collect();
    let totals = aggregate(&rows, &config.variants, &config.thresholds);
    Ok(RunReport { rows, totals })
}

/// Column sums per (variant, threshold) over solved rows, in grid order.
/// Summation makes the totals independent of row order.
pub fn aggregate(
    rows: &[RunRow],
    variants: &[Variant],
    thresholds: &[MergeThreshold],
) -> Vec<Aggregate> {
    let mut totals = Vec::new();
    for &variant in variants {
        for &threshold in thresholds {
            let mut agg = Aggregate {
                variant,
                threshold,
                attempted: 0,
                solved: 0,
                cost: 0,
                expanded: 0,
                expanded_weighted: 0,
                pops: 0,
                splits: 0,
                merges: 0,
                restarts: 0,
                wall_time: 0.0,
            };
            for row in rows
                .iter()
                .filter(|r| r.variant == variant && r.threshold == threshold)
            {
                agg.attempted += 1;
                if row.status == CellStatus::Solved {
                    agg.solved += 1;
                    agg.cost += u64::from(row.cost.unwrap_or(0));
                    agg.expanded += row.stats.expanded;
                    agg.expanded_weighted += row.stats.expanded_weighted;
                    agg.pops += row.stats.pops;
                    agg.splits += row.stats.splits;
                    agg.merges += row.stats.merges;
                    agg.restarts += row.stats.restarts;
                    agg.wall_time += row.stats.wall_time;
                }
            }
            totals.push(agg);
        }
    }
    totals
}

const ROW_HEADER: [&str; 12] = [
    "instance",
    "variant",
    "B",
    "cost",
    "solved",
    "expanded",
    "expanded_weighted",
    "pops",
    "splits",
    "merges",
    "restarts",
    "time_s",
];

const TOTAL_HEADER: [&str; 13] = [
    "variant",
    "B",
    "attempted",
    "solved",
    "coverage",
    "cost",
    "expanded",
    "expanded_weighted",
    "pops",
    "splits",
    "merges",
    "restarts",
    "time_s",
];

/// The cell values of one row; shared by both renderers so the formats
/// always carry identical numbers.
pub fn row_cells(row: &RunRow) -> Vec<String> {
    vec![
        row.instance.clone(),
        row.variant.to_string(),
        row.threshold.to_string(),
        row.cost.map_or_else(|| "-".to_string(), |c| c.to_string()),
        row.status.to_string(),
        row.stats.expanded.to_string(),
        row.stats.expanded_weighted.to_string(),
        row.stats.pops.to_string(),
        row.stats.splits.to_string(),
        row.stats.merges.to_string(),
        row.stats.restarts.to_string(),
        format!("{:.3}", row.stats.wall_time),
    ]
}

pub fn total_cells(agg: &Aggregate) -> Vec<String> {
    vec![
        agg.variant.to_string(),
        agg.threshold.to_string(),
        agg.attempted.to_string(),
        agg.solved.to_string(),
        format!("{:.1}%", agg.coverage()),
        agg.cost.to_string(),
        agg.expanded.to_string(),
        agg.expanded_weighted.to_string(),
        agg.pops.to_string(),
        agg.splits.to_string(),
        agg.merges.to_string(),
        agg.restarts.to_string(),
        format!("{:.3}", agg.wall_time),
    ]
}

pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&ROW_HEADER.join(","));
    out.push('\n');
    for row in &report.rows {
        out.push_str(&row_cells(row).join(","));
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&TOTAL_HEADER.join(","));
    out.push('\n');
    for agg in &report.totals {
        out.push_str(&total_cells(agg).join(","));
        out.push('\n');
    }
    out
}

fn markdown_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
    for cells in rows {
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::from("## Per-instance results\n\n");
    out.push_str(&markdown_table(&ROW_HEADER, report.rows.iter().map(row_cells)));
    out.push_str("\n## Totals per configuration (solved instances only)\n\n");
    out.push_str(&markdown_table(
        &TOTAL_HEADER,
        report.totals.iter().map(total_cells),
    ));
    out
}

pub fn render(report: &RunReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => render_csv(report),
        OutputFormat::Markdown => render_markdown(report),
    }
}

/// Parses the declarative bench spec format: one directive per line,
/// `#` comments, exactly one `source` directive.
///
/// ```text
/// # threshold sweep on generated puzzle scenes
/// source puzzle tiles=6 count=100 gen-seed=0
/// variants ma-cbs ma-cbs-r
/// B 1 4 16 64
/// max-meta 2
/// seed 7
/// node-limit 500000
/// time-limit 30
/// ```
///
/// File sources instead use `source scen MAP SCEN agents=N [count=K]` or
/// `source random MAP agents=N count=K [gen-seed=S]`; the scene family is
/// `source bottleneck corridors=1..5 chambers=2..5`. Relative paths resolve
/// against `base`.
pub fn parse_bench_spec(text: &str, base: Option<&Path>) -> Result<RunConfig, BenchError> {
    let mut source: Option<InstanceSource> = None;
    let mut variants: Vec<Variant> = Vec::new();
    let mut thresholds: Vec<MergeThreshold> = Vec::new();
    let mut max_meta_size = 2usize;
    let mut seed = 0u64;
    let mut node_limit = None;
    let mut time_limit = None;

    let err = |line: usize, message: String| BenchError::Spec { line, message };
    let resolve = |raw: &str| -> PathBuf {
        let path = PathBuf::from(raw);
        match (path.is_relative(), base) {
            (true, Some(dir)) => dir.join(path),
            _ => path,
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let directive = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match directive {
            "source" => {
                if source.is_some() {
                    return Err(err(line_no, "exactly one source per run".into()));
                }
                source = Some(parse_source(&rest, &resolve).map_err(|m| err(line_no, m))?);
            }
            "variants" => {
                for token in &rest {
                    variants.push(token.parse().map_err(|m| err(line_no, m))?);
                }
            }
            "B" => {
                for token in &rest {
                    thresholds.push(token.parse().map_err(|m| err(line_no, m))?);
                }
            }
            "max-meta" => {
                max_meta_size = parse_one(&rest).map_err(|m| err(line_no, m))?;
            }
            "seed" => {
                seed = parse_one(&rest).map_err(|m| err(line_no, m))?;
            }
            "node-limit" => {
                node_limit = Some(parse_one(&rest).map_err(|m| err(line_no, m))?);
            }
            "time-limit" => {
                time_limit = Some(parse_one(&rest).map_err(|m| err(line_no, m))?);
            }
            other => {
                return Err(err(line_no, format!("unknown directive '{other}'")));
            }
        }
    }

    let source = source.ok_or_else(|| err(0, "missing 'source' directive".into()))?;
    if variants.is_empty() {
        return Err(err(0, "missing 'variants' directive".into()));
    }
    if thresholds.is_empty() {
        return Err(err(0, "missing 'B' directive".into()));
    }
    Ok(RunConfig {
        source,
        variants,
        thresholds,
        max_meta_size,
        seed,
        node_limit,
        time_limit,
    })
}

fn parse_one<T: FromStr>(tokens: &[&str]) -> Result<T, String> {
    match tokens {
        [one] => one
            .parse()
            .map_err(|_| format!("cannot parse value '{one}'")),
        _ => Err(format!("expected exactly one value, got {}", tokens.len())),
    }
}

fn keyed<'a>(tokens: &'a [&'a str], key: &str) -> Option<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn keyed_num<T: FromStr>(tokens: &[&str], key: &str) -> Result<Option<T>, String> {
    match keyed(tokens, key) {
        None => Ok(None),
        Some(value) => value
            .parse()
            .map(Some)
            .map_err(|_| format!("bad value for {key}: '{value}'")),
    }
}

fn parse_range(spec: &str) -> Result<Vec<u32>, String> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo.parse().map_err(|_| format!("bad range '{spec}'"))?;
        let hi: u32 = hi.parse().map_err(|_| format!("bad range '{spec}'"))?;
        if lo > hi {
            return Err(format!("empty range '{spec}'"));
        }
        Ok((lo..=hi).collect())
    } else {
        spec.parse()
            .map(|v| vec![v])
            .map_err(|_| format!("bad range '{spec}'"))
    }
}

fn parse_source(
    tokens: &[&str],
    resolve: &dyn Fn(&str) -> PathBuf,
) -> Result<InstanceSource, String> {
    let Some((kind, rest)) = tokens.split_first() else {
        return Err("empty source".into());
    };
    match *kind {
        "scen" => {
            let [map, scen, ..] = rest else {
                return Err("source scen MAP SCEN agents=N [count=K]".into());
            };
            let agents =
                keyed_num(rest, "agents")?.ok_or("source scen needs agents=N".to_string())?;
            Ok(InstanceSource::ScenChunks {
                map: resolve(map),
                scen: resolve(scen),
                agents,
                count: keyed_num(rest, "count")?,
            })
        }
        "puzzle" => Ok(InstanceSource::Puzzle {
            tiles: keyed_num(rest, "tiles")?.ok_or("source puzzle needs tiles=N".to_string())?,
            count: keyed_num(rest, "count")?.unwrap_or(1),
            gen_seed: keyed_num(rest, "gen-seed")?.unwrap_or(0),
        }),
        "random" => {
            let [map, ..] = rest else {
                return Err("source random MAP agents=N count=K [gen-seed=S]".into());
            };
            Ok(InstanceSource::Random {
                map: resolve(map),
                agents: keyed_num(rest, "agents")?
                    .ok_or("source random needs agents=N".to_string())?,
                count: keyed_num(rest, "count")?.unwrap_or(1),
                gen_seed: keyed_num(rest, "gen-seed")?.unwrap_or(0),
            })
        }
        "bottleneck" => Ok(InstanceSource::Bottleneck {
            corridors: parse_range(keyed(rest, "corridors").unwrap_or("1..5"))?,
            chambers: parse_range(keyed(rest, "chambers").unwrap_or("2..5"))?,
        }),
        other => Err(format!("unknown source kind '{other}'")),
    }
}

/// Estimate of the merge threshold from measured planning effort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEstimate {
    pub threshold: u32,
    /// Mean expansions of an unconstrained single-agent plan.
    pub single_expansions: f64,
    /// Mean expansions of an unconstrained two-agent joint plan over the
    /// sampled conflicting pairs.
    pub joint_expansions: f64,
    pub conflicting_pairs: usize,
    /// True when no conflicting pair was found and the estimate fell back
    /// to 1.
    pub degenerate: bool,
}

/// Estimates the merge threshold as the ratio of joint to single planning
/// effort, measured in low-level expansions over the sample.
///
/// Every agent is planned alone; each pair whose independent paths collide
/// is then planned jointly. The estimate is the floored ratio of the two
/// means, clamped to at least 1. With no conflicting pair in the sample the
/// estimate degenerates to 1.
pub fn estimate_threshold(sample: &[Instance]) -> ThresholdEstimate {
    let mut single_total = 0u64;
    let mut single_plans = 0u64;
    let mut joint_total = 0u64;
    let mut joint_plans = 0u64;

    for instance in sample {
        let mut cache = crate::heuristic::DistanceCache::new();
        let empty = ConstraintSet::new();
        let mut paths = Vec::with_capacity(instance.num_agents());
        for agent in 0..instance.num_agents() {
            let mut stats = SearchStats::default();
            let planned = plan_meta(
                instance.map(),
                &MetaAgent::single(agent),
                instance.agents(),
                &empty,
                &mut cache,
                &mut stats,
                &Limits::none(),
            );
            single_total += stats.expanded;
            single_plans += 1;
            match planned {
                Ok(mut member_paths) => paths.push(member_paths.remove(0)),
                Err(_) => continue,
            }
        }
        if paths.len() != instance.num_agents() {
            continue;
        }
        let mut pairs: Vec<(usize, usize)> = detect_conflicts(&paths)
            .into_iter()
            .map(|c| c.agents)
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        for (a, b) in pairs {
            let meta = MetaAgent::merged(&MetaAgent::single(a), &MetaAgent::single(b));
            let mut stats = SearchStats::default();
            let planned = plan_meta(
                instance.map(),
                &meta,
                instance.agents(),
                &empty,
                &mut cache,
                &mut stats,
                &Limits::none(),
            );
            if planned.is_ok() {
                joint_total += stats.expanded;
                joint_plans += 1;
            }
        }
    }

    let single_mean = if single_plans > 0 {
        single_total as f64 / single_plans as f64
    } else {
        0.0
    };
    let joint_mean = if joint_plans > 0 {
        joint_total as f64 / joint_plans as f64
    } else {
        0.0
    };
    if joint_plans == 0 || single_mean == 0.0 {
        eprintln!("warning: no conflicting pair in the sample, falling back to threshold 1");
        return ThresholdEstimate {
            threshold: 1,
            single_expansions: single_mean,
            joint_expansions: joint_mean,
            conflicting_pairs: 0,
            degenerate: true,
        };
    }
    ThresholdEstimate {
        threshold: ((joint_mean / single_mean).floor() as u32).max(1),
        single_expansions: single_mean,
        joint_expansions: joint_mean,
        conflicting_pairs: joint_plans as usize,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gen_puzzle_instance;

    fn bottleneck_config() -> RunConfig {
        let mut config = RunConfig::new(InstanceSource::Bottleneck {
            corridors: vec![1, 2],
            chambers: vec![2, 3],
        });
        config.variants = vec![Variant::MaCbs, Variant::MaCbsR];
        config.thresholds = vec![MergeThreshold::Finite(1), MergeThreshold::Finite(2)];
        config
    }

    #[test]
    fn every_cell_runs_exactly_once() {
        let report = run_bench(&bottleneck_config()).unwrap();
        assert_eq!(report.rows.len(), 4 * 2 * 2);
        assert_eq!(report.totals.len(), 2 * 2);
        for agg in &report.totals {
            assert_eq!(agg.attempted, 4);
            assert_eq!(agg.solved, 4);
            assert!((agg.coverage() - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn totals_are_column_sums() {
        let report = run_bench(&bottleneck_config()).unwrap();
        for agg in &report.totals {
            let expanded: u64 = report
                .rows
                .iter()
                .filter(|r| {
                    r.variant == agg.variant
                        && r.threshold == agg.threshold
                        && r.status == CellStatus::Solved
                })
                .map(|r| r.stats.expanded)
                .sum();
            assert_eq!(agg.expanded, expanded);
        }
    }

    #[test]
    fn totals_ignore_row_order() {
        let config = bottleneck_config();
        let report = run_bench(&config).unwrap();
        let mut shuffled = report.rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let again = aggregate(&shuffled, &config.variants, &config.thresholds);
        for (a, b) in report.totals.iter().zip(&again) {
            assert_eq!(a.expanded, b.expanded);
            assert_eq!(a.cost, b.cost);
            assert_eq!(a.solved, b.solved);
        }
    }

    fn strip_time(text: &str) -> String {
        // drops the trailing time cell of every data row
        text.lines()
            .map(|line| {
                let cut = line.rfind(|c| c == ',' || c == '|').unwrap_or(line.len());
                &line[..cut]
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn reports_are_reproducible_except_wall_time() {
        let config = bottleneck_config();
        let a = render_csv(&run_bench(&config).unwrap());
        let b = render_csv(&run_bench(&config).unwrap());
        assert_eq!(strip_time(&a), strip_time(&b));
    }

    #[test]
    fn csv_and_markdown_carry_identical_cells() {
        let report = run_bench(&bottleneck_config()).unwrap();
        // both renderers consume the same cell strings; verify the markdown
        // table embeds exactly the CSV cells row by row
        let csv = render_csv(&report);
        let md = render_markdown(&report);
        let csv_rows: Vec<&str> = csv.lines().skip(1).take(report.rows.len()).collect();
        let md_rows: Vec<&str> = md
            .lines()
            .filter(|l| l.starts_with("| ") && !l.contains("---"))
            .skip(1) // header
            .take(report.rows.len())
            .collect();
        for (c, m) in csv_rows.iter().zip(&md_rows) {
            let from_csv: Vec<&str> = c.split(',').collect();
            let from_md: Vec<&str> = m.trim_matches('|').split('|').map(str::trim).collect();
            assert_eq!(from_csv, from_md);
        }
    }

    #[test]
    fn timeout_rows_are_flagged_and_excluded() {
        let mut config = bottleneck_config();
        config.variants = vec![Variant::Cbs];
        config.thresholds = vec![MergeThreshold::Unbounded];
        config.node_limit = Some(1);
        let report = run_bench(&config).unwrap();
        assert!(report.rows.iter().all(|r| r.status == CellStatus::Timeout));
        let agg = &report.totals[0];
        assert_eq!(agg.solved, 0);
        assert_eq!(agg.expanded, 0, "timeouts stay out of the sums");
        assert_eq!(agg.attempted, 4);
    }

    #[test]
    fn spec_parsing_round_trip() {
        let text = "\
# comment
source puzzle tiles=6 count=10 gen-seed=3
variants cbs ma-cbs-r
B 1 16 inf
max-meta 2
seed 9
node-limit 1000
time-limit 2.5
";
        let config = parse_bench_spec(text, None).unwrap();
        assert_eq!(
            config.source,
            InstanceSource::Puzzle {
                tiles: 6,
                count: 10,
                gen_seed: 3
            }
        );
        assert_eq!(config.variants, vec![Variant::Cbs, Variant::MaCbsR]);
        assert_eq!(
            config.thresholds,
            vec![
                MergeThreshold::Finite(1),
                MergeThreshold::Finite(16),
                MergeThreshold::Unbounded
            ]
        );
        assert_eq!(config.seed, 9);
        assert_eq!(config.node_limit, Some(1000));
        assert_eq!(config.time_limit, Some(2.5));
    }

    #[test]
    fn spec_errors_carry_line_numbers() {
        let text = "source puzzle tiles=6\nB 1\nvariants cbs\nwat 3\n";
        match parse_bench_spec(text, None).unwrap_err() {
            BenchError::Spec { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_bench_spec("variants cbs\nB 1\n", None).unwrap_err(),
            BenchError::Spec { line: 0, .. }
        ));
        let two_sources = "source puzzle tiles=2\nsource puzzle tiles=3\nvariants cbs\nB 1\n";
        assert!(matches!(
            parse_bench_spec(two_sources, None).unwrap_err(),
            BenchError::Spec { line: 2, .. }
        ));
    }

    #[test]
    fn threshold_estimate_on_conflicting_scenes() {
        let sample: Vec<Instance> = (0..5)
            .map(|seed| gen_puzzle_instance(4, seed).unwrap())
            .collect();
        let estimate = estimate_threshold(&sample);
        assert!(!estimate.degenerate);
        assert!(estimate.threshold >= 1);
        assert!(estimate.joint_expansions > estimate.single_expansions);
    }

    #[test]
    fn threshold_estimate_degenerates_without_conflicts() {
        let instance = gen_puzzle_instance(1, 0).unwrap();
        let estimate = estimate_threshold(&[instance]);
        assert!(estimate.degenerate);
        assert_eq!(estimate.threshold, 1);
    }
}
