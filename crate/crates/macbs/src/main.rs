//! Command-line harness over the library: solve single instances, run
//! benchmark grids, generate instance files, and tabulate the rent-or-buy
//! model.
//!
//! Exit codes: 0 success, 1 unsolvable, 2 timeout or cap exceeded,
//! 3 input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use macbs::bench::{
    self, estimate_threshold, materialize_instances, parse_bench_spec, InstanceSource,
    OutputFormat,
};
use macbs::generate::{
    gen_puzzle_instance, gen_random_scenario, instance_records, make_bottleneck_scene,
};
use macbs::grid::Instance;
use macbs::model::{worst_case_ratio, randomized_expected_ratio, RestartPolicy};
use macbs::movingai::{
    instance_from_records, parse_map, parse_scenario, write_map, write_scenario, ScenarioFile,
};
use macbs::solver::{solve, MergeThreshold, Outcome, SolverConfig, Variant};

/// Default output directory for generated files and reports.
const OUT_DIR_ENV: &str = "MACBS_OUT_DIR";

const EXIT_UNSOLVABLE: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "macbs", version, about = "Optimal multi-agent path finding benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance read from a map and scenario file.
    Solve(SolveArgs),
    /// Run a benchmark grid described by a spec file.
    Bench(BenchArgs),
    /// Generate instance files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Tabulate worst-case competitive ratios of the merge model.
    Model(ModelArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Map file (.map).
    #[arg(long)]
    map: PathBuf,
    /// Scenario file (.scen); the first --agents records form the instance.
    #[arg(long)]
    scen: PathBuf,
    /// Number of agents to take from the scenario.
    #[arg(long)]
    agents: usize,
    /// Solver variant: cbs, ma-cbs, ma-cbs-r, ma-cbs-r-rand, ma-cbs-r-delayed.
    #[arg(long, default_value = "cbs")]
    variant: Variant,
    /// Merge threshold: a positive integer or 'inf'.
    #[arg(long = "B", default_value = "inf")]
    merge_threshold: MergeThreshold,
    /// Largest allowed combined agent.
    #[arg(long = "max-meta", default_value_t = 2)]
    max_meta: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Cap on total low-level expansions.
    #[arg(long = "node-limit")]
    node_limit: Option<u64>,
    /// Print the per-agent paths as well.
    #[arg(long)]
    paths: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench spec file; see `parse_bench_spec` in the library docs.
    #[arg(long)]
    spec: PathBuf,
    /// Report path; defaults to bench_report.<ext> under $MACBS_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random 4x4 puzzle scenes, one scenario bucket per scene.
    Puzzle {
        #[arg(long)]
        tiles: u32,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-map")]
        out_map: Option<PathBuf>,
        #[arg(long = "out-scen")]
        out_scen: Option<PathBuf>,
    },
    /// Random scenes on an existing map.
    Scenario {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        agents: usize,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-scen")]
        out_scen: Option<PathBuf>,
    },
    /// A two-chamber bottleneck scene with two crossing agents.
    Bottleneck {
        #[arg(long, default_value_t = 1)]
        corridor: u32,
        #[arg(long, default_value_t = 2)]
        chamber: u32,
        #[arg(long = "out-map")]
        out_map: Option<PathBuf>,
        #[arg(long = "out-scen")]
        out_scen: Option<PathBuf>,
    },
    /// Estimate the merge threshold from a sample of scenario instances.
    EstimateB {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        agents: usize,
        /// How many scenario chunks to sample.
        #[arg(long, default_value_t = 5)]
        sample: usize,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Cost of one independent replan.
    #[arg(long = "t11", default_value_t = 1.0)]
    t11: f64,
    /// Cost of solving the combined agent.
    #[arg(long = "t2")]
    t2: f64,
    /// Inclusive threshold range, e.g. 1..8.
    #[arg(long = "B-range", default_value = "1..8", value_parser = parse_b_range)]
    b_range: (u32, u32),
    /// Adversary sweep bound; defaults to 3x the larger of the threshold
    /// and the cost ratio.
    #[arg(long = "m-max")]
    m_max: Option<u32>,
    /// Monte-Carlo trials for the randomized column (0 disables it).
    #[arg(long, default_value_t = 0)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_b_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once("..").ok_or("expected LO..HI")?;
    let lo: u32 = lo.parse().map_err(|_| format!("bad bound '{lo}'"))?;
    let hi: u32 = hi.parse().map_err(|_| format!("bad bound '{hi}'"))?;
    if lo < 1 || lo > hi {
        return Err(format!("empty or zero-based range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Model(args) => cmd_model(args),
    }
}

fn input_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_INPUT)
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_instance(map: &Path, scen: &Path, agents: usize) -> Result<Instance, String> {
    let map_text = fs::read_to_string(map).map_err(|e| format!("{}: {e}", map.display()))?;
    let grid = parse_map(&map_text).map_err(|e| format!("{}: {e}", map.display()))?;
    let scen_text = fs::read_to_string(scen).map_err(|e| format!("{}: {e}", scen.display()))?;
    let scenario = parse_scenario(&scen_text).map_err(|e| format!("{}: {e}", scen.display()))?;
    if scenario.records.len() < agents {
        return Err(format!(
            "{} has {} records, need {agents}",
            scen.display(),
            scenario.records.len()
        ));
    }
    instance_from_records(&grid, &scenario.records[..agents]).map_err(|e| e.to_string())
}

fn cmd_solve(args: SolveArgs) -> ExitCode {
    let instance = match load_instance(&args.map, &args.scen, args.agents) {
        Ok(instance) => instance,
        Err(e) => return input_error(e),
    };
    let mut config = SolverConfig::new(args.variant, args.merge_threshold);
    config.max_meta_size = args.max_meta;
    config.seed = args.seed;
    config.node_limit = args.node_limit;
    config.time_limit = args.time_limit.map(Duration::from_secs_f64);

    let result = solve(&instance, &config);
    let s = &result.stats;
    println!(
        "variant={} B={} agents={}",
        args.variant,
        args.merge_threshold,
        instance.num_agents()
    );
    println!(
        "expanded={} expanded_weighted={} pops={} splits={} merges={} restarts={} time_s={:.3}",
        s.expanded, s.expanded_weighted, s.pops, s.splits, s.merges, s.restarts, s.wall_time
    );
    match result.outcome {
        Outcome::Solved { solution, cost } => {
            println!("solved cost={cost}");
            if args.paths {
                for (i, path) in solution.iter().enumerate() {
                    let cells: Vec<String> =
                        path.iter().map(|p| format!("({},{})", p.x, p.y)).collect();
                    println!("agent {i}: {}", cells.join(" "));
                }
            }
            ExitCode::SUCCESS
        }
        Outcome::Unsolvable => {
            println!("unsolvable");
            ExitCode::from(EXIT_UNSOLVABLE)
        }
        Outcome::Timeout => {
            println!("timeout");
            ExitCode::from(EXIT_TIMEOUT)
        }
    }
}

fn cmd_bench(args: BenchArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.spec) {
        Ok(text) => text,
        Err(e) => return input_error(format!("{}: {e}", args.spec.display())),
    };
    let config = match parse_bench_spec(&text, args.spec.parent()) {
        Ok(config) => config,
        Err(e) => return input_error(e),
    };
    let report = match bench::run_bench(&config) {
        Ok(report) => report,
        Err(e) => return input_error(e),
    };
    let rendered = bench::render(&report, args.format);
    let out = args.out.unwrap_or_else(|| {
        out_dir().join(match args.format {
            OutputFormat::Csv => "bench_report.csv",
            OutputFormat::Markdown => "bench_report.md",
        })
    });
    if let Err(e) = fs::write(&out, rendered) {
        return input_error(format!("{}: {e}", out.display()));
    }
    let solved: usize = report.totals.iter().map(|t| t.solved).sum();
    let attempted: usize = report.totals.iter().map(|t| t.attempted).sum();
    println!("wrote {} ({} rows, {solved}/{attempted} solved)", out.display(), report.rows.len());
    ExitCode::SUCCESS
}

fn write_out(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_gen(command: GenCommand) -> ExitCode {
    let result = match command {
        GenCommand::Puzzle {
            tiles,
            count,
            seed,
            out_map,
            out_scen,
        } => gen_puzzle_files(tiles, count, seed, out_map, out_scen),
        GenCommand::Scenario {
            map,
            agents,
            count,
            seed,
            out_scen,
        } => gen_scenario_file(&map, agents, count, seed, out_scen),
        GenCommand::Bottleneck {
            corridor,
            chamber,
            out_map,
            out_scen,
        } => gen_bottleneck_files(corridor, chamber, out_map, out_scen),
        GenCommand::EstimateB {
            map,
            scen,
            agents,
            sample,
        } => run_estimate(&map, &scen, agents, sample),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => input_error(e),
    }
}

fn gen_puzzle_files(
    tiles: u32,
    count: u64,
    seed: u64,
    out_map: Option<PathBuf>,
    out_scen: Option<PathBuf>,
) -> Result<(), String> {
    let out_map = out_map.unwrap_or_else(|| out_dir().join("puzzle4x4.map"));
    let out_scen = out_scen.unwrap_or_else(|| out_dir().join(format!("puzzle{tiles}.scen")));
    let map_name = out_map
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "puzzle4x4.map".into());

    let mut scenario = ScenarioFile::default();
    let mut map = None;
    for (bucket, gen_seed) in (seed..seed + count).enumerate() {
        let instance = gen_puzzle_instance(tiles, gen_seed).map_err(|e| e.to_string())?;
        scenario
            .records
            .extend(instance_records(&instance, &map_name, bucket as u32));
        map.get_or_insert_with(|| instance.map().clone());
    }
    write_out(&out_map, &write_map(&map.expect("count >= 1")))?;
    write_out(&out_scen, &write_scenario(&scenario))
}

fn gen_scenario_file(
    map_path: &Path,
    agents: usize,
    count: u64,
    seed: u64,
    out_scen: Option<PathBuf>,
) -> Result<(), String> {
    let text = fs::read_to_string(map_path).map_err(|e| format!("{}: {e}", map_path.display()))?;
    let grid = parse_map(&text).map_err(|e| format!("{}: {e}", map_path.display()))?;
    let map_name = map_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "map".into());
    let out_scen =
        out_scen.unwrap_or_else(|| out_dir().join(format!("random{agents}.scen")));
    let mut scenario = ScenarioFile::default();
    for (bucket, gen_seed) in (seed..seed + count).enumerate() {
        let instance = gen_random_scenario(&grid, agents, gen_seed).map_err(|e| e.to_string())?;
        scenario
            .records
            .extend(instance_records(&instance, &map_name, bucket as u32));
    }
    write_out(&out_scen, &write_scenario(&scenario))
}

fn gen_bottleneck_files(
    corridor: u32,
    chamber: u32,
    out_map: Option<PathBuf>,
    out_scen: Option<PathBuf>,
) -> Result<(), String> {
    let stem = format!("bottleneck-c{corridor}-h{chamber}");
    let out_map = out_map.unwrap_or_else(|| out_dir().join(format!("{stem}.map")));
    let out_scen = out_scen.unwrap_or_else(|| out_dir().join(format!("{stem}.scen")));
    let instance = make_bottleneck_scene(corridor, chamber).map_err(|e| e.to_string())?;
    let map_name = out_map
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("{stem}.map"));
    write_out(&out_map, &write_map(instance.map()))?;
    let scenario = ScenarioFile {
        records: instance_records(&instance, &map_name, 0),
    };
    write_out(&out_scen, &write_scenario(&scenario))
}

fn run_estimate(map: &Path, scen: &Path, agents: usize, sample: usize) -> Result<(), String> {
    let source = InstanceSource::ScenChunks {
        map: map.to_path_buf(),
        scen: scen.to_path_buf(),
        agents,
        count: Some(sample),
    };
    let instances = materialize_instances(&source).map_err(|e| e.to_string())?;
    let sample: Vec<Instance> = instances.into_iter().map(|(_, i)| i).collect();
    let estimate = estimate_threshold(&sample);
    println!(
        "single_mean={:.1} joint_mean={:.1} conflicting_pairs={}{}",
        estimate.single_expansions,
        estimate.joint_expansions,
        estimate.conflicting_pairs,
        if estimate.degenerate { " (degenerate)" } else { "" },
    );
    println!("estimated B={}", estimate.threshold);
    Ok(())
}

fn cmd_model(args: ModelArgs) -> ExitCode {
    if args.t11 <= 0.0 || args.t2 < args.t11 {
        return input_error("need t2 >= t11 > 0");
    }
    let (lo, hi) = args.b_range;
    let ratio = (args.t2 / args.t11).ceil() as u32;
    if args.trials > 0 {
        println!("| B | restart | no-restart | randomized (mc) |");
        println!("| --- | --- | --- | --- |");
    } else {
        println!("| B | restart | no-restart |");
        println!("| --- | --- | --- |");
    }
    for b in lo..=hi {
        let m_max = args.m_max.unwrap_or(3 * b.max(ratio).max(1));
        let with = worst_case_ratio(RestartPolicy::Restart, args.t11, args.t2, b, m_max);
        let without = worst_case_ratio(RestartPolicy::NoRestart, args.t11, args.t2, b, m_max);
        if args.trials > 0 {
            let mc = randomized_expected_ratio(args.t11, args.t2, b, m_max, args.trials, args.seed);
            println!("| {b} | {with:.6} | {without:.6} | {mc:.6} |");
        } else {
            println!("| {b} | {with:.6} | {without:.6} |");
        }
    }
    ExitCode::SUCCESS
}
