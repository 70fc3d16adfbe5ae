use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crest::bench::{run_benchmark, write_csv, BenchSuite};
use crest::depgraph::build_dep;
use crest::exec::baseline::run_decomp_pp;
use crest::exec::crest::run_crest;
use crest::execlog::{parse_log, write_log};
use crest::grid::{parse_map, GridMap};
use crest::instance::{parse_scenario, ExecutionConfig, Instance};
use crest::layout::{generate_instance, LayoutKind, LayoutSpec};
use crest::metrics::compute_metrics;
use crest::plan::{parse_plan, validate_shelf_plan, write_plan, ShelfPlan};
use crest::seed::plan_shelves_prioritized;
use crest::validate::validate_execution;

const EXIT_FAIL: u8 = 1;
const EXIT_PLAN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 66;

#[derive(Parser)]
#[command(name = "crest", version, about = "Execute shelf plans with double-deck warehouse agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Crest,
    Baseline,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a shelf plan with prioritized planning.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a shelf plan and write the log.
    Execute {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value = "crest")]
        method: MethodArg,
        #[arg(long = "str")]
        single_replan: bool,
        #[arg(long = "ds")]
        dep_switch: bool,
        #[arg(long = "gtr")]
        group_replan: bool,
        #[arg(long, default_value_t = 0)]
        overhead: u32,
        #[arg(long, default_value_t = 5)]
        ds_depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a plan and optionally an execution log.
    Validate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Lift/place duration the log was produced with.
        #[arg(long, default_value_t = 0)]
        overhead: u32,
        /// Also require the log to follow every dependency of the plan.
        #[arg(long)]
        precedence: bool,
    },
    /// Run a benchmark suite and write a CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Wall-clock budget per run in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        kind: LayoutKind,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        density: f64,
        #[arg(long)]
        agents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario output; the map goes next to it with a `.map` extension
        /// unless `--map-out` is given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// Write the dependency graph of a plan in DOT format.
    DumpDep {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with its exit code.
struct Fail(u8, String);

impl Fail {
    fn usage(msg: impl ToString) -> Self {
        Fail(EXIT_USAGE, msg.to_string())
    }
    fn failed(msg: impl ToString) -> Self {
        Fail(EXIT_FAIL, msg.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_map(path: &Path) -> Result<GridMap, Fail> {
    parse_map(&read(path)?).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn load_instance(map: &Path, scen: &Path) -> Result<Instance, Fail> {
    let grid = load_map(map)?;
    parse_scenario(grid, &read(scen)?).map_err(|e| Fail::usage(format!("{}: {e}", scen.display())))
}

fn load_plan(path: &Path, map: &GridMap) -> Result<ShelfPlan, Fail> {
    parse_plan(&read(path)?, map).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.command {
        Command::Plan { map, scen, seed, restarts, out } => {
            let inst = load_instance(&map, &scen)?;
            let plan = plan_shelves_prioritized(&inst, seed, restarts).map_err(|e| Fail(EXIT_PLAN, e.to_string()))?;
            write(&out, &write_plan(&plan, &inst.map))?;
            println!("planned {} shelves, total length {}", plan.len(), plan.total_length());
        }
        Command::Execute {
            map,
            scen,
            plan,
            method,
            single_replan,
            dep_switch,
            group_replan,
            overhead,
            ds_depth,
            out,
        } => {
            let inst = load_instance(&map, &scen)?;
            let plan = load_plan(&plan, &inst.map)?;
            let config = ExecutionConfig {
                overhead,
                ds_depth_limit: ds_depth,
                single_replan,
                dep_switch,
                group_replan,
                ..Default::default()
            };
            let result = match method {
                MethodArg::Crest => run_crest(&inst, &plan, &config),
                MethodArg::Baseline => run_decomp_pp(&inst, &plan, &config),
            }
            .map_err(Fail::failed)?;
            write(&out, &write_log(&result, &inst.map))?;
            let m = compute_metrics(&inst, &plan, &result);
            println!(
                "cost {} norm_cost {} makespan {} norm_mksp {:.2} switch_per_shelf {:.3} runtime_s {:.4}",
                m.cost, m.norm_cost, m.makespan, m.norm_mksp, m.switch_per_shelf, m.runtime_s
            );
            let rep = validate_execution(&inst, &plan, &result, overhead, !config.any_strategy());
            if !rep.is_valid() {
                for v in &rep.violations {
                    eprintln!("violation: {v}");
                }
                return Err(Fail::failed("execution failed validation"));
            }
        }
        Command::Validate { map, scen, plan, log, overhead, precedence } => {
            let inst = load_instance(&map, &scen)?;
            let plan = load_plan(&plan, &inst.map)?;
            let validity = validate_shelf_plan(&plan, &inst).map_err(Fail::usage)?;
            let mut ok = validity.all_ok();
            println!("plan: {}", validity.describe(&inst.map));
            if let Some(log) = log {
                let result = parse_log(&read(&log)?, &inst.map).map_err(|e| Fail::usage(format!("{}: {e}", log.display())))?;
                let rep = validate_execution(&inst, &plan, &result, overhead, precedence);
                if rep.is_valid() {
                    println!("log: ok");
                } else {
                    ok = false;
                    for v in &rep.violations {
                        println!("log: {v}");
                    }
                    if rep.suppressed > 0 {
                        println!("log: {} more violations", rep.suppressed);
                    }
                }
            }
            if !ok {
                return Err(Fail::failed("validation failed"));
            }
        }
        Command::Bench { suite, out, jobs, budget } => {
            let mut suite = BenchSuite::parse(&read(&suite)?).map_err(|e| Fail::usage(format!("{}: {e}", suite.display())))?;
            if jobs.is_some() {
                suite.threads = jobs;
            }
            if budget.is_some() {
                suite.time_limit_s = budget;
            }
            let rows = run_benchmark(&suite);
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).map_err(Fail::failed)?;
            write(&out, &String::from_utf8(buf).expect("csv is utf-8"))?;
            println!("{} rows", rows.len());
        }
        Command::Gen { kind, width, height, density, agents, seed, out, map_out } => {
            let spec = LayoutSpec { kind, width, height, density, agents, seed };
            let inst = generate_instance(&spec).map_err(Fail::failed)?;
            let map_out = map_out.unwrap_or_else(|| out.with_extension("map"));
            write(&map_out, &inst.map.to_text())?;
            write(&out, &inst.scenario_text())?;
        }
        Command::DumpDep { map, plan, out } => {
            let grid = load_map(&map)?;
            let plan = load_plan(&plan, &grid)?;
            write(&out, &build_dep(&plan).to_dot(&grid))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CREST_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
