//! Benchmark harness: generate instances, seed-plan them, run each method,
//! validate, and collect one CSV row per (instance, method).

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ExecError;
use crate::exec::{run_crest, run_decomp_pp, ExecutionResult};
use crate::grid::Time;
use crate::instance::{ExecutionConfig, Instance};
use crate::layout::{generate_instance, LayoutKind, LayoutSpec};
use crate::metrics::compute_metrics;
use crate::plan::ShelfPlan;
use crate::seed::plan_shelves_prioritized;
use crate::validate::validate_execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "crest")]
    Crest,
    #[serde(rename = "crest+str")]
    CrestStr,
    #[serde(rename = "crest+ds")]
    CrestDs,
    #[serde(rename = "crest+gtr")]
    CrestGtr,
    #[serde(rename = "crest+all")]
    CrestAll,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::Crest,
        Method::CrestStr,
        Method::CrestDs,
        Method::CrestGtr,
        Method::CrestAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Crest => "crest",
            Method::CrestStr => "crest+str",
            Method::CrestDs => "crest+ds",
            Method::CrestGtr => "crest+gtr",
            Method::CrestAll => "crest+all",
        }
    }

    /// `base` with the strategy switches this method uses.
    pub fn config(self, base: &ExecutionConfig) -> ExecutionConfig {
        let mut c = base.clone();
        c.single_replan = matches!(self, Method::CrestStr | Method::CrestAll);
        c.dep_switch = matches!(self, Method::CrestDs | Method::CrestAll);
        c.group_replan = matches!(self, Method::CrestGtr | Method::CrestAll);
        c
    }

    pub fn run(self, inst: &Instance, plan: &ShelfPlan, base: &ExecutionConfig) -> Result<ExecutionResult, ExecError> {
        let cfg = self.config(base);
        match self {
            Method::Baseline => run_decomp_pp(inst, plan, &cfg),
            _ => run_crest(inst, plan, &cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// A family of generated instances sharing one layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub kind: LayoutKind,
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub agents: usize,
    #[serde(default)]
    pub first_seed: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSuite {
    #[serde(default)]
    pub sets: Vec<InstanceSet>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub overhead: Time,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_ds_depth")]
    pub ds_depth_limit: usize,
    /// Wall-clock budget per (instance, method) run.
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    /// Worker threads; defaults to the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_restarts() -> usize {
    50
}

fn default_ds_depth() -> usize {
    ExecutionConfig::default().ds_depth_limit
}

impl BenchSuite {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn base_config(&self) -> ExecutionConfig {
        ExecutionConfig {
            overhead: self.overhead,
            ds_depth_limit: self.ds_depth_limit,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            ..Default::default()
        }
    }

    pub fn specs(&self) -> Vec<LayoutSpec> {
        self.sets
            .iter()
            .flat_map(|set| {
                (set.first_seed..set.first_seed + set.count).map(move |seed| LayoutSpec {
                    kind: set.kind,
                    width: set.width,
                    height: set.height,
                    density: set.density,
                    agents: set.agents,
                    seed,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub map: String,
    pub kind: LayoutKind,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub method: Method,
    pub cost: Option<u64>,
    pub norm_cost: Option<i64>,
    pub makespan: Option<u64>,
    pub norm_mksp: Option<f64>,
    pub switch_per_shelf: Option<f64>,
    pub runtime_s: Option<f64>,
    pub valid: bool,
    pub timeout: bool,
    pub runtime_per_shelf_s: Option<f64>,
    /// Percent reduction of `norm_cost` against the baseline row of the
    /// same instance.
    pub norm_cost_reduction_pct: Option<f64>,
    pub norm_mksp_reduction_pct: Option<f64>,
    /// Failure message for rows without metrics.
    pub error: Option<String>,
}

fn empty_row(spec: &LayoutSpec, inst: Option<&Instance>, method: Method, error: String) -> BenchRow {
    BenchRow {
        map: format!("{}-{}x{}", spec.kind, spec.width, spec.height),
        kind: spec.kind,
        seed: spec.seed,
        n: spec.agents,
        m: inst.map_or(spec.shelf_count(), Instance::num_shelves),
        method,
        cost: None,
        norm_cost: None,
        makespan: None,
        norm_mksp: None,
        switch_per_shelf: None,
        runtime_s: None,
        valid: false,
        timeout: false,
        runtime_per_shelf_s: None,
        norm_cost_reduction_pct: None,
        norm_mksp_reduction_pct: None,
        error: Some(error),
    }
}

/// Runs one method on one instance and fills a row (without reductions).
pub fn run_one(spec: &LayoutSpec, inst: &Instance, plan: &ShelfPlan, method: Method, base: &ExecutionConfig) -> BenchRow {
    match method.run(inst, plan, base) {
        Ok(result) => {
            let cfg = method.config(base);
            let rep = validate_execution(inst, plan, &result, cfg.overhead, !cfg.any_strategy());
            let m = compute_metrics(inst, plan, &result);
            let mut row = empty_row(spec, Some(inst), method, String::new());
            row.error = (!rep.is_valid()).then(|| rep.violations.join("; "));
            row.cost = Some(m.cost);
            row.norm_cost = Some(m.norm_cost);
            row.makespan = Some(m.makespan);
            row.norm_mksp = Some(m.norm_mksp);
            row.switch_per_shelf = Some(m.switch_per_shelf);
            row.runtime_s = Some(m.runtime_s);
            row.runtime_per_shelf_s = (inst.rearranged_count() > 0).then(|| m.runtime_s / inst.rearranged_count() as f64);
            row.valid = rep.is_valid();
            row
        }
        Err(e) => {
            let mut row = empty_row(spec, Some(inst), method, e.to_string());
            row.timeout = matches!(e, ExecError::Timeout(_));
            row
        }
    }
}

fn pct(base: Option<f64>, value: Option<f64>) -> Option<f64> {
    match (base, value) {
        (Some(b), Some(v)) if b.abs() > f64::EPSILON => Some(100.0 * (b - v) / b),
        _ => None,
    }
}

fn run_instance(spec: &LayoutSpec, suite: &BenchSuite, base: &ExecutionConfig) -> Vec<BenchRow> {
    let inst = match generate_instance(spec) {
        Ok(i) => i,
        Err(e) => return suite.methods.iter().map(|&m| empty_row(spec, None, m, e.to_string())).collect(),
    };
    let plan = match plan_shelves_prioritized(&inst, spec.seed, suite.restarts) {
        Ok(p) => p,
        Err(e) => return suite.methods.iter().map(|&m| empty_row(spec, Some(&inst), m, e.to_string())).collect(),
    };
    let mut rows: Vec<BenchRow> = suite.methods.iter().map(|&m| run_one(spec, &inst, &plan, m, base)).collect();
    let baseline = rows.iter().find(|r| r.method == Method::Baseline && r.valid).cloned();
    if let Some(b) = baseline {
        for r in rows.iter_mut().filter(|r| r.valid) {
            r.norm_cost_reduction_pct = pct(b.norm_cost.map(|v| v as f64), r.norm_cost.map(|v| v as f64));
            r.norm_mksp_reduction_pct = pct(b.norm_mksp, r.norm_mksp);
        }
    }
    rows
}

/// Runs the whole suite on a worker pool. Rows come back in spec order.
pub fn run_benchmark(suite: &BenchSuite) -> Vec<BenchRow> {
    let base = suite.base_config();
    let specs = suite.specs();
    let work = || -> Vec<BenchRow> {
        specs
            .par_iter()
            .map(|spec| run_instance(spec, suite, &base))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    match suite.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

pub const CSV_HEADER: [&str; 18] = [
    "map",
    "kind",
    "seed",
    "N",
    "M",
    "method",
    "cost",
    "norm_cost",
    "makespan",
    "norm_mksp",
    "switch_per_shelf",
    "runtime_s",
    "valid",
    "timeout",
    "runtime_per_shelf_s",
    "norm_cost_reduction_pct",
    "norm_mksp_reduction_pct",
    "error",
];

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of `f` over the valid rows of one method.
pub fn mean_of(rows: &[BenchRow], method: Method, f: impl Fn(&BenchRow) -> Option<f64>) -> Option<f64> {
    let vals: Vec<f64> = rows.iter().filter(|r| r.method == method && r.valid).filter_map(f).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}
