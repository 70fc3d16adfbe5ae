//! Cost, makespan and carrying-continuity metrics of an execution.

use crate::exec::state::{EventKind, ExecutionResult};
use crate::instance::Instance;
use crate::plan::ShelfPlan;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// Sum of agent path lengths.
    pub cost: u64,
    /// Cost minus the summed shelf trajectory lengths.
    pub norm_cost: i64,
    pub makespan: u64,
    /// Makespan minus the summed shelf trajectory lengths over `N`.
    pub norm_mksp: f64,
    /// Places per rearranged shelf.
    pub switch_per_shelf: f64,
    pub runtime_s: f64,
}

pub fn compute_metrics(inst: &Instance, plan: &ShelfPlan, result: &ExecutionResult) -> MetricsReport {
    let lens: Vec<u64> = result.agent_paths.iter().map(|p| (p.len() - 1) as u64).collect();
    let cost: u64 = lens.iter().sum();
    let makespan = lens.iter().copied().max().unwrap_or(0);
    let tau = plan.total_length();
    let places = result.events.iter().filter(|e| e.kind == EventKind::Place).count();
    let rearranged = inst.rearranged_count();
    MetricsReport {
        cost,
        norm_cost: cost as i64 - tau as i64,
        makespan,
        norm_mksp: makespan as f64 - tau as f64 / inst.num_agents() as f64,
        switch_per_shelf: if rearranged == 0 { 0.0 } else { places as f64 / rearranged as f64 },
        runtime_s: result.stats.runtime.as_secs_f64(),
    }
}
