//! Comparison executor in the style of decomposition-based planners: agents
//! pick up shelves only once their next stretch is already released, always
//! the nearest one, and carry strictly forward without pausing.

use std::time::Instant;

use crate::error::ExecError;
use crate::exec::state::{ExecState, ExecutionResult};
use crate::grid::{Time, INF};
use crate::instance::{ExecutionConfig, Instance};
use crate::mlsipp::CarryMoves;
use crate::plan::ShelfPlan;

pub fn run_decomp_pp(inst: &Instance, plan: &ShelfPlan, config: &ExecutionConfig) -> Result<ExecutionResult, ExecError> {
    let clock = Instant::now();
    let mut config = config.clone();
    config.single_replan = false;
    config.dep_switch = false;
    config.group_replan = false;
    let mut st = ExecState::new(inst, plan, &config)?;
    let n = inst.num_agents();
    let mut decide_at: Vec<Time> = vec![0; n];
    let total_nodes: usize = st.dep.paths().iter().map(Vec::len).sum();
    let cap = 50 * (total_nodes + n) + 100;
    let mut steps = 0usize;
    while st.uncompleted().next().is_some() {
        steps += 1;
        if steps > cap {
            return Err(ExecError::Stalled(cap));
        }
        config.check_time(clock)?;
        let a = (0..n).min_by_key(|&a| (decide_at[a], a)).unwrap();
        let dt = decide_at[a];
        let here = st.agents[a].current();
        let pick = st
            .uncompleted()
            .filter(|&s| st.release(s).is_some_and(|r| r <= dt))
            .filter(|&s| {
                let owner = st.holder(s).or(st.shelves[s].assigned);
                owner.map_or(true, |o| o == a)
            })
            .min_by_key(|&s| {
                let d = if st.agents[a].holding == Some(s) { 0 } else { st.dist.dist(here, st.shelf_cell(s)) };
                (d, s)
            });
        match pick {
            Some(s) => {
                st.assign(a, s);
                st.stats.outer_iterations += 1;
                if !st.carry(a, s, CarryMoves::FORWARD_ONLY, dt)? {
                    return Err(ExecError::Cyclic(format!("released shelf {s} has no stretch to carry")));
                }
                decide_at[a] = st.agents[a].t_avail().max(dt);
                st.prune();
            }
            None => {
                // Sleep until something can change.
                let mut wake = INF;
                for s in st.uncompleted() {
                    if let Some(r) = st.release(s).filter(|&r| r != INF && r > dt) {
                        wake = wake.min(r);
                    }
                }
                for b in 0..n {
                    let t = st.agents[b].t_avail().max(decide_at[b]);
                    if b != a && t > dt {
                        wake = wake.min(t);
                    }
                }
                if wake == INF {
                    // Everything released is owned by agents deciding now.
                    wake = dt + 1;
                }
                decide_at[a] = wake;
            }
        }
    }
    st.stats.runtime = clock.elapsed();
    Ok(st.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::fixtures::walkthrough;
    use crate::validate::validate_execution;

    #[test]
    fn walkthrough_completes_with_and_without_overhead() {
        let (inst, plan) = walkthrough();
        for overhead in [0, 1, 2] {
            let cfg = ExecutionConfig { overhead, ..Default::default() };
            let r = run_decomp_pp(&inst, &plan, &cfg).unwrap();
            let rep = validate_execution(&inst, &plan, &r, overhead, true);
            assert!(rep.is_valid(), "{:?}", rep.violations);
        }
    }
}
