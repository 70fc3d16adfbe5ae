//! The main execution loop: match agents to released shelves, let active
//! agents carry shelves along unconstrained stretches, and optionally relax
//! constraints with the replanning strategies.

use std::time::Instant;

use crate::error::ExecError;
use crate::exec::state::{ExecState, ExecutionResult};
use crate::grid::{Time, INF};
use crate::hungarian::assign;
use crate::instance::{ExecutionConfig, Instance};
use crate::mlsipp::CarryMoves;
use crate::plan::ShelfPlan;
use crate::strategies::{dep_switch, group_replan, single_replan};

/// Picks one agent/shelf pair from a minimum-cost matching of agents to
/// shelves whose next waypoint is released.
pub fn shelf_assignment(st: &ExecState) -> Result<(usize, usize), ExecError> {
    let candidates: Vec<(usize, Time)> = st
        .uncompleted()
        .filter_map(|s| st.release(s).filter(|&r| r != INF).map(|r| (s, r)))
        .collect();
    if candidates.is_empty() {
        return Err(ExecError::NoCandidate("every uncompleted shelf is constrained".into()));
    }
    let owner = |s: usize| st.holder(s).or(st.shelves[s].assigned);
    // First pass: free agents, plus assigned agents for their own shelf.
    let strict = |a: usize, s: usize| match owner(s) {
        Some(o) => o == a,
        None => st.agents[a].assigned.is_none() || st.config.rematch_assigned,
    };
    let loose = |a: usize, s: usize| owner(s).map_or(true, |o| o == a);
    let rows_strict: Vec<usize> = (0..st.agents.len())
        .filter(|&a| candidates.iter().any(|&(s, _)| strict(a, s)))
        .collect();
    if let Some(pair) = best_pair(st, &rows_strict, &candidates, &strict) {
        return Ok(pair);
    }
    let rows_all: Vec<usize> = (0..st.agents.len()).collect();
    best_pair(st, &rows_all, &candidates, &loose)
        .ok_or_else(|| ExecError::NoCandidate("no agent may take a released shelf".into()))
}

fn best_pair(
    st: &ExecState,
    rows: &[usize],
    cols: &[(usize, Time)],
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Option<(usize, usize)> {
    if rows.is_empty() {
        return None;
    }
    let mut t_hat = vec![vec![None; cols.len()]; rows.len()];
    let mut max_real = 0i64;
    for (i, &a) in rows.iter().enumerate() {
        for (j, &(s, rel)) in cols.iter().enumerate() {
            if allowed(a, s) {
                let th = st.t_hat_start(a, s);
                t_hat[i][j] = Some(th);
                max_real = max_real.max((th - rel) as i64);
            }
        }
    }
    let penalty = (st.config.penalty_for(st.inst) as i64).max(max_real + 1);
    let cost: Vec<Vec<i64>> = t_hat
        .iter()
        .map(|row| row.iter().zip(cols).map(|(th, &(_, rel))| th.map_or(penalty, |th| (th - rel) as i64)).collect())
        .collect();
    let matching = assign(&cost);
    matching
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.and_then(|j| t_hat[i][j].map(|th| (th, cols[j].0, rows[i]))))
        .min()
        .map(|(_, s, a)| (a, s))
}

/// Active agent with the earliest available time whose shelf is unfinished.
fn next_active(st: &ExecState) -> Option<usize> {
    st.agents
        .iter()
        .enumerate()
        .filter(|(_, ag)| ag.active && ag.assigned.is_some_and(|s| !st.is_complete(s)))
        .min_by_key(|(a, ag)| (ag.t_avail(), *a))
        .map(|(a, _)| a)
}

pub fn run_crest(inst: &Instance, plan: &ShelfPlan, config: &ExecutionConfig) -> Result<ExecutionResult, ExecError> {
    let clock = Instant::now();
    let mut st = ExecState::new(inst, plan, config)?;
    let total_nodes: usize = st.dep.paths().iter().map(Vec::len).sum();
    let cap = 20 * (total_nodes + inst.num_agents()) + 100;
    let mut steps = 0usize;
    while st.uncompleted().next().is_some() {
        st.stats.outer_iterations += 1;
        let (a_star, s_star) = shelf_assignment(&st)?;
        st.assign(a_star, s_star);
        log::debug!("assign agent {a_star} -> shelf {s_star}");
        let mut fresh = Some(a_star);
        while let Some(a) = next_active(&st) {
            steps += 1;
            if steps > cap {
                return Err(ExecError::Stalled(cap));
            }
            config.check_time(clock)?;
            let s = st.agents[a].assigned.unwrap();
            let t_avail = st.agents[a].t_avail();
            let rel = st.release(s).unwrap();
            let slack = 2 * st.config.overhead;
            let mut go = rel != INF && (fresh == Some(a) || rel <= t_avail + slack);
            if fresh == Some(a) {
                fresh = None;
            }
            if rel == INF {
                go = (st.config.dep_switch && dep_switch(&mut st, s, t_avail))
                    || (st.config.group_replan && group_replan(&mut st, s, t_avail));
            }
            if go {
                if st.config.single_replan {
                    single_replan(&mut st, s, t_avail);
                }
                if !st.carry(a, s, CarryMoves::FLEXIBLE, 0)? {
                    st.agents[a].active = false;
                }
            } else {
                st.agents[a].active = false;
            }
            st.prune();
        }
    }
    st.stats.runtime = clock.elapsed();
    Ok(st.finish())
}
