//! Mutable execution state shared by the executors: committed agent and
//! shelf paths, return paths, assignments and the lift/place log.

use std::time::Duration;

use crate::depgraph::{build_dep, DependencyGraph};
use crate::error::ExecError;
use crate::grid::{Cell, DistanceOracle, Time, INF};
use crate::instance::{ExecutionConfig, Instance};
use crate::mlsipp::{plan_carry, CarryMoves, CarryQuery, PlannedCarry, ReservationTable};
use crate::plan::{validate_shelf_plan, ShelfPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Lift,
    Place,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    pub agent: usize,
    pub shelf: usize,
    /// First timestep of the lift or place.
    pub time: Time,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AgentState {
    /// Real path from time 0.
    pub path: Vec<Cell>,
    /// Live return path and its start time.
    pub dummy: Option<(Time, Vec<Cell>)>,
    pub assigned: Option<usize>,
    pub holding: Option<usize>,
    pub active: bool,
}

impl AgentState {
    pub fn t_avail(&self) -> Time {
        (self.path.len() - 1) as Time
    }

    pub fn current(&self) -> Cell {
        *self.path.last().unwrap()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShelfState {
    /// Committed path from time 0.
    pub path: Vec<Cell>,
    pub assigned: Option<usize>,
}

impl ShelfState {
    pub fn end(&self) -> Time {
        (self.path.len() - 1) as Time
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    SingleReplan,
    DepSwitch,
    GroupReplan,
}

/// One strategy attempt with the checks made around it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyRecord {
    pub kind: StrategyKind,
    pub shelf: usize,
    pub accepted: bool,
    pub estimate_before: Option<Time>,
    pub estimate_after: Option<Time>,
    /// Largest increase of any reconstructed arrival (group replanning).
    pub arrival_increase: bool,
    pub acyclic_after: bool,
    /// Rejected attempts only: plan and graph equal their prior values.
    pub restored: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub runtime: Duration,
    pub planner_calls: usize,
    pub expanded: usize,
    pub outer_iterations: usize,
    /// Graph checks failed in audit mode (cycles after build, prune or an
    /// accepted strategy).
    pub audit_failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionResult {
    pub agent_paths: Vec<Vec<Cell>>,
    pub shelf_paths: Vec<Vec<Cell>>,
    /// Return paths still reserved at the end, with their start times.
    pub dummies: Vec<Option<(Time, Vec<Cell>)>>,
    pub events: Vec<Event>,
    pub strategies: Vec<StrategyRecord>,
    pub stats: RunStats,
}

pub struct ExecState<'a> {
    pub inst: &'a Instance,
    pub config: ExecutionConfig,
    pub dist: DistanceOracle,
    pub dep: DependencyGraph,
    pub agents: Vec<AgentState>,
    pub shelves: Vec<ShelfState>,
    pub events: Vec<Event>,
    pub strategies: Vec<StrategyRecord>,
    pub stats: RunStats,
}

impl<'a> ExecState<'a> {
    pub fn new(inst: &'a Instance, plan: &ShelfPlan, config: &ExecutionConfig) -> Result<Self, ExecError> {
        let validity = validate_shelf_plan(plan, inst)?;
        if !validity.all_ok() {
            return Err(ExecError::InvalidPlan(validity.describe(&inst.map)));
        }
        let dep = build_dep(plan);
        let mut st = Self {
            inst,
            config: config.clone(),
            dist: DistanceOracle::new(&inst.map),
            dep,
            agents: inst
                .agents
                .iter()
                .map(|&c| AgentState {
                    path: vec![c],
                    ..Default::default()
                })
                .collect(),
            shelves: inst
                .shelves
                .iter()
                .map(|s| ShelfState {
                    path: vec![s.pickup],
                    assigned: None,
                })
                .collect(),
            events: Vec::new(),
            strategies: Vec::new(),
            stats: RunStats::default(),
        };
        st.audit_acyclic("build");
        Ok(st)
    }

    pub fn audit_acyclic(&mut self, when: &str) {
        if self.config.audit && !self.dep.is_acyclic() {
            self.stats.audit_failures.push(format!("cycle after {when}"));
        }
    }

    pub fn is_complete(&self, s: usize) -> bool {
        self.dep.is_complete(s)
    }

    pub fn uncompleted(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.shelves.len()).filter(|&s| !self.is_complete(s))
    }

    pub fn release(&self, s: usize) -> Option<Time> {
        self.dep.release_time(s, self.shelves[s].end())
    }

    pub fn shelf_cell(&self, s: usize) -> Cell {
        *self.shelves[s].path.last().unwrap()
    }

    pub fn holder(&self, s: usize) -> Option<usize> {
        self.agents.iter().position(|a| a.holding == Some(s))
    }

    /// Earliest time `a` could start carrying `s`, counting a pending place
    /// and the lift.
    pub fn t_hat_start(&self, a: usize, s: usize) -> Time {
        let ag = &self.agents[a];
        let rel = self.release(s).expect("completed shelf");
        assert!(rel != INF, "t_hat_start on a constrained shelf");
        let delta = self.config.overhead;
        let reach = if ag.holding == Some(s) {
            ag.t_avail()
        } else {
            let place = if ag.holding.is_some() { delta } else { 0 };
            let d = self.dist.dist(ag.current(), self.shelf_cell(s));
            ag.t_avail() + place + d + delta
        };
        reach.max(rel)
    }

    /// Reservations of everyone but agent `a` and shelf `s`.
    pub fn reservations(&self, a: usize, s: usize) -> ReservationTable {
        let mut res = ReservationTable::new(self.inst.map.num_cells());
        for (b, ag) in self.agents.iter().enumerate() {
            if b == a {
                continue;
            }
            match &ag.dummy {
                Some((start, d)) => {
                    res.add_agent_path(&ag.path, 0, false);
                    res.add_agent_path(d, *start, true);
                }
                None => res.add_agent_path(&ag.path, 0, true),
            }
        }
        for (other, sh) in self.shelves.iter().enumerate() {
            if other != s {
                res.add_shelf_path(&sh.path, 0, true);
            }
        }
        res
    }

    /// Start times used when estimating: unassigned shelves idle before
    /// `t_ref` start at `t_ref`.
    pub fn estimate_starts(&self, t_ref: Time) -> Vec<Time> {
        self.shelves
            .iter()
            .enumerate()
            .map(|(s, sh)| {
                let e = sh.end();
                if sh.assigned.is_none() && !self.is_complete(s) && e < t_ref {
                    t_ref
                } else {
                    e
                }
            })
            .collect()
    }

    pub fn estimate(&self, t_ref: Time) -> Option<Time> {
        self.dep.estimate_makespan(&self.estimate_starts(t_ref))
    }

    /// Removes cross-shelf arcs that can no longer influence any release.
    pub fn prune(&mut self) {
        if let Some(t_star) = self.uncompleted().map(|s| self.shelves[s].end()).min() {
            self.dep.prune(t_star);
        }
        self.audit_acyclic("prune");
    }

    pub fn assign(&mut self, a: usize, s: usize) {
        if let Some(old) = self.agents[a].assigned.take() {
            self.shelves[old].assigned = None;
        }
        if let Some(prev) = self.shelves[s].assigned {
            self.agents[prev].assigned = None;
        }
        self.agents[a].assigned = Some(s);
        self.agents[a].active = true;
        self.shelves[s].assigned = Some(a);
    }

    /// Plans and commits the next carry of `s` by `a`. Returns `false` when
    /// the next waypoint of `s` is still constrained.
    pub fn carry(&mut self, a: usize, s: usize, moves: CarryMoves, earliest_departure: Time) -> Result<bool, ExecError> {
        let Some((s_new, bounds)) = self.dep.unconstrained_segment(s) else {
            return Ok(false);
        };
        let cur = self.dep.current(s);
        let segment: Vec<Cell> = self.dep.path(s)[cur..=s_new].to_vec();
        let mut enter_after = Vec::with_capacity(segment.len());
        enter_after.push(self.shelves[s].end());
        enter_after.extend(bounds);
        let ag = &self.agents[a];
        let holding = ag.holding == Some(s);
        let pending = ag.holding.filter(|&h| h != s);
        let q = CarryQuery {
            agent_start: ag.current(),
            start_time: ag.t_avail(),
            home: self.inst.agents[a],
            pending_place: pending.is_some(),
            holding,
            segment: &segment,
            enter_after: &enter_after,
            overhead: self.config.overhead,
            moves,
            earliest_departure,
        };
        let res = self.reservations(a, s);
        self.stats.planner_calls += 1;
        let planned = plan_carry(&q, &res, &self.dist).ok_or(ExecError::PlannerFailure { agent: a, shelf: s })?;
        self.stats.expanded += planned.expanded;
        self.commit(a, s, pending, cur, s_new, planned);
        Ok(true)
    }

    fn commit(&mut self, a: usize, s: usize, pending: Option<usize>, cur: usize, s_new: usize, p: PlannedCarry) {
        let delta = self.config.overhead;
        let t0 = self.agents[a].t_avail();
        if let Some(old) = pending {
            self.events.push(Event {
                kind: EventKind::Place,
                agent: a,
                shelf: old,
                time: t0,
            });
            self.agents[a].holding = None;
        }
        if p.released {
            self.events.push(Event {
                kind: EventKind::Place,
                agent: a,
                shelf: s,
                time: t0,
            });
            self.agents[a].holding = None;
        }
        if let Some(lt) = p.lift_time {
            self.events.push(Event {
                kind: EventKind::Lift,
                agent: a,
                shelf: s,
                time: lt,
            });
        }
        let sh = &mut self.shelves[s];
        let here = *sh.path.last().unwrap();
        while (sh.path.len() as Time) <= p.carry_start {
            sh.path.push(here);
        }
        let cells: Vec<Cell> = p.shelf_nodes.iter().map(|&n| self.dep.path(s)[cur + n]).collect();
        sh.path.extend_from_slice(&cells[1..]);
        let abs: Vec<usize> = p.shelf_nodes.iter().map(|&n| cur + n).collect();
        self.dep.commit(s, p.carry_start, &abs);

        let ag = &mut self.agents[a];
        ag.path.extend_from_slice(&p.path[1..]);
        ag.holding = Some(s);
        let complete = s_new + 1 == self.dep.path(s).len();
        if complete {
            self.events.push(Event {
                kind: EventKind::Place,
                agent: a,
                shelf: s,
                time: p.arrival,
            });
            ag.path.extend_from_slice(&p.dummy[..delta as usize]);
            ag.dummy = Some((p.arrival + delta, p.dummy[delta as usize..].to_vec()));
            ag.holding = None;
            ag.assigned = None;
            ag.active = false;
            self.shelves[s].assigned = None;
        } else {
            ag.dummy = Some((p.arrival, p.dummy));
        }
        for ag in &mut self.agents {
            if ag.assigned.is_some() {
                ag.active = true;
            }
        }
    }

    pub fn finish(self) -> ExecutionResult {
        ExecutionResult {
            agent_paths: self.agents.iter().map(|a| a.path.clone()).collect(),
            shelf_paths: self.shelves.iter().map(|s| s.path.clone()).collect(),
            dummies: self.agents.into_iter().map(|a| a.dummy).collect(),
            events: self.events,
            strategies: self.strategies,
            stats: self.stats,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::fixtures::walkthrough;
    use crate::plan::ShelfPlan;

    #[test]
    fn rejects_plan_that_is_not_robust() {
        let (inst, plan) = walkthrough();
        let mut paths: Vec<Vec<Cell>> = (0..4).map(|s| plan.path(s).to_vec()).collect();
        // Shelf 1 now enters (2,3) right behind shelf 0.
        paths[1].remove(0);
        let bad = ShelfPlan::from_paths(paths);
        let err = ExecState::new(&inst, &bad, &ExecutionConfig::default()).err().unwrap();
        assert!(matches!(err, ExecError::InvalidPlan(_)));
    }

    #[test]
    fn release_times_at_start() {
        let (inst, plan) = walkthrough();
        let st = ExecState::new(&inst, &plan, &ExecutionConfig { overhead: 1, ..Default::default() }).unwrap();
        assert_eq!(st.release(0), Some(0));
        // Shelf 1 first moves into (2,3), which shelf 0 has to clear.
        assert_eq!(st.release(1), Some(INF));
        assert_eq!(st.release(2), Some(0));
        // Walk 1, lift 1.
        assert_eq!(st.t_hat_start(0, 0), 2);
        assert_eq!(st.t_hat_start(1, 2), 6);
    }

    #[test]
    fn carry_commits_agent_and_shelf() {
        let (inst, plan) = walkthrough();
        let mut st = ExecState::new(&inst, &plan, &ExecutionConfig::default()).unwrap();
        st.assign(0, 0);
        assert!(st.carry(0, 0, CarryMoves::FLEXIBLE, 0).unwrap());
        let m = &inst.map;
        assert_eq!(st.agents[0].path, vec![m.cell(1, 4), m.cell(2, 4), m.cell(2, 3), m.cell(2, 2), m.cell(3, 2)]);
        assert_eq!(st.shelves[0].path, vec![m.cell(2, 4), m.cell(2, 4), m.cell(2, 3), m.cell(2, 2), m.cell(3, 2)]);
        assert!(st.is_complete(0));
        assert!(!st.agents[0].active && st.agents[0].assigned.is_none());
        let (start, home) = st.agents[0].dummy.clone().unwrap();
        assert_eq!(start, 4);
        assert_eq!(*home.last().unwrap(), m.cell(1, 4));
        assert_eq!(st.events.len(), 2);
        // Shelf 1 may enter (2,3) once shelf 0 has moved on at t = 2.
        assert_eq!(st.dep.entry_bound(crate::depgraph::WaypointId::new(1, 1)), Some(2));
    }

    #[test]
    fn constrained_carry_stops_short() {
        let (inst, plan) = walkthrough();
        let mut st = ExecState::new(&inst, &plan, &ExecutionConfig::default()).unwrap();
        st.assign(0, 0);
        st.carry(0, 0, CarryMoves::FLEXIBLE, 0).unwrap();
        st.assign(1, 1);
        assert!(st.carry(1, 1, CarryMoves::FLEXIBLE, 0).unwrap());
        // Stops on (3,3) because (4,3) still waits for shelf 2.
        assert_eq!(st.shelf_cell(1), inst.map.cell(3, 3));
        assert_eq!(st.release(1), Some(INF));
        assert_eq!(st.holder(1), Some(1));
        assert!(!st.carry(1, 1, CarryMoves::FLEXIBLE, 0).unwrap());
    }

    #[test]
    fn prune_drops_satisfied_arcs() {
        let (inst, plan) = walkthrough();
        let mut st = ExecState::new(&inst, &plan, &ExecutionConfig::default()).unwrap();
        let arcs = st.dep.num_arcs();
        st.assign(0, 0);
        st.carry(0, 0, CarryMoves::FLEXIBLE, 0).unwrap();
        st.prune();
        assert!(st.dep.num_arcs() <= arcs);
        assert!(st.dep.is_acyclic());
    }
}
