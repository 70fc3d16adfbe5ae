//! Independent replay of an execution against the physical rules.

use std::collections::HashMap;

use crate::depgraph::build_dep;
use crate::exec::state::{EventKind, ExecutionResult};
use crate::grid::{Cell, Time};
use crate::instance::Instance;
use crate::plan::{simplify_path, ShelfPlan};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Number of violations beyond those listed.
    pub suppressed: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: String) {
        if self.violations.len() < 25 {
            self.violations.push(msg);
        } else {
            self.suppressed += 1;
        }
    }
}

fn at(path: &[Cell], t: usize) -> Cell {
    path[t.min(path.len() - 1)]
}

/// Full agent timelines: the real path followed by any reserved return path.
pub fn agent_timelines(result: &ExecutionResult) -> Vec<Vec<Cell>> {
    result
        .agent_paths
        .iter()
        .zip(&result.dummies)
        .map(|(p, d)| {
            let mut tl = p.clone();
            if let Some((start, cells)) = d {
                while tl.len() < *start as usize + 1 {
                    let last = *tl.last().unwrap();
                    tl.push(last);
                }
                tl.truncate(*start as usize);
                tl.extend_from_slice(cells);
            }
            tl
        })
        .collect()
}

/// Checks collisions at both levels, step validity, carrying rules,
/// lift/place durations and completion. When `precedence` is set, shelf
/// waypoint order must also respect every arc of the graph built from
/// `plan`.
pub fn validate_execution(
    inst: &Instance,
    plan: &ShelfPlan,
    result: &ExecutionResult,
    overhead: Time,
    precedence: bool,
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let map = &inst.map;
    let agents = agent_timelines(result);
    let shelves = &result.shelf_paths;
    if agents.len() != inst.num_agents() || shelves.len() != inst.num_shelves() {
        rep.push("result does not match the instance size".into());
        return rep;
    }
    for (a, tl) in agents.iter().enumerate() {
        if tl[0] != inst.agents[a] {
            rep.push(format!("agent {a} does not start at its initial cell"));
        }
        check_steps(&mut rep, map, tl, &format!("agent {a}"));
    }
    for (s, tl) in shelves.iter().enumerate() {
        if tl[0] != inst.shelves[s].pickup {
            rep.push(format!("shelf {s} does not start at its pickup"));
        }
        if *tl.last().unwrap() != inst.shelves[s].delivery {
            rep.push(format!("shelf {s} does not end at its delivery"));
        }
        check_steps(&mut rep, map, tl, &format!("shelf {s}"));
    }
    check_collisions(&mut rep, &agents, "agents");
    check_collisions(&mut rep, shelves, "shelves");
    check_carrying(&mut rep, result, &agents, overhead);
    if precedence {
        check_precedence(&mut rep, plan, shelves);
    }
    rep
}

fn check_steps(rep: &mut ValidationReport, map: &crate::grid::GridMap, tl: &[Cell], who: &str) {
    for (t, w) in tl.windows(2).enumerate() {
        if !map.is_free(w[1]) || (w[0] != w[1] && !map.adjacent(w[0], w[1])) {
            rep.push(format!("{who} jumps from {:?} to {:?} at t={t}", map.coord(w[0]), map.coord(w[1])));
        }
    }
}

fn check_collisions(rep: &mut ValidationReport, tls: &[Vec<Cell>], what: &str) {
    let horizon = tls.iter().map(Vec::len).max().unwrap_or(0);
    let mut occ: HashMap<Cell, usize> = HashMap::new();
    for t in 0..horizon {
        occ.clear();
        for (i, tl) in tls.iter().enumerate() {
            if let Some(j) = occ.insert(at(tl, t), i) {
                rep.push(format!("{what} {j} and {i} collide at t={t}"));
            }
            if t > 0 {
                let (prev, now) = (at(tl, t - 1), at(tl, t));
                if prev != now {
                    for (j, other) in tls.iter().enumerate().skip(i + 1) {
                        if at(other, t - 1) == now && at(other, t) == prev {
                            rep.push(format!("{what} {i} and {j} swap at t={}", t - 1));
                        }
                    }
                }
            }
        }
    }
}

fn check_carrying(rep: &mut ValidationReport, result: &ExecutionResult, agents: &[Vec<Cell>], delta: Time) {
    // (agent, shelf) -> open lift time
    let mut open: HashMap<(usize, usize), Time> = HashMap::new();
    let mut windows: Vec<Vec<(Time, Time)>> = vec![Vec::new(); result.shelf_paths.len()];
    let mut agent_windows: Vec<Vec<(Time, Time)>> = vec![Vec::new(); agents.len()];
    let mut events = result.events.clone();
    events.sort_by_key(|e| (e.time, e.kind == EventKind::Lift));
    for e in &events {
        let (a, s, t) = (e.agent, e.shelf, e.time);
        let shelf = &result.shelf_paths[s];
        for k in t..=t + delta {
            if at(&agents[a], k as usize) != at(shelf, k as usize) {
                rep.push(format!("agent {a} not under shelf {s} during {:?} at t={k}", e.kind));
                break;
            }
            if k > t && (at(&agents[a], k as usize) != at(&agents[a], t as usize) || at(shelf, k as usize) != at(shelf, t as usize)) {
                rep.push(format!("{:?} of shelf {s} by agent {a} at t={t} is not stationary", e.kind));
                break;
            }
        }
        match e.kind {
            EventKind::Lift => {
                if open.insert((a, s), t).is_some() {
                    rep.push(format!("agent {a} lifts shelf {s} twice"));
                }
            }
            EventKind::Place => match open.remove(&(a, s)) {
                Some(l) => {
                    windows[s].push((l + delta, t));
                    agent_windows[a].push((l, t + delta));
                }
                None => rep.push(format!("agent {a} places shelf {s} at t={t} without lifting it")),
            },
        }
    }
    for ((a, s), t) in open {
        rep.push(format!("agent {a} never places shelf {s} lifted at t={t}"));
    }
    for (a, ws) in agent_windows.iter_mut().enumerate() {
        ws.sort_unstable();
        for w in ws.windows(2) {
            if w[1].0 < w[0].1 {
                rep.push(format!("agent {a} holds two shelves at t={}", w[1].0));
            }
        }
    }
    for (s, shelf) in result.shelf_paths.iter().enumerate() {
        for (t, w) in shelf.windows(2).enumerate() {
            if w[0] == w[1] {
                continue;
            }
            let t = t as Time;
            let carried = windows[s].iter().any(|&(from, to)| from <= t && t < to);
            if !carried {
                rep.push(format!("shelf {s} moves at t={t} without a carrier"));
                continue;
            }
        }
        for &(from, to) in &windows[s] {
            let carrier = result
                .events
                .iter()
                .find(|e| e.shelf == s && e.kind == EventKind::Place && e.time == to)
                .map(|e| e.agent)
                .unwrap();
            for k in from..=to {
                if at(&agents[carrier], k as usize) != at(shelf, k as usize) {
                    rep.push(format!("shelf {s} separated from carrier {carrier} at t={k}"));
                    break;
                }
            }
        }
    }
}

/// Node index of a shelf at each step of its committed path.
fn node_timeline(simplified: &[Cell], tl: &[Cell]) -> Option<Vec<usize>> {
    let mut pos = 0usize;
    let mut out = Vec::with_capacity(tl.len());
    for &c in tl {
        if c == simplified[pos] {
        } else if pos + 1 < simplified.len() && c == simplified[pos + 1] {
            pos += 1;
        } else if pos > 0 && c == simplified[pos - 1] {
            pos -= 1;
        } else {
            return None;
        }
        out.push(pos);
    }
    Some(out)
}

fn check_precedence(rep: &mut ValidationReport, plan: &ShelfPlan, shelves: &[Vec<Cell>]) {
    let dep = build_dep(plan);
    let mut nodes = Vec::with_capacity(shelves.len());
    for (s, tl) in shelves.iter().enumerate() {
        let simplified = simplify_path(plan.path(s));
        match node_timeline(&simplified, tl) {
            Some(n) => nodes.push(n),
            None => {
                rep.push(format!("shelf {s} leaves its planned trajectory"));
                return;
            }
        }
    }
    for arc in dep.arcs() {
        let (p, i, q, j) = (arc.src.shelf, arc.src.index, arc.dst.shelf, arc.dst.index);
        let first_q = nodes[q].iter().position(|&n| n >= j);
        let last_p_before = nodes[p].iter().rposition(|&n| n < i);
        if let (Some(fq), Some(lp)) = (first_q, last_p_before) {
            if fq <= lp {
                rep.push(format!(
                    "shelf {q} enters waypoint {j} at t={fq} before shelf {p} leaves waypoint {} (t={lp})",
                    i - 1
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::state::{Event, RunStats};
    use crate::grid::GridMap;
    use crate::instance::Shelf;

    fn fixture() -> (Instance, ShelfPlan, ExecutionResult) {
        let m = GridMap::open(3, 1);
        let (a, b, c) = (m.cell(0, 0), m.cell(0, 1), m.cell(0, 2));
        let inst = Instance::new(m, vec![a], vec![Shelf { pickup: b, delivery: c }]).unwrap();
        let plan = ShelfPlan::from_paths(vec![vec![b, c]]);
        let result = ExecutionResult {
            agent_paths: vec![vec![a, b, c]],
            shelf_paths: vec![vec![b, b, c]],
            dummies: vec![Some((2, vec![c, b, a]))],
            events: vec![
                Event { kind: EventKind::Lift, agent: 0, shelf: 0, time: 1 },
                Event { kind: EventKind::Place, agent: 0, shelf: 0, time: 2 },
            ],
            strategies: vec![],
            stats: RunStats::default(),
        };
        (inst, plan, result)
    }

    #[test]
    fn accepts_simple_carry() {
        let (inst, plan, result) = fixture();
        let rep = validate_execution(&inst, &plan, &result, 0, true);
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    #[test]
    fn rejects_shelf_moving_alone() {
        let (inst, plan, mut result) = fixture();
        result.events.clear();
        let rep = validate_execution(&inst, &plan, &result, 0, true);
        assert!(rep.violations.iter().any(|v| v.contains("without a carrier")));
    }

    #[test]
    fn rejects_overhead_mismatch() {
        let (inst, plan, result) = fixture();
        let rep = validate_execution(&inst, &plan, &result, 1, true);
        assert!(!rep.is_valid());
    }
}
