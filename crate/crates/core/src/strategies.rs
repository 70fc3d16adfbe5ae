//! Constraint-release strategies: single trajectory replanning, dependency
//! switching and group trajectory replanning, plus the time-aligned
//! reconstruction of the unexecuted plan that they share.

use std::collections::{HashMap, HashSet};

use crate::depgraph::{Arc, DependencyGraph, WaypointId};
use crate::exec::state::{ExecState, StrategyKind, StrategyRecord};
use crate::grid::{bfs, Cell, Time, INF};
use crate::intervals::Reservations;
use crate::plan::{end_time, simplify_path};
use crate::sipp::plan_path;

/// The unexecuted plan replayed with self-propelled shelves.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub starts: Vec<Time>,
    /// Time each node is reached; valid from the current node on.
    pub reach: Vec<Vec<Time>>,
    /// Cells from time 0; the last cell is held forever.
    pub timelines: Vec<Vec<Cell>>,
}

impl Reconstruction {
    pub fn arrival(&self, s: usize) -> Time {
        (self.timelines[s].len() - 1) as Time
    }

    pub fn cell_at(&self, s: usize, t: Time) -> Cell {
        let tl = &self.timelines[s];
        tl[(t as usize).min(tl.len() - 1)]
    }
}

/// Replays the plan from the current state: committed prefixes first, idle
/// unassigned shelves wait until `t_ref`, then every shelf advances one
/// waypoint per step once its predecessors allow it.
pub fn extract_mapf(st: &ExecState, t_ref: Time) -> Option<Reconstruction> {
    extract_with(st, &st.dep, t_ref)
}

fn extract_with(st: &ExecState, dep: &DependencyGraph, t_ref: Time) -> Option<Reconstruction> {
    let starts = st.estimate_starts(t_ref);
    let reach = dep.propagate(&starts)?;
    let timelines = (0..dep.num_shelves())
        .map(|s| {
            let mut tl = st.shelves[s].path.clone();
            let cur = dep.current(s);
            let path = dep.path(s);
            while (tl.len() as Time) <= starts[s] {
                tl.push(path[cur]);
            }
            for j in cur + 1..path.len() {
                while (tl.len() as Time) < reach[s][j] {
                    tl.push(path[j - 1]);
                }
                tl.push(path[j]);
            }
            tl
        })
        .collect();
    Some(Reconstruction {
        starts,
        reach,
        timelines,
    })
}

/// A stay of a shelf on one node, `[start, end]` with `end = INF` for the
/// final node.
#[derive(Clone, Copy, Debug)]
struct Run {
    cell: Cell,
    node: usize,
    start: Time,
    end: Time,
}

/// Runs of shelf `s` from its current node on, read off a timeline that
/// follows `nodes` (the simplified cells from the current node).
fn runs_from_timeline(timeline: &[Cell], cur: usize, nodes: &[Cell], arrived: Time) -> Vec<Run> {
    let mut runs = vec![Run {
        cell: nodes[0],
        node: cur,
        start: arrived,
        end: INF,
    }];
    let mut k = 0;
    for (t, w) in timeline.windows(2).enumerate() {
        let t = t as Time + 1;
        if t <= arrived || w[0] == w[1] {
            continue;
        }
        runs.last_mut().unwrap().end = t - 1;
        k += 1;
        debug_assert_eq!(w[1], nodes[k]);
        runs.push(Run {
            cell: w[1],
            node: cur + k,
            start: t,
            end: INF,
        });
    }
    runs
}

fn shelf_runs(st: &ExecState, dep: &DependencyGraph, r: &Reconstruction, s: usize) -> Vec<Run> {
    let cur = dep.current(s);
    let arrived = end_time(&st.shelves[s].path) as Time;
    runs_from_timeline(&r.timelines[s], cur, &dep.path(s)[cur..], arrived)
}

/// Adds the cross-shelf arcs between the replaced shelves and everyone else
/// implied by the visiting order in the reconstruction.
fn rebuild_arcs(dep: &mut DependencyGraph, runs: &[Vec<Run>], replaced: &[usize]) {
    let mut by_cell: HashMap<Cell, Vec<(usize, Run)>> = HashMap::new();
    for (q, rs) in runs.iter().enumerate() {
        for r in rs {
            by_cell.entry(r.cell).or_default().push((q, *r));
        }
    }
    for &s in replaced {
        for rs in &runs[s] {
            let Some(others) = by_cell.get(&rs.cell) else { continue };
            for &(q, rq) in others {
                if q == s {
                    continue;
                }
                let (first, fr, second, sr) = if rq.start < rs.start { (q, rq, s, *rs) } else { (s, *rs, q, rq) };
                let src = WaypointId::new(first, fr.node + 1);
                let dst = WaypointId::new(second, sr.node);
                if dep.is_traversed(dst) || src.index >= dep.path(first).len() {
                    continue;
                }
                dep.add_arc(Arc { src, dst, cell: rs.cell });
            }
        }
    }
}

/// Vertex reservations of the given timelines with one-step shadows,
/// counted only after `from`. Each timeline comes with the end of its
/// committed prefix; committed stays that are not over by `from` block their
/// cell from `from` on, since their order can no longer change.
fn robust_reservations(num_cells: usize, timelines: &[(&[Cell], Time)], from: Time) -> Reservations {
    let mut res = Reservations::new(num_cells);
    for &(tl, committed) in timelines {
        let mut k = 0;
        while k < tl.len() {
            let c = tl[k];
            let mut j = k;
            while j + 1 < tl.len() && tl[j + 1] == c {
                j += 1;
            }
            let lo = if k as Time <= committed { 0 } else { (k as Time).saturating_sub(1) };
            let hi = if j + 1 == tl.len() { INF } else { j as Time + 2 };
            res.block(c, lo.max(from + 1), hi);
            k = j + 1;
        }
    }
    res
}

fn record(st: &mut ExecState, rec: StrategyRecord) {
    if st.config.audit && rec.accepted && !rec.acyclic_after {
        st.stats.audit_failures.push(format!("{:?} accepted a cyclic graph", rec.kind));
    }
    st.strategies.push(rec);
}

/// Re-routes the unexecuted part of `s` for the earliest arrival at its
/// delivery, preferring routes that stay clear of cells other shelves visit
/// first. Returns whether the replan was accepted.
pub fn single_replan(st: &mut ExecState, s: usize, t_ref: Time) -> bool {
    let before = st.config.audit.then(|| st.dep.clone());
    let mut rec = StrategyRecord {
        kind: StrategyKind::SingleReplan,
        shelf: s,
        accepted: false,
        estimate_before: None,
        estimate_after: None,
        arrival_increase: false,
        acyclic_after: true,
        restored: true,
    };
    let Some(r) = extract_mapf(st, t_ref) else {
        record(st, rec);
        return false;
    };
    let start = r.starts[s].max(t_ref);
    let cur = st.dep.current(s);
    let from = st.dep.path(s)[cur];
    let goal = st.inst.shelves[s].delivery;
    if from == goal {
        // Cutting the tail here would finish the shelf without a place.
        record(st, rec);
        return false;
    }
    let others: Vec<(&[Cell], Time)> = (0..r.timelines.len())
        .filter(|&q| q != s)
        .map(|q| (r.timelines[q].as_slice(), st.shelves[q].end()))
        .collect();
    let res = robust_reservations(st.inst.map.num_cells(), &others, start);
    let mut first_visit: HashMap<Cell, Time> = HashMap::new();
    for &(tl, _) in &others {
        for (t, &c) in tl.iter().enumerate().skip(start as usize) {
            first_visit.entry(c).or_insert(t as Time);
        }
        if (tl.len() as Time) <= start {
            first_visit.entry(*tl.last().unwrap()).or_insert(start);
        }
    }
    let untraversed: usize = (0..st.dep.num_shelves())
        .map(|q| st.dep.path(q).len() - st.dep.next(q))
        .sum();
    let max_end = st.shelves.iter().map(|sh| sh.end()).max().unwrap_or(0);
    let horizon = max_end.max(start) + untraversed as Time + st.agents.len() as Time + 1;
    let starts: HashSet<Cell> = st.inst.agents.iter().copied().collect();
    let Some(path) = layered_search(st, &res, &starts, &first_visit, from, start, goal, horizon) else {
        record(st, rec);
        return false;
    };
    let tail = simplify_path(&path);
    if tail == st.dep.path(s)[cur..] {
        rec.accepted = true;
        record(st, rec);
        return true;
    }
    if start + end_time(&path) as Time >= r.arrival(s) {
        // No earlier than the current route.
        record(st, rec);
        return false;
    }
    let mut dep = st.dep.clone();
    dep.set_tail(s, &tail[1..]);
    let mut timelines = r.timelines.clone();
    let mut tl: Vec<Cell> = st.shelves[s].path.clone();
    while (tl.len() as Time) < start {
        tl.push(from);
    }
    tl.truncate(start as usize);
    tl.extend_from_slice(&path);
    timelines[s] = tl;
    let r2 = Reconstruction {
        starts: r.starts.clone(),
        reach: r.reach.clone(),
        timelines,
    };
    let runs: Vec<Vec<Run>> = (0..dep.num_shelves())
        .map(|q| {
            if q == s {
                let arrived = end_time(&st.shelves[s].path) as Time;
                runs_from_timeline(&r2.timelines[s], cur, &tail, arrived)
            } else {
                shelf_runs(st, &dep, &r2, q)
            }
        })
        .collect();
    rebuild_arcs(&mut dep, &runs, &[s]);
    if dep.is_acyclic() {
        st.dep = dep;
        rec.accepted = true;
        rec.restored = false;
        st.audit_acyclic("single replan");
    } else {
        rec.acyclic_after = false;
        rec.restored = before.map_or(true, |b| b == st.dep);
    }
    let accepted = rec.accepted;
    record(st, rec);
    accepted
}

/// Time-expanded search for the earliest arrival at `goal`; among equal
/// arrivals it keeps the longest prefix that avoids cells other shelves reach
/// first, then waiting over moving, then the smaller predecessor cell.
#[allow(clippy::too_many_arguments)]
fn layered_search(
    st: &ExecState,
    res: &Reservations,
    agent_starts: &HashSet<Cell>,
    first_visit: &HashMap<Cell, Time>,
    from: Cell,
    start: Time,
    goal: Cell,
    horizon: Time,
) -> Option<Vec<Cell>> {
    let map = &st.inst.map;
    let h = st.dist.table(goal);
    // Per layer: cell -> (clean prefix length, still clean, predecessor slot).
    let mut layers: Vec<Vec<(Cell, Time, bool, usize)>> = vec![vec![(from, 0, true, usize::MAX)]];
    let mut t = start;
    loop {
        let layer = layers.last().unwrap();
        if let Some((slot, _)) = layer.iter().enumerate().find(|(_, e)| e.0 == goal) {
            if res.is_free_forever(goal, t) {
                let mut path = Vec::with_capacity(layers.len());
                let mut idx = slot;
                for l in (0..layers.len()).rev() {
                    let e = layers[l][idx];
                    path.push(e.0);
                    idx = e.3;
                }
                path.reverse();
                return Some(path);
            }
        }
        if t >= horizon {
            return None;
        }
        let nt = t + 1;
        let mut next: HashMap<Cell, (Time, bool, Cell, usize)> = HashMap::new();
        for (slot, &(c, dur, clean, _)) in layer.iter().enumerate() {
            let succ = std::iter::once(c).chain(map.neighbors(c));
            for n in succ {
                if agent_starts.contains(&n) || res.is_blocked(n, nt) || h[n.index()] == u32::MAX {
                    continue;
                }
                if h[n.index()] > horizon - nt {
                    continue;
                }
                let dirty = first_visit.get(&n).is_some_and(|&f| f < nt);
                let (nd, nc) = if clean && !dirty { (dur + 1, true) } else { (dur, false) };
                let better = match next.get(&n) {
                    None => true,
                    Some(&(od, oc, op, _)) => {
                        (nd, nc, c == n, std::cmp::Reverse(c)) > (od, oc, op == n, std::cmp::Reverse(op))
                    }
                };
                if better {
                    next.insert(n, (nd, nc, c, slot));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        let mut layer: Vec<(Cell, Time, bool, usize)> =
            next.into_iter().map(|(c, (d, cl, _, slot))| (c, d, cl, slot)).collect();
        layer.sort_by_key(|e| e.0);
        layers.push(layer);
        t = nt;
    }
}

/// Lets shelf `s` go first at its next waypoint by reversing the arcs that
/// hold it back, recursing into cycles that the reversal creates.
pub fn dep_switch(st: &mut ExecState, s: usize, t_ref: Time) -> bool {
    let before = st.config.audit.then(|| st.dep.clone());
    let base = st.estimate(t_ref);
    let mut rec = StrategyRecord {
        kind: StrategyKind::DepSwitch,
        shelf: s,
        accepted: false,
        estimate_before: base,
        estimate_after: None,
        arrival_increase: false,
        acyclic_after: true,
        restored: true,
    };
    let w = WaypointId::new(s, st.dep.next(s));
    let open: Vec<Arc> = st
        .dep
        .open_deps(w)
        .map(|d| Arc {
            src: d.src,
            dst: w,
            cell: d.cell,
        })
        .collect();
    let mut g = st.dep.clone();
    let mut created = HashSet::new();
    let ok = open.iter().all(|a| reverse(&mut g, *a, &mut created));
    let starts = st.estimate_starts(t_ref);
    let found = if ok {
        search_switch(g, &created, &starts, base, st.config.ds_depth_limit, 0)
    } else {
        None
    };
    match found {
        Some((g, est)) => {
            st.dep = g;
            rec.accepted = true;
            rec.restored = false;
            rec.estimate_after = Some(est);
            st.audit_acyclic("dependency switch");
        }
        None => {
            rec.restored = before.map_or(true, |b| b == st.dep);
        }
    }
    let accepted = rec.accepted;
    record(st, rec);
    accepted
}

/// Replaces `(p, i) -> (q, j)` by `(q, j + 1) -> (p, i - 1)`.
fn reverse(g: &mut DependencyGraph, a: Arc, created: &mut HashSet<Arc>) -> bool {
    let (p, i, q, j) = (a.src.shelf, a.src.index, a.dst.shelf, a.dst.index);
    if g.is_traversed(WaypointId::new(p, i - 1)) || j + 1 >= g.path(q).len() {
        return false;
    }
    g.remove_arc(a.src, a.dst);
    let new = Arc {
        src: WaypointId::new(q, j + 1),
        dst: WaypointId::new(p, i - 1),
        cell: a.cell,
    };
    g.add_arc(new);
    created.insert(new);
    true
}

fn search_switch(
    g: DependencyGraph,
    created: &HashSet<Arc>,
    starts: &[Time],
    base: Option<Time>,
    limit: usize,
    depth: usize,
) -> Option<(DependencyGraph, Time)> {
    match g.find_cycle() {
        None => {
            let est = g.estimate_makespan(starts)?;
            base.is_some_and(|b| est <= b).then_some((g, est))
        }
        Some(cycle) => {
            if depth >= limit {
                return None;
            }
            for a in cycle {
                if created.contains(&a) {
                    continue;
                }
                let mut g2 = g.clone();
                let mut c2 = created.clone();
                if !reverse(&mut g2, a, &mut c2) {
                    continue;
                }
                if let Some(found) = search_switch(g2, &c2, starts, base, limit, depth + 1) {
                    return Some(found);
                }
            }
            None
        }
    }
}

/// Re-routes the unassigned shelves holding `s` back so that they keep clear
/// of its next waypoint until `s` has passed it.
pub fn group_replan(st: &mut ExecState, s: usize, t_ref: Time) -> bool {
    let before = st.config.audit.then(|| st.dep.clone());
    let base = st.estimate(t_ref);
    let mut rec = StrategyRecord {
        kind: StrategyKind::GroupReplan,
        shelf: s,
        accepted: false,
        estimate_before: base,
        estimate_after: None,
        arrival_increase: false,
        acyclic_after: true,
        restored: true,
    };
    let result = try_group_replan(st, s, t_ref, base, &mut rec);
    match result {
        Some(dep) => {
            st.dep = dep;
            rec.accepted = true;
            rec.restored = false;
            st.audit_acyclic("group replan");
        }
        None => rec.restored = before.map_or(true, |b| b == st.dep),
    }
    let accepted = rec.accepted;
    record(st, rec);
    accepted
}

fn try_group_replan(
    st: &ExecState,
    s: usize,
    t_ref: Time,
    base: Option<Time>,
    rec: &mut StrategyRecord,
) -> Option<DependencyGraph> {
    let w = WaypointId::new(s, st.dep.next(s));
    let mut group: Vec<usize> = Vec::new();
    for d in st.dep.open_deps(w) {
        let p = d.src.shelf;
        if st.shelves[p].assigned.is_some() || st.holder(p).is_some() {
            return None;
        }
        if st.dep.is_traversed(WaypointId::new(p, d.src.index - 1)) {
            return None;
        }
        if !group.contains(&p) {
            group.push(p);
        }
    }
    if group.is_empty() {
        return None;
    }
    group.sort_unstable();
    let base = base?;
    let r = extract_mapf(st, t_ref)?;
    let k = r.reach[s][w.index];
    let blocked_cell = st.dep.cell(w);
    let mut timelines = r.timelines.clone();
    let mut tails: Vec<(usize, Vec<Cell>)> = Vec::new();
    for &p in &group {
        let start = r.starts[p];
        let others: Vec<(&[Cell], Time)> = (0..timelines.len())
            .filter(|&q| q != p)
            .map(|q| (timelines[q].as_slice(), st.shelves[q].end()))
            .collect();
        let mut res = robust_reservations(st.inst.map.num_cells(), &others, start);
        for &a in &st.inst.agents {
            res.block_from(a, 0);
        }
        res.block(blocked_cell, 0, k);
        let from = st.dep.path(p)[st.dep.current(p)];
        let goal = st.inst.shelves[p].delivery;
        let h = bfs(&st.inst.map, goal);
        let path = plan_path(&st.inst.map, &res, from, start, goal, &h)?;
        let arrival = start + end_time(&path) as Time;
        if arrival > r.arrival(p) {
            rec.arrival_increase = true;
            return None;
        }
        let mut tl: Vec<Cell> = st.shelves[p].path.clone();
        while (tl.len() as Time) < start {
            tl.push(from);
        }
        tl.truncate(start as usize);
        tl.extend_from_slice(&path[..=end_time(&path)]);
        timelines[p] = tl;
        tails.push((p, simplify_path(&path)));
    }
    let mut dep = st.dep.clone();
    for (p, tail) in &tails {
        dep.set_tail(*p, &tail[1..]);
    }
    let r2 = Reconstruction {
        starts: r.starts.clone(),
        reach: r.reach.clone(),
        timelines,
    };
    let runs: Vec<Vec<Run>> = (0..dep.num_shelves()).map(|q| shelf_runs(st, &dep, &r2, q)).collect();
    rebuild_arcs(&mut dep, &runs, &group);
    if !dep.is_acyclic() {
        rec.acyclic_after = false;
        return None;
    }
    let est = dep.estimate_makespan(&r.starts)?;
    rec.estimate_after = Some(est);
    (est <= base).then_some(dep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::fixtures::walkthrough;
    use crate::instance::ExecutionConfig;
    use crate::mlsipp::CarryMoves;

    /// Shelf 0 delivered, shelf 1 held at (3,3) waiting on shelf 2.
    fn blocked<'a>(inst: &'a crate::instance::Instance, plan: &'a crate::plan::ShelfPlan) -> ExecState<'a> {
        let mut st = ExecState::new(inst, plan, &ExecutionConfig::default()).unwrap();
        st.assign(0, 0);
        st.carry(0, 0, CarryMoves::FLEXIBLE, 0).unwrap();
        st.assign(1, 1);
        st.carry(1, 1, CarryMoves::FLEXIBLE, 0).unwrap();
        st
    }

    #[test]
    fn reconstruction_ends_at_deliveries() {
        let (inst, plan) = walkthrough();
        let st = blocked(&inst, &plan);
        let r = extract_mapf(&st, 4).unwrap();
        for s in 0..4 {
            assert_eq!(*r.timelines[s].last().unwrap(), inst.shelves[s].delivery);
            assert_eq!(r.cell_at(s, 1000), inst.shelves[s].delivery);
        }
        // Shelf 1 follows shelf 2 into (4,3).
        let enter = r.timelines[1].iter().position(|&c| c == inst.map.cell(4, 3)).unwrap();
        let leave = r.timelines[2].iter().position(|&c| c != inst.map.cell(4, 3)).unwrap();
        assert!(enter > leave);
        assert_eq!(r.arrival(0), 4);
    }

    #[test]
    fn strategies_record_and_keep_graph_consistent() {
        let (inst, plan) = walkthrough();
        type Strategy = fn(&mut ExecState, usize, Time) -> bool;
        for f in [single_replan as Strategy, dep_switch, group_replan] {
            let mut st = blocked(&inst, &plan);
            let arcs = st.dep.num_arcs();
            let before = st.strategies.len();
            let ok = f(&mut st, 1, 4);
            assert_eq!(st.strategies.len(), before + 1);
            let rec = st.strategies.last().unwrap();
            assert_eq!(rec.accepted, ok);
            assert!(st.dep.is_acyclic());
            if !ok {
                assert!(rec.restored);
                assert_eq!(st.dep.num_arcs(), arcs);
            }
        }
    }
}
