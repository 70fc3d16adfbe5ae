//! Precedence graph over simplified shelf waypoints.
//!
//! Own-trajectory order is implicit (index `k` before `k + 1`). Cross-shelf
//! arcs are stored on their target node. Every cross-shelf arc `(p, i) ->
//! (q, j)` has `i >= 1` and tags the cell `τ_p(i - 1) = τ_q(j)`: shelf `q`
//! may only enter its `j`-th waypoint after `p` has moved on from that cell.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::grid::{Cell, GridMap, Time, INF};
use crate::plan::{simplify_path, ShelfPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WaypointId {
    pub shelf: usize,
    pub index: usize,
}

impl WaypointId {
    pub fn new(shelf: usize, index: usize) -> Self {
        Self { shelf, index }
    }
}

/// A cross-shelf arc as seen from its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dep {
    pub src: WaypointId,
    pub cell: Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub src: WaypointId,
    pub dst: WaypointId,
    pub cell: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    paths: Vec<Vec<Cell>>,
    incoming: Vec<Vec<Vec<Dep>>>,
    /// First time each node was reached.
    trav: Vec<Vec<Option<Time>>>,
    /// Last time each node was occupied so far.
    last_at: Vec<Vec<Option<Time>>>,
    next: Vec<usize>,
}

/// Builds the graph from a timestep-indexed plan and returns it with the
/// simplified trajectories it is anchored to.
pub fn build_dep(plan: &ShelfPlan) -> DependencyGraph {
    let m = plan.len();
    let mut paths = Vec::with_capacity(m);
    // Visits per cell: (enter time, shelf, simplified index).
    let mut visits: HashMap<Cell, Vec<(usize, usize, usize)>> = HashMap::new();
    for (s, traj) in plan.trajectories.iter().enumerate() {
        let w = &traj.waypoints;
        let mut idx = 0usize;
        for (t, &c) in w.iter().enumerate() {
            if t > 0 && w[t - 1] != c {
                idx += 1;
            }
            if t == 0 || w[t - 1] != c {
                visits.entry(c).or_default().push((t, s, idx));
            }
        }
        paths.push(simplify_path(w));
    }
    let mut g = DependencyGraph::from_paths(paths);
    let mut cells: Vec<_> = visits.into_iter().collect();
    cells.sort_by_key(|(c, _)| *c);
    for (cell, mut vs) in cells {
        vs.sort();
        for (a, &(_, p, i)) in vs.iter().enumerate() {
            for &(_, q, j) in &vs[a + 1..] {
                if p != q && i + 1 < g.paths[p].len() {
                    g.add_arc(Arc {
                        src: WaypointId::new(p, i + 1),
                        dst: WaypointId::new(q, j),
                        cell,
                    });
                }
            }
        }
    }
    g
}

impl DependencyGraph {
    /// Graph with no cross-shelf arcs; every shelf has reached its first node
    /// at time 0.
    pub fn from_paths(paths: Vec<Vec<Cell>>) -> Self {
        let incoming = paths.iter().map(|p| vec![Vec::new(); p.len()]).collect();
        let trav = paths
            .iter()
            .map(|p| {
                let mut v = vec![None; p.len()];
                v[0] = Some(0);
                v
            })
            .collect();
        let last_at = paths
            .iter()
            .map(|p| {
                let mut v = vec![None; p.len()];
                v[0] = Some(0);
                v
            })
            .collect();
        let next = vec![1; paths.len()];
        Self {
            paths,
            incoming,
            trav,
            last_at,
            next,
        }
    }

    pub fn num_shelves(&self) -> usize {
        self.paths.len()
    }

    pub fn path(&self, s: usize) -> &[Cell] {
        &self.paths[s]
    }

    pub fn paths(&self) -> &[Vec<Cell>] {
        &self.paths
    }

    pub fn cell(&self, w: WaypointId) -> Cell {
        self.paths[w.shelf][w.index]
    }

    /// First untraversed index of `s`; equals the path length once complete.
    pub fn next(&self, s: usize) -> usize {
        self.next[s]
    }

    /// Last traversed index of `s`.
    pub fn current(&self, s: usize) -> usize {
        self.next[s] - 1
    }

    pub fn is_complete(&self, s: usize) -> bool {
        self.next[s] == self.paths[s].len()
    }

    pub fn is_traversed(&self, w: WaypointId) -> bool {
        w.index < self.next[w.shelf]
    }

    pub fn traversal_time(&self, w: WaypointId) -> Option<Time> {
        self.trav[w.shelf][w.index]
    }

    /// Last time the shelf of `src` stood on the arc's tag cell before
    /// reaching `src`.
    pub fn passing_time(&self, src: WaypointId) -> Option<Time> {
        self.last_at[src.shelf][src.index - 1]
    }

    pub fn deps(&self, w: WaypointId) -> &[Dep] {
        &self.incoming[w.shelf][w.index]
    }

    pub fn num_arcs(&self) -> usize {
        self.incoming.iter().flatten().map(Vec::len).sum()
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.incoming.iter().enumerate().flat_map(|(q, nodes)| {
            nodes.iter().enumerate().flat_map(move |(j, deps)| {
                deps.iter().map(move |d| Arc {
                    src: d.src,
                    dst: WaypointId::new(q, j),
                    cell: d.cell,
                })
            })
        })
    }

    pub fn has_arc(&self, src: WaypointId, dst: WaypointId) -> bool {
        self.deps(dst).iter().any(|d| d.src == src)
    }

    /// Adds a cross-shelf arc unless an identical one exists.
    pub fn add_arc(&mut self, arc: Arc) -> bool {
        debug_assert!(arc.src.shelf != arc.dst.shelf && arc.src.index >= 1);
        let deps = &mut self.incoming[arc.dst.shelf][arc.dst.index];
        let dep = Dep {
            src: arc.src,
            cell: arc.cell,
        };
        if deps.contains(&dep) {
            return false;
        }
        deps.push(dep);
        true
    }

    pub fn remove_arc(&mut self, src: WaypointId, dst: WaypointId) -> bool {
        let deps = &mut self.incoming[dst.shelf][dst.index];
        let before = deps.len();
        deps.retain(|d| d.src != src);
        before != deps.len()
    }

    /// Untraversed sources constraining `w`.
    pub fn open_deps(&self, w: WaypointId) -> impl Iterator<Item = &Dep> + '_ {
        self.deps(w).iter().filter(|d| !self.is_traversed(d.src))
    }

    pub fn is_constrained(&self, w: WaypointId) -> bool {
        self.open_deps(w).next().is_some()
    }

    /// Records that shelf `s` occupied node `nodes[k]` at time `start + k`.
    /// Nodes must move by at most one index per step.
    pub fn commit(&mut self, s: usize, start: Time, nodes: &[usize]) {
        for (k, &n) in nodes.iter().enumerate() {
            let t = start + k as Time;
            if self.trav[s][n].is_none() {
                self.trav[s][n] = Some(t);
            }
            self.last_at[s][n] = Some(t);
            if n + 1 > self.next[s] {
                debug_assert_eq!(n, self.next[s]);
                self.next[s] = n + 1;
            }
        }
    }

    /// Release time of the next waypoint of `s` given the end time of its
    /// committed path: `INF` while a predecessor is outstanding, `None` once
    /// the shelf is complete.
    pub fn release_time(&self, s: usize, free_at: Time) -> Option<Time> {
        if self.is_complete(s) {
            return None;
        }
        Some(self.entry_bound(WaypointId::new(s, self.next[s])).map_or(INF, |b| b.max(free_at)))
    }

    /// Latest predecessor passing time of `w`, `Some(0)` when unconstrained,
    /// `None` while a predecessor is untraversed.
    pub fn entry_bound(&self, w: WaypointId) -> Option<Time> {
        let mut bound = 0;
        for d in self.deps(w) {
            if !self.is_traversed(d.src) {
                return None;
            }
            bound = bound.max(self.passing_time(d.src).unwrap_or(0));
        }
        Some(bound)
    }

    /// The furthest index reachable from `s.next` without hitting a
    /// constrained waypoint, with the entry bound of each waypoint from
    /// `s.next` on. `None` when `s.next` itself is constrained or `s` is
    /// complete.
    pub fn unconstrained_segment(&self, s: usize) -> Option<(usize, Vec<Time>)> {
        let mut bounds = Vec::new();
        for j in self.next[s]..self.paths[s].len() {
            match self.entry_bound(WaypointId::new(s, j)) {
                Some(b) => bounds.push(b),
                None => break,
            }
        }
        (!bounds.is_empty()).then(|| (self.next[s] + bounds.len() - 1, bounds))
    }

    /// Removes cross-shelf arcs whose source was reached, and whose tag cell
    /// was last occupied, no later than `t_star`.
    pub fn prune(&mut self, t_star: Time) -> usize {
        let mut removed = 0;
        let trav = &self.trav;
        let last_at = &self.last_at;
        for nodes in &mut self.incoming {
            for deps in nodes {
                let before = deps.len();
                deps.retain(|d| {
                    let reached = trav[d.src.shelf][d.src.index].is_some_and(|t| t <= t_star);
                    let left = last_at[d.src.shelf][d.src.index - 1].map_or(true, |t| t <= t_star);
                    !(reached && left)
                });
                removed += before - deps.len();
            }
        }
        removed
    }

    /// Outgoing cross-shelf arcs indexed by source node.
    fn outgoing(&self) -> Vec<Vec<Vec<(WaypointId, Cell)>>> {
        let mut out: Vec<Vec<Vec<(WaypointId, Cell)>>> =
            self.paths.iter().map(|p| vec![Vec::new(); p.len()]).collect();
        for a in self.arcs() {
            out[a.src.shelf][a.src.index].push((a.dst, a.cell));
        }
        out
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    /// Topological order of all nodes, or `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<WaypointId>> {
        let out = self.outgoing();
        let mut indeg: Vec<Vec<usize>> = self
            .incoming
            .iter()
            .map(|nodes| {
                nodes
                    .iter()
                    .enumerate()
                    .map(|(j, d)| d.len() + usize::from(j > 0))
                    .collect()
            })
            .collect();
        let mut stack: Vec<WaypointId> = (0..self.paths.len())
            .rev()
            .filter(|&s| indeg[s][0] == 0)
            .map(|s| WaypointId::new(s, 0))
            .collect();
        let total: usize = self.paths.iter().map(Vec::len).sum();
        let mut order = Vec::with_capacity(total);
        while let Some(w) = stack.pop() {
            order.push(w);
            let succ = (w.index + 1 < self.paths[w.shelf].len())
                .then(|| WaypointId::new(w.shelf, w.index + 1))
                .into_iter()
                .chain(out[w.shelf][w.index].iter().map(|&(d, _)| d));
            for d in succ {
                indeg[d.shelf][d.index] -= 1;
                if indeg[d.shelf][d.index] == 0 {
                    stack.push(d);
                }
            }
        }
        (order.len() == total).then_some(order)
    }

    /// Some cycle as its list of cross-shelf arcs, found by a depth-first
    /// walk in node order.
    pub fn find_cycle(&self) -> Option<Vec<Arc>> {
        let out = self.outgoing();
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark: Vec<Vec<Mark>> = self.paths.iter().map(|p| vec![Mark::New; p.len()]).collect();
        for s in 0..self.paths.len() {
            for k in 0..self.paths[s].len() {
                if mark[s][k] != Mark::New {
                    continue;
                }
                // Iterative DFS; stack entries carry the arc used to enter.
                let root = WaypointId::new(s, k);
                let mut stack: Vec<(WaypointId, usize, Option<Arc>)> = vec![(root, 0, None)];
                mark[s][k] = Mark::Active;
                while let Some(&mut (w, ref mut child, _)) = stack.last_mut() {
                    let own = usize::from(w.index + 1 < self.paths[w.shelf].len());
                    let succ_count = own + out[w.shelf][w.index].len();
                    if *child == succ_count {
                        mark[w.shelf][w.index] = Mark::Done;
                        stack.pop();
                        continue;
                    }
                    let c = *child;
                    *child += 1;
                    let (d, arc) = if c < own {
                        (WaypointId::new(w.shelf, w.index + 1), None)
                    } else {
                        let (d, cell) = out[w.shelf][w.index][c - own];
                        (d, Some(Arc { src: w, dst: d, cell }))
                    };
                    match mark[d.shelf][d.index] {
                        Mark::New => {
                            mark[d.shelf][d.index] = Mark::Active;
                            stack.push((d, 0, arc));
                        }
                        Mark::Active => {
                            let mut cycle: Vec<Arc> = arc.into_iter().collect();
                            for &(node, _, entered) in stack.iter().rev() {
                                if node == d {
                                    break;
                                }
                                cycle.extend(entered);
                            }
                            cycle.reverse();
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                }
            }
        }
        None
    }

    /// Earliest times each node can be reached when every shelf moves by
    /// itself one waypoint per step from `start[s]`, waiting on its
    /// predecessors. Entry `[s][k]` for `k < current` is unused (0).
    pub fn propagate(&self, start: &[Time]) -> Option<Vec<Vec<Time>>> {
        let order = self.topo_order()?;
        let mut reach: Vec<Vec<Time>> = self.paths.iter().map(|p| vec![0; p.len()]).collect();
        for w in order {
            let (s, k) = (w.shelf, w.index);
            if k + 1 < self.next[s] {
                continue;
            }
            if k + 1 == self.next[s] {
                reach[s][k] = start[s];
                continue;
            }
            let mut t = reach[s][k - 1];
            for d in self.deps(w) {
                let pred = if self.is_traversed(d.src) {
                    self.passing_time(d.src).unwrap_or(0)
                } else {
                    reach[d.src.shelf][d.src.index]
                };
                t = t.max(pred);
            }
            reach[s][k] = t + 1;
        }
        Some(reach)
    }

    /// Largest completion time under [`Self::propagate`].
    pub fn estimate_makespan(&self, start: &[Time]) -> Option<Time> {
        let reach = self.propagate(start)?;
        Some(
            reach
                .iter()
                .zip(&self.next)
                .zip(start)
                .map(|((r, &n), &st)| if n == r.len() { st } else { *r.last().unwrap() })
                .max()
                .unwrap_or(0),
        )
    }

    /// Replaces every node of `s` from `s.next` on with `tail`, dropping all
    /// cross-shelf arcs that touch the replaced nodes.
    pub fn set_tail(&mut self, s: usize, tail: &[Cell]) {
        let n = self.next[s];
        for nodes in &mut self.incoming {
            for deps in nodes.iter_mut() {
                deps.retain(|d| !(d.src.shelf == s && d.src.index >= n));
            }
        }
        self.paths[s].truncate(n);
        self.paths[s].extend_from_slice(tail);
        let len = self.paths[s].len();
        self.incoming[s].truncate(n);
        self.incoming[s].resize(len, Vec::new());
        self.trav[s].resize(len, None);
        self.trav[s].truncate(len);
        self.last_at[s].resize(len, None);
        self.last_at[s].truncate(len);
    }

    /// DOT rendering: nodes `s:k@(r,c)`, solid own-order edges, dashed
    /// cross-shelf arcs.
    pub fn to_dot(&self, map: &GridMap) -> String {
        let mut out = String::from("digraph dependencies {\n  rankdir=LR;\n");
        let name = |w: WaypointId| {
            let (r, c) = map.coord(self.paths[w.shelf][w.index]);
            format!("\"{}:{}@({},{})\"", w.shelf, w.index, r, c)
        };
        for (s, p) in self.paths.iter().enumerate() {
            for k in 0..p.len() {
                let w = WaypointId::new(s, k);
                let style = if self.is_traversed(w) { ", style=filled" } else { "" };
                let _ = writeln!(out, "  {} [shape=circle{}];", name(w), style);
            }
            for k in 1..p.len() {
                let _ = writeln!(
                    out,
                    "  {} -> {};",
                    name(WaypointId::new(s, k - 1)),
                    name(WaypointId::new(s, k))
                );
            }
        }
        for a in self.arcs() {
            let _ = writeln!(out, "  {} -> {} [style=dashed];", name(a.src), name(a.dst));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(m: &GridMap, xs: &[(usize, usize)]) -> Vec<Cell> {
        xs.iter().map(|&(r, c)| m.cell(r, c)).collect()
    }

    #[test]
    fn single_shelf_has_no_cross_arcs() {
        let m = GridMap::open(4, 1);
        let plan = ShelfPlan::from_paths(vec![cells(&m, &[(0, 0), (0, 1), (0, 1), (0, 2)])]);
        let g = build_dep(&plan);
        assert_eq!(g.path(0).len(), 3);
        assert_eq!(g.num_arcs(), 0);
        assert!(g.is_acyclic());
    }

    #[test]
    fn crossing_creates_one_arc_on_merged_nodes() {
        let m = GridMap::open(3, 3);
        // Shelf 0 passes (1,1) at t=1..2, shelf 1 enters it at t=4.
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (0, 1), (1, 1), (2, 1)]),
        ]);
        let g = build_dep(&plan);
        let arcs: Vec<Arc> = g.arcs().collect();
        assert_eq!(
            arcs,
            vec![Arc {
                src: WaypointId::new(0, 2),
                dst: WaypointId::new(1, 1),
                cell: m.cell(1, 1)
            }]
        );
        assert_eq!(g.release_time(0, 0), Some(0));
        assert_eq!(g.release_time(1, 0), Some(INF));
        assert!(g.is_constrained(WaypointId::new(1, 1)));
        assert_eq!(g.unconstrained_segment(1), None);
        assert_eq!(g.unconstrained_segment(0), Some((2, vec![0, 0])));
    }

    #[test]
    fn release_follows_passing_time() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1)]),
        ]);
        let mut g = build_dep(&plan);
        assert_eq!(g.num_arcs(), 1);
        // Shelf 1's first move waits on node (0,2).
        assert_eq!(g.release_time(0, 0), Some(0));
        assert_eq!(g.unconstrained_segment(1), None);
        // Shelf 0 stands on (1,1) at t=2, reaches (1,2) at t=3.
        g.commit(0, 0, &[0, 0, 1, 2]);
        assert_eq!(g.passing_time(WaypointId::new(0, 2)), Some(2));
        assert_eq!(g.release_time(1, 0), Some(2));
        assert_eq!(g.release_time(1, 5), Some(5));
        assert_eq!(g.release_time(0, 3), None);
    }

    #[test]
    fn three_shelf_chain_takes_max_passing() {
        let m = GridMap::open(5, 5);
        let v = m.cell(2, 2);
        let mut g = DependencyGraph::from_paths(vec![
            cells(&m, &[(2, 1), (2, 2), (2, 3)]),
            cells(&m, &[(1, 2), (2, 2), (3, 2)]),
            cells(&m, &[(2, 4), (2, 2)]),
        ]);
        // Hand-made chain on v: 0 before 2, 1 before 2.
        g.add_arc(Arc { src: WaypointId::new(0, 2), dst: WaypointId::new(2, 1), cell: v });
        g.add_arc(Arc { src: WaypointId::new(1, 2), dst: WaypointId::new(2, 1), cell: v });
        assert_eq!(g.release_time(2, 0), Some(INF));
        g.commit(0, 0, &[0, 1, 2]);
        assert_eq!(g.release_time(2, 0), Some(INF));
        g.commit(1, 0, &[0, 0, 0, 1, 1, 2]);
        assert_eq!(g.release_time(2, 0), Some(4));
    }

    #[test]
    fn back_arc_closes_cycle() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1), (2, 1)]),
        ]);
        let mut g = build_dep(&plan);
        assert!(g.is_acyclic() && g.find_cycle().is_none());
        g.add_arc(Arc { src: WaypointId::new(1, 2), dst: WaypointId::new(0, 1), cell: m.cell(1, 1) });
        assert!(!g.is_acyclic());
        let cyc = g.find_cycle().unwrap();
        assert_eq!(cyc.len(), 2);
    }

    #[test]
    fn prune_respects_t_star() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1)]),
        ]);
        let mut g = build_dep(&plan);
        assert_eq!(g.prune(0), 0);
        g.commit(0, 0, &[0, 1, 2]);
        assert_eq!(g.prune(1), 0);
        assert_eq!(g.prune(2), 1);
        assert_eq!(g.release_time(1, 2), Some(2));
    }

    #[test]
    fn estimate_single_chain() {
        let m = GridMap::open(5, 1);
        let path = cells(&m, &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)]);
        let g = DependencyGraph::from_paths(vec![path]);
        // Five waypoints counting the current one, starting at 3.
        assert_eq!(g.estimate_makespan(&[3]), Some(7));
        assert_eq!(g.estimate_makespan(&[0]), Some(4));
    }

    #[test]
    fn estimate_waits_on_predecessor() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1), (2, 1)]),
        ]);
        let g = build_dep(&plan);
        // Shelf 0 reaches (1,2) at 2, so shelf 1 enters (1,1) at 3.
        let reach = g.propagate(&[0, 0]).unwrap();
        assert_eq!(reach[1], vec![0, 3, 4]);
        assert_eq!(g.estimate_makespan(&[0, 0]), Some(4));
        assert_eq!(g.estimate_makespan(&[5, 0]), Some(9));
    }

    #[test]
    fn set_tail_drops_touching_arcs() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1), (2, 1)]),
        ]);
        let mut g = build_dep(&plan);
        g.set_tail(0, &cells(&m, &[(2, 0)]));
        assert_eq!(g.num_arcs(), 0);
        assert_eq!(g.path(0).len(), 2);
        g.set_tail(1, &cells(&m, &[(0, 2), (1, 2), (2, 2)]));
        assert_eq!(g.path(1).len(), 4);
    }

    #[test]
    fn dot_mentions_nodes_and_dashed_arcs() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![
            cells(&m, &[(1, 0), (1, 1), (1, 2)]),
            cells(&m, &[(0, 1), (0, 1), (0, 1), (1, 1), (2, 1)]),
        ]);
        let dot = build_dep(&plan).to_dot(&m);
        assert!(dot.contains("\"0:2@(1,2)\" -> \"1:1@(1,1)\" [style=dashed]"));
        assert!(dot.contains("\"1:0@(0,1)\" -> \"1:1@(1,1)\";"));
    }
}
