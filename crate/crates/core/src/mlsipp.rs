//! Multi-label safe interval planning for one carry: reach the shelf, carry
//! it along an unconstrained stretch of its trajectory, then keep a return
//! path to the agent's start in reserve.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::grid::{Cell, DistanceOracle, Time, INF, UNREACHABLE};
use crate::intervals::Reservations;

/// Committed motion of everyone except the planning agent and its shelf.
#[derive(Clone, Debug)]
pub struct ReservationTable {
    pub agents: Reservations,
    /// Reserved agent moves `(from, to, depart)`.
    pub agent_moves: HashSet<(Cell, Cell, Time)>,
    pub shelves: Reservations,
    max_finite: Time,
}

impl ReservationTable {
    pub fn new(num_cells: usize) -> Self {
        Self {
            agents: Reservations::new(num_cells),
            agent_moves: HashSet::new(),
            shelves: Reservations::new(num_cells),
            max_finite: 0,
        }
    }

    /// Reserves an agent path starting at `start`; with `hold` the agent stays
    /// on its last cell forever.
    pub fn add_agent_path(&mut self, path: &[Cell], start: Time, hold: bool) {
        self.agents.reserve_exact(path, start, hold);
        for (k, w) in path.windows(2).enumerate() {
            if w[0] != w[1] {
                self.agent_moves.insert((w[0], w[1], start + k as Time));
            }
        }
        self.max_finite = self.max_finite.max(start + path.len() as Time);
    }

    pub fn add_shelf_path(&mut self, path: &[Cell], start: Time, hold: bool) {
        self.shelves.reserve_exact(path, start, hold);
        self.max_finite = self.max_finite.max(start + path.len() as Time);
    }

    /// Latest finite time mentioned by any reservation.
    pub fn max_finite(&self) -> Time {
        self.max_finite
    }

    /// An agent moving `from -> to` departing at `t` collides with nobody.
    pub fn move_ok(&self, from: Cell, to: Cell, t: Time) -> bool {
        !self.agent_moves.contains(&(to, from, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CarryMoves {
    /// Waiting while carrying, anywhere on the segment.
    pub wait: bool,
    pub backward: bool,
}

impl CarryMoves {
    pub const FLEXIBLE: Self = Self {
        wait: true,
        backward: true,
    };
    pub const FORWARD_ONLY: Self = Self {
        wait: false,
        backward: false,
    };
}

#[derive(Clone, Debug)]
pub struct CarryQuery<'a> {
    pub agent_start: Cell,
    pub start_time: Time,
    pub home: Cell,
    /// The agent holds a different shelf that it places at `agent_start`
    /// first.
    pub pending_place: bool,
    /// The agent already holds the shelf at `segment[0]`.
    pub holding: bool,
    /// Cells of the shelf from its current waypoint to the stopping one.
    pub segment: &'a [Cell],
    /// Entering `segment[j]` is only allowed strictly after `enter_after[j]`;
    /// `enter_after[0]` is the earliest lift start.
    pub enter_after: &'a [Time],
    pub overhead: Time,
    pub moves: CarryMoves,
    /// Stay at the start until this time when the start cell allows it.
    pub earliest_departure: Time,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedCarry {
    /// Agent cells from `start_time` to `arrival`.
    pub path: Vec<Cell>,
    pub lift_time: Option<Time>,
    /// Time at which the shelf is lifted and ready to move.
    pub carry_start: Time,
    /// Segment index of the shelf at each step from `carry_start` to `arrival`.
    pub shelf_nodes: Vec<usize>,
    pub arrival: Time,
    /// A held shelf was put down at the start and lifted again later.
    pub released: bool,
    /// Return path starting at `arrival` on `segment.last()`, including the
    /// place at the start.
    pub dummy: Vec<Cell>,
    pub expanded: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Reach { cell: Cell, iv: usize },
    Carry { j: usize, iv: usize, t: Time },
}

struct Node {
    key: Key,
    g: Time,
    parent: Option<usize>,
}

#[derive(Default)]
struct Frontier {
    nodes: Vec<Node>,
    best: HashMap<Key, Time>,
    open: BinaryHeap<Reverse<(Time, Time, Time, Cell, usize)>>,
}

impl Frontier {
    fn push(&mut self, s: &Search, key: Key, g: Time, waits: Time, parent: Option<usize>) {
        if self.best.get(&key).is_some_and(|&old| old <= g) {
            return;
        }
        let h = s.h(key);
        if h >= INF / 2 {
            return;
        }
        self.best.insert(key, g);
        let cell = match key {
            Key::Reach { cell, .. } => cell,
            Key::Carry { j, .. } => s.q.segment[j],
        };
        self.nodes.push(Node { key, g, parent });
        self.open
            .push(Reverse((g.saturating_add(h), g, waits, cell, self.nodes.len() - 1)));
    }
}

struct Search<'a> {
    q: &'a CarryQuery<'a>,
    res: &'a ReservationTable,
    dist: &'a DistanceOracle,
    agent_iv: HashMap<Cell, Vec<(Time, Time)>>,
    combined_iv: HashMap<Cell, Vec<(Time, Time)>>,
    horizon: Time,
}

fn merge_intervals(a: &[(Time, Time)], b: &[(Time, Time)]) -> Vec<(Time, Time)> {
    let mut all: Vec<(Time, Time)> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    let mut out: Vec<(Time, Time)> = Vec::new();
    for (x, y) in all {
        match out.last_mut() {
            Some(last) if last.1 >= x => last.1 = last.1.max(y),
            _ => out.push((x, y)),
        }
    }
    out
}

fn complement(blocked: &[(Time, Time)]) -> Vec<(Time, Time)> {
    let mut out = Vec::new();
    let mut start = 0;
    for &(a, b) in blocked {
        if a > start {
            out.push((start, a));
        }
        start = start.max(b);
    }
    if start < INF {
        out.push((start, INF));
    }
    out
}

fn find_iv(ivs: &[(Time, Time)], t: Time) -> Option<usize> {
    let i = ivs.partition_point(|&(a, _)| a <= t);
    (i > 0 && ivs[i - 1].1 > t).then(|| i - 1)
}

impl<'a> Search<'a> {
    fn agent(&mut self, c: Cell) -> &[(Time, Time)] {
        let res = self.res;
        self.agent_iv.entry(c).or_insert_with(|| res.agents.safe_intervals(c))
    }

    fn combined(&mut self, c: Cell) -> &[(Time, Time)] {
        let res = self.res;
        self.combined_iv
            .entry(c)
            .or_insert_with(|| complement(&merge_intervals(res.agents.blocked(c), res.shelves.blocked(c))))
    }

    fn last(&self) -> usize {
        self.q.segment.len() - 1
    }

    fn h(&self, key: Key) -> Time {
        let l = self.last();
        match key {
            Key::Reach { cell, .. } => {
                let d = self.dist.dist(cell, self.q.segment[0]);
                if d == UNREACHABLE {
                    INF / 2
                } else {
                    d + self.q.overhead + l as Time
                }
            }
            Key::Carry { j, .. } => (l - j) as Time,
        }
    }

    /// Earliest arrivals into the intervals of `to` when leaving `from`
    /// (safe until `end`) no earlier than `g`.
    fn moves_into(&self, ivs: &[(Time, Time)], from: Cell, to: Cell, g: Time, end: Time, lower: Time) -> Vec<(usize, Time)> {
        let mut out = Vec::new();
        for (i, &(a, b)) in ivs.iter().enumerate() {
            let mut t = (g + 1).max(a).max(lower);
            if t > end || a > end {
                break;
            }
            while t < b && t <= end && !self.res.move_ok(from, to, t - 1) {
                t += 1;
            }
            if t < b && t <= end {
                out.push((i, t));
            }
        }
        out
    }
}

/// Plans one carry. Minimizes the arrival time at the last segment cell; the
/// return path is time-minimal given that arrival.
pub fn plan_carry(q: &CarryQuery, res: &ReservationTable, dist: &DistanceOracle) -> Option<PlannedCarry> {
    assert!(!q.segment.is_empty() && q.enter_after.len() == q.segment.len());
    let horizon = res.max_finite().max(q.start_time).max(q.earliest_departure)
        + 2 * (q.segment.len() as Time + q.overhead + 2)
        + dist.map().num_cells() as Time;
    let mut s = Search {
        q,
        res,
        dist,
        agent_iv: HashMap::new(),
        combined_iv: HashMap::new(),
        horizon,
    };
    let delta = q.overhead;
    let pending = if q.pending_place { delta } else { 0 };
    let mut t0 = q.start_time + pending;
    let start_ivs = s.agent(q.agent_start).to_vec();
    let iv0 = find_iv(&start_ivs, q.start_time)?;
    if start_ivs[iv0].1 <= t0 {
        return None;
    }
    if q.earliest_departure > t0 && start_ivs[iv0].1 > q.earliest_departure {
        t0 = q.earliest_departure;
    }

    let mut f = Frontier::default();

    // Prefix of the real path before the search starts (place and waiting).
    if q.holding {
        debug_assert_eq!(q.agent_start, q.segment[0]);
        let ivs = s.combined(q.segment[0]).to_vec();
        let iv = find_iv(&ivs, t0)?;
        let key = Key::Carry {
            j: 0,
            iv: if q.moves.wait { iv } else { 0 },
            t: if q.moves.wait { 0 } else { t0 },
        };
        f.push(&s, key, t0, 0, None);
        // Putting the shelf down follows the reserved return path, so it may
        // start before `earliest_departure`.
        let placed = q.start_time + delta;
        if start_ivs[iv0].1 > placed {
            f.push(&s, Key::Reach { cell: q.agent_start, iv: iv0 }, placed, 0, None);
        }
    } else {
        f.push(&s, Key::Reach { cell: q.agent_start, iv: iv0 }, t0, 0, None);
    }

    let last = s.last();
    let mut expanded = 0usize;
    while let Some(Reverse((_, g, waits, _, id))) = f.open.pop() {
        let key = f.nodes[id].key;
        if f.best.get(&key) != Some(&g) {
            continue;
        }
        expanded += 1;
        match key {
            Key::Reach { cell, iv } => {
                let (_, end) = s.agent(cell)[iv];
                // Lift once the shelf is there, then start carrying.
                let lift = g.max(q.enter_after[0]);
                if cell == q.segment[0] && lift + delta < end {
                    let t = lift + delta;
                    let ivs = s.combined(cell).to_vec();
                    if let Some(civ) = find_iv(&ivs, t) {
                        let k = Key::Carry {
                            j: 0,
                            iv: if q.moves.wait { civ } else { 0 },
                            t: if q.moves.wait { 0 } else { t },
                        };
                        f.push(&s, k, t, waits, Some(id));
                    }
                }
                let neighbors: Vec<Cell> = dist.map().neighbors(cell).collect();
                for n in neighbors {
                    let ivs = s.agent(n).to_vec();
                    for (niv, t) in s.moves_into(&ivs, cell, n, g, end, 0) {
                        f.push(&s, Key::Reach { cell: n, iv: niv }, t, waits, Some(id));
                    }
                }
            }
            Key::Carry { j, iv, .. } => {
                let cell = q.segment[j];
                if j == last && res.shelves.is_free_forever(cell, g) && res.agents.is_free_during(cell, g, g + delta + 1) {
                    if let Some(dummy) = return_path(&mut s, cell, g, delta) {
                        let (path, mut lift_time, mut carry_start, mut shelf_nodes) =
                            reconstruct(&s, &f.nodes, id, q);
                        if !q.moves.wait && lift_time.is_some() {
                            // Waiting on the first cell is a later lift.
                            let idle = shelf_nodes.iter().take_while(|&&n| n == 0).count() - 1;
                            shelf_nodes.drain(..idle);
                            carry_start += idle as Time;
                            lift_time = Some(carry_start - delta);
                        }
                        let released = q.holding && matches!(f.nodes[root(&f.nodes, id)].key, Key::Reach { .. });
                        return Some(PlannedCarry {
                            path,
                            released,
                            lift_time,
                            carry_start,
                            shelf_nodes,
                            arrival: g,
                            dummy,
                            expanded,
                        });
                    }
                }
                let mut targets = vec![j + 1];
                if q.moves.backward && j > 0 {
                    targets.push(j - 1);
                }
                if q.moves.wait {
                    let (_, end) = s.combined(cell)[iv];
                    for nj in targets {
                        if nj > last {
                            continue;
                        }
                        let n = q.segment[nj];
                        let ivs = s.combined(n).to_vec();
                        let lower = q.enter_after[nj].saturating_add(1);
                        for (niv, t) in s.moves_into(&ivs, cell, n, g, end, lower) {
                            let w = waits + (t - g - 1);
                            f.push(&s, Key::Carry { j: nj, iv: niv, t: 0 }, t, w, Some(id));
                        }
                    }
                } else {
                    let t = g + 1;
                    if j == 0 && t <= s.horizon && !res.agents.is_blocked(cell, t) && !res.shelves.is_blocked(cell, t) {
                        f.push(&s, Key::Carry { j: 0, iv: 0, t }, t, waits, Some(id));
                    }
                    for nj in targets {
                        if nj > last {
                            continue;
                        }
                        let n = q.segment[nj];
                        if t > q.enter_after[nj]
                            && !res.agents.is_blocked(n, t)
                            && !res.shelves.is_blocked(n, t)
                            && res.move_ok(cell, n, g)
                        {
                            f.push(&s, Key::Carry { j: nj, iv: 0, t }, t, waits, Some(id));
                        }
                    }
                }
            }
        }
    }
    None
}

fn root(nodes: &[Node], mut id: usize) -> usize {
    while let Some(p) = nodes[id].parent {
        id = p;
    }
    id
}

fn reconstruct(s: &Search, nodes: &[Node], goal: usize, q: &CarryQuery) -> (Vec<Cell>, Option<Time>, Time, Vec<usize>) {
    let mut chain = Vec::new();
    let mut cur = Some(goal);
    while let Some(id) = cur {
        chain.push(id);
        cur = nodes[id].parent;
    }
    chain.reverse();
    let cell_of = |k: Key| match k {
        Key::Reach { cell, .. } => cell,
        Key::Carry { j, .. } => s.q.segment[j],
    };
    let first = &nodes[chain[0]];
    let mut path: Vec<Cell> = vec![q.agent_start; (first.g - q.start_time) as usize];
    let mut lift_time = None;
    let mut carry_start = first.g;
    let mut shelf_nodes: Vec<usize> = Vec::new();
    for w in chain.windows(2) {
        let (a, b) = (&nodes[w[0]], &nodes[w[1]]);
        let stay = cell_of(a.key);
        for _ in a.g..b.g {
            path.push(stay);
        }
        match (a.key, b.key) {
            (Key::Reach { .. }, Key::Carry { .. }) => {
                lift_time = Some(b.g - q.overhead);
                carry_start = b.g;
            }
            (Key::Carry { j, .. }, Key::Carry { .. }) => {
                for _ in a.g..b.g {
                    shelf_nodes.push(j);
                }
            }
            _ => {}
        }
    }
    let goal_node = &nodes[goal];
    path.push(cell_of(goal_node.key));
    if let Key::Carry { j, .. } = goal_node.key {
        shelf_nodes.push(j);
    }
    debug_assert_eq!(path.len() as Time, goal_node.g - q.start_time + 1);
    debug_assert_eq!(shelf_nodes.len() as Time, goal_node.g - carry_start + 1);
    (path, lift_time, carry_start, shelf_nodes)
}

/// Time-minimal path home from `cell` after a place occupying `[g, g + delta]`.
fn return_path(s: &mut Search, cell: Cell, g: Time, delta: Time) -> Option<Vec<Cell>> {
    let home = s.q.home;
    let start = g + delta;
    let ivs = s.agent(cell).to_vec();
    let iv = find_iv(&ivs, g)?;
    if ivs[iv].1 <= start {
        return None;
    }
    let mut best: HashMap<(Cell, usize), Time> = HashMap::new();
    let mut parent: HashMap<(Cell, usize), (Cell, usize)> = HashMap::new();
    let mut open = BinaryHeap::new();
    best.insert((cell, iv), start);
    let h = |c: Cell| s.dist.dist(c, home);
    open.push(Reverse((start as u64 + h(cell) as u64, start, cell, iv)));
    while let Some(Reverse((_, t, c, i))) = open.pop() {
        if best.get(&(c, i)) != Some(&t) {
            continue;
        }
        let (_, end) = s.agent(c)[i];
        if c == home && end == INF {
            let mut chain = vec![(c, t)];
            let mut k = (c, i);
            while let Some(&p) = parent.get(&k) {
                chain.push((p.0, best[&p]));
                k = p;
            }
            chain.reverse();
            let mut path = vec![cell; delta as usize];
            for w in chain.windows(2) {
                for _ in w[0].1..w[1].1 {
                    path.push(w[0].0);
                }
            }
            path.push(c);
            return Some(path);
        }
        let neighbors: Vec<Cell> = s.dist.map().neighbors(c).collect();
        for n in neighbors {
            if h(n) == UNREACHABLE {
                continue;
            }
            let nivs = s.agent(n).to_vec();
            for (ni, nt) in s.moves_into(&nivs, c, n, t, end, 0) {
                if best.get(&(n, ni)).map_or(true, |&old| nt < old) {
                    best.insert((n, ni), nt);
                    parent.insert((n, ni), (c, i));
                    open.push(Reverse((nt as u64 + h(n) as u64, nt, n, ni)));
                }
            }
        }
    }
    None
}
