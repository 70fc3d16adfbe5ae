//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use crest::grid::{Cell, DistanceOracle, GridMap, Time};
use crest::mlsipp::{plan_carry, CarryMoves, CarryQuery, ReservationTable};
use rand::seq::SliceRandom;
use rand::Rng;

/// Plain BFS distances (`u32::MAX` for unreachable).
pub fn bfs_dist(map: &GridMap, from: Cell) -> Vec<u32> {
    let mut d = vec![u32::MAX; map.num_cells()];
    if !map.is_free(from) {
        return d;
    }
    d[from.index()] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        let (r, col) = map.coord(c);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            if let Some(n) = map.try_cell(r as i64 + dr, col as i64 + dc) {
                if map.is_free(n) && d[n.index()] == u32::MAX {
                    d[n.index()] = d[c.index()] + 1;
                    q.push_back(n);
                }
            }
        }
    }
    d
}

/// Minimum total cost over all maximum matchings, by enumeration.
pub fn brute_assignment(cost: &[Vec<i64>]) -> i64 {
    let rows = cost.len();
    let cols = cost[0].len();
    let k = rows.min(cols);
    let mut best = i64::MAX;
    let mut used = vec![false; cols];
    fn go(cost: &[Vec<i64>], r: usize, left: usize, used: &mut [bool], acc: i64, best: &mut i64) {
        let rows = cost.len();
        if left == 0 {
            *best = (*best).min(acc);
            return;
        }
        if rows - r < left {
            return;
        }
        // Row r unmatched.
        if rows - r > left {
            go(cost, r + 1, left, used, acc, best);
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                go(cost, r + 1, left - 1, used, acc + cost[r][c], best);
                used[c] = false;
            }
        }
    }
    go(cost, 0, k, &mut used, 0, &mut best);
    best
}

/// A path that starts at `start` and optionally stays on its last cell.
#[derive(Clone, Debug)]
pub struct Timed {
    pub cells: Vec<Cell>,
    pub start: Time,
    pub hold: bool,
}

impl Timed {
    pub fn at(&self, t: Time) -> Option<Cell> {
        if t < self.start {
            return None;
        }
        let k = (t - self.start) as usize;
        match self.cells.get(k) {
            Some(&c) => Some(c),
            None if self.hold => self.cells.last().copied(),
            None => None,
        }
    }
}

/// Everything committed before a carry query, as raw timed paths.
#[derive(Clone, Debug, Default)]
pub struct Committed {
    pub agents: Vec<Timed>,
    pub shelves: Vec<Timed>,
}

impl Committed {
    pub fn table(&self, num_cells: usize) -> ReservationTable {
        let mut res = ReservationTable::new(num_cells);
        for p in &self.agents {
            res.add_agent_path(&p.cells, p.start, p.hold);
        }
        for p in &self.shelves {
            res.add_shelf_path(&p.cells, p.start, p.hold);
        }
        res
    }

    fn agent_at(&self, c: Cell, t: Time) -> bool {
        self.agents.iter().any(|p| p.at(t) == Some(c))
    }

    fn shelf_at(&self, c: Cell, t: Time) -> bool {
        self.shelves.iter().any(|p| p.at(t) == Some(c))
    }

    /// Some committed agent moves `to -> from` while we move `from -> to`
    /// departing at `t`.
    fn swap(&self, from: Cell, to: Cell, t: Time) -> bool {
        from != to && self.agents.iter().any(|p| p.at(t) == Some(to) && p.at(t + 1) == Some(from))
    }

    fn last_change(&self) -> Time {
        self.agents
            .iter()
            .chain(&self.shelves)
            .map(|p| p.start + p.cells.len() as Time)
            .max()
            .unwrap_or(0)
    }
}

/// Time-expanded search for the earliest arrival of a carry: walk to the
/// shelf, lift, move along the segment (forward, backward or wait), and end
/// with a place and a return path home that keeps home forever.
pub fn carry_oracle(map: &GridMap, c: &Committed, q: &CarryQuery, horizon: Time) -> Option<Time> {
    assert!(!q.holding && !q.pending_place && q.moves == CarryMoves::FLEXIBLE);
    let delta = q.overhead;
    let seg = q.segment;
    let last = seg.len() - 1;
    if c.agent_at(q.agent_start, q.start_time) {
        return None;
    }
    let mut reach = vec![HashSet::new(); (horizon + 1) as usize];
    let mut carry = vec![HashSet::new(); (horizon + 1) as usize];
    reach[q.start_time as usize].insert(q.agent_start);
    for t in q.start_time..horizon {
        let tu = t as usize;
        let here: Vec<Cell> = reach[tu].iter().copied().collect();
        for cell in here {
            let mut next: Vec<Cell> = map.neighbors(cell).collect();
            next.push(cell);
            for m in next {
                if !c.agent_at(m, t + 1) && !c.swap(cell, m, t) {
                    reach[tu + 1].insert(m);
                }
            }
            // Lift: stand still under the shelf for delta steps.
            if cell == seg[0] && t >= q.enter_after[0] && t + delta <= horizon && (t..=t + delta).all(|k| !c.agent_at(cell, k)) && !c.shelf_at(cell, t + delta) {
                carry[(t + delta) as usize].insert(0usize);
            }
        }
        let js: Vec<usize> = carry[tu].iter().copied().collect();
        for j in js {
            if j == last && goal_ok(map, c, seg[j], t, delta, q.home, horizon) {
                return Some(t);
            }
            let mut next = vec![j, j + 1];
            if j > 0 {
                next.push(j - 1);
            }
            for nj in next {
                if nj > last {
                    continue;
                }
                let (from, to) = (seg[j], seg[nj]);
                if nj != j && t + 1 <= q.enter_after[nj] {
                    continue;
                }
                if !c.agent_at(to, t + 1) && !c.shelf_at(to, t + 1) && !c.swap(from, to, t) {
                    carry[tu + 1].insert(nj);
                }
            }
        }
    }
    None
}

fn goal_ok(map: &GridMap, c: &Committed, cell: Cell, g: Time, delta: Time, home: Cell, horizon: Time) -> bool {
    let end = c.last_change();
    if (g..=end.max(g)).any(|k| c.shelf_at(cell, k)) {
        return false;
    }
    if (g..=g + delta).any(|k| c.agent_at(cell, k)) {
        return false;
    }
    // Return walk from the place position.
    let limit = horizon.max(end) + 2 * map.num_cells() as Time;
    let mut layer: HashSet<Cell> = HashSet::from([cell]);
    for t in g + delta..limit {
        if layer.contains(&home) && (t..=end.max(t)).all(|k| !c.agent_at(home, k)) {
            return true;
        }
        let mut next = HashSet::new();
        for &x in &layer {
            let mut cand: Vec<Cell> = map.neighbors(x).collect();
            cand.push(x);
            for m in cand {
                if !c.agent_at(m, t + 1) && !c.swap(x, m, t) {
                    next.insert(m);
                }
            }
        }
        layer = next;
        if layer.is_empty() {
            return false;
        }
    }
    false
}

/// Random walk of `len` steps (waits included) from `start`.
pub fn random_walk<R: Rng>(map: &GridMap, start: Cell, len: usize, rng: &mut R) -> Vec<Cell> {
    let mut p = vec![start];
    for _ in 0..len {
        let cur = *p.last().unwrap();
        let mut opts: Vec<Cell> = map.neighbors(cur).collect();
        opts.push(cur);
        p.push(*opts.choose(rng).unwrap());
    }
    p
}

/// A random carry query with up to three committed agents (some carrying a
/// shelf for part of their walk).
pub struct RandomCarry {
    pub map: GridMap,
    pub committed: Committed,
    pub agent: Cell,
    pub home: Cell,
    pub start_time: Time,
    pub segment: Vec<Cell>,
    pub enter_after: Vec<Time>,
    pub overhead: Time,
}

impl RandomCarry {
    pub fn generate<R: Rng>(rng: &mut R) -> Self {
        let w = rng.gen_range(3..=8);
        let h = rng.gen_range(2..=8);
        let mut map = GridMap::open(w, h);
        for _ in 0..rng.gen_range(0..=(w * h) / 8) {
            let c = Cell(rng.gen_range(0..(w * h) as u32));
            map.set_blocked(c, true);
        }
        let free: Vec<Cell> = map.free_cells().collect();
        let agent = *free.choose(rng).unwrap();
        let home = if rng.gen_bool(0.5) { agent } else { *free.choose(rng).unwrap() };
        let seg_len = rng.gen_range(1..=5);
        let mut segment = vec![*free.choose(rng).unwrap()];
        while segment.len() < seg_len {
            let cur = *segment.last().unwrap();
            let opts: Vec<Cell> = map.neighbors(cur).filter(|c| !segment.contains(c)).collect();
            match opts.choose(rng) {
                Some(&c) => segment.push(c),
                None => break,
            }
        }
        let enter_after: Vec<Time> = (0..segment.len())
            .map(|_| if rng.gen_bool(0.6) { 0 } else { rng.gen_range(0..12) })
            .collect();
        let mut committed = Committed::default();
        for _ in 0..rng.gen_range(0..=3) {
            let start = *free.choose(rng).unwrap();
            let len = rng.gen_range(1..=40);
            let walk = random_walk(&map, start, len, rng);
            if rng.gen_bool(0.5) {
                let a = rng.gen_range(0..walk.len());
                let b = rng.gen_range(a..walk.len());
                if walk[a..].iter().all(|&c| c != segment[0]) {
                    let mut shelf = vec![walk[a]; a + 1];
                    shelf.extend_from_slice(&walk[a + 1..=b]);
                    committed.shelves.push(Timed { cells: shelf, start: 0, hold: true });
                }
            }
            committed.agents.push(Timed { cells: walk, start: 0, hold: false });
        }
        let overhead = rng.gen_range(0..=1);
        let start_time = rng.gen_range(0..=3);
        Self { map, committed, agent, home, start_time, segment, enter_after, overhead }
    }

    pub fn query(&self) -> CarryQuery<'_> {
        CarryQuery {
            agent_start: self.agent,
            start_time: self.start_time,
            home: self.home,
            pending_place: false,
            holding: false,
            segment: &self.segment,
            enter_after: &self.enter_after,
            overhead: self.overhead,
            moves: CarryMoves::FLEXIBLE,
            earliest_departure: 0,
        }
    }

    /// `(planner arrival, oracle arrival)`.
    pub fn compare(&self) -> (Option<Time>, Option<Time>) {
        let res = self.committed.table(self.map.num_cells());
        let dist = DistanceOracle::new(&self.map);
        let q = self.query();
        let got = plan_carry(&q, &res, &dist).map(|p| p.arrival);
        let horizon = 40 + 2 * self.map.num_cells() as Time + 20;
        (got, carry_oracle(&self.map, &self.committed, &q, horizon))
    }
}
