//! Single-goal safe interval path planning over vertex reservations.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::grid::{Cell, GridMap, Time, INF, UNREACHABLE};
use crate::intervals::Reservations;

type State = (Cell, usize);

/// Earliest-arrival path from `start` at `start_time` to `goal`, ending in a
/// safe interval of `goal` that never closes. The returned path is indexed
/// by timestep relative to `start_time`. `h` is a distance table to `goal`.
pub fn plan_path(
    map: &GridMap,
    res: &Reservations,
    start: Cell,
    start_time: Time,
    goal: Cell,
    h: &[u32],
) -> Option<Vec<Cell>> {
    let mut intervals: HashMap<Cell, Vec<(Time, Time)>> = HashMap::new();
    let mut safe = |c: Cell| -> Vec<(Time, Time)> {
        intervals
            .entry(c)
            .or_insert_with(|| res.safe_intervals(c))
            .clone()
    };
    let first = safe(start);
    let idx = first
        .iter()
        .position(|&(a, b)| a <= start_time && start_time < b)?;
    if h[start.index()] == UNREACHABLE {
        return None;
    }
    let mut best: HashMap<State, Time> = HashMap::new();
    let mut parent: HashMap<State, State> = HashMap::new();
    let mut open = BinaryHeap::new();
    best.insert((start, idx), start_time);
    open.push(Reverse((start_time as u64 + h[start.index()] as u64, start_time, start, idx)));
    while let Some(Reverse((_, g, cell, i))) = open.pop() {
        if best.get(&(cell, i)) != Some(&g) {
            continue;
        }
        let (_, end) = safe(cell)[i];
        if cell == goal && end == INF {
            return Some(reconstruct(&parent, &best, (cell, i), start_time));
        }
        for n in map.neighbors(cell) {
            let hn = h[n.index()];
            if hn == UNREACHABLE {
                continue;
            }
            for (j, (a, b)) in safe(n).into_iter().enumerate() {
                let t = (g + 1).max(a);
                if t > end || a > end {
                    break;
                }
                if t >= b {
                    continue;
                }
                if best.get(&(n, j)).map_or(true, |&old| t < old) {
                    best.insert((n, j), t);
                    parent.insert((n, j), (cell, i));
                    open.push(Reverse((t as u64 + hn as u64, t, n, j)));
                }
            }
        }
    }
    None
}

fn reconstruct(
    parent: &HashMap<State, State>,
    best: &HashMap<State, Time>,
    goal: State,
    start_time: Time,
) -> Vec<Cell> {
    let mut chain = vec![(goal.0, best[&goal])];
    let mut s = goal;
    while let Some(&p) = parent.get(&s) {
        chain.push((p.0, best[&p]));
        s = p;
    }
    chain.reverse();
    let mut path = Vec::new();
    for w in chain.windows(2) {
        let ((c, t0), (_, t1)) = (w[0], w[1]);
        for _ in t0..t1 {
            path.push(c);
        }
    }
    path.push(chain.last().unwrap().0);
    debug_assert_eq!(path.len() as Time, chain.last().unwrap().1 - start_time + 1);
    path
}
