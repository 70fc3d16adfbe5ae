//! Per-cell blocked time intervals and the safe intervals they leave.

use crate::grid::{Cell, Time, INF};

/// Half-open blocked intervals `[from, to)` per cell, kept sorted and merged.
#[derive(Clone, Debug, Default)]
pub struct Reservations {
    blocked: Vec<Vec<(Time, Time)>>,
}

impl Reservations {
    pub fn new(num_cells: usize) -> Self {
        Self {
            blocked: vec![Vec::new(); num_cells],
        }
    }

    pub fn clear(&mut self) {
        for b in &mut self.blocked {
            b.clear();
        }
    }

    pub fn block(&mut self, cell: Cell, from: Time, to: Time) {
        if from >= to {
            return;
        }
        let list = &mut self.blocked[cell.index()];
        let pos = list.partition_point(|&(a, _)| a < from);
        list.insert(pos, (from, to));
        // Merge around the insertion point.
        let mut i = pos.saturating_sub(1);
        while i + 1 < list.len() {
            if list[i].1 >= list[i + 1].0 {
                list[i].1 = list[i].1.max(list[i + 1].1);
                list.remove(i + 1);
            } else if i >= pos {
                break;
            } else {
                i += 1;
            }
        }
    }

    pub fn block_from(&mut self, cell: Cell, from: Time) {
        self.block(cell, from, INF);
    }

    pub fn is_blocked(&self, cell: Cell, t: Time) -> bool {
        let list = &self.blocked[cell.index()];
        let i = list.partition_point(|&(a, _)| a <= t);
        i > 0 && list[i - 1].1 > t
    }

    /// No blocked interval intersects `[from, to)`.
    pub fn is_free_during(&self, cell: Cell, from: Time, to: Time) -> bool {
        if from >= to {
            return true;
        }
        self.blocked[cell.index()]
            .iter()
            .all(|&(a, b)| b <= from || a >= to)
    }

    pub fn is_free_forever(&self, cell: Cell, from: Time) -> bool {
        self.is_free_during(cell, from, INF)
    }

    pub fn blocked(&self, cell: Cell) -> &[(Time, Time)] {
        &self.blocked[cell.index()]
    }

    /// Maximal unblocked intervals `[a, b)` of `cell`; `b == INF` means open ended.
    pub fn safe_intervals(&self, cell: Cell) -> Vec<(Time, Time)> {
        let mut out = Vec::new();
        let mut start = 0;
        for &(a, b) in &self.blocked[cell.index()] {
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

    /// Reserves a timestep-indexed path that starts at `start` and then holds
    /// its last cell forever, together with its one-step shadow: a cell
    /// occupied at `t` is blocked over `[t - 1, t + 2)`.
    pub fn reserve_robust(&mut self, path: &[Cell], start: Time) {
        let Some(&last) = path.last() else { return };
        let end = start + crate::plan::end_time(path) as Time;
        let mut k = 0;
        while k < path.len() {
            let c = path[k];
            let mut j = k;
            while j + 1 < path.len() && path[j + 1] == c {
                j += 1;
            }
            let (t0, t1) = (start + k as Time, start + j as Time);
            if c == last && j + 1 == path.len() {
                self.block_from(c, t0.saturating_sub(1));
            } else {
                self.block(c, t0.saturating_sub(1), t1 + 2);
            }
            k = j + 1;
        }
        debug_assert!(self.is_blocked(last, end));
    }

    /// Reserves a path exactly (no shadow); the last cell is held forever
    /// when `hold` is set.
    pub fn reserve_exact(&mut self, path: &[Cell], start: Time, hold: bool) {
        let mut k = 0;
        while k < path.len() {
            let c = path[k];
            let mut j = k;
            while j + 1 < path.len() && path[j + 1] == c {
                j += 1;
            }
            let t0 = start + k as Time;
            if hold && j + 1 == path.len() {
                self.block_from(c, t0);
            } else {
                self.block(c, t0, start + j as Time + 1);
            }
            k = j + 1;
        }
    }
}
