//! Prioritized planner producing safe 1-robust shelf plans.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{bfs, Cell};
use crate::instance::Instance;
use crate::intervals::Reservations;
use crate::plan::ShelfPlan;
use crate::sipp::plan_path;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no shelf plan found after {attempts} attempts (last blocked shelf {shelf})")]
pub struct SeedFailure {
    pub shelf: usize,
    pub attempts: usize,
}

/// Plans shelves one at a time in a random priority order, each with SIPP
/// against the earlier ones and their one-step shadows. Agent starts are
/// never entered. Tries `restarts + 1` orders before giving up.
pub fn plan_shelves_prioritized(inst: &Instance, seed: u64, restarts: usize) -> Result<ShelfPlan, SeedFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = inst.num_shelves();
    let heuristics: Vec<Option<Vec<u32>>> = inst
        .shelves
        .iter()
        .map(|s| s.is_rearranged().then(|| bfs(&inst.map, s.delivery)))
        .collect();
    let mut last_blocked = 0;
    for _ in 0..=restarts {
        let mut order: Vec<usize> = (0..m).filter(|&s| inst.shelves[s].is_rearranged()).collect();
        order.shuffle(&mut rng);
        let order = chain_order(inst, &order);
        match attempt(inst, &order, &heuristics) {
            Ok(paths) => return Ok(ShelfPlan::from_paths(paths)),
            Err(s) => last_blocked = s,
        }
    }
    Err(SeedFailure {
        shelf: last_blocked,
        attempts: restarts + 1,
    })
}

/// Reorders so that a shelf whose delivery is another shelf's pickup comes
/// after that shelf where possible, keeping the random order otherwise.
fn chain_order(inst: &Instance, order: &[usize]) -> Vec<usize> {
    let by_pickup: std::collections::HashMap<Cell, usize> =
        order.iter().map(|&s| (inst.shelves[s].pickup, s)).collect();
    let mut placed = vec![false; inst.num_shelves()];
    let mut visiting = vec![false; inst.num_shelves()];
    let mut out = Vec::with_capacity(order.len());
    fn visit(
        s: usize,
        inst: &Instance,
        by_pickup: &std::collections::HashMap<Cell, usize>,
        placed: &mut [bool],
        visiting: &mut [bool],
        out: &mut Vec<usize>,
    ) {
        if placed[s] || visiting[s] {
            return;
        }
        visiting[s] = true;
        if let Some(&blocker) = by_pickup.get(&inst.shelves[s].delivery) {
            visit(blocker, inst, by_pickup, placed, visiting, out);
        }
        visiting[s] = false;
        placed[s] = true;
        out.push(s);
    }
    for &s in order {
        visit(s, inst, &by_pickup, &mut placed, &mut visiting, &mut out);
    }
    out
}

fn attempt(inst: &Instance, order: &[usize], heuristics: &[Option<Vec<u32>>]) -> Result<Vec<Vec<Cell>>, usize> {
    let map = &inst.map;
    let mut committed = Reservations::new(map.num_cells());
    for &a in &inst.agents {
        committed.block_from(a, 0);
    }
    let mut paths: Vec<Option<Vec<Cell>>> = vec![None; inst.num_shelves()];
    for (s, shelf) in inst.shelves.iter().enumerate() {
        if !shelf.is_rearranged() {
            committed.block_from(shelf.pickup, 0);
            paths[s] = Some(vec![shelf.pickup]);
        }
    }
    for (i, &s) in order.iter().enumerate() {
        let shelf = &inst.shelves[s];
        let mut res = committed.clone();
        // Shelves planned later still sit on their pickups at t = 0.
        for &later in &order[i + 1..] {
            res.block(inst.shelves[later].pickup, 0, 2);
        }
        let h = heuristics[s].as_ref().unwrap();
        let path = plan_path(map, &res, shelf.pickup, 0, shelf.delivery, h).ok_or(s)?;
        committed.reserve_robust(&path, 0);
        paths[s] = Some(path);
    }
    Ok(paths.into_iter().map(Option::unwrap).collect())
}
