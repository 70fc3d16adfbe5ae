//! Random instance generators for three warehouse layouts.
//!
//! * `R2r`: shelves scattered over an open grid, half of them stationary.
//! * `S2w`: every shelf starts in a staging strip along the top and is
//!   delivered into aisle-separated storage blocks below.
//! * `Dne`: deliveries in storage blocks; half the shelves start inside the
//!   blocks and half in the aisles.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, GridMap};
use crate::instance::{check_well_formed, Instance, Shelf};

const MAX_TRIES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    R2r,
    S2w,
    Dne,
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayoutKind::R2r => "r2r",
            LayoutKind::S2w => "s2w",
            LayoutKind::Dne => "dne",
        })
    }
}

impl FromStr for LayoutKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "r2r" => Ok(LayoutKind::R2r),
            "s2w" => Ok(LayoutKind::S2w),
            "dne" => Ok(LayoutKind::Dne),
            other => Err(format!("unknown layout kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub kind: LayoutKind,
    pub width: usize,
    pub height: usize,
    /// Shelves as a fraction of all cells.
    pub density: f64,
    pub agents: usize,
    pub seed: u64,
}

impl LayoutSpec {
    pub fn shelf_count(&self) -> usize {
        (self.density * (self.width * self.height) as f64 + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("{0}")]
    Infeasible(String),
    #[error("no well-formed instance after {0} tries")]
    Exhausted(usize),
}

/// Generates an instance for `spec`. The same spec always yields the same
/// instance.
pub fn generate_instance(spec: &LayoutSpec) -> Result<Instance, LayoutError> {
    let m = spec.shelf_count();
    let cells = spec.width * spec.height;
    if spec.agents == 0 {
        return Err(LayoutError::Infeasible("at least one agent is required".into()));
    }
    if m < spec.agents {
        return Err(LayoutError::Infeasible(format!("{m} shelves for {} agents", spec.agents)));
    }
    if m + spec.agents + 2 > cells {
        return Err(LayoutError::Infeasible(format!("{m} shelves and {} agents do not fit", spec.agents)));
    }
    let map = GridMap::open(spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_TRIES {
        let shelves = match spec.kind {
            LayoutKind::R2r => r2r_shelves(&map, m, &mut rng),
            LayoutKind::S2w => s2w_shelves(&map, m, &mut rng)?,
            LayoutKind::Dne => dne_shelves(&map, m, &mut rng)?,
        };
        if has_delivery_cycle(&shelves) {
            continue;
        }
        let Some(agents) = place_agents(&map, &shelves, spec.agents, &mut rng) else {
            continue;
        };
        let inst = Instance::new(map.clone(), agents, shelves).map_err(|e| LayoutError::Infeasible(e.to_string()))?;
        if check_well_formed(&inst).is_well_formed() {
            return Ok(inst);
        }
    }
    Err(LayoutError::Exhausted(MAX_TRIES))
}

fn sample(pool: &[Cell], k: usize, rng: &mut ChaCha8Rng) -> Vec<Cell> {
    pool.choose_multiple(rng, k).copied().collect()
}

fn r2r_shelves(map: &GridMap, m: usize, rng: &mut ChaCha8Rng) -> Vec<Shelf> {
    let all: Vec<Cell> = map.free_cells().collect();
    let pickups = sample(&all, m, rng);
    let moving = m / 2;
    let stationary: HashSet<Cell> = pickups[moving..].iter().copied().collect();
    let pool: Vec<Cell> = all.iter().copied().filter(|c| !stationary.contains(c)).collect();
    let mut deliveries = sample(&pool, moving, rng);
    fix_fixed_points(&pickups[..moving], &mut deliveries, &pool, rng);
    pickups
        .iter()
        .enumerate()
        .map(|(i, &p)| Shelf {
            pickup: p,
            delivery: if i < moving { deliveries[i] } else { p },
        })
        .collect()
}

/// Re-draws deliveries equal to their own pickup so every listed shelf
/// really moves.
fn fix_fixed_points(pickups: &[Cell], deliveries: &mut [Cell], pool: &[Cell], rng: &mut ChaCha8Rng) {
    for i in 0..pickups.len() {
        while deliveries[i] == pickups[i] {
            let used: HashSet<Cell> = deliveries.iter().copied().collect();
            let free: Vec<Cell> = pool.iter().copied().filter(|c| !used.contains(c) && *c != pickups[i]).collect();
            match free.choose(rng) {
                Some(&c) => deliveries[i] = c,
                None => {
                    // Swap with a neighbour in the list instead.
                    let j = (i + 1) % deliveries.len();
                    deliveries.swap(i, j);
                    if deliveries.len() == 1 {
                        break;
                    }
                }
            }
        }
    }
}

/// Storage blocks two columns wide separated by one-column aisles, with an
/// aisle row after every four block rows. The outer ring stays free.
fn is_storage(map: &GridMap, row: usize, col: usize, top: usize) -> bool {
    if row < top + 1 || row + 1 >= map.height() || col == 0 || col + 1 >= map.width() {
        return false;
    }
    (col - 1) % 3 != 2 && (row - top - 1) % 5 != 4
}

fn s2w_shelves(map: &GridMap, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Shelf>, LayoutError> {
    // Staging rows come in pairs separated by an aisle row.
    let w = map.width();
    let per_row = w.saturating_sub(2);
    let mut staging = Vec::new();
    let mut row = 1;
    while staging.len() < m && row + 1 < map.height() {
        if row % 3 != 0 {
            staging.extend((1..=per_row).map(|c| map.cell(row, c)));
        }
        row += 1;
    }
    if staging.len() < m {
        return Err(LayoutError::Infeasible("staging strip does not fit".into()));
    }
    let top = row;
    let storage: Vec<Cell> = (0..map.height())
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| is_storage(map, r, c, top))
        .map(|(r, c)| map.cell(r, c))
        .collect();
    if storage.len() < m {
        return Err(LayoutError::Infeasible("storage area is too small".into()));
    }
    staging.truncate(m);
    let deliveries = sample(&storage, m, rng);
    Ok(staging
        .into_iter()
        .zip(deliveries)
        .map(|(pickup, delivery)| Shelf { pickup, delivery })
        .collect())
}

fn dne_shelves(map: &GridMap, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Shelf>, LayoutError> {
    let (storage, other): (Vec<Cell>, Vec<Cell>) = map.free_cells().partition(|&c| {
        let (r, col) = map.coord(c);
        is_storage(map, r, col, 0)
    });
    let inside = m / 2;
    if storage.len() < m || other.len() < m - inside {
        return Err(LayoutError::Infeasible("storage area is too small".into()));
    }
    let deliveries = sample(&storage, m, rng);
    let mut pickups = sample(&storage, inside, rng);
    pickups.extend(sample(&other, m - inside, rng));
    Ok(pickups
        .into_iter()
        .zip(deliveries)
        .map(|(pickup, delivery)| Shelf { pickup, delivery })
        .collect())
}

/// True when following delivery -> shelf picked up there returns to a shelf
/// already seen, i.e. some shelves would have to swap places.
fn has_delivery_cycle(shelves: &[Shelf]) -> bool {
    let by_pickup: HashMap<Cell, usize> = shelves
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_rearranged())
        .map(|(i, s)| (s.pickup, i))
        .collect();
    let mut state = vec![0u8; shelves.len()];
    for start in 0..shelves.len() {
        let mut chain = Vec::new();
        let mut cur = Some(start);
        while let Some(s) = cur {
            match state[s] {
                1 => return true,
                2 => break,
                _ => {}
            }
            state[s] = 1;
            chain.push(s);
            cur = shelves[s]
                .is_rearranged()
                .then(|| by_pickup.get(&shelves[s].delivery).copied())
                .flatten();
        }
        for s in chain {
            state[s] = 2;
        }
    }
    false
}

fn place_agents(map: &GridMap, shelves: &[Shelf], n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Cell>> {
    let taken: HashSet<Cell> = shelves.iter().flat_map(|s| [s.pickup, s.delivery]).collect();
    let pool: Vec<Cell> = map.free_cells().filter(|c| !taken.contains(c)).collect();
    (pool.len() >= n).then(|| sample(&pool, n, rng))
}
