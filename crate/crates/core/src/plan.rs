//! Shelf trajectories, plan validation, simplification and the plan file
//! format.

use std::collections::HashMap;

use crate::error::{ParseError, PlanError};
use crate::grid::{Cell, GridMap};
use crate::instance::Instance;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShelfTrajectory {
    pub shelf: usize,
    pub waypoints: Vec<Cell>,
}

impl ShelfTrajectory {
    /// End time: first index at which the trajectory reaches its final cell
    /// for good.
    pub fn end_time(&self) -> usize {
        end_time(&self.waypoints)
    }
}

/// Index of the first arrival at the last location of `cells`.
pub fn end_time(cells: &[Cell]) -> usize {
    let Some(last) = cells.last() else { return 0 };
    let mut t = cells.len() - 1;
    while t > 0 && cells[t - 1] == *last {
        t -= 1;
    }
    t
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ShelfPlan {
    /// One trajectory per shelf, ordered by shelf id.
    pub trajectories: Vec<ShelfTrajectory>,
    pub simplified: bool,
}

impl ShelfPlan {
    pub fn from_paths(paths: Vec<Vec<Cell>>) -> Self {
        Self {
            trajectories: paths
                .into_iter()
                .enumerate()
                .map(|(shelf, waypoints)| ShelfTrajectory { shelf, waypoints })
                .collect(),
            simplified: false,
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn path(&self, shelf: usize) -> &[Cell] {
        &self.trajectories[shelf].waypoints
    }

    /// Sum of trajectory end times (the `Σ|τ|` used by the normalized metrics).
    pub fn total_length(&self) -> u64 {
        self.trajectories.iter().map(|t| t.end_time() as u64).sum()
    }

    /// Longest trajectory, in waypoints.
    pub fn horizon(&self) -> usize {
        self.trajectories.iter().map(|t| t.waypoints.len()).max().unwrap_or(0)
    }
}

/// A violation witness: shelves `a`, `b` at timestep `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairWitness {
    pub a: usize,
    pub b: usize,
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PlanValidity {
    pub endpoints_correct: bool,
    /// Consecutive waypoints are equal or grid-adjacent free cells.
    pub steps_valid: bool,
    pub collision_free: bool,
    pub edge_swap_free: bool,
    pub safe: bool,
    pub one_robust: bool,
    pub endpoint_witness: Option<usize>,
    pub step_witness: Option<(usize, usize)>,
    pub collision_witness: Option<PairWitness>,
    pub edge_swap_witness: Option<PairWitness>,
    /// Shelf and waypoint index that stands on an agent start.
    pub safety_witness: Option<(usize, usize)>,
    /// `τ_a(t + 1) == τ_b(t)`.
    pub robustness_witness: Option<PairWitness>,
}

impl PlanValidity {
    pub fn all_ok(&self) -> bool {
        self.endpoints_correct
            && self.steps_valid
            && self.collision_free
            && self.edge_swap_free
            && self.safe
            && self.one_robust
    }

    /// Human-readable list of failed checks.
    pub fn describe(&self, map: &GridMap) -> String {
        let mut out = Vec::new();
        if let Some(s) = self.endpoint_witness {
            out.push(format!("shelf {s} does not start at its pickup or end at its delivery"));
        }
        if let Some((s, k)) = self.step_witness {
            out.push(format!("shelf {s} makes an invalid step at index {k}"));
        }
        if let Some(w) = self.collision_witness {
            out.push(format!("vertex collision between shelves {} and {} at t={}", w.a, w.b, w.t));
        }
        if let Some(w) = self.edge_swap_witness {
            out.push(format!("edge swap between shelves {} and {} at t={}", w.a, w.b, w.t));
        }
        if let Some((s, k)) = self.safety_witness {
            out.push(format!("shelf {s} waypoint {k} is an agent start"));
        }
        if let Some(w) = self.robustness_witness {
            out.push(format!(
                "not 1-robust: shelf {} enters at t={} the cell shelf {} holds at t={}",
                w.a,
                w.t + 1,
                w.b,
                w.t
            ));
        }
        let _ = map;
        if out.is_empty() {
            "ok".into()
        } else {
            out.join("; ")
        }
    }
}

#[inline]
fn at(path: &[Cell], t: usize) -> Cell {
    path[t.min(path.len() - 1)]
}

/// Checks a timestep-indexed shelf plan. Shorter trajectories are padded with
/// their final waypoint.
pub fn validate_shelf_plan(plan: &ShelfPlan, inst: &Instance) -> Result<PlanValidity, PlanError> {
    if plan.len() != inst.num_shelves() {
        return Err(PlanError::CountMismatch {
            expected: inst.num_shelves(),
            found: plan.len(),
        });
    }
    for (i, t) in plan.trajectories.iter().enumerate() {
        if t.waypoints.is_empty() {
            return Err(PlanError::EmptyTrajectory(i));
        }
    }
    let mut v = PlanValidity::default();
    let map = &inst.map;
    for (s, (traj, shelf)) in plan.trajectories.iter().zip(&inst.shelves).enumerate() {
        let w = &traj.waypoints;
        if v.endpoint_witness.is_none() && (w[0] != shelf.pickup || *w.last().unwrap() != shelf.delivery) {
            v.endpoint_witness = Some(s);
        }
        if v.step_witness.is_none() {
            if let Some(k) = (0..w.len()).find(|&k| {
                !map.is_free(w[k]) || (k + 1 < w.len() && w[k] != w[k + 1] && !map.adjacent(w[k], w[k + 1]))
            }) {
                v.step_witness = Some((s, k));
            }
        }
    }
    let agent_starts: std::collections::HashSet<Cell> = inst.agents.iter().copied().collect();
    'safe: for (s, traj) in plan.trajectories.iter().enumerate() {
        for (k, c) in traj.waypoints.iter().enumerate() {
            if agent_starts.contains(c) {
                v.safety_witness = Some((s, k));
                break 'safe;
            }
        }
    }

    let horizon = plan.horizon();
    let paths: Vec<&[Cell]> = plan.trajectories.iter().map(|t| t.waypoints.as_slice()).collect();
    let mut occ: HashMap<Cell, usize> = HashMap::new();
    let mut prev: HashMap<Cell, usize> = HashMap::new();
    for t in 0..horizon.max(1) {
        occ.clear();
        for (s, p) in paths.iter().enumerate() {
            let c = at(p, t);
            if let Some(&o) = occ.get(&c) {
                if v.collision_witness.is_none() {
                    v.collision_witness = Some(PairWitness { a: o, b: s, t });
                }
            } else {
                occ.insert(c, s);
            }
        }
        if t > 0 {
            for (s, p) in paths.iter().enumerate() {
                let c = at(p, t);
                // Someone else was here one step earlier.
                if let Some(&o) = prev.get(&c) {
                    if o != s {
                        if v.robustness_witness.is_none() {
                            v.robustness_witness = Some(PairWitness { a: s, b: o, t: t - 1 });
                        }
                        if v.edge_swap_witness.is_none() && at(paths[o], t) == at(p, t - 1) && at(p, t - 1) != c {
                            v.edge_swap_witness = Some(PairWitness { a: o, b: s, t: t - 1 });
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut occ, &mut prev);
    }
    v.endpoints_correct = v.endpoint_witness.is_none();
    v.steps_valid = v.step_witness.is_none();
    v.collision_free = v.collision_witness.is_none();
    v.edge_swap_free = v.edge_swap_witness.is_none();
    v.safe = v.safety_witness.is_none();
    v.one_robust = v.robustness_witness.is_none();
    Ok(v)
}

/// Collapses runs of repeated waypoints.
pub fn simplify_path(path: &[Cell]) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::with_capacity(path.len());
    for &c in path {
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    out
}

/// Collapses repeated waypoints in every trajectory. The result no longer
/// carries timing and must be interpreted through the dependency graph.
pub fn simplify_plan(plan: &ShelfPlan) -> ShelfPlan {
    ShelfPlan {
        trajectories: plan
            .trajectories
            .iter()
            .map(|t| ShelfTrajectory {
                shelf: t.shelf,
                waypoints: simplify_path(&t.waypoints),
            })
            .collect(),
        simplified: true,
    }
}

/// Renders the plan file (`ddmapd-plan 1 <M>`).
pub fn write_plan(plan: &ShelfPlan, map: &GridMap) -> String {
    let mut out = format!("ddmapd-plan 1 {}\n", plan.len());
    for t in &plan.trajectories {
        out.push_str(&format!("traj {} {}", t.shelf, t.waypoints.len()));
        for &c in &t.waypoints {
            let (r, col) = map.coord(c);
            out.push_str(&format!(" {r} {col}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_plan(text: &str, map: &GridMap) -> Result<ShelfPlan, PlanError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (no, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty plan file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "ddmapd-plan" || h[1] != "1" {
        return Err(ParseError::new(no, "expected header `ddmapd-plan 1 <M>`").into());
    }
    let m: usize = h[2].parse().map_err(|_| ParseError::new(no, "bad shelf count"))?;
    let mut slots: Vec<Option<Vec<Cell>>> = vec![None; m];
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] != "traj" || toks.len() < 3 {
            return Err(ParseError::new(no, "expected `traj <id> <len> ...`").into());
        }
        let num = |t: &str| t.parse::<usize>().map_err(|_| ParseError::new(no, format!("bad integer `{t}`")));
        let id = num(toks[1])?;
        let len = num(toks[2])?;
        if toks.len() != 3 + 2 * len {
            return Err(ParseError::new(no, format!("expected {len} coordinate pairs")).into());
        }
        if id >= m {
            return Err(ParseError::new(no, format!("shelf id {id} out of range")).into());
        }
        let mut cells = Vec::with_capacity(len);
        for k in 0..len {
            let (r, c) = (num(toks[3 + 2 * k])?, num(toks[4 + 2 * k])?);
            let cell = map
                .try_cell(r as i64, c as i64)
                .ok_or_else(|| ParseError::new(no, format!("({r},{c}) outside map")))?;
            cells.push(cell);
        }
        if len == 0 {
            return Err(PlanError::EmptyTrajectory(id));
        }
        if slots[id].replace(cells).is_some() {
            return Err(PlanError::DuplicateShelf(id));
        }
    }
    let found = slots.iter().filter(|s| s.is_some()).count();
    if found != m {
        return Err(PlanError::CountMismatch { expected: m, found });
    }
    Ok(ShelfPlan::from_paths(slots.into_iter().map(Option::unwrap).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Shelf;

    fn inst(map: &GridMap, agents: &[(usize, usize)], shelves: &[((usize, usize), (usize, usize))]) -> Instance {
        Instance::new(
            map.clone(),
            agents.iter().map(|&(r, c)| map.cell(r, c)).collect(),
            shelves
                .iter()
                .map(|&(p, d)| Shelf { pickup: map.cell(p.0, p.1), delivery: map.cell(d.0, d.1) })
                .collect(),
        )
        .unwrap()
    }

    fn path(map: &GridMap, cells: &[(usize, usize)]) -> Vec<Cell> {
        cells.iter().map(|&(r, c)| map.cell(r, c)).collect()
    }

    #[test]
    fn stationary_shelf_is_valid() {
        let m = GridMap::open(3, 3);
        let i = inst(&m, &[(0, 0)], &[((1, 1), (1, 1))]);
        let plan = ShelfPlan::from_paths(vec![path(&m, &[(1, 1)])]);
        assert!(validate_shelf_plan(&plan, &i).unwrap().all_ok());
    }

    #[test]
    fn vertex_collision_has_witness() {
        let m = GridMap::open(3, 3);
        let i = inst(&m, &[(0, 0)], &[((1, 0), (1, 1)), ((1, 2), (2, 1))]);
        let plan = ShelfPlan::from_paths(vec![
            path(&m, &[(1, 0), (1, 1)]),
            path(&m, &[(1, 2), (1, 1), (2, 1)]),
        ]);
        let v = validate_shelf_plan(&plan, &i).unwrap();
        assert!(!v.collision_free);
        assert_eq!(v.collision_witness, Some(PairWitness { a: 0, b: 1, t: 1 }));
    }

    #[test]
    fn following_breaks_robustness_only() {
        let m = GridMap::open(5, 5);
        let i = inst(&m, &[(4, 4)], &[((0, 1), (0, 2)), ((0, 0), (0, 1)), ((3, 3), (3, 3))]);
        let plan = ShelfPlan::from_paths(vec![
            path(&m, &[(0, 1), (0, 2)]),
            path(&m, &[(0, 0), (0, 1)]),
            path(&m, &[(3, 3)]),
        ]);
        let v = validate_shelf_plan(&plan, &i).unwrap();
        assert!(v.collision_free && v.edge_swap_free && v.safe);
        assert!(!v.one_robust);
        assert_eq!(v.robustness_witness, Some(PairWitness { a: 1, b: 0, t: 0 }));
    }

    #[test]
    fn swap_is_detected() {
        let m = GridMap::open(3, 1);
        let i = inst(&m, &[(0, 2)], &[((0, 0), (0, 1)), ((0, 1), (0, 0))]);
        let plan = ShelfPlan::from_paths(vec![path(&m, &[(0, 0), (0, 1)]), path(&m, &[(0, 1), (0, 0)])]);
        let v = validate_shelf_plan(&plan, &i).unwrap();
        assert!(!v.edge_swap_free);
        assert!(!v.one_robust);
        assert!(v.collision_free);
    }

    #[test]
    fn unsafe_and_bad_endpoints() {
        let m = GridMap::open(3, 3);
        let i = inst(&m, &[(0, 1)], &[((0, 0), (0, 2))]);
        let plan = ShelfPlan::from_paths(vec![path(&m, &[(0, 0), (0, 1), (0, 2)])]);
        let v = validate_shelf_plan(&plan, &i).unwrap();
        assert_eq!(v.safety_witness, Some((0, 1)));
        assert!(v.endpoints_correct);
        let plan = ShelfPlan::from_paths(vec![path(&m, &[(0, 0), (1, 1)])]);
        let v = validate_shelf_plan(&plan, &i).unwrap();
        assert!(!v.endpoints_correct && !v.steps_valid);
    }

    #[test]
    fn count_mismatch_is_structural() {
        let m = GridMap::open(3, 3);
        let i = inst(&m, &[(0, 1)], &[((0, 0), (0, 2))]);
        assert!(matches!(
            validate_shelf_plan(&ShelfPlan::default(), &i),
            Err(PlanError::CountMismatch { expected: 1, found: 0 })
        ));
    }

    #[test]
    fn simplify_collapses_runs() {
        let m = GridMap::open(3, 1);
        let (a, b, c) = (m.cell(0, 0), m.cell(0, 1), m.cell(0, 2));
        assert_eq!(simplify_path(&[a, a, b, b, b, c]), vec![a, b, c]);
        let plan = ShelfPlan::from_paths(vec![vec![a, a, b, b, b, c]]);
        let s = simplify_plan(&plan);
        assert!(s.simplified);
        assert_eq!(simplify_plan(&s), s);
    }

    #[test]
    fn end_time_ignores_trailing_waits() {
        let m = GridMap::open(3, 1);
        let (a, b) = (m.cell(0, 0), m.cell(0, 1));
        assert_eq!(end_time(&[a, b, b, b]), 1);
        assert_eq!(end_time(&[a]), 0);
        assert_eq!(end_time(&[a, a, b]), 2);
    }

    #[test]
    fn plan_file_round_trip_and_errors() {
        let m = GridMap::open(3, 3);
        let plan = ShelfPlan::from_paths(vec![path(&m, &[(0, 0), (0, 1)]), path(&m, &[(2, 2)])]);
        let text = write_plan(&plan, &m);
        assert_eq!(text, "ddmapd-plan 1 2\ntraj 0 2 0 0 0 1\ntraj 1 1 2 2\n");
        assert_eq!(parse_plan(&text, &m).unwrap(), plan);
        assert!(parse_plan("ddmapd-plan 1 2\ntraj 0 1 0 0\n", &m).is_err());
        assert!(parse_plan("ddmapd-plan 1 1\ntraj 0 2 0 0\n", &m).is_err());
        assert!(parse_plan("ddmapd-plan 1 1\ntraj 0 1 5 5\n", &m).is_err());
        assert!(parse_plan("plan\n", &m).is_err());
    }
}
