//! Problem instances: agents, shelves, execution settings and the
//! well-formedness check.

use std::collections::{HashSet, VecDeque};
use std::time::Duration;

use crate::error::{InstanceError, ParseError};
use crate::grid::{Cell, GridMap, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shelf {
    pub pickup: Cell,
    pub delivery: Cell,
}

impl Shelf {
    pub fn is_rearranged(&self) -> bool {
        self.pickup != self.delivery
    }
}

/// Knobs shared by the executors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionConfig {
    /// Timesteps spent on every lift and every place.
    pub overhead: Time,
    pub ds_depth_limit: usize,
    pub single_replan: bool,
    pub dep_switch: bool,
    pub group_replan: bool,
    /// Cost of a missing agent/shelf pair in the assignment matrix. `None`
    /// selects `width * height * (M + N)`.
    pub unmatched_penalty: Option<u64>,
    /// Lets agents with an assigned shelf compete for other shelves in the
    /// first matching pass. When off, they only match their own shelf while
    /// free agents exist.
    pub rematch_assigned: bool,
    /// Check graph invariants around every prune and strategy attempt and
    /// record failures in the run statistics.
    pub audit: bool,
    /// Wall-clock limit for one run.
    pub time_limit: Option<Duration>,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            overhead: 0,
            ds_depth_limit: 5,
            single_replan: false,
            dep_switch: false,
            group_replan: false,
            unmatched_penalty: None,
            rematch_assigned: true,
            audit: false,
            time_limit: None,
        }
    }
}

impl ExecutionConfig {
    pub fn with_all_strategies(mut self) -> Self {
        self.single_replan = true;
        self.dep_switch = true;
        self.group_replan = true;
        self
    }

    pub fn check_time(&self, started: std::time::Instant) -> Result<(), crate::error::ExecError> {
        match self.time_limit {
            Some(limit) if started.elapsed() > limit => Err(crate::error::ExecError::Timeout(limit)),
            _ => Ok(()),
        }
    }

    pub fn any_strategy(&self) -> bool {
        self.single_replan || self.dep_switch || self.group_replan
    }

    pub fn penalty_for(&self, inst: &Instance) -> u64 {
        self.unmatched_penalty.unwrap_or_else(|| {
            (inst.map.num_cells() * (inst.shelves.len() + inst.agents.len())) as u64
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub map: GridMap,
    /// Initial agent cells.
    pub agents: Vec<Cell>,
    pub shelves: Vec<Shelf>,
}

impl Instance {
    /// Builds an instance and checks its structural invariants.
    pub fn new(map: GridMap, agents: Vec<Cell>, shelves: Vec<Shelf>) -> Result<Self, InstanceError> {
        let inst = Self {
            map,
            agents,
            shelves,
        };
        inst.check()?;
        Ok(inst)
    }

    fn bad(&self, cell: Cell) -> (usize, usize) {
        self.map.coord(cell)
    }

    fn check(&self) -> Result<(), InstanceError> {
        if self.agents.is_empty() {
            return Err(InstanceError::NoAgents);
        }
        let cells = self
            .agents
            .iter()
            .chain(self.shelves.iter().flat_map(|s| [&s.pickup, &s.delivery]));
        for &c in cells {
            if !self.map.is_free(c) {
                let (row, col) = self.bad(c);
                return Err(InstanceError::BadCell { row, col });
            }
        }
        let mut seen = HashSet::new();
        for &a in &self.agents {
            if !seen.insert(a) {
                let (row, col) = self.bad(a);
                return Err(InstanceError::DuplicateAgent { row, col });
            }
        }
        let mut pickups = HashSet::new();
        let mut deliveries = HashSet::new();
        for s in &self.shelves {
            if !pickups.insert(s.pickup) {
                let (row, col) = self.bad(s.pickup);
                return Err(InstanceError::DuplicatePickup { row, col });
            }
            if !deliveries.insert(s.delivery) {
                let (row, col) = self.bad(s.delivery);
                return Err(InstanceError::DuplicateDelivery { row, col });
            }
        }
        if let Some(&a) = self.agents.iter().find(|a| pickups.contains(a)) {
            let (row, col) = self.bad(a);
            return Err(InstanceError::AgentOnPickup { row, col });
        }
        if self.agents.len() > self.shelves.len() {
            return Err(InstanceError::TooManyAgents {
                agents: self.agents.len(),
                shelves: self.shelves.len(),
            });
        }
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_shelves(&self) -> usize {
        self.shelves.len()
    }

    pub fn rearranged_count(&self) -> usize {
        self.shelves.iter().filter(|s| s.is_rearranged()).count()
    }

    /// Renders the scenario file (`ddmapd 1` format).
    pub fn scenario_text(&self) -> String {
        let mut out = String::from("ddmapd 1\n");
        for &a in &self.agents {
            let (r, c) = self.map.coord(a);
            out.push_str(&format!("agent {r} {c}\n"));
        }
        for s in &self.shelves {
            let (pr, pc) = self.map.coord(s.pickup);
            let (dr, dc) = self.map.coord(s.delivery);
            out.push_str(&format!("shelf {pr} {pc} {dr} {dc}\n"));
        }
        out
    }
}

/// Parses a scenario file against `map`.
pub fn parse_scenario(map: GridMap, text: &str) -> Result<Instance, InstanceError> {
    let mut agents = Vec::new();
    let mut shelves = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !header_seen {
            if toks != ["ddmapd", "1"] {
                return Err(ParseError::new(no, "expected header `ddmapd 1`").into());
            }
            header_seen = true;
            continue;
        }
        let nums = |n: usize| -> Result<Vec<usize>, ParseError> {
            if toks.len() != n + 1 {
                return Err(ParseError::new(no, format!("`{}` takes {n} integers", toks[0])));
            }
            toks[1..]
                .iter()
                .map(|t| t.parse::<usize>().map_err(|_| ParseError::new(no, format!("bad integer `{t}`"))))
                .collect()
        };
        let cell = |r: usize, c: usize| -> Result<Cell, InstanceError> {
            map.try_cell(r as i64, c as i64)
                .ok_or(InstanceError::BadCell { row: r, col: c })
        };
        match toks[0] {
            "agent" => {
                let v = nums(2)?;
                agents.push(cell(v[0], v[1])?);
            }
            "shelf" => {
                let v = nums(4)?;
                shelves.push(Shelf {
                    pickup: cell(v[0], v[1])?,
                    delivery: cell(v[2], v[3])?,
                });
            }
            other => return Err(ParseError::new(no, format!("unknown record `{other}`")).into()),
        }
    }
    if !header_seen {
        return Err(ParseError::new(1, "empty scenario").into());
    }
    Instance::new(map, agents, shelves)
}

/// Outcome of [`check_well_formed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellFormedReport {
    /// Removing the start cells of any `N - 1` agents leaves the free graph connected.
    pub connected_under_removal: bool,
    /// At least two cells hold neither an agent nor a shelf initially.
    pub enough_empty_cells: bool,
    /// Agent whose start cell is the only one kept in the first removal that disconnects the graph.
    pub disconnecting_agent: Option<usize>,
    pub empty_cells: usize,
}

impl WellFormedReport {
    pub fn is_well_formed(&self) -> bool {
        self.connected_under_removal && self.enough_empty_cells
    }
}

pub fn check_well_formed(inst: &Instance) -> WellFormedReport {
    let agent_cells: HashSet<Cell> = inst.agents.iter().copied().collect();
    let mut disconnecting_agent = None;
    for (keep, _) in inst.agents.iter().enumerate() {
        let removed: HashSet<Cell> = inst
            .agents
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != keep)
            .map(|(_, &c)| c)
            .collect();
        if !connected_without(&inst.map, &removed) {
            disconnecting_agent = Some(keep);
            break;
        }
    }
    let pickups: HashSet<Cell> = inst.shelves.iter().map(|s| s.pickup).collect();
    let empty_cells = inst
        .map
        .free_cells()
        .filter(|c| !agent_cells.contains(c) && !pickups.contains(c))
        .count();
    WellFormedReport {
        connected_under_removal: disconnecting_agent.is_none(),
        enough_empty_cells: empty_cells >= 2,
        disconnecting_agent,
        empty_cells,
    }
}

fn connected_without(map: &GridMap, removed: &HashSet<Cell>) -> bool {
    let mut remaining = map.free_cells().filter(|c| !removed.contains(c));
    let Some(start) = remaining.next() else {
        return true;
    };
    let total = 1 + remaining.count();
    let mut seen = vec![false; map.num_cells()];
    seen[start.index()] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for n in map.neighbors(c) {
            if !seen[n.index()] && !removed.contains(&n) {
                seen[n.index()] = true;
                count += 1;
                queue.push_back(n);
            }
        }
    }
    count == total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_map;

    fn open(w: usize, h: usize) -> GridMap {
        GridMap::open(w, h)
    }

    #[test]
    fn single_agent_open_map_is_well_formed() {
        let m = open(3, 3);
        let inst = Instance::new(
            m.clone(),
            vec![m.cell(0, 0)],
            vec![Shelf { pickup: m.cell(1, 1), delivery: m.cell(2, 2) }],
        )
        .unwrap();
        let r = check_well_formed(&inst);
        assert!(r.is_well_formed());
        assert_eq!(r.empty_cells, 7);
    }

    #[test]
    fn corridor_with_agents_at_both_ends() {
        // Path graph 0-1-2-3-4: dropping either endpoint leaves the rest connected.
        let m = open(5, 1);
        let inst = Instance::new(
            m.clone(),
            vec![m.cell(0, 0), m.cell(0, 4)],
            vec![
                Shelf { pickup: m.cell(0, 2), delivery: m.cell(0, 2) },
                Shelf { pickup: m.cell(0, 3), delivery: m.cell(0, 3) },
            ],
        )
        .unwrap();
        let r = check_well_formed(&inst);
        assert!(r.connected_under_removal);
        assert_eq!(r.empty_cells, 1);
        assert!(!r.is_well_formed());
    }

    #[test]
    fn agent_in_corridor_middle_disconnects() {
        let m = open(5, 1);
        let inst = Instance::new(
            m.clone(),
            vec![m.cell(0, 0), m.cell(0, 2)],
            vec![
                Shelf { pickup: m.cell(0, 3), delivery: m.cell(0, 3) },
                Shelf { pickup: m.cell(0, 4), delivery: m.cell(0, 4) },
            ],
        )
        .unwrap();
        let r = check_well_formed(&inst);
        assert!(!r.connected_under_removal);
        assert_eq!(r.disconnecting_agent, Some(0));
    }

    #[test]
    fn packed_map_lacks_empty_cells() {
        let m = open(2, 2);
        let inst = Instance::new(
            m.clone(),
            vec![m.cell(0, 0)],
            vec![
                Shelf { pickup: m.cell(0, 1), delivery: m.cell(0, 1) },
                Shelf { pickup: m.cell(1, 0), delivery: m.cell(1, 1) },
            ],
        )
        .unwrap();
        let r = check_well_formed(&inst);
        assert!(!r.enough_empty_cells);
        assert!(!r.is_well_formed());
    }

    #[test]
    fn scenario_round_trip_and_errors() {
        let m = parse_map("height 3\nwidth 3\nmap\n...\n.@.\n...\n").unwrap();
        let text = "ddmapd 1\nagent 0 0\nshelf 2 2 0 2\n";
        let inst = parse_scenario(m.clone(), text).unwrap();
        assert_eq!(inst.scenario_text(), text);
        assert!(matches!(
            parse_scenario(m.clone(), "ddmapd 1\nagent 1 1\nshelf 0 1 0 2\n"),
            Err(InstanceError::BadCell { row: 1, col: 1 })
        ));
        assert!(matches!(
            parse_scenario(m.clone(), "ddmapd 1\nagent 0 0\nagent 0 0\nshelf 0 1 0 2\nshelf 2 1 2 2\n"),
            Err(InstanceError::DuplicateAgent { .. })
        ));
        assert!(matches!(
            parse_scenario(m.clone(), "ddmapd 1\nagent 0 1\nshelf 0 1 0 2\n"),
            Err(InstanceError::AgentOnPickup { .. })
        ));
        assert!(matches!(
            parse_scenario(m.clone(), "ddmapd 1\nagent 0 0\nagent 0 1\nshelf 2 1 0 2\n"),
            Err(InstanceError::TooManyAgents { .. })
        ));
        match parse_scenario(m, "ddmapd 2\n") {
            Err(InstanceError::Parse(e)) => assert_eq!(e.line, 1),
            other => panic!("{other:?}"),
        }
    }
}
