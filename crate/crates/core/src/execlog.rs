//! Text format of an execution log.
//!
//! ```text
//! ddmapd-log 1 <N> <M>
//! path <agent> <len> <t r c> ...
//! shelf <shelf> <len> <t r c> ...
//! return <agent> <len> <t r c> ...
//! lift <agent> <shelf> <t>
//! place <agent> <shelf> <t>
//! ```
//!
//! `path` and `shelf` lines start at t=0 and advance one step per triple.
//! `return` lines carry a reserved return path that starts at its first `t`.

use crate::error::ParseError;
use crate::exec::state::{Event, EventKind, ExecutionResult, RunStats};
use crate::grid::{Cell, GridMap, Time};

fn push_timed(out: &mut String, map: &GridMap, start: Time, cells: &[Cell]) {
    out.push_str(&format!(" {}", cells.len()));
    for (k, &c) in cells.iter().enumerate() {
        let (r, col) = map.coord(c);
        out.push_str(&format!(" {} {r} {col}", start as usize + k));
    }
    out.push('\n');
}

pub fn write_log(result: &ExecutionResult, map: &GridMap) -> String {
    let mut out = format!("ddmapd-log 1 {} {}\n", result.agent_paths.len(), result.shelf_paths.len());
    for (a, p) in result.agent_paths.iter().enumerate() {
        out.push_str(&format!("path {a}"));
        push_timed(&mut out, map, 0, p);
    }
    for (s, p) in result.shelf_paths.iter().enumerate() {
        out.push_str(&format!("shelf {s}"));
        push_timed(&mut out, map, 0, p);
    }
    for (a, d) in result.dummies.iter().enumerate() {
        if let Some((start, cells)) = d {
            out.push_str(&format!("return {a}"));
            push_timed(&mut out, map, *start, cells);
        }
    }
    let mut events = result.events.clone();
    events.sort_by_key(|e| (e.time, e.agent, e.kind == EventKind::Lift));
    for e in events {
        let kind = match e.kind {
            EventKind::Lift => "lift",
            EventKind::Place => "place",
        };
        out.push_str(&format!("{kind} {} {} {}\n", e.agent, e.shelf, e.time));
    }
    out
}

pub fn parse_log(text: &str, map: &GridMap) -> Result<ExecutionResult, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (no, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty log file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "ddmapd-log" || h[1] != "1" {
        return Err(ParseError::new(no, "expected header `ddmapd-log 1 <N> <M>`"));
    }
    let count = |t: &str| t.parse::<usize>().map_err(|_| ParseError::new(no, "bad count"));
    let (n, m) = (count(h[2])?, count(h[3])?);
    let mut agents: Vec<Option<Vec<Cell>>> = vec![None; n];
    let mut shelves: Vec<Option<Vec<Cell>>> = vec![None; m];
    let mut dummies = vec![None; n];
    let mut events = Vec::new();
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| ParseError::new(no, format!("bad integer `{t}`")));
        let id = |k: usize, limit: usize| -> Result<usize, ParseError> {
            let v = num(toks.get(k).ok_or_else(|| ParseError::new(no, "missing field"))?)?;
            if v >= limit {
                return Err(ParseError::new(no, format!("id {v} out of range")));
            }
            Ok(v)
        };
        match toks[0] {
            "path" | "shelf" | "return" => {
                let limit = if toks[0] == "shelf" { m } else { n };
                let who = id(1, limit)?;
                let len = num(toks.get(2).ok_or_else(|| ParseError::new(no, "missing length"))?)?;
                if len == 0 || toks.len() != 3 + 3 * len {
                    return Err(ParseError::new(no, format!("expected {len} (t, row, col) triples")));
                }
                let start = num(toks[3])?;
                let mut cells = Vec::with_capacity(len);
                for k in 0..len {
                    let (t, r, c) = (num(toks[3 + 3 * k])?, num(toks[4 + 3 * k])?, num(toks[5 + 3 * k])?);
                    if t != start + k {
                        return Err(ParseError::new(no, format!("timestep {t} out of sequence")));
                    }
                    cells.push(
                        map.try_cell(r as i64, c as i64)
                            .ok_or_else(|| ParseError::new(no, format!("({r},{c}) outside map")))?,
                    );
                }
                let dup = match toks[0] {
                    "path" if start == 0 => agents[who].replace(cells).is_some(),
                    "shelf" if start == 0 => shelves[who].replace(cells).is_some(),
                    "return" => dummies[who].replace((start as Time, cells)).is_some(),
                    _ => return Err(ParseError::new(no, "paths must start at t=0")),
                };
                if dup {
                    return Err(ParseError::new(no, format!("{} {who} appears twice", toks[0])));
                }
            }
            "lift" | "place" => {
                if toks.len() != 4 {
                    return Err(ParseError::new(no, "expected `<kind> <agent> <shelf> <t>`"));
                }
                events.push(Event {
                    kind: if toks[0] == "lift" { EventKind::Lift } else { EventKind::Place },
                    agent: id(1, n)?,
                    shelf: id(2, m)?,
                    time: num(toks[3])? as Time,
                });
            }
            other => return Err(ParseError::new(no, format!("unknown record `{other}`"))),
        }
    }
    let collect = |v: Vec<Option<Vec<Cell>>>, what: &str| -> Result<Vec<Vec<Cell>>, ParseError> {
        v.into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| ParseError::new(0, format!("missing {what} {i}"))))
            .collect()
    };
    Ok(ExecutionResult {
        agent_paths: collect(agents, "path")?,
        shelf_paths: collect(shelves, "shelf")?,
        dummies,
        events,
        strategies: Vec::new(),
        stats: RunStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let map = GridMap::open(3, 2);
        let (a, b, c) = (map.cell(0, 0), map.cell(0, 1), map.cell(1, 1));
        let result = ExecutionResult {
            agent_paths: vec![vec![a, b, b, c]],
            shelf_paths: vec![vec![b, b, b, c]],
            dummies: vec![Some((3, vec![c, b, a]))],
            events: vec![
                Event { kind: EventKind::Lift, agent: 0, shelf: 0, time: 1 },
                Event { kind: EventKind::Place, agent: 0, shelf: 0, time: 3 },
            ],
            strategies: vec![],
            stats: RunStats::default(),
        };
        let text = write_log(&result, &map);
        assert_eq!(parse_log(&text, &map).unwrap(), result);
    }

    #[test]
    fn rejects_gaps_and_missing_paths() {
        let map = GridMap::open(2, 2);
        assert!(parse_log("ddmapd-log 1 1 0\npath 0 2 0 0 0 2 0 1\n", &map).is_err());
        assert!(parse_log("ddmapd-log 1 1 1\npath 0 1 0 0 0\n", &map).is_err());
        assert!(parse_log("ddmapd-log 1 1 0\nwalk 0\n", &map).is_err());
    }
}
