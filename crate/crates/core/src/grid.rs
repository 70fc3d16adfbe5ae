//! Grid maps, cells and shortest-path distances.
//!
//! Cells are addressed by `(row, col)` with rows growing downward. Internally a
//! cell is its row-major index, which keeps reservation tables and distance
//! tables flat.

use std::fmt;
use std::sync::OnceLock;

use crate::error::ParseError;

/// Discrete timestep.
pub type Time = u32;

/// Sentinel for "never" / "forever".
pub const INF: Time = Time::MAX;

/// Row-major cell index on a [`GridMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell(pub u32);

impl Cell {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    /// An obstacle-free map.
    pub fn open(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        Self {
            width,
            height,
            blocked: vec![false; width * height],
        }
    }

    pub fn from_blocked(width: usize, height: usize, blocked: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        assert_eq!(blocked.len(), width * height);
        Self {
            width,
            height,
            blocked,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn set_blocked(&mut self, cell: Cell, blocked: bool) {
        self.blocked[cell.index()] = blocked;
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// Cell at `(row, col)`; panics when out of bounds.
    pub fn cell(&self, row: usize, col: usize) -> Cell {
        assert!(row < self.height && col < self.width, "({row},{col}) outside map");
        Cell((row * self.width + col) as u32)
    }

    /// Cell at `(row, col)` if it lies inside the map.
    pub fn try_cell(&self, row: i64, col: i64) -> Option<Cell> {
        self.in_bounds(row, col)
            .then(|| Cell((row as usize * self.width + col as usize) as u32))
    }

    pub fn coord(&self, cell: Cell) -> (usize, usize) {
        (cell.index() / self.width, cell.index() % self.width)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.index() < self.blocked.len() && !self.blocked[cell.index()]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells() as u32)
            .map(Cell)
            .filter(|c| !self.blocked[c.index()])
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Free 4-neighbours of `cell`, in up/left/right/down order.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (r, c) = self.coord(cell);
        let (r, c) = (r as i64, c as i64);
        [(r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)]
            .into_iter()
            .filter_map(move |(nr, nc)| self.try_cell(nr, nc))
            .filter(move |n| !self.blocked[n.index()])
    }

    pub fn adjacent(&self, a: Cell, b: Cell) -> bool {
        let (ar, ac) = self.coord(a);
        let (br, bc) = self.coord(b);
        ar.abs_diff(br) + ac.abs_diff(bc) == 1
    }

    pub fn manhattan(&self, a: Cell, b: Cell) -> u32 {
        let (ar, ac) = self.coord(a);
        let (br, bc) = self.coord(b);
        (ar.abs_diff(br) + ac.abs_diff(bc)) as u32
    }

    /// Renders the map in the text map format accepted by [`parse_map`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(if self.blocked[r * self.width + c] { '@' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a MovingAI-style grid map.
///
/// ```text
/// type octile
/// height 2
/// width 3
/// map
/// ..@
/// ...
/// ```
pub fn parse_map(text: &str) -> Result<GridMap, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut height = None;
    let mut width = None;
    let mut last_line = 0;
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(ParseError::new(last_line + 1, "missing `map` line"));
        };
        last_line = no;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("type") => {}
            Some("height") => height = Some(header_value(no, parts.next())?),
            Some("width") => width = Some(header_value(no, parts.next())?),
            Some("map") => break,
            Some(other) => {
                return Err(ParseError::new(no, format!("unexpected header `{other}`")))
            }
            None => unreachable!(),
        }
    }
    let height = height.ok_or_else(|| ParseError::new(last_line, "missing height"))?;
    let width = width.ok_or_else(|| ParseError::new(last_line, "missing width"))?;
    if height == 0 || width == 0 {
        return Err(ParseError::new(last_line, "map dimensions must be positive"));
    }
    let mut blocked = Vec::with_capacity(width * height);
    for row in 0..height {
        let Some((no, line)) = lines.next() else {
            return Err(ParseError::new(
                last_line + 1,
                format!("expected {height} rows, found {row}"),
            ));
        };
        last_line = no;
        if line.chars().count() != width {
            return Err(ParseError::new(
                no,
                format!("row has {} glyphs, expected {width}", line.chars().count()),
            ));
        }
        for ch in line.chars() {
            match ch {
                '.' => blocked.push(false),
                '@' | 'T' => blocked.push(true),
                other => return Err(ParseError::new(no, format!("unknown glyph `{other}`"))),
            }
        }
    }
    if let Some((no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(ParseError::new(no, format!("trailing content `{extra}`")));
    }
    Ok(GridMap::from_blocked(width, height, blocked))
}

fn header_value(line: usize, v: Option<&str>) -> Result<usize, ParseError> {
    v.ok_or_else(|| ParseError::new(line, "missing header value"))?
        .parse()
        .map_err(|_| ParseError::new(line, "header value is not a non-negative integer"))
}

/// Lazily populated all-pairs shortest-path distances over the free cells.
///
/// Shelves and agents are ignored; only static obstacles block. Each source's
/// table is computed by BFS on first use and cached, so the oracle can be
/// shared across threads.
pub struct DistanceOracle {
    map: GridMap,
    tables: Vec<OnceLock<Vec<u32>>>,
}

/// Distance value for unreachable pairs.
pub const UNREACHABLE: u32 = u32::MAX;

impl DistanceOracle {
    pub fn new(map: &GridMap) -> Self {
        Self {
            map: map.clone(),
            tables: (0..map.num_cells()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    /// Shortest-path step count from `u` to `v`, or [`UNREACHABLE`].
    pub fn dist(&self, u: Cell, v: Cell) -> u32 {
        if u == v {
            return 0;
        }
        self.table(u)[v.index()]
    }

    /// Full distance table from `source`.
    pub fn table(&self, source: Cell) -> &[u32] {
        self.tables[source.index()].get_or_init(|| bfs(&self.map, source))
    }
}

impl fmt::Debug for DistanceOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cached = self.tables.iter().filter(|t| t.get().is_some()).count();
        f.debug_struct("DistanceOracle")
            .field("cells", &self.tables.len())
            .field("cached_sources", &cached)
            .finish()
    }
}

/// Breadth-first distances from `source` over free cells.
pub fn bfs(map: &GridMap, source: Cell) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; map.num_cells()];
    if !map.is_free(source) {
        return dist;
    }
    let mut queue = std::collections::VecDeque::new();
    dist[source.index()] = 0;
    queue.push_back(source);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.index()] + 1;
        for n in map.neighbors(c) {
            if dist[n.index()] == UNREACHABLE {
                dist[n.index()] = d;
                queue.push_back(n);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(rows: &[&str]) -> String {
        format!(
            "type octile\nheight {}\nwidth {}\nmap\n{}\n",
            rows.len(),
            rows[0].len(),
            rows.join("\n")
        )
    }

    #[test]
    fn parses_open_map() {
        let m = parse_map(&text(&["...", "...", "..."])).unwrap();
        assert_eq!(m.free_count(), 9);
    }

    #[test]
    fn parses_single_obstacle() {
        let m = parse_map(&text(&[".@", ".."])).unwrap();
        assert_eq!(m.free_count(), 3);
        assert!(!m.is_free(m.cell(0, 1)));
    }

    #[test]
    fn parses_48x48() {
        let rows: Vec<String> = (0..48).map(|_| ".".repeat(48)).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let m = parse_map(&text(&refs)).unwrap();
        assert_eq!(m.free_count(), 2304);
    }

    #[test]
    fn tree_glyph_blocks() {
        let m = parse_map(&text(&["T."])).unwrap();
        assert_eq!(m.free_count(), 1);
    }

    #[test]
    fn rejects_ragged_rows_with_line_number() {
        let err = parse_map("height 2\nwidth 3\nmap\n...\n..\n").unwrap_err();
        assert_eq!(err.line, 5);
    }

    #[test]
    fn rejects_unknown_glyph() {
        let err = parse_map("height 1\nwidth 2\nmap\n.x\n").unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains('x'));
    }

    #[test]
    fn rejects_bad_header() {
        assert_eq!(parse_map("height x\n").unwrap_err().line, 1);
        assert!(parse_map("width 3\nmap\n...\n").is_err());
        assert_eq!(parse_map("foo 2\n").unwrap_err().line, 1);
    }

    #[test]
    fn round_trips_text() {
        let m = parse_map(&text(&[".@.", "...", "@.."])).unwrap();
        assert_eq!(parse_map(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn distances() {
        let m = GridMap::open(5, 5);
        let o = DistanceOracle::new(&m);
        assert_eq!(o.dist(m.cell(1, 1), m.cell(1, 1)), 0);
        assert_eq!(o.dist(m.cell(1, 1), m.cell(3, 3)), 4);
    }

    #[test]
    fn unreachable_is_infinite() {
        let m = parse_map(&text(&[".@.", ".@.", ".@."])).unwrap();
        let o = DistanceOracle::new(&m);
        assert_eq!(o.dist(m.cell(0, 0), m.cell(0, 2)), UNREACHABLE);
    }
}
