//! Cell grid, per-cell entry/exit rules and the layout graph.

use std::fmt;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

/// Grid coordinate: column `x`, row `y`, origin at the top-left of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    /// Sort key giving row-major order.
    pub fn row_major(self) -> (usize, usize) {
        (self.y, self.x)
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) == 1
    }
}

impl From<[usize; 2]> for Cell {
    fn from([x, y]: [usize; 2]) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

    fn glyph(self) -> char {
        match self {
            Dir::Up => '^',
            Dir::Down => 'v',
            Dir::Left => '<',
            Dir::Right => '>',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// Road cell with the direction of its exit.
    Road(Dir),
    Junction,
    /// Machine chassis or other obstacle (`#`).
    Obstacle,
    /// Empty non-traversable cell (`.`).
    Empty,
}

impl CellKind {
    pub fn is_traversable(self) -> bool {
        matches!(self, CellKind::Road(_) | CellKind::Junction)
    }

    fn from_glyph(c: char) -> Option<Self> {
        Some(match c {
            '^' => CellKind::Road(Dir::Up),
            'v' => CellKind::Road(Dir::Down),
            '<' => CellKind::Road(Dir::Left),
            '>' => CellKind::Road(Dir::Right),
            '+' => CellKind::Junction,
            '#' => CellKind::Obstacle,
            '.' => CellKind::Empty,
            _ => return None,
        })
    }

    fn glyph(self) -> char {
        match self {
            CellKind::Road(d) => d.glyph(),
            CellKind::Junction => '+',
            CellKind::Obstacle => '#',
            CellKind::Empty => '.',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridParseError {
    #[error("grid is empty")]
    Empty,
    #[error("grid row {row} has length {len}, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("unknown grid character {ch:?} at {cell}")]
    BadGlyph { ch: char, cell: Cell },
}

/// Rule broken by a layout. Produced by [`Layout::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutViolation {
    NoJunction,
    BadRoadCellDegree { cell: Cell, detail: String },
    JunctionDegree { cell: Cell, entries: usize, exits: usize },
    NotStronglyConnected { components: usize },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::NoJunction => write!(f, "layout has no junction cell"),
            LayoutViolation::BadRoadCellDegree { cell, detail } => {
                write!(f, "road cell {cell} does not have exactly one entry and one exit: {detail}")
            }
            LayoutViolation::JunctionDegree { cell, entries, exits } => write!(
                f,
                "junction {cell} needs at least one entry and one exit (has {entries} entries, {exits} exits)"
            ),
            LayoutViolation::NotStronglyConnected { components } => write!(
                f,
                "layout graph not strongly connected ({components} strongly connected components)"
            ),
        }
    }
}

/// Grid of cells. Coordinates are `(x, y)` with `y` growing downwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
}

impl Layout {
    pub fn parse<S: AsRef<str>>(rows: &[S]) -> Result<Self, GridParseError> {
        let height = rows.len();
        if height == 0 {
            return Err(GridParseError::Empty);
        }
        let width = rows[0].as_ref().chars().count();
        if width == 0 {
            return Err(GridParseError::Empty);
        }
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let len = row.chars().count();
            if len != width {
                return Err(GridParseError::Ragged { row: y, len, expected: width });
            }
            for (x, ch) in row.chars().enumerate() {
                let kind = CellKind::from_glyph(ch)
                    .ok_or(GridParseError::BadGlyph { ch, cell: Cell::new(x, y) })?;
                cells.push(kind);
            }
        }
        Ok(Layout { width, height, cells })
    }

    pub fn to_rows(&self) -> Vec<String> {
        self.cells
            .chunks(self.width)
            .map(|row| row.iter().map(|k| k.glyph()).collect())
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn kind(&self, c: Cell) -> CellKind {
        if self.in_bounds(c) {
            self.cells[c.y * self.width + c.x]
        } else {
            CellKind::Empty
        }
    }

    pub fn is_traversable(&self, c: Cell) -> bool {
        self.kind(c).is_traversable()
    }

    pub fn is_road(&self, c: Cell) -> bool {
        matches!(self.kind(c), CellKind::Road(_))
    }

    pub fn is_junction(&self, c: Cell) -> bool {
        self.kind(c) == CellKind::Junction
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn traversable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.is_traversable(c))
    }

    pub fn junction_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.is_junction(c))
    }

    pub fn step(&self, c: Cell, d: Dir) -> Option<Cell> {
        let n = match d {
            Dir::Up => Cell::new(c.x, c.y.checked_sub(1)?),
            Dir::Down => Cell::new(c.x, c.y + 1),
            Dir::Left => Cell::new(c.x.checked_sub(1)?, c.y),
            Dir::Right => Cell::new(c.x + 1, c.y),
        };
        self.in_bounds(n).then_some(n)
    }

    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Dir::ALL.into_iter().filter_map(move |d| self.step(c, d))
    }

    /// Exit cell of a road cell, if it points at a traversable in-bounds cell.
    pub fn road_exit(&self, c: Cell) -> Option<Cell> {
        match self.kind(c) {
            CellKind::Road(d) => self.step(c, d).filter(|&n| self.is_traversable(n)),
            _ => None,
        }
    }

    /// Entry cell of a road cell.
    ///
    /// A road cell is entered from the unique neighbouring road cell whose exit
    /// points into it. With no such neighbour it is entered from its unique
    /// neighbouring junction other than its own exit.
    pub fn road_entry(&self, c: Cell) -> Result<Cell, String> {
        let CellKind::Road(dir) = self.kind(c) else {
            return Err("not a road cell".into());
        };
        let exit = self.step(c, dir);
        let preds: Vec<Cell> = self
            .neighbors(c)
            .filter(|&n| matches!(self.kind(n), CellKind::Road(_)) && self.road_exit(n) == Some(c))
            .collect();
        match preds.len() {
            1 => Ok(preds[0]),
            0 => {
                let junctions: Vec<Cell> = self
                    .neighbors(c)
                    .filter(|&n| self.is_junction(n) && Some(n) != exit)
                    .collect();
                match junctions.len() {
                    1 => Ok(junctions[0]),
                    0 => Err("no entry cell".into()),
                    k => Err(format!("{k} candidate entry junctions")),
                }
            }
            k => Err(format!("{k} road cells exit into it")),
        }
    }

    /// Exit cells of any traversable cell in the layout graph.
    pub fn exits(&self, c: Cell) -> Vec<Cell> {
        match self.kind(c) {
            CellKind::Road(_) => self.road_exit(c).into_iter().collect(),
            CellKind::Junction => self
                .neighbors(c)
                .filter(|&n| self.is_road(n) && self.road_entry(n) == Ok(c))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Entry cells of any traversable cell in the layout graph.
    pub fn entries(&self, c: Cell) -> Vec<Cell> {
        match self.kind(c) {
            CellKind::Road(_) => self.road_entry(c).into_iter().collect(),
            CellKind::Junction => self
                .neighbors(c)
                .filter(|&n| self.is_road(n) && self.road_exit(n) == Some(c))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Arcs `(from, to)` of the layout graph, in row-major order of `from`.
    pub fn arcs(&self) -> Vec<(Cell, Cell)> {
        self.traversable_cells()
            .flat_map(|c| self.exits(c).into_iter().map(move |e| (c, e)))
            .collect()
    }

    /// Number of strongly connected components of the layout graph.
    pub fn strong_components(&self) -> usize {
        let mut graph = DiGraph::<Cell, ()>::new();
        let mut index = std::collections::HashMap::new();
        for c in self.traversable_cells() {
            index.insert(c, graph.add_node(c));
        }
        for (a, b) in self.arcs() {
            let (ia, ib): (NodeIndex, NodeIndex) = (index[&a], index[&b]);
            graph.add_edge(ia, ib, ());
        }
        kosaraju_scc(&graph).len()
    }

    /// Checks the per-cell degree rules and both validity rules.
    pub fn validate(&self) -> Vec<LayoutViolation> {
        let mut out = Vec::new();
        let mut any_junction = false;
        for c in self.cells() {
            match self.kind(c) {
                CellKind::Road(dir) => {
                    let exit = match self.step(c, dir) {
                        None => Some("exit leaves the grid".to_string()),
                        Some(n) if !self.is_traversable(n) => {
                            Some(format!("exit {n} is not traversable"))
                        }
                        Some(_) => None,
                    };
                    let entry = self.road_entry(c);
                    let detail = match (exit, entry) {
                        (Some(e), _) => Some(e),
                        (None, Err(e)) => Some(e),
                        (None, Ok(e)) if Some(e) == self.road_exit(c) => {
                            Some("entry and exit are the same cell".into())
                        }
                        (None, Ok(_)) => None,
                    };
                    if let Some(detail) = detail {
                        out.push(LayoutViolation::BadRoadCellDegree { cell: c, detail });
                    }
                }
                CellKind::Junction => {
                    any_junction = true;
                    let entries = self.entries(c).len();
                    let exits = self.exits(c).len();
                    if entries == 0 || exits == 0 {
                        out.push(LayoutViolation::JunctionDegree { cell: c, entries, exits });
                    }
                }
                _ => {}
            }
        }
        if !any_junction {
            out.push(LayoutViolation::NoJunction);
        }
        let components = self.strong_components();
        if components > 1 {
            out.push(LayoutViolation::NotStronglyConnected { components });
        }
        out
    }
}
