//! Index-based view of roads and junctions used by the movement kernel.

use crate::model::{Cell, SfeInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoRoad {
    /// Cell indices from tail to head.
    pub path: Vec<usize>,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoJunction {
    pub cell: usize,
    /// Sorted road ids.
    pub entry: Vec<usize>,
    pub exit: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place {
    Road(usize, usize),
    Junction(usize),
}

/// Roads and junctions over dense cell indices.
#[derive(Debug, Clone)]
pub struct Topology {
    pub roads: Vec<TopoRoad>,
    pub junctions: Vec<TopoJunction>,
    places: Vec<Option<Place>>,
    width: usize,
}

impl Topology {
    /// Builds a topology from explicit roads. Cells are `0..num_cells` and the
    /// grid width only matters for converting back to coordinates.
    pub fn new(num_cells: usize, width: usize, roads: Vec<TopoRoad>, junction_cells: Vec<usize>) -> Self {
        let mut places = vec![None; num_cells];
        let mut junctions: Vec<TopoJunction> = junction_cells
            .into_iter()
            .map(|cell| TopoJunction { cell, entry: Vec::new(), exit: Vec::new() })
            .collect();
        for (j, jn) in junctions.iter().enumerate() {
            places[jn.cell] = Some(Place::Junction(j));
        }
        for (r, road) in roads.iter().enumerate() {
            for (i, &c) in road.path.iter().enumerate() {
                places[c] = Some(Place::Road(r, i));
            }
            junctions[road.from].exit.push(r);
            junctions[road.to].entry.push(r);
        }
        Topology { roads, junctions, places, width: width.max(1) }
    }

    pub fn from_instance(inst: &SfeInstance) -> Self {
        let w = inst.layout.width();
        let idx = |c: Cell| c.y * w + c.x;
        let roads = inst
            .traffic
            .roads
            .iter()
            .map(|r| TopoRoad {
                path: r.path.iter().map(|&c| idx(c)).collect(),
                from: r.from_junction,
                to: r.to_junction,
            })
            .collect();
        let junctions = inst.traffic.junctions.iter().map(|j| idx(j.cell)).collect();
        Topology::new(w * inst.layout.height(), w, roads, junctions)
    }

    pub fn num_cells(&self) -> usize {
        self.places.len()
    }

    pub fn place(&self, cell: usize) -> Option<Place> {
        self.places[cell]
    }

    pub fn cell_index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    pub fn tail(&self, r: usize) -> usize {
        self.roads[r].path[0]
    }

    pub fn head(&self, r: usize) -> usize {
        *self.roads[r].path.last().expect("roads are never empty")
    }
}
