//! Roads and junctions extracted from a validated layout.

use std::collections::HashMap;

use super::layout::{Cell, Layout};
use super::MachineSpec;

pub type RoadId = usize;
pub type JunctionId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Road {
    pub id: RoadId,
    /// Road cells from tail to head.
    pub path: Vec<Cell>,
    pub from_junction: JunctionId,
    pub to_junction: JunctionId,
    /// Machines whose input cell lies on this road.
    pub inputs_on: Vec<usize>,
    /// Machines whose output cell lies on this road.
    pub outputs_on: Vec<usize>,
}

impl Road {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn tail(&self) -> Cell {
        self.path[0]
    }

    pub fn head(&self) -> Cell {
        *self.path.last().expect("roads are never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Junction {
    pub id: JunctionId,
    pub cell: Cell,
    pub entry_roads: Vec<RoadId>,
    pub exit_roads: Vec<RoadId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficSystem {
    pub roads: Vec<Road>,
    pub junctions: Vec<Junction>,
    road_of_cell: HashMap<Cell, (RoadId, usize)>,
    junction_of_cell: HashMap<Cell, JunctionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("road cells {0:?} are not on a chain between two junction cells")]
    OrphanRoadCells(Vec<Cell>),
    #[error("road chain starting at {0} does not end at a junction cell")]
    Unterminated(Cell),
}

impl TrafficSystem {
    /// Groups road cells into maximal chains between junction cells.
    ///
    /// Junctions are numbered in row-major order of their cell, roads in
    /// row-major order of their tail cell.
    pub fn extract(layout: &Layout, machines: &[MachineSpec]) -> Result<Self, ExtractError> {
        let junction_cells: Vec<Cell> = layout.junction_cells().collect();
        let junction_of_cell: HashMap<Cell, JunctionId> =
            junction_cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut chains: Vec<(Vec<Cell>, JunctionId, JunctionId)> = Vec::new();
        for (j, &jc) in junction_cells.iter().enumerate() {
            for start in layout.exits(jc) {
                let mut path = vec![start];
                let mut cur = start;
                let end = loop {
                    match layout.road_exit(cur) {
                        Some(next) if layout.is_junction(next) => break junction_of_cell[&next],
                        Some(next) if layout.is_road(next) => {
                            if path.len() > layout.width() * layout.height() {
                                return Err(ExtractError::Unterminated(start));
                            }
                            path.push(next);
                            cur = next;
                        }
                        _ => return Err(ExtractError::Unterminated(start)),
                    }
                };
                chains.push((path, j, end));
            }
        }
        chains.sort_by_key(|(path, _, _)| path[0].row_major());

        let mut road_of_cell = HashMap::new();
        let mut roads = Vec::with_capacity(chains.len());
        for (id, (path, from, to)) in chains.into_iter().enumerate() {
            for (pos, &c) in path.iter().enumerate() {
                road_of_cell.insert(c, (id, pos));
            }
            roads.push(Road {
                id,
                path,
                from_junction: from,
                to_junction: to,
                inputs_on: Vec::new(),
                outputs_on: Vec::new(),
            });
        }

        let orphans: Vec<Cell> = layout
            .cells()
            .filter(|c| layout.is_road(*c) && !road_of_cell.contains_key(c))
            .collect();
        if !orphans.is_empty() {
            return Err(ExtractError::OrphanRoadCells(orphans));
        }

        let mut junctions: Vec<Junction> = junction_cells
            .iter()
            .enumerate()
            .map(|(id, &cell)| Junction { id, cell, entry_roads: Vec::new(), exit_roads: Vec::new() })
            .collect();
        for r in &roads {
            junctions[r.from_junction].exit_roads.push(r.id);
            junctions[r.to_junction].entry_roads.push(r.id);
        }

        for (m, spec) in machines.iter().enumerate() {
            if let Some(&(r, _)) = spec.input_cell.and_then(|c| road_of_cell.get(&c)) {
                roads[r].inputs_on.push(m);
            }
            if let Some(&(r, _)) = spec.output_cell.and_then(|c| road_of_cell.get(&c)) {
                roads[r].outputs_on.push(m);
            }
        }

        Ok(TrafficSystem { roads, junctions, road_of_cell, junction_of_cell })
    }

    /// Road containing `cell` and the cell's position along it (0 = tail).
    pub fn road_at(&self, cell: Cell) -> Option<(RoadId, usize)> {
        self.road_of_cell.get(&cell).copied()
    }

    pub fn junction_at(&self, cell: Cell) -> Option<JunctionId> {
        self.junction_of_cell.get(&cell).copied()
    }

    pub fn max_road_len(&self) -> usize {
        self.roads.iter().map(Road::len).max().unwrap_or(0)
    }

    /// Number of strongly connected components of the road/junction multigraph.
    pub fn strong_components(&self) -> usize {
        use petgraph::algo::kosaraju_scc;
        use petgraph::graph::DiGraph;
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = self.junctions.iter().map(|_| g.add_node(())).collect();
        for r in &self.roads {
            g.add_edge(nodes[r.from_junction], nodes[r.to_junction], ());
        }
        kosaraju_scc(&g).len()
    }
}
