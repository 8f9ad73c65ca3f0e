//! Timestep micro-simulation of one junction, driven by the generator's
//! movement kernel with a plan-like policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sfe_core::tplan::{resolve_moves, MovePolicy, Place, TopoRoad, Topology, TplanError};

/// Loads at the start of an epoch around one junction.
#[derive(Debug, Clone)]
pub struct JunctionLoad {
    /// Per entry road: length and agents queued at its head, all crossing.
    pub entries: Vec<(usize, usize)>,
    /// Per exit road: length, agents that will enter it, agents already
    /// queued at its head that leave through the far end.
    pub exits: Vec<(usize, usize, usize)>,
}

impl JunctionLoad {
    pub fn crossing(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Theorem-style bound for exit road `x`: every crossing agent is through
    /// the junction, then the last one walks to the back of the queue.
    pub fn bound(&self, x: usize) -> usize {
        let (len, incoming, _) = self.exits[x];
        self.crossing() + len - incoming + 1
    }
}

const DRAIN: usize = 200;

struct Policy {
    /// Residual inbound demand per exit road.
    wanted: Vec<usize>,
    /// Road ids of the exit roads and the entry roads.
    exit_ids: Vec<usize>,
    entry_ids: Vec<usize>,
    center: usize,
    /// Agents that entered an exit road from the center junction.
    arrived: Vec<bool>,
    rng: ChaCha8Rng,
}

impl MovePolicy for Policy {
    fn wants_to_leave(&mut self, agent: usize, road: usize) -> Result<bool, TplanError> {
        Ok(self.entry_ids.contains(&road) || !self.arrived[agent])
    }

    fn exit_options(&mut self, _agent: usize, junction: usize) -> Result<Vec<usize>, TplanError> {
        if junction != self.center {
            // Far end of exit road x is junction x + 1; its drain road is nx + x.
            return Ok(vec![self.exit_ids.len() + junction - 1]);
        }
        Ok(self
            .exit_ids
            .iter()
            .enumerate()
            .filter(|&(x, _)| self.wanted[x] > 0)
            .map(|(_, &r)| r)
            .collect())
    }

    fn pick(&mut self, options: &[usize]) -> usize {
        options[self.rng.gen_range(0..options.len())]
    }
}

/// Largest number of timesteps any crossing agent needs to settle in the queue
/// of each exit road.
pub fn settle_times(load: &JunctionLoad, rng: ChaCha8Rng) -> Vec<usize> {
    let (ne, nx) = (load.entries.len(), load.exits.len());
    // Junctions: 0 = center, 1..=nx far ends of exit roads, then drain ends,
    // then entry sources.
    let center = 0;
    let far = |x: usize| 1 + x;
    let drain_end = |x: usize| 1 + nx + x;
    let source = |e: usize| 1 + 2 * nx + e;
    let num_junctions = 1 + 2 * nx + ne;
    let mut next_cell = num_junctions;
    let mut cells = |len: usize| {
        let path: Vec<usize> = (next_cell..next_cell + len).collect();
        next_cell += len;
        path
    };
    // Road ids: exits 0..nx, drains nx..2nx, entries 2nx..2nx+ne.
    let mut roads = Vec::new();
    for (x, &(len, _, _)) in load.exits.iter().enumerate() {
        roads.push(TopoRoad { path: cells(len), from: center, to: far(x) });
    }
    for x in 0..nx {
        roads.push(TopoRoad { path: cells(DRAIN), from: far(x), to: drain_end(x) });
    }
    for (e, &(len, _)) in load.entries.iter().enumerate() {
        roads.push(TopoRoad { path: cells(len), from: source(e), to: center });
    }
    let topo = Topology::new(next_cell, next_cell, roads, (0..num_junctions).collect());

    let mut pos = Vec::new();
    let mut crossing = Vec::new();
    for (e, &(_, queued)) in load.entries.iter().enumerate() {
        let path = &topo.roads[2 * nx + e].path;
        for i in 0..queued {
            crossing.push(pos.len());
            pos.push(path[path.len() - 1 - i]);
        }
    }
    for (x, &(_, _, leaving)) in load.exits.iter().enumerate() {
        let path = &topo.roads[x].path;
        for i in 0..leaving {
            pos.push(path[path.len() - 1 - i]);
        }
    }
    let mut policy = Policy {
        wanted: load.exits.iter().map(|e| e.1).collect(),
        exit_ids: (0..nx).collect(),
        entry_ids: (2 * nx..2 * nx + ne).collect(),
        center,
        arrived: vec![false; pos.len()],
        rng,
    };

    let horizon = load.crossing() + load.exits.iter().map(|e| e.0).max().unwrap_or(0) + 10;
    let mut history = vec![pos.clone()];
    for _ in 0..horizon {
        let mut occ = vec![None; topo.num_cells()];
        for (a, &c) in pos.iter().enumerate() {
            occ[c] = Some(a);
        }
        let moves = resolve_moves(&topo, &occ, &pos, &mut policy).expect("micro-simulation step");
        for &(a, r) in &moves.entered_road {
            if r < nx {
                policy.wanted[r] -= 1;
                policy.arrived[a] = true;
            }
        }
        pos = moves.next;
        history.push(pos.clone());
    }

    let mut worst = vec![0; nx];
    for &a in &crossing {
        let last = history.last().unwrap()[a];
        let Some(Place::Road(r, _)) = topo.place(last) else {
            panic!("crossing agent {a} never reached an exit road");
        };
        assert!(r < nx, "crossing agent {a} ended on road {r}");
        let settled = (0..history.len()).rev().take_while(|&t| history[t][a] == last).last().unwrap();
        worst[r] = worst[r].max(settled);
    }
    worst
}
