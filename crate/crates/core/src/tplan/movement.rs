//! One-step movement resolution for agents on roads and junctions.
//!
//! Every target cell has a single possible claimant: a road cell is entered
//! from its predecessor, a road tail from its junction, and a junction from
//! the head of one entry road (lowest road id wins). An agent moves when its
//! target is empty or its occupant moves away in the same step, so a queue
//! behind a departing agent advances in one step. Rotations around a cycle of
//! full cells are not attempted.

use super::topology::{Place, Topology};
use super::TplanError;

/// Decisions the movement kernel delegates to the plan.
pub trait MovePolicy {
    /// Whether the agent standing at the head of `road` should cross into the
    /// road's end junction this step (if the junction frees up).
    fn wants_to_leave(&mut self, agent: usize, road: usize) -> Result<bool, TplanError>;
    /// Exit roads the agent on `junction` may enter. Must be nonempty.
    fn exit_options(&mut self, agent: usize, junction: usize) -> Result<Vec<usize>, TplanError>;
    /// Chooses among exit roads whose tail is free next step.
    fn pick(&mut self, options: &[usize]) -> usize;
}

#[derive(Debug, Clone, Default)]
pub struct Moves {
    /// Cell of every agent after the step.
    pub next: Vec<usize>,
    /// `(agent, road)` for agents that moved from a junction onto a road tail.
    pub entered_road: Vec<(usize, usize)>,
    /// `(agent, road)` for agents that left the head of `road` into a junction.
    pub entered_junction: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Todo,
    Busy,
    Moves,
    Waits,
}

struct Resolver<'a, P: MovePolicy> {
    topo: &'a Topology,
    occ: &'a [Option<usize>],
    pos: &'a [usize],
    policy: &'a mut P,
    mark: Vec<Mark>,
    leave: Vec<Option<bool>>,
    target: Vec<usize>,
}

impl<P: MovePolicy> Resolver<'_, P> {
    fn wants(&mut self, a: usize, road: usize) -> Result<bool, TplanError> {
        if let Some(w) = self.leave[a] {
            return Ok(w);
        }
        let w = self.policy.wants_to_leave(a, road)?;
        self.leave[a] = Some(w);
        Ok(w)
    }

    fn frees(&mut self, cell: usize) -> Result<bool, TplanError> {
        match self.occ[cell] {
            None => Ok(true),
            Some(b) => self.vacates(b),
        }
    }

    fn vacates(&mut self, a: usize) -> Result<bool, TplanError> {
        match self.mark[a] {
            Mark::Moves => return Ok(true),
            Mark::Waits | Mark::Busy => return Ok(false),
            Mark::Todo => {}
        }
        self.mark[a] = Mark::Busy;
        let here = self.pos[a];
        let target = match self.topo.place(here) {
            Some(Place::Road(r, i)) if i + 1 < self.topo.roads[r].path.len() => {
                let next = self.topo.roads[r].path[i + 1];
                self.frees(next)?.then_some(next)
            }
            Some(Place::Road(r, _)) => {
                let j = self.topo.roads[r].to;
                let mut winner = None;
                for k in 0..self.topo.junctions[j].entry.len() {
                    let rk = self.topo.junctions[j].entry[k];
                    if let Some(h) = self.occ[self.topo.head(rk)] {
                        if self.wants(h, rk)? {
                            winner = Some(h);
                            break;
                        }
                    }
                }
                let jc = self.topo.junctions[j].cell;
                if winner == Some(a) && self.frees(jc)? {
                    Some(jc)
                } else {
                    None
                }
            }
            Some(Place::Junction(j)) => {
                let options = self.policy.exit_options(a, j)?;
                let mut free = Vec::with_capacity(options.len());
                for r in options {
                    if self.frees(self.topo.tail(r))? {
                        free.push(r);
                    }
                }
                if free.is_empty() {
                    None
                } else {
                    let r = self.policy.pick(&free);
                    Some(self.topo.tail(r))
                }
            }
            None => return Err(TplanError::Corrupt(format!("agent {a} on non-traversable cell {here}"))),
        };
        match target {
            Some(c) => {
                self.target[a] = c;
                self.mark[a] = Mark::Moves;
                Ok(true)
            }
            None => {
                self.mark[a] = Mark::Waits;
                Ok(false)
            }
        }
    }
}

/// Resolves one timestep. `occ` maps cells to agents at `t`, `pos` maps
/// agents to cells at `t`.
pub fn resolve_moves<P: MovePolicy>(
    topo: &Topology,
    occ: &[Option<usize>],
    pos: &[usize],
    policy: &mut P,
) -> Result<Moves, TplanError> {
    let n = pos.len();
    let mut res = Resolver {
        topo,
        occ,
        pos,
        policy,
        mark: vec![Mark::Todo; n],
        leave: vec![None; n],
        target: pos.to_vec(),
    };
    // Evaluate in cell order so the outcome does not depend on agent numbering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&a| pos[a]);
    for a in order {
        res.vacates(a)?;
    }
    let mut moves = Moves { next: res.target, ..Moves::default() };
    for a in 0..n {
        if moves.next[a] == pos[a] {
            continue;
        }
        match (topo.place(pos[a]), topo.place(moves.next[a])) {
            (Some(Place::Junction(_)), Some(Place::Road(r, _))) => moves.entered_road.push((a, r)),
            (Some(Place::Road(r, _)), Some(Place::Junction(_))) => moves.entered_junction.push((a, r)),
            _ => {}
        }
    }
    Ok(moves)
}
