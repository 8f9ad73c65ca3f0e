//! The generator proper: initialization, epoch rollover and the step function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::movement::{resolve_moves, MovePolicy};
use super::topology::Topology;
use super::TplanError;
use crate::milp::TrafficSystemEmbedding;
use crate::model::{Cell, SfeInstance, TokenId, NULL_TOKEN};

/// Buffers, positions and cargo at one timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactoryState {
    pub t: usize,
    /// `[machine][token]` counts; column 0 is unused.
    pub input_buf: Vec<Vec<i64>>,
    pub output_buf: Vec<Vec<i64>>,
    pub agent_cell: Vec<Cell>,
    pub agent_cargo: Vec<TokenId>,
}

/// Residual demand for one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slab {
    pub epoch: u64,
    /// `[road * (K+1) + token]`.
    pub b_in: Vec<u32>,
    pub b_out: Vec<u32>,
    /// `[machine * (K+1) + token]`, token 0 unused.
    pub pk: Vec<u32>,
    pub dp: Vec<u32>,
}

impl Slab {
    fn is_drained(&self) -> bool {
        [&self.b_in, &self.b_out, &self.pk, &self.dp].iter().all(|v| v.iter().all(|&x| x == 0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorState {
    pub epoch: u64,
    /// Slabs for epochs `T-1` and `T`.
    pub prev: Option<Slab>,
    pub cur: Option<Slab>,
    pub can_change: Vec<bool>,
    /// Epoch in which each agent entered its current road; `None` until the
    /// agent's first junction passage.
    pub arrival: Vec<Option<u64>>,
    /// Agent per cell index at the current timestep.
    pub occupancy: Vec<Option<usize>>,
}

impl GeneratorState {
    pub fn slab(&self, epoch: u64) -> Option<&Slab> {
        [self.cur.as_ref(), self.prev.as_ref()].into_iter().flatten().find(|s| s.epoch == epoch)
    }

    fn slab_mut(&mut self, epoch: u64) -> Option<&mut Slab> {
        [self.cur.as_mut(), self.prev.as_mut()].into_iter().flatten().find(|s| s.epoch == epoch)
    }
}

/// Cargo changes and machine cycles that happened during one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StepEvents {
    /// `(agent, machine, token)`.
    pub deposits: Vec<(usize, usize, TokenId)>,
    pub pickups: Vec<(usize, usize, TokenId)>,
    /// True when machines consumed and emitted one cycle's worth of tokens.
    pub machine_cycle: bool,
}

/// TSTGEN: turns an embedding into per-timestep agent moves.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    inst: &'a SfeInstance,
    emb: &'a TrafficSystemEmbedding,
    topo: Topology,
    seed: u64,
    /// Machines whose input / output cell is at a cell index.
    inputs_at: Vec<Vec<usize>>,
    outputs_at: Vec<Vec<usize>>,
    /// Per cycle consumption / emission, `[machine][token]`.
    consume: Vec<Vec<i64>>,
    emit: Vec<Vec<i64>>,
}

impl<'a> Generator<'a> {
    pub fn new(inst: &'a SfeInstance, emb: &'a TrafficSystemEmbedding, seed: u64) -> Self {
        let topo = Topology::from_instance(inst);
        let k = inst.num_tokens();
        let mut inputs_at = vec![Vec::new(); topo.num_cells()];
        let mut outputs_at = vec![Vec::new(); topo.num_cells()];
        let mut consume = vec![vec![0; k + 1]; inst.num_machines()];
        let mut emit = vec![vec![0; k + 1]; inst.num_machines()];
        for (m, spec) in inst.machines.iter().enumerate() {
            if let Some(c) = spec.input_cell.filter(|_| !spec.is_source) {
                inputs_at[topo.cell_index(c)].push(m);
            }
            if let Some(c) = spec.output_cell.filter(|_| !spec.is_sink) {
                outputs_at[topo.cell_index(c)].push(m);
            }
            for t in 1..=k {
                consume[m][t] = emb.deposit.sum_j(m, t - 1) as i64;
                emit[m][t] = emb.pickup.sum_j(m, t - 1) as i64;
            }
        }
        Generator { inst, emb, topo, seed, inputs_at, outputs_at, consume, emit }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn cycle_len(&self) -> usize {
        self.emb.hyper.cycle_len()
    }

    /// Tokens consumed per cycle, `[machine][token]`.
    pub fn consumption(&self) -> &[Vec<i64>] {
        &self.consume
    }

    pub fn emission(&self) -> &[Vec<i64>] {
        &self.emit
    }

    /// Places the epoch-0 head queues and seeds every buffer with one cycle.
    pub fn initialize_sf(&self) -> Result<(FactoryState, GeneratorState), TplanError> {
        let k = self.inst.num_tokens();
        let mut cells = Vec::new();
        let mut cargo = Vec::new();
        for (r, road) in self.topo.roads.iter().enumerate() {
            let needed = self.emb.b_out.sum_k(r, 0) as usize;
            if needed > road.path.len() {
                return Err(TplanError::Capacity { road: r, needed, len: road.path.len() });
            }
            let mut slot = road.path.len();
            for tok in 0..=k {
                for _ in 0..self.emb.b_out.get(r, 0, tok) {
                    slot -= 1;
                    cells.push(road.path[slot]);
                    cargo.push(tok);
                }
            }
        }
        let mut occupancy = vec![None; self.topo.num_cells()];
        for (a, &c) in cells.iter().enumerate() {
            occupancy[c] = Some(a);
        }
        let n = cells.len();
        let state = FactoryState {
            t: 0,
            input_buf: self.consume.clone(),
            output_buf: self.emit.clone(),
            agent_cell: cells.iter().map(|&c| self.topo.cell_at(c)).collect(),
            agent_cargo: cargo,
        };
        let gen = GeneratorState {
            epoch: 0,
            prev: None,
            cur: None,
            can_change: vec![false; n],
            arrival: vec![None; n],
            occupancy,
        };
        Ok((state, gen))
    }

    fn install(&self, epoch: u64) -> Slab {
        let e = (epoch % self.emb.hyper.num_epochs as u64) as usize;
        let k1 = self.inst.num_tokens() + 1;
        let mut slab = Slab {
            epoch,
            b_in: vec![0; self.inst.num_roads() * k1],
            b_out: vec![0; self.inst.num_roads() * k1],
            pk: vec![0; self.inst.num_machines() * k1],
            dp: vec![0; self.inst.num_machines() * k1],
        };
        for r in 0..self.inst.num_roads() {
            for t in 0..k1 {
                slab.b_in[r * k1 + t] = self.emb.b_in.get(r, e, t);
                slab.b_out[r * k1 + t] = self.emb.b_out.get(r, e, t);
            }
        }
        for m in 0..self.inst.num_machines() {
            for t in 1..k1 {
                slab.pk[m * k1 + t] = self.emb.pk(m, e, t);
                slab.dp[m * k1 + t] = self.emb.dp(m, e, t);
            }
        }
        slab
    }

    /// Opens epoch `epoch`: installs its slab and retires epoch `epoch - 2`,
    /// which must be fully drained.
    pub fn adjust_state_for_new_epoch(&self, gen: &mut GeneratorState, epoch: u64) -> Result<(), TplanError> {
        if let Some(old) = gen.prev.take() {
            if !old.is_drained() {
                return Err(TplanError::UnmetDemand { epoch: old.epoch, detail: describe_residual(&old) });
            }
        }
        gen.prev = gen.cur.take();
        gen.cur = Some(self.install(epoch));
        gen.epoch = epoch;
        Ok(())
    }

    /// Advances `state` by one timestep.
    pub fn step(
        &self,
        state: &FactoryState,
        gen: &mut GeneratorState,
    ) -> Result<(FactoryState, StepEvents), TplanError> {
        let t = state.t;
        let l = self.emb.hyper.epoch_len;
        if t % l == 0 {
            self.adjust_state_for_new_epoch(gen, (t / l) as u64)?;
        }
        let epoch = gen.epoch;
        let k1 = self.inst.num_tokens() + 1;
        let pos: Vec<usize> = state.agent_cell.iter().map(|&c| self.topo.cell_index(c)).collect();

        // Seeded by the phase within the cycle so every cycle sees the same draws.
        let phase = (t % self.cycle_len()) as u64;
        let step_seed = self.seed ^ phase.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut policy = PlanPolicy {
            t,
            epoch,
            k1,
            cargo: &state.agent_cargo,
            arrival: &gen.arrival,
            slab: gen.cur.as_ref().expect("current slab installed"),
            topo: &self.topo,
            rng: ChaCha8Rng::seed_from_u64(step_seed),
        };
        let moves = resolve_moves(&self.topo, &gen.occupancy, &pos, &mut policy)?;

        let cur = gen.cur.as_mut().expect("current slab installed");
        for &(a, r) in &moves.entered_junction {
            let slot = &mut cur.b_out[r * k1 + state.agent_cargo[a]];
            *slot = slot
                .checked_sub(1)
                .ok_or_else(|| drift(t, a, format!("left road {r} without outbound demand")))?;
        }
        for &(a, r) in &moves.entered_road {
            let slot = &mut cur.b_in[r * k1 + state.agent_cargo[a]];
            *slot = slot
                .checked_sub(1)
                .ok_or_else(|| drift(t, a, format!("entered road {r} without inbound demand")))?;
            gen.can_change[a] = true;
            gen.arrival[a] = Some(epoch);
        }
        for &from in &pos {
            gen.occupancy[from] = None;
        }
        for (a, &to) in moves.next.iter().enumerate() {
            gen.occupancy[to] = Some(a);
        }

        let mut next = FactoryState {
            t: t + 1,
            input_buf: state.input_buf.clone(),
            output_buf: state.output_buf.clone(),
            agent_cell: moves.next.iter().map(|&c| self.topo.cell_at(c)).collect(),
            agent_cargo: state.agent_cargo.clone(),
        };
        let mut events = StepEvents::default();
        self.deposit_token(&mut next, gen, &moves.next, &mut events);
        self.pickup_token(&mut next, gen, &moves.next, &mut events)?;

        if (t + 1) % self.cycle_len() == 0 {
            for m in 0..self.inst.num_machines() {
                for tok in 1..k1 {
                    next.input_buf[m][tok] -= self.consume[m][tok];
                    next.output_buf[m][tok] += self.emit[m][tok];
                }
            }
            events.machine_cycle = true;
        }
        Ok((next, events))
    }

    /// Agents on an input cell drop their token when the machine still expects
    /// one from the agent's arrival epoch.
    fn deposit_token(
        &self,
        next: &mut FactoryState,
        gen: &mut GeneratorState,
        cells: &[usize],
        events: &mut StepEvents,
    ) {
        let k1 = self.inst.num_tokens() + 1;
        for (a, &c) in cells.iter().enumerate() {
            let tok = next.agent_cargo[a];
            if self.inputs_at[c].is_empty() || tok == NULL_TOKEN || !gen.can_change[a] {
                continue;
            }
            let Some(arr) = gen.arrival[a] else { continue };
            let Some(slab) = gen.slab_mut(arr) else { continue };
            if let Some(&m) = self.inputs_at[c].iter().find(|&&m| slab.dp[m * k1 + tok] > 0) {
                slab.dp[m * k1 + tok] -= 1;
                next.agent_cargo[a] = NULL_TOKEN;
                next.input_buf[m][tok] += 1;
                gen.can_change[a] = false;
                events.deposits.push((a, m, tok));
            }
        }
    }

    /// Empty agents on an output cell take the token with the largest residual
    /// pickup demand (ties to the smaller token id).
    fn pickup_token(
        &self,
        next: &mut FactoryState,
        gen: &mut GeneratorState,
        cells: &[usize],
        events: &mut StepEvents,
    ) -> Result<(), TplanError> {
        let k1 = self.inst.num_tokens() + 1;
        for (a, &c) in cells.iter().enumerate() {
            if self.outputs_at[c].is_empty() || next.agent_cargo[a] != NULL_TOKEN || !gen.can_change[a] {
                continue;
            }
            let Some(arr) = gen.arrival[a] else { continue };
            let Some(slab) = gen.slab_mut(arr) else { continue };
            for &m in &self.outputs_at[c] {
                let best = (1..k1)
                    .filter(|&tok| slab.pk[m * k1 + tok] > 0)
                    .max_by_key(|&tok| (slab.pk[m * k1 + tok], std::cmp::Reverse(tok)));
                let Some(tok) = best else { continue };
                if next.output_buf[m][tok] <= 0 {
                    return Err(TplanError::EmptyBuffer { t: next.t - 1, machine: m, token: tok });
                }
                slab.pk[m * k1 + tok] -= 1;
                next.output_buf[m][tok] -= 1;
                next.agent_cargo[a] = tok;
                gen.can_change[a] = false;
                events.pickups.push((a, m, tok));
                break;
            }
        }
        Ok(())
    }
}

fn drift(t: usize, agent: usize, detail: String) -> TplanError {
    TplanError::PlanDrift { t, agent, detail }
}

fn describe_residual(s: &Slab) -> String {
    let count = |v: &[u32]| v.iter().map(|&x| x as u64).sum::<u64>();
    format!(
        "{} inbound, {} outbound, {} pickups, {} deposits left",
        count(&s.b_in),
        count(&s.b_out),
        count(&s.pk),
        count(&s.dp)
    )
}

struct PlanPolicy<'s> {
    t: usize,
    epoch: u64,
    k1: usize,
    cargo: &'s [TokenId],
    arrival: &'s [Option<u64>],
    slab: &'s Slab,
    topo: &'s Topology,
    rng: ChaCha8Rng,
}

impl MovePolicy for PlanPolicy<'_> {
    fn wants_to_leave(&mut self, agent: usize, road: usize) -> Result<bool, TplanError> {
        if self.arrival[agent] == Some(self.epoch) {
            return Ok(false);
        }
        if self.slab.b_out[road * self.k1 + self.cargo[agent]] == 0 {
            return Err(drift(self.t, agent, format!("queued at head of road {road} with no outbound demand left")));
        }
        Ok(true)
    }

    fn exit_options(&mut self, agent: usize, junction: usize) -> Result<Vec<usize>, TplanError> {
        let tok = self.cargo[agent];
        let options: Vec<usize> = self.topo.junctions[junction]
            .exit
            .iter()
            .copied()
            .filter(|&r| self.slab.b_in[r * self.k1 + tok] > 0)
            .collect();
        if options.is_empty() {
            return Err(drift(self.t, agent, format!("on junction {junction} has no exit road wanting its cargo")));
        }
        Ok(options)
    }

    fn pick(&mut self, options: &[usize]) -> usize {
        options[self.rng.gen_range(0..options.len())]
    }
}
