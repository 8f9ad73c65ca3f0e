//! Runs the generator for whole cycles and checks every step independently.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::milp::TrafficSystemEmbedding;
use crate::model::{Cell, SfeInstance, NULL_TOKEN};
use crate::tplan::{FactoryState, Generator, StepEvents};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SimRule {
    VertexConflict,
    EdgeConflict,
    IllegalMove,
    CargoTeleport,
    NegativeBuffer,
    TokenConservation,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimViolation {
    pub t: usize,
    pub rule: SimRule,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub cycles_run: usize,
    pub timesteps: usize,
    /// Output-process runs per timestep after the warm-up cycle; `None` when
    /// only the warm-up cycle was simulated.
    pub measured_throughput: Option<f64>,
    /// Output tokens delivered by agents whose road entry falls in the counted
    /// window: `(cycles - 1) * N` epochs starting at the last warm-up epoch, so
    /// every counted agent finishes its road inside the simulated horizon.
    pub deliveries: u64,
    pub violations: Vec<SimViolation>,
    /// Per-road agent counts and token holdings (agents plus machine buffers)
    /// agree at every cycle boundary from the second one on. Needs at least
    /// three cycles to compare anything.
    pub periodicity_ok: bool,
    pub agents: usize,
    pub max_step_wall_time_ms: f64,
    pub mean_step_wall_time_ms: f64,
}

impl SimReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the move from `prev` to `next` against the layout rules.
///
/// Shares no code with the generator: moves are checked against layout arcs,
/// cargo changes against machine buffer cells.
pub fn check_step(prev: &FactoryState, next: &FactoryState, inst: &SfeInstance) -> Vec<SimViolation> {
    let t = prev.t;
    let mut out = Vec::new();
    let mut flag = |rule, detail: String| out.push(SimViolation { t, rule, detail });
    if prev.agent_cell.len() != next.agent_cell.len() || next.agent_cargo.len() != next.agent_cell.len() {
        flag(SimRule::IllegalMove, "agent count changed".into());
        return out;
    }
    let mut seen: HashMap<Cell, usize> = HashMap::new();
    for (a, &c) in next.agent_cell.iter().enumerate() {
        if !inst.layout.is_traversable(c) {
            flag(SimRule::IllegalMove, format!("agent {a} on non-traversable cell {c}"));
        }
        if let Some(b) = seen.insert(c, a) {
            flag(SimRule::VertexConflict, format!("agents {b} and {a} share cell {c}"));
        }
    }
    let before: HashMap<Cell, usize> = prev.agent_cell.iter().enumerate().map(|(a, &c)| (c, a)).collect();
    for (a, (&from, &to)) in prev.agent_cell.iter().zip(&next.agent_cell).enumerate() {
        if from == to {
            continue;
        }
        if !inst.layout.exits(from).contains(&to) {
            flag(SimRule::IllegalMove, format!("agent {a} moved {from} -> {to}"));
        }
        if let Some(&b) = before.get(&to) {
            if b != a && next.agent_cell[b] == from {
                flag(SimRule::EdgeConflict, format!("agents {a} and {b} swap {from} <-> {to}"));
            }
        }
    }
    for (a, (&was, &now)) in prev.agent_cargo.iter().zip(&next.agent_cargo).enumerate() {
        if was == now {
            continue;
        }
        let c = next.agent_cell[a];
        let ok = if now == NULL_TOKEN {
            inst.machines.iter().any(|m| !m.is_source && m.input_cell == Some(c))
        } else if was == NULL_TOKEN {
            inst.machines.iter().any(|m| !m.is_sink && m.output_cell == Some(c))
        } else {
            false
        };
        if !ok {
            flag(SimRule::CargoTeleport, format!("agent {a} cargo {was} -> {now} at {c}"));
        }
    }
    for (m, (ib, ob)) in next.input_buf.iter().zip(&next.output_buf).enumerate() {
        for (tok, (&i, &o)) in ib.iter().zip(ob).enumerate() {
            if i < 0 || o < 0 {
                flag(SimRule::NegativeBuffer, format!("machine {m} token {tok}: input {i}, output {o}"));
            }
        }
    }
    out
}

fn token_totals(s: &FactoryState, k: usize) -> Vec<i64> {
    let mut tot = vec![0i64; k + 1];
    for (ib, ob) in s.input_buf.iter().zip(&s.output_buf) {
        for tok in 1..=k {
            tot[tok] += ib[tok] + ob[tok];
        }
    }
    for &c in &s.agent_cargo {
        tot[c] += 1;
    }
    tot[NULL_TOKEN] = 0;
    tot
}

/// Per road: agents on it (column 0) and tokens per kind held by those agents
/// or by the buffers of machines on the road. Deposits and pickups only move
/// tokens between the two, so a transfer landing on either side of a cycle
/// boundary does not change the snapshot. Last row: agents on junctions.
fn road_snapshot(inst: &SfeInstance, s: &FactoryState) -> Vec<Vec<i64>> {
    let k = inst.num_tokens();
    let mut snap = vec![vec![0i64; k + 1]; inst.num_roads() + 1];
    for (&c, &tok) in s.agent_cell.iter().zip(&s.agent_cargo) {
        let row = inst.traffic.road_at(c).map_or(inst.num_roads(), |(r, _)| r);
        snap[row][0] += 1;
        if tok != NULL_TOKEN {
            snap[row][tok] += 1;
        }
    }
    for road in &inst.traffic.roads {
        for t in 1..=k {
            snap[road.id][t] += road.inputs_on.iter().map(|&m| s.input_buf[m][t]).sum::<i64>();
            snap[road.id][t] += road.outputs_on.iter().map(|&m| s.output_buf[m][t]).sum::<i64>();
        }
    }
    snap
}

fn trace_line(prev: &FactoryState, next: &FactoryState, ev: &StepEvents) -> serde_json::Value {
    let agents: Vec<_> = next
        .agent_cell
        .iter()
        .zip(&next.agent_cargo)
        .enumerate()
        .map(|(id, (c, tok))| json!({"id": id, "cell": [c.x, c.y], "cargo": tok}))
        .collect();
    let mut events: Vec<_> = prev
        .agent_cell
        .iter()
        .zip(&next.agent_cell)
        .enumerate()
        .map(|(a, (f, to))| {
            if f == to {
                json!({"kind": "wait", "agent": a})
            } else {
                json!({"kind": "move", "agent": a, "from": [f.x, f.y], "to": [to.x, to.y]})
            }
        })
        .collect();
    events.extend(ev.deposits.iter().map(|&(a, m, tok)| json!({"kind": "deposit", "agent": a, "machine": m, "token": tok})));
    events.extend(ev.pickups.iter().map(|&(a, m, tok)| json!({"kind": "pickup", "agent": a, "machine": m, "token": tok})));
    json!({"t": next.t, "agents": agents, "events": events})
}

/// Runs `cycles` full cycles of the generator, checking every step.
pub fn run_simulation(inst: &SfeInstance, emb: &TrafficSystemEmbedding, cycles: usize, seed: u64) -> SimReport {
    run_simulation_traced(inst, emb, cycles, seed, None)
}

pub fn run_simulation_traced(
    inst: &SfeInstance,
    emb: &TrafficSystemEmbedding,
    cycles: usize,
    seed: u64,
    mut trace: Option<&mut dyn Write>,
) -> SimReport {
    let cycles = cycles.max(1);
    let cycle = emb.hyper.cycle_len();
    let k = inst.num_tokens();
    let gen = Generator::new(inst, emb, seed);
    let mut report = SimReport {
        cycles_run: 0,
        timesteps: 0,
        measured_throughput: None,
        deliveries: 0,
        violations: Vec::new(),
        periodicity_ok: true,
        agents: 0,
        max_step_wall_time_ms: 0.0,
        mean_step_wall_time_ms: 0.0,
    };
    let (mut state, mut gstate) = match gen.initialize_sf() {
        Ok(x) => x,
        Err(e) => {
            report.violations.push(SimViolation { t: 0, rule: SimRule::Generator, detail: e.to_string() });
            return report;
        }
    };
    report.agents = state.agent_cell.len();

    // Net tokens created per cycle, recomputed from the embedding tensors.
    let mut net = vec![0i64; k + 1];
    for m in 0..inst.num_machines() {
        for tok in 1..=k {
            net[tok] += emb.pickup.sum_j(m, tok - 1) as i64 - emb.deposit.sum_j(m, tok - 1) as i64;
        }
    }
    let p_out = inst.procedure.output_process();
    let per_run: u32 = inst.procedure.processes[p_out].inputs.values().sum();
    let delivery_cells: HashSet<Cell> = inst
        .machines
        .iter()
        .filter(|m| emb.assign[m.id][p_out])
        .filter_map(|m| m.input_cell)
        .collect();

    // Epoch in which each agent last entered a road, observed from the moves.
    let epoch_len = emb.hyper.epoch_len;
    let mut entered: Vec<Option<usize>> = vec![None; report.agents];
    let counted = (emb.hyper.num_epochs - 1)..(cycles * emb.hyper.num_epochs - 1);
    let mut snapshots = Vec::new();
    let mut total_ms = 0.0;
    let mut totals = token_totals(&state, k);
    for _ in 0..cycles * cycle {
        let started = Instant::now();
        let stepped = gen.step(&state, &mut gstate);
        let ms = started.elapsed().as_secs_f64() * 1e3;
        total_ms += ms;
        report.max_step_wall_time_ms = report.max_step_wall_time_ms.max(ms);
        let (next, events) = match stepped {
            Ok(x) => x,
            Err(e) => {
                report.violations.push(SimViolation { t: state.t, rule: SimRule::Generator, detail: e.to_string() });
                break;
            }
        };
        report.violations.extend(check_step(&state, &next, inst));

        let now = token_totals(&next, k);
        let boundary = next.t % cycle == 0;
        for tok in 1..=k {
            let expected = totals[tok] + if boundary { net[tok] } else { 0 };
            if now[tok] != expected {
                report.violations.push(SimViolation {
                    t: state.t,
                    rule: SimRule::TokenConservation,
                    detail: format!("token {tok}: {} -> {}", totals[tok], now[tok]),
                });
            }
        }
        totals = now;

        for (a, (&from, &to)) in state.agent_cell.iter().zip(&next.agent_cell).enumerate() {
            if from != to && inst.traffic.junction_at(from).is_some() && inst.traffic.road_at(to).is_some() {
                entered[a] = Some(state.t / epoch_len);
            }
        }
        for (a, (&was, &is)) in state.agent_cargo.iter().zip(&next.agent_cargo).enumerate() {
            let in_window = entered[a].is_some_and(|e| counted.contains(&e));
            if in_window && was != NULL_TOKEN && is == NULL_TOKEN && delivery_cells.contains(&next.agent_cell[a]) {
                report.deliveries += 1;
            }
        }
        if let Some(w) = trace.as_deref_mut() {
            let _ = writeln!(w, "{}", trace_line(&state, &next, &events));
        }
        state = next;
        report.timesteps += 1;
        if boundary {
            report.cycles_run += 1;
            snapshots.push(road_snapshot(inst, &state));
        }
    }
    report.mean_step_wall_time_ms = if report.timesteps > 0 { total_ms / report.timesteps as f64 } else { 0.0 };
    // The first boundary still carries the queue order of the initial placement.
    report.periodicity_ok = snapshots.get(1..).unwrap_or_default().windows(2).all(|w| w[0] == w[1]);
    if report.cycles_run >= 2 && per_run > 0 {
        let window = (counted.len() * epoch_len) as f64;
        report.measured_throughput = Some(report.deliveries as f64 / per_run as f64 / window);
    }
    report
}
