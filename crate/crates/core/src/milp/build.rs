//! TS-MILP rows and the solve/readback path.

use std::time::Duration;

use num_rational::Rational64;

use super::backend::{Cmp, LpBackend, SolveStatus, VarId, VarKind};
use super::embedding::{check_embedding, TrafficSystemEmbedding};
use super::{HyperParams, MilpError};
use crate::model::{SfeInstance, NULL_TOKEN};

/// Sizes of the variable groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VarCounts {
    pub x: usize,
    pub r: usize,
    pub b_in: usize,
    pub b_out: usize,
    pub pk: usize,
    pub dp: usize,
}

/// Variable handles of a built TS-MILP.
#[derive(Debug, Clone)]
pub struct TsMilp {
    pub hyper: HyperParams,
    dims: (usize, usize, usize, usize),
    x: Vec<VarId>,
    r: Vec<VarId>,
    b_in: Vec<VarId>,
    b_out: Vec<VarId>,
    pk: Vec<VarId>,
    dp: Vec<VarId>,
    /// Rows added per constraint family, index 0 = C1.
    pub rows: [usize; 14],
}

impl TsMilp {
    pub fn counts(&self) -> VarCounts {
        VarCounts {
            x: self.x.len(),
            r: self.r.len(),
            b_in: self.b_in.len(),
            b_out: self.b_out.len(),
            pk: self.pk.len(),
            dp: self.dp.len(),
        }
    }

    fn xv(&self, m: usize, p: usize) -> VarId {
        self.x[m * self.dims.1 + p]
    }

    fn rv(&self, m: usize, p: usize) -> VarId {
        self.r[m * self.dims.1 + p]
    }

    fn bi(&self, r: usize, e: usize, t: usize) -> VarId {
        self.b_in[(r * self.hyper.num_epochs + e) * (self.dims.3 + 1) + t]
    }

    fn bo(&self, r: usize, e: usize, t: usize) -> VarId {
        self.b_out[(r * self.hyper.num_epochs + e) * (self.dims.3 + 1) + t]
    }

    /// `t` is a real token id (1-based).
    fn pkv(&self, m: usize, e: usize, t: usize) -> VarId {
        self.pk[(m * self.hyper.num_epochs + e) * self.dims.3 + t - 1]
    }

    fn dpv(&self, m: usize, e: usize, t: usize) -> VarId {
        self.dp[(m * self.hyper.num_epochs + e) * self.dims.3 + t - 1]
    }
}

/// Adds the TS-MILP variables, rows and objective to `backend`.
pub fn build_ts_milp(
    inst: &SfeInstance,
    hyper: HyperParams,
    backend: &mut dyn LpBackend,
) -> Result<TsMilp, MilpError> {
    let HyperParams { num_epochs: n, epoch_len: l } = hyper;
    let min_len = inst.traffic.max_road_len() + 1;
    if n == 0 || l < min_len {
        return Err(MilpError::Build(format!(
            "hyperparameters N={n}, L={l} invalid (need N >= 1 and L >= {min_len})"
        )));
    }
    let (nm, np, nr, nk) =
        (inst.num_machines(), inst.num_processes(), inst.num_roads(), inst.num_tokens());
    let pr = &inst.procedure;
    let nl = (n * l) as f64;
    let fleet = inst.agents as f64;

    let mut x = Vec::with_capacity(nm * np);
    let mut r = Vec::with_capacity(nm * np);
    for spec in &inst.machines {
        for p in 0..np {
            // C2 and C3 are variable bounds.
            let rt = spec.runtime(p);
            let hi = if rt.is_some() { 1.0 } else { 0.0 };
            x.push(backend.add_var(VarKind::Binary, 0.0, hi));
            let cap = rt.map_or(0.0, |rt| 1.0 / rt as f64);
            r.push(backend.add_var(VarKind::Continuous, 0.0, cap));
        }
    }
    let mut b_in = Vec::with_capacity(nr * n * (nk + 1));
    let mut b_out = Vec::with_capacity(nr * n * (nk + 1));
    for road in &inst.traffic.roads {
        let hi = (road.len() as f64).min(fleet);
        for _ in 0..n * (nk + 1) {
            b_in.push(backend.add_var(VarKind::Integer, 0.0, hi));
        }
        for _ in 0..n * (nk + 1) {
            b_out.push(backend.add_var(VarKind::Integer, 0.0, hi));
        }
    }
    let road_len = |cell: Option<crate::model::Cell>| {
        cell.and_then(|c| inst.traffic.road_at(c))
            .map_or(0.0, |(rid, _)| (inst.traffic.roads[rid].len() as f64).min(fleet))
    };
    let mut pk = Vec::with_capacity(nm * n * nk);
    let mut dp = Vec::with_capacity(nm * n * nk);
    for spec in &inst.machines {
        let emits = |t| spec.supported.keys().any(|&p| pr.processes[p].num_out(t) > 0);
        let eats = |t| spec.supported.keys().any(|&p| pr.processes[p].num_in(t) > 0);
        let out_cap = if spec.is_sink { 0.0 } else { road_len(spec.output_cell) };
        let in_cap = if spec.is_source { 0.0 } else { road_len(spec.input_cell) };
        for _ in 0..n {
            for t in pr.token_ids() {
                pk.push(backend.add_var(VarKind::Integer, 0.0, if emits(t) { out_cap } else { 0.0 }));
            }
        }
        for _ in 0..n {
            for t in pr.token_ids() {
                dp.push(backend.add_var(VarKind::Integer, 0.0, if eats(t) { in_cap } else { 0.0 }));
            }
        }
    }
    let mut mv = TsMilp { hyper, dims: (nm, np, nr, nk), x, r, b_in, b_out, pk, dp, rows: [0; 14] };
    let mut rows = [0usize; 14];
    let mut row = |c: usize, b: &mut dyn LpBackend, terms: &[(VarId, f64)], cmp: Cmp, rhs: f64| {
        b.add_row(terms, cmp, rhs);
        rows[c - 1] += 1;
    };

    for (m, spec) in inst.machines.iter().enumerate() {
        let xs: Vec<_> = (0..np).map(|p| (mv.xv(m, p), 1.0)).collect();
        row(1, backend, &xs, Cmp::Le, 1.0);
        for p in 0..np {
            if spec.runtime(p).is_none() {
                row(2, backend, &[(mv.xv(m, p), 1.0)], Cmp::Eq, 0.0);
            }
            let cap = spec.runtime(p).map_or(0.0, |rt| 1.0 / rt as f64);
            row(3, backend, &[(mv.rv(m, p), 1.0)], Cmp::Le, cap);
            row(4, backend, &[(mv.rv(m, p), 1.0), (mv.xv(m, p), -1.0)], Cmp::Le, 0.0);
        }
        for t in pr.token_ids() {
            if !spec.is_sink {
                let mut terms: Vec<_> = (0..n).map(|e| (mv.pkv(m, e, t), 1.0)).collect();
                for p in &pr.processes {
                    if p.num_out(t) > 0 {
                        terms.push((mv.rv(m, p.id), -(p.num_out(t) as f64) * nl));
                    }
                }
                row(5, backend, &terms, Cmp::Eq, 0.0);
            }
            if !spec.is_source {
                let mut terms: Vec<_> = (0..n).map(|e| (mv.dpv(m, e, t), 1.0)).collect();
                for p in &pr.processes {
                    if p.num_in(t) > 0 {
                        terms.push((mv.rv(m, p.id), -(p.num_in(t) as f64) * nl));
                    }
                }
                row(6, backend, &terms, Cmp::Eq, 0.0);
            }
        }
    }

    for road in &inst.traffic.roads {
        let rid = road.id;
        for e in 0..n {
            let next = (e + 1) % n;
            let mut null_terms = vec![(mv.bo(rid, next, NULL_TOKEN), 1.0), (mv.bi(rid, e, NULL_TOKEN), -1.0)];
            let mut pick_terms = vec![(mv.bi(rid, e, NULL_TOKEN), -1.0)];
            for t in pr.token_ids() {
                let mut terms = vec![(mv.bo(rid, next, t), 1.0), (mv.bi(rid, e, t), -1.0)];
                let mut dep_terms = vec![(mv.bi(rid, e, t), -1.0)];
                for &m in &road.inputs_on {
                    terms.push((mv.dpv(m, e, t), 1.0));
                    null_terms.push((mv.dpv(m, e, t), -1.0));
                    dep_terms.push((mv.dpv(m, e, t), 1.0));
                }
                for &m in &road.outputs_on {
                    terms.push((mv.pkv(m, e, t), -1.0));
                    null_terms.push((mv.pkv(m, e, t), 1.0));
                    pick_terms.push((mv.pkv(m, e, t), 1.0));
                }
                row(7, backend, &terms, Cmp::Eq, 0.0);
                row(10, backend, &dep_terms, Cmp::Le, 0.0);
            }
            row(8, backend, &null_terms, Cmp::Eq, 0.0);
            row(11, backend, &pick_terms, Cmp::Le, 0.0);
            let load: Vec<_> = (0..=nk)
                .flat_map(|t| [(mv.bi(rid, e, t), 1.0), (mv.bo(rid, e, t), 1.0)])
                .collect();
            row(13, backend, &load, Cmp::Le, road.len() as f64);
        }
    }

    for j in &inst.traffic.junctions {
        for e in 0..n {
            for t in 0..=nk {
                let mut terms: Vec<_> = j.exit_roads.iter().map(|&r| (mv.bi(r, e, t), 1.0)).collect();
                terms.extend(j.entry_roads.iter().map(|&r| (mv.bo(r, e, t), -1.0)));
                row(9, backend, &terms, Cmp::Eq, 0.0);
            }
            for &rj in &j.exit_roads {
                let mut terms: Vec<_> = j
                    .entry_roads
                    .iter()
                    .flat_map(|&rk| (0..=nk).map(move |t| (rk, t)))
                    .map(|(rk, t)| (mv.bo(rk, e, t), 1.0))
                    .collect();
                terms.extend((0..=nk).map(|t| (mv.bi(rj, e, t), -1.0)));
                let rhs = l as f64 - inst.traffic.roads[rj].len() as f64 - 1.0;
                row(14, backend, &terms, Cmp::Le, rhs);
            }
        }
    }

    let fleet_terms: Vec<_> =
        (0..nr).flat_map(|r| (0..=nk).map(move |t| (r, t))).map(|(r, t)| (mv.bo(r, 0, t), 1.0)).collect();
    row(12, backend, &fleet_terms, Cmp::Le, fleet);

    let p_out = pr.output_process();
    let objective: Vec<_> = (0..nm).map(|m| (mv.rv(m, p_out), 1.0)).collect();
    backend.set_objective(&objective);
    mv.rows = rows;
    Ok(mv)
}

const INT_TOL: f64 = 1e-5;

fn read_int(values: &[f64], v: VarId) -> Result<u32, MilpError> {
    let x = values[v.0];
    let rounded = x.round();
    if (x - rounded).abs() > INT_TOL || rounded < 0.0 {
        return Err(MilpError::Backend(format!("variable {} has non-integral value {x}", v.0)));
    }
    Ok(rounded as u32)
}

/// Reads an embedding out of solver values. Rates are rebuilt exactly from the
/// integer pickup/deposit counts.
fn read_embedding(
    inst: &SfeInstance,
    milp: &TsMilp,
    values: &[f64],
) -> Result<TrafficSystemEmbedding, MilpError> {
    let (nm, np, nr, nk) = milp.dims;
    let n = milp.hyper.num_epochs;
    let nl = (n * milp.hyper.epoch_len) as i64;
    let pr = &inst.procedure;
    let mut emb = TrafficSystemEmbedding::zero(inst, milp.hyper);
    for r in 0..nr {
        for e in 0..n {
            for t in 0..=nk {
                emb.b_in.set(r, e, t, read_int(values, milp.bi(r, e, t))?);
                emb.b_out.set(r, e, t, read_int(values, milp.bo(r, e, t))?);
            }
        }
    }
    for m in 0..nm {
        for e in 0..n {
            for t in 1..=nk {
                emb.pickup.set(m, e, t - 1, read_int(values, milp.pkv(m, e, t))?);
                emb.deposit.set(m, e, t - 1, read_int(values, milp.dpv(m, e, t))?);
            }
        }
        for p in 0..np {
            emb.assign[m][p] = read_int(values, milp.xv(m, p))? == 1;
        }
        let Some(p) = emb.assigned_process(m) else { continue };
        let proc_ = &pr.processes[p];
        let (count, per_run) = if let Some((&t, &k)) = proc_.outputs.iter().next() {
            (emb.pickup.sum_j(m, t - 1), k)
        } else {
            let (&t, &k) = proc_.inputs.iter().next().expect("validated processes are nonempty");
            (emb.deposit.sum_j(m, t - 1), k)
        };
        emb.rate[m][p] = Rational64::new(count as i64, per_run as i64 * nl);
    }
    emb.refresh_objective(inst);
    Ok(emb)
}

/// Builds and solves the TS-MILP within `deadline`.
///
/// Returns `Ok(None)` when the model is infeasible or no incumbent exists when
/// the deadline passes.
pub fn solve_ts_milp(
    inst: &SfeInstance,
    hyper: HyperParams,
    backend: &mut dyn LpBackend,
    deadline: Duration,
) -> Result<Option<TrafficSystemEmbedding>, MilpError> {
    let milp = build_ts_milp(inst, hyper, backend)?;
    backend.set_deadline(deadline);
    let outcome = backend.solve().map_err(|e| MilpError::Backend(e.0))?;
    match outcome.status {
        SolveStatus::Infeasible | SolveStatus::NoIncumbentAtDeadline => return Ok(None),
        SolveStatus::Optimal | SolveStatus::FeasibleIncumbent => {}
    }
    let emb = read_embedding(inst, &milp, &outcome.values)?;
    let issues = check_embedding(inst, &emb);
    if let Some(first) = issues.first() {
        return Err(MilpError::Backend(format!(
            "solver point fails re-check ({} issues, first: {first})",
            issues.len()
        )));
    }
    log::debug!(
        "TS-MILP N={} L={} {:?}: objective {}",
        hyper.num_epochs,
        hyper.epoch_len,
        outcome.status,
        emb.objective
    );
    Ok(Some(emb))
}
