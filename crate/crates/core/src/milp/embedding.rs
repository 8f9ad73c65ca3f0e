//! The traffic-system embedding tuple and its independent constraint checker.

use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use super::HyperParams;
use crate::model::{ProcessId, SfeInstance, TokenId, NULL_TOKEN};

/// Dense nonnegative integer tensor with three axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<u32>,
}

impl Tensor3 {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Tensor3 { dims: [a, b, c], data: vec![0; a * b * c] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        self.data[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: u32) {
        let at = self.idx(i, j, k);
        self.data[at] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, v: u32) {
        let at = self.idx(i, j, k);
        self.data[at] += v;
    }

    /// Sum over the last axis.
    pub fn sum_k(&self, i: usize, j: usize) -> u32 {
        (0..self.dims[2]).map(|k| self.get(i, j, k)).sum()
    }

    /// Sum over the middle axis.
    pub fn sum_j(&self, i: usize, k: usize) -> u32 {
        (0..self.dims[1]).map(|j| self.get(i, j, k)).sum()
    }

    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = ((usize, usize, usize), u32)> + '_ {
        let [_, b, c] = self.dims;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(n, &v)| ((n / (b * c), (n / c) % b, n % c), v))
    }
}

/// `(A, R, B_in, B_out, P, D)` with the hyperparameters it was solved for.
///
/// `b_in`/`b_out` are indexed `[road][epoch][token]` with token 0 the null
/// token. `pickup`/`deposit` are indexed `[machine][epoch][token - 1]`; use the
/// [`pk`](Self::pk) and [`dp`](Self::dp) accessors with real token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficSystemEmbedding {
    pub hyper: HyperParams,
    pub assign: Vec<Vec<bool>>,
    /// Runs per timestep.
    pub rate: Vec<Vec<Rational64>>,
    pub b_in: Tensor3,
    pub b_out: Tensor3,
    pub pickup: Tensor3,
    pub deposit: Tensor3,
    /// Finished products per timestep.
    pub objective: Rational64,
}

impl TrafficSystemEmbedding {
    /// The idle plan: nothing assigned, nothing moves.
    pub fn zero(inst: &SfeInstance, hyper: HyperParams) -> Self {
        let (m, p, r, k, n) = (
            inst.num_machines(),
            inst.num_processes(),
            inst.num_roads(),
            inst.num_tokens(),
            hyper.num_epochs,
        );
        TrafficSystemEmbedding {
            hyper,
            assign: vec![vec![false; p]; m],
            rate: vec![vec![Rational64::zero(); p]; m],
            b_in: Tensor3::zeros(r, n, k + 1),
            b_out: Tensor3::zeros(r, n, k + 1),
            pickup: Tensor3::zeros(m, n, k),
            deposit: Tensor3::zeros(m, n, k),
            objective: Rational64::zero(),
        }
    }

    pub fn pk(&self, m: usize, epoch: usize, tok: TokenId) -> u32 {
        self.pickup.get(m, epoch, tok - 1)
    }

    pub fn dp(&self, m: usize, epoch: usize, tok: TokenId) -> u32 {
        self.deposit.get(m, epoch, tok - 1)
    }

    pub fn objective_value(&self) -> f64 {
        self.objective.to_f64().unwrap_or(0.0)
    }

    pub fn assigned_process(&self, m: usize) -> Option<ProcessId> {
        self.assign[m].iter().position(|&b| b)
    }

    /// Agents in the plan: the head queues at the start of epoch 0.
    pub fn agents_used(&self) -> u32 {
        (0..self.b_out.dims()[0]).map(|r| self.b_out.sum_k(r, 0)).sum()
    }

    /// Recomputes `objective` from the rates of the output process.
    pub fn refresh_objective(&mut self, inst: &SfeInstance) {
        let out = inst.procedure.output_process();
        self.objective = self.rate.iter().map(|row| row[out]).sum();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    Shape,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    C12,
    C13,
    C14,
    /// Pickup or deposit at a machine without the matching buffer cell.
    Placement,
    Objective,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintViolation {
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.rule, self.detail)
    }
}

/// Re-evaluates every constraint row on `emb` with exact arithmetic.
pub fn check_embedding(inst: &SfeInstance, emb: &TrafficSystemEmbedding) -> Vec<ConstraintViolation> {
    let mut out = Vec::new();
    let mut flag = |rule: Rule, detail: String| out.push(ConstraintViolation { rule, detail });

    let HyperParams { num_epochs: n, epoch_len: l } = emb.hyper;
    let (nm, np, nr, nk) =
        (inst.num_machines(), inst.num_processes(), inst.num_roads(), inst.num_tokens());
    let shape_ok = n >= 1
        && emb.assign.len() == nm
        && emb.assign.iter().all(|r| r.len() == np)
        && emb.rate.len() == nm
        && emb.rate.iter().all(|r| r.len() == np)
        && emb.b_in.dims() == [nr, n, nk + 1]
        && emb.b_out.dims() == [nr, n, nk + 1]
        && emb.pickup.dims() == [nm, n, nk]
        && emb.deposit.dims() == [nm, n, nk];
    if !shape_ok {
        flag(Rule::Shape, "tensor shapes do not match the instance and hyperparameters".into());
        return out;
    }

    let pr = &inst.procedure;
    let tok = |t: TokenId| pr.token_name(t);
    let nl = Rational64::from_integer((n * l) as i64);

    for (m, spec) in inst.machines.iter().enumerate() {
        let assigned = emb.assign[m].iter().filter(|&&b| b).count();
        if assigned > 1 {
            flag(Rule::C1, format!("machine {} assigned {assigned} processes", spec.name));
        }
        for p in 0..np {
            let pname = &pr.processes[p].name;
            let rate = emb.rate[m][p];
            let runtime = spec.runtime(p);
            if emb.assign[m][p] && runtime.is_none() {
                flag(Rule::C2, format!("machine {} assigned unsupported process {pname}", spec.name));
            }
            if rate < Rational64::zero() {
                flag(Rule::C3, format!("machine {} process {pname}: negative rate {rate}", spec.name));
            }
            let cap = runtime.map_or(Rational64::zero(), |rt| Rational64::new(1, rt as i64));
            if rate > cap {
                flag(Rule::C3, format!("machine {} process {pname}: rate {rate} > {cap}", spec.name));
            }
            if !emb.assign[m][p] && !rate.is_zero() {
                flag(Rule::C4, format!("machine {} process {pname}: rate {rate} without assignment", spec.name));
            }
        }
        for t in pr.token_ids() {
            let produced: Rational64 = pr
                .processes
                .iter()
                .map(|p| emb.rate[m][p.id] * Rational64::from_integer(p.num_out(t) as i64))
                .sum::<Rational64>()
                * nl;
            let consumed: Rational64 = pr
                .processes
                .iter()
                .map(|p| emb.rate[m][p.id] * Rational64::from_integer(p.num_in(t) as i64))
                .sum::<Rational64>()
                * nl;
            let picked = Rational64::from_integer(emb.pickup.sum_j(m, t - 1) as i64);
            let dropped = Rational64::from_integer(emb.deposit.sum_j(m, t - 1) as i64);
            if !spec.is_sink && picked != produced {
                flag(Rule::C5, format!("machine {} token {}: pickups {picked} != emitted {produced}", spec.name, tok(t)));
            }
            if !spec.is_source && dropped != consumed {
                flag(Rule::C6, format!("machine {} token {}: deposits {dropped} != consumed {consumed}", spec.name, tok(t)));
            }
            if spec.output_cell.is_none() && !picked.is_zero() {
                flag(Rule::Placement, format!("machine {} has pickups but no output cell", spec.name));
            }
            if spec.input_cell.is_none() && !dropped.is_zero() {
                flag(Rule::Placement, format!("machine {} has deposits but no input cell", spec.name));
            }
        }
    }

    for road in &inst.traffic.roads {
        let r = road.id;
        for e in 0..n {
            let next = (e + 1) % n;
            let dp = |t: TokenId| -> i64 { road.inputs_on.iter().map(|&m| emb.dp(m, e, t) as i64).sum() };
            let pk = |t: TokenId| -> i64 { road.outputs_on.iter().map(|&m| emb.pk(m, e, t) as i64).sum() };
            let mut dp_all = 0;
            let mut pk_all = 0;
            for t in pr.token_ids() {
                let lhs = emb.b_out.get(r, next, t) as i64;
                let rhs = emb.b_in.get(r, e, t) as i64 - dp(t) + pk(t);
                if lhs != rhs {
                    flag(Rule::C7, format!("road {r} epoch {e} token {}: b_out[{next}]={lhs} != {rhs}", tok(t)));
                }
                if dp(t) > emb.b_in.get(r, e, t) as i64 {
                    flag(Rule::C10, format!("road {r} epoch {e} token {}: deposits {} > inbound {}", tok(t), dp(t), emb.b_in.get(r, e, t)));
                }
                dp_all += dp(t);
                pk_all += pk(t);
            }
            let lhs = emb.b_out.get(r, next, NULL_TOKEN) as i64;
            let rhs = emb.b_in.get(r, e, NULL_TOKEN) as i64 - pk_all + dp_all;
            if lhs != rhs {
                flag(Rule::C8, format!("road {r} epoch {e}: empty b_out[{next}]={lhs} != {rhs}"));
            }
            if pk_all > emb.b_in.get(r, e, NULL_TOKEN) as i64 {
                flag(Rule::C11, format!("road {r} epoch {e}: pickups {pk_all} > empty inbound {}", emb.b_in.get(r, e, NULL_TOKEN)));
            }
            let load = emb.b_in.sum_k(r, e) + emb.b_out.sum_k(r, e);
            if load as usize > road.len() {
                flag(Rule::C13, format!("road {r} epoch {e}: {load} agents on a road of length {}", road.len()));
            }
        }
    }

    for j in &inst.traffic.junctions {
        for e in 0..n {
            for t in 0..=nk {
                let inbound: u32 = j.entry_roads.iter().map(|&r| emb.b_out.get(r, e, t)).sum();
                let outbound: u32 = j.exit_roads.iter().map(|&r| emb.b_in.get(r, e, t)).sum();
                if inbound != outbound {
                    flag(Rule::C9, format!("junction {} epoch {e} token {}: in {inbound} != out {outbound}", j.id, tok(t)));
                }
            }
            let crossing: u32 = j.entry_roads.iter().map(|&r| emb.b_out.sum_k(r, e)).sum();
            for &rj in &j.exit_roads {
                let need = crossing as i64 + inst.traffic.roads[rj].len() as i64
                    - emb.b_in.sum_k(rj, e) as i64
                    + 1;
                if (l as i64) < need {
                    flag(Rule::C14, format!("junction {} exit road {rj} epoch {e}: needs L >= {need}, L = {l}", j.id));
                }
            }
        }
    }

    let fleet = emb.agents_used() as usize;
    if fleet > inst.agents {
        flag(Rule::C12, format!("plan uses {fleet} agents, {} available", inst.agents));
    }

    let p_out = pr.output_process();
    let total: Rational64 = emb.rate.iter().map(|row| row[p_out]).sum();
    if total != emb.objective {
        flag(Rule::Objective, format!("objective {} != summed output rate {total}", emb.objective));
    }
    out
}
