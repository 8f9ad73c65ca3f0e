//! JSON embedding document with sparse tensors and names instead of indices.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::embedding::{Tensor3, TrafficSystemEmbedding};
use super::{HyperParams, MilpError};
use crate::model::SfeInstance;

type Sparse<K> = BTreeMap<K, BTreeMap<usize, BTreeMap<String, u32>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingDoc {
    pub hyper: HyperParams,
    pub assign: BTreeMap<String, Option<String>>,
    /// Machine → process → `[numerator, denominator]`, nonzero entries only.
    pub rate: BTreeMap<String, BTreeMap<String, [i64; 2]>>,
    pub b_in: Sparse<usize>,
    pub b_out: Sparse<usize>,
    pub pickup: Sparse<String>,
    pub deposit: Sparse<String>,
    pub objective: String,
}

fn bad(msg: impl Into<String>) -> MilpError {
    MilpError::Document(msg.into())
}

impl EmbeddingDoc {
    pub fn from_embedding(inst: &SfeInstance, emb: &TrafficSystemEmbedding) -> Self {
        let pr = &inst.procedure;
        let mname = |m: usize| inst.machines[m].name.clone();
        let mut assign = BTreeMap::new();
        let mut rate = BTreeMap::new();
        for m in 0..inst.num_machines() {
            assign.insert(mname(m), emb.assigned_process(m).map(|p| pr.processes[p].name.clone()));
            let row: BTreeMap<String, [i64; 2]> = emb.rate[m]
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.is_zero())
                .map(|(p, r)| (pr.processes[p].name.clone(), [*r.numer(), *r.denom()]))
                .collect();
            if !row.is_empty() {
                rate.insert(mname(m), row);
            }
        }
        let flows = |t: &Tensor3| {
            let mut out: Sparse<usize> = BTreeMap::new();
            for ((r, e, k), v) in t.nonzero() {
                out.entry(r).or_default().entry(e).or_default().insert(pr.token_name(k).into(), v);
            }
            out
        };
        let events = |t: &Tensor3| {
            let mut out: Sparse<String> = BTreeMap::new();
            for ((m, e, k), v) in t.nonzero() {
                out.entry(mname(m)).or_default().entry(e).or_default().insert(pr.token_name(k + 1).into(), v);
            }
            out
        };
        EmbeddingDoc {
            hyper: emb.hyper,
            assign,
            rate,
            b_in: flows(&emb.b_in),
            b_out: flows(&emb.b_out),
            pickup: events(&emb.pickup),
            deposit: events(&emb.deposit),
            objective: format!("{:.12}", emb.objective.to_f64().unwrap_or(0.0)),
        }
    }

    /// Rebuilds the dense embedding. The objective is recomputed from the rates.
    pub fn into_embedding(self, inst: &SfeInstance) -> Result<TrafficSystemEmbedding, MilpError> {
        let pr = &inst.procedure;
        if self.hyper.num_epochs == 0 {
            return Err(bad("N must be at least 1"));
        }
        let n = self.hyper.num_epochs;
        let mut emb = TrafficSystemEmbedding::zero(inst, self.hyper);
        let machine = |name: &str| {
            inst.machines.iter().position(|m| m.name == name).ok_or_else(|| bad(format!("unknown machine {name:?}")))
        };
        let process = |name: &str| {
            pr.processes.iter().position(|p| p.name == name).ok_or_else(|| bad(format!("unknown process {name:?}")))
        };
        let token = |name: &str| {
            if name == "null" {
                Ok(0)
            } else {
                pr.token_by_name(name).ok_or_else(|| bad(format!("unknown token {name:?}")))
            }
        };
        let epoch = |e: usize| if e < n { Ok(e) } else { Err(bad(format!("epoch {e} out of range"))) };

        for (m, p) in &self.assign {
            if let Some(p) = p {
                emb.assign[machine(m)?][process(p)?] = true;
            }
        }
        for (m, row) in &self.rate {
            let m = machine(m)?;
            for (p, &[num, den]) in row {
                if den <= 0 {
                    return Err(bad("rate denominators must be positive"));
                }
                emb.rate[m][process(p)?] = Rational64::new(num, den);
            }
        }
        for (src, dst) in [(&self.b_in, &mut emb.b_in), (&self.b_out, &mut emb.b_out)] {
            for (&r, by_epoch) in src {
                if r >= inst.num_roads() {
                    return Err(bad(format!("road {r} out of range")));
                }
                for (&e, by_tok) in by_epoch {
                    for (t, &v) in by_tok {
                        dst.set(r, epoch(e)?, token(t)?, v);
                    }
                }
            }
        }
        for (src, dst) in [(&self.pickup, &mut emb.pickup), (&self.deposit, &mut emb.deposit)] {
            for (m, by_epoch) in src {
                let m = machine(m)?;
                for (&e, by_tok) in by_epoch {
                    for (t, &v) in by_tok {
                        let t = token(t)?;
                        if t == 0 {
                            return Err(bad("pickups and deposits cannot carry the null token"));
                        }
                        dst.set(m, epoch(e)?, t - 1, v);
                    }
                }
            }
        }
        emb.refresh_objective(inst);
        Ok(emb)
    }
}

impl TrafficSystemEmbedding {
    pub fn to_json(&self, inst: &SfeInstance) -> String {
        serde_json::to_string_pretty(&EmbeddingDoc::from_embedding(inst, self))
            .expect("embedding documents serialize")
    }

    pub fn from_json(inst: &SfeInstance, text: &str) -> Result<Self, MilpError> {
        let doc: EmbeddingDoc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        doc.into_embedding(inst)
    }
}
