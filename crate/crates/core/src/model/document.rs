//! JSON instance document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    Layout, MachineSpec, ManufacturingProcedure, ModelError, Process, SfeInstance, Token,
    ValidationOptions, Violation,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessDoc {
    pub id: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, u32>,
    #[serde(default)]
    pub outputs: BTreeMap<String, u32>,
    #[serde(default)]
    pub output: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDoc {
    pub id: String,
    pub supported: BTreeMap<String, u32>,
    #[serde(default)]
    pub input_cell: Option<[usize; 2]>,
    #[serde(default)]
    pub output_cell: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub tokens: Vec<String>,
    pub processes: Vec<ProcessDoc>,
    pub machines: Vec<MachineDoc>,
    pub agents: usize,
    pub grid: Vec<String>,
}

impl InstanceDoc {
    pub fn into_instance(self, opts: ValidationOptions) -> Result<SfeInstance, ModelError> {
        let layout = Layout::parse(&self.grid).map_err(|e| ModelError::Parse(e.to_string()))?;
        let tokens: Vec<Token> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, name)| Token { id: i + 1, name: name.clone() })
            .collect();
        let token_id = |name: &str| tokens.iter().find(|t| t.name == name).map(|t| t.id);

        let mut issues = Vec::new();
        let mut processes = Vec::with_capacity(self.processes.len());
        for (pid, p) in self.processes.iter().enumerate() {
            let mut convert = |side: &BTreeMap<String, u32>| {
                let mut out = BTreeMap::new();
                for (name, &n) in side {
                    match token_id(name) {
                        Some(t) => {
                            out.insert(t, n);
                        }
                        None => issues.push(Violation::UnknownToken {
                            process: p.id.clone(),
                            token: name.clone(),
                        }),
                    }
                }
                out
            };
            let inputs = convert(&p.inputs);
            let outputs = convert(&p.outputs);
            processes.push(Process { id: pid, name: p.id.clone(), inputs, outputs, is_output: p.output });
        }
        let process_id = |name: &str| processes.iter().position(|p| p.name == name);

        let mut machines = Vec::with_capacity(self.machines.len());
        for (mid, m) in self.machines.iter().enumerate() {
            let mut supported = BTreeMap::new();
            for (name, &rt) in &m.supported {
                match process_id(name) {
                    Some(p) => {
                        supported.insert(p, rt);
                    }
                    None => issues.push(Violation::UnknownProcess {
                        machine: m.id.clone(),
                        process: name.clone(),
                    }),
                }
            }
            machines.push(MachineSpec {
                id: mid,
                name: m.id.clone(),
                supported,
                input_cell: m.input_cell.map(Into::into),
                output_cell: m.output_cell.map(Into::into),
                is_source: false,
                is_sink: false,
            });
        }
        if !issues.is_empty() {
            return Err(ModelError::Invalid(issues));
        }
        SfeInstance::new(ManufacturingProcedure { tokens, processes }, machines, layout, self.agents, opts)
    }

    pub fn from_instance(inst: &SfeInstance) -> Self {
        let pr = &inst.procedure;
        let named = |side: &BTreeMap<usize, u32>| {
            side.iter().map(|(&t, &n)| (pr.token_name(t).to_string(), n)).collect()
        };
        InstanceDoc {
            tokens: pr.tokens.iter().map(|t| t.name.clone()).collect(),
            processes: pr
                .processes
                .iter()
                .map(|p| ProcessDoc {
                    id: p.name.clone(),
                    inputs: named(&p.inputs),
                    outputs: named(&p.outputs),
                    output: p.is_output,
                })
                .collect(),
            machines: inst
                .machines
                .iter()
                .map(|m| MachineDoc {
                    id: m.name.clone(),
                    supported: m
                        .supported
                        .iter()
                        .map(|(&p, &rt)| (pr.processes[p].name.clone(), rt))
                        .collect(),
                    input_cell: m.input_cell.map(Into::into),
                    output_cell: m.output_cell.map(Into::into),
                })
                .collect(),
            agents: inst.agents,
            grid: inst.layout.to_rows(),
        }
    }
}
