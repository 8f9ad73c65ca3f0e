//! Manufacturing procedures, machines, layouts and the SFE instance bundle.

mod document;
pub mod layout;
pub mod traffic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use document::{InstanceDoc, MachineDoc, ProcessDoc};
pub use layout::{Cell, CellKind, Dir, GridParseError, Layout, LayoutViolation};
pub use traffic::{ExtractError, Junction, JunctionId, Road, RoadId, TrafficSystem};

/// Token identifier. Real tokens are numbered `1..=|T|`; [`NULL_TOKEN`] is the empty cargo.
pub type TokenId = usize;
pub const NULL_TOKEN: TokenId = 0;

pub type ProcessId = usize;
pub type MachineId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub id: ProcessId,
    pub name: String,
    /// Token → copies consumed per run.
    pub inputs: BTreeMap<TokenId, u32>,
    /// Token → copies emitted per run.
    pub outputs: BTreeMap<TokenId, u32>,
    pub is_output: bool,
}

impl Process {
    pub fn is_source(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn is_sink(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn num_in(&self, tok: TokenId) -> u32 {
        self.inputs.get(&tok).copied().unwrap_or(0)
    }

    pub fn num_out(&self, tok: TokenId) -> u32 {
        self.outputs.get(&tok).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManufacturingProcedure {
    pub tokens: Vec<Token>,
    pub processes: Vec<Process>,
}

impl ManufacturingProcedure {
    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Real token ids, `1..=|T|`.
    pub fn token_ids(&self) -> std::ops::RangeInclusive<TokenId> {
        1..=self.tokens.len()
    }

    pub fn token_name(&self, tok: TokenId) -> &str {
        if tok == NULL_TOKEN {
            "null"
        } else {
            &self.tokens[tok - 1].name
        }
    }

    pub fn token_by_name(&self, name: &str) -> Option<TokenId> {
        self.tokens.iter().find(|t| t.name == name).map(|t| t.id)
    }

    pub fn output_process(&self) -> ProcessId {
        self.processes
            .iter()
            .position(|p| p.is_output)
            .expect("validated procedures have an output process")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSpec {
    pub id: MachineId,
    pub name: String,
    /// Supported process → runtime in timesteps.
    pub supported: BTreeMap<ProcessId, u32>,
    pub input_cell: Option<Cell>,
    pub output_cell: Option<Cell>,
    pub is_source: bool,
    pub is_sink: bool,
}

impl MachineSpec {
    pub fn runtime(&self, p: ProcessId) -> Option<u32> {
        self.supported.get(&p).copied()
    }
}

/// A rule broken by an instance document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Layout(LayoutViolation),
    Traffic(ExtractError),
    DuplicateToken(String),
    DuplicateProcess(String),
    DuplicateMachine(String),
    UnknownToken { process: String, token: String },
    ZeroTokenCount { process: String, token: String },
    EmptyProcess(String),
    OutputProcessCount(usize),
    OutputNotSink(String),
    UnknownProcess { machine: String, process: String },
    ZeroRuntime { machine: String, process: String },
    MixedMachine { machine: String, detail: &'static str },
    SourceWithInputCell(String),
    SinkWithOutputCell(String),
    BufferOffRoad { machine: String, which: &'static str, cell: Cell },
    SharedRoadBuffers { road: RoadId, count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Layout(v) => v.fmt(f),
            Traffic(e) => e.fmt(f),
            DuplicateToken(t) => write!(f, "token {t:?} declared twice"),
            DuplicateProcess(p) => write!(f, "process {p:?} declared twice"),
            DuplicateMachine(m) => write!(f, "machine {m:?} declared twice"),
            UnknownToken { process, token } => {
                write!(f, "process {process:?} references undeclared token {token:?}")
            }
            ZeroTokenCount { process, token } => {
                write!(f, "process {process:?} lists token {token:?} with count 0")
            }
            EmptyProcess(p) => write!(f, "process {p:?} has neither inputs nor outputs"),
            OutputProcessCount(n) => {
                write!(f, "{n} processes marked output, exactly one output process is required")
            }
            OutputNotSink(p) => write!(f, "output process {p:?} is not a sink process"),
            UnknownProcess { machine, process } => {
                write!(f, "machine {machine:?} supports undeclared process {process:?}")
            }
            ZeroRuntime { machine, process } => {
                write!(f, "machine {machine:?} has runtime 0 for process {process:?}")
            }
            MixedMachine { machine, detail } => write!(f, "machine {machine:?} {detail}"),
            SourceWithInputCell(m) => write!(f, "source machine {m:?} has an input cell"),
            SinkWithOutputCell(m) => write!(f, "sink machine {m:?} has an output cell"),
            BufferOffRoad { machine, which, cell } => {
                write!(f, "{which} cell {cell} of machine {machine:?} is not a road cell")
            }
            SharedRoadBuffers { road, count } => {
                write!(f, "road {road} carries {count} buffer cells (strict mode allows one)")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Invalid(v) => v,
            ModelError::Parse(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Reject roads that carry more than one machine buffer cell.
    pub one_buffer_per_road: bool,
}

/// Immutable bundle of procedure, machines, layout, traffic system and fleet size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfeInstance {
    pub procedure: ManufacturingProcedure,
    pub machines: Vec<MachineSpec>,
    pub layout: Layout,
    pub traffic: TrafficSystem,
    pub agents: usize,
}

impl SfeInstance {
    /// Validates the parts and extracts the traffic system.
    ///
    /// Machine `is_source`/`is_sink` flags are derived from the processes they
    /// support; the incoming values are ignored.
    pub fn new(
        procedure: ManufacturingProcedure,
        mut machines: Vec<MachineSpec>,
        layout: Layout,
        agents: usize,
        opts: ValidationOptions,
    ) -> Result<Self, ModelError> {
        let mut issues = validate_procedure(&procedure);
        issues.extend(validate_machines(&procedure, &mut machines, &layout));
        let layout_issues = layout.validate();
        let layout_ok = layout_issues.is_empty();
        issues.extend(layout_issues.into_iter().map(Violation::Layout));
        if !layout_ok {
            return Err(ModelError::Invalid(issues));
        }
        let traffic = match TrafficSystem::extract(&layout, &machines) {
            Ok(t) => t,
            Err(e) => {
                issues.push(Violation::Traffic(e));
                return Err(ModelError::Invalid(issues));
            }
        };
        if opts.one_buffer_per_road {
            for r in &traffic.roads {
                let count = r.inputs_on.len() + r.outputs_on.len();
                if count > 1 {
                    issues.push(Violation::SharedRoadBuffers { road: r.id, count });
                }
            }
        }
        if !issues.is_empty() {
            return Err(ModelError::Invalid(issues));
        }
        Ok(SfeInstance { procedure, machines, layout, traffic, agents })
    }

    pub fn num_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn num_processes(&self) -> usize {
        self.procedure.processes.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.procedure.num_tokens()
    }

    pub fn num_roads(&self) -> usize {
        self.traffic.roads.len()
    }

    pub fn num_junctions(&self) -> usize {
        self.traffic.junctions.len()
    }

    pub fn with_agents(&self, agents: usize) -> Self {
        SfeInstance { agents, ..self.clone() }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_json_with(text, ValidationOptions::default())
    }

    pub fn from_json_with(text: &str, opts: ValidationOptions) -> Result<Self, ModelError> {
        let doc: InstanceDoc =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        doc.into_instance(opts)
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc::from_instance(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance documents serialize")
    }
}

fn validate_procedure(proc_: &ManufacturingProcedure) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for t in &proc_.tokens {
        if !names.insert(t.name.as_str()) {
            out.push(Violation::DuplicateToken(t.name.clone()));
        }
    }
    let mut pnames = BTreeSet::new();
    for p in &proc_.processes {
        if !pnames.insert(p.name.as_str()) {
            out.push(Violation::DuplicateProcess(p.name.clone()));
        }
        if p.is_source() && p.is_sink() {
            out.push(Violation::EmptyProcess(p.name.clone()));
        }
        for (&tok, &n) in p.inputs.iter().chain(p.outputs.iter()) {
            if n == 0 {
                out.push(Violation::ZeroTokenCount {
                    process: p.name.clone(),
                    token: proc_.token_name(tok).to_string(),
                });
            }
        }
        if p.is_output && !p.is_sink() {
            out.push(Violation::OutputNotSink(p.name.clone()));
        }
    }
    let outputs = proc_.processes.iter().filter(|p| p.is_output).count();
    if outputs != 1 {
        out.push(Violation::OutputProcessCount(outputs));
    }
    out
}

fn validate_machines(
    proc_: &ManufacturingProcedure,
    machines: &mut [MachineSpec],
    layout: &Layout,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for m in machines.iter_mut() {
        if !names.insert(m.name.clone()) {
            out.push(Violation::DuplicateMachine(m.name.clone()));
        }
        for (&p, &rt) in &m.supported {
            if rt == 0 {
                out.push(Violation::ZeroRuntime {
                    machine: m.name.clone(),
                    process: proc_.processes[p].name.clone(),
                });
            }
        }
        let kinds: Vec<&Process> = m.supported.keys().map(|&p| &proc_.processes[p]).collect();
        let any_source = kinds.iter().any(|p| p.is_source());
        let any_sink = kinds.iter().any(|p| p.is_sink());
        if any_source && !kinds.iter().all(|p| p.is_source()) {
            out.push(Violation::MixedMachine {
                machine: m.name.clone(),
                detail: "supports source and non-source processes",
            });
        }
        if any_sink && !kinds.iter().all(|p| p.is_sink()) {
            out.push(Violation::MixedMachine {
                machine: m.name.clone(),
                detail: "supports sink and non-sink processes",
            });
        }
        m.is_source = any_source;
        m.is_sink = any_sink;
        if m.is_source && m.input_cell.is_some() {
            out.push(Violation::SourceWithInputCell(m.name.clone()));
        }
        if m.is_sink && m.output_cell.is_some() {
            out.push(Violation::SinkWithOutputCell(m.name.clone()));
        }
        for (which, cell) in [("input", m.input_cell), ("output", m.output_cell)] {
            if let Some(cell) = cell {
                if !layout.is_road(cell) {
                    out.push(Violation::BufferOffRoad { machine: m.name.clone(), which, cell });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn two_loop_toy_is_valid() {
        let inst = fixtures::two_loop_toy(1);
        assert_eq!(inst.num_roads(), 2);
        assert_eq!(inst.num_junctions(), 1);
        assert!(inst.machines[0].is_source);
        assert!(inst.machines[1].is_sink);
        assert_eq!(inst.traffic.roads[0].outputs_on, vec![0]);
        assert_eq!(inst.traffic.roads[1].inputs_on, vec![1]);
    }

    #[test]
    fn two_output_processes_are_rejected() {
        let mut doc = fixtures::two_loop_toy(1).to_doc();
        doc.processes[0].output = true;
        let err = doc.into_instance(ValidationOptions::default()).unwrap_err();
        assert!(err.violations().contains(&Violation::OutputProcessCount(2)));
        assert!(err.to_string().contains("output"));
    }

    #[test]
    fn buffer_on_junction_is_rejected() {
        let mut doc = fixtures::two_loop_toy(1).to_doc();
        doc.machines[1].input_cell = Some([1, 1]);
        let err = doc.into_instance(ValidationOptions::default()).unwrap_err();
        assert!(matches!(err.violations()[0], Violation::BufferOffRoad { .. }));
    }

    #[test]
    fn strict_buffer_mode() {
        let mut doc = fixtures::two_loop_toy(1).to_doc();
        // Move the sink's input cell onto the source's road.
        doc.machines[1].input_cell = Some([1, 0]);
        let inst = doc.clone().into_instance(ValidationOptions::default()).unwrap();
        assert_eq!(inst.traffic.roads[0].inputs_on, vec![1]);
        let err = doc
            .into_instance(ValidationOptions { one_buffer_per_road: true })
            .unwrap_err();
        assert!(matches!(err.violations()[0], Violation::SharedRoadBuffers { road: 0, count: 2 }));
    }

    #[test]
    fn source_machine_with_input_cell() {
        let mut doc = fixtures::two_loop_toy(1).to_doc();
        doc.machines[0].input_cell = Some([2, 2]);
        let err = doc.into_instance(ValidationOptions::default()).unwrap_err();
        assert!(err.violations().contains(&Violation::SourceWithInputCell("src".into())));
    }
}
