//! Parametric benchmark scenarios on one-way Manhattan street grids.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{InstanceDoc, MachineDoc, ModelError, ProcessDoc, SfeInstance, ValidationOptions};

/// Distance between parallel streets; roads between junctions have `SPACING - 1` cells.
pub const SPACING: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Sequential stages, one process per machine.
    LineChain,
    /// Several raw materials assembled pairwise into one product.
    AssemblyTree,
    /// A stage chain served by redundant machines that can each run two stages.
    GridMesh,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::LineChain, Family::AssemblyTree, Family::GridMesh];

    pub fn default_process_count(self) -> usize {
        match self {
            Family::LineChain | Family::AssemblyTree => 6,
            Family::GridMesh => 8,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LineChain => "line-chain",
            Family::AssemblyTree => "assembly-tree",
            Family::GridMesh => "grid-mesh",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line-chain" => Ok(Family::LineChain),
            "assembly-tree" => Ok(Family::AssemblyTree),
            "grid-mesh" => Ok(Family::GridMesh),
            other => Err(format!("unknown family {other:?} (line-chain, assembly-tree, grid-mesh)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub machine_count: usize,
    pub process_count: usize,
    /// Inclusive bounds on copies of a token consumed per input.
    pub tokens_per_process: (u32, u32),
    /// Street counts (horizontal, vertical); both even. `None` picks the
    /// smallest grid with enough machine slots.
    pub streets: Option<(usize, usize)>,
    pub max_runtime: u32,
    pub agents: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(family: Family, machine_count: usize, seed: u64) -> Self {
        ScenarioSpec {
            family,
            machine_count,
            process_count: family.default_process_count(),
            tokens_per_process: (1, 2),
            streets: None,
            max_runtime: 4,
            agents: 1000,
            seed,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Smallest even street grid with at least `machines` slots (two per block).
pub fn streets_for(machines: usize) -> (usize, usize) {
    let mut rows = 4;
    let mut cols = 4;
    while 2 * (rows - 1) * (cols - 1) < machines {
        if cols <= rows {
            cols += 2;
        } else {
            rows += 2;
        }
    }
    (rows, cols)
}

/// Grid rows for a one-way street grid: even rows run east, odd rows west,
/// even columns run north, odd columns south.
pub fn manhattan_grid(rows: usize, cols: usize) -> Vec<String> {
    let h = (rows - 1) * SPACING + 1;
    let w = (cols - 1) * SPACING + 1;
    let mut g = vec![vec!['.'; w]; h];
    for i in 0..rows {
        let y = i * SPACING;
        for x in 0..w {
            g[y][x] = if i % 2 == 0 { '>' } else { '<' };
        }
    }
    for j in 0..cols {
        let x = j * SPACING;
        for (y, row) in g.iter_mut().enumerate() {
            row[x] = if y % SPACING == 0 { '+' } else if j % 2 == 0 { '^' } else { 'v' };
        }
    }
    g.into_iter().map(|r| r.into_iter().collect()).collect()
}

/// Machine slots: body cell plus the two adjacent road cells.
fn slots(rows: usize, cols: usize) -> Vec<([usize; 2], [usize; 2], [usize; 2])> {
    let mut out = Vec::new();
    for bi in 0..rows - 1 {
        for bj in 0..cols - 1 {
            let (x0, y0) = (bj * SPACING, bi * SPACING);
            // Top-left corner: road above and road to the left.
            out.push(([x0 + 1, y0 + 1], [x0 + 1, y0], [x0, y0 + 1]));
            // Bottom-right corner: road below and road to the right.
            let (x1, y1) = (x0 + SPACING - 1, y0 + SPACING - 1);
            out.push(([x1, y1], [x1 + 1, y1], [x1, y1 + 1]));
        }
    }
    out
}

struct Procedure {
    tokens: Vec<String>,
    processes: Vec<ProcessDoc>,
}

fn counts(pairs: &[(String, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().cloned().collect()
}

fn chain(stages: usize, rng: &mut ChaCha8Rng, per: (u32, u32)) -> Procedure {
    let tokens: Vec<String> = (0..stages - 1).map(|i| format!("t{i}")).collect();
    let mut processes = vec![ProcessDoc {
        id: "source".into(),
        inputs: BTreeMap::new(),
        outputs: counts(&[(tokens[0].clone(), 1)]),
        output: false,
    }];
    for i in 1..stages - 1 {
        processes.push(ProcessDoc {
            id: format!("stage{i}"),
            inputs: counts(&[(tokens[i - 1].clone(), rng.gen_range(per.0..=per.1))]),
            outputs: counts(&[(tokens[i].clone(), 1)]),
            output: false,
        });
    }
    processes.push(ProcessDoc {
        id: "ship".into(),
        inputs: counts(&[(tokens[stages - 2].clone(), 1)]),
        outputs: BTreeMap::new(),
        output: true,
    });
    Procedure { tokens, processes }
}

fn assembly(process_count: usize, rng: &mut ChaCha8Rng, per: (u32, u32)) -> Procedure {
    // Sources s and assemblies a satisfy s + a + 1 = P and a = s - 1.
    let sources = (process_count / 2).max(1);
    let assemblies = process_count.saturating_sub(sources + 1);
    let mut tokens = Vec::new();
    let mut processes = Vec::new();
    let mut pool: Vec<String> = Vec::new();
    for i in 0..sources {
        let t = format!("raw{i}");
        tokens.push(t.clone());
        pool.push(t.clone());
        processes.push(ProcessDoc {
            id: format!("supply{i}"),
            inputs: BTreeMap::new(),
            outputs: counts(&[(t, 1)]),
            output: false,
        });
    }
    for i in 0..assemblies {
        let a = pool.remove(0);
        let b = if pool.is_empty() { None } else { Some(pool.remove(0)) };
        let t = format!("part{i}");
        tokens.push(t.clone());
        let mut inputs = vec![(a, rng.gen_range(per.0..=per.1))];
        inputs.extend(b.map(|b| (b, 1)));
        processes.push(ProcessDoc { id: format!("assemble{i}"), inputs: counts(&inputs), outputs: counts(&[(t.clone(), 1)]), output: false });
        pool.push(t);
    }
    let mut inputs: Vec<(String, u32)> = pool.into_iter().map(|t| (t, 1)).collect();
    inputs.sort();
    processes.push(ProcessDoc { id: "ship".into(), inputs: counts(&inputs), outputs: BTreeMap::new(), output: true });
    Procedure { tokens, processes }
}

/// Generates a valid instance; deterministic in the spec.
pub fn generate(spec: &ScenarioSpec) -> Result<SfeInstance, ScenarioError> {
    Ok(generate_doc(spec)?.into_instance(ValidationOptions::default())?)
}

pub fn generate_doc(spec: &ScenarioSpec) -> Result<InstanceDoc, ScenarioError> {
    let p = spec.process_count;
    if p < 3 {
        return Err(ScenarioError::Params("need at least 3 processes".into()));
    }
    if spec.machine_count < p {
        return Err(ScenarioError::Params(format!(
            "{} machines cannot cover {p} processes",
            spec.machine_count
        )));
    }
    let (lo, hi) = spec.tokens_per_process;
    if lo == 0 || lo > hi || spec.max_runtime == 0 {
        return Err(ScenarioError::Params("token bounds and runtimes must be positive".into()));
    }
    let (rows, cols) = spec.streets.unwrap_or_else(|| streets_for(spec.machine_count));
    if rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0 {
        return Err(ScenarioError::Params("street counts must be even and at least 2".into()));
    }
    let mut slots = slots(rows, cols);
    if slots.len() < spec.machine_count {
        return Err(ScenarioError::Params(format!(
            "{rows}x{cols} streets offer {} machine slots, {} requested",
            slots.len(),
            spec.machine_count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let proc_ = match spec.family {
        Family::LineChain | Family::GridMesh => chain(p, &mut rng, (lo, hi)),
        Family::AssemblyTree => assembly(p, &mut rng, (lo, hi)),
    };
    slots.shuffle(&mut rng);

    let mut grid: Vec<Vec<char>> = manhattan_grid(rows, cols).into_iter().map(|r| r.chars().collect()).collect();
    let mut machines = Vec::with_capacity(spec.machine_count);
    for (i, &(body, a, b)) in slots.iter().take(spec.machine_count).enumerate() {
        let primary = i % p;
        let mut supported = BTreeMap::new();
        supported.insert(proc_.processes[primary].id.clone(), rng.gen_range(1..=spec.max_runtime));
        if spec.family == Family::GridMesh {
            // Also the next intermediate stage, when it is of the same kind.
            let other = primary + 1;
            let kind = |q: usize| (proc_.processes[q].inputs.is_empty(), proc_.processes[q].outputs.is_empty());
            if other < p && kind(other) == kind(primary) {
                supported.insert(proc_.processes[other].id.clone(), rng.gen_range(1..=spec.max_runtime));
            }
        }
        let pr = &proc_.processes[primary];
        let (input_cell, output_cell) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        grid[body[1]][body[0]] = '#';
        machines.push(MachineDoc {
            id: format!("m{i}"),
            supported,
            input_cell: (!pr.inputs.is_empty()).then_some(input_cell),
            output_cell: (!pr.outputs.is_empty()).then_some(output_cell),
        });
    }
    Ok(InstanceDoc {
        tokens: proc_.tokens,
        processes: proc_.processes,
        machines,
        agents: spec.agents,
        grid: grid.into_iter().map(|r| r.into_iter().collect()).collect(),
    })
}
