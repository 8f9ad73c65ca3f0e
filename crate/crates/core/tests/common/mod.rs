//! Random layouts and small instances shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use sfe_core::model::{InstanceDoc, Layout, MachineDoc, ProcessDoc, SfeInstance, ValidationOptions};

/// Street grid with random gaps, random one-way directions and some streets
/// cut. The result is not validated.
pub fn random_street_grid<R: Rng>(rng: &mut R) -> Vec<String> {
    let rows = rng.gen_range(1..=3);
    let cols = rng.gen_range(2..=3);
    let mut ys = vec![0];
    for _ in 1..rows {
        ys.push(ys.last().unwrap() + rng.gen_range(2..=4));
    }
    let mut xs = vec![0];
    for _ in 1..cols {
        xs.push(xs.last().unwrap() + rng.gen_range(2..=4));
    }
    let (h, w) = (ys.last().unwrap() + 1, xs.last().unwrap() + 1);
    let mut g = vec![vec!['.'; w]; h];
    for &y in &ys {
        let glyph = if rng.gen_bool(0.5) { '>' } else { '<' };
        for x in 0..w {
            g[y][x] = glyph;
        }
    }
    for &x in &xs {
        let glyph = if rng.gen_bool(0.5) { 'v' } else { '^' };
        for row in g.iter_mut() {
            row[x] = glyph;
        }
    }
    for &y in &ys {
        for &x in &xs {
            g[y][x] = '+';
        }
    }
    // Cut a few street segments between neighbouring junctions.
    for yi in 0..ys.len() {
        for xi in 0..xs.len() - 1 {
            if rng.gen_bool(0.15) {
                for x in xs[xi] + 1..xs[xi + 1] {
                    g[ys[yi]][x] = '.';
                }
            }
        }
    }
    for xi in 0..xs.len() {
        for yi in 0..ys.len().saturating_sub(1) {
            if rng.gen_bool(0.15) {
                for row in g.iter_mut().take(ys[yi + 1]).skip(ys[yi] + 1) {
                    row[xs[xi]] = '.';
                }
            }
        }
    }
    g.into_iter().map(|r| r.into_iter().collect()).collect()
}

/// Draws street grids until one passes layout validation.
pub fn random_valid_grid<R: Rng>(rng: &mut R) -> Vec<String> {
    loop {
        let g = random_street_grid(rng);
        if Layout::parse(&g).is_ok_and(|l| l.validate().is_empty()) {
            return g;
        }
    }
}

fn road_cells(grid: &[String]) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for (y, row) in grid.iter().enumerate() {
        for (x, ch) in row.chars().enumerate() {
            if "<>^v".contains(ch) {
                out.push([x, y]);
            }
        }
    }
    out
}

/// One token made by a source and consumed by the output sink, with the two
/// buffer cells on distinct random road cells.
pub fn source_sink_doc<R: Rng>(grid: Vec<String>, agents: usize, rng: &mut R) -> InstanceDoc {
    let mut cells = road_cells(&grid);
    cells.shuffle(rng);
    let one = |k: &str| [(k.to_string(), 1u32)].into_iter().collect();
    InstanceDoc {
        tokens: vec!["part".into()],
        processes: vec![
            ProcessDoc { id: "make".into(), inputs: Default::default(), outputs: one("part"), output: false },
            ProcessDoc { id: "ship".into(), inputs: one("part"), outputs: Default::default(), output: true },
        ],
        machines: vec![
            MachineDoc { id: "src".into(), supported: one("make"), input_cell: None, output_cell: Some(cells[0]) },
            MachineDoc { id: "snk".into(), supported: one("ship"), input_cell: Some(cells[1]), output_cell: None },
        ],
        agents,
        grid,
    }
}

pub fn source_sink_instance<R: Rng>(grid: Vec<String>, agents: usize, rng: &mut R) -> SfeInstance {
    source_sink_doc(grid, agents, rng)
        .into_instance(ValidationOptions::default())
        .expect("valid layout gives a valid instance")
}

pub mod junction;
pub mod oracle;

pub const LOOPS: [&str; 3] = ["v<.", ">+v", ".^<"];
pub const RING: [&str; 2] = ["+>v", "^<<"];
pub const TWO_JUNCTIONS: [&str; 3] = ["v<<", "+>+", "^<<"];

/// A tiny instance plus the hyperparameters to solve it with.
pub struct TinyCase {
    pub name: String,
    pub inst: SfeInstance,
    pub n: usize,
    pub l: usize,
}

fn counts(pairs: &[(&str, u32)]) -> std::collections::BTreeMap<String, u32> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Source feeding the output sink directly; `per_run` parts per shipment.
pub fn one_stage(grid: &[&str], src: [usize; 2], snk: [usize; 2], per_run: u32, runtime: u32, agents: usize) -> SfeInstance {
    InstanceDoc {
        tokens: vec!["part".into()],
        processes: vec![
            ProcessDoc { id: "make".into(), inputs: counts(&[]), outputs: counts(&[("part", 1)]), output: false },
            ProcessDoc { id: "ship".into(), inputs: counts(&[("part", per_run)]), outputs: counts(&[]), output: true },
        ],
        machines: vec![
            MachineDoc { id: "src".into(), supported: counts(&[("make", 1)]), input_cell: None, output_cell: Some(src) },
            MachineDoc { id: "snk".into(), supported: counts(&[("ship", runtime)]), input_cell: Some(snk), output_cell: None },
        ],
        agents,
        grid: grid.iter().map(|s| s.to_string()).collect(),
    }
    .into_instance(ValidationOptions::default())
    .expect("tiny instance is valid")
}

/// Source, a converter and the output sink.
pub fn two_stage(grid: &[&str], src: [usize; 2], mid: ([usize; 2], [usize; 2]), snk: [usize; 2], agents: usize) -> SfeInstance {
    InstanceDoc {
        tokens: vec!["raw".into(), "done".into()],
        processes: vec![
            ProcessDoc { id: "make".into(), inputs: counts(&[]), outputs: counts(&[("raw", 1)]), output: false },
            ProcessDoc { id: "finish".into(), inputs: counts(&[("raw", 1)]), outputs: counts(&[("done", 1)]), output: false },
            ProcessDoc { id: "ship".into(), inputs: counts(&[("done", 1)]), outputs: counts(&[]), output: true },
        ],
        machines: vec![
            MachineDoc { id: "src".into(), supported: counts(&[("make", 1)]), input_cell: None, output_cell: Some(src) },
            MachineDoc { id: "mid".into(), supported: counts(&[("finish", 1)]), input_cell: Some(mid.0), output_cell: Some(mid.1) },
            MachineDoc { id: "snk".into(), supported: counts(&[("ship", 1)]), input_cell: Some(snk), output_cell: None },
        ],
        agents,
        grid: grid.iter().map(|s| s.to_string()).collect(),
    }
    .into_instance(ValidationOptions::default())
    .expect("tiny instance is valid")
}

/// Twenty instances with at most 3 roads, 2 junctions and 2 agents. Several
/// have optimum 0 on purpose (one agent cannot both fetch and deliver per epoch).
pub fn tiny_cases() -> Vec<TinyCase> {
    let case = |name: &str, inst: SfeInstance, n: usize, l: usize| TinyCase { name: name.into(), inst, n, l };
    vec![
        case("loops-a1-n1", one_stage(&LOOPS, [0, 0], [2, 2], 1, 1, 1), 1, 4),
        case("loops-a1-n2", one_stage(&LOOPS, [0, 0], [2, 2], 1, 1, 1), 2, 5),
        case("loops-a2-n1", one_stage(&LOOPS, [0, 0], [2, 2], 1, 1, 2), 1, 5),
        case("loops-a2-n2", one_stage(&LOOPS, [0, 0], [2, 2], 1, 1, 2), 2, 6),
        case("loops-pair", one_stage(&LOOPS, [0, 0], [2, 2], 2, 1, 2), 2, 6),
        case("loops-slow", one_stage(&LOOPS, [0, 0], [2, 2], 1, 3, 2), 1, 7),
        case("loops-same-road", one_stage(&LOOPS, [1, 0], [0, 1], 1, 1, 2), 1, 6),
        case("loops-same-road-back", one_stage(&LOOPS, [0, 1], [1, 0], 1, 1, 2), 2, 5),
        case("ring-a2", one_stage(&RING, [1, 0], [1, 1], 1, 1, 2), 1, 6),
        case("ring-a2-n2", one_stage(&RING, [2, 1], [2, 0], 1, 1, 2), 2, 6),
        case("ring-pair", one_stage(&RING, [1, 0], [0, 1], 2, 1, 2), 1, 8),
        case("two-j-short", one_stage(&TWO_JUNCTIONS, [1, 1], [1, 0], 1, 1, 1), 2, 5),
        case("two-j-short-n2", one_stage(&TWO_JUNCTIONS, [1, 1], [1, 2], 1, 1, 2), 2, 5),
        case("two-j-split", one_stage(&TWO_JUNCTIONS, [2, 0], [0, 2], 1, 1, 2), 1, 6),
        case("two-j-split-n2", one_stage(&TWO_JUNCTIONS, [2, 0], [0, 2], 1, 1, 2), 2, 6),
        case("two-j-long-l", one_stage(&TWO_JUNCTIONS, [0, 0], [1, 2], 1, 2, 1), 2, 10),
        case("loops-chain", two_stage(&LOOPS, [0, 0], ([2, 2], [1, 2]), [0, 1], 2), 1, 7),
        case("loops-chain-n2", two_stage(&LOOPS, [0, 0], ([2, 2], [1, 2]), [0, 1], 2), 2, 5),
        case("two-j-chain", two_stage(&TWO_JUNCTIONS, [1, 1], ([2, 0], [0, 0]), [2, 2], 2), 2, 7),
        case("loops-idle", one_stage(&LOOPS, [0, 0], [2, 2], 1, 1, 0), 1, 4),
    ]
}
