//! Small hand-built instances used by tests, the CLI and the Python bindings.

use crate::model::{InstanceDoc, MachineDoc, ProcessDoc, SfeInstance, ValidationOptions};

fn counts(pairs: &[(&str, u32)]) -> std::collections::BTreeMap<String, u32> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn process(id: &str, inputs: &[(&str, u32)], outputs: &[(&str, u32)], output: bool) -> ProcessDoc {
    ProcessDoc { id: id.into(), inputs: counts(inputs), outputs: counts(outputs), output }
}

fn machine(
    id: &str,
    supported: &[(&str, u32)],
    input_cell: Option<[usize; 2]>,
    output_cell: Option<[usize; 2]>,
) -> MachineDoc {
    MachineDoc { id: id.into(), supported: counts(supported), input_cell, output_cell }
}

/// One junction with two self-loop roads of length 3. A source drops parts on
/// the left loop, a sink consumes them on the right loop.
pub fn two_loop_toy_doc(agents: usize) -> InstanceDoc {
    InstanceDoc {
        tokens: vec!["part".into()],
        processes: vec![
            process("make", &[], &[("part", 1)], false),
            process("ship", &[("part", 1)], &[], true),
        ],
        machines: vec![
            machine("src", &[("make", 1)], None, Some([0, 0])),
            machine("snk", &[("ship", 1)], Some([2, 2]), None),
        ],
        agents,
        grid: ["v<.", ">+v", ".^<"].map(String::from).to_vec(),
    }
}

pub fn two_loop_toy(agents: usize) -> SfeInstance {
    two_loop_toy_doc(agents)
        .into_instance(ValidationOptions::default())
        .expect("fixture is valid")
}

/// Toy-car factory on a 3x3 junction grid: 9 junctions, 12 roads of length 2,
/// 7 machines, 6 processes and 5 tokens.
pub fn example_factory_doc(agents: usize) -> InstanceDoc {
    InstanceDoc {
        tokens: ["wheel", "axle", "body", "chassis", "car"].map(String::from).to_vec(),
        processes: vec![
            process("make_wheel", &[], &[("wheel", 1)], false),
            process("make_axle", &[], &[("axle", 1)], false),
            process("make_body", &[], &[("body", 1)], false),
            process("build_chassis", &[("wheel", 2), ("axle", 1)], &[("chassis", 1)], false),
            process("build_car", &[("chassis", 1), ("body", 1)], &[("car", 1)], false),
            process("ship", &[("car", 1)], &[], true),
        ],
        machines: vec![
            machine("wheels", &[("make_wheel", 2)], None, Some([1, 0])),
            machine("axles", &[("make_axle", 3)], None, Some([4, 0])),
            machine("bodies", &[("make_body", 4), ("make_axle", 4)], None, Some([0, 2])),
            machine("chassis_a", &[("build_chassis", 5)], Some([6, 1]), Some([6, 4])),
            machine("chassis_b", &[("build_chassis", 6)], Some([3, 1]), Some([3, 4])),
            machine("cars", &[("build_car", 4), ("build_chassis", 8)], Some([5, 6]), Some([2, 6])),
            machine("dock", &[("ship", 1)], Some([0, 5]), None),
        ],
        agents,
        grid: [
            "+>>+>>+", //
            "^#.v.#v",
            "^..v..v",
            "+>>+>>+",
            "^..v..v",
            "^#.v.#v",
            "+<<+<<+",
        ]
        .map(String::from)
        .to_vec(),
    }
}

pub fn example_factory(agents: usize) -> SfeInstance {
    example_factory_doc(agents)
        .into_instance(ValidationOptions::default())
        .expect("fixture is valid")
}
