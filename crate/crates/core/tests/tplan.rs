mod common;

use num_rational::Rational64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfe_core::fixtures;
use sfe_core::milp::{HyperParams, TrafficSystemEmbedding};
use sfe_core::model::{Cell, InstanceDoc, MachineDoc, ProcessDoc, SfeInstance, ValidationOptions, NULL_TOKEN};
use sfe_core::tplan::*;

const PART: usize = 1;

fn plan(inst: &SfeInstance, n: usize, l: usize) -> TrafficSystemEmbedding {
    TrafficSystemEmbedding::zero(inst, HyperParams::new(n, l))
}

fn run(gen: &Generator, steps: usize) -> (Vec<FactoryState>, Vec<StepEvents>, GeneratorState) {
    let (mut s, mut g) = gen.initialize_sf().unwrap();
    let mut states = vec![s.clone()];
    let mut events = Vec::new();
    for _ in 0..steps {
        let (next, ev) = gen.step(&s, &mut g).unwrap();
        s = next;
        states.push(s.clone());
        events.push(ev);
    }
    (states, events, g)
}

#[test]
fn loops_layout_numbering() {
    let inst = fixtures::two_loop_toy(1);
    let paths: Vec<_> = inst.traffic.roads.iter().map(|r| r.path.clone()).collect();
    assert_eq!(paths[0], vec![Cell::new(1, 0), Cell::new(0, 0), Cell::new(0, 1)]);
    assert_eq!(paths[1], vec![Cell::new(2, 1), Cell::new(2, 2), Cell::new(1, 2)]);
}

#[test]
fn zero_agent_step_only_advances_time() {
    let inst = fixtures::two_loop_toy(0);
    let emb = plan(&inst, 1, 4);
    let gen = Generator::new(&inst, &emb, 0);
    let (s0, mut g) = gen.initialize_sf().unwrap();
    assert!(s0.agent_cell.is_empty());
    let (s1, ev) = gen.step(&s0, &mut g).unwrap();
    assert_eq!(s1, FactoryState { t: 1, ..s0 });
    assert!(ev.deposits.is_empty() && ev.pickups.is_empty());
}

#[test]
fn initial_queue_ends_at_the_head() {
    let inst = fixtures::two_loop_toy(2);
    let mut emb = plan(&inst, 1, 4);
    emb.b_out.set(0, 0, NULL_TOKEN, 2);
    let gen = Generator::new(&inst, &emb, 0);
    let (s, g) = gen.initialize_sf().unwrap();
    assert_eq!(s.agent_cell, vec![Cell::new(0, 1), Cell::new(0, 0)]);
    assert_eq!(s.agent_cargo, vec![NULL_TOKEN, NULL_TOKEN]);
    assert_eq!(g.can_change, vec![false, false]);
    assert_eq!(g.arrival, vec![None, None]);

    emb.b_out.set(0, 0, NULL_TOKEN, 4);
    let gen = Generator::new(&inst, &emb, 0);
    assert!(matches!(gen.initialize_sf(), Err(TplanError::Capacity { road: 0, needed: 4, len: 3 })));
}

#[test]
fn junction_crossing_then_head_wait_then_drift() {
    let inst = fixtures::two_loop_toy(1);
    let mut emb = plan(&inst, 1, 6);
    emb.b_out.set(0, 0, NULL_TOKEN, 1);
    emb.b_in.set(1, 0, NULL_TOKEN, 1);
    let gen = Generator::new(&inst, &emb, 3);
    let (mut s, mut g) = gen.initialize_sf().unwrap();
    let mut cells = Vec::new();
    for _ in 0..6 {
        s = gen.step(&s, &mut g).unwrap().0;
        cells.push(s.agent_cell[0]);
        if s.t == 2 {
            assert!(g.can_change[0]);
            assert_eq!(g.arrival[0], Some(0));
            assert_eq!(g.slab(0).unwrap().b_in[(inst.num_tokens() + 1) + NULL_TOKEN], 0);
        }
    }
    let expect = [(1, 1), (2, 1), (2, 2), (1, 2), (1, 2), (1, 2)].map(|(x, y)| Cell::new(x, y));
    assert_eq!(cells, expect);
    // Epoch 1 repeats the slab of epoch 0, which has no departures from road 1.
    assert!(matches!(gen.step(&s, &mut g), Err(TplanError::PlanDrift { t: 6, agent: 0, .. })));
}

#[test]
fn unmet_demand_is_reported_at_rollover() {
    let inst = fixtures::two_loop_toy(1);
    let mut emb = plan(&inst, 1, 4);
    emb.b_in.set(1, 0, NULL_TOKEN, 1);
    let gen = Generator::new(&inst, &emb, 0);
    let (mut s, mut g) = gen.initialize_sf().unwrap();
    for _ in 0..4 {
        s = gen.step(&s, &mut g).unwrap().0;
    }
    // Epoch 0 is retired when epoch 2 opens.
    for _ in 0..4 {
        s = gen.step(&s, &mut g).unwrap().0;
    }
    assert!(matches!(gen.step(&s, &mut g), Err(TplanError::UnmetDemand { epoch: 0, .. })));
}

/// Single road-length-5 self loop on junction cell 0, cells 1..=5.
fn ring_topology() -> Topology {
    Topology::new(6, 6, vec![TopoRoad { path: (1..=5).collect(), from: 0, to: 0 }], vec![0])
}

struct StayPut;

impl MovePolicy for StayPut {
    fn wants_to_leave(&mut self, _: usize, _: usize) -> Result<bool, TplanError> {
        Ok(false)
    }
    fn exit_options(&mut self, _: usize, _: usize) -> Result<Vec<usize>, TplanError> {
        Ok(vec![0])
    }
    fn pick(&mut self, options: &[usize]) -> usize {
        options[0]
    }
}

fn advance(topo: &Topology, pos: &[usize]) -> Vec<usize> {
    let mut occ = vec![None; topo.num_cells()];
    for (a, &c) in pos.iter().enumerate() {
        occ[c] = Some(a);
    }
    resolve_moves(topo, &occ, pos, &mut StayPut).unwrap().next
}

#[test]
fn free_road_agents_all_advance() {
    let topo = ring_topology();
    assert_eq!(advance(&topo, &[1, 2]), vec![2, 3]);
}

#[test]
fn queue_compacts_behind_a_waiting_head() {
    let topo = ring_topology();
    let mut pos = vec![1, 2, 4];
    let mut seen = vec![pos.clone()];
    for _ in 0..4 {
        pos = advance(&topo, &pos);
        seen.push(pos.clone());
    }
    assert_eq!(seen[1], vec![2, 3, 5]);
    assert_eq!(seen[2], vec![3, 4, 5]);
    assert_eq!(seen[3], vec![3, 4, 5]);
    assert_eq!(seen[4], vec![3, 4, 5]);
}

#[test]
fn full_road_with_waiting_head_stays() {
    let topo = ring_topology();
    assert_eq!(advance(&topo, &[1, 2, 3, 4, 5]), vec![1, 2, 3, 4, 5]);
}

/// Source output on (1,2) and sink input on (2,2), both on the second loop.
fn shared_road() -> SfeInstance {
    common::one_stage(&common::LOOPS, [1, 2], [2, 2], 1, 1, 1)
}

#[test]
fn deposit_then_no_second_change_on_the_same_road() {
    let inst = shared_road();
    let (src, snk) = (0, 1);
    let mut emb = plan(&inst, 1, 6);
    emb.b_out.set(0, 0, PART, 1);
    emb.b_in.set(1, 0, PART, 1);
    emb.deposit.set(snk, 0, PART - 1, 1);
    emb.pickup.set(src, 0, PART - 1, 1);
    let gen = Generator::new(&inst, &emb, 0);
    let (states, events, g) = run(&gen, 4);
    assert_eq!(states[0].input_buf[snk][PART], 1);
    assert_eq!(states[3].agent_cell[0], Cell::new(2, 2));
    assert_eq!(events[2].deposits, vec![(0, snk, PART)]);
    assert_eq!(states[3].agent_cargo[0], NULL_TOKEN);
    assert_eq!(states[3].input_buf[snk][PART], 2);
    assert_eq!(g.slab(0).unwrap().dp[snk * 2 + PART], 0);
    // On the output cell next step, but the cargo already changed on this road.
    assert_eq!(states[4].agent_cell[0], Cell::new(1, 2));
    assert!(events[3].pickups.is_empty());
    assert_eq!(states[4].agent_cargo[0], NULL_TOKEN);
}

#[test]
fn deposit_matches_the_arrival_epoch_only() {
    let inst = shared_road();
    let snk = 1;
    let mut emb = plan(&inst, 2, 6);
    emb.b_out.set(0, 0, PART, 1);
    emb.b_in.set(1, 0, PART, 1);
    emb.deposit.set(snk, 1, PART - 1, 1);
    let gen = Generator::new(&inst, &emb, 0);
    let (states, events, _) = run(&gen, 3);
    assert_eq!(states[3].agent_cell[0], Cell::new(2, 2));
    assert!(events[2].deposits.is_empty());
    assert_eq!(states[3].agent_cargo[0], PART);
}

fn two_output_instance() -> SfeInstance {
    let one = |pairs: &[&str]| pairs.iter().map(|k| (k.to_string(), 1u32)).collect();
    InstanceDoc {
        tokens: vec!["a".into(), "b".into()],
        processes: vec![
            ProcessDoc { id: "make".into(), inputs: one(&[]), outputs: one(&["a", "b"]), output: false },
            ProcessDoc { id: "ship".into(), inputs: one(&["a", "b"]), outputs: one(&[]), output: true },
        ],
        machines: vec![
            MachineDoc { id: "src".into(), supported: one(&["make"]), input_cell: None, output_cell: Some([0, 0]) },
            MachineDoc { id: "snk".into(), supported: one(&["ship"]), input_cell: Some([2, 2]), output_cell: None },
        ],
        agents: 1,
        grid: common::LOOPS.map(String::from).to_vec(),
    }
    .into_instance(ValidationOptions::default())
    .unwrap()
}

fn picked(pk_a: u32, pk_b: u32, seed: u64) -> Vec<(usize, usize, usize)> {
    let inst = two_output_instance();
    let mut emb = plan(&inst, 1, 6);
    emb.b_out.set(1, 0, NULL_TOKEN, 1);
    emb.b_in.set(0, 0, NULL_TOKEN, 1);
    emb.pickup.set(0, 0, 0, pk_a);
    emb.pickup.set(0, 0, 1, pk_b);
    let gen = Generator::new(&inst, &emb, seed);
    let (states, events, _) = run(&gen, 3);
    assert_eq!(states[3].agent_cell[0], Cell::new(0, 0));
    events[2].pickups.clone()
}

#[test]
fn pickup_prefers_larger_residual_then_smaller_token() {
    assert_eq!(picked(2, 2, 0), vec![(0, 0, 1)]);
    assert_eq!(picked(1, 2, 0), vec![(0, 0, 2)]);
    assert_eq!(picked(3, 1, 0), vec![(0, 0, 1)]);
    for seed in 1..5 {
        assert_eq!(picked(2, 2, seed), picked(2, 2, 0));
    }
}

#[test]
fn buffers_are_seeded_with_one_cycle() {
    let inst = common::one_stage(&common::LOOPS, [0, 0], [2, 2], 2, 1, 1);
    let (src, snk) = (0, 1);
    let mut emb = plan(&inst, 2, 10);
    let rate = Rational64::new(1, 10);
    emb.assign[snk][1] = true;
    emb.rate[snk][1] = rate;
    let per_cycle = rate * Rational64::from_integer(2 * 20);
    assert_eq!(per_cycle, Rational64::from_integer(4));
    emb.deposit.set(snk, 0, PART - 1, 2);
    emb.deposit.set(snk, 1, PART - 1, 2);
    emb.pickup.set(src, 1, PART - 1, 3);
    let gen = Generator::new(&inst, &emb, 0);
    let (s, _) = gen.initialize_sf().unwrap();
    assert_eq!(s.input_buf[snk][PART], 4);
    assert_eq!(s.output_buf[src][PART], 3);
    assert_eq!(s.input_buf[src][PART], 0);
}

#[test]
fn solved_plan_drains_residuals_each_epoch() {
    let inst = fixtures::example_factory(30);
    let emb = sfe_core::milp::solve_ts_milp(
        &inst,
        HyperParams::new(4, 6),
        &mut sfe_core::milp::HighsBackend::default(),
        std::time::Duration::from_secs(30),
    )
    .unwrap()
    .unwrap();
    let k1 = inst.num_tokens() + 1;
    let l = emb.hyper.epoch_len;
    for seed in [0, 9] {
        let gen = Generator::new(&inst, &emb, seed);
        let (mut s, mut g) = gen.initialize_sf().unwrap();
        for _ in 0..3 * emb.hyper.cycle_len() {
            s = gen.step(&s, &mut g).unwrap().0;
            let cur = g.cur.as_ref().unwrap();
            let e = (cur.epoch % emb.hyper.num_epochs as u64) as usize;
            for r in 0..inst.num_roads() {
                for tok in 0..k1 {
                    assert!(cur.b_in[r * k1 + tok] <= emb.b_in.get(r, e, tok));
                    assert!(cur.b_out[r * k1 + tok] <= emb.b_out.get(r, e, tok));
                }
            }
            if s.t % l == 0 {
                // The slab is rolled over on the next step; its departures are done.
                let ended = g.cur.as_ref().unwrap();
                assert!(ended.b_out.iter().all(|&x| x == 0), "t={}", s.t);
            }
        }
    }
}

#[test]
fn fixed_seed_runs_are_identical() {
    let inst = fixtures::example_factory(30);
    let emb = sfe_core::milp::solve_ts_milp(
        &inst,
        HyperParams::new(4, 6),
        &mut sfe_core::milp::HighsBackend::default(),
        std::time::Duration::from_secs(30),
    )
    .unwrap()
    .unwrap();
    let gen = Generator::new(&inst, &emb, 5);
    let (a, ea, _) = run(&gen, 60);
    let (b, eb, _) = run(&gen, 60);
    assert_eq!(a, b);
    assert_eq!(ea, eb);
}

#[test]
fn junction_bound_example() {
    // Entry roads carry 3 crossing agents; exit road 0 has length 5 and takes 2.
    let load = common::junction::JunctionLoad { entries: vec![(3, 2), (2, 1)], exits: vec![(5, 2, 0), (2, 1, 1)] };
    assert_eq!(load.bound(0), 7);
    for seed in 0..20 {
        let worst = common::junction::settle_times(&load, ChaCha8Rng::seed_from_u64(seed));
        assert!(worst[0] <= 7 && worst[1] <= load.bound(1), "seed {seed}: {worst:?}");
    }
}
