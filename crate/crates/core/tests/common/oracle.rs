//! Exhaustive search over integer flow tensors for tiny instances.
//!
//! Walks epochs forward: agents leaving roads at epoch T are split over the
//! exit roads of their junction, then every admissible deposit/pickup choice
//! gives the departures of epoch T+1. A cycle closes when the departures after
//! epoch N-1 equal the chosen departures of epoch 0. Rates follow from the
//! pickup/deposit totals, so no continuous variable is enumerated.

use num_rational::Rational64;
use sfe_core::model::SfeInstance;

struct Ctx<'a> {
    inst: &'a SfeInstance,
    n: usize,
    l: usize,
    k: usize,
    /// Road of each machine's input / output cell.
    in_road: Vec<Option<usize>>,
    out_road: Vec<Option<usize>>,
    best: Option<Rational64>,
    /// Per machine, per epoch: (deposits, pickups) indexed by token.
    dp: Vec<Vec<Vec<i64>>>,
    pk: Vec<Vec<Vec<i64>>>,
}

/// Optimal objective over all integer plans with `n` epochs of length `l`.
/// Returns `None` only if nothing is feasible (the idle plan always is).
pub fn brute_force_optimum(inst: &SfeInstance, n: usize, l: usize) -> Option<Rational64> {
    let road_of = |c: Option<sfe_core::model::Cell>| c.and_then(|c| inst.traffic.road_at(c)).map(|(r, _)| r);
    let mut ctx = Ctx {
        inst,
        n,
        l,
        k: inst.num_tokens(),
        in_road: inst.machines.iter().map(|m| road_of(m.input_cell)).collect(),
        out_road: inst.machines.iter().map(|m| road_of(m.output_cell)).collect(),
        best: None,
        dp: vec![vec![Vec::new(); n]; inst.num_machines()],
        pk: vec![vec![Vec::new(); n]; inst.num_machines()],
    };
    let slots = inst.num_roads() * (ctx.k + 1);
    let mut start = vec![0i64; slots];
    for agents in 0..=inst.agents {
        place(&mut start, 0, agents as i64, &mut |s| {
            let s = s.to_vec();
            epoch(&mut ctx, &s, &s, 0);
        });
    }
    ctx.best
}

/// Calls `f` for every way to put `left` indistinguishable agents in `v[from..]`.
fn place(v: &mut [i64], from: usize, left: i64, f: &mut dyn FnMut(&[i64])) {
    if from + 1 == v.len() {
        v[from] = left;
        f(v);
        v[from] = 0;
        return;
    }
    for here in 0..=left {
        v[from] = here;
        place(v, from + 1, left - here, f);
    }
    v[from] = 0;
}

fn idx(k: usize, r: usize, tok: usize) -> usize {
    r * (k + 1) + tok
}

fn epoch(ctx: &mut Ctx, start: &[i64], b_out: &[i64], t: usize) {
    if t == ctx.n {
        if b_out == start {
            score(ctx);
        }
        return;
    }
    // Split each junction's inbound agents of each token over its exit roads.
    let mut groups = Vec::new();
    for j in &ctx.inst.traffic.junctions {
        for tok in 0..=ctx.k {
            let total: i64 = j.entry_roads.iter().map(|&r| b_out[idx(ctx.k, r, tok)]).sum();
            groups.push((j.exit_roads.clone(), tok, total));
        }
    }
    let mut b_in = vec![0i64; b_out.len()];
    split(ctx, start, b_out, &mut b_in, &groups, 0, t);
}

fn split(
    ctx: &mut Ctx,
    start: &[i64],
    b_out: &[i64],
    b_in: &mut Vec<i64>,
    groups: &[(Vec<usize>, usize, i64)],
    g: usize,
    t: usize,
) {
    if g == groups.len() {
        if fits(ctx, b_out, b_in) {
            let b_in = b_in.clone();
            exchange(ctx, start, &b_in, b_in.clone(), 0, t);
        }
        return;
    }
    let (exits, tok, total) = &groups[g];
    let k = ctx.k;
    let mut share = vec![0i64; exits.len()];
    let mut options = Vec::new();
    place(&mut share, 0, *total, &mut |s| options.push(s.to_vec()));
    for s in options {
        for (&r, &c) in exits.iter().zip(&s) {
            b_in[idx(k, r, *tok)] += c;
        }
        split(ctx, start, b_out, b_in, groups, g + 1, t);
        for (&r, &c) in exits.iter().zip(&s) {
            b_in[idx(k, r, *tok)] -= c;
        }
    }
}

/// Road capacity and the junction timing bound for one epoch.
fn fits(ctx: &Ctx, b_out: &[i64], b_in: &[i64]) -> bool {
    let k = ctx.k;
    let total = |v: &[i64], r: usize| -> i64 { (0..=k).map(|tok| v[idx(k, r, tok)]).sum() };
    for r in &ctx.inst.traffic.roads {
        if total(b_in, r.id) + total(b_out, r.id) > r.len() as i64 {
            return false;
        }
    }
    for j in &ctx.inst.traffic.junctions {
        let waiting: i64 = j.entry_roads.iter().map(|&r| total(b_out, r)).sum();
        for &rj in &j.exit_roads {
            let len = ctx.inst.traffic.roads[rj].len() as i64;
            if waiting + len - total(b_in, rj) + 1 > ctx.l as i64 {
                return false;
            }
        }
    }
    true
}

/// Chooses deposits then pickups machine by machine, updating `next` in place.
fn exchange(ctx: &mut Ctx, start: &[i64], b_in: &[i64], next: Vec<i64>, m: usize, t: usize) {
    let k = ctx.k;
    let num_m = ctx.inst.num_machines();
    if m == num_m {
        epoch(ctx, start, &next, t + 1);
        return;
    }
    let mut dps = vec![vec![0i64; k + 1]];
    if let Some(r) = ctx.in_road[m] {
        for tok in 1..=k {
            // Deposits of a token are capped by the agents entering with it,
            // shared with earlier machines on the same road.
            let already: i64 = (0..m)
                .filter(|&o| ctx.in_road[o] == Some(r))
                .map(|o| ctx.dp[o][t][tok])
                .sum();
            let cap = (b_in[idx(k, r, tok)] - already).max(0);
            dps = dps
                .into_iter()
                .flat_map(|d| {
                    (0..=cap).map(move |c| {
                        let mut d = d.clone();
                        d[tok] = c;
                        d
                    })
                })
                .collect();
        }
    }
    for d in dps {
        let mut after_dp = next.clone();
        if let Some(r) = ctx.in_road[m] {
            let moved: i64 = d.iter().sum();
            for tok in 1..=k {
                after_dp[idx(k, r, tok)] -= d[tok];
            }
            after_dp[idx(k, r, 0)] += moved;
        }
        ctx.dp[m][t] = d.clone();
        let mut pks = Vec::new();
        if let Some(r) = ctx.out_road[m] {
            let already: i64 = (0..m)
                .filter(|&o| ctx.out_road[o] == Some(r))
                .map(|o| ctx.pk[o][t].iter().sum::<i64>())
                .sum();
            let cap = (b_in[idx(k, r, 0)] - already).max(0);
            let mut share = vec![0i64; k + 1];
            for total in 0..=cap {
                place(&mut share[1..], 0, total, &mut |s| {
                    let mut p = vec![0i64; k + 1];
                    p[1..].copy_from_slice(s);
                    pks.push(p);
                });
            }
        } else {
            pks.push(vec![0i64; k + 1]);
        }
        for p in pks {
            let mut after = after_dp.clone();
            if let Some(r) = ctx.out_road[m] {
                let taken: i64 = p.iter().sum();
                for tok in 1..=k {
                    after[idx(k, r, tok)] += p[tok];
                }
                after[idx(k, r, 0)] -= taken;
            }
            ctx.pk[m][t] = p;
            exchange(ctx, start, b_in, after, m + 1, t);
        }
        ctx.pk[m][t] = vec![0; k + 1];
    }
    ctx.dp[m][t] = vec![0; k + 1];
}

/// Best objective reachable with the current pickup/deposit totals, if any
/// process assignment realises them.
fn score(ctx: &mut Ctx) {
    let k = ctx.k;
    let cycle = (ctx.n * ctx.l) as i64;
    let proc = &ctx.inst.procedure;
    let p_out = proc.output_process();
    let mut objective = Rational64::from_integer(0);
    for (m, spec) in ctx.inst.machines.iter().enumerate() {
        let pk: Vec<i64> = (0..=k).map(|tok| (0..ctx.n).map(|t| ctx.pk[m][t].get(tok).copied().unwrap_or(0)).sum()).collect();
        let dp: Vec<i64> = (0..=k).map(|tok| (0..ctx.n).map(|t| ctx.dp[m][t].get(tok).copied().unwrap_or(0)).sum()).collect();
        let idle = pk.iter().chain(&dp).all(|&v| v == 0);
        let mut best_here: Option<Rational64> = idle.then(|| Rational64::from_integer(0));
        for (&p, &runtime) in &spec.supported {
            let process = &proc.processes[p];
            let mut rate: Option<Rational64> = None;
            let mut ok = true;
            for tok in 1..=k {
                for (have, per_run) in [(pk[tok], process.num_out(tok)), (dp[tok], process.num_in(tok))] {
                    if per_run == 0 {
                        ok &= have == 0;
                        continue;
                    }
                    let r = Rational64::new(have, per_run as i64 * cycle);
                    ok &= rate.is_none_or(|x| x == r);
                    rate = Some(r);
                }
            }
            let rate = rate.unwrap_or_default();
            if !ok || rate > Rational64::new(1, runtime as i64) {
                continue;
            }
            let gain = if p == p_out { rate } else { Rational64::from_integer(0) };
            best_here = Some(best_here.map_or(gain, |b| b.max(gain)));
        }
        match best_here {
            Some(g) => objective += g,
            None => return,
        }
    }
    if ctx.best.is_none_or(|b| objective > b) {
        ctx.best = Some(objective);
    }
}
