use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sfe_core::milp::{check_embedding, HighsOptions, TrafficSystemEmbedding};
use sfe_core::model::ModelError;
use sfe_core::scenario::{generate, Family, ScenarioSpec};
use sfe_core::search::{ts_planner, Budget, HighsSolver, SearchConfig};
use sfe_core::sim::{run_simulation, run_simulation_traced};
use sfe_core::SfeInstance;

const EXIT_INVALID: u8 = 1;
const EXIT_NO_SOLUTION: u8 = 3;

#[derive(Parser)]
#[command(name = "sfe", version, about = "Embed manufacturing procedures into grid smart factories")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate an instance file.
    Validate { path: PathBuf },
    /// Run the anytime planner and write the best embedding.
    Solve(SolveArgs),
    /// Run the timestep generator on an embedding and check every step.
    Simulate {
        instance: PathBuf,
        embedding: PathBuf,
        #[arg(long, default_value_t = 3)]
        cycles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON lines, one per timestep.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate, solve and simulate scenarios; prints a results table.
    Bench {
        #[arg(long, default_value = "grid-mesh")]
        family: Family,
        #[arg(long, default_value_t = 8)]
        machines: usize,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Seconds per solve.
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a generated scenario instance.
    Generate {
        #[arg(long, default_value = "grid-mesh")]
        family: Family,
        #[arg(long, default_value_t = 8)]
        machines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        processes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SolveArgs {
    path: PathBuf,
    /// Wall-clock seconds for the whole search.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    #[arg(long, default_value_t = 2)]
    gamma: usize,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Overrides the agent count of the instance.
    #[arg(long)]
    max_agents: Option<usize>,
    /// Solver random seed.
    #[arg(long, default_value_t = 0)]
    seed: i32,
    #[arg(long)]
    max_n: Option<usize>,
    /// Upper bound in seconds on a single solve.
    #[arg(long)]
    slice: Option<f64>,
    /// Embedding output; the search trace goes next to it as `.trace.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat an objective of zero as no solution.
    #[arg(long)]
    require_positive: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SFE_LOG", "warn")).init();
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Validate { path } => validate(&path),
        Cmd::Solve(args) => solve(args),
        Cmd::Simulate { instance, embedding, cycles, seed, trace } => simulate(&instance, &embedding, cycles, seed, trace),
        Cmd::Bench { family, machines, seeds, budget, csv } => bench(family, machines, seeds, budget, csv),
        Cmd::Generate { family, machines, seed, processes, out } => generate_cmd(family, machines, seed, processes, out),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<std::result::Result<SfeInstance, ModelError>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match SfeInstance::from_json(&text) {
        Err(ModelError::Parse(e)) => anyhow::bail!("{}: {e}", path.display()),
        other => Ok(other),
    }
}

fn load_valid(path: &Path) -> Result<SfeInstance> {
    load(path)?.with_context(|| format!("{} is not a valid instance", path.display()))
}

fn validate(path: &Path) -> Result<ExitCode> {
    match load(path)? {
        Ok(_) => Ok(ExitCode::SUCCESS),
        Err(e) => {
            for v in e.violations() {
                println!("{v}");
            }
            Ok(ExitCode::from(EXIT_INVALID))
        }
    }
}

fn secs(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).context("durations must be finite and nonnegative")
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let mut inst = load_valid(&a.path)?;
    if let Some(n) = a.max_agents {
        inst = inst.with_agents(n);
    }
    let config = SearchConfig {
        budget: Budget::WallClock(secs(a.budget)?),
        gamma: a.gamma,
        delta: a.delta,
        max_n: a.max_n,
        n_patience: None,
        solve_slice: a.slice.map(secs).transpose()?,
        target: None,
    };
    config.validate()?;
    let mut solver = HighsSolver { options: HighsOptions { random_seed: a.seed, ..HighsOptions::default() } };
    let res = ts_planner(&inst, &config, &mut solver);
    if let Some(out) = &a.out {
        let mut trace_path = out.clone().into_os_string();
        trace_path.push(".trace.jsonl");
        let mut w = BufWriter::new(fs::File::create(&trace_path).context("creating trace file")?);
        res.write_trace(&mut w)?;
        w.flush()?;
    }
    let Some(best) = res.best.as_ref().filter(|e| !a.require_positive || e.objective_value() > 0.0) else {
        eprintln!("no feasible solution within {}s ({} solves)", a.budget, res.trace.len());
        return Ok(ExitCode::from(EXIT_NO_SOLUTION));
    };
    if let Some(out) = &a.out {
        fs::write(out, best.to_json(&inst))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    println!("N* = {}", best.hyper.num_epochs);
    println!("L* = {}", best.hyper.epoch_len);
    println!("objective = {} ({:.6})", best.objective, best.objective_value());
    println!("agents = {}", best.agents_used());
    Ok(ExitCode::SUCCESS)
}

fn simulate(instance: &Path, embedding: &Path, cycles: usize, seed: u64, trace: Option<PathBuf>) -> Result<ExitCode> {
    let inst = load_valid(instance)?;
    let text = fs::read_to_string(embedding).with_context(|| format!("reading {}", embedding.display()))?;
    let emb = TrafficSystemEmbedding::from_json(&inst, &text)?;
    let broken = check_embedding(&inst, &emb);
    if !broken.is_empty() {
        eprintln!("embedding violates {} constraint(s):", broken.len());
        for v in &broken {
            eprintln!("  {v}");
        }
        return Ok(ExitCode::from(EXIT_INVALID));
    }
    let report = match trace {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?);
            let r = run_simulation_traced(&inst, &emb, cycles, seed, Some(&mut w));
            w.flush()?;
            r
        }
        None => run_simulation(&inst, &emb, cycles, seed),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.measured_throughput.is_none() {
        eprintln!("throughput unavailable: only the warm-up cycle was simulated");
    }
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INVALID) })
}

struct Row {
    family: Family,
    machines: usize,
    seed: u64,
    objective: Option<f64>,
    n: Option<usize>,
    l: Option<usize>,
    solve_s: f64,
    step_ms: Option<f64>,
    agents: Option<u32>,
}

const HEADER: [&str; 9] = ["family", "machines", "seed", "objective", "N", "L", "solve_s", "step_ms", "agents"];

impl Row {
    fn cells(&self) -> [String; 9] {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        [
            self.family.to_string(),
            self.machines.to_string(),
            self.seed.to_string(),
            opt(self.objective.map(|o| format!("{o:.6}"))),
            opt(self.n.map(|v| v.to_string())),
            opt(self.l.map(|v| v.to_string())),
            format!("{:.2}", self.solve_s),
            opt(self.step_ms.map(|v| format!("{v:.4}"))),
            opt(self.agents.map(|v| v.to_string())),
        ]
    }
}

fn bench(family: Family, machines: usize, seeds: u64, budget: f64, csv: Option<PathBuf>) -> Result<ExitCode> {
    let config = SearchConfig { budget: Budget::WallClock(secs(budget)?), ..SearchConfig::default() };
    let mut rows = Vec::new();
    for seed in 0..seeds {
        let inst = generate(&ScenarioSpec::new(family, machines, seed))?;
        let started = Instant::now();
        let res = ts_planner(&inst, &config, &mut HighsSolver::default());
        let solve_s = started.elapsed().as_secs_f64();
        let sim = res.best.as_ref().map(|e| run_simulation(&inst, e, 3, seed));
        log::info!("{family} {machines} seed {seed}: {:?}", res.objective());
        rows.push(Row {
            family,
            machines,
            seed,
            objective: res.objective(),
            n: res.best_n,
            l: res.best_l,
            solve_s,
            step_ms: sim.as_ref().map(|s| s.mean_step_wall_time_ms),
            agents: res.best.as_ref().map(|e| e.agents_used()),
        });
    }
    let table: Vec<[String; 9]> = rows.iter().map(Row::cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &table {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let header = HEADER.map(String::from);
    for r in std::iter::once(&header).chain(&table) {
        let line: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(text, "{}", line.join("  "))?;
    }
    print!("{text}");
    if let Some(path) = csv {
        let mut out = String::new();
        writeln!(out, "{}", HEADER.join(","))?;
        for r in &table {
            writeln!(out, "{}", r.join(","))?;
        }
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn generate_cmd(family: Family, machines: usize, seed: u64, processes: Option<usize>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut spec = ScenarioSpec::new(family, machines, seed);
    if let Some(p) = processes {
        spec.process_count = p;
    }
    let json = generate(&spec)?.to_json();
    match out {
        Some(p) => fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
