//! Anytime search over the number of epochs `N` and the epoch length `L`.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::milp::{solve_ts_milp, HighsBackend, HighsOptions, HyperParams, MilpError, TrafficSystemEmbedding};
use crate::model::SfeInstance;

/// Improvement threshold for objective comparisons.
const IMPROVE_TOL: f64 = 1e-9;

/// Per-solve deadline in attempt-counted budgets when no slice is configured.
const DEFAULT_ATTEMPT_SLICE: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    WallClock(Duration),
    /// Number of MILP solves; makes traces reproducible with a deterministic solver.
    Attempts(usize),
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub budget: Budget,
    /// Consecutive non-improving `L` increments before moving to the next `N`.
    pub gamma: usize,
    /// `L` increment in timesteps.
    pub delta: usize,
    pub max_n: Option<usize>,
    /// Stop after this many consecutive non-improving `N` values.
    pub n_patience: Option<usize>,
    /// Upper bound on a single solve's deadline.
    pub solve_slice: Option<Duration>,
    /// Stop as soon as the incumbent reaches this objective.
    pub target: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: Budget::WallClock(Duration::from_secs(60)),
            gamma: 2,
            delta: 1,
            max_n: None,
            n_patience: None,
            solve_slice: None,
            target: None,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("invalid search configuration: {0}")]
pub struct ConfigError(pub &'static str);

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.gamma == 0 {
            return Err(ConfigError("gamma must be at least 1"));
        }
        if self.delta == 0 {
            return Err(ConfigError("delta must be at least 1"));
        }
        if self.max_n == Some(0) {
            return Err(ConfigError("max_n must be at least 1"));
        }
        Ok(())
    }
}

/// Something that solves the TS-MILP for fixed hyperparameters.
pub trait TsSolver {
    fn solve(
        &mut self,
        inst: &SfeInstance,
        hyper: HyperParams,
        deadline: Duration,
    ) -> Result<Option<TrafficSystemEmbedding>, MilpError>;
}

/// Fresh HiGHS backend per solve.
#[derive(Debug, Clone, Default)]
pub struct HighsSolver {
    pub options: HighsOptions,
}

impl TsSolver for HighsSolver {
    fn solve(
        &mut self,
        inst: &SfeInstance,
        hyper: HyperParams,
        deadline: Duration,
    ) -> Result<Option<TrafficSystemEmbedding>, MilpError> {
        let mut backend = HighsBackend::new(self.options.clone());
        solve_ts_milp(inst, hyper, &mut backend, deadline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved,
    NoSolution,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n: usize,
    pub l: usize,
    pub outcome: Outcome,
    pub objective: Option<f64>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Option<TrafficSystemEmbedding>,
    pub best_n: Option<usize>,
    pub best_l: Option<usize>,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    pub fn objective(&self) -> Option<f64> {
        self.best.as_ref().map(TrafficSystemEmbedding::objective_value)
    }

    pub fn write_trace(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for e in &self.trace {
            writeln!(out, "{}", serde_json::to_string(e).expect("trace entries serialize"))?;
        }
        Ok(())
    }
}

/// Shared budget across all solves of one search.
pub struct Clock {
    started: Instant,
    budget: Budget,
    attempts: usize,
    slice: Option<Duration>,
}

impl Clock {
    pub fn new(budget: Budget, slice: Option<Duration>) -> Self {
        Clock { started: Instant::now(), budget, attempts: 0, slice }
    }

    pub fn expired(&self) -> bool {
        match self.budget {
            Budget::WallClock(b) => self.started.elapsed() >= b,
            Budget::Attempts(n) => self.attempts >= n,
        }
    }

    fn next_deadline(&mut self) -> Duration {
        self.attempts += 1;
        match self.budget {
            Budget::WallClock(b) => {
                let left = b.saturating_sub(self.started.elapsed());
                self.slice.map_or(left, |s| s.min(left))
            }
            Budget::Attempts(_) => self.slice.unwrap_or(DEFAULT_ATTEMPT_SLICE),
        }
    }

    fn elapsed_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }
}

fn reached(config: &SearchConfig, e: &Option<TrafficSystemEmbedding>) -> bool {
    config.target.is_some_and(|t| score(e) >= t)
}

fn score(e: &Option<TrafficSystemEmbedding>) -> f64 {
    e.as_ref().map_or(f64::NEG_INFINITY, TrafficSystemEmbedding::objective_value)
}

fn improves(candidate: &Option<TrafficSystemEmbedding>, incumbent: &Option<TrafficSystemEmbedding>) -> bool {
    candidate.is_some() && score(candidate) > score(incumbent) + IMPROVE_TOL
}

/// Tries `L = max_len + delta, max_len + 2*delta, ...` for a fixed `N` until
/// `gamma` consecutive solves fail to improve or the budget runs out.
pub fn plan_for_num_epochs(
    inst: &SfeInstance,
    n: usize,
    clock: &mut Clock,
    config: &SearchConfig,
    solver: &mut dyn TsSolver,
    trace: &mut Vec<TraceEntry>,
) -> (Option<TrafficSystemEmbedding>, Option<usize>) {
    let mut best = None;
    let mut best_l = None;
    let mut l = inst.traffic.max_road_len() + config.delta;
    let mut fails = 0;
    while fails < config.gamma && !clock.expired() && !reached(config, &best) {
        let deadline = clock.next_deadline();
        let hyper = HyperParams::new(n, l);
        let (found, outcome) = match solver.solve(inst, hyper, deadline) {
            Ok(Some(e)) => (Some(e), Outcome::Solved),
            Ok(None) => (None, Outcome::NoSolution),
            Err(e) => {
                log::warn!("solve N={n} L={l} failed: {e}");
                (None, Outcome::Error)
            }
        };
        trace.push(TraceEntry {
            n,
            l,
            outcome,
            objective: found.as_ref().map(TrafficSystemEmbedding::objective_value),
            elapsed_ms: clock.elapsed_ms(),
        });
        log::info!("N={n} L={l}: {outcome:?} {:?}", found.as_ref().map(|e| e.objective));
        if improves(&found, &best) {
            best = found;
            best_l = Some(l);
            fails = 0;
        } else {
            fails += 1;
        }
        l += config.delta;
    }
    (best, best_l)
}

/// Runs `plan_for_num_epochs` for `N = 1, 2, ...` and keeps the best plan.
pub fn ts_planner(inst: &SfeInstance, config: &SearchConfig, solver: &mut dyn TsSolver) -> SearchResult {
    let mut clock = Clock::new(config.budget, config.solve_slice);
    let mut result = SearchResult { best: None, best_n: None, best_l: None, trace: Vec::new() };
    let mut n = 1;
    let mut stale = 0;
    while !clock.expired() && config.max_n.is_none_or(|cap| n <= cap) && !reached(config, &result.best) {
        let (found, l) = plan_for_num_epochs(inst, n, &mut clock, config, solver, &mut result.trace);
        if improves(&found, &result.best) {
            result.best = found;
            result.best_n = Some(n);
            result.best_l = l;
            stale = 0;
        } else {
            stale += 1;
            if config.n_patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
        n += 1;
    }
    result
}
