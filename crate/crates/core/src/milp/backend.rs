//! Solver-independent linear program interface and the HiGHS adapter.

use std::time::Duration;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleIncumbent,
    Infeasible,
    NoIncumbentAtDeadline,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Incumbent objective, when one exists.
    pub objective: Option<f64>,
    /// Variable values indexed by `VarId`, empty without an incumbent.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("solver backend failure: {0}")]
pub struct BackendError(pub String);

/// A maximisation MILP under construction.
pub trait LpBackend {
    fn add_var(&mut self, kind: VarKind, lo: f64, hi: f64) -> VarId;
    fn add_row(&mut self, terms: &[(VarId, f64)], cmp: Cmp, rhs: f64);
    /// Replaces the objective (maximised).
    fn set_objective(&mut self, terms: &[(VarId, f64)]);
    fn set_deadline(&mut self, deadline: Duration);
    fn num_vars(&self) -> usize;
    fn num_rows(&self) -> usize;
    fn solve(&mut self) -> Result<SolveOutcome, BackendError>;
}

#[derive(Debug, Clone)]
pub struct HighsOptions {
    pub mip_rel_gap: f64,
    pub threads: u32,
    pub random_seed: i32,
    /// Branch-and-bound node cap, for reproducible runs that never hit the clock.
    pub mip_max_nodes: Option<i64>,
    pub verbose: bool,
}

impl Default for HighsOptions {
    fn default() -> Self {
        HighsOptions { mip_rel_gap: 1e-6, threads: 1, random_seed: 0, mip_max_nodes: None, verbose: false }
    }
}

struct Column {
    kind: VarKind,
    lo: f64,
    hi: f64,
    cost: f64,
}

/// Buffers the model and hands it to HiGHS on `solve`.
pub struct HighsBackend {
    cols: Vec<Column>,
    rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
    deadline: Option<Duration>,
    opts: HighsOptions,
}

impl HighsBackend {
    pub fn new(opts: HighsOptions) -> Self {
        HighsBackend { cols: Vec::new(), rows: Vec::new(), deadline: None, opts }
    }
}

impl Default for HighsBackend {
    fn default() -> Self {
        Self::new(HighsOptions::default())
    }
}

impl LpBackend for HighsBackend {
    fn add_var(&mut self, kind: VarKind, lo: f64, hi: f64) -> VarId {
        let (lo, hi) = match kind {
            VarKind::Binary => (lo.max(0.0), hi.min(1.0)),
            _ => (lo, hi),
        };
        self.cols.push(Column { kind, lo, hi, cost: 0.0 });
        VarId(self.cols.len() - 1)
    }

    fn add_row(&mut self, terms: &[(VarId, f64)], cmp: Cmp, rhs: f64) {
        self.rows.push((terms.iter().map(|&(v, c)| (v.0, c)).collect(), cmp, rhs));
    }

    fn set_objective(&mut self, terms: &[(VarId, f64)]) {
        for c in &mut self.cols {
            c.cost = 0.0;
        }
        for &(v, c) in terms {
            self.cols[v.0].cost += c;
        }
    }

    fn set_deadline(&mut self, deadline: Duration) {
        self.deadline = Some(deadline);
    }

    fn num_vars(&self) -> usize {
        self.cols.len()
    }

    fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn solve(&mut self) -> Result<SolveOutcome, BackendError> {
        let no_incumbent =
            SolveOutcome { status: SolveStatus::NoIncumbentAtDeadline, objective: None, values: Vec::new() };
        if self.deadline == Some(Duration::ZERO) {
            return Ok(no_incumbent);
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = self
            .cols
            .iter()
            .map(|c| match c.kind {
                VarKind::Continuous => pb.add_column(c.cost, c.lo..=c.hi),
                _ => pb.add_integer_column(c.cost, c.lo..=c.hi),
            })
            .collect();
        for (terms, cmp, rhs) in &self.rows {
            let terms: Vec<_> = terms.iter().map(|&(i, c)| (cols[i], c)).collect();
            match cmp {
                Cmp::Le => pb.add_row(..=*rhs, &terms),
                Cmp::Ge => pb.add_row(*rhs.., &terms),
                Cmp::Eq => pb.add_row(*rhs..=*rhs, &terms),
            }
        }
        let mut model = pb.optimise(Sense::Maximise);
        if self.opts.verbose {
            model.set_option("output_flag", true);
            model.set_option("log_to_console", true);
        } else {
            model.make_quiet();
        }
        model.set_option("threads", self.opts.threads as i32);
        model.set_option("mip_rel_gap", self.opts.mip_rel_gap);
        model.set_option("random_seed", self.opts.random_seed);
        if let Some(n) = self.opts.mip_max_nodes {
            model.set_option("mip_max_nodes", n as i32);
        }
        if let Some(d) = self.deadline {
            model.set_option("time_limit", d.as_secs_f64().max(1e-3));
        }
        let solved = model
            .try_solve()
            .map_err(|s| BackendError(format!("HiGHS run failed: {s:?}")))?;
        let status = solved.status();
        let has_incumbent = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match status {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget
            | HighsModelStatus::Unknown => {
                if has_incumbent {
                    SolveStatus::FeasibleIncumbent
                } else {
                    return Ok(no_incumbent);
                }
            }
            other => return Err(BackendError(format!("HiGHS model status {other:?}"))),
        };
        if status == SolveStatus::Infeasible {
            return Ok(SolveOutcome { status, objective: None, values: Vec::new() });
        }
        let values = solved.get_solution().columns().to_vec();
        let objective = if self.cols.is_empty() {
            0.0
        } else {
            values.iter().zip(&self.cols).map(|(v, c)| v * c.cost).sum()
        };
        Ok(SolveOutcome { status, objective: Some(objective), values })
    }
}
