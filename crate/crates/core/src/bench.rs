//! Benchmark harness: run every method on every test problem, collect one
//! [`RunRecord`] per cell, and turn the records into Dolan-Moré performance
//! profiles.
//!
//! With the `parallel` feature (on by default) suite cells run on a rayon
//! pool; without it, and whenever `parallelism == 1`, they run in order on
//! the calling thread. Record order is problem-major, method-minor in both
//! cases.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::problems::{ProblemError, SuiteEntry};
use crate::solver::{solve, Method, SolveStatus, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("records do not form a complete method x problem grid: {0}")]
    IncompleteGrid(String),
    #[error("invalid profile table: {0}")]
    InvalidProfile(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Outcome of one (problem, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub problem: String,
    pub n: usize,
    pub method: Method,
    pub status: SolveStatus,
    pub iterations: usize,
    pub fevals: usize,
    pub f_norm_initial: f64,
    pub f_norm_final: f64,
    pub wall_time_ms: f64,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Runs one cell on a fresh problem instance.
pub fn run_cell(entry: SuiteEntry, method: Method, cfg: &SolverConfig) -> Result<RunRecord, BenchError> {
    let mut problem = entry.instantiate()?;
    let started = Instant::now();
    let report = solve(&mut problem, method, cfg)?;
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(RunRecord {
        problem: entry.label(),
        n: entry.n,
        method,
        status: report.status,
        iterations: report.iterations,
        fevals: report.fevals,
        f_norm_initial: report.f_norm_initial,
        f_norm_final: report.f_norm_final,
        wall_time_ms,
    })
}

/// Runs every method on every problem. `parallelism == 0` uses all
/// available threads.
pub fn run_suite(
    methods: &[Method],
    problems: &[SuiteEntry],
    cfg: &SolverConfig,
    parallelism: usize,
) -> Result<Vec<RunRecord>, BenchError> {
    if methods.is_empty() {
        return Err(BenchError::InvalidSuite("no methods".into()));
    }
    if problems.is_empty() {
        return Err(BenchError::InvalidSuite("no problems".into()));
    }
    cfg.validate()?;
    for entry in problems {
        entry.instantiate()?;
    }
    let cells: Vec<(SuiteEntry, Method)> = problems
        .iter()
        .flat_map(|&entry| methods.iter().map(move |&m| (entry, m)))
        .collect();
    run_cells(&cells, cfg, parallelism)
}

#[cfg(feature = "parallel")]
fn run_cells(
    cells: &[(SuiteEntry, Method)],
    cfg: &SolverConfig,
    parallelism: usize,
) -> Result<Vec<RunRecord>, BenchError> {
    use rayon::prelude::*;

    if parallelism == 1 {
        return run_cells_sequential(cells, cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| BenchError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(entry, method)| run_cell(entry, method, cfg))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_cells(
    cells: &[(SuiteEntry, Method)],
    cfg: &SolverConfig,
    _parallelism: usize,
) -> Result<Vec<RunRecord>, BenchError> {
    run_cells_sequential(cells, cfg)
}

fn run_cells_sequential(cells: &[(SuiteEntry, Method)], cfg: &SolverConfig) -> Result<Vec<RunRecord>, BenchError> {
    cells
        .iter()
        .map(|&(entry, method)| run_cell(entry, method, cfg))
        .collect()
}

/// Cost measure used for a performance profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMetric {
    Iterations,
    Fevals,
}

impl ProfileMetric {
    fn cost(self, record: &RunRecord) -> f64 {
        // Counts are floored at one so a zero-iteration solve still yields a
        // finite ratio.
        let raw = match self {
            ProfileMetric::Iterations => record.iterations,
            ProfileMetric::Fevals => record.fevals,
        };
        raw.max(1) as f64
    }
}

/// Fraction of problems each method solves within a factor `τ` of the best.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    taus: Vec<f64>,
    methods: Vec<String>,
    /// `values[s][t]` is `ρ_s(taus[t])`.
    values: Vec<Vec<f64>>,
}

impl ProfileTable {
    pub fn new(taus: Vec<f64>, methods: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, BenchError> {
        if taus.is_empty() {
            return Err(BenchError::InvalidProfile("empty tau grid".into()));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t >= 1.0)) {
            return Err(BenchError::InvalidProfile("tau values must be finite and >= 1".into()));
        }
        if taus.windows(2).any(|w| w[0] > w[1]) {
            return Err(BenchError::InvalidProfile("tau grid must be sorted".into()));
        }
        if methods.len() != values.len() {
            return Err(BenchError::InvalidProfile("one value row per method required".into()));
        }
        for (name, row) in methods.iter().zip(&values) {
            if row.len() != taus.len() {
                return Err(BenchError::InvalidProfile(format!("{name}: row length mismatch")));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(BenchError::InvalidProfile(format!("{name}: value outside [0, 1]")));
            }
            if row.windows(2).any(|w| w[0] > w[1]) {
                return Err(BenchError::InvalidProfile(format!("{name}: profile decreases")));
            }
        }
        Ok(ProfileTable { taus, methods, values })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    /// `ρ_s(τ)` values for `method`, aligned with [`ProfileTable::taus`].
    pub fn values(&self, method: &str) -> Option<&[f64]> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.values[i].as_slice())
    }
}

/// 50 log-spaced points from 1 to 32.
pub fn default_tau_grid() -> Vec<f64> {
    log_grid(1.0, 32.0, 50)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi >= lo);
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    grid
}

/// Builds the performance profile of `records` on `taus`. Unsuccessful runs
/// have ratio `+∞`.
pub fn performance_profile(records: &[RunRecord], metric: ProfileMetric, taus: &[f64]) -> Result<ProfileTable, BenchError> {
    let mut methods: Vec<Method> = Vec::new();
    let mut problems: Vec<(String, usize)> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        let key = (r.problem.clone(), r.n);
        if !problems.contains(&key) {
            problems.push(key);
        }
    }
    if problems.is_empty() {
        return Err(BenchError::IncompleteGrid("no records".into()));
    }
    let mut grid: HashMap<(usize, usize), &RunRecord> = HashMap::new();
    for r in records {
        let p = problems.iter().position(|k| k.0 == r.problem && k.1 == r.n).expect("collected");
        let s = methods.iter().position(|m| *m == r.method).expect("collected");
        if grid.insert((p, s), r).is_some() {
            return Err(BenchError::IncompleteGrid(format!(
                "duplicate record for {} n={} {}",
                r.problem, r.n, r.method
            )));
        }
    }
    if grid.len() != problems.len() * methods.len() {
        return Err(BenchError::IncompleteGrid(format!(
            "{} records for {} problems x {} methods",
            grid.len(),
            problems.len(),
            methods.len()
        )));
    }

    // ratios[p][s]
    let ratios: Vec<Vec<f64>> = (0..problems.len())
        .map(|p| {
            let costs: Vec<f64> = (0..methods.len())
                .map(|s| {
                    let r = grid[&(p, s)];
                    if r.converged() {
                        metric.cost(r)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
            costs
                .iter()
                .map(|&c| if c.is_finite() { c / best } else { f64::INFINITY })
                .collect()
        })
        .collect();

    let np = problems.len() as f64;
    let values = (0..methods.len())
        .map(|s| {
            taus.iter()
                .map(|&tau| ratios.iter().filter(|row| row[s] <= tau).count() as f64 / np)
                .collect()
        })
        .collect();
    ProfileTable::new(
        taus.to_vec(),
        methods.iter().map(|m| m.name().to_string()).collect(),
        values,
    )
}

pub const RESULTS_HEADER: &str = "problem,n,method,status,iterations,fevals,f_norm_final,wall_time_ms";

/// Writes records as CSV.
pub fn write_results<W: Write>(records: &[RunRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.5e},{:.3}",
            r.problem, r.n, r.method, r.status, r.iterations, r.fevals, r.f_norm_final, r.wall_time_ms
        )?;
    }
    out.flush()
}

pub fn emit_results(records: &[RunRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let file = File::create(path)?;
    write_results(records, BufWriter::new(file))?;
    Ok(())
}

/// Writes a profile as CSV with one column per method.
pub fn write_profile<W: Write>(table: &ProfileTable, mut out: W) -> io::Result<()> {
    writeln!(out, "tau,{}", table.methods.join(","))?;
    for (t, tau) in table.taus.iter().enumerate() {
        let row: Vec<String> = table.values.iter().map(|v| format!("{:.6}", v[t])).collect();
        writeln!(out, "{tau:.6},{}", row.join(","))?;
    }
    out.flush()
}

pub fn emit_profile(table: &ProfileTable, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let file = File::create(path)?;
    write_profile(table, BufWriter::new(file))?;
    Ok(())
}
