//! Quasi-Newton solvers for square nonlinear systems `F(x) = 0`.
//!
//! Four methods share one globalized driver and differ only in how they pick
//! the direction `c` of the rank-one update `B' = B + θ (y - Bs) cᵀ / ‖c‖²`:
//!
//! * `qn1`: Broyden, `c = s`.
//! * `qn2`: multipoint secant with restarts (Gay-Schnabel).
//! * `qn3`: multipoint secant that prunes the least independent stored steps.
//! * `qn4`: interpolation through past iterates kept in stable general position.
//!
//! Steps are globalized by the Li-Fukushima nonmonotone backtracking search.
//!
//! ```
//! use multisecant::{registry_lookup, solve, Method, SolveStatus, SolverConfig};
//!
//! let mut problem = registry_lookup("rosenbrock", 2).unwrap();
//! let report = solve(&mut problem, Method::Qn4, &SolverConfig::default()).unwrap();
//! assert_eq!(report.status, SolveStatus::Converged);
//! assert!((report.x_final[0] - 1.0).abs() < 1e-8);
//! ```

pub mod bench;
pub mod linalg;
pub mod memory;
pub mod problems;
pub mod solver;
pub mod update;

pub use bench::{
    default_tau_grid, emit_profile, emit_results, performance_profile, run_suite, BenchError, ProfileMetric,
    ProfileTable, RunRecord,
};
pub use linalg::{DenseMatrix, DenseVector, LinalgError};
pub use memory::{InterpolationMemory, MemoryError, SecantMemory, SecantVariant};
pub use problems::{default_suite, registry_lookup, ProblemError, ProblemKind, ProblemSpec, SuiteEntry};
pub use solver::{
    solve, solve_observed, EtaSchedule, InitialJacobian, IterationRecord, Method, SolveReport, SolveStatus,
    SolverConfig, SolverError,
};
pub use update::{JacobianApprox, ThetaPolicy, UpdateError};
