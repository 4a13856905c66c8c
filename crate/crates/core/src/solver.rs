//! Globalized quasi-Newton driver.
//!
//! Each iteration solves `B p = -F`, accepts the full step when
//! `‖F(x + p)‖ <= ρ‖F‖ - σ₂‖p‖²`, and otherwise backtracks on the
//! nonmonotone condition
//!
//! ```text
//! ‖F(x + λp)‖ <= ‖F‖ - σ₁‖λp‖² + η_k‖F‖
//! ```
//!
//! over `λ ∈ {1, β, β², ...}`. The update direction comes from the selected
//! method and `B` is updated by the θ-safeguarded rank-one formula.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector, ZERO_NORM};
use crate::memory::{broyden_direction, InterpolationMemory, MemoryError, SecantMemory, SecantVariant};
use crate::problems::{ProblemError, ProblemSpec};
use crate::update::{JacobianApprox, ThetaPolicy, UpdateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// The four quasi-Newton variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Broyden's method.
    Qn1,
    /// Multipoint secant with restarts (Gay-Schnabel).
    Qn2,
    /// Multipoint secant with pruning of the least independent steps.
    Qn3,
    /// Interpolation method.
    Qn4,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Qn1, Method::Qn2, Method::Qn3, Method::Qn4];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qn1 => "qn1",
            Method::Qn2 => "qn2",
            Method::Qn3 => "qn3",
            Method::Qn4 => "qn4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qn1" | "broyden" => Ok(Method::Qn1),
            "qn2" | "gay-schnabel" => Ok(Method::Qn2),
            "qn3" | "multipoint-secant" | "pruning" => Ok(Method::Qn3),
            "qn4" | "interpolation" => Ok(Method::Qn4),
            other => Err(SolverError::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// How the initial Jacobian approximation is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialJacobian {
    Identity,
    /// `‖F(x₀)‖ · I`
    ScaledIdentity,
    /// Forward differences at the current point (costs `n` evaluations).
    /// Falls back to the identity when the difference matrix is singular.
    #[default]
    FiniteDifference,
}

impl FromStr for InitialJacobian {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" => Ok(InitialJacobian::Identity),
            "scaled-identity" | "scaled" => Ok(InitialJacobian::ScaledIdentity),
            "finite-difference" | "fd" => Ok(InitialJacobian::FiniteDifference),
            other => Err(SolverError::InvalidConfig(format!("unknown B0 policy `{other}`"))),
        }
    }
}

type EtaFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;
type EtaBoundFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The summable slack sequence `η_k`, given as a function of `k` and
/// `‖F(x₀)‖`, together with an upper bound on its total sum.
#[derive(Clone)]
pub struct EtaSchedule {
    eta: EtaFn,
    sum_bound: EtaBoundFn,
    label: &'static str,
}

impl EtaSchedule {
    /// `η_k = ‖F₀‖ / (k + 1)²`, summing to `‖F₀‖ π² / 6`.
    pub fn inverse_square() -> Self {
        EtaSchedule {
            eta: Arc::new(|k, f0| f0 / ((k as f64 + 1.0) * (k as f64 + 1.0))),
            sum_bound: Arc::new(|f0| f0 * std::f64::consts::PI * std::f64::consts::PI / 6.0),
            label: "inverse-square",
        }
    }

    /// A user schedule. `sum_bound(‖F₀‖)` must bound `Σ_k eta(k, ‖F₀‖)`.
    pub fn custom<E, B>(eta: E, sum_bound: B) -> Self
    where
        E: Fn(usize, f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        EtaSchedule {
            eta: Arc::new(eta),
            sum_bound: Arc::new(sum_bound),
            label: "custom",
        }
    }

    pub fn eta(&self, k: usize, f0_norm: f64) -> f64 {
        (self.eta)(k, f0_norm)
    }

    pub fn sum_bound(&self, f0_norm: f64) -> f64 {
        (self.sum_bound)(f0_norm)
    }
}

impl Default for EtaSchedule {
    fn default() -> Self {
        Self::inverse_square()
    }
}

impl fmt::Debug for EtaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("EtaSchedule").field(&self.label).finish()
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Independence threshold for the secant and interpolation memories.
    pub sigma: f64,
    /// Line-search decrease coefficient σ₁.
    pub sigma1: f64,
    /// Full-step decrease coefficient σ₂.
    pub sigma2: f64,
    pub rho: f64,
    /// Backtracking factor.
    pub beta: f64,
    pub theta: ThetaPolicy,
    /// Use this θ for every update instead of the safeguard rule.
    pub fixed_theta: Option<f64>,
    pub eta: EtaSchedule,
    /// Relative stopping tolerance: stop when `‖F‖ <= tol · max(‖F₀‖, 1)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_feval: usize,
    /// Memory depth `m`; `None` uses the problem dimension.
    pub memory_depth: Option<usize>,
    pub lambda_min: f64,
    pub initial_jacobian: InitialJacobian,
    /// Resets of `B` and the memory allowed when `B` turns out singular.
    pub max_resets: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sigma: 0.1,
            sigma1: 1e-3,
            sigma2: 1e-3,
            rho: 0.9,
            beta: 0.1,
            theta: ThetaPolicy::default(),
            fixed_theta: None,
            eta: EtaSchedule::default(),
            tol: 1e-10,
            max_iter: 500,
            max_feval: 2000,
            memory_depth: None,
            lambda_min: 1e-12,
            initial_jacobian: InitialJacobian::FiniteDifference,
            max_resets: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(SolverError::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        open_unit("sigma", self.sigma)?;
        open_unit("rho", self.rho)?;
        open_unit("beta", self.beta)?;
        open_unit("theta_bar", self.theta.theta_bar)?;
        positive("sigma1", self.sigma1)?;
        positive("sigma2", self.sigma2)?;
        positive("epsilon_sing", self.theta.epsilon_sing)?;
        positive("tol", self.tol)?;
        positive("lambda_min", self.lambda_min)?;
        if self.lambda_min > 1.0 {
            return Err(SolverError::InvalidConfig("lambda_min must not exceed 1".into()));
        }
        if let Some(theta) = self.fixed_theta {
            if (theta - 1.0).abs() > self.theta.theta_bar {
                return Err(SolverError::InvalidConfig(format!(
                    "fixed theta {theta} outside [1 - theta_bar, 1 + theta_bar]"
                )));
            }
        }
        Ok(())
    }

    /// Effective memory depth for a problem of dimension `n`.
    pub fn depth_for(&self, n: usize) -> usize {
        self.memory_depth.unwrap_or(n).min(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    MaxFeval,
    LineSearchFailed,
    SingularUnrecoverable,
    NonFinite,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::MaxFeval => "max_feval",
            SolveStatus::LineSearchFailed => "line_search_failed",
            SolveStatus::SingularUnrecoverable => "singular_unrecoverable",
            SolveStatus::NonFinite => "nonfinite",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `‖F_k‖` at the start of the iteration.
    pub f_norm: f64,
    /// `‖F_{k+1}‖` at the accepted point.
    pub f_norm_next: f64,
    pub step_norm: f64,
    pub direction_norm: f64,
    pub lambda: f64,
    pub eta: f64,
    /// `None` when the update was skipped.
    pub theta: Option<f64>,
    /// Size of the retained secant or interpolation set after the update.
    pub memory_size: usize,
    pub full_step: bool,
    /// Cumulative evaluations after this iteration.
    pub fevals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub status: SolveStatus,
    pub x_final: DenseVector,
    pub f_norm_initial: f64,
    pub f_norm_final: f64,
    pub iterations: usize,
    pub fevals: usize,
    /// Resets of `B` and memory after a singular matrix.
    pub restarts: usize,
    /// Times the secant memory restarted or memory was reset after a
    /// skipped or scaled update.
    pub memory_resets: usize,
    pub trace: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn stopping_threshold(&self, tol: f64) -> f64 {
        tol * self.f_norm_initial.max(1.0)
    }
}

/// Read-only view of the direction memory handed to observers.
#[derive(Debug, Clone, Copy)]
pub enum MemoryView<'a> {
    Broyden,
    Secant(&'a SecantMemory),
    Interpolation(&'a InterpolationMemory),
}

/// Data about one committed iteration.
#[derive(Debug)]
pub struct UpdateEvent<'a> {
    pub k: usize,
    pub x: &'a DenseVector,
    pub x_next: &'a DenseVector,
    pub f: &'a DenseVector,
    pub f_next: &'a DenseVector,
    pub s: &'a DenseVector,
    pub y: &'a DenseVector,
    pub c: &'a DenseVector,
    pub lambda: f64,
    pub theta: Option<f64>,
    /// `B_{k+1}`.
    pub jacobian: &'a DenseMatrix,
    pub memory: MemoryView<'a>,
}

pub trait SolveObserver {
    fn on_update(&mut self, event: &UpdateEvent<'_>);
}

/// Observer that ignores everything.
pub struct NoObserver;

impl SolveObserver for NoObserver {
    fn on_update(&mut self, _: &UpdateEvent<'_>) {}
}

impl<F: FnMut(&UpdateEvent<'_>)> SolveObserver for F {
    fn on_update(&mut self, event: &UpdateEvent<'_>) {
        self(event)
    }
}

/// Whether the trial point passes the full-step test.
pub fn full_step_test(f_norm: f64, f_norm_trial: f64, p_norm: f64, cfg: &SolverConfig) -> bool {
    f_norm_trial <= cfg.rho * f_norm - cfg.sigma2 * p_norm * p_norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub lambda: f64,
    pub x: DenseVector,
    pub f: DenseVector,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineSearchError {
    #[error("step length fell below the minimum without satisfying the decrease condition")]
    LineSearchFailed,
    #[error("evaluation budget exhausted during the line search")]
    BudgetExhausted,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Backtracks from `λ = 1` by factors of `β` until the nonmonotone decrease
/// condition holds. Non-finite trial residuals count as rejections.
pub fn backtrack_line_search(
    problem: &mut ProblemSpec,
    x: &DenseVector,
    p: &DenseVector,
    f_norm: f64,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<LineSearchOutcome, LineSearchError> {
    backtrack(problem, x, p, f_norm, eta, cfg, None, None)
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    problem: &mut ProblemSpec,
    x: &DenseVector,
    p: &DenseVector,
    f_norm: f64,
    eta: f64,
    cfg: &SolverConfig,
    unit_trial: Option<Result<(DenseVector, DenseVector), ProblemError>>,
    budget: Option<(usize, usize)>,
) -> Result<LineSearchOutcome, LineSearchError> {
    let p_norm = p.norm();
    if p_norm <= ZERO_NORM || !p.is_finite() {
        return Err(LineSearchError::LineSearchFailed);
    }
    let mut unit_trial = unit_trial;
    let mut j = 0;
    loop {
        let lambda = cfg.beta.powi(j);
        // allow for the roundoff in β^j when λ_min is itself a power of β
        if lambda < cfg.lambda_min * (1.0 - 1e-9) {
            return Err(LineSearchError::LineSearchFailed);
        }
        let trial = match unit_trial.take() {
            Some(done) => done,
            None => {
                if let Some((start, limit)) = budget {
                    if problem.fevals() - start >= limit {
                        return Err(LineSearchError::BudgetExhausted);
                    }
                }
                let xt = x.add_scaled(lambda, p);
                problem.evaluate(&xt).map(|ft| (xt, ft))
            }
        };
        match trial {
            Ok((xt, ft)) => {
                let step = lambda * p_norm;
                if ft.norm() <= f_norm - cfg.sigma1 * step * step + eta * f_norm {
                    return Ok(LineSearchOutcome { lambda, x: xt, f: ft });
                }
            }
            Err(ProblemError::NonFiniteResult) => {}
            Err(other) => return Err(other.into()),
        }
        j += 1;
    }
}

/// Forward-difference Jacobian of `problem` at `x` where `F(x) = f`.
pub fn finite_difference_jacobian(
    problem: &mut ProblemSpec,
    x: &DenseVector,
    f: &DenseVector,
) -> Result<DenseMatrix, ProblemError> {
    let n = x.dim();
    let root_eps = f64::EPSILON.sqrt();
    let mut jac = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let h = root_eps * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        let h = xp[j] - x[j];
        let fp = problem.evaluate(&xp)?;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - f[i]) / h;
        }
    }
    Ok(jac)
}

enum Directions {
    Broyden,
    Secant(SecantMemory),
    Interpolation(InterpolationMemory),
}

impl Directions {
    fn new(method: Method, n: usize, cfg: &SolverConfig, x0: &DenseVector, f0: &DenseVector) -> Self {
        let depth = cfg.depth_for(n);
        match method {
            Method::Qn1 => Directions::Broyden,
            Method::Qn2 => Directions::Secant(SecantMemory::new(n, cfg.sigma, depth, SecantVariant::Restart)),
            Method::Qn3 => Directions::Secant(SecantMemory::new(n, cfg.sigma, depth, SecantVariant::Pruning)),
            Method::Qn4 => Directions::Interpolation(InterpolationMemory::new(
                n,
                cfg.sigma,
                depth,
                0,
                x0.clone(),
                f0.clone(),
            )),
        }
    }

    fn direction(
        &mut self,
        k: usize,
        s: &DenseVector,
        y: &DenseVector,
        x_next: &DenseVector,
        f_next: &DenseVector,
    ) -> Result<DenseVector, MemoryError> {
        match self {
            Directions::Broyden => broyden_direction(s),
            Directions::Secant(mem) => mem.update_direction(k, s, y),
            Directions::Interpolation(mem) => mem.update_direction(k + 1, x_next, f_next),
        }
    }

    /// Keeps only what `B` is known to reproduce after an update that did not
    /// use `θ = 1`: nothing for secant memories, the newest point for the
    /// interpolation memory.
    fn reset(&mut self) {
        match self {
            Directions::Broyden => {}
            Directions::Secant(mem) => mem.clear(),
            Directions::Interpolation(mem) => mem.reset(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Directions::Broyden => 1,
            Directions::Secant(mem) => mem.len(),
            Directions::Interpolation(mem) => mem.len(),
        }
    }

    fn secant_restarts(&self) -> usize {
        match self {
            Directions::Secant(mem) => mem.restarts(),
            _ => 0,
        }
    }

    fn view(&self) -> MemoryView<'_> {
        match self {
            Directions::Broyden => MemoryView::Broyden,
            Directions::Secant(mem) => MemoryView::Secant(mem),
            Directions::Interpolation(mem) => MemoryView::Interpolation(mem),
        }
    }
}

fn initial_jacobian(
    problem: &mut ProblemSpec,
    x: &DenseVector,
    f: &DenseVector,
    f0_norm: f64,
    cfg: &SolverConfig,
) -> JacobianApprox {
    let n = x.dim();
    match cfg.initial_jacobian {
        InitialJacobian::Identity => JacobianApprox::identity(n),
        InitialJacobian::ScaledIdentity => {
            let scale = if f0_norm > 0.0 { f0_norm } else { 1.0 };
            JacobianApprox::new(DenseMatrix::identity(n).scaled(scale))
        }
        InitialJacobian::FiniteDifference => match finite_difference_jacobian(problem, x, f) {
            Ok(jac) => {
                let approx = JacobianApprox::new(jac);
                if approx.is_nonsingular() {
                    approx
                } else {
                    JacobianApprox::identity(n)
                }
            }
            Err(_) => JacobianApprox::identity(n),
        },
    }
}

/// Runs `method` on `problem` from its starting point.
pub fn solve(problem: &mut ProblemSpec, method: Method, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    solve_observed(problem, method, cfg, &mut NoObserver)
}

/// Like [`solve`], reporting every committed iteration to `observer`.
pub fn solve_observed(
    problem: &mut ProblemSpec,
    method: Method,
    cfg: &SolverConfig,
    observer: &mut dyn SolveObserver,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let start = problem.fevals();
    let used = |p: &ProblemSpec| p.fevals() - start;

    let mut x = problem.x0().clone();
    let mut f = match problem.evaluate(&x) {
        Ok(f) => f,
        Err(ProblemError::NonFiniteResult) => {
            return Ok(SolveReport {
                method,
                status: SolveStatus::NonFinite,
                x_final: x,
                f_norm_initial: f64::INFINITY,
                f_norm_final: f64::INFINITY,
                iterations: 0,
                fevals: used(problem),
                restarts: 0,
                memory_resets: 0,
                trace: Vec::new(),
            });
        }
        Err(other) => return Err(other.into()),
    };
    let f0_norm = f.norm();
    let threshold = cfg.tol * f0_norm.max(1.0);
    let mut jac = if f0_norm <= threshold {
        JacobianApprox::identity(x.dim())
    } else {
        initial_jacobian(problem, &x, &f, f0_norm, cfg)
    };
    let mut dirs = Directions::new(method, x.dim(), cfg, &x, &f);

    let mut trace = Vec::new();
    let mut k = 0;
    let mut restarts = 0;
    let mut forced_resets = 0;

    let status = loop {
        let f_norm = f.norm();
        if f_norm <= threshold {
            break SolveStatus::Converged;
        }
        if k >= cfg.max_iter {
            break SolveStatus::MaxIter;
        }
        if used(problem) >= cfg.max_feval {
            break SolveStatus::MaxFeval;
        }

        let p = match jac.newton_direction(&f) {
            Ok(p) => p,
            Err(_) => {
                if restarts >= cfg.max_resets {
                    break SolveStatus::SingularUnrecoverable;
                }
                restarts += 1;
                log::debug!("k={k}: singular B, resetting ({restarts}/{})", cfg.max_resets);
                jac = initial_jacobian(problem, &x, &f, f0_norm, cfg);
                dirs.reset();
                continue;
            }
        };
        let eta = cfg.eta.eta(k, f0_norm);
        let p_norm = p.norm();

        let x_trial = x.add(&p);
        let first = problem.evaluate(&x_trial).map(|ft| (x_trial, ft));
        let accepted = match first {
            Ok((xt, ft)) if full_step_test(f_norm, ft.norm(), p_norm, cfg) => Ok((1.0, xt, ft, true)),
            other => backtrack(
                problem,
                &x,
                &p,
                f_norm,
                eta,
                cfg,
                Some(other),
                Some((start, cfg.max_feval)),
            )
            .map(|o| (o.lambda, o.x, o.f, false)),
        };
        let (lambda, x_next, f_next, full_step) = match accepted {
            Ok(a) => a,
            Err(LineSearchError::BudgetExhausted) => break SolveStatus::MaxFeval,
            Err(LineSearchError::LineSearchFailed) => break SolveStatus::LineSearchFailed,
            Err(LineSearchError::Problem(e)) => return Err(e.into()),
        };

        let s = x_next.sub(&x);
        let y = f_next.sub(&f);
        if s.norm() <= ZERO_NORM {
            // the accepted point is x itself in floating point
            break SolveStatus::LineSearchFailed;
        }
        let c = match dirs.direction(k, &s, &y, &x_next, &f_next) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("k={k}: direction memory failed ({e}), using the step");
                dirs.reset();
                forced_resets += 1;
                s.clone()
            }
        };

        let theta = match cfg.fixed_theta {
            Some(t) => Ok(t),
            None => jac.choose_theta(&s, &y, &c, &cfg.theta),
        };
        let theta = match theta {
            Ok(t) => match jac.rank_one_update(&s, &y, &c, t) {
                Ok(next) => {
                    jac = next;
                    Some(t)
                }
                Err(UpdateError::ZeroCk) => None,
                Err(e) => {
                    log::debug!("k={k}: update failed ({e})");
                    None
                }
            },
            Err(e) => {
                log::debug!("k={k}: update skipped ({e})");
                None
            }
        };
        if theta != Some(1.0) {
            dirs.reset();
            forced_resets += 1;
        }

        trace.push(IterationRecord {
            k,
            f_norm,
            f_norm_next: f_next.norm(),
            step_norm: s.norm(),
            direction_norm: c.norm(),
            lambda,
            eta,
            theta,
            memory_size: dirs.len(),
            full_step,
            fevals: used(problem),
        });
        observer.on_update(&UpdateEvent {
            k,
            x: &x,
            x_next: &x_next,
            f: &f,
            f_next: &f_next,
            s: &s,
            y: &y,
            c: &c,
            lambda,
            theta,
            jacobian: jac.matrix(),
            memory: dirs.view(),
        });

        x = x_next;
        f = f_next;
        k += 1;
    };

    Ok(SolveReport {
        method,
        status,
        f_norm_initial: f0_norm,
        f_norm_final: f.norm(),
        x_final: x,
        iterations: k,
        fevals: used(problem),
        restarts,
        memory_resets: forced_resets + dirs.secant_restarts(),
        trace,
    })
}
