//! Registry of classical square nonlinear test systems.
//!
//! The formulations and starting points follow the standard collection of
//! Moré, Garbow and Hillstrom ("Testing unconstrained optimization software",
//! ACM TOMS 7, 1981), written here as residual maps `F: Rⁿ → Rⁿ`.
//!
//! Each [`ProblemSpec`] carries its own evaluation counter, so a benchmark
//! harness can read function-evaluation counts without instrumentation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::DenseVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("problem `{name}` does not support dimension {n} (allowed: {allowed:?})")]
    DimensionNotSupported {
        name: &'static str,
        n: usize,
        allowed: &'static [usize],
    },
    #[error("point has dimension {got}, problem has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("residual is not finite")]
    NonFiniteResult,
}

/// Dimensions used for the scalable families.
pub const SCALABLE_DIMS: &[usize] = &[10, 20, 30];

/// The built-in test systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    BrownAlmostLinear,
    BroydenBanded,
    BroydenTridiagonal,
    DiscreteBoundaryValue,
    DiscreteIntegral,
    Trigonometric,
    PowellSingular,
    HelicalValley,
    PowellBadlyScaled,
    Rosenbrock,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 10] = [
        ProblemKind::BrownAlmostLinear,
        ProblemKind::BroydenBanded,
        ProblemKind::BroydenTridiagonal,
        ProblemKind::DiscreteBoundaryValue,
        ProblemKind::DiscreteIntegral,
        ProblemKind::Trigonometric,
        ProblemKind::PowellSingular,
        ProblemKind::HelicalValley,
        ProblemKind::PowellBadlyScaled,
        ProblemKind::Rosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::BrownAlmostLinear => "brown-almost-linear",
            ProblemKind::BroydenBanded => "broyden-bounded",
            ProblemKind::BroydenTridiagonal => "broyden-tridiagonal",
            ProblemKind::DiscreteBoundaryValue => "discrete-boundary-value",
            ProblemKind::DiscreteIntegral => "discrete-integral",
            ProblemKind::Trigonometric => "trigonometric",
            ProblemKind::PowellSingular => "powell-singular",
            ProblemKind::HelicalValley => "helical-valley",
            ProblemKind::PowellBadlyScaled => "powell-badly-scaled",
            ProblemKind::Rosenbrock => "rosenbrock",
        }
    }

    pub fn allowed_dims(self) -> &'static [usize] {
        match self {
            ProblemKind::PowellSingular => &[4],
            ProblemKind::HelicalValley => &[3],
            ProblemKind::PowellBadlyScaled | ProblemKind::Rosenbrock => &[2],
            _ => SCALABLE_DIMS,
        }
    }

    fn initial_point(self, n: usize) -> DenseVector {
        let h = 1.0 / (n as f64 + 1.0);
        match self {
            ProblemKind::BrownAlmostLinear => DenseVector::from_elem(n, 0.5),
            ProblemKind::BroydenBanded | ProblemKind::BroydenTridiagonal => {
                DenseVector::from_elem(n, -1.0)
            }
            ProblemKind::DiscreteBoundaryValue | ProblemKind::DiscreteIntegral => (1..=n)
                .map(|i| {
                    let t = i as f64 * h;
                    t * (t - 1.0)
                })
                .collect::<Vec<_>>()
                .into(),
            ProblemKind::Trigonometric => DenseVector::from_elem(n, 1.0 / n as f64),
            ProblemKind::PowellSingular => [3.0, -1.0, 0.0, 1.0].into(),
            ProblemKind::HelicalValley => [-1.0, 0.0, 0.0].into(),
            ProblemKind::PowellBadlyScaled => [0.0, 1.0].into(),
            ProblemKind::Rosenbrock => [-1.2, 1.0].into(),
        }
    }

    fn known_root(self, n: usize) -> Option<DenseVector> {
        match self {
            ProblemKind::BrownAlmostLinear => Some(DenseVector::from_elem(n, 1.0)),
            ProblemKind::PowellSingular => Some(DenseVector::zeros(4)),
            ProblemKind::HelicalValley => Some([1.0, 0.0, 0.0].into()),
            ProblemKind::Rosenbrock => Some([1.0, 1.0].into()),
            _ => None,
        }
    }

    /// Evaluates the residual of this system at `x`.
    pub fn residual(self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            ProblemKind::BrownAlmostLinear => {
                let sum: f64 = x.iter().sum();
                let mut f: Vec<f64> = x[..n - 1]
                    .iter()
                    .map(|xi| xi + sum - (n as f64 + 1.0))
                    .collect();
                f.push(x.iter().product::<f64>() - 1.0);
                f
            }
            ProblemKind::BroydenBanded => {
                // lower bandwidth 5, upper bandwidth 1
                (0..n)
                    .map(|i| {
                        let lo = i.saturating_sub(5);
                        let hi = (i + 1).min(n - 1);
                        let coupling: f64 = (lo..=hi)
                            .filter(|&j| j != i)
                            .map(|j| x[j] * (1.0 + x[j]))
                            .sum();
                        x[i] * (2.0 + 5.0 * x[i] * x[i]) + 1.0 - coupling
                    })
                    .collect()
            }
            ProblemKind::BroydenTridiagonal => (0..n)
                .map(|i| {
                    let prev = if i > 0 { x[i - 1] } else { 0.0 };
                    let next = if i + 1 < n { x[i + 1] } else { 0.0 };
                    (3.0 - 2.0 * x[i]) * x[i] - prev - 2.0 * next + 1.0
                })
                .collect(),
            ProblemKind::DiscreteBoundaryValue => {
                let h = 1.0 / (n as f64 + 1.0);
                (0..n)
                    .map(|i| {
                        let t = (i + 1) as f64 * h;
                        let prev = if i > 0 { x[i - 1] } else { 0.0 };
                        let next = if i + 1 < n { x[i + 1] } else { 0.0 };
                        2.0 * x[i] - prev - next + h * h * (x[i] + t + 1.0).powi(3) / 2.0
                    })
                    .collect()
            }
            ProblemKind::DiscreteIntegral => {
                let h = 1.0 / (n as f64 + 1.0);
                let t: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
                let cube: Vec<f64> = (0..n).map(|j| (x[j] + t[j] + 1.0).powi(3)).collect();
                (0..n)
                    .map(|i| {
                        let lower: f64 = (0..=i).map(|j| t[j] * cube[j]).sum();
                        let upper: f64 = (i + 1..n).map(|j| (1.0 - t[j]) * cube[j]).sum();
                        x[i] + h * ((1.0 - t[i]) * lower + t[i] * upper) / 2.0
                    })
                    .collect()
            }
            ProblemKind::Trigonometric => {
                let cos_sum: f64 = x.iter().map(|v| v.cos()).sum();
                (0..n)
                    .map(|i| {
                        n as f64 - cos_sum + (i + 1) as f64 * (1.0 - x[i].cos()) - x[i].sin()
                    })
                    .collect()
            }
            ProblemKind::PowellSingular => vec![
                x[0] + 10.0 * x[1],
                5f64.sqrt() * (x[2] - x[3]),
                (x[1] - 2.0 * x[2]).powi(2),
                10f64.sqrt() * (x[0] - x[3]).powi(2),
            ],
            ProblemKind::HelicalValley => {
                let theta = if x[0] > 0.0 {
                    (x[1] / x[0]).atan() / (2.0 * PI)
                } else if x[0] < 0.0 {
                    (x[1] / x[0]).atan() / (2.0 * PI) + 0.5
                } else {
                    0.25_f64.copysign(x[1])
                };
                vec![
                    10.0 * (x[2] - 10.0 * theta),
                    10.0 * (x[0].hypot(x[1]) - 1.0),
                    x[2],
                ]
            }
            ProblemKind::PowellBadlyScaled => vec![
                1e4 * x[0] * x[1] - 1.0,
                (-x[0]).exp() + (-x[1]).exp() - 1.0001,
            ],
            ProblemKind::Rosenbrock => vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]],
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        let key = match key.as_str() {
            "broyden-banded" => "broyden-bounded",
            "discrete-integral-equation" => "discrete-integral",
            other => other,
        };
        ProblemKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

/// A residual map supplied by the caller.
pub type CustomResidual = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
enum Evaluator {
    Builtin(ProblemKind),
    Custom(CustomResidual),
}

/// One instance of a test system together with its evaluation counter.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    dimension: usize,
    evaluator: Evaluator,
    x0: DenseVector,
    known_root: Option<DenseVector>,
    fevals: usize,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("x0", &self.x0)
            .field("known_root", &self.known_root)
            .field("fevals", &self.fevals)
            .finish()
    }
}

/// Looks up a built-in problem by name and dimension.
pub fn registry_lookup(name: &str, n: usize) -> Result<ProblemSpec, ProblemError> {
    let kind: ProblemKind = name.parse()?;
    ProblemSpec::builtin(kind, n)
}

/// Start-point multipliers for the fixed-size systems in [`default_suite`].
pub const START_SCALES: &[u32] = &[1, 10, 100];

/// One benchmark instance: a registered problem, its dimension and a
/// multiplier applied to the standard starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SuiteEntry {
    pub kind: ProblemKind,
    pub n: usize,
    pub start_scale: u32,
}

impl SuiteEntry {
    pub fn new(kind: ProblemKind, n: usize) -> Self {
        SuiteEntry { kind, n, start_scale: 1 }
    }

    pub fn scaled(kind: ProblemKind, n: usize, start_scale: u32) -> Self {
        SuiteEntry { kind, n, start_scale }
    }

    /// `rosenbrock` for the standard start, `rosenbrock-x10` for `10·x0`.
    pub fn label(&self) -> String {
        if self.start_scale == 1 {
            self.kind.name().to_string()
        } else {
            format!("{}-x{}", self.kind.name(), self.start_scale)
        }
    }

    pub fn instantiate(&self) -> Result<ProblemSpec, ProblemError> {
        let spec = ProblemSpec::builtin(self.kind, self.n)?;
        if self.start_scale == 1 {
            return Ok(spec);
        }
        let x0 = spec.x0().scaled(f64::from(self.start_scale));
        let mut spec = spec.with_start(x0);
        spec.name = self.label();
        Ok(spec)
    }
}

impl From<(ProblemKind, usize)> for SuiteEntry {
    fn from((kind, n): (ProblemKind, usize)) -> Self {
        SuiteEntry::new(kind, n)
    }
}

impl fmt::Display for SuiteEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.label(), self.n)
    }
}

impl FromStr for SuiteEntry {
    type Err = ProblemError;

    /// Parses `name:n` or `name-xS:n`, e.g. `helical-valley-x10:3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (label, n) = s
            .rsplit_once(':')
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| ProblemError::UnknownProblem(s.to_string()))?;
        let label = label.trim();
        let (name, scale) = match label.rsplit_once("-x") {
            Some((name, scale)) if scale.chars().all(|c| c.is_ascii_digit()) && !scale.is_empty() => {
                let scale = scale
                    .parse()
                    .map_err(|_| ProblemError::UnknownProblem(s.to_string()))?;
                (name, scale)
            }
            _ => (label, 1),
        };
        let entry = SuiteEntry::scaled(name.parse()?, n, scale);
        entry.instantiate()?;
        Ok(entry)
    }
}

/// The benchmark suite of 30 instances: the six scalable families at
/// n = 10, 20, 30 and the four fixed-size systems started from `x0`,
/// `10·x0` and `100·x0`.
pub fn default_suite() -> Vec<SuiteEntry> {
    let mut suite = Vec::with_capacity(30);
    for &kind in &ProblemKind::ALL {
        let dims = kind.allowed_dims();
        if dims.len() > 1 {
            suite.extend(dims.iter().map(|&n| SuiteEntry::new(kind, n)));
        } else {
            suite.extend(START_SCALES.iter().map(|&scale| SuiteEntry::scaled(kind, dims[0], scale)));
        }
    }
    suite
}

impl ProblemSpec {
    pub fn builtin(kind: ProblemKind, n: usize) -> Result<Self, ProblemError> {
        if !kind.allowed_dims().contains(&n) {
            return Err(ProblemError::DimensionNotSupported {
                name: kind.name(),
                n,
                allowed: kind.allowed_dims(),
            });
        }
        Ok(ProblemSpec {
            name: kind.name().to_string(),
            dimension: n,
            evaluator: Evaluator::Builtin(kind),
            x0: kind.initial_point(n),
            known_root: kind.known_root(n),
            fevals: 0,
        })
    }

    /// Wraps an arbitrary residual map. Panics if `x0` is empty.
    pub fn custom<F>(name: impl Into<String>, x0: DenseVector, residual: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(x0.dim() > 0, "custom problem needs a non-empty start point");
        ProblemSpec {
            name: name.into(),
            dimension: x0.dim(),
            evaluator: Evaluator::Custom(Arc::new(residual)),
            x0,
            known_root: None,
            fevals: 0,
        }
    }

    pub fn with_known_root(mut self, root: DenseVector) -> Self {
        self.known_root = Some(root);
        self
    }

    pub fn with_start(mut self, x0: DenseVector) -> Self {
        assert_eq!(x0.dim(), self.dimension);
        self.x0 = x0;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn x0(&self) -> &DenseVector {
        &self.x0
    }

    pub fn known_root(&self) -> Option<&DenseVector> {
        self.known_root.as_ref()
    }

    pub fn fevals(&self) -> usize {
        self.fevals
    }

    pub fn reset_counter(&mut self) {
        self.fevals = 0;
    }

    /// Evaluates `F(x)`, counting the call even when the result is rejected.
    pub fn evaluate(&mut self, x: &DenseVector) -> Result<DenseVector, ProblemError> {
        if x.dim() != self.dimension {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dimension,
                got: x.dim(),
            });
        }
        self.fevals += 1;
        let f = match &self.evaluator {
            Evaluator::Builtin(kind) => kind.residual(x.as_slice()),
            Evaluator::Custom(residual) => residual(x.as_slice()),
        };
        if f.len() != self.dimension {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dimension,
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFiniteResult);
        }
        Ok(DenseVector::from_vec(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rosenbrock_lookup_and_values() {
        let mut p = registry_lookup("rosenbrock", 2).unwrap();
        assert_eq!(p.x0().as_slice(), &[-1.2, 1.0]);
        assert_eq!(p.fevals(), 0);
        let f = p.evaluate(&[1.0, 1.0].into()).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 0.0]);
        let f = p.evaluate(&[0.0, 0.0].into()).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 1.0]);
        assert_eq!(p.fevals(), 2);
    }

    #[test]
    fn brown_root_is_all_ones() {
        let mut p = registry_lookup("brown-almost-linear", 10).unwrap();
        let f = p.evaluate(&DenseVector::from_elem(10, 1.0)).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unsupported_dimension_and_unknown_name() {
        assert!(matches!(
            registry_lookup("rosenbrock", 7),
            Err(ProblemError::DimensionNotSupported { n: 7, .. })
        ));
        assert!(matches!(
            registry_lookup("extended-wood", 4),
            Err(ProblemError::UnknownProblem(_))
        ));
        assert!(registry_lookup("trigonometric", 15).is_err());
    }

    #[test]
    fn default_suite_has_thirty_instances() {
        let suite = default_suite();
        assert_eq!(suite.len(), 30);
        for entry in &suite {
            let p = entry.instantiate().unwrap();
            assert_eq!(p.x0().dim(), entry.n);
            assert_eq!(p.name(), entry.label());
        }
        let mut labels: Vec<String> = suite.iter().map(|e| format!("{}:{}", e.label(), e.n)).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 30);
    }

    #[test]
    fn suite_entry_parse_and_scaled_start() {
        let e: SuiteEntry = "rosenbrock-x10:2".parse().unwrap();
        assert_eq!(e, SuiteEntry::scaled(ProblemKind::Rosenbrock, 2, 10));
        let p = e.instantiate().unwrap();
        assert_eq!(p.name(), "rosenbrock-x10");
        assert_eq!(p.x0().as_slice(), &[-12.0, 10.0]);
        let e: SuiteEntry = "broyden-tridiagonal:20".parse().unwrap();
        assert_eq!(e.label(), "broyden-tridiagonal");
        assert!("rosenbrock".parse::<SuiteEntry>().is_err());
        assert!("rosenbrock:3".parse::<SuiteEntry>().is_err());
        assert!("nope:3".parse::<SuiteEntry>().is_err());
    }

    #[test]
    fn known_roots_have_zero_residual() {
        for entry in default_suite() {
            let (kind, n) = (entry.kind, entry.n);
            let mut p = ProblemSpec::builtin(kind, n).unwrap();
            if let Some(root) = p.known_root().cloned() {
                let f = p.evaluate(&root).unwrap();
                assert!(f.norm() <= 1e-10, "{kind} n={n}: {}", f.norm());
            }
        }
    }

    #[test]
    fn nonfinite_residual_is_reported_and_counted() {
        let mut p = registry_lookup("powell-badly-scaled", 2).unwrap();
        assert_eq!(
            p.evaluate(&[-1000.0, 0.0].into()),
            Err(ProblemError::NonFiniteResult)
        );
        assert_eq!(p.fevals(), 1);
    }

    #[test]
    fn helical_valley_angle_branches() {
        let mut p = registry_lookup("helical-valley", 3).unwrap();
        // on the unit circle at angle pi/2 the root of the first equation is x3 = 2.5
        let f = p.evaluate(&[0.0, 1.0, 2.5].into()).unwrap();
        assert_abs_diff_eq!(f[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 0.0, epsilon = 1e-12);
        let f = p.evaluate(&[-1.0, 0.0, 5.0].into()).unwrap();
        assert_abs_diff_eq!(f[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn scalable_families_share_template_across_sizes() {
        // The tridiagonal residual only couples neighbours, so an interior
        // component is independent of n.
        for n in SCALABLE_DIMS {
            let mut p = ProblemSpec::builtin(ProblemKind::BroydenTridiagonal, *n).unwrap();
            let f = p.evaluate(&DenseVector::from_elem(*n, 0.5)).unwrap();
            assert_abs_diff_eq!(f[3], (3.0 - 1.0) * 0.5 - 0.5 - 1.0 + 1.0, epsilon = 1e-15);
        }
    }

    /// Forward-difference Jacobian against a hand-derived one at `x0`.
    #[test]
    fn finite_difference_jacobian_sanity() {
        let mut p = registry_lookup("discrete-boundary-value", 10).unwrap();
        let x0 = p.x0().clone();
        let f0 = p.evaluate(&x0).unwrap();
        let h = 1.0 / 11.0;
        for j in 0..10 {
            let step = 1e-7;
            let mut xp = x0.clone();
            xp[j] += step;
            let fp = p.evaluate(&xp).unwrap();
            for i in 0..10 {
                let fd = (fp[i] - f0[i]) / step;
                let t = (i + 1) as f64 * h;
                let exact = if i == j {
                    2.0 + 1.5 * h * h * (x0[i] + t + 1.0).powi(2)
                } else if i.abs_diff(j) == 1 {
                    -1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(fd, exact, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn parse_aliases() {
        assert_eq!("broyden-banded".parse::<ProblemKind>().unwrap(), ProblemKind::BroydenBanded);
        assert_eq!("Rosenbrock".parse::<ProblemKind>().unwrap(), ProblemKind::Rosenbrock);
    }
}
