//! The Jacobian approximation `B` and its rank-one update
//!
//! ```text
//! B' = B + θ (y - B s) cᵀ / ‖c‖²
//! ```
//!
//! `θ` normally equals one. By the matrix determinant lemma
//! `det B' = det B · (1 + θγ)` with `γ = cᵀ B⁻¹ (y - B s) / ‖c‖²`, so when
//! `1 + γ` is close to zero a value away from one keeps `B'` nonsingular.

use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector, LinalgError, LuFactors, ZERO_NORM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UpdateError {
    #[error("update direction is zero")]
    ZeroCk,
    #[error("no admissible theta keeps the matrix nonsingular (gamma = {gamma:e})")]
    UpdateSkipped { gamma: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Admissible range and singularity floor for `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPolicy {
    /// `θ` is taken from `[1 - theta_bar, 1 + theta_bar]`.
    pub theta_bar: f64,
    /// Smallest accepted `|det B' / det B|`.
    pub epsilon_sing: f64,
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy {
            theta_bar: 0.5,
            epsilon_sing: 1e-8,
        }
    }
}

/// A Jacobian approximation together with its LU factorization, if it has
/// one. A matrix that fails to factorize is kept so callers can inspect it,
/// but [`JacobianApprox::newton_direction`] will refuse it.
#[derive(Debug, Clone)]
pub struct JacobianApprox {
    b: DenseMatrix,
    lu: Result<LuFactors, LinalgError>,
}

impl JacobianApprox {
    pub fn new(b: DenseMatrix) -> Self {
        let lu = LuFactors::factorize(&b);
        JacobianApprox { b, lu }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DenseMatrix::identity(n))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.rows()
    }

    pub fn is_nonsingular(&self) -> bool {
        self.lu.is_ok()
    }

    fn factors(&self) -> Result<&LuFactors, LinalgError> {
        self.lu.as_ref().map_err(Clone::clone)
    }

    /// Solves `B p = -F`.
    pub fn newton_direction(&self, f: &DenseVector) -> Result<DenseVector, LinalgError> {
        let p = self.factors()?.solve(f)?.scaled(-1.0);
        if !p.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        Ok(p)
    }

    /// `γ = cᵀ B⁻¹ (y - B s) / ‖c‖²`, so that `det B' = det B (1 + θγ)`.
    pub fn determinant_gamma(
        &self,
        s: &DenseVector,
        y: &DenseVector,
        c: &DenseVector,
    ) -> Result<f64, UpdateError> {
        let cc = c.dot(c);
        if c.norm() <= ZERO_NORM {
            return Err(UpdateError::ZeroCk);
        }
        let residual = y.sub(&self.b.mul_vec(s));
        let w = self.factors()?.solve(&residual)?;
        Ok(c.dot(&w) / cc)
    }

    /// Returns `B + θ (y - B s) cᵀ / ‖c‖²`.
    pub fn rank_one_update(
        &self,
        s: &DenseVector,
        y: &DenseVector,
        c: &DenseVector,
        theta: f64,
    ) -> Result<JacobianApprox, UpdateError> {
        if c.norm() <= ZERO_NORM {
            return Err(UpdateError::ZeroCk);
        }
        let mut b = self.b.clone();
        if theta != 0.0 {
            let residual = y.sub(&self.b.mul_vec(s));
            b.add_outer(theta / c.dot(c), &residual, c);
        }
        Ok(JacobianApprox::new(b))
    }

    /// Picks `θ` for the update: one when that keeps the determinant ratio
    /// above the floor, otherwise the endpoint of the admissible interval with
    /// the larger ratio (the lower endpoint on ties).
    pub fn choose_theta(
        &self,
        s: &DenseVector,
        y: &DenseVector,
        c: &DenseVector,
        policy: &ThetaPolicy,
    ) -> Result<f64, UpdateError> {
        let gamma = self.determinant_gamma(s, y, c)?;
        select_theta(gamma, policy)
    }
}

/// `θ` selection given `γ`; see [`JacobianApprox::choose_theta`].
pub fn select_theta(gamma: f64, policy: &ThetaPolicy) -> Result<f64, UpdateError> {
    if !gamma.is_finite() {
        return Err(UpdateError::UpdateSkipped { gamma });
    }
    if (1.0 + gamma).abs() >= policy.epsilon_sing {
        return Ok(1.0);
    }
    let low = 1.0 - policy.theta_bar;
    let high = 1.0 + policy.theta_bar;
    let (theta, ratio) = if (1.0 + high * gamma).abs() > (1.0 + low * gamma).abs() {
        (high, (1.0 + high * gamma).abs())
    } else {
        (low, (1.0 + low * gamma).abs())
    };
    if ratio >= policy.epsilon_sing {
        Ok(theta)
    } else {
        Err(UpdateError::UpdateSkipped { gamma })
    }
}
