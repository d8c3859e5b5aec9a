//! Self-adjoint extensions `H_θ` with boundary condition
//! `f(0) sin θ − f'(0) cos θ = 0`, `θ ∈ (−π/2, π/2]`.
//!
//! * [`form`]: the boundary quadratic form `(f, H_θ f)`, the `f_λ` test
//!   family and the negative-form threshold;
//! * [`shoot`]: the boundary angle `θ(E)` that makes a given `E < 0` an
//!   eigenvalue;
//! * [`dense`]: a finite-difference eigenproblem used as independent ground
//!   truth for eigenvalue claims.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transfer::TransferError;

pub mod dense;
pub mod form;
pub mod shoot;

pub use dense::DenseProblem;
pub use form::{
    flambda, negative_form_threshold, quadratic_form, theta_scan, ScanConfig, ScanKind, ScanRow,
    ScanTable, ScanVerdict, TestFunction, Threshold,
};
pub use shoot::{shoot_negative_eigenvalue, ShootResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("boundary condition violated: f(0) sin θ − f'(0) cos θ = {0:e}")]
    BoundaryViolation(f64),
    #[error("test function does not vanish at the end of its grid (|f| = {0:e})")]
    SupportTouchesEnd(f64),
    #[error("grid must be strictly increasing with at least 3 points")]
    BadGrid,
    #[error("lambda must be >= 1/2, got {0}")]
    LambdaTooSmall(f64),
    #[error("grid_points must be >= {min}, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("theta {0} is outside [0, π/2], where the positivity argument applies")]
    ThetaOutOfRange(f64),
    #[error("potential has negative values; the positivity argument needs V >= 0")]
    NegativePotential,
    #[error("energy must be negative, got {0}")]
    NonNegativeEnergy(f64),
    #[error("growing-mode coefficients vanish identically")]
    DegenerateShooting,
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

/// A boundary angle normalized into `(−π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    theta: f64,
}

impl BoundaryCondition {
    /// Any real angle; `θ` and `θ + π` describe the same condition.
    pub fn new(theta: f64) -> Self {
        BoundaryCondition {
            theta: normalize_angle(theta),
        }
    }

    /// Robin condition `f'(0)/f(0) = −λ`.
    pub fn robin(lambda: f64) -> Self {
        BoundaryCondition::new((-lambda).atan())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `f(0) sin θ − f'(0) cos θ`.
    pub fn residual(&self, f0: f64, fp0: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        f0 * s - fp0 * c
    }

    pub fn is_dirichlet(&self) -> bool {
        (self.theta - FRAC_PI_2).abs() < 1e-15
    }
}

/// Maps any angle into `(−π/2, π/2]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t -= PI;
    }
    t
}
