//! Real 2×2 matrices and the closed-form singular-value bounds used to
//! control transfer-matrix growth.
//!
//! `low(M)` is the smallest singular value, i.e. the largest `c` with
//! `|Mu| >= c|u|` for all `u`.

use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of `det M` from 1 in [`lower_bound_unit_det`].
pub const UNIT_DET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Mat2Error {
    #[error("determinant {det} is not 1 (tolerance {UNIT_DET_TOLERANCE})")]
    NotUnitDeterminant { det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub v1: f64,
    pub v2: f64,
}

impl Vec2 {
    pub const fn new(v1: f64, v2: f64) -> Self {
        Vec2 { v1, v2 }
    }

    pub fn norm(self) -> f64 {
        self.v1.hypot(self.v2)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.v1 * other.v1 + self.v2 * other.v2
    }

    /// Unit vector at `angle` radians.
    pub fn unit(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Mat2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn from_columns(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.v1, c2.v1, c1.v2, c2.v2)
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// `[[1, len], [0, 1]]`, the zero-energy propagator across a free interval.
    pub fn shear(len: f64) -> Self {
        Mat2::new(1.0, len, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.a11 * v.v1 + self.a12 * v.v2,
            self.a21 * v.v1 + self.a22 * v.v2,
        )
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22
    }

    pub fn max_abs(&self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    /// Max-entry distance.
    pub fn max_diff(&self, other: &Mat2) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a21 - other.a21).abs())
            .max((self.a22 - other.a22).abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * r.a11 + self.a12 * r.a21,
            self.a11 * r.a12 + self.a12 * r.a22,
            self.a21 * r.a11 + self.a22 * r.a21,
            self.a21 * r.a12 + self.a22 * r.a22,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.apply(v)
    }
}

/// Eigenvalues `(smaller, larger)` of the symmetric matrix `[[p, q], [q, r]]`.
///
/// The larger root is taken from the quadratic formula; the smaller one as
/// `det / larger`, which avoids cancellation when the matrix is nearly
/// singular.
pub fn symmetric_eigenvalues(p: f64, q: f64, r: f64) -> (f64, f64) {
    let half_trace = 0.5 * (p + r);
    let half_gap = (0.5 * (p - r)).hypot(q);
    let large = half_trace + half_gap.copysign(half_trace);
    let det = p * r - q * q;
    if large == 0.0 {
        return (0.0, 0.0);
    }
    let other = det / large;
    if other <= large {
        (other, large)
    } else {
        (large, other)
    }
}

/// Smallest singular value of `m`.
///
/// Works on `m / max|m_ij|` so `MᵀM` cannot overflow. With `t = tr(MᵀM)` and
/// `d = det(M)²`, the root `ξ₊ = (t + √((t−2√d)(t+2√d)))/2` is formed first
/// and `ξ₋ = d/ξ₊`.
pub fn low(m: &Mat2) -> f64 {
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return 0.0;
    }
    let n = m.scaled(1.0 / scale);
    let t = n.frobenius_sq();
    let abs_det = n.det().abs();
    let disc = ((t - 2.0 * abs_det) * (t + 2.0 * abs_det)).max(0.0);
    let xi_plus = 0.5 * (t + disc.sqrt());
    let xi_minus = abs_det * abs_det / xi_plus;
    scale * xi_minus.max(0.0).sqrt()
}

/// Lower bound `1/√(L²+2)` on `low([[1, L], [0, 1]])`.
pub fn lower_bound_shear(len: f64) -> f64 {
    1.0 / (len * len + 2.0).sqrt()
}

/// Lower bound `1/‖M‖_F` on `low(M)` for a unit-determinant `M`.
pub fn lower_bound_unit_det(m: &Mat2) -> Result<f64, Mat2Error> {
    let det = m.det();
    if (det - 1.0).abs() > UNIT_DET_TOLERANCE {
        return Err(Mat2Error::NotUnitDeterminant { det });
    }
    Ok(1.0 / m.frobenius_sq().sqrt())
}

/// `sup_|w|=1 |⟨w, [[ab, b²], [−a², −ab]] w⟩| = (a² + b²)/2`.
pub fn quadratic_sup(a: f64, b: f64) -> f64 {
    0.5 * (a * a + b * b)
}

/// The gap Gram matrix `[[L, L²/2], [L²/2, L³/3]]` of `{1, x}` on `[0, L]`.
pub fn gap_gram(len: f64) -> Mat2 {
    let l2 = len * len;
    Mat2::new(len, 0.5 * l2, 0.5 * l2, l2 * len / 3.0)
}

/// Smaller eigenvalue of [`gap_gram`]: `λ₋ = (T − √(T² − L⁴/3))/2` with
/// `T = L + L³/3`, evaluated as `(L⁴/12)/λ₊`.
pub fn gram_smallest_eig(len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let trace = len + len.powi(3) / 3.0;
    let det = len.powi(4) / 12.0;
    let lambda_plus = 0.5 * (trace + (trace * trace - 4.0 * det).max(0.0).sqrt());
    det / lambda_plus
}

/// Lower bound `L⁴ / (4(L³ + 3L))` on [`gram_smallest_eig`].
pub fn gram_eig_lower_bound(len: f64) -> f64 {
    len.powi(4) / (4.0 * (len.powi(3) + 3.0 * len))
}
