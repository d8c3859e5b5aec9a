//! Dense finite-difference eigenproblem for `H_θ` on `[0, X]` with a
//! Dirichlet wall at `X`.
//!
//! Second-order central differences; the Robin condition `f'(0) = tan θ f(0)`
//! enters through a ghost node, and the first row is symmetrized by a
//! diagonal similarity. Eigenvalues come from Sturm-sequence bisection on the
//! resulting symmetric tridiagonal matrix. Nothing here touches the transfer
//! matrices, so it serves as independent ground truth for shooting results.

use super::BoundaryCondition;
use crate::potential::SparsePotential;

/// `e^{−κ(X − last edge)}` at the truncation point.
pub const TRUNCATION_DECAY: f64 = 1e-10;
/// Midpoint samples per cell for the cell-averaged potential.
const CELL_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseProblem {
    pub extent: f64,
    pub spacing: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn cell_average(potential: &SparsePotential, a: f64, b: f64) -> f64 {
    let h = (b - a) / CELL_SAMPLES as f64;
    (0..CELL_SAMPLES)
        .map(|i| potential.evaluate_real(a + (i as f64 + 0.5) * h))
        .sum::<f64>()
        / CELL_SAMPLES as f64
}

impl DenseProblem {
    pub fn new(potential: &SparsePotential, bc: BoundaryCondition, extent: f64, intervals: usize) -> Self {
        let n = intervals.max(4);
        let h = extent / n as f64;
        let inv_h2 = 1.0 / (h * h);
        let v = |i: usize| {
            let x = i as f64 * h;
            cell_average(potential, (x - 0.5 * h).max(0.0), (x + 0.5 * h).min(extent))
        };
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n);
        if bc.is_dirichlet() {
            for i in 1..n {
                diag.push(2.0 * inv_h2 + v(i));
            }
            off.resize(diag.len() - 1, -inv_h2);
        } else {
            let t = bc.theta().tan();
            diag.push((2.0 + 2.0 * h * t) * inv_h2 + v(0));
            off.push(-std::f64::consts::SQRT_2 * inv_h2);
            for i in 1..n {
                diag.push(2.0 * inv_h2 + v(i));
            }
            off.resize(diag.len() - 1, -inv_h2);
        }
        DenseProblem {
            extent,
            spacing: h,
            diag,
            off,
        }
    }

    /// Truncates where a decaying mode at `energy < 0` has dropped by
    /// [`TRUNCATION_DECAY`] past the last bump.
    pub fn for_energy(
        potential: &SparsePotential,
        bc: BoundaryCondition,
        energy: f64,
        intervals: usize,
    ) -> Self {
        let last_edge = potential
            .bumps()
            .last()
            .map(|b| b.right_edge().to_real())
            .unwrap_or(0.0);
        let kappa = (-energy).sqrt();
        let extent = last_edge - TRUNCATION_DECAY.ln() / kappa;
        DenseProblem::new(potential, bc, extent, intervals)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] / q };
            q = self.diag[i] - lambda - coupling;
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + lambda.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn negative_count(&self) -> usize {
        self.count_below(0.0)
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * lo.abs().max(hi.abs()).max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}
