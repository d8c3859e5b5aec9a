//! Boundary angle `θ(E)` for which a prescribed `E < 0` is an eigenvalue.
//!
//! Past the last bump every solution is `A e^{κx} + B e^{−κx}` with
//! `κ = √(−E)`. The growing coefficient is linear in the boundary data,
//! `A(θ) ∝ a₊ cos θ + a₋ sin θ`, so the decaying solution has
//! `θ = atan2(−a₊, a₋)`.
//!
//! `(a₊, a₋)` is obtained by sweeping the covector `(1, 1/κ)` backward
//! through normalized propagators, which never overflows even across gaps
//! of length `exp(n^n)`. The residual is recomputed by forward log-domain
//! propagation, only available while `κL` fits in an `f64`.

use serde::{Deserialize, Serialize};

use super::{BoundaryCondition, SpectralError};
use crate::logspace::{log_add, LogMat2, LogReal, LogVec2};
use crate::potential::SparsePotential;
use crate::transfer::{bump_propagator, default_steps, transfer_matrix, TransferError};

/// The decay window spans a drop of `e^{−κY} = 1e−6`.
const DECAY_WINDOW_DROP: f64 = 1e-6;
const DECAY_SAMPLES: usize = 64;
/// Tolerance on `|sin(φ − θ)|` between the vector and covector sweeps.
const ANGLE_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub energy: f64,
    pub boundary: BoundaryCondition,
    /// Normalized `(a₊, a₋)` from the backward sweep.
    pub growth_coeffs: [f64; 2],
    /// `ln(|a(θ)| / |(a₊, a₋)|)` from forward propagation, when representable.
    pub log_relative_residual: Option<f64>,
    /// The decaying mode swept back to `x = 0` lands on `θ`, and `|f|`
    /// decreases across the decay window past the last bump.
    pub decay_witness: bool,
}

fn normalize_row(w: [f64; 2]) -> [f64; 2] {
    let s = w[0].abs().max(w[1].abs());
    if s == 0.0 || !s.is_finite() {
        w
    } else {
        [w[0] / s, w[1] / s]
    }
}

fn row_times(w: [f64; 2], m: [[f64; 2]; 2]) -> [f64; 2] {
    normalize_row([
        w[0] * m[0][0] + w[1] * m[1][0],
        w[0] * m[0][1] + w[1] * m[1][1],
    ])
}

/// Entries divided by the largest one; tiny entries underflow to zero.
fn normalized_entries(m: &LogMat2) -> [[f64; 2]; 2] {
    let top = m.max_logmag();
    let shift = LogReal::from_log(-top);
    let mut out = [[0.0; 2]; 2];
    for (i, row) in m.0.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            out[i][j] = (*x * shift).to_real();
        }
    }
    out
}

/// Free propagator at `E = −κ²` divided by `cosh(κL)`.
fn normalized_free(kappa: f64, len: LogReal) -> [[f64; 2]; 2] {
    let t = (LogReal::from_real(kappa) * len).to_real().tanh();
    [[1.0, t / kappa], [kappa * t, 1.0]]
}

/// Backward sweep returning normalized `(a₊, a₋)`.
pub fn growth_coefficients(
    potential: &SparsePotential,
    energy: f64,
    n_max: usize,
    steps: Option<usize>,
) -> Result<[f64; 2], SpectralError> {
    let kappa = (-energy).sqrt();
    let mut w = normalize_row([1.0, 1.0 / kappa]);
    for m in (0..n_max).rev() {
        let bump = &potential.bumps()[m];
        let r = bump_propagator(bump, energy, steps.unwrap_or_else(|| default_steps(bump, energy)))?;
        w = row_times(w, normalized_entries(&r.matrix));
        w = row_times(w, normalized_free(kappa, potential.gap(m).expect("gap")));
    }
    if w[0] == 0.0 && w[1] == 0.0 || !(w[0].is_finite() && w[1].is_finite()) {
        return Err(SpectralError::DegenerateShooting);
    }
    Ok(w)
}

/// Finds `θ(E)` for the potential truncated to `n_max` bumps.
pub fn shoot_negative_eigenvalue(
    potential: &SparsePotential,
    energy: f64,
    n_max: usize,
    steps: Option<usize>,
) -> Result<ShootResult, SpectralError> {
    if energy.is_nan() || energy >= 0.0 {
        return Err(SpectralError::NonNegativeEnergy(energy));
    }
    if n_max > potential.len() {
        return Err(TransferError::TooManyBumps {
            requested: n_max,
            available: potential.len(),
        }
        .into());
    }
    let [a_plus, a_minus] = growth_coefficients(potential, energy, n_max, steps)?;
    let boundary = BoundaryCondition::new((-a_plus).atan2(a_minus));

    let log_relative_residual =
        match transfer_matrix(potential, energy, n_max, steps) {
            Ok(t) => Some(forward_residual(&t.value, energy, boundary.theta())),
            Err(TransferError::Overflow(_)) => None,
            Err(e) => return Err(e.into()),
        };
    let decay_witness = decay_witness(potential, energy, n_max, steps, boundary.theta())?;

    Ok(ShootResult {
        energy,
        boundary,
        growth_coeffs: [a_plus, a_minus],
        log_relative_residual,
        decay_witness,
    })
}

/// Relative growing-mode residual `ln(|a(θ)| / |(a₊, a₋)|)` from the forward matrix.
fn forward_residual(t: &LogMat2, energy: f64, theta: f64) -> f64 {
    let inv_k = LogReal::from_real(1.0 / (-energy).sqrt());
    let m = &t.0;
    let a_plus = log_add(m[0][0], m[1][0] * inv_k).value;
    let a_minus = log_add(m[0][1], m[1][1] * inv_k).value;
    let (s, c) = theta.sin_cos();
    let a_theta = log_add(a_plus * LogReal::from_real(c), a_minus * LogReal::from_real(s)).value;
    a_theta.logmag() - LogVec2::new(a_plus, a_minus).norm().logmag()
}

fn inverse_times(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    normalize_row([m[1][1] * v[0] - m[0][1] * v[1], -m[1][0] * v[0] + m[0][0] * v[1]])
}

/// Sweeps the decaying mode `(1, −κ)` backward as a vector and checks that
/// its boundary angle agrees with `θ` and that `|f|` falls across the decay
/// window past the last bump.
///
/// A forward solve cannot serve here: any `θ` rounded to an `f64` carries a
/// growing component of relative size `ε e^{2κL}`, which swamps the decaying
/// mode once the gaps are long.
fn decay_witness(
    potential: &SparsePotential,
    energy: f64,
    n_max: usize,
    steps: Option<usize>,
    theta: f64,
) -> Result<bool, SpectralError> {
    let kappa = (-energy).sqrt();
    let window = -DECAY_WINDOW_DROP.ln() / kappa;
    let mut prev = f64::INFINITY;
    for i in 0..=DECAY_SAMPLES {
        let y = kappa * window * i as f64 / DECAY_SAMPLES as f64;
        let f = (y.cosh() - y.sinh()).abs();
        if f.is_nan() || f >= prev {
            return Ok(false);
        }
        prev = f;
    }

    let mut v = normalize_row([1.0, -kappa]);
    for m in (0..n_max).rev() {
        let bump = &potential.bumps()[m];
        let r = bump_propagator(bump, energy, steps.unwrap_or_else(|| default_steps(bump, energy)))?;
        v = inverse_times(normalized_entries(&r.matrix), v);
        v = inverse_times(normalized_free(kappa, potential.gap(m).expect("gap")), v);
    }
    let phi = v[1].atan2(v[0]);
    Ok((phi - theta).sin().abs() < ANGLE_AGREEMENT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{example_potential, Bump};
    use approx::assert_relative_eq;

    #[test]
    fn free_case_is_pure_decay() {
        let p = SparsePotential::free();
        for kappa in [0.1, 1.0, 3.0] {
            let r = shoot_negative_eigenvalue(&p, -kappa * kappa, 0, None).unwrap();
            assert_relative_eq!(r.boundary.theta().tan(), -kappa, max_relative = 1e-14);
            assert!(r.decay_witness);
        }
        let r = shoot_negative_eigenvalue(&p, -1.0, 0, None).unwrap();
        assert_relative_eq!(r.boundary.theta(), -std::f64::consts::FRAC_PI_4, max_relative = 1e-15);
    }

    #[test]
    fn example_two_bumps_residual() {
        let p = example_potential(2).unwrap();
        let r = shoot_negative_eigenvalue(&p, -1.0, 2, None).unwrap();
        let res = r.log_relative_residual.unwrap();
        assert!(res < 1e-8f64.ln(), "residual exp({res})");
        assert!(r.decay_witness);
    }

    #[test]
    fn long_gaps_fall_back_to_backward_sweep() {
        let p = example_potential(5).unwrap();
        let r = shoot_negative_eigenvalue(&p, -1.0, 5, None).unwrap();
        assert!(r.boundary.theta().is_finite());
        assert!(r.log_relative_residual.is_none());
        assert!(r.decay_witness);
    }

    #[test]
    fn rejects_nonnegative_energy() {
        let p = SparsePotential::free();
        assert!(matches!(
            shoot_negative_eigenvalue(&p, 0.0, 0, None),
            Err(SpectralError::NonNegativeEnergy(_))
        ));
        let one = SparsePotential::new("b", vec![Bump::constant(5.0, 0.5, 1.0).unwrap()]).unwrap();
        assert!(shoot_negative_eigenvalue(&one, -0.25, 2, None).is_err());
    }
}
