//! Solution propagation for `−f'' + V f = E f`.
//!
//! Data `(f, f')` is carried across free gaps by exact propagators and
//! across bumps either by the exact constant-height closed form or by a
//! fixed-step classical RK4 integrator. All cross-gap products are formed in
//! the log domain so gaps of length `exp(n^n)` can be traversed.
//!
//! With `c_n = (f, f')` at the left end of gap `J_n` and `d_n` the same data
//! at the left end of bump `I_n`, the recursion is
//! `d_n = W_{n−1} c_{n−1}`, `c_n = R_n d_n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::{log_add, log_sum, Checked, LogMat2, LogReal, LogVec2};
use crate::mat2::{Mat2, Vec2};
use crate::potential::{Bump, Profile, SparsePotential};

/// Smallest accepted RK4 step count per bump.
pub const MIN_STEPS: usize = 16;

/// Arguments `y` above which `cosh y`, `sinh y` are formed from logs.
const LOG_FORM_CUTOFF: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("step count {0} is below the minimum of {MIN_STEPS}")]
    TooFewSteps(usize),
    #[error("non-finite value while propagating: {0}")]
    NonFinite(&'static str),
    #[error("exponent overflow: growth factor exp({0}) exceeds the extended range")]
    Overflow(f64),
    #[error("requested {requested} bumps but the potential has {available}")]
    TooManyBumps { requested: usize, available: usize },
    #[error("variation-of-parameters coordinates are defined at E = 0, got E = {0}")]
    NonzeroEnergy(f64),
}

/// Transfer matrix at a fixed energy, mapping `(f, f')` across an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorE {
    pub energy: f64,
    pub matrix: LogMat2,
}

impl PropagatorE {
    pub fn det(&self) -> Checked<LogReal> {
        self.matrix.det()
    }

    /// `f64` view, if every entry is finite.
    pub fn to_mat2(&self) -> Option<Mat2> {
        let m = Mat2::from_rows(self.matrix.to_reals());
        m.is_finite().then_some(m)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &PropagatorE) -> Checked<PropagatorE> {
        self.matrix.mul(&first.matrix).map(|matrix| PropagatorE {
            energy: self.energy,
            matrix,
        })
    }
}

/// Exact propagator of `f'' = q f` over an interval of length `len`.
pub fn uniform_propagator(q: f64, len: LogReal) -> Result<LogMat2, TransferError> {
    if !q.is_finite() {
        return Err(TransferError::NonFinite("potential minus energy"));
    }
    if q == 0.0 {
        return Ok(LogMat2([
            [LogReal::ONE, len],
            [LogReal::ZERO, LogReal::ONE],
        ]));
    }
    let k = q.abs().sqrt();
    let y = (LogReal::from_real(k) * len).to_real();
    if !y.is_finite() {
        return Err(TransferError::Overflow(len.logmag() + k.ln()));
    }
    if q < 0.0 {
        let (s, c) = y.sin_cos();
        return Ok(LogMat2::from_reals([[c, s / k], [-k * s, c]]));
    }
    if y < LOG_FORM_CUTOFF {
        let (c, s) = (y.cosh(), y.sinh());
        return Ok(LogMat2::from_reals([[c, s / k], [k * s, c]]));
    }
    let tail = (-2.0 * y).exp();
    let ln_cosh = y - std::f64::consts::LN_2 + tail.ln_1p();
    let ln_sinh = y - std::f64::consts::LN_2 + (-tail).ln_1p();
    let ln_k = k.ln();
    Ok(LogMat2([
        [LogReal::from_log(ln_cosh), LogReal::from_log(ln_sinh - ln_k)],
        [LogReal::from_log(ln_sinh + ln_k), LogReal::from_log(ln_cosh)],
    ]))
}

/// Propagator across a free gap of length `len` at energy `energy`.
///
/// `E = 0` gives the shear `[[1, L], [0, 1]]`, `E < 0` the hyperbolic and
/// `E > 0` the trigonometric form. For `E > 0` and `kL` beyond about
/// `1e15` the phase carries no significant digits.
pub fn free_propagator(len: LogReal, energy: f64) -> Result<PropagatorE, TransferError> {
    Ok(PropagatorE {
        energy,
        matrix: uniform_propagator(-energy, len)?,
    })
}

/// `max(64, ceil(800·α·√(h + |E| + 1)))`.
pub fn default_steps(bump: &Bump, energy: f64) -> usize {
    let scale = (bump.height_bound() + energy.abs() + 1.0).sqrt();
    let n = (800.0 * bump.half_width() * scale).ceil();
    (n as usize).max(64)
}

fn check_steps(steps: usize) -> Result<(), TransferError> {
    if steps < MIN_STEPS {
        Err(TransferError::TooFewSteps(steps))
    } else {
        Ok(())
    }
}

/// Splits `steps` across the profile pieces so no RK4 step straddles a jump.
fn piece_steps(bump: &Bump, steps: usize) -> Vec<(f64, f64, f64, usize)> {
    let cuts = bump.breakpoints();
    let pieces = bump.profile().pieces();
    let per_piece = steps.div_ceil(pieces.len()).max(1);
    pieces
        .iter()
        .enumerate()
        .map(|(i, &v)| (cuts[i], cuts[i + 1], v, per_piece))
        .collect()
}

fn rk4_step(y: Mat2, x: f64, h: f64, rhs: &impl Fn(f64, Mat2) -> Mat2) -> Mat2 {
    let add = |a: Mat2, b: Mat2, s: f64| {
        Mat2::new(
            a.a11 + s * b.a11,
            a.a12 + s * b.a12,
            a.a21 + s * b.a21,
            a.a22 + s * b.a22,
        )
    };
    let k1 = rhs(x, y);
    let k2 = rhs(x + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = rhs(x + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = rhs(x + h, add(y, k3, h));
    let mut out = y;
    for (k, w) in [(k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)] {
        out = add(out, k, h * w / 6.0);
    }
    out
}

/// RK4 solution of `Y' = [[0, 1], [V − E, 0]] Y`, `Y(left) = I`, across the
/// bump. Columns of the result are `(φ, φ')` and `(ψ, ψ')` at the right edge.
pub fn integrate_bump(bump: &Bump, energy: f64, steps: usize) -> Result<Mat2, TransferError> {
    check_steps(steps)?;
    let mut y = Mat2::IDENTITY;
    for (a, b, v, n) in piece_steps(bump, steps) {
        let q = v - energy;
        let rhs = |_x: f64, y: Mat2| Mat2::new(y.a21, y.a22, q * y.a11, q * y.a12);
        let h = (b - a) / n as f64;
        for i in 0..n {
            y = rk4_step(y, a + i as f64 * h, h, &rhs);
        }
    }
    if !y.is_finite() {
        return Err(TransferError::NonFinite("bump integration"));
    }
    Ok(y)
}

/// Exact constant-height propagator `R` across a bump of height `h`.
pub fn constant_bump_closed_form(height: f64, half_width: f64, energy: f64) -> Result<Mat2, TransferError> {
    let m = uniform_propagator(height - energy, LogReal::from_real(2.0 * half_width))?;
    let m = Mat2::from_rows(m.to_reals());
    if m.is_finite() {
        Ok(m)
    } else {
        Err(TransferError::NonFinite("closed-form bump propagator"))
    }
}

/// Bump propagator `R_m`: closed form for constant profiles, RK4 otherwise.
pub fn bump_propagator(bump: &Bump, energy: f64, steps: usize) -> Result<PropagatorE, TransferError> {
    check_steps(steps)?;
    let matrix = match bump.profile() {
        Profile::Constant(h) => {
            uniform_propagator(h - energy, LogReal::from_real(bump.width()))?
        }
        Profile::Samples(_) => LogMat2::from_reals(integrate_bump(bump, energy, steps)?.rows()),
    };
    Ok(PropagatorE { energy, matrix })
}

/// One sample of the variation-of-parameters coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VopSample {
    /// Offset from the bump's left edge.
    pub offset: f64,
    pub u: Vec2,
    pub v: Vec2,
}

impl VopSample {
    pub fn wronskian(&self) -> f64 {
        self.u.v1 * self.v.v2 - self.v.v1 * self.u.v2
    }

    /// `[[u⁽¹⁾, v⁽¹⁾], [u⁽²⁾, v⁽²⁾]]`.
    pub fn coordinate_matrix(&self) -> Mat2 {
        Mat2::from_columns(self.u, self.v)
    }
}

/// Coordinates `u, v` of the bump basis `φ, ψ` in the free basis
/// `{1, y}` (`y` = offset), integrated from `u = (1, 0)`, `v = (0, 1)`:
///
/// `d/dy w = −V [[y, y²], [−1, −y]] w`.
///
/// Returns the initial sample plus one per RK4 step. At the right edge
/// `R = shear(2α) · [u v]`.
pub fn vop_coordinates(bump: &Bump, energy: f64, steps: usize) -> Result<Vec<VopSample>, TransferError> {
    if energy != 0.0 {
        return Err(TransferError::NonzeroEnergy(energy));
    }
    check_steps(steps)?;
    let mut y = Mat2::IDENTITY;
    let mut out = vec![VopSample {
        offset: 0.0,
        u: Vec2::new(1.0, 0.0),
        v: Vec2::new(0.0, 1.0),
    }];
    for (a, b, v, n) in piece_steps(bump, steps) {
        let rhs = |x: f64, w: Mat2| {
            let g = Mat2::new(x, x * x, -1.0, -x);
            (g * w).scaled(-v)
        };
        let h = (b - a) / n as f64;
        for i in 0..n {
            let x = a + i as f64 * h;
            y = rk4_step(y, x, h, &rhs);
            out.push(VopSample {
                offset: x + h,
                u: Vec2::new(y.a11, y.a21),
                v: Vec2::new(y.a12, y.a22),
            });
        }
    }
    if !y.is_finite() {
        return Err(TransferError::NonFinite("vop integration"));
    }
    Ok(out)
}

/// Solution data after `interval_index` bumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationState {
    pub theta: f64,
    pub energy: f64,
    pub interval_index: usize,
    /// `c_n`: `(f, f')` at the left end of gap `J_n`.
    pub coeffs: LogVec2,
    /// `d_n`: `(f, f')` at the left end of bump `I_n` (absent for `n = 0`).
    pub entry: Option<LogVec2>,
    /// Any cancellation so far.
    pub cancelled: bool,
}

/// Runs `c_n = R_n W_{n−1} c_{n−1}` from `c_0 = (cos θ, sin θ)` through
/// `n_max` bumps. `steps` overrides the per-bump RK4 step count for sampled
/// profiles.
pub fn propagate(
    potential: &SparsePotential,
    theta: f64,
    energy: f64,
    n_max: usize,
    steps: Option<usize>,
) -> Result<Vec<PropagationState>, TransferError> {
    if n_max > potential.len() {
        return Err(TransferError::TooManyBumps {
            requested: n_max,
            available: potential.len(),
        });
    }
    let (s, c) = theta.sin_cos();
    let mut state = PropagationState {
        theta,
        energy,
        interval_index: 0,
        coeffs: LogVec2::from_reals(c, s),
        entry: None,
        cancelled: false,
    };
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(state);
    for (m, bump) in potential.bumps().iter().take(n_max).enumerate() {
        let gap = potential.gap(m).expect("gap for every bump");
        let w = free_propagator(gap, energy)?;
        let r = bump_propagator(bump, energy, steps.unwrap_or_else(|| default_steps(bump, energy)))?;
        let entry = w.matrix.apply(state.coeffs);
        let next = r.matrix.apply(entry.value);
        state = PropagationState {
            theta,
            energy,
            interval_index: m + 1,
            coeffs: next.value,
            entry: Some(entry.value),
            cancelled: state.cancelled || entry.cancelled || next.cancelled,
        };
        out.push(state);
    }
    Ok(out)
}

/// Full transfer matrix from `x = 0` to the right edge of bump `n_max`.
pub fn transfer_matrix(
    potential: &SparsePotential,
    energy: f64,
    n_max: usize,
    steps: Option<usize>,
) -> Result<Checked<LogMat2>, TransferError> {
    if n_max > potential.len() {
        return Err(TransferError::TooManyBumps {
            requested: n_max,
            available: potential.len(),
        });
    }
    let mut acc = Checked::clean(LogMat2::identity());
    for (m, bump) in potential.bumps().iter().take(n_max).enumerate() {
        let w = free_propagator(potential.gap(m).expect("gap for every bump"), energy)?;
        let r = bump_propagator(bump, energy, steps.unwrap_or_else(|| default_steps(bump, energy)))?;
        acc = acc
            .and_then(|t| w.matrix.mul(&t))
            .and_then(|t| r.matrix.mul(&t));
    }
    Ok(acc)
}

/// `∫_0^L (c₁ + c₂ x)² dx = c₁²L + c₁c₂L² + c₂²L³/3`, evaluated in logs.
pub fn gap_norm_exact(len: LogReal, c: LogVec2) -> Checked<LogReal> {
    let [c1, c2] = c.0;
    let third = LogReal::from_real(1.0 / 3.0);
    log_sum([
        c1.powi(2) * len,
        c1 * c2 * len.powi(2),
        c2.powi(2) * len.powi(3) * third,
    ])
}

/// Natural log of `|c_n|`.
pub fn log_norm(c: LogVec2) -> f64 {
    log_add(c.0[0].powi(2), c.0[1].powi(2)).value.logmag() * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rel_dev(a: &Mat2, b: &Mat2) -> f64 {
        a.max_diff(b) / b.max_abs()
    }

    #[test]
    fn free_examples() {
        let w = free_propagator(LogReal::from_real(2.0), 0.0).unwrap();
        assert_eq!(w.to_mat2().unwrap(), Mat2::shear(2.0));

        let h = free_propagator(LogReal::from_real(1.0), -1.0).unwrap().to_mat2().unwrap();
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        assert_relative_eq!(h.a11, 1.543_080_634_815_243_7, max_relative = 1e-15);
        assert_relative_eq!(h.a12, s, max_relative = 1e-15);
        assert_relative_eq!(h.a21, s, max_relative = 1e-15);
        assert_relative_eq!(h.a22, c, max_relative = 1e-15);

        let t = free_propagator(LogReal::from_real(0.7), 4.0).unwrap().to_mat2().unwrap();
        assert_relative_eq!(t.a11, 1.4f64.cos());
        assert_relative_eq!(t.a12, 1.4f64.sin() / 2.0);
        assert_relative_eq!(t.a21, -2.0 * 1.4f64.sin());
        assert_relative_eq!(t.det(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn shear_group_law() {
        for (a, b) in [(0.5, 2.0), (3.0, 7.25), (1e-3, 1e3)] {
            let wa = free_propagator(LogReal::from_real(a), 0.0).unwrap();
            let wb = free_propagator(LogReal::from_real(b), 0.0).unwrap();
            let wab = free_propagator(LogReal::from_real(a + b), 0.0).unwrap();
            let prod = wa.compose(&wb).value.to_mat2().unwrap();
            assert!(prod.max_diff(&wab.to_mat2().unwrap()) < 1e-12 * (a + b));
        }
    }

    #[test]
    fn astronomically_long_negative_energy_gap() {
        let len = LogReal::from_log(256.0);
        let w = free_propagator(len, -1.0).unwrap();
        let expected = len.to_real() - std::f64::consts::LN_2;
        assert_relative_eq!(w.matrix.0[0][0].logmag(), expected, max_relative = 1e-15);
        assert_relative_eq!(w.matrix.0[1][0].logmag(), expected, max_relative = 1e-15);
        assert!(matches!(
            free_propagator(LogReal::from_log(800.0), -1.0),
            Err(TransferError::Overflow(_))
        ));
        // E = 0 never overflows.
        assert!(free_propagator(LogReal::from_log(3125.0), 0.0).is_ok());
    }

    #[test]
    fn bump_examples() {
        let flat = Bump::constant(10.0, 0.5, 0.0).unwrap();
        let r = bump_propagator(&flat, 0.0, 64).unwrap().to_mat2().unwrap();
        assert_eq!(r, Mat2::shear(1.0));

        let unit = Bump::constant(10.0, 0.5, 1.0).unwrap();
        let exact = Mat2::new(1f64.cosh(), 1f64.sinh(), 1f64.sinh(), 1f64.cosh());
        let closed = bump_propagator(&unit, 0.0, 64).unwrap().to_mat2().unwrap();
        assert!(rel_dev(&closed, &exact) < 1e-15);
        let rk = integrate_bump(&unit, 0.0, default_steps(&unit, 0.0)).unwrap();
        assert!(rel_dev(&rk, &exact) < 1e-10);
        assert!((rk.det() - 1.0).abs() < 1e-10);

        assert_eq!(bump_propagator(&unit, 0.0, 8), Err(TransferError::TooFewSteps(8)));
    }

    #[test]
    fn richardson_order_is_four() {
        for (h, e, alpha) in [(1.0, 0.0, 0.5), (5.0, -2.0, 1.0), (0.0, 9.0, 1.0)] {
            let b = Bump::constant(10.0, alpha, h).unwrap();
            let exact = constant_bump_closed_form(h, alpha, e).unwrap();
            let err = |n| integrate_bump(&b, e, n).unwrap().max_diff(&exact);
            let (e1, e2) = (err(32), err(64));
            assert!(e1 / e2 >= 8.0, "h={h} E={e}: ratio {}", e1 / e2);
            let order = (e1 / e2).log2();
            assert!((3.7..=4.3).contains(&order), "order {order}");
        }
    }

    #[test]
    fn sampled_profile_matches_product_of_pieces() {
        let b = Bump::new(
            LogReal::from_real(4.0),
            0.5,
            2.0,
            Profile::Samples(vec![2.0, -1.0]),
        )
        .unwrap();
        let rk = integrate_bump(&b, -0.5, 4000).unwrap();
        let first = constant_bump_closed_form(2.0, 0.25, -0.5).unwrap();
        let second = constant_bump_closed_form(-1.0, 0.25, -0.5).unwrap();
        let exact = second * first;
        assert!(rel_dev(&rk, &exact) < 1e-12);
    }

    #[test]
    fn vop_examples() {
        let flat = Bump::constant(3.0, 0.5, 0.0).unwrap();
        for s in vop_coordinates(&flat, 0.0, 32).unwrap() {
            assert_eq!(s.u, Vec2::new(1.0, 0.0));
            assert_eq!(s.v, Vec2::new(0.0, 1.0));
        }
        let unit = Bump::constant(3.0, 0.5, 1.0).unwrap();
        let steps = default_steps(&unit, 0.0);
        let traj = vop_coordinates(&unit, 0.0, steps).unwrap();
        assert_eq!(traj.len(), steps + 1);
        for s in &traj {
            assert!((s.wronskian() - 1.0).abs() < 1e-10);
        }
        let last = traj.last().unwrap();
        assert_relative_eq!(last.offset, 1.0, epsilon = 1e-12);
        let factored = Mat2::shear(1.0) * last.coordinate_matrix();
        let direct = bump_propagator(&unit, 0.0, steps).unwrap().to_mat2().unwrap();
        assert!(factored.max_diff(&direct) < 1e-9);

        assert_eq!(
            vop_coordinates(&unit, 0.1, steps),
            Err(TransferError::NonzeroEnergy(0.1))
        );
    }

    #[test]
    fn zero_height_propagation_is_a_shear() {
        let bumps = vec![
            Bump::constant(3.0, 0.5, 0.0).unwrap(),
            Bump::constant(9.0, 0.25, 0.0).unwrap(),
        ];
        let p = SparsePotential::new("flat", bumps).unwrap();
        let theta = 0.3;
        let states = propagate(&p, theta, 0.0, 2, None).unwrap();
        let total = 9.25;
        let expected = Mat2::shear(total).apply(Vec2::unit(theta));
        let got = states[2].coeffs.to_reals();
        assert_relative_eq!(got[0], expected.v1, max_relative = 1e-13);
        assert_relative_eq!(got[1], expected.v2, max_relative = 1e-13);
        let c0 = states[0].coeffs.to_reals();
        assert_relative_eq!(c0[0], theta.cos(), max_relative = 1e-15);
        assert_relative_eq!(c0[1], theta.sin(), max_relative = 1e-15);
        let d1 = states[1].entry.unwrap().to_reals();
        assert_relative_eq!(d1[0], theta.cos() + 2.5 * theta.sin(), max_relative = 1e-14);
    }

    #[test]
    fn propagate_rejects_too_many() {
        let p = crate::potential::example_potential(2).unwrap();
        assert!(matches!(
            propagate(&p, 0.0, 0.0, 3, None),
            Err(TransferError::TooManyBumps { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn gap_norm_examples() {
        let one = LogReal::ONE;
        let v = gap_norm_exact(one, LogVec2::from_reals(1.0, 0.0));
        assert_relative_eq!(v.value.to_real(), 1.0);
        let v = gap_norm_exact(one, LogVec2::from_reals(0.0, 1.0));
        assert_relative_eq!(v.value.to_real(), 1.0 / 3.0, max_relative = 1e-15);
        let v = gap_norm_exact(LogReal::from_real(2.0), LogVec2::from_reals(1.0, -1.0));
        // ∫_0^2 (1 − x)² dx = 2/3
        assert_relative_eq!(v.value.to_real(), 2.0 / 3.0, max_relative = 1e-14);
    }
}
