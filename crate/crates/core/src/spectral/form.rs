//! The boundary quadratic form
//! `(f, H_θ f) = f(0) f'(0) + ∫ (f'² + V f²) dx`
//! for real test functions sampled on a grid, and the `f_λ` family
//! `f_λ(x) = exp(λ/(x − 1))` on `[0, 1)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoundaryCondition, SpectralError};
use crate::potential::SparsePotential;

/// Boundary relation tolerance, relative to `max(1, |f(0)|, |f'(0)|)`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Smallest grid accepted by [`flambda`].
pub const MIN_FLAMBDA_POINTS: usize = 256;
/// Values of `f_λ` below this are stored as zero.
const FLUSH: f64 = 1e-300;

/// Real test function sampled on a strictly increasing grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub xs: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
}

impl TestFunction {
    pub fn new(xs: Vec<f64>, f: Vec<f64>, fp: Vec<f64>) -> Result<Self, SpectralError> {
        let ok = xs.len() >= 3
            && xs.len() == f.len()
            && xs.len() == fp.len()
            && xs[0] == 0.0
            && xs.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(SpectralError::BadGrid);
        }
        Ok(TestFunction { xs, f, fp })
    }

    /// Samples `(f, f')` from closures on `xs`.
    pub fn from_fn(
        xs: Vec<f64>,
        f: impl Fn(f64) -> f64,
        fp: impl Fn(f64) -> f64,
    ) -> Result<Self, SpectralError> {
        let fv = xs.iter().map(|&x| f(x)).collect();
        let fpv = xs.iter().map(|&x| fp(x)).collect();
        TestFunction::new(xs, fv, fpv)
    }

    /// `(f(0), f'(0))`.
    pub fn boundary_data(&self) -> (f64, f64) {
        (self.f[0], self.fp[0])
    }

    /// Max deviation between `f` and `f(0) + ∫ f'` by the trapezoid rule.
    pub fn reconstruction_error(&self) -> f64 {
        let mut acc = self.f[0];
        let mut worst: f64 = 0.0;
        for i in 1..self.xs.len() {
            acc += 0.5 * (self.xs[i] - self.xs[i - 1]) * (self.fp[i] + self.fp[i - 1]);
            worst = worst.max((acc - self.f[i]).abs());
        }
        worst
    }
}

/// Composite Simpson rule on a possibly non-uniform grid. An odd number of
/// intervals closes with the three-point quadratic over the last interval.
pub fn simpson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 <= n {
        let h0 = xs[i + 1] - xs[i];
        let h1 = xs[i + 2] - xs[i + 1];
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * ys[i] + hs * hs / (h0 * h1) * ys[i + 1] + (2.0 - h0 / h1) * ys[i + 2]);
        i += 2;
    }
    if n % 2 == 1 {
        let h0 = xs[n - 1] - xs[n - 2];
        let h1 = xs[n] - xs[n - 1];
        total += ys[n] * (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1))
            + ys[n - 1] * (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0)
            - ys[n - 2] * h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    total
}

/// `f(0) f'(0) + ∫ (f'² + V f²)` by composite Simpson on the sample grid.
pub fn quadratic_form(
    potential: &SparsePotential,
    f: &TestFunction,
    bc: BoundaryCondition,
) -> Result<f64, SpectralError> {
    let (f0, fp0) = f.boundary_data();
    let scale = 1f64.max(f0.abs()).max(fp0.abs());
    let residual = bc.residual(f0, fp0);
    if residual.abs() > BOUNDARY_TOLERANCE * scale {
        return Err(SpectralError::BoundaryViolation(residual));
    }
    let last = f.f.len() - 1;
    let tail = f.f[last].abs().max(f.fp[last].abs());
    if tail > 1e-12 * scale {
        return Err(SpectralError::SupportTouchesEnd(tail));
    }
    let integrand: Vec<f64> = f
        .xs
        .iter()
        .zip(f.f.iter().zip(&f.fp))
        .map(|(&x, (&v, &d))| d * d + potential.evaluate_real(x) * v * v)
        .collect();
    Ok(f0 * fp0 + simpson(&f.xs, &integrand))
}

/// Samples `f_λ` and `f_λ' = −λ/(x − 1)² f_λ` on `[0, 1]`.
///
/// The mesh `x_i = 1 − (1 − i/N)²` is graded toward `x = 1`; the last point
/// is `x = 1` where both vanish.
pub fn flambda(lambda: f64, grid_points: usize) -> Result<TestFunction, SpectralError> {
    if lambda.is_nan() || lambda < 0.5 {
        return Err(SpectralError::LambdaTooSmall(lambda));
    }
    if grid_points < MIN_FLAMBDA_POINTS {
        return Err(SpectralError::TooFewPoints {
            min: MIN_FLAMBDA_POINTS,
            got: grid_points,
        });
    }
    let n = grid_points - 1;
    let xs: Vec<f64> = (0..=n)
        .map(|i| {
            let s = 1.0 - i as f64 / n as f64;
            1.0 - s * s
        })
        .collect();
    let value = |x: f64| {
        if x >= 1.0 {
            return 0.0;
        }
        let v = (lambda / (x - 1.0)).exp();
        if v < FLUSH {
            0.0
        } else {
            v
        }
    };
    let deriv = |x: f64| {
        let v = value(x);
        if v == 0.0 {
            0.0
        } else {
            -lambda / ((x - 1.0) * (x - 1.0)) * v
        }
    };
    TestFunction::from_fn(xs, value, deriv)
}

/// `∫ |f_λ'|² = (2λ² + 2λ + 1) e^{−2λ} / (4λ)`.
pub fn flambda_gradient_closed(lambda: f64) -> f64 {
    (2.0 * lambda * lambda + 2.0 * lambda + 1.0) * (-2.0 * lambda).exp() / (4.0 * lambda)
}

/// `(f_λ, H f_λ) = (−2λ² + 2λ + 1) e^{−2λ} / (4λ)` when `V f_λ ≡ 0`.
pub fn flambda_form_closed(lambda: f64) -> f64 {
    (-2.0 * lambda * lambda + 2.0 * lambda + 1.0) * (-2.0 * lambda).exp() / (4.0 * lambda)
}

/// Threshold `λ*` beyond which `f_λ` has a negative form, and the boundary
/// angle `arctan(−λ*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub lambda: f64,
    pub theta: f64,
}

/// Positive root of `−2λ² + 2λ + 1` by bisection on `[1, 2]`.
pub fn negative_form_threshold() -> Threshold {
    let g = |l: f64| -2.0 * l * l + 2.0 * l + 1.0;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > 4.0 * f64::EPSILON {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    debug_assert!((lambda - (1.0 + 3f64.sqrt()) / 2.0).abs() < 1e-12);
    Threshold {
        lambda,
        theta: (-lambda).atan(),
    }
}

/// Smooth cutoff `g(t) = exp(1 − 1/(1 − t²))` with `g(0) = 1`, `g'(0) = 0`.
fn cutoff(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - t * t;
    let g = (1.0 - 1.0 / d).exp();
    if g == 0.0 {
        return (0.0, 0.0);
    }
    (g, g * (-2.0 * t / (d * d)))
}

/// Random admissible test function for `θ`:
/// `f(x) = (cos θ + x sin θ + a x² + b x² sin(ωx)) g(x/R)`, so that
/// `f(0) = cos θ` and `f'(0) = sin θ`.
pub fn random_test_function(
    rng: &mut impl Rng,
    theta: f64,
    grid_points: usize,
) -> Result<TestFunction, SpectralError> {
    let (s, c) = theta.sin_cos();
    let a: f64 = rng.gen_range(-2.0..2.0);
    let b: f64 = rng.gen_range(-2.0..2.0);
    let omega: f64 = rng.gen_range(0.0..10.0);
    let radius = (rng.gen_range(0.5f64.ln()..80f64.ln())).exp();
    let poly = move |x: f64| c + s * x + a * x * x + b * x * x * (omega * x).sin();
    let dpoly = move |x: f64| {
        s + 2.0 * a * x + b * (2.0 * x * (omega * x).sin() + omega * x * x * (omega * x).cos())
    };
    let end = 1.1 * radius;
    let n = grid_points.max(3) - 1;
    let xs: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).collect();
    TestFunction::from_fn(
        xs,
        |x| poly(x) * cutoff(x / radius).0,
        |x| {
            let (g, dg) = cutoff(x / radius);
            dpoly(x) * g + poly(x) * dg / radius
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    Theta,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanVerdict {
    /// Minimum over the sampled family is non-negative.
    Nonnegative,
    /// A test function with negative form was found in the θ branch.
    NegativeWitness,
    /// `f_λ` has negative form: a negative eigenvalue exists.
    EigenvalueExists,
    /// `f_λ` has non-negative form; this witness says nothing.
    InconclusiveAtWitness,
}

impl fmt::Display for ScanVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanVerdict::Nonnegative => "nonnegative",
            ScanVerdict::NegativeWitness => "negative-witness",
            ScanVerdict::EigenvalueExists => "eigenvalue-exists",
            ScanVerdict::InconclusiveAtWitness => "inconclusive-at-witness",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub kind: ScanKind,
    pub parameter: f64,
    /// Minimum over the random family (θ rows) or the `f_λ` form (λ rows).
    pub form_value: f64,
    pub verdict: ScanVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub samples: usize,
    pub grid_points: usize,
    pub seed: u64,
    /// θ rows count as non-negative down to `−tolerance`.
    pub tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            samples: 100,
            grid_points: 4097,
            seed: 42,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub config: ScanConfig,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub const CSV_HEADER: &'static str = "theta_or_lambda,form_value,verdict";

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# seed={} samples={} grid={}\n{}\n",
            self.config.seed,
            self.config.samples,
            self.config.grid_points,
            Self::CSV_HEADER
        );
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{}\n", r.parameter, r.form_value, r.verdict));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scan table serializes")
    }

    /// Consecutive λ rows whose verdicts differ, as `(before, after)`.
    pub fn lambda_sign_changes(&self) -> Vec<(f64, f64)> {
        let lambdas: Vec<&ScanRow> = self.rows.iter().filter(|r| r.kind == ScanKind::Lambda).collect();
        lambdas
            .windows(2)
            .filter(|w| w[0].verdict != w[1].verdict)
            .map(|w| (w[0].parameter, w[1].parameter))
            .collect()
    }
}

/// Per-row RNG seed so rows are independent of evaluation order.
fn row_seed(seed: u64, row: usize) -> u64 {
    seed ^ (row as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Minimum of the form over `config.samples` random test functions at `θ`.
pub fn scan_theta_row(
    potential: &SparsePotential,
    theta: f64,
    row: usize,
    config: &ScanConfig,
) -> Result<ScanRow, SpectralError> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(SpectralError::ThetaOutOfRange(theta));
    }
    if !potential.is_nonnegative() {
        return Err(SpectralError::NegativePotential);
    }
    let bc = BoundaryCondition::new(theta);
    let mut rng = ChaCha8Rng::seed_from_u64(row_seed(config.seed, row));
    let mut min = f64::INFINITY;
    for _ in 0..config.samples {
        let f = random_test_function(&mut rng, theta, config.grid_points)?;
        min = min.min(quadratic_form(potential, &f, bc)?);
    }
    let verdict = if min >= -config.tolerance {
        ScanVerdict::Nonnegative
    } else {
        ScanVerdict::NegativeWitness
    };
    Ok(ScanRow {
        kind: ScanKind::Theta,
        parameter: theta,
        form_value: min,
        verdict,
    })
}

/// Form of `f_λ` under the Robin condition `f'(0)/f(0) = −λ`.
pub fn scan_lambda_row(
    potential: &SparsePotential,
    lambda: f64,
    config: &ScanConfig,
) -> Result<ScanRow, SpectralError> {
    let f = flambda(lambda, config.grid_points)?;
    let value = quadratic_form(potential, &f, BoundaryCondition::robin(lambda))?;
    let verdict = if value < 0.0 {
        ScanVerdict::EigenvalueExists
    } else {
        ScanVerdict::InconclusiveAtWitness
    };
    Ok(ScanRow {
        kind: ScanKind::Lambda,
        parameter: lambda,
        form_value: value,
        verdict,
    })
}

/// θ rows first, then λ rows, in input order.
pub fn theta_scan(
    potential: &SparsePotential,
    thetas: &[f64],
    lambdas: &[f64],
    config: ScanConfig,
) -> Result<ScanTable, SpectralError> {
    let mut rows = Vec::with_capacity(thetas.len() + lambdas.len());
    for (i, &t) in thetas.iter().enumerate() {
        rows.push(scan_theta_row(potential, t, i, &config)?);
    }
    for &l in lambdas {
        rows.push(scan_lambda_row(potential, l, &config)?);
    }
    Ok(ScanTable { config, rows })
}
