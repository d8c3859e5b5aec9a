//! Sparse bump potentials: data model, validation, evaluation and the
//! built-in super-exponentially sparse example.
//!
//! Bump centers are stored as [`LogReal`] because the example potential
//! places bump `n` at `exp(n^n)`, which overflows `f64` from `n = 4`.
//! Supports are closed intervals `[x_n − α_n, x_n + α_n]`; a point on a
//! shared edge takes the bump value.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::{log_add, LogReal};

/// Largest prefix accepted by [`example_potential`].
pub const MAX_EXAMPLE_BUMPS: usize = 64;

/// Relative precision with which two log-domain positions are compared.
const POSITION_EPS: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("bump {index}: half-width must be positive and finite, got {value}")]
    BadHalfWidth { index: usize, value: f64 },
    #[error("bump {index}: height bound must be non-negative and finite, got {value}")]
    BadHeight { index: usize, value: f64 },
    #[error("bump {index}: profile sample {sample} = {value} violates |V| <= {bound}")]
    ProfileExceedsBound {
        index: usize,
        sample: usize,
        value: f64,
        bound: f64,
    },
    #[error("bump {index}: profile must be non-empty with finite samples")]
    BadProfile { index: usize },
    #[error("bump {index}: log-center must be finite, got {value}")]
    BadCenter { index: usize, value: f64 },
    #[error("centers not strictly increasing at index {index}")]
    NonMonotoneCenters { index: usize },
    #[error("overlap at index {index}: gap L_{index} is not positive")]
    Overlap { index: usize },
    #[error("need at least 2 bumps to validate, got {0}")]
    InsufficientData(usize),
    #[error("example potential supports 1..={MAX_EXAMPLE_BUMPS} bumps, got {0}")]
    ExampleRange(usize),
    #[error("malformed potential file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read potential file: {0}")]
    Io(#[from] std::io::Error),
}

impl PotentialError {
    /// Whether the error comes from unreadable or unparsable input rather
    /// than a potential that violates a structural condition.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PotentialError::Parse(_) | PotentialError::Io(_))
    }
}

/// Values taken by `V` on one bump support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// `V ≡ h` on the support.
    Constant(f64),
    /// Piecewise constant on equal-width pieces covering the support left to right.
    Samples(Vec<f64>),
}

impl Profile {
    pub fn pieces(&self) -> &[f64] {
        match self {
            Profile::Constant(h) => std::slice::from_ref(h),
            Profile::Samples(s) => s,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.pieces().iter().all(|&v| v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    center: LogReal,
    half_width: f64,
    height_bound: f64,
    profile: Profile,
}

impl Bump {
    pub fn new(
        center: LogReal,
        half_width: f64,
        height_bound: f64,
        profile: Profile,
    ) -> Result<Self, PotentialError> {
        Self::checked(0, center, half_width, height_bound, profile)
    }

    /// Bump with `V ≡ height` on `[center − half_width, center + half_width]`.
    pub fn constant(center: f64, half_width: f64, height: f64) -> Result<Self, PotentialError> {
        Bump::new(
            LogReal::from_real(center),
            half_width,
            height.abs(),
            Profile::Constant(height),
        )
    }

    fn checked(
        index: usize,
        center: LogReal,
        half_width: f64,
        height_bound: f64,
        profile: Profile,
    ) -> Result<Self, PotentialError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(PotentialError::BadHalfWidth {
                index,
                value: half_width,
            });
        }
        if !(height_bound >= 0.0 && height_bound.is_finite()) {
            return Err(PotentialError::BadHeight {
                index,
                value: height_bound,
            });
        }
        if !center.is_finite() || center.is_zero() {
            return Err(PotentialError::BadCenter {
                index,
                value: center.logmag(),
            });
        }
        let pieces = profile.pieces();
        if pieces.is_empty() || pieces.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::BadProfile { index });
        }
        if let Some((sample, &value)) = pieces
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() > height_bound)
        {
            return Err(PotentialError::ProfileExceedsBound {
                index,
                sample,
                value,
                bound: height_bound,
            });
        }
        Ok(Bump {
            center,
            half_width,
            height_bound,
            profile,
        })
    }

    pub fn center(&self) -> LogReal {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn height_bound(&self) -> f64 {
        self.height_bound
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Profile value at offset `rel ∈ [0, 2α]` from the left edge.
    pub fn value_at_offset(&self, rel: f64) -> f64 {
        match &self.profile {
            Profile::Constant(h) => *h,
            Profile::Samples(s) => {
                let idx = ((rel / self.width()) * s.len() as f64).floor();
                let idx = (idx.max(0.0) as usize).min(s.len() - 1);
                s[idx]
            }
        }
    }

    /// Offsets from the left edge where the piecewise-constant profile jumps,
    /// including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.profile.pieces().len();
        (0..=n).map(|i| self.width() * i as f64 / n as f64).collect()
    }

    pub fn left_edge(&self) -> LogReal {
        log_add(self.center, LogReal::from_real(-self.half_width)).value
    }

    pub fn right_edge(&self) -> LogReal {
        log_add(self.center, LogReal::from_real(self.half_width)).value
    }
}

/// A finite prefix of a sparse potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePotential {
    name: String,
    bumps: Vec<Bump>,
    /// `gaps[0] = L_0 = x_1 − α_1`, `gaps[n] = L_n = x_{n+1} − x_n − α_{n+1} − α_n`.
    gaps: Vec<LogReal>,
}

impl SparsePotential {
    /// Builds a potential, rejecting non-increasing centers and
    /// non-positive gaps (including `L_0`).
    pub fn new(name: impl Into<String>, bumps: Vec<Bump>) -> Result<Self, PotentialError> {
        let gaps = compute_gaps(&bumps);
        if let Some(index) = first_structural_failure(&bumps, &gaps) {
            return Err(index);
        }
        Ok(SparsePotential {
            name: name.into(),
            bumps,
            gaps,
        })
    }

    pub fn free() -> Self {
        SparsePotential {
            name: "free".into(),
            bumps: Vec::new(),
            gaps: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    /// `L_n` for `0 <= n < len()`.
    pub fn gap(&self, n: usize) -> Option<LogReal> {
        self.gaps.get(n).copied()
    }

    pub fn gaps(&self) -> &[LogReal] {
        &self.gaps
    }

    /// First `n` bumps.
    pub fn truncated(&self, n: usize) -> SparsePotential {
        let n = n.min(self.bumps.len());
        SparsePotential {
            name: self.name.clone(),
            bumps: self.bumps[..n].to_vec(),
            gaps: self.gaps[..n].to_vec(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.bumps.iter().all(|b| b.profile.is_nonnegative())
    }

    /// `V(x)` for `x >= 0`; zero in every gap and for negative `x`.
    pub fn evaluate(&self, x: LogReal) -> f64 {
        if x.sign() == crate::logspace::Sign::Negative {
            return 0.0;
        }
        for b in &self.bumps {
            let offset = log_add(x, -b.center).value;
            let scale = x.logmag().max(b.center.logmag()).exp();
            let tol = POSITION_EPS * scale.max(b.half_width);
            let dist = offset.to_real();
            if dist.abs() <= b.half_width + tol {
                let rel = (dist + b.half_width).clamp(0.0, b.width());
                return b.value_at_offset(rel);
            }
            if offset.sign() == crate::logspace::Sign::Negative {
                break;
            }
        }
        0.0
    }

    pub fn evaluate_real(&self, x: f64) -> f64 {
        self.evaluate(LogReal::from_real(x))
    }

    pub fn validate(&self, ratio_threshold: f64) -> Result<ValidationReport, PotentialError> {
        validate(&self.bumps, ratio_threshold)
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            name: self.name.clone(),
            bumps: self
                .bumps
                .iter()
                .map(|b| BumpSpec {
                    log_center: b.center.logmag(),
                    half_width: b.half_width,
                    height: b.height_bound,
                    profile: match &b.profile {
                        Profile::Constant(_) => ProfileSpec::Keyword(ProfileKeyword::Constant),
                        Profile::Samples(s) => ProfileSpec::Samples(s.clone()),
                    },
                })
                .collect(),
        }
    }
}

fn compute_gaps(bumps: &[Bump]) -> Vec<LogReal> {
    let mut gaps = Vec::with_capacity(bumps.len());
    if let Some(first) = bumps.first() {
        gaps.push(first.left_edge());
    }
    for w in bumps.windows(2) {
        gaps.push(log_add(w[1].left_edge(), -w[0].right_edge()).value);
    }
    gaps
}

fn first_structural_failure(bumps: &[Bump], gaps: &[LogReal]) -> Option<PotentialError> {
    for (i, w) in bumps.windows(2).enumerate() {
        if w[1].center <= w[0].center {
            return Some(PotentialError::NonMonotoneCenters { index: i + 1 });
        }
    }
    gaps.iter()
        .position(|g| g.sign() != crate::logspace::Sign::Positive)
        .map(|index| PotentialError::Overlap { index })
}

/// Outcome of one condition of the sparse-potential definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub passed: bool,
    pub failing_index: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionResult>,
    /// `ln((x_{n+1} − x_n)/(α_{n+1} + α_n + 1))` for `n = 1..len−1`.
    pub log_ratios: Vec<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            let status = if c.passed { "pass" } else { "FAIL" };
            write!(f, "{:<28} {status}", c.name)?;
            if let Some(i) = c.failing_index {
                write!(f, " (index {i})")?;
            }
            writeln!(f, "  {}", c.detail)?;
        }
        Ok(())
    }
}

/// Checks the three defining conditions on a finite prefix.
///
/// * structure: centers increase and all gaps `L_0..L_{N-1}` are positive;
/// * height bound: every profile sample satisfies `|V| <= h_n`;
/// * sparsity (prefix proxy): the separation ratios
///   `(x_{n+1} − x_n)/(α_{n+1} + α_n + 1)` are nondecreasing and the last
///   one exceeds `ratio_threshold`.
///
/// V vanishing off the supports holds by construction and is reported as
/// such.
pub fn validate(bumps: &[Bump], ratio_threshold: f64) -> Result<ValidationReport, PotentialError> {
    if bumps.len() < 2 {
        return Err(PotentialError::InsufficientData(bumps.len()));
    }
    let gaps = compute_gaps(bumps);
    let mut conditions = Vec::new();

    let structural = first_structural_failure(bumps, &gaps);
    conditions.push(match &structural {
        None => ConditionResult {
            name: "supports disjoint".into(),
            passed: true,
            failing_index: None,
            detail: "centers increasing, all gaps positive".into(),
        },
        Some(PotentialError::NonMonotoneCenters { index }) => ConditionResult {
            name: "supports disjoint".into(),
            passed: false,
            failing_index: Some(*index),
            detail: format!("centers not increasing at index {index}"),
        },
        Some(PotentialError::Overlap { index }) => ConditionResult {
            name: "supports disjoint".into(),
            passed: false,
            failing_index: Some(*index),
            detail: format!("overlap at index {index}"),
        },
        Some(other) => ConditionResult {
            name: "supports disjoint".into(),
            passed: false,
            failing_index: None,
            detail: other.to_string(),
        },
    });

    let height_failure = bumps.iter().enumerate().find(|(_, b)| {
        b.profile
            .pieces()
            .iter()
            .any(|v| v.abs() > b.height_bound)
    });
    conditions.push(ConditionResult {
        name: "height bound |V| <= h_n".into(),
        passed: height_failure.is_none(),
        failing_index: height_failure.map(|(i, _)| i + 1),
        detail: "checked on every profile sample".into(),
    });

    conditions.push(ConditionResult {
        name: "V = 0 off supports".into(),
        passed: true,
        failing_index: None,
        detail: "structural".into(),
    });

    let log_ratios: Vec<f64> = bumps
        .windows(2)
        .map(|w| {
            let sep = log_add(w[1].center, -w[0].center).value;
            sep.logmag() - (w[1].half_width + w[0].half_width + 1.0).ln()
        })
        .collect();
    let non_monotone = log_ratios
        .windows(2)
        .position(|r| r[1] < r[0])
        .map(|i| i + 2);
    let last = *log_ratios.last().expect("at least one ratio");
    let sparsity = match (structural.is_some(), non_monotone) {
        (true, _) => ConditionResult {
            name: "sparsity (prefix-consistent)".into(),
            passed: false,
            failing_index: None,
            detail: "not evaluated: structure invalid".into(),
        },
        (false, Some(i)) => ConditionResult {
            name: "sparsity (prefix-consistent)".into(),
            passed: false,
            failing_index: Some(i),
            detail: format!("separation ratio decreases at index {i}"),
        },
        (false, None) if last <= ratio_threshold.ln() => ConditionResult {
            name: "sparsity (prefix-consistent)".into(),
            passed: false,
            failing_index: Some(log_ratios.len()),
            detail: format!(
                "last ratio exp({last:.6}) does not exceed threshold {ratio_threshold}"
            ),
        },
        (false, None) => ConditionResult {
            name: "sparsity (prefix-consistent)".into(),
            passed: true,
            failing_index: None,
            detail: format!("ratios nondecreasing, last = exp({last:.6}) > {ratio_threshold}"),
        },
    };
    conditions.push(sparsity);

    Ok(ValidationReport {
        conditions,
        log_ratios,
    })
}

/// The built-in example: bump `n` centered at `exp(n^n)` with half-width
/// 1/2 and constant height `e^n`.
pub fn example_potential(n_bumps: usize) -> Result<SparsePotential, PotentialError> {
    if !(1..=MAX_EXAMPLE_BUMPS).contains(&n_bumps) {
        return Err(PotentialError::ExampleRange(n_bumps));
    }
    let bumps = (1..=n_bumps)
        .map(|n| {
            let nf = n as f64;
            let height = nf.exp();
            Bump::new(
                LogReal::from_log(nf.powf(nf)),
                0.5,
                height,
                Profile::Constant(height),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    SparsePotential::new("example", bumps)
}

/// Keyword form of the `profile` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKeyword {
    #[serde(rename = "constant")]
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Keyword(ProfileKeyword),
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub log_center: f64,
    pub half_width: f64,
    pub height: f64,
    pub profile: ProfileSpec,
}

/// On-disk JSON form. Centers are stored as natural logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub bumps: Vec<BumpSpec>,
    #[serde(default)]
    pub name: String,
}

impl PotentialFile {
    pub fn from_json(text: &str) -> Result<Self, PotentialError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PotentialError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("potential file serializes")
    }

    /// Per-bump checks only; ordering and overlap are left to
    /// [`validate`] / [`SparsePotential::new`].
    pub fn to_bumps(&self) -> Result<Vec<Bump>, PotentialError> {
        self.bumps
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let profile = match &b.profile {
                    ProfileSpec::Keyword(ProfileKeyword::Constant) => Profile::Constant(b.height),
                    ProfileSpec::Samples(s) => Profile::Samples(s.clone()),
                };
                Bump::checked(
                    i + 1,
                    LogReal::from_log(b.log_center),
                    b.half_width,
                    b.height,
                    profile,
                )
            })
            .collect()
    }

    pub fn to_potential(&self) -> Result<SparsePotential, PotentialError> {
        SparsePotential::new(self.name.clone(), self.to_bumps()?)
    }
}
