//! Signed log-magnitude arithmetic.
//!
//! A [`LogReal`] stores `sign · exp(logmag)`. Positions such as `exp(n^n)`
//! and products of hundreds of transfer matrices stay representable as long
//! as the *logarithm* fits in an `f64`.
//!
//! Additions of opposite-signed values whose magnitudes agree to within
//! [`CANCELLATION_THRESHOLD`] in log space lose all significant digits. Such
//! results are returned wrapped in [`Checked`] with the `cancelled` flag set
//! so callers can downgrade a verdict instead of trusting the value.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

/// Log-magnitude gap below which an opposite-sign sum is flagged.
pub const CANCELLATION_THRESHOLD: f64 = 1e-13;

/// Sign of a [`LogReal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    fn times(self, other: Sign) -> Sign {
        match (self, other) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number stored as sign and natural-log magnitude.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogReal {
    sign: Sign,
    logmag: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal {
        sign: Sign::Zero,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: LogReal = LogReal {
        sign: Sign::Positive,
        logmag: 0.0,
    };

    /// Positive value `exp(logmag)`. A `logmag` of `-inf` yields zero.
    pub fn from_log(logmag: f64) -> Self {
        Self::with_sign(Sign::Positive, logmag)
    }

    pub fn with_sign(sign: Sign, logmag: f64) -> Self {
        if sign == Sign::Zero || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogReal { sign, logmag }
        }
    }

    pub fn from_real(v: f64) -> Self {
        Self::with_sign(Sign::of(v), v.abs().ln())
    }

    /// Converts back to `f64`; overflows to `±inf` and underflows to `±0`.
    pub fn to_real(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.logmag.exp(),
        }
    }

    pub fn sign(self) -> Sign {
        self.sign
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn logmag(self) -> f64 {
        match self.sign {
            Sign::Zero => f64::NEG_INFINITY,
            _ => self.logmag,
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn is_finite(self) -> bool {
        self.is_zero() || self.logmag.is_finite()
    }

    pub fn abs(self) -> Self {
        match self.sign {
            Sign::Zero => self,
            _ => LogReal {
                sign: Sign::Positive,
                logmag: self.logmag,
            },
        }
    }

    pub fn recip(self) -> Self {
        match self.sign {
            Sign::Zero => LogReal::with_sign(Sign::Positive, f64::INFINITY),
            s => LogReal {
                sign: s,
                logmag: -self.logmag,
            },
        }
    }

    pub fn powi(self, k: i32) -> Self {
        match self.sign {
            Sign::Zero if k > 0 => self,
            Sign::Zero => LogReal::ONE,
            s => {
                let sign = if k % 2 == 0 { Sign::Positive } else { s };
                LogReal {
                    sign,
                    logmag: self.logmag * f64::from(k),
                }
            }
        }
    }

    /// Square root of a non-negative value; negative inputs return `None`.
    pub fn sqrt(self) -> Option<Self> {
        match self.sign {
            Sign::Negative => None,
            Sign::Zero => Some(self),
            Sign::Positive => Some(LogReal::from_log(0.5 * self.logmag)),
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        self * LogReal::from_real(factor)
    }

    pub fn checked_add(self, other: LogReal) -> Checked<LogReal> {
        log_add(self, other)
    }

    pub fn checked_sub(self, other: LogReal) -> Checked<LogReal> {
        log_add(self, -other)
    }

    /// Total order by value. Incomparable only for NaN magnitudes.
    pub fn partial_cmp_value(self, other: LogReal) -> Option<Ordering> {
        let rank = |s: Sign| match s {
            Sign::Negative => 0,
            Sign::Zero => 1,
            Sign::Positive => 2,
        };
        match rank(self.sign).cmp(&rank(other.sign)) {
            Ordering::Equal => match self.sign {
                Sign::Zero => Some(Ordering::Equal),
                Sign::Positive => self.logmag.partial_cmp(&other.logmag),
                Sign::Negative => other.logmag.partial_cmp(&self.logmag),
            },
            ord => Some(ord),
        }
    }
}

impl PartialEq for LogReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp_value(*other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.partial_cmp_value(*other)
    }
}

impl Default for LogReal {
    fn default() -> Self {
        LogReal::ZERO
    }
}

impl From<f64> for LogReal {
    fn from(v: f64) -> Self {
        LogReal::from_real(v)
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "0"),
            Sign::Positive => write!(f, "exp({})", self.logmag),
            Sign::Negative => write!(f, "-exp({})", self.logmag),
        }
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal {
            sign: self.sign.flip(),
            logmag: self.logmag,
        }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        log_mul(self, rhs)
    }
}

/// A value together with a catastrophic-cancellation flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checked<T> {
    pub value: T,
    pub cancelled: bool,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Checked {
            value,
            cancelled: false,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked {
            value: f(self.value),
            cancelled: self.cancelled,
        }
    }

    /// Chains a further checked computation, OR-ing the flags.
    pub fn and_then<U>(self, f: impl FnOnce(T) -> Checked<U>) -> Checked<U> {
        let next = f(self.value);
        Checked {
            value: next.value,
            cancelled: self.cancelled || next.cancelled,
        }
    }
}

pub fn log_mul(a: LogReal, b: LogReal) -> LogReal {
    let sign = a.sign.times(b.sign);
    LogReal::with_sign(sign, a.logmag + b.logmag)
}

/// Log-sum-exp with the larger magnitude factored out.
///
/// Exact cancellation (equal magnitudes, opposite signs) returns zero
/// without a flag. Near-cancellation below [`CANCELLATION_THRESHOLD`] is
/// flagged.
pub fn log_add(a: LogReal, b: LogReal) -> Checked<LogReal> {
    if a.is_zero() {
        return Checked::clean(b);
    }
    if b.is_zero() {
        return Checked::clean(a);
    }
    let (big, small) = if a.logmag >= b.logmag { (a, b) } else { (b, a) };
    if big.logmag == f64::INFINITY {
        return Checked::clean(big);
    }
    let gap = small.logmag - big.logmag; // <= 0
    if big.sign == small.sign {
        return Checked::clean(LogReal::with_sign(
            big.sign,
            big.logmag + gap.exp().ln_1p(),
        ));
    }
    if gap == 0.0 {
        return Checked::clean(LogReal::ZERO);
    }
    // log(1 - e^gap) for gap < 0
    let tail = if gap > -std::f64::consts::LN_2 {
        (-gap.exp_m1()).ln()
    } else {
        (-gap.exp()).ln_1p()
    };
    Checked {
        value: LogReal::with_sign(big.sign, big.logmag + tail),
        cancelled: -gap < CANCELLATION_THRESHOLD,
    }
}

/// Sum of many terms, flagging if any partial sum cancelled.
pub fn log_sum<I: IntoIterator<Item = LogReal>>(terms: I) -> Checked<LogReal> {
    terms
        .into_iter()
        .fold(Checked::clean(LogReal::ZERO), |acc, t| {
            acc.and_then(|s| log_add(s, t))
        })
}

/// Two-vector of [`LogReal`] entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogVec2(pub [LogReal; 2]);

impl LogVec2 {
    pub fn new(a: LogReal, b: LogReal) -> Self {
        LogVec2([a, b])
    }

    pub fn from_reals(a: f64, b: f64) -> Self {
        LogVec2([a.into(), b.into()])
    }

    pub fn to_reals(self) -> [f64; 2] {
        [self.0[0].to_real(), self.0[1].to_real()]
    }

    /// Euclidean norm, computed without leaving the log domain.
    pub fn norm(self) -> LogReal {
        let sq = log_add(self.0[0].powi(2), self.0[1].powi(2)).value;
        sq.sqrt().unwrap_or(LogReal::ZERO)
    }

    /// Scales so the larger entry has unit magnitude; returns the removed log-scale.
    pub fn normalized(self) -> (LogVec2, f64) {
        let s = self.0[0].logmag().max(self.0[1].logmag());
        if !s.is_finite() {
            return (self, 0.0);
        }
        let shift = LogReal::from_log(-s);
        (LogVec2([self.0[0] * shift, self.0[1] * shift]), s)
    }
}

/// Row-major 2×2 matrix of [`LogReal`] entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogMat2(pub [[LogReal; 2]; 2]);

impl LogMat2 {
    pub fn identity() -> Self {
        LogMat2([[LogReal::ONE, LogReal::ZERO], [LogReal::ZERO, LogReal::ONE]])
    }

    pub fn from_reals(m: [[f64; 2]; 2]) -> Self {
        LogMat2([
            [m[0][0].into(), m[0][1].into()],
            [m[1][0].into(), m[1][1].into()],
        ])
    }

    pub fn to_reals(self) -> [[f64; 2]; 2] {
        let r = |x: LogReal| x.to_real();
        [
            [r(self.0[0][0]), r(self.0[0][1])],
            [r(self.0[1][0]), r(self.0[1][1])],
        ]
    }

    pub fn apply(&self, v: LogVec2) -> Checked<LogVec2> {
        mat2_log_apply(self, v)
    }

    pub fn mul(&self, rhs: &LogMat2) -> Checked<LogMat2> {
        let c0 = mat2_log_apply(self, LogVec2([rhs.0[0][0], rhs.0[1][0]]));
        let c1 = mat2_log_apply(self, LogVec2([rhs.0[0][1], rhs.0[1][1]]));
        Checked {
            value: LogMat2([
                [c0.value.0[0], c1.value.0[0]],
                [c0.value.0[1], c1.value.0[1]],
            ]),
            cancelled: c0.cancelled || c1.cancelled,
        }
    }

    pub fn det(&self) -> Checked<LogReal> {
        let m = &self.0;
        log_add(m[0][0] * m[1][1], -(m[0][1] * m[1][0]))
    }

    /// Largest entry log-magnitude (`-inf` for the zero matrix).
    pub fn max_logmag(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|x| x.logmag())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Matrix–vector product in the log domain. Flags any cancelled row.
pub fn mat2_log_apply(m: &LogMat2, v: LogVec2) -> Checked<LogVec2> {
    let row = |i: usize| log_add(m.0[i][0] * v.0[0], m.0[i][1] * v.0[1]);
    let (r0, r1) = (row(0), row(1));
    Checked {
        value: LogVec2([r0.value, r1.value]),
        cancelled: r0.cancelled || r1.cancelled,
    }
}

/// `ln(L^2 + c)` for `c > 0`, safe for astronomically large `L`.
pub fn ln_square_plus(l: LogReal, c: f64) -> f64 {
    log_add(l.powi(2), LogReal::from_real(c)).value.logmag()
}
