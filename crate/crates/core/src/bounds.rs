//! Closed-form lower bounds on transfer-matrix growth and the zero-energy
//! divergence certificate.
//!
//! Everything here is evaluated in logs. With
//! `B_m = h_m (4α_m³ + 3α_m)`:
//!
//! * `|c_n| >= 2^{−n} Π (L_{m−1}² + 2)^{−1/2} Π (2α_m² + 1)^{−1/2} exp(−Σ B_m / 3)`
//! * `S_n = L_n 4^{−n} Π (L_{m−1}² + 2)^{−1} Π (2α_m² + 1)^{−1} exp(−2 Σ B_m / 3)`
//!
//! If `S_n → ∞` no zero-energy solution is square integrable. A finite
//! prefix can only show growth, so the verdict is `DivergingPrefix`, never
//! a proof of divergence.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::{ln_square_plus, LogReal, Sign};
use crate::mat2::{gram_smallest_eig, lower_bound_shear};
use crate::potential::{Bump, SparsePotential};

/// Gap length from which `L⁴/(L³ + 3L) >= L/4` is used instead of `λ₋(L)`.
pub const LARGE_GAP: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("need {needed} bumps, potential has {available}")]
    InsufficientBumps { needed: usize, available: usize },
    #[error("certificate needs n_max >= {min}, got {got}")]
    PrefixTooShort { min: usize, got: usize },
}

fn bump_exponent(b: &Bump) -> f64 {
    let a = b.half_width();
    b.height_bound() * (4.0 * a * a * a + 3.0 * a)
}

fn require(p: &SparsePotential, needed: usize) -> Result<(), BoundsError> {
    if p.len() < needed {
        Err(BoundsError::InsufficientBumps {
            needed,
            available: p.len(),
        })
    } else {
        Ok(())
    }
}

/// Shared sums over `m = 1..n`: `Σ ln(L_{m−1}² + 2)`, `Σ ln(2α_m² + 1)`, `Σ B_m`.
fn prefix_sums(p: &SparsePotential, n: usize) -> (f64, f64, f64) {
    let mut gap_term = 0.0;
    let mut width_term = 0.0;
    let mut height_term = 0.0;
    for (m, b) in p.bumps().iter().take(n).enumerate() {
        gap_term += ln_square_plus(p.gap(m).expect("gap"), 2.0);
        width_term += (2.0 * b.half_width().powi(2) + 1.0).ln();
        height_term += bump_exponent(b);
    }
    (gap_term, width_term, height_term)
}

/// Log of the lower bound on `|c_n|` after `n` bumps.
pub fn cn_lower_bound(p: &SparsePotential, n: usize) -> Result<LogReal, BoundsError> {
    require(p, n)?;
    let (g, w, h) = prefix_sums(p, n);
    let log = -(n as f64) * std::f64::consts::LN_2 - 0.5 * g - 0.5 * w - h / 3.0;
    Ok(LogReal::from_log(log))
}

/// `low(R_m) >= exp(−B_m/3) / (2√(2α² + 1))` at zero energy.
pub fn bump_low_bound(b: &Bump) -> f64 {
    let a = b.half_width();
    (-bump_exponent(b) / 3.0).exp() / (2.0 * (2.0 * a * a + 1.0).sqrt())
}

/// Zero-energy free-gap bound `low(W) >= 1/√(L² + 2)`, in logs.
pub fn log_gap_low_bound(len: LogReal) -> f64 {
    if len.logmag() < 300.0 {
        lower_bound_shear(len.to_real()).ln()
    } else {
        -0.5 * ln_square_plus(len, 2.0)
    }
}

/// Gronwall envelope `exp(h (x + x³/3))` for `|u(x)|²` and `|v(x)|²` at
/// offset `x` from the bump's left edge.
pub fn gronwall_envelope(b: &Bump, offset: f64) -> f64 {
    (b.height_bound() * (offset + offset.powi(3) / 3.0)).exp()
}

/// `ln S_n`; needs `L_n`, hence `n + 1` bumps.
pub fn divergence_sequence(p: &SparsePotential, n: usize) -> Result<LogReal, BoundsError> {
    require(p, n + 1)?;
    let (g, w, h) = prefix_sums(p, n);
    let ln_gap = p.gap(n).expect("gap").logmag();
    let log = ln_gap - n as f64 * 4f64.ln() - g - w - 2.0 * h / 3.0;
    Ok(LogReal::from_log(log))
}

/// Log of the lower bound on `∫_{J_n} |f|²` per unit `|c_n|²`: `ln(L/16)`
/// for `L >= LARGE_GAP`, `ln λ₋(L)` otherwise.
pub fn log_gap_norm_factor(len: LogReal) -> f64 {
    if len >= LogReal::from_real(LARGE_GAP) {
        len.logmag() - 16f64.ln()
    } else {
        gram_smallest_eig(len.to_real()).ln()
    }
}

/// Log lower bound on `∫_{J_n} |f|²` for any solution with `|c_0| = 1`.
pub fn gap_norm_lower_bound(p: &SparsePotential, n: usize) -> Result<LogReal, BoundsError> {
    require(p, n + 1)?;
    let cn = cn_lower_bound(p, n)?;
    let factor = log_gap_norm_factor(p.gap(n).expect("gap"));
    Ok(LogReal::from_log(factor + 2.0 * cn.logmag()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    DivergingPrefix,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::DivergingPrefix => "diverging-prefix",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub n: usize,
    pub log_seq_value: LogReal,
    pub log_cn_bound: LogReal,
    pub log_gap_norm_bound: LogReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    /// Trailing records that must be strictly increasing.
    pub window: usize,
    /// `ln S_n` of the last record must exceed this.
    pub log_margin: f64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig {
            window: 4,
            log_margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub potential: String,
    pub config: CertificateConfig,
    pub records: Vec<CertificateRecord>,
    pub verdict: Verdict,
}

impl CertificateReport {
    pub const CSV_HEADER: &'static str =
        "n,log_S_n (divergence sequence),log_cn_bound (solution growth bound),log_gap_norm_bound (gap L2 bound)";

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# potential={} verdict={} window={} log_margin={}\n{}\n",
            self.potential,
            self.verdict,
            self.config.window,
            self.config.log_margin,
            Self::CSV_HEADER
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                r.n,
                r.log_seq_value.logmag(),
                r.log_cn_bound.logmag(),
                r.log_gap_norm_bound.logmag()
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<_> = self
            .records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "n": r.n,
                    "log_S_n": r.log_seq_value.logmag(),
                    "log_cn_bound": r.log_cn_bound.logmag(),
                    "log_gap_norm_bound": r.log_gap_norm_bound.logmag(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "potential": self.potential,
            "verdict": self.verdict,
            "window": self.config.window,
            "log_margin": self.config.log_margin,
            "records": records,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

/// Smallest prefix length accepted by [`certify_zero_energy`].
pub const MIN_CERTIFY_PREFIX: usize = 5;

pub fn verdict_for(records: &[CertificateRecord], config: &CertificateConfig) -> Verdict {
    let k = config.window.max(2);
    if records.len() < k {
        return Verdict::Inconclusive;
    }
    let tail = &records[records.len() - k..];
    let increasing = tail
        .windows(2)
        .all(|w| w[1].log_seq_value.logmag() > w[0].log_seq_value.logmag());
    let last = tail[k - 1].log_seq_value;
    if increasing && last.sign() == Sign::Positive && last.logmag() > config.log_margin {
        Verdict::DivergingPrefix
    } else {
        Verdict::Inconclusive
    }
}

/// Records for `n = 1..=n_max` and the verdict. Needs `n_max + 1` bumps.
pub fn certify_zero_energy(
    p: &SparsePotential,
    n_max: usize,
    config: CertificateConfig,
) -> Result<CertificateReport, BoundsError> {
    if n_max < MIN_CERTIFY_PREFIX {
        return Err(BoundsError::PrefixTooShort {
            min: MIN_CERTIFY_PREFIX,
            got: n_max,
        });
    }
    require(p, n_max + 1)?;
    let records = (1..=n_max)
        .map(|n| {
            Ok(CertificateRecord {
                n,
                log_seq_value: divergence_sequence(p, n)?,
                log_cn_bound: cn_lower_bound(p, n)?,
                log_gap_norm_bound: gap_norm_lower_bound(p, n)?,
            })
        })
        .collect::<Result<Vec<_>, BoundsError>>()?;
    let verdict = verdict_for(&records, &config);
    Ok(CertificateReport {
        potential: p.name().to_string(),
        config,
        records,
        verdict,
    })
}

/// `ln( x_{n+1} · (Π_{m<=n} x_m)^{−p} ) = (n+1)^{n+1} − p Σ_{m<=n} m^m` for
/// the example centers `x_n = exp(n^n)`.
pub fn ratio_divergence_check(n: usize, p_exp: f64) -> LogReal {
    let pow = |m: usize| (m as f64).powf(m as f64);
    let sum: f64 = (1..=n).map(pow).sum();
    LogReal::from_log(pow(n + 1) - p_exp * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::example_potential;
    use approx::assert_relative_eq;

    fn single(h: f64, alpha: f64, center: f64) -> SparsePotential {
        SparsePotential::new("one", vec![Bump::constant(center, alpha, h).unwrap()]).unwrap()
    }

    #[test]
    fn cn_bound_single_bump() {
        // L_0 = 10
        let p = single(1.0, 0.5, 10.5);
        let b = cn_lower_bound(&p, 1).unwrap();
        // −ln 2 − ln(102)/2 − ln(1.5)/2 − 2/3, 40-digit reference
        assert_relative_eq!(b.logmag(), -3.875_032_807_922_829_7, max_relative = 1e-14);
        assert_eq!(cn_lower_bound(&p, 0).unwrap(), LogReal::ONE);
        assert!(cn_lower_bound(&p, 2).is_err());
    }

    #[test]
    fn bump_low_examples() {
        let b = Bump::constant(5.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(bump_low_bound(&b), 0.209_601_661_139_937_4, max_relative = 1e-14);
        let low = crate::mat2::low(&crate::Mat2::new(1f64.cosh(), 1f64.sinh(), 1f64.sinh(), 1f64.cosh()));
        assert_relative_eq!(low, (-1f64).exp(), max_relative = 1e-12);
        assert!(low >= bump_low_bound(&b));
        for alpha in [0.1, 0.5, 2.0] {
            let flat = Bump::constant(5.0, alpha, 0.0).unwrap();
            let bound = bump_low_bound(&flat);
            assert_relative_eq!(bound, 1.0 / (2.0 * (2.0 * alpha * alpha + 1.0).sqrt()));
            assert!(crate::mat2::low(&crate::Mat2::shear(2.0 * alpha)) >= bound);
        }
    }

    #[test]
    fn envelope_examples() {
        let b = Bump::constant(5.0, 0.5, 1.0).unwrap();
        assert_eq!(gronwall_envelope(&b, 0.0), 1.0);
        assert_relative_eq!(gronwall_envelope(&b, 1.0), (4.0f64 / 3.0).exp());
        assert_relative_eq!(gronwall_envelope(&b, 1.0), 3.793_667_894_683_178, max_relative = 1e-14);
        // endpoint form exp(h (2α + 8α³/3))
        let a = 0.5f64;
        assert_relative_eq!(gronwall_envelope(&b, 2.0 * a), (2.0 * a + 8.0 * a.powi(3) / 3.0).exp());
    }

    #[test]
    fn example_sequence_closed_form() {
        let p = example_potential(11).unwrap();
        for n in 1..=10 {
            let got = divergence_sequence(&p, n).unwrap().logmag();
            let mut expected = p.gap(n).unwrap().logmag() - n as f64 * 4f64.ln() - n as f64 * 1.5f64.ln();
            for m in 1..=n {
                expected -= ln_square_plus(p.gap(m - 1).unwrap(), 2.0);
                expected -= 4.0 / 3.0 * (m as f64).exp();
            }
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn unit_gap_flat_potential_decreases() {
        // centers 1.5, 3.5, ... with α = 1/2: every gap is 1.
        let bumps: Vec<Bump> = (0..8)
            .map(|i| Bump::constant(1.5 + 2.0 * i as f64, 0.5, 0.0).unwrap())
            .collect();
        let p = SparsePotential::new("flat", bumps).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..=7 {
            let s = divergence_sequence(&p, n).unwrap().logmag();
            assert_relative_eq!(s, -(n as f64) * (4.0f64 * 3.0 * 1.5).ln(), max_relative = 1e-13);
            assert!(s < prev);
            prev = s;
        }
        let report = certify_zero_energy(&p, 7, CertificateConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn example_certificate() {
        let p = example_potential(11).unwrap();
        let report = certify_zero_energy(&p, 10, CertificateConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::DivergingPrefix);
        let s: Vec<f64> = report.records.iter().map(|r| r.log_seq_value.logmag()).collect();
        assert!(s[2..].windows(2).all(|w| w[1] > w[0]));
        assert!(s[9] - s[2] > 1e3);

        assert!(matches!(
            certify_zero_energy(&p, 3, CertificateConfig::default()),
            Err(BoundsError::PrefixTooShort { .. })
        ));
        assert!(matches!(
            certify_zero_energy(&example_potential(10).unwrap(), 10, CertificateConfig::default()),
            Err(BoundsError::InsufficientBumps { needed: 11, available: 10 })
        ));
    }

    #[test]
    fn verdict_is_prefix_stable() {
        let short = certify_zero_energy(&example_potential(8).unwrap(), 7, CertificateConfig::default()).unwrap();
        let long = certify_zero_energy(&example_potential(12).unwrap(), 7, CertificateConfig::default()).unwrap();
        assert_eq!(short.records, long.records);
        assert_eq!(short.verdict, long.verdict);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_divergence_check(1, 2.0).logmag(), 2.0);
        assert_eq!(ratio_divergence_check(3, 2.0).logmag(), 192.0);
        let mut prev = f64::NEG_INFINITY;
        for n in 2..=12 {
            let v = ratio_divergence_check(n, 2.0).logmag();
            assert!(v > prev);
            let lower = (n as f64 + 1.0 - 4.0) * (n as f64 + 1.0).powi(n as i32);
            assert!(v >= lower, "n={n}: {v} < {lower}");
            prev = v;
        }
    }

    #[test]
    fn csv_and_json_shapes() {
        let p = example_potential(7).unwrap();
        let report = certify_zero_energy(&p, 6, CertificateConfig::default()).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# potential=example"));
        assert_eq!(lines[1], CertificateReport::CSV_HEADER);
        assert_eq!(lines.len(), 2 + 6);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["records"].as_array().unwrap().len(), 6);
        assert!(json["verdict"].is_string());
    }
}
