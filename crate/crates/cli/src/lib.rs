//! Command implementations behind the `sparsespec` binary.
//!
//! Every command returns an [`Outcome`]: the rendered table or report plus an
//! exit status. Rendering is separate from writing so the same bytes reach
//! stdout or `--out`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use sparsespec::bounds::{certify_zero_energy, BoundsError, CertificateConfig, Verdict};
use sparsespec::potential::{validate, PotentialError, PotentialFile, ValidationReport};
use sparsespec::spectral::form::{scan_lambda_row, scan_theta_row, ScanConfig, ScanTable};
use sparsespec::spectral::{shoot_negative_eigenvalue, DenseProblem, SpectralError};
use sparsespec::transfer::{constant_bump_closed_form, default_steps, integrate_bump, TransferError};
use sparsespec::{example_potential, Bump, SparsePotential};

pub const ENV_THREADS: &str = "SPARSESPEC_THREADS";

/// Stable exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Inconclusive = 1,
    Precondition = 2,
    Parse = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    fn precondition(message: impl Into<String>) -> Self {
        CliError {
            status: Status::Precondition,
            message: message.into(),
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        let status = match e {
            PotentialError::Parse(_) => Status::Parse,
            _ => Status::Precondition,
        };
        CliError {
            status,
            message: e.to_string(),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::precondition(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::precondition(e.to_string())
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        CliError::precondition(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "sparsespec", version, about = "Spectral diagnostics for sparse barrier potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Potential file, or a builtin: `example` (x_n = exp(n^n)) or `free` (V = 0).
    #[arg(long, global = true, default_value = "example")]
    pub potential: String,
    /// Number of bumps to use.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// RK4 steps per bump (default scales with width and height).
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Sample points per test function.
    #[arg(long, global = true, default_value_t = 4097)]
    pub grid: usize,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the sparse-potential conditions on a prefix.
    Validate {
        /// Minimum separation ratio for the last gap.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Zero-energy divergence certificate.
    Certify {
        /// Trailing records that must increase.
        #[arg(long, default_value_t = 4)]
        window: usize,
        #[arg(long, default_value_t = 0.0)]
        log_margin: f64,
    },
    /// Quadratic-form scans over boundary angles and Robin parameters.
    Scan {
        #[arg(long)]
        theta_min: Option<f64>,
        #[arg(long)]
        theta_max: Option<f64>,
        #[arg(long)]
        theta_step: Option<f64>,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        lambda_step: Option<f64>,
        /// Random test functions per angle.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Boundary angle θ(E) making a negative E an eigenvalue.
    Shoot {
        #[arg(long, allow_hyphen_values = true)]
        energy_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        energy_max: f64,
        #[arg(long, default_value_t = 0.05)]
        energy_step: f64,
        /// Also solve the finite-difference eigenproblem at each θ(E).
        #[arg(long)]
        dense: bool,
        #[arg(long, default_value_t = 1 << 14)]
        dense_intervals: usize,
    },
    /// RK4 bump integrator against the constant-height closed form.
    Oracle,
}

/// Rendered output and exit status of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub body: String,
}

impl Outcome {
    pub fn emit(&self, out: Option<&str>) -> std::io::Result<()> {
        match out {
            Some(path) => std::fs::write(path, &self.body),
            None => {
                print!("{}", self.body);
                Ok(())
            }
        }
    }
}

/// Validated command-line configuration shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential: SparsePotential,
    pub n_max: usize,
    pub steps: Option<usize>,
    pub grid_points: usize,
    pub seed: u64,
    pub format: Format,
}

/// Inclusive grid `min, min + step, …, ≤ max`.
pub fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && step > 0.0 && step.is_finite()) || min > max {
        return Err(CliError::precondition(format!(
            "empty grid: min={min} max={max} step={step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Loads `example`, `free` or a JSON file with at least `bumps` bumps when
/// `bumps` is given.
pub fn load_potential(name: &str, bumps: Option<usize>) -> Result<SparsePotential, CliError> {
    match name {
        "example" => Ok(example_potential(bumps.unwrap_or(8))?),
        "free" => Ok(SparsePotential::free()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::precondition(format!("cannot read {path}: {e}")))?;
            Ok(PotentialFile::from_json(&text)?.to_potential()?)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(ENV_THREADS).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn config(cli: &Cli, bumps_needed: impl Fn(usize) -> usize, default_n: usize) -> Result<RunConfig, CliError> {
    let n_req = cli.n.unwrap_or(default_n);
    let potential = if cli.potential == "example" {
        load_potential("example", Some(bumps_needed(n_req)))?
    } else {
        load_potential(&cli.potential, None)?
    };
    let n_max = match cli.n {
        Some(n) => n,
        None if cli.potential == "example" => n_req,
        None => potential.len().saturating_sub(bumps_needed(0)),
    };
    if bumps_needed(n_max) > potential.len() {
        return Err(CliError::precondition(format!(
            "n = {n_max} needs {} bumps, potential has {}",
            bumps_needed(n_max),
            potential.len()
        )));
    }
    Ok(RunConfig {
        potential,
        n_max,
        steps: cli.steps,
        grid_points: cli.grid,
        seed: cli.seed,
        format: cli.format,
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    configure_threads();
    match &cli.command {
        Command::Validate { threshold } => {
            if !matches!(cli.potential.as_str(), "example" | "free") {
                return validate_file(&cli.potential, cli.n, *threshold, cli.format);
            }
            let cfg = config(cli, |n| n, 8)?;
            cmd_validate(&cfg, *threshold)
        }
        Command::Certify { window, log_margin } => {
            let cfg = config(cli, |n| n + 1, 10)?;
            cmd_certify(
                &cfg,
                CertificateConfig {
                    window: *window,
                    log_margin: *log_margin,
                },
            )
        }
        Command::Scan {
            theta_min,
            theta_max,
            theta_step,
            lambda_min,
            lambda_max,
            lambda_step,
            samples,
        } => {
            let cfg = config(cli, |n| n, 8)?;
            let thetas = optional_grid(*theta_min, *theta_max, *theta_step, FRAC_PI_2 / 8.0)?;
            let lambdas = optional_grid(*lambda_min, *lambda_max, *lambda_step, 0.01)?;
            if thetas.is_empty() && lambdas.is_empty() {
                return Err(CliError::precondition(
                    "empty grid: give --theta-min/--theta-max or --lambda-min/--lambda-max",
                ));
            }
            cmd_scan(&cfg, &thetas, &lambdas, *samples)
        }
        Command::Shoot {
            energy_min,
            energy_max,
            energy_step,
            dense,
            dense_intervals,
        } => {
            let cfg = config(cli, |n| n, 2)?;
            let energies = grid(*energy_min, *energy_max, *energy_step)?;
            cmd_shoot(&cfg, &energies, dense.then_some(*dense_intervals))
        }
        Command::Oracle => cmd_oracle(cli.steps, cli.format),
    }
}

fn optional_grid(min: Option<f64>, max: Option<f64>, step: Option<f64>, default_step: f64) -> Result<Vec<f64>, CliError> {
    match (min, max) {
        (None, None) => Ok(Vec::new()),
        (Some(a), Some(b)) => grid(a, b, step.unwrap_or(default_step)),
        (Some(a), None) => grid(a, a, 1.0),
        (None, Some(b)) => grid(b, b, 1.0),
    }
}

/// Validates a file without building the potential first, so structural
/// failures still produce the per-condition report.
pub fn validate_file(path: &str, n: Option<usize>, threshold: f64, format: Format) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::precondition(format!("cannot read {path}: {e}")))?;
    let file = PotentialFile::from_json(&text)?;
    let mut bumps = file.to_bumps()?;
    bumps.truncate(n.unwrap_or(bumps.len()));
    let report = validate(&bumps, threshold)?;
    Ok(render_validation(report, &file.name, bumps.len(), format))
}

pub fn cmd_validate(cfg: &RunConfig, threshold: f64) -> Result<Outcome, CliError> {
    let prefix = cfg.potential.truncated(cfg.n_max);
    let report = prefix.validate(threshold)?;
    Ok(render_validation(report, prefix.name(), cfg.n_max, cfg.format))
}

fn render_validation(report: ValidationReport, name: &str, n: usize, format: Format) -> Outcome {
    let status = if report.passed() {
        Status::Success
    } else {
        Status::Precondition
    };
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => {
            let mut s = format!("# potential={name} n={n}\n{report}");
            let verdict = if report.passed() { "pass" } else { "fail" };
            let _ = writeln!(s, "result: {verdict}");
            s
        }
    };
    Outcome { status, body }
}

pub fn cmd_certify(cfg: &RunConfig, certificate: CertificateConfig) -> Result<Outcome, CliError> {
    let report = certify_zero_energy(&cfg.potential, cfg.n_max, certificate)?;
    let status = match report.verdict {
        Verdict::DivergingPrefix => Status::Success,
        Verdict::Inconclusive => Status::Inconclusive,
    };
    let body = match cfg.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json() + "\n",
    };
    Ok(Outcome { status, body })
}

pub fn cmd_scan(cfg: &RunConfig, thetas: &[f64], lambdas: &[f64], samples: usize) -> Result<Outcome, CliError> {
    let scan = ScanConfig {
        samples,
        grid_points: cfg.grid_points,
        seed: cfg.seed,
        ..ScanConfig::default()
    };
    let potential = cfg.potential.truncated(cfg.n_max);
    let theta_rows = thetas
        .par_iter()
        .enumerate()
        .map(|(i, &t)| scan_theta_row(&potential, t, i, &scan))
        .collect::<Result<Vec<_>, _>>()?;
    let lambda_rows = lambdas
        .par_iter()
        .map(|&l| scan_lambda_row(&potential, l, &scan))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = theta_rows;
    rows.extend(lambda_rows);
    let table = ScanTable { config: scan, rows };
    let body = match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json() + "\n",
    };
    Ok(Outcome {
        status: Status::Success,
        body,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootRow {
    pub energy: f64,
    pub theta: f64,
    pub log_relative_residual: Option<f64>,
    pub decay_witness: bool,
    pub dense_eigenvalue: Option<f64>,
    pub dense_negative_count: Option<usize>,
}

/// Largest truncation extent the dense oracle accepts.
const MAX_DENSE_EXTENT: f64 = 1e6;

pub fn shoot_rows(cfg: &RunConfig, energies: &[f64], dense: Option<usize>) -> Result<Vec<ShootRow>, CliError> {
    if let Some(e) = energies.iter().find(|&&e| e >= 0.0) {
        return Err(CliError::precondition(format!(
            "shooting needs E < 0, range contains {e}"
        )));
    }
    let potential = cfg.potential.truncated(cfg.n_max);
    energies
        .par_iter()
        .map(|&e| {
            let shot = shoot_negative_eigenvalue(&potential, e, cfg.n_max, cfg.steps)?;
            let (dense_eigenvalue, dense_negative_count) = match dense {
                Some(intervals) => {
                    let d = DenseProblem::for_energy(&potential, shot.boundary, e, intervals);
                    if d.extent.is_nan() || d.extent >= MAX_DENSE_EXTENT {
                        return Err(CliError::precondition(format!(
                            "dense oracle needs a domain below {MAX_DENSE_EXTENT:e}, got {:e}",
                            d.extent
                        )));
                    }
                    let count = d.negative_count();
                    (Some(d.eigenvalue(0)), Some(count))
                }
                None => (None, None),
            };
            Ok(ShootRow {
                energy: e,
                theta: shot.boundary.theta(),
                log_relative_residual: shot.log_relative_residual,
                decay_witness: shot.decay_witness,
                dense_eigenvalue,
                dense_negative_count,
            })
        })
        .collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_shoot(cfg: &RunConfig, energies: &[f64], dense: Option<usize>) -> Result<Outcome, CliError> {
    let rows = shoot_rows(cfg, energies, dense)?;
    let body = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
        Format::Csv => {
            let mut s = format!(
                "# potential={} n={}\nenergy,theta,log_relative_residual,decay_witness,dense_eigenvalue,dense_negative_count\n",
                cfg.potential.name(),
                cfg.n_max
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:.17e},{:.17e},{},{},{},{}",
                    r.energy,
                    r.theta,
                    opt(r.log_relative_residual.map(|x| format!("{x:.6e}"))),
                    r.decay_witness,
                    opt(r.dense_eigenvalue.map(|x| format!("{x:.10e}"))),
                    opt(r.dense_negative_count)
                );
            }
            s
        }
    };
    Ok(Outcome {
        status: Status::Success,
        body,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleRow {
    pub height: f64,
    pub half_width: f64,
    pub energy: f64,
    pub steps: usize,
    /// `max |R_rk4 − R_exact| / max |R_exact|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub max_deviation: f64,
    /// `log2(err(N/2) / err(N))` on the reference bump.
    pub richardson_order: f64,
}

/// Relative deviation of the RK4 propagator from the closed form.
pub fn integrator_deviation(bump: &Bump, energy: f64, steps: usize) -> Result<f64, CliError> {
    let rk = integrate_bump(bump, energy, steps)?;
    let exact = constant_bump_closed_form(bump.height_bound(), bump.half_width(), energy)?;
    Ok(rk.max_diff(&exact) / exact.max_abs())
}

/// Default sweep: `h − E` from −100 to 100 in steps of 10, three heights and
/// three half-widths.
pub fn oracle_grid() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for q in (-10..=10).map(|k| 10.0 * k as f64) {
        for h in [0.0, 1.0, 3.0] {
            for alpha in [0.1, 0.5, 1.0] {
                out.push((h, alpha, h - q));
            }
        }
    }
    out
}

pub fn oracle_report(steps: Option<usize>) -> Result<OracleReport, CliError> {
    let rows = oracle_grid()
        .par_iter()
        .map(|&(h, alpha, energy)| {
            let bump = Bump::constant(10.0, alpha, h)?;
            let n = steps.unwrap_or_else(|| default_steps(&bump, energy));
            Ok(OracleRow {
                height: h,
                half_width: alpha,
                energy,
                steps: n,
                deviation: integrator_deviation(&bump, energy, n)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let reference = Bump::constant(10.0, 0.5, 3.0)?;
    let coarse = integrator_deviation(&reference, 0.0, 32)?;
    let fine = integrator_deviation(&reference, 0.0, 64)?;
    Ok(OracleReport {
        rows,
        max_deviation,
        richardson_order: (coarse / fine).log2(),
    })
}

pub fn cmd_oracle(steps: Option<usize>, format: Format) -> Result<Outcome, CliError> {
    let report = oracle_report(steps)?;
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => {
            let mut s = format!(
                "# max_deviation={:.3e} richardson_order={:.4}\nheight,half_width,energy,steps,deviation\n",
                report.max_deviation, report.richardson_order
            );
            for r in &report.rows {
                let _ = writeln!(s, "{},{},{},{},{:.3e}", r.height, r.half_width, r.energy, r.steps, r.deviation);
            }
            s
        }
    };
    Ok(Outcome {
        status: Status::Success,
        body,
    })
}
