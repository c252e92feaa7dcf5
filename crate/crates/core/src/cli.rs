//! Command-line front end. `run` takes the argument list and output sinks and
//! returns the process exit code, so the binary is a thin wrapper.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};
use num_complex::Complex64;
use serde::Serialize;

use crate::classical::{self, ClassicalModel, MonteCarloReport};
use crate::error::{Error, Result};
use crate::fock::{self, FockKind, FockModel};
use crate::gaussian::GaussianState;
use crate::qfi::{self, DisplacementModel, PhaseModel};
use crate::scenarios::{self, Axis, ScenarioConfig, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Largest allowed Gaussian/Fock disagreement in oracle-check.
pub const ORACLE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "gaussfish", version, about = "Cramér-Rao bounds for Gaussian probes under thermal loss")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for sweeps and Monte Carlo runs.
    #[arg(long, global = true, env = "GAUSSFISH_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds at the configured probe and time.
    Bounds,
    /// Bounds over the configured sweep axis.
    Sweep,
    /// Compare Gaussian formulas against truncated Fock-space computations.
    OracleCheck {
        #[arg(long, default_value_t = fock::DEFAULT_DIM)]
        dim: usize,
        /// Real coherent amplitude of the coherent-displacement case.
        #[arg(long, default_value_t = 0.6)]
        alpha: f64,
    },
    /// Monte Carlo MLE variances against the Cramér-Rao bound.
    ClassicalDemo {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
    },
    /// Coherent vs squeezed phase estimation against mean photon number.
    PhaseDemo {
        #[arg(long, default_value_t = 10)]
        max_n: usize,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(out) => {
            if let Err(e) = emit(&cli, &out.body, stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_INPUT;
            }
            for line in &out.notes {
                let _ = writeln!(stderr, "{line}");
            }
            out.code
        }
        Err(e) => {
            error!("{e}");
            let _ = writeln!(stderr, "error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

struct Outcome {
    body: String,
    /// Diagnostics for standard error.
    notes: Vec<String>,
    code: i32,
}

fn emit(cli: &Cli, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match &cli.out {
        Some(p) => fs::write(p, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Bounds => cmd_bounds(&load_config(cli)?, cli.format),
        Command::Sweep => cmd_sweep(&load_config(cli)?, cli.format),
        Command::OracleCheck { dim, alpha } => Ok(cmd_oracle_check(*dim, *alpha, cli.format)),
        Command::ClassicalDemo { samples, reps } => cmd_classical_demo(*samples, *reps, cli.seed, cli.format),
        Command::PhaseDemo { max_n } => cmd_phase_demo(*max_n, cli.format),
    }
}

/// Reads and validates the configuration before anything is computed.
pub fn load_config_file(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Validation("--config is required".into()))?;
    load_config_file(path)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn csv_table(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    scenarios::write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

fn cmd_bounds(cfg: &ScenarioConfig, format: Format) -> Result<Outcome> {
    let x = match cfg.sweep.axis {
        Axis::R => cfg.probe.squeezing().unwrap_or(0.0),
        Axis::T => cfg.t,
    };
    let point = scenarios::run_point_full(cfg, x)?;
    let body = match format {
        Format::Csv => csv_table(&[point.row]),
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                row: SweepRow,
                report: &'a qfi::QfimReport,
                f_c: Vec<Vec<f64>>,
            }
            to_json(&Out { row: point.row, report: &point.report, f_c: crate::numkit::to_rows(&point.f_c) })?
        }
    };
    Ok(Outcome { body, notes: vec![], code: EXIT_OK })
}

fn cmd_sweep(cfg: &ScenarioConfig, format: Format) -> Result<Outcome> {
    if cfg.sweep.values().is_empty() {
        return Err(Error::Validation(format!(
            "sweep range is empty (start {} > stop {})",
            cfg.sweep.start, cfg.sweep.stop
        )));
    }
    let out = scenarios::sweep(cfg)?;
    info!("swept {} points, {} failed", out.rows.len(), out.failures.len());
    let body = match format {
        Format::Csv => csv_table(&out.rows),
        Format::Json => to_json(&out)?,
    };
    let code = if out.failures.is_empty() { EXIT_OK } else { EXIT_NUMERIC };
    let notes = out.failures.iter().map(|f| format!("numeric failure: {f}")).collect();
    Ok(Outcome { body, notes, code })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub case: String,
    pub dim: usize,
    pub quantity: String,
    pub gaussian: f64,
    pub fock: f64,
    pub gap: f64,
    /// Set when the case could not be evaluated.
    pub failure: Option<String>,
}

impl OracleCase {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.gap <= ORACLE_TOL
    }
}

fn compare_entries(case: &str, dim: usize, quantity: &str, g: &[f64], f: &[f64]) -> Vec<OracleCase> {
    g.iter()
        .zip(f)
        .enumerate()
        .map(|(k, (a, b))| OracleCase {
            case: case.into(),
            dim,
            quantity: format!("{quantity}[{k}]"),
            gaussian: *a,
            fock: *b,
            gap: (a - b).abs(),
            failure: None,
        })
        .collect()
}

fn failed_case(case: &str, dim: usize, e: &Error) -> OracleCase {
    OracleCase {
        case: case.into(),
        dim,
        quantity: "-".into(),
        gaussian: f64::NAN,
        fock: f64::NAN,
        gap: f64::NAN,
        failure: Some(e.to_string()),
    }
}

fn flat(m: &crate::numkit::RMat) -> Vec<f64> {
    m.iter().copied().collect()
}

/// Gaussian vs Fock QFIM for coherent displacement (amplitude `alpha`),
/// thermal displacement and squeezed-vacuum phase estimation at Fock dimension `dim`.
pub fn oracle_suite(dim: usize, alpha: f64) -> Vec<OracleCase> {
    let n_th = 0.7;
    let r = 0.5;
    let q = alpha * std::f64::consts::SQRT_2;
    type CaseFn = Box<dyn Fn() -> Result<Vec<OracleCase>>>;
    let cases: Vec<(&str, CaseFn)> = vec![
        (
            "coherent-displacement",
            Box::new(move || {
                let g =
                    qfi::qfim_sld(&DisplacementModel::new(&GaussianState::coherent(&[(q, 0.0)])?, 0)?, &[0.0, 0.0])?;
                let f =
                    fock::qfim_fock_sld(&FockModel::displacement(FockKind::Vacuum, Complex64::new(alpha, 0.0), dim)?)?;
                Ok(compare_entries("coherent-displacement", dim, "sld", &flat(&g), &flat(&f)))
            }),
        ),
        (
            "thermal-displacement",
            Box::new(move || {
                let model = DisplacementModel::new(&GaussianState::thermal(1, n_th)?, 0)?;
                let fm = FockModel::displacement(FockKind::Thermal { n_th }, Complex64::new(0.0, 0.0), dim)?;
                let mut out = compare_entries(
                    "thermal-displacement",
                    dim,
                    "sld",
                    &flat(&qfi::qfim_sld(&model, &[0.0, 0.0])?),
                    &flat(&fock::qfim_fock_sld(&fm)?),
                );
                let g_r = qfi::qfim_rld(&model, &[0.0, 0.0])?;
                let f_r = fock::qfim_fock_rld(&fm)?;
                let parts = |m: &crate::numkit::CMat| m.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>();
                out.extend(compare_entries("thermal-displacement", dim, "rld", &parts(&g_r), &parts(&f_r)));
                Ok(out)
            }),
        ),
        (
            "squeezed-phase",
            Box::new(move || {
                let g = qfi::qfim_sld(&PhaseModel { probe: GaussianState::squeezed_vacuum(&[r])? }, &[0.0])?;
                let f = fock::qfim_fock_sld(&FockModel::phase(FockKind::Squeezed { r }, 0.0, dim)?)?;
                Ok(compare_entries("squeezed-phase", dim, "sld", &flat(&g), &flat(&f)))
            }),
        ),
    ];
    cases.into_iter().flat_map(|(name, f)| f().unwrap_or_else(|e| vec![failed_case(name, dim, &e)])).collect()
}

fn cmd_oracle_check(dim: usize, alpha: f64, format: Format) -> Outcome {
    let cases = oracle_suite(dim, alpha);
    let mut notes = vec![];
    for c in cases.iter().filter(|c| !c.passed()) {
        notes.push(match &c.failure {
            Some(f) => format!("{}: {f}", c.case),
            None => format!("{} {}: gap {:e} exceeds {ORACLE_TOL:e}", c.case, c.quantity, c.gap),
        });
    }
    let code = if notes.is_empty() { EXIT_OK } else { EXIT_CHECK_FAILED };
    let body = match format {
        Format::Csv => {
            let mut s = String::from("case,dim,quantity,gaussian,fock,gap,status\n");
            for c in &cases {
                let status = if c.passed() { "pass" } else { "fail" };
                s.push_str(&format!(
                    "{},{},{},{},{},{},{status}\n",
                    c.case, c.dim, c.quantity, c.gaussian, c.fock, c.gap
                ));
            }
            s
        }
        Format::Json => to_json(&cases).unwrap_or_default(),
    };
    Outcome { body, notes, code }
}

/// Monte Carlo runs of the demo: Bernoulli(0.3) and Normal(mean 1, variance 2).
pub fn classical_demo(samples: usize, reps: usize, seed: u64) -> Result<Vec<MonteCarloReport>> {
    Ok(vec![
        classical::mle_monte_carlo(&ClassicalModel::Bernoulli, &[0.3], samples, reps, seed)?,
        classical::mle_monte_carlo(&ClassicalModel::Normal, &[1.0, 2.0], samples, reps, seed)?,
    ])
}

fn cmd_classical_demo(samples: usize, reps: usize, seed: u64, format: Format) -> Result<Outcome> {
    let reports = classical_demo(samples, reps, seed)?;
    let body = match format {
        Format::Csv => {
            let mut s = String::from("model,parameter,theta,crlb,empirical_variance,ratio\n");
            for r in &reports {
                for j in 0..r.theta.len() {
                    s.push_str(&format!(
                        "{},{j},{},{},{},{}\n",
                        r.model, r.theta[j], r.crlb[j], r.empirical_variance[j], r.ratio[j]
                    ));
                }
            }
            s
        }
        Format::Json => to_json(&reports)?,
    };
    Ok(Outcome { body, notes: vec![], code: EXIT_OK })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseRow {
    /// Mean photon number of the probe.
    pub n: usize,
    pub coherent_qfi: f64,
    pub coherent_qcrb: f64,
    /// Standard quantum limit 1/N.
    pub sql: f64,
    pub squeezed_qfi: f64,
    pub squeezed_qcrb: f64,
    /// Heisenberg-limit reference 1/(N(N+1)).
    pub hl: f64,
}

/// Phase QFI of a coherent and a squeezed-vacuum probe with N photons, N = 1..=max_n.
pub fn phase_table(max_n: usize) -> Result<Vec<PhaseRow>> {
    (1..=max_n)
        .map(|n| {
            let nf = n as f64;
            let coh = GaussianState::coherent(&[((2.0 * nf).sqrt(), 0.0)])?;
            let sq = GaussianState::squeezed_vacuum(&[nf.sqrt().asinh()])?;
            let coherent_qfi = qfi::qfim_sld(&PhaseModel { probe: coh }, &[0.0])?[(0, 0)];
            let squeezed_qfi = qfi::qfim_sld(&PhaseModel { probe: sq }, &[0.0])?[(0, 0)];
            Ok(PhaseRow {
                n,
                coherent_qfi,
                coherent_qcrb: 1.0 / coherent_qfi,
                sql: 1.0 / nf,
                squeezed_qfi,
                squeezed_qcrb: 1.0 / squeezed_qfi,
                hl: 1.0 / (nf * (nf + 1.0)),
            })
        })
        .collect()
}

fn cmd_phase_demo(max_n: usize, format: Format) -> Result<Outcome> {
    let rows = phase_table(max_n)?;
    let body = match format {
        Format::Csv => {
            let mut s = String::from("n,coherent_qfi,coherent_qcrb,sql,squeezed_qfi,squeezed_qcrb,hl\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.n, r.coherent_qfi, r.coherent_qcrb, r.sql, r.squeezed_qfi, r.squeezed_qcrb, r.hl
                ));
            }
            s
        }
        Format::Json => to_json(&rows)?,
    };
    Ok(Outcome { body, notes: vec![], code: EXIT_OK })
}
