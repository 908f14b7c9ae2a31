//! `noma-pep` command line: analytic curves, simulation, diversity tables,
//! bounds and power-allocation sweeps written as CSV plus a run manifest.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod settings;

use settings::{CommandDefaults, RawSettings, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_ENUMERATION_CAP: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] noma_pep::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no grid point satisfies the PEP threshold")]
    Infeasible,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use noma_pep::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Infeasible => EXIT_INFEASIBLE,
            CliError::Core(E::NumericalFailure(_)) => EXIT_NUMERICAL,
            CliError::Core(E::EnumerationCap { .. }) => EXIT_ENUMERATION_CAP,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "noma-pep", version, about = "Pairwise error probability and power allocation for downlink NOMA with SIC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Averaged analytic PEP per user and symbol pair.
    Pep,
    /// Monte Carlo SIC simulation.
    Simulate,
    /// Effective diversity (ratio form and finite difference) of analytic PEP curves.
    Diversity,
    /// Chernoff-based high-SNR bounds against the quadrature PEP.
    Bound,
    /// Grid search for the power allocation.
    Optimize,
    /// Three users, analytic vs simulated PEP per user over 0-40 dB.
    Fig2,
    /// Three users, effective diversity of the analytic curves.
    Fig3,
    /// Two users, sweep of alpha_1 at 30 dB with the PEP threshold.
    Fig4,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pep => "pep",
            Command::Simulate => "simulate",
            Command::Diversity => "diversity",
            Command::Bound => "bound",
            Command::Optimize => "optimize",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
        }
    }

    fn defaults(self) -> CommandDefaults {
        match self {
            Command::Optimize => CommandDefaults {
                users: Some(2),
                snr_db: Some("30"),
                ..Default::default()
            },
            Command::Fig2 | Command::Fig3 => CommandDefaults {
                alpha: Some("0.7,0.2,0.1"),
                snr_db: Some("0:5:40"),
                ..Default::default()
            },
            Command::Fig4 => CommandDefaults {
                alpha: Some("0.8,0.2"),
                snr_db: Some("30"),
                sic_mode: Some("weighted"),
                grid_step: Some("0.001"),
                weight_trials: Some("4000000"),
                ..Default::default()
            },
            _ => CommandDefaults::default(),
        }
    }
}

/// Flags mirror the config keys one-to-one and override them.
#[derive(Debug, Args)]
struct Opts {
    /// `key = value` config file (a previous manifest works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of users L.
    #[arg(long, global = true)]
    users: Option<String>,
    /// Power coefficients `a1,a2,...` (descending, summing to 1).
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Total transmit power P.
    #[arg(long, global = true)]
    power: Option<String>,
    /// Rayleigh parameter: h ~ CN(0, 2 sigma_h_sq).
    #[arg(long, global = true)]
    sigma_h_sq: Option<String>,
    /// Transmit SNR 10 log10(P/noise) in dB: `a,b,c` or `start:step:stop`.
    #[arg(long, global = true)]
    snr_db: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Monte Carlo trials per SNR point.
    #[arg(long, global = true)]
    trials: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<String>,
    /// perfect | pattern | weighted
    #[arg(long, global = true)]
    sic_mode: Option<String>,
    /// Pattern-mode SIC errors per prior user: `tx:det` or `-`, comma separated.
    #[arg(long, global = true)]
    sic_pattern: Option<String>,
    /// Trials used to estimate weighted-mode SIC weights.
    #[arg(long, global = true)]
    weight_trials: Option<String>,
    /// Fixed symbol index per user instead of uniformly random symbols.
    #[arg(long, global = true)]
    symbols: Option<String>,
    /// Transmitted symbol index of the reported pair.
    #[arg(long, global = true)]
    tx: Option<String>,
    /// Competing symbol index of the reported pair.
    #[arg(long, global = true)]
    rx: Option<String>,
    /// Per-user PEP threshold.
    #[arg(long, global = true)]
    pth: Option<String>,
    #[arg(long, global = true)]
    grid_step: Option<String>,
    /// average | user:N
    #[arg(long, global = true)]
    objective: Option<String>,
}

impl Opts {
    fn flag_values(&self) -> [(&'static str, Option<&String>); 17] {
        [
            ("users", self.users.as_ref()),
            ("alpha", self.alpha.as_ref()),
            ("power", self.power.as_ref()),
            ("sigma_h_sq", self.sigma_h_sq.as_ref()),
            ("snr_db", self.snr_db.as_ref()),
            ("seed", self.seed.as_ref()),
            ("trials", self.trials.as_ref()),
            ("workers", self.workers.as_ref()),
            ("sic_mode", self.sic_mode.as_ref()),
            ("sic_pattern", self.sic_pattern.as_ref()),
            ("weight_trials", self.weight_trials.as_ref()),
            ("symbols", self.symbols.as_ref()),
            ("tx", self.tx.as_ref()),
            ("rx", self.rx.as_ref()),
            ("pth", self.pth.as_ref()),
            ("grid_step", self.grid_step.as_ref()),
            ("objective", self.objective.as_ref()),
        ]
    }
}

/// A CSV produced by a command.
pub struct Output {
    pub name: String,
    pub body: String,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("noma-pep: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, argv: &[OsString]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut raw = match &cli.opts.config {
        Some(path) => RawSettings::load(path)?,
        None => RawSettings::default(),
    };
    for (key, value) in cli.opts.flag_values() {
        raw.set(key, value);
    }
    let settings = Settings::resolve(&raw, &cli.command.defaults())?;
    if let Some(n) = settings.workers {
        // best effort: the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = settings::out_dir(cli.opts.out.as_ref());
    let (outputs, outcome) = commands::dispatch(cli.command, &settings)?;
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    for o in &outputs {
        write_file(&dir.join(&o.name), &o.body)?;
    }
    let manifest = manifest_text(cli.command, &settings, argv, &outputs, started.elapsed().as_secs_f64());
    write_file(&dir.join("manifest.txt"), &manifest)?;
    for o in &outputs {
        eprintln!("wrote {}", dir.join(&o.name).display());
    }
    outcome
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn manifest_text(command: Command, s: &Settings, argv: &[OsString], outputs: &[Output], secs: f64) -> String {
    let mut out = String::new();
    let line: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let _ = writeln!(out, "meta.command = {}", command.name());
    let _ = writeln!(out, "meta.command_line = {}", line.join(" "));
    let _ = writeln!(out, "meta.version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "meta.snr_convention = snr_db = 10 log10(P / noise_var); h ~ CN(0, 2 sigma_h_sq); mean SNR = 2 sigma_h_sq P / noise_var"
    );
    let names: Vec<&str> = outputs.iter().map(|o| o.name.as_str()).collect();
    let _ = writeln!(out, "meta.outputs = {}", names.join(","));
    let _ = writeln!(out, "meta.duration_s = {secs:.3}");
    out.push_str(&s.to_config_text());
    out
}
