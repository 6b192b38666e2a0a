use clap::{Args, Parser, Subcommand};
use quasitrace_cli::config::{ConfigError, EnergyGrid, HalfWidth, RunConfig};
use quasitrace_cli::suites::{self, SuiteError, Summary};
use std::path::PathBuf;
use std::process::ExitCode;

/// Verification suites for the Fibonacci Hamiltonian.
///
/// Exit status: 0 when every check passes, 1 when a check fails or a
/// computation errors, 2 on usage or configuration errors.
#[derive(Parser, Debug)]
#[command(name = "quasitrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Word combinatorics: complexity, census, boundary symbols, phase conjugacy.
    Words(RunArgs),
    /// Trace equalities across phases, norms, norm–derivative margins.
    Traces(RunArgs),
    /// Bands, derivative growth fit, norm growth.
    Spectrum(RunArgs),
    /// Abel-averaged window masses and the exponent trend.
    Dynamics(RunArgs),
    /// Aggregate the summaries found in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Load a JSON run configuration; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Additional couplings for the growth and exponent trends.
    #[arg(long, value_delimiter = ',')]
    trend_lambdas: Option<Vec<f64>>,
    /// Phase as a decimal, a fraction `p/q` or a multiple of ω (`omega/2`).
    #[arg(long)]
    theta: Vec<String>,
    /// Comma-separated phases.
    #[arg(long, value_delimiter = ',')]
    theta_list: Vec<String>,
    /// Number of seeded random phases appended to the list.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Energy grid `lo:hi:count`.
    #[arg(long, allow_hyphen_values = true)]
    energies: Option<String>,
    /// Comma-separated Abel timescales.
    #[arg(long = "T-grid", alias = "T", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Box half-width, or `auto`.
    #[arg(long = "N")]
    half_width: Option<String>,
    #[arg(long = "C1")]
    c1: Option<f64>,
    /// Window exponent; calibrated from the data when omitted.
    #[arg(long)]
    p: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error("cannot read configuration {0}: {1}")]
    ConfigFile(PathBuf, String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Suite(e) => e.exit_code() as u8,
            CliError::ConfigFile(..) => 2,
        }
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile(path.clone(), e.to_string()))?;
                serde_json::from_str(&text).map_err(|e| CliError::ConfigFile(path.clone(), e.to_string()))?
            }
            None => RunConfig::default(),
        };
        if let Some(l) = self.lambda {
            cfg.lambda = l;
            if self.energies.is_none() && self.config.is_none() {
                cfg.energies = EnergyGrid { lo: -3.0, hi: l + 3.0, count: cfg.energies.count };
            }
        }
        if let Some(ls) = self.trend_lambdas {
            cfg.trend_lambdas = ls;
        }
        let mut thetas = self.theta;
        thetas.extend(self.theta_list);
        if !thetas.is_empty() {
            cfg.thetas = thetas;
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        if let Some(e) = self.energies {
            cfg.energies = e.parse().map_err(|e: ConfigError| CliError::Suite(e.into()))?;
        }
        if let Some(t) = self.t_grid {
            cfg.t_grid = t;
        }
        if let Some(n) = self.half_width {
            cfg.half_width = n.parse::<HalfWidth>().map_err(|e| CliError::Suite(e.into()))?;
        }
        if let Some(c) = self.c1 {
            cfg.c1 = c;
        }
        if self.p.is_some() {
            cfg.p = self.p;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        cfg.validate().map_err(SuiteError::from)?;
        Ok(cfg)
    }
}

fn print_summary(s: &Summary) {
    for c in &s.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{}: {}", s.command, if s.passed { "all checks passed" } else { "some checks failed" });
}

type Suite = fn(&RunConfig) -> Result<Summary, SuiteError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let (args, suite): (RunArgs, Suite) = match cli.command {
        Command::Report { out } => {
            let report = suites::run_report(&out)?;
            for c in &report.commands {
                println!("[{}] {} {:?}", if c.passed { "PASS" } else { "FAIL" }, c.command, c.failed_checks);
            }
            return Ok(report.passed);
        }
        Command::Words(a) => (a, suites::run_words),
        Command::Traces(a) => (a, suites::run_traces),
        Command::Spectrum(a) => (a, suites::run_spectrum),
        Command::Dynamics(a) => (a, suites::run_dynamics),
    };
    let cfg = args.into_config()?;
    if let Some(j) = cfg.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let summary = suite(&cfg)?;
    print_summary(&summary);
    Ok(summary.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
