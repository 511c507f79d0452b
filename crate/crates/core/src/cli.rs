//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagnostics::DeltaCurve;
use crate::error::Error;
use crate::simbench::{run_benchmark, ExperimentConfig, ExperimentName};
use crate::weights::einv::{bound_checks, einv_of, verify_einv_bounds, EinvGrid, OccupancyLaw};
use crate::weights::WeightScheme;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "respen", version, about = "Resampling penalties for histogram model selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation benchmark and write results.csv and manifest.json.
    Bench(BenchArgs),
    /// Write the second-order bias curves as CSV.
    Diagnostics(DiagnosticsArgs),
    /// Evaluate e_inv and check its analytic brackets.
    Einv(EinvArgs),
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// JSON configuration; fields override the named preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated procedure tokens, e.g. `penloo,penrad+,mallows,vfcv5`.
    #[arg(long, value_delimiter = ',')]
    pub procedures: Option<Vec<String>>,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Draw a separate dataset for each procedure.
    #[arg(long)]
    pub unpaired: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    S1,
    S2,
    Hsd1,
    Hsd2,
}

impl From<Experiment> for ExperimentName {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::S1 => ExperimentName::S1,
            Experiment::S2 => ExperimentName::S2,
            Experiment::Hsd1 => ExperimentName::Hsd1,
            Experiment::Hsd2 => ExperimentName::Hsd2,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct DiagnosticsArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Comma-separated subset of efr,rad,poi,rho2,rho4,loo.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Law {
    Binom,
    Hyper,
    Poisson,
}

#[derive(Debug, clap::Args)]
pub struct EinvArgs {
    /// Evaluate a single law instead of the verification grid.
    #[arg(long, value_enum)]
    pub law: Option<Law>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub r: Option<u64>,
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long)]
    pub mu: Option<f64>,
}

/// Record of a benchmark run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub artifact_version: String,
    pub base_seed: u64,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Csv(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Parses `args` and runs the command, writing reports to `stdout`.
pub fn run<I, T, W>(args: I, stdout: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Bench(a) => cmd_bench(&a, stdout),
        Command::Diagnostics(a) => cmd_diagnostics(&a, stdout),
        Command::Einv(a) => cmd_einv(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn bench_config(args: &BenchArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&args.config, args.experiment) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            if let (Some(exp), Some(obj)) = (args.experiment, doc.as_object_mut()) {
                let name = serde_json::to_value(ExperimentName::from(exp)).expect("name serializes");
                obj.entry("name").or_insert(name);
            }
            ExperimentConfig::from_json(&doc.to_string())?
        }
        (None, Some(exp)) => ExperimentConfig::preset(exp.into())?,
        (None, None) => return Err(CliError::usage("either --experiment or --config is required")),
    };
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    if let Some(p) = &args.procedures {
        config.procedures = p.iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
    }
    if args.unpaired {
        config.paired = false;
    }
    config.validate()?;
    Ok(config)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn cmd_bench<W: Write>(args: &BenchArgs, stdout: &mut W) -> Result<i32, CliError> {
    let config = bench_config(args)?;
    let started = now();
    let result = match args.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::usage(e.to_string()))?;
            pool.install(|| run_benchmark(&config))
        }
        None => run_benchmark(&config),
    }?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let csv_path = args.out.join("results.csv");
    let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    result.write_csv(file).map_err(|e| CliError::io(&csv_path, e))?;

    let manifest_path = args.out.join("manifest.json");
    let manifest = RunManifest {
        base_seed: config.base_seed,
        config,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        outputs: vec![csv_path.display().to_string(), manifest_path.display().to_string()],
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(|e| CliError::io(&manifest_path, e))?;

    let mut table = Vec::new();
    result.write_csv(&mut table).map_err(|e| CliError::io(&csv_path, e))?;
    stdout.write_all(&table).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    Ok(EXIT_OK)
}

fn scheme_for(token: &str, n: usize) -> Option<WeightScheme> {
    Some(match token {
        "efr" => WeightScheme::efron(n),
        "rad" => WeightScheme::rademacher(),
        "poi" => WeightScheme::poisson(),
        "rho2" => WeightScheme::Rho { q: n / 2 },
        "rho4" => WeightScheme::Rho { q: (n / 4).max(1) },
        "loo" => WeightScheme::Loo,
        _ => return None,
    })
}

pub fn cmd_diagnostics<W: Write>(args: &DiagnosticsArgs, stdout: &mut W) -> Result<i32, CliError> {
    if args.n < 4 {
        return Err(CliError::usage("--n must be at least 4"));
    }
    let tokens: Vec<String> = match &args.schemes {
        Some(s) => s.iter().map(|t| t.trim().to_ascii_lowercase()).collect(),
        None => ["efr", "rad", "poi", "rho2", "rho4", "loo"].iter().map(|s| s.to_string()).collect(),
    };
    let mut schemes = Vec::new();
    for t in &tokens {
        let scheme = scheme_for(t, args.n).ok_or_else(|| CliError::usage(format!("unknown scheme {t}")))?;
        schemes.push((t.as_str(), scheme));
    }
    let grid: Vec<usize> = (3..=args.n).collect();
    let curve = DeltaCurve::compute(args.n, &grid, &schemes)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            curve.write_csv(file).map_err(|e| CliError::io(path, e))?;
        }
        None => curve.write_csv(&mut *stdout).map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }
    Ok(EXIT_OK)
}

fn single_law(args: &EinvArgs, law: Law) -> Result<OccupancyLaw, CliError> {
    let need = |name: &str| CliError::usage(format!("--{name} is required for this law"));
    let law = match law {
        Law::Binom => OccupancyLaw::Binomial { n: args.n.ok_or_else(|| need("n"))?, p: args.p.ok_or_else(|| need("p"))? },
        Law::Hyper => OccupancyLaw::Hypergeometric {
            n: args.n.ok_or_else(|| need("n"))?,
            r: args.r.ok_or_else(|| need("r"))?,
            q: args.q.ok_or_else(|| need("q"))?,
        },
        Law::Poisson => OccupancyLaw::Poisson { mu: args.mu.ok_or_else(|| need("mu"))? },
    };
    law.validate()?;
    Ok(law)
}

pub fn cmd_einv<W: Write>(args: &EinvArgs, stdout: &mut W) -> Result<i32, CliError> {
    let out_err = |e: io::Error| CliError::io(Path::new("<stdout>"), e);
    if let Some(kind) = args.law {
        let law = single_law(args, kind)?;
        let value = einv_of(law);
        writeln!(stdout, "{law:?}").map_err(out_err)?;
        writeln!(stdout, "e_inv = {value}").map_err(out_err)?;
        let checks = bound_checks(law);
        for c in &checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            writeln!(stdout, "{verdict}  {:<32} [{}, {}]", c.family.name(), c.lower, c.upper).map_err(out_err)?;
        }
        return Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_VERIFY });
    }

    let report = verify_einv_bounds(&EinvGrid::default());
    writeln!(stdout, "{:<32} {:>9} {:>7} {:>12}", "family", "checked", "failed", "min margin").map_err(out_err)?;
    for (family, s) in &report.families {
        writeln!(stdout, "{:<32} {:>9} {:>7} {:>12.3e}", family.name(), s.checked, s.failed, s.min_margin)
            .map_err(out_err)?;
    }
    for f in report.failures.iter().take(20) {
        writeln!(stdout, "FAIL {:?}: value {} not in [{}, {}]", f.law, f.value, f.lower, f.upper).map_err(out_err)?;
    }
    let verdict = if report.all_passed() { "all bounds hold" } else { "bound violations found" };
    writeln!(stdout, "{verdict} ({} checks)", report.total_checks()).map_err(out_err)?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY })
}
