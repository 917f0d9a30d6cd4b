//! Command-line front end: CSV ingestion and the `test`, `simulate` and
//! `limit` subcommands.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use quantsig::asymptotics::{kiefer_mueller_sup, DEFAULT_GRID_M, DEFAULT_PATHS};
use quantsig::bandwidth::BandwidthSet;
use quantsig::process::{fit_quantile_curve, t_original_surface, RegionSpec};
use quantsig::simulation::{run_power_study, Model, Scenario, StudyConfig, DESK_RUNS, FULL_RUNS};
use quantsig::{run_test, with_workers, Dataset, Error, EstimatorConfig, RearrangeConfig, TestSettings};

/// Below this sample size `test` warns but still runs.
pub const RECOMMENDED_MIN_N: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "quantsig", version, about = "Test whether covariates Z matter for a conditional quantile of Y")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the bootstrap significance test on a CSV file.
    Test(TestArgs),
    /// Monte Carlo rejection rates for the simulation models.
    Simulate(SimulateArgs),
    /// Quantiles of the Kiefer–Müller limit of the statistic.
    Limit(LimitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Comma-separated X columns.
    #[arg(long, value_delimiter = ',', default_value = "x")]
    pub x_cols: Vec<String>,
    /// Comma-separated Z columns.
    #[arg(long, value_delimiter = ',', default_value = "z")]
    pub z_cols: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap replications.
    #[arg(long, default_value_t = 300)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Fixed smoothing bandwidth h instead of the data-driven rule.
    #[arg(long)]
    pub bandwidth_h: Option<f64>,
    /// Also report sup|Tₙ| of the uncentered process, dropping observations
    /// within this distance of the edge of the X range.
    #[arg(long)]
    pub trim_boundary: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model: `k,l` for location k and scale l, or `q1_2d`/`q2_2d`. Repeatable.
    #[arg(long, required = true)]
    pub scenario: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Sample size per run.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Monte Carlo runs (default 200).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Use 1000 runs unless --runs is given.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value_t = 300)]
    pub bootstrap: usize,
    /// Test levels. Repeatable or comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.025, 0.05, 0.10])]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub bandwidth_h: Option<f64>,
    /// Include wall-clock times (output is then no longer reproducible).
    #[arg(long)]
    pub wall_time: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    pub paths: usize,
    /// Grid resolution m of the (m+1)² sheet.
    #[arg(long, default_value_t = DEFAULT_GRID_M)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Failure category; determines the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidBandwidth { .. } | Error::InvalidLevel(_) | Error::InvalidConfig(_) => ErrorKind::Config,
            Error::SampleTooSmall { .. } | Error::DegenerateSample(_) | Error::InvalidData(_) => ErrorKind::Data,
            Error::InvalidVariance(_) | Error::EmptyWindow | Error::SingularDesign => ErrorKind::Numeric,
        };
        Self { kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(format!("I/O error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError { kind: ErrorKind::Numeric, message: format!("could not encode output: {e}") }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Which CSV columns play which role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRoles {
    pub y: String,
    pub x: Vec<String>,
    pub z: Vec<String>,
}

impl ColumnRoles {
    pub fn validate(&self) -> CliResult<()> {
        if self.x.is_empty() || self.z.is_empty() {
            return Err(CliError::config("at least one x column and one z column are required"));
        }
        let mut all: Vec<&str> = vec![self.y.as_str()];
        all.extend(self.x.iter().map(String::as_str));
        all.extend(self.z.iter().map(String::as_str));
        for (i, a) in all.iter().enumerate() {
            if all[..i].contains(a) {
                return Err(CliError::config(format!("column '{a}' is assigned more than one role")));
            }
        }
        Ok(())
    }
}

/// A loaded file plus what was read from it.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub data: Dataset<f64>,
    pub warnings: Vec<String>,
}

/// Reads the selected columns of a headed CSV file, rows in file order.
pub fn load_csv(path: &Path, roles: &ColumnRoles) -> CliResult<Loaded> {
    roles.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| CliError::data(format!("cannot read header: {e}")))?.clone();
    let index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("column '{name}' not found in header")))
    };
    let yi = index(&roles.y)?;
    let xi: Vec<usize> = roles.x.iter().map(|c| index(c)).collect::<CliResult<_>>()?;
    let zi: Vec<usize> = roles.z.iter().map(|c| index(c)).collect::<CliResult<_>>()?;

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let rec = rec.map_err(|e| CliError::data(format!("row {line}: {e}")))?;
        let cell = |c: usize| -> CliResult<f64> {
            let raw = rec.get(c).unwrap_or("");
            let name = &header[c];
            if raw.is_empty() {
                return Err(CliError::data(format!("row {line}, column '{name}': empty cell")));
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::data(format!("row {line}, column '{name}': cannot parse '{raw}' as a finite number"))),
            }
        };
        y.push(cell(yi)?);
        for &c in &xi {
            x.push(cell(c)?);
        }
        for &c in &zi {
            z.push(cell(c)?);
        }
    }
    let n = y.len();
    let data = Dataset::new(y, x, xi.len(), z, zi.len())?;
    let mut warnings = Vec::new();
    if n < RECOMMENDED_MIN_N {
        warnings.push(format!("sample too small for reliable inference: n = {n} < {RECOMMENDED_MIN_N}"));
    }
    Ok(Loaded { data, warnings })
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::config("alpha must be in (0,1)"))
    }
}

fn check_tau(tau: f64) -> CliResult<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(CliError::config("tau must be in (0,1)"))
    }
}

fn check_workers(workers: usize) -> CliResult<()> {
    if workers == 0 {
        Err(CliError::config("workers must be at least 1"))
    } else {
        Ok(())
    }
}

/// The maximizing grid location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxJson {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Output of `test`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReportJson {
    pub k_stat: f64,
    pub boot_quantile: f64,
    pub p_value: f64,
    pub reject: bool,
    pub tau_hat: f64,
    pub bandwidths: BandwidthSet<f64>,
    pub argmax: ArgmaxJson,
    pub n_reps: usize,
    pub seed: u64,
    pub n: usize,
    pub tau: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_original_sup: Option<f64>,
}

/// Output of `limit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReportJson {
    pub tau: f64,
    pub grid_m: usize,
    pub paths: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
}

pub const LIMIT_LEVELS: [f64; 6] = [0.5, 0.75, 0.9, 0.95, 0.975, 0.99];

pub fn cmd_test(args: &TestArgs) -> CliResult<(TestReportJson, Vec<String>)> {
    check_alpha(args.alpha)?;
    check_tau(args.tau)?;
    check_workers(args.workers)?;
    if args.bootstrap == 0 {
        return Err(CliError::config("bootstrap must be at least 1"));
    }
    let roles = ColumnRoles { y: args.y_col.clone(), x: args.x_cols.clone(), z: args.z_cols.clone() };
    let Loaded { data, warnings } = load_csv(&args.data, &roles)?;
    let mut settings = TestSettings::new(args.tau, args.alpha, args.seed);
    settings.n_reps = args.bootstrap;
    settings.h_override = args.bandwidth_h;
    let report = with_workers(args.workers, || run_test(&data, &settings))??;

    let t_original_sup = match args.trim_boundary {
        None => None,
        Some(h) => {
            let g = quantsig::select_g(&data)?;
            let bw = report.bandwidths;
            let cfg = EstimatorConfig::new(bw.h, bw.d_smooth);
            let fit = fit_quantile_curve(&data, args.tau, &cfg, &RearrangeConfig::new(bw.b), &g)?;
            let region = RegionSpec { trim_boundary: Some(h), ..RegionSpec::unbounded(data.d()) };
            Some(t_original_surface(&data, &fit, &region)?.sup_abs)
        }
    };
    let o = report.outcome;
    Ok((
        TestReportJson {
            k_stat: o.k_stat,
            boot_quantile: o.boot_quantile,
            p_value: o.p_value,
            reject: o.reject,
            tau_hat: report.tau_hat,
            bandwidths: report.bandwidths,
            argmax: ArgmaxJson { x: o.argmax.x, z: o.argmax.z },
            n_reps: args.bootstrap,
            seed: args.seed,
            n: report.n,
            tau: args.tau,
            alpha: args.alpha,
            t_original_sup,
        },
        warnings,
    ))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<quantsig::RejectionTable> {
    check_tau(args.tau)?;
    check_workers(args.workers)?;
    for &a in &args.alpha {
        check_alpha(a)?;
    }
    let scenarios = args
        .scenario
        .iter()
        .map(|s| {
            let model: Model = s.parse().map_err(|e: Error| CliError::config(e.to_string()))?;
            Scenario::new(model, args.tau, args.n).map_err(|e| CliError::config(e.to_string()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let runs = args.runs.unwrap_or(if args.full_scale { FULL_RUNS } else { DESK_RUNS });
    let cfg = StudyConfig {
        runs,
        boot_reps: args.bootstrap,
        alphas: args.alpha.clone(),
        seed: args.seed,
        workers: args.workers,
        bandwidth_h: args.bandwidth_h,
        record_wall_time: args.wall_time,
        ..StudyConfig::default()
    };
    Ok(run_power_study(&scenarios, &cfg)?)
}

pub fn cmd_limit(args: &LimitArgs) -> CliResult<LimitReportJson> {
    check_tau(args.tau)?;
    check_workers(args.workers)?;
    let sample = with_workers(args.workers, || kiefer_mueller_sup(args.grid, args.paths, args.tau, args.seed))??;
    Ok(LimitReportJson {
        tau: args.tau,
        grid_m: args.grid,
        paths: args.paths,
        seed: args.seed,
        levels: LIMIT_LEVELS.to_vec(),
        quantiles: sample.quantiles(&LIMIT_LEVELS)?,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn test_table(r: &TestReportJson) -> String {
    let b = &r.bandwidths;
    let mut s = String::new();
    s.push_str(&format!("n               {}\n", r.n));
    s.push_str(&format!("tau             {}\n", r.tau));
    s.push_str(&format!("tau_hat         {:.6}\n", r.tau_hat));
    s.push_str(&format!("K_tilde         {:.6}\n", r.k_stat));
    s.push_str(&format!("boot quantile   {:.6}  (alpha = {}, {} reps)\n", r.boot_quantile, r.alpha, r.n_reps));
    s.push_str(&format!("p-value         {:.6}\n", r.p_value));
    s.push_str(&format!("decision        {}\n", if r.reject { "reject" } else { "do not reject" }));
    s.push_str(&format!(
        "bandwidths      h = {:.6}, d = {:.6}, b = {:.6}, a = {:.6}, e = {:.6}\n",
        b.h, b.d_smooth, b.b, b.a, b.e
    ));
    s.push_str(&format!("argmax          x = {}, z = {}\n", fmt_vec(&r.argmax.x), fmt_vec(&r.argmax.z)));
    if let Some(t) = r.t_original_sup {
        s.push_str(&format!("sup |T_n|       {t:.6}\n"));
    }
    s.push_str(&format!("seed            {}\n", r.seed));
    s
}

fn limit_table(r: &LimitReportJson) -> String {
    let mut s = format!("{:>8} {:>10}\n", "level", "quantile");
    for (l, q) in r.levels.iter().zip(&r.quantiles) {
        s.push_str(&format!("{l:>8} {q:>10.6}\n"));
    }
    s
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, value: &T, table: impl FnOnce() -> String) -> CliResult<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
        }
        Format::Table => write!(out, "{}", table())?,
    }
    Ok(())
}

/// Executes a parsed command, writing the report to `out` and warnings to
/// `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Test(args) => {
            let (report, warnings) = cmd_test(args)?;
            for w in warnings {
                writeln!(err, "warning: {w}")?;
            }
            emit(out, args.format, &report, || test_table(&report))
        }
        Command::Simulate(args) => {
            let table = cmd_simulate(args)?;
            emit(out, args.format, &table, || table.to_text())
        }
        Command::Limit(args) => {
            let report = cmd_limit(args)?;
            emit(out, args.format, &report, || limit_table(&report))
        }
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ErrorKind::Config.exit_code() } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.kind.exit_code()
        }
    }
}
