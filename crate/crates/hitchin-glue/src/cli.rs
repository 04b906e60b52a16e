//! Command-line front end: argument parsing, config-file merging, dispatch and exit codes.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::algebra::C64;
use crate::corrector::{CorrectorOptions, MAX_ITERATIONS, SIGMA_EPSILON};
use crate::error::{Error, Result};
use crate::geometry::{Field2D, PlumbingConfig, Side, DEFAULT_CAP_LENGTH};
use crate::linearized::{SpectrumConfig, EIGEN_TOL};
use crate::model::ModelParams;
use crate::poisson::{modes_to_field, solve_poisson_disk, RadialGrid, WeightConfig};
use crate::report::{emit_report, to_json_object, write_text, Format, Row};
use crate::studies::{
    approx_sweep, glue, model_check, poisson_study, spectrum_study, wolf_validate, BackgroundKind, FixtureKind,
    FixtureSpec, GlueGrid, WolfOptions,
};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "HITCHIN_GLUE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hitchin-glue",
    version,
    about = "Gluing construction for rank-2 Hitchin equations on a degenerating cylinder",
    after_help = "Environment:\n  HITCHIN_GLUE_THREADS  maximum number of worker threads\n\n\
                  Exit status: 0 ok, 1 a FAIL flag under --strict, 2 configuration error, 3 numeric failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the glued model solution: residuals, seam jump and det Phi = -C^2 (JSON).
    ModelCheck(ModelCheckArgs),
    /// Validate Wolf's exact solution: residual order under refinement and decay to the model (JSON).
    WolfValidate(WolfArgs),
    /// Sample the Poisson mode kernels against 4/j^2, or solve a Field2D right-hand side (CSV).
    PoissonSolve(PoissonArgs),
    /// Build the cutoff-glued approximate pair and its error report (JSON plus field files).
    BuildApprox(BuildApproxArgs),
    /// Smallest eigenvalues of L and singular values of the Dirac operator over a sweep of R (CSV).
    Spectrum(SpectrumArgs),
    /// Build the approximate pair and run the fixed-point corrector (JSON plus field files).
    Glue(GlueArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with flat keys mirroring the flags, e.g. {"n_tau": 401}; flags on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed of the global ChaCha generator; every module draws from its own stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 1 when any PASS/FAIL flag in the report is FAIL
    #[arg(long)]
    pub strict: bool,
    /// Output directory for reports and field files; without it the report goes to stdout
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model parameter alpha on the plus side
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Real part of the model constant C
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c_re: f64,
    /// Imaginary part of the model constant C
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub c_im: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.alpha, C64::new(self.c_re, self.c_im), Side::Plus)
    }
}

#[derive(Debug, Args)]
pub struct ModelCheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Cutoff radius R; the neck has length T = -log R
    #[arg(long = "R", default_value_t = 0.1)]
    pub r: f64,
    /// Nodes along the neck
    #[arg(long, default_value_t = 129)]
    pub n_tau: usize,
    /// Angular Fourier modes N (2N + 1 samples)
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
    /// Random points at which the pointwise residual is evaluated
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct WolfArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Wolf parameter ell in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    pub ell: f64,
    /// Nodes of the coarsest grid
    #[arg(long, default_value_t = 257)]
    pub n_tau: usize,
    /// Number of grid halvings
    #[arg(long, default_value_t = 3)]
    pub refinements: usize,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Weight exponent delta' of the solution space
    #[arg(long, default_value_t = 0.4)]
    pub delta_prime: f64,
    /// Weight exponent delta'' of the error estimate
    #[arg(long, default_value_t = 0.35)]
    pub delta_dprime: f64,
}

#[derive(Debug, Args)]
pub struct PoissonArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Weight exponent delta of the right-hand side
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Largest mode j sampled
    #[arg(long, default_value_t = 12)]
    pub modes: usize,
    /// Random right-hand sides per mode
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Nodes of the log-radial grid
    #[arg(long, default_value_t = 8001)]
    pub radial_nodes: usize,
    /// Inner radius of the log-radial grid
    #[arg(long, default_value_t = 1e-6)]
    pub r_min: f64,
    /// Scalar Field2D JSON on the radial grid to solve instead of sampling; needs --out
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    Radial,
    Wolf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Exact input glued at the node
    #[arg(long, value_enum, default_value_t = FixtureName::Radial)]
    pub fixture: FixtureName,
    /// Decay exponent of the radial fixture
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Amplitude kappa of the radial fixture
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Wolf parameter ell for the wolf fixture
    #[arg(long, default_value_t = 0.5)]
    pub ell: f64,
}

impl FixtureArgs {
    fn spec(&self) -> FixtureSpec {
        let kind = match self.fixture {
            FixtureName::Radial => FixtureKind::Radial,
            FixtureName::Wolf => FixtureKind::Wolf,
        };
        FixtureSpec { kind, delta: self.delta, amplitude: self.amplitude, ell: self.ell }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Nodes along the neck
    #[arg(long, default_value_t = 801)]
    pub n_tau: usize,
    /// Angular Fourier modes N (2N + 1 samples)
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
    /// Collar length L added beyond T on each side
    #[arg(long, default_value_t = DEFAULT_CAP_LENGTH)]
    pub cap_length: f64,
    #[command(flatten)]
    pub weights: WeightArgs,
}

impl GridArgs {
    fn glue_grid(&self) -> GlueGrid {
        GlueGrid {
            n_tau: self.n_tau,
            n_theta_modes: self.modes,
            cap_length: self.cap_length,
            delta_prime: self.weights.delta_prime,
            delta_dprime: self.weights.delta_dprime,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildApproxArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cutoff radii R, comma separated; each row carries the slope fitted so far
    #[arg(long = "R", value_delimiter = ',', default_value = "0.1")]
    pub r: Vec<f64>,
    #[command(flatten)]
    pub fixture: FixtureArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackgroundName {
    Model,
    Wolf,
    Approx,
    Flat,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cutoff radii R, comma separated (required, here or in the config file)
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub sweep: Vec<String>,
    /// Background pair of the operators; flat is the Phi = 0 control
    #[arg(long, value_enum, default_value_t = BackgroundName::Model)]
    pub background: BackgroundName,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Decay exponent of the approx background
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Amplitude of the approx background
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Wolf parameter ell of the wolf background
    #[arg(long, default_value_t = 0.5)]
    pub ell: f64,
    /// Nodes along the neck
    #[arg(long, default_value_t = 257)]
    pub n_tau: usize,
    /// Angular Fourier modes N
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
    /// Collar length L added beyond T on each side
    #[arg(long, default_value_t = DEFAULT_CAP_LENGTH)]
    pub cap_length: f64,
    /// Eigenvalues computed per R
    #[arg(long, default_value_t = 4)]
    pub eigen_count: usize,
    /// Relative accuracy of the eigenvalues
    #[arg(long, default_value_t = EIGEN_TOL)]
    pub tol: f64,
    /// Skip the Dirac singular values
    #[arg(long)]
    pub no_dirac: bool,
}

#[derive(Debug, Args)]
pub struct GlueArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cutoff radius R
    #[arg(long = "R", default_value_t = 0.1)]
    pub r: f64,
    #[command(flatten)]
    pub fixture: FixtureArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Stopping tolerance on the residual; defaults to a fraction of the discretization error
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the corrector
    #[arg(long, default_value_t = MAX_ITERATIONS)]
    pub max_iterations: usize,
    /// Slack epsilon in sigma_R = C^-1 T^(-2 - epsilon)
    #[arg(long, default_value_t = SIGMA_EPSILON)]
    pub epsilon: f64,
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::ModelCheck(a) => &a.common,
            Command::WolfValidate(a) => &a.common,
            Command::PoissonSolve(a) => &a.common,
            Command::BuildApprox(a) => &a.common,
            Command::Spectrum(a) => &a.common,
            Command::Glue(a) => &a.common,
        }
    }
}

/// Whether any report row of a subcommand carries a FAIL flag.
struct Outcome {
    failed: bool,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn json_token(key: &str, value: &serde_json::Value) -> Result<String> {
    match value {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Array(items) => {
            items.iter().map(|v| json_token(key, v)).collect::<Result<Vec<_>>>().map(|v| v.join(","))
        }
        other => Err(config_error(format!("config key {key:?} has unsupported value {other}"))),
    }
}

/// Insert the config file's keys as flags, skipping any flag given on the command line.
fn merge_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, CliFailure> {
    let matches = Cli::command().try_get_matches_from(&args).map_err(CliFailure::Clap)?;
    let Some((name, sub)) = matches.subcommand() else { return Ok(args) };
    let Some(path) = sub.get_one::<PathBuf>("config") else { return Ok(args) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::Run(config_error(format!("cannot read config {}: {e}", path.display()))))?;
    let parsed: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliFailure::Run(config_error(format!("config {} is not valid JSON: {e}", path.display()))))?;
    let serde_json::Value::Object(map) = parsed else {
        return Err(CliFailure::Run(config_error("config file must hold a flat JSON object")));
    };
    let command = Cli::command();
    let subcommand = command.find_subcommand(name).expect("matched subcommand exists");
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &map {
        let flag = key.replace('_', "-");
        let Some(arg) = subcommand.get_arguments().find(|a| a.get_long() == Some(flag.as_str())) else {
            return Err(CliFailure::Run(config_error(format!("unknown config key {key:?} for {name}"))));
        };
        let id = arg.get_id().as_str();
        if id == "config" || sub.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                serde_json::Value::Bool(true) => extra.push(format!("--{flag}").into()),
                serde_json::Value::Bool(false) => {}
                other => {
                    return Err(CliFailure::Run(config_error(format!("config key {key:?} must be a boolean, got {other}"))))
                }
            }
        } else {
            let token = json_token(key, value).map_err(CliFailure::Run)?;
            extra.push(format!("--{flag}={token}").into());
        }
    }
    let position = args.iter().position(|a| a.to_str() == Some(name)).expect("subcommand appears in args");
    let mut merged = args;
    merged.splice(position + 1..position + 1, extra);
    Ok(merged)
}

enum CliFailure {
    Clap(clap::Error),
    Run(Error),
}

fn exit_code_of(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Cap the global thread pool from the environment.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_error(format!("{THREADS_ENV} = {raw:?} must be a positive integer")))?;
    // A pool built earlier in the same process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parse, merge the config file, run, and return the process exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let merged = match merge_config(args) {
        Ok(m) => m,
        Err(CliFailure::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(CliFailure::Run(e)) => {
            eprintln!("error: {e}");
            return exit_code_of(&e);
        }
    };
    let cli = match Cli::command().try_get_matches_from(&merged).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let strict = cli.command.common().strict;
    match run(&cli.command) {
        Ok(outcome) if outcome.failed && strict => {
            eprintln!("FAIL flags present under --strict");
            EXIT_FAIL
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_of(&e)
        }
    }
}

/// Write `text` to `out/name`, or print it when there is no output directory.
fn deliver(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            write_text(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn deliver_rows(out: Option<&Path>, name: &str, rows: &[Row], format: Format) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(format!("{name}.{}", format.extension()));
            emit_report(rows, format, &path)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => deliver(None, name, &crate::report::render(rows, format)),
    }
}

fn parse_sweep(raw: &[String]) -> Result<Vec<f64>> {
    let values: Vec<f64> = raw
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| config_error(format!("sweep value {s:?} is not a number"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(config_error("--sweep needs at least one value of R"));
    }
    Ok(values)
}

fn run(command: &Command) -> Result<Outcome> {
    let common = command.common();
    let out = common.out.as_deref();
    let seed = common.seed;
    match command {
        Command::ModelCheck(a) => {
            let cfg = PlumbingConfig::new(a.r, a.n_tau, a.modes)?;
            let row = model_check(&a.model.params()?, &cfg, a.samples, seed)?;
            deliver(out, "model_check.json", &to_json_object(&row))?;
            Ok(Outcome { failed: row.has_failure() })
        }
        Command::WolfValidate(a) => {
            let opts = WolfOptions { n_tau: a.n_tau, refinements: a.refinements, ..Default::default() };
            let row = wolf_validate(a.ell, &opts)?;
            deliver(out, "wolf_validate.json", &to_json_object(&row))?;
            Ok(Outcome { failed: row.has_failure() })
        }
        Command::PoissonSolve(a) => {
            let w = WeightConfig::new(a.delta, a.weights.delta_prime, a.weights.delta_dprime)?;
            let rows = match &a.input {
                Some(path) => {
                    let dir = out.ok_or_else(|| config_error("--input needs --out for the solution file"))?;
                    let h = Field2D::read_json(path)
                        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                    let grid = RadialGrid::new(a.r_min, h.n_tau)?;
                    let (u, solution) = solve_poisson_disk(&h, &grid, &w)?;
                    u.write_json(&dir.join("solution.json"))?;
                    let modes: Vec<i64> = solution.modes.clone();
                    modes_to_field(&modes, &solution.r_du).write_json(&dir.join("solution_r_du.json"))?;
                    solution
                        .reports
                        .iter()
                        .map(|r| {
                            Row::new()
                                .with("mode", r.mode)
                                .with("residual", r.residual)
                                .with("norm_ratio", r.norm_ratio)
                                .with("schur_bound", r.schur_bound)
                                .with("r_min", a.r_min)
                                .with("radial_nodes", grid.len())
                                .with("pass", r.schur_bound.is_none_or(|b| r.norm_ratio <= b))
                        })
                        .collect()
                }
                None => poisson_study(&w, a.modes, a.samples, &RadialGrid::new(a.r_min, a.radial_nodes)?, seed)?,
            };
            deliver_rows(out, "poisson", &rows, Format::Csv)?;
            Ok(Outcome { failed: rows.iter().any(Row::has_failure) })
        }
        Command::BuildApprox(a) => {
            let (runs, _) = approx_sweep(&a.fixture.spec(), &a.grid.glue_grid(), &a.r)?;
            if let Some(dir) = out {
                for (idx, run) in runs.iter().enumerate() {
                    run.approximate.write_dir(dir, &format!("approx_{idx}"))?;
                }
            }
            let rows: Vec<Row> = runs.into_iter().map(|r| r.row).collect();
            deliver_rows(out, "build_approx", &rows, Format::Json)?;
            Ok(Outcome { failed: rows.iter().any(Row::has_failure) })
        }
        Command::Spectrum(a) => {
            let radii = parse_sweep(&a.sweep)?;
            let kind = match a.background {
                BackgroundName::Model => BackgroundKind::Model(a.model.params()?),
                BackgroundName::Wolf => BackgroundKind::Wolf(a.ell),
                BackgroundName::Approx => BackgroundKind::Approx(FixtureSpec {
                    kind: FixtureKind::Radial,
                    delta: a.delta,
                    amplitude: a.amplitude,
                    ell: a.ell,
                }),
                BackgroundName::Flat => BackgroundKind::Flat,
            };
            let sc = SpectrumConfig {
                n_tau: a.n_tau,
                n_theta_modes: a.modes,
                cap_length: a.cap_length,
                eigen_count: a.eigen_count,
                tol: a.tol,
                with_dirac: !a.no_dirac,
            };
            let (_, rows) = spectrum_study(&radii, &kind, &sc, seed)?;
            deliver_rows(out, "spectrum", &rows, Format::Csv)?;
            Ok(Outcome { failed: rows.iter().any(Row::has_failure) })
        }
        Command::Glue(a) => {
            let opts = CorrectorOptions { max_iterations: a.max_iterations, epsilon: a.epsilon, tol: a.tol };
            let run = glue(&a.fixture.spec(), &a.grid.glue_grid(), a.r, &opts, seed)?;
            if let Some(dir) = out {
                run.approx.approximate.write_dir(dir, "approx")?;
                run.corrected.write_dir(dir, "glued")?;
                run.state.gamma.write_json(&dir.join("gamma.json"))?;
            }
            deliver(out, "glue.json", &to_json_object(&run.row))?;
            Ok(Outcome { failed: run.row.has_failure() })
        }
    }
}
