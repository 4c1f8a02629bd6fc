//! `minimax-lab`: classify stationary points, simulate GDA, run the
//! max-oracle method, verify minimax definitions on grids and build mixed
//! strategies.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

pub const THREADS_ENV: &str = "MINIMAX_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "minimax-lab", version, about = "Local minimax analysis for smooth zero-sum objectives")]
pub struct Cli {
    /// Worker threads; defaults to $MINIMAX_LAB_THREADS or all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for output files; JSON goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub emit_config: bool,

    /// `key = value` file; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Nash / minimax / maximin verdicts, γ-GDA stability and the ∞-GDA ladder.
    Classify(ClassifyArgs),
    /// γ-GDA trajectories, RK4 flows and basin sampling.
    Simulate(SimulateArgs),
    /// Gradient descent with a max-oracle and its Moreau-envelope rate.
    Oracle(OracleArgs),
    /// Grid checks of the minimax definitions.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// N-atom mixed strategies via the augmented minimax problem.
    Mixed(MixedArgs),
    /// List the built-in objectives.
    Catalog(CatalogArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FunctionArgs {
    /// Catalog name (see `catalog`).
    #[arg(long = "fn", value_name = "NAME", conflicts_with = "expr")]
    #[serde(rename = "fn")]
    pub name: Option<String>,

    /// Inline expression in x, y or x1.., y1.. (derivatives by finite differences).
    #[arg(long, allow_hyphen_values = true)]
    pub expr: Option<String>,

    /// Parameter of parameterized catalog entries (their `eps`).
    #[arg(long)]
    pub param: Option<f64>,

    /// Domain box for an expression: l1,u1,l2,u2,... over (x.., y..).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    pub domain: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,

    /// Stacked coordinates x1..,y1..
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set, required = true)]
    pub point: Vec<f64>,

    /// γ for the single stability check.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Increasing γ values for the ∞-GDA table.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "10,100,1000,10000")]
    pub gamma_ladder: Vec<f64>,

    #[arg(long, default_value_t = minimax_lab::classifier::DEFAULT_STATION_TOLERANCE)]
    pub tol_station: f64,

    #[arg(long, default_value_t = minimax_lab::classifier::DEFAULT_STRICT_TOLERANCE)]
    pub tol_strict: f64,

    #[arg(long, default_value_t = minimax_lab::classifier::DEFAULT_SINGULARITY_TOLERANCE)]
    pub tol_sing: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,

    /// Initial point x1..,y1.. (single-trajectory mode).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    pub init: Option<Vec<f64>>,

    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,

    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Step cap for discrete runs.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,

    /// Integrate the continuous-time flow with RK4 instead.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub flow: bool,

    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,

    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,

    /// Sample limits from `n` seeded initial points in `region`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub basins: bool,

    /// Sampling box l1,u1,l2,u2,...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    pub region: Option<Vec<f64>>,

    #[arg(long, default_value_t = 200)]
    pub n: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,

    /// Starting x; defaults to all ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    pub x0: Option<Vec<f64>>,

    /// Outer iterations.
    #[arg(long = "T", default_value_t = 400)]
    #[serde(rename = "T")]
    pub t: usize,

    /// Oracle accuracy ε.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,

    #[arg(long, default_value_t = minimax_lab::oracle::DEFAULT_SEEDS)]
    pub seeds: usize,

    #[arg(long, default_value_t = 1.0)]
    pub gamma_param: f64,

    /// Also run the rate study over these budgets.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub budgets: Option<Vec<usize>>,

    /// φ_λ(x0) − min φ for the bound; estimated on a grid when absent.
    #[arg(long)]
    pub envelope_gap: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GridArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    pub resolution: usize,

    /// Grid box l1,u1,...; defaults to the domain with unbounded axes cut to [-3,3].
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    #[serde(rename = "box")]
    pub bounds: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LadderArgs {
    /// Decreasing δ values.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "0.5,0.25,0.1,0.05")]
    pub ladder: Vec<f64>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum VerifyCommand {
    /// Grid global minimax points, classified and certified.
    GlobalVsLocal(VerifyGlobalArgs),
    /// Local minimax certificate at one point.
    Certify(VerifyPointArgs),
    /// Certificates for every grid point on the y-box boundary.
    BoundaryScan(VerifyGlobalArgs),
    /// Global minimax within a window.
    Evtushenko(EvtushenkoArgs),
    /// Stationary points of the gradient field, classified.
    ScanNash(VerifyScanArgs),
    /// Grid global minimax points only.
    Global(VerifyScanArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyGlobalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub ladder: LadderArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyPointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub ladder: LadderArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set, required = true)]
    pub point: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct EvtushenkoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set, required = true)]
    pub point: Vec<f64>,
    /// Window l1,u1,...; defaults to the objective's domain.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    pub window: Option<Vec<f64>>,
    #[arg(long, default_value_t = 401)]
    pub resolution: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
#[serde(rename_all = "kebab-case")]
pub struct MixedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub function: FunctionArgs,
    /// Atom count.
    #[arg(long = "N", default_value_t = 2)]
    #[serde(rename = "N")]
    pub atoms: usize,
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, action = ArgAction::Set)]
    #[serde(rename = "box")]
    pub bounds: Option<Vec<f64>>,
    #[arg(long, default_value_t = minimax_lab::mixed::DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct CatalogArgs {}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let root = Cli::command();
    let spliced = match config::splice(argv, &root) {
        Ok(s) => s,
        Err(config::SpliceError::Usage(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
        Err(config::SpliceError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let matches = match root.try_get_matches_from(&spliced.argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if let Some(origin) = config_origin(&e, &spliced) {
                eprintln!(
                    "error: config line {}, column {}: invalid value `{}` for `{}`",
                    origin.line, origin.column, origin.value, origin.key
                );
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match thread_count(cli.threads) {
        Ok(Some(0)) => {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(1);
        }
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        Ok(None) => {}
        Err(m) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// The config entry behind a clap value error, if the flag was not also
/// given on the command line.
fn config_origin<'a>(e: &clap::Error, s: &'a config::Spliced) -> Option<&'a config::Entry> {
    use clap::error::{ContextKind, ContextValue};
    let Some(ContextValue::String(arg)) = e.get(ContextKind::InvalidArg) else {
        return None;
    };
    let long = arg.split_whitespace().next()?.trim_start_matches("--");
    let long = long.split('=').next()?;
    let from_flags = s
        .argv
        .iter()
        .filter(|a| *a == &format!("--{long}") || a.starts_with(&format!("--{long}=")))
        .count();
    let entry = s.origins.iter().find(|o| o.key == long)?;
    (from_flags == 1).then_some(entry)
}
