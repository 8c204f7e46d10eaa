use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exit status for invalid flags, configs and inputs.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when training produced a non-finite loss or parameter.
pub const EXIT_DIVERGED: u8 = 3;
/// Exit status for every other failure.
pub const EXIT_OTHER: u8 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "clorl",
    version,
    about = "Offline RL with regression and HL-Gauss classification critics",
    after_help = "Outputs go under $CLORL_OUT (default: ./runs) unless a path is given.\n\
                  Exit codes: 0 success, 2 invalid flags/config/input, 3 training diverged, 1 other failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll out a scripted behavior policy and write a CODS dataset.
    GenData(GenDataArgs),
    /// Train one agent on an offline dataset.
    Train(TrainArgs),
    /// Run a cartesian hyperparameter grid over seeds.
    Sweep(SweepArgs),
    /// Expected online performance curves from score tables.
    Eop(EopArgs),
    /// Print a dataset's header and its value support.
    Inspect(InspectArgs),
    /// List the bundled preset configs, or print one.
    Presets(PresetsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EnvArg {
    Pointmass,
    Chain,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BehaviorArg {
    Random,
    Mediocre,
    Expert,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Rebrac,
    Iql,
    Lbsac,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HeadArg {
    Mse,
    Ce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExpandArg {
    Min,
    Both,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "pointmass")]
    pub env: EnvArg,
    /// Scripted policy: uniform random, or a PD controller with weak (mediocre) or strong (expert) gains.
    #[arg(long, value_enum, default_value = "expert")]
    pub behavior: BehaviorArg,
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    /// Std of the Gaussian noise added to controller actions.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier applied to rewards on load (100 mirrors the AntMaze convention).
    #[arg(long, default_value_t = 1.0)]
    pub reward_scale: f64,
    /// Output file [default: $CLORL_OUT/data/<env>-<behavior>-<episodes>ep-seed<seed>.cods].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Overwrite an existing file.
    #[arg(long)]
    pub force: bool,
}

/// Flags shared by `train` and `sweep` that build the base run config.
#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// JSON run config; takes precedence over --preset and --algorithm.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled preset name (see `clorl presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Without --config or --preset, start from the <algorithm>-gym-defaults preset (published default tables).
    #[arg(long, value_enum, default_value = "rebrac")]
    pub algorithm: AlgorithmArg,
    /// Critic head [default: from config].
    #[arg(long, value_enum)]
    pub head: Option<HeadArg>,
    /// Number of bins of the ce head [default: from config; published default 101].
    #[arg(long)]
    pub m: Option<usize>,
    /// HL-Gauss sigma in bin widths [default: from config; published default 0.75].
    #[arg(long)]
    pub sigma_zeta: Option<f64>,
    /// Fractional enlargement of the dataset value support [default: from config; 0].
    #[arg(long, allow_negative_numbers = true)]
    pub v_expand: Option<f64>,
    /// Where v_expand goes: below v_min only, or split over both bounds [default: from config; both].
    #[arg(long, value_enum)]
    pub expand_strategy: Option<ExpandArg>,
    /// CODS dataset [default: from config].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Gradient steps [default: from config].
    #[arg(long)]
    pub n_steps: Option<u64>,
    /// Steps between evaluations [default: from config].
    #[arg(long)]
    pub eval_every: Option<u64>,
    /// Episodes per evaluation [default: from config].
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Dotted-path override `key=value`, applied after every other flag; values parse as JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Training seed [default: from config].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory [default: $CLORL_OUT/<algorithm>-<head>-<fingerprint>-seed<seed>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Sweep spec JSON (base config, axes, seeds, workers); replaces the config flags and --axis/--seeds.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Grid axis `path=v1,v2,...`; the first axis indexes heatmap rows.
    #[arg(long = "axis", value_name = "PATH=VALUES")]
    pub axes: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Concurrent runs [default: 1, or the spec's value].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dataset label in the score table [default: dataset file stem].
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// Output directory [default: $CLORL_OUT/sweep-<fingerprint>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EopArgs {
    /// Score tables: CSV with a `score` column (optional dataset, config, seed) or score JSON.
    #[arg(required = true)]
    pub scores: Vec<PathBuf>,
    /// Comma-separated budgets k.
    #[arg(long, required = true, value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// Comma-separated datasets to average over [default: every dataset].
    #[arg(long, value_delimiter = ',')]
    pub group: Vec<String>,
    /// Seed-bootstrap replicates for the std column.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the CSV here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub dataset: PathBuf,
    /// Discount for the return support (published default 0.99; 0.999 on AntMaze-style tasks).
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    /// Bins for the support report (published default 101).
    #[arg(long, default_value_t = 101)]
    pub m: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub v_expand: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub expand_strategy: ExpandArg,
}

#[derive(Args, Debug)]
pub struct PresetsArgs {
    /// Print this preset's JSON instead of the list.
    pub name: Option<String>,
}

/// A failure with its process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<clorl_core::Error> for Failure {
    fn from(e: clorl_core::Error) -> Self {
        use clorl_core::Error;
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
            Error::Diverged { .. } => EXIT_DIVERGED,
            _ => EXIT_OTHER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Root for default output locations.
pub fn output_root() -> PathBuf {
    std::env::var_os("CLORL_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_OTHER,
        message: format!("{}: {e}", path.display()),
    })
}

/// Die quietly on a closed stdout (e.g. piped into `head`) instead of panicking.
#[cfg(unix)]
fn reset_sigpipe() {
    // SAFETY: restoring the default disposition of SIGPIPE before any other thread exists.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Eop(a) => commands::eop(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Presets(a) => commands::presets(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
