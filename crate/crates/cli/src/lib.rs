//! Command-line front end: scene checks, escape metrics, datasets,
//! surrogates, keyframes, trajectories, rollouts and reports.

mod commands;
mod manifest;
mod report;
mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "cagetool", version, about = "Energy-bounded caging: tool selection and manipulation planning")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Scene JSON file, or the name of a built-in fixture.
    #[arg(long, global = true)]
    pub scene: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; without it results only go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub metric: Option<MetricArg>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricArg {
    Mee,
    Pcc,
    Oracle,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scene files.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Minimum escape energy of one configuration.
    Mee(MeeArgs),
    /// Partial-cage clearance of one configuration.
    Pcc(PccArgs),
    /// Labelled datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train a surrogate on a dataset.
    Train(TrainArgs),
    /// Evaluate a trained surrogate.
    Predict(PredictArgs),
    /// Tool selection and keyframe optimization.
    Keyframe(KeyframeArgs),
    /// Trajectory optimization through a keyframe.
    Plan(PlanArgs),
    /// Quasi-static execution of a trajectory.
    Rollout(RolloutArgs),
    /// Rollouts under random force disturbances.
    Disturb(DisturbArgs),
    /// CMA-ES benchmark fixtures.
    BenchCmaes(BenchArgs),
    /// Markdown and SVG summary of an output directory.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum SceneCmd {
    /// Check a scene's invariants.
    Validate {
        /// Scene file (alternative to --scene).
        path: Option<String>,
    },
    /// Write the built-in fixtures as JSON files into --out.
    Export,
    /// List the built-in fixtures.
    List,
}

#[derive(Args, Debug, Clone)]
pub struct Query {
    #[arg(long, default_value_t = 0)]
    pub tool: usize,
    /// Tool pose x,y,theta (default: the task's start pose).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s_tool: Option<Vec<f64>>,
    /// Object configuration x,y,theta[,alpha] (default: the scene's start).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s_obj: Option<Vec<f64>>,
    /// Inflation of the escape region around the tool.
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct Sampler {
    #[arg(long, default_value_t = 200)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub max_batches: usize,
    #[arg(long, default_value_t = 10)]
    pub neighbor_k: usize,
    #[arg(long, default_value_t = 0.005)]
    pub edge_resolution: f64,
}

#[derive(Args, Debug)]
pub struct MeeArgs {
    #[arg(value_enum)]
    pub mode: Option<MeeMode>,
    /// Same as the `oracle` mode.
    #[arg(long)]
    pub oracle: bool,
    /// Oracle grid resolution per coordinate.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub query: Query,
    #[command(flatten)]
    pub sampler: Sampler,
    /// Include the escape path in the output.
    #[arg(long)]
    pub path: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeeMode {
    Estimate,
    Oracle,
}

#[derive(Args, Debug)]
pub struct PccArgs {
    /// Grid resolution (default: 1 cm, 0.1 rad, 0.2 rad).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Use the sampling backend instead of the grid.
    #[arg(long)]
    pub sampler: bool,
    #[command(flatten)]
    pub planner: Sampler,
    #[arg(long, default_value_t = 1e-3)]
    pub bisect_tol: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    #[command(flatten)]
    pub query: Query,
}

#[derive(Subcommand, Debug)]
pub enum DatasetCmd {
    /// Sample and label configurations for one tool.
    Gen(DatasetArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labeler {
    Sampler,
    Oracle,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub tool: usize,
    #[arg(long, value_enum, default_value_t = Labeler::Sampler)]
    pub labeler: Labeler,
    /// Grid resolution of the oracle labeler.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Grid resolution of the clearance labels.
    #[arg(long, value_delimiter = ',')]
    pub pcc_grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub sampler: Sampler,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Weight of the regression loss.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub s_tool: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub s_obj: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct Cma {
    #[arg(long)]
    pub lambda: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub sigma0: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct Models {
    /// Surrogate model files (one per tool) for --metric mee|pcc.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub models: Vec<PathBuf>,
    /// Oracle grid resolution for --metric oracle.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct KeyframeArgs {
    #[command(flatten)]
    pub models: Models,
    /// Restrict the search to one tool.
    #[arg(long)]
    pub tool: Option<usize>,
    /// Keyframe step index (default: the task's keyframe phase of 50 steps).
    #[arg(long)]
    pub t_k: Option<usize>,
    #[command(flatten)]
    pub cma: Cma,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub keyframe: PathBuf,
    #[command(flatten)]
    pub models: Models,
    #[arg(long, default_value_t = 5)]
    pub n_via: usize,
    #[arg(long, default_value_t = 0.15)]
    pub margin: f64,
    #[arg(long, default_value_t = 10.0)]
    pub w_goal: f64,
    #[arg(long, default_value_t = 10.0)]
    pub w_keyframe_tool: f64,
    #[arg(long, default_value_t = 10.0)]
    pub w_keyframe_obj: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_robust: f64,
    #[arg(long, default_value_t = 50)]
    pub n_cost_samples: usize,
    /// Start CMA-ES at the box center instead of the start-keyframe-goal polyline.
    #[arg(long)]
    pub no_warm_start: bool,
    #[command(flatten)]
    pub cma: Cma,
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    /// Trajectory file (a plan result or a bare trajectory).
    #[arg(long)]
    pub traj: PathBuf,
    /// Tool id (default: the plan's tool, else 0).
    #[arg(long)]
    pub tool: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub n_steps: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predicate {
    /// Object still contained by the tool at the end.
    Held,
    /// Object within the goal tolerance at the end.
    Goal,
    /// Both.
    HeldGoal,
}

#[derive(Args, Debug)]
pub struct DisturbArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub tool: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub n_steps: usize,
    /// Force magnitude in newtons (default: the object's weight).
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub n_episodes: usize,
    #[arg(long, default_value_t = 3)]
    pub impulses_per_episode: usize,
    /// Cap on mass-center travel per disturbance (m).
    #[arg(long)]
    pub travel: Option<f64>,
    #[arg(long, value_enum, default_value_t = Predicate::Held)]
    pub predicate: Predicate,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Seeds 0..n per benchmark.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Experiment directory (default: --out).
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

/// Runs a parsed command on the current rayon pool, reporting errors on
/// stderr, and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
