mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghl_core::learner::{FrontTransform, OptimizerConfig};
use ghl_core::{Scheme, SolverConfig};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ghl", version, about = "Node classification by heat diffusion with labeled boundary nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve from the default front (one-hot on labeled nodes, zero elsewhere).
    Solve(SolveArgs),
    /// Classic label propagation.
    Lp(LpArgs),
    /// Train the front (and optionally the edge weights) for several seeds.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Add labels to the boundary of a saved front and solve again.
    AddLabels(AddLabelsArgs),
    /// Build a knn dataset directory from IDX files or another dataset.
    BuildKnn(BuildKnnArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Rescale each feature row to unit L1 norm.
    #[arg(long)]
    pub normalize_features: bool,
    #[command(flatten)]
    pub split: SplitArgs,
}

/// Per-class sampling; used when the dataset has no split or when given.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub valid_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Dopri5,
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "dopri5")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub atol: f64,
    /// Step size of the fixed-step schemes.
    #[arg(long, default_value_t = 0.025)]
    pub step: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_steps: usize,
}

impl SolverArgs {
    pub fn config(&self, t_final: f64) -> SolverConfig {
        SolverConfig {
            t_final,
            rtol: self.rtol,
            atol: self.atol,
            scheme: match self.scheme {
                SchemeArg::Dopri5 => Scheme::Dopri5,
                SchemeArg::Rk4 => Scheme::Rk4,
                SchemeArg::Euler => Scheme::Euler,
            },
            fixed_step: self.step,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HorizonArgs {
    /// Diffusion time.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Candidate times; the best on validation is used instead of --t.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sweep_t: Option<Vec<f64>>,
}

impl HorizonArgs {
    pub fn candidates(&self) -> Vec<f64> {
        self.sweep_t.clone().unwrap_or_else(|| vec![self.t])
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct LpArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Stop once no entry changes by more than this; accepts `inf`.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adam,
    Rmsprop,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformArg {
    Softmax,
    Identity,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LearnArgs {
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "softmax")]
    pub transform: TransformArg,
    /// Learn the edge weights along with the front.
    #[arg(long)]
    pub learn_weights: bool,
    /// RK4 steps of the differentiated training solve.
    #[arg(long, default_value_t = 40)]
    pub train_steps: usize,
}

impl LearnArgs {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerArg::Adam => OptimizerConfig::adam(self.lr),
            OptimizerArg::Rmsprop => OptimizerConfig::rmsprop(self.lr),
        }
    }

    pub fn transform(&self) -> FrontTransform {
        match self.transform {
            TransformArg::Softmax => FrontTransform::Softmax,
            TransformArg::Identity => FrontTransform::Identity,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub learn: LearnArgs,
    /// Explicit seeds; overrides --num-seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Seeds 0..n.
    #[arg(long, default_value_t = 10)]
    pub num_seeds: u64,
    /// Directory receiving one checkpoint per seed.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AddLabelsArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Saved front; without it only the default-front counterpart runs.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `valid` for the validation labels, otherwise a JSON file mapping
    /// node id to class.
    #[arg(long, default_value = "valid")]
    pub labels_from: String,
    /// Skip the default-front counterpart.
    #[arg(long)]
    pub no_compare: bool,
    /// Horizon of the default-front counterpart.
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BuildKnnArgs {
    /// IDX image and label file; repeat to concatenate.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"], action = clap::ArgAction::Append)]
    pub idx: Vec<PathBuf>,
    /// Take features and labels from an existing dataset directory.
    #[arg(long, conflicts_with = "idx")]
    pub from: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Kernel width; defaults to the median distance to the k-th neighbor.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write a per-class split.
    #[command(flatten)]
    pub split: SplitArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, out) = match cli.command {
        Command::Solve(a) => (commands::solve(&a), a.output.out),
        Command::Lp(a) => (commands::lp(&a), a.output.out),
        Command::Train(a) => (commands::train(&a), a.output.out),
        Command::Evaluate(a) => (commands::evaluate(&a), a.output.out),
        Command::AddLabels(a) => (commands::add_labels(&a), a.output.out),
        Command::BuildKnn(a) => (commands::build_knn(&a), a.out),
    };
    match report.and_then(|r| r.emit(out.as_deref()).map(|_| r)) {
        Ok(r) if r.results.failures.is_empty() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
