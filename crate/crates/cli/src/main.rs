mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "arplace", version, about = "Probabilistic base placement for mobile manipulation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Monte Carlo samples per place map.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Merged success probability needed to merge pick-up locations.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run grasp trials over the object and robot grids.
    GenData {
        /// Simulate every pair, including ones the capability bound rules out.
        #[arg(long)]
        no_filter: bool,
    },
    /// Fit classifiers, the shape model and the regression from a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Compute a place map for an object belief.
    Map {
        #[arg(long)]
        gsm: PathBuf,
        /// TOML with `mean = [dx, dy, dpsi]` and `variances` or `covariance`.
        #[arg(long)]
        belief: PathBuf,
        #[arg(long, default_value = "map")]
        name: String,
    },
    /// Multiply maps on the same grid.
    Merge {
        #[arg(required = true, num_args = 2..)]
        maps: Vec<PathBuf>,
        #[arg(long, default_value = "merged")]
        name: String,
    },
    /// Expected-time cost map from a place map and the robot position.
    Cost {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
        robot: Vec<f64>,
        /// Seconds lost by a failed attempt.
        #[arg(long, default_value_t = 30.0)]
        retry: f64,
        #[arg(long, default_value = "cost")]
        name: String,
    },
    /// Resolve, transform and project a plan.
    Plan {
        #[arg(long)]
        gsm: PathBuf,
        /// Plan file; the two-cup plan when absent.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Scene file; the two-cup scene when absent.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Cup separation of the built-in scene.
        #[arg(long, default_value_t = 0.2)]
        separation: f64,
        /// Distance from the goal that counts as not reached.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Run an experiment.
    Eval {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Convert a text map into an 8-bit graymap.
    ExportPgm {
        #[arg(long)]
        map: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Experiment {
    /// ARPlace against a fixed offset under pose uncertainty.
    Robustness {
        #[arg(long)]
        gsm: PathBuf,
    },
    /// Classifier accuracy against training size, with and without filtering.
    Accuracy,
    /// Plan durations with and without location merging.
    Transform {
        #[arg(long)]
        gsm: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(n) = g.workers {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let mut cfg = PipelineConfig::load(g.config.as_deref())?;
    if let Some(n) = g.samples {
        if n == 0 {
            return Err(CliError::config("--samples must be at least 1"));
        }
        cfg.map.n_samples = n;
        cfg.planner.n_samples = n;
        cfg.robustness.n_samples = n;
    }
    if let Some(t) = g.threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::config("--threshold must lie in (0, 1)"));
        }
        cfg.planner.threshold = t;
    }
    cfg.world.seed = g.seed;
    cfg.robustness.seed = g.seed;
    let ctx = commands::Context::new(cfg, g.seed, g.out.clone())?;
    match cli.command {
        Command::GenData { no_filter } => commands::gen_data(&ctx, !no_filter),
        Command::Train { data } => commands::train(&ctx, &data),
        Command::Map { gsm, belief, name } => commands::map(&ctx, &gsm, &belief, &name),
        Command::Merge { maps, name } => commands::merge(&ctx, &maps, &name),
        Command::Cost { map, robot, retry, name } => commands::cost(&ctx, &map, [robot[0], robot[1]], retry, &name),
        Command::Plan { gsm, plan, scene, separation, tolerance } => {
            commands::plan(&ctx, &gsm, plan.as_deref(), scene.as_deref(), separation, tolerance)
        }
        Command::Eval { experiment } => match experiment {
            Experiment::Robustness { gsm } => commands::eval_robustness(&ctx, &gsm),
            Experiment::Accuracy => commands::eval_accuracy(&ctx),
            Experiment::Transform { gsm } => commands::eval_transform(&ctx, &gsm),
        },
        Command::ExportPgm { map } => commands::export_pgm(&ctx, &map),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
