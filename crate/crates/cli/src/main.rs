use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "offroad", version, about = "Procedural off-road worlds, datasets, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct WorldArgs {
    /// meadow, landscape or canyon (comma list where several are accepted).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub world_seed: Option<u64>,
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long)]
    pub tree_density: Option<f64>,
    #[arg(long)]
    pub rock_density: Option<f64>,
    #[arg(long)]
    pub log_density: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a world file and a top-down preview.
    GenWorld {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
    },
    /// Render paired RGB / class map / depth samples along random drives.
    CollectPairs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
        /// Number of pairs per preset.
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Train a policy with the cross-entropy method.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
        /// Action tuples per decision.
        #[arg(long = "A", value_name = "A")]
        horizon: Option<usize>,
        /// worlds, empty-meadow, rock or rock-mix.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Score trajectory predictions on an offline dataset.
    EvalOffline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Policy checkpoint; one per seed, repeatable.
        #[arg(long)]
        policy: Vec<PathBuf>,
        /// random, scripted or oracle instead of checkpoints.
        #[arg(long)]
        baseline: Option<String>,
        /// Program translating RGB observations into class maps.
        #[arg(long)]
        translator: Option<PathBuf>,
        #[arg(long = "translator-arg", allow_hyphen_values = true)]
        translator_args: Vec<String>,
        /// Row label in the report.
        #[arg(long)]
        method: Option<String>,
    },
    /// Run closed-loop episodes.
    EvalOnline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// random or scripted instead of a checkpoint.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        scene: Option<String>,
        /// Write a top-down image per decision with the path so far.
        #[arg(long)]
        preview: bool,
    },
    /// Render one camera view.
    RenderPreview {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
        /// World file; otherwise generated from the configuration.
        #[arg(long)]
        world_file: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        yaw: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Drive a scripted goal seeker and cut its logs into offline records.
    CollectOffline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        logs: Option<usize>,
        #[arg(long)]
        scene: Option<String>,
        /// classmap or rgb.
        #[arg(long)]
        modality: Option<String>,
    },
}

/// Defaults, then the file, then flags, then `--set`.
fn resolve(common: &Common, world: &WorldArgs, flags: &[(&str, Option<String>)]) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.config {
        cfg.load_file(p)?;
    }
    let mut all: Vec<(&str, Option<String>)> = vec![
        ("seed", common.seed.map(|v| v.to_string())),
        ("presets", world.preset.clone()),
        ("world.seed", world.world_seed.map(|v| v.to_string())),
        ("world.extent", world.extent.map(|v| v.to_string())),
        ("world.tree_density", world.tree_density.map(|v| v.to_string())),
        ("world.rock_density", world.rock_density.map(|v| v.to_string())),
        ("world.log_density", world.log_density.map(|v| v.to_string())),
        ("world.amplitude", world.amplitude.map(|v| v.to_string())),
    ];
    all.extend(flags.iter().cloned());
    for (k, v) in all {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn some<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::GenWorld { common, world } => {
            let cfg = resolve(&common, &world, &[])?;
            commands::gen_world(&cfg, &common.out)
        }
        Cmd::CollectPairs { common, world, pairs } => {
            let cfg = resolve(&common, &world, &[("pairs.count", some(&pairs))])?;
            commands::collect_pairs(&cfg, &common.out)
        }
        Cmd::Train { common, world, horizon, scene } => {
            let cfg = resolve(&common, &world, &[("env.horizon", some(&horizon)), ("scene", scene)])?;
            commands::train(&cfg, &common.out)
        }
        Cmd::EvalOffline { common, dataset, policy, baseline, translator, translator_args, method } => {
            let cfg = resolve(&common, &WorldArgs::default(), &[])?;
            let source = match (policy.is_empty(), baseline) {
                (false, None) => commands::Predictors::Checkpoints(policy),
                (true, Some(b)) => commands::Predictors::Baseline(b),
                _ => return Err(config::usage("give either --policy (repeatable) or --baseline")),
            };
            let translator = translator.map(|p| (p, translator_args));
            commands::eval_offline(&cfg, &common.out, &dataset, source, translator, method)
        }
        Cmd::EvalOnline { common, world, policy, baseline, episodes, scene, preview } => {
            let cfg = resolve(&common, &world, &[("eval.episodes", some(&episodes)), ("scene", scene)])?;
            let source = match (policy, baseline) {
                (Some(p), None) => commands::Actor::Checkpoint(p),
                (None, Some(b)) => commands::Actor::Baseline(b),
                _ => return Err(config::usage("give either --policy or --baseline")),
            };
            commands::eval_online(&cfg, &common.out, source, preview)
        }
        Cmd::RenderPreview { common, world, world_file, x, y, yaw, resolution } => {
            let cfg = resolve(&common, &world, &[("pairs.resolution", some(&resolution))])?;
            commands::render_preview(&cfg, &common.out, world_file.as_deref(), [x, y, yaw])
        }
        Cmd::CollectOffline { common, world, logs, scene, modality } => {
            let cfg = resolve(
                &common,
                &world,
                &[("offline.logs", some(&logs)), ("scene", scene), ("offline.modality", modality)],
            )?;
            commands::collect_offline(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            eprintln!("run with --help for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
