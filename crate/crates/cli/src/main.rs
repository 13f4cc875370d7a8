use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stripfold::harness::{self, ExperimentConfig, ExperimentKind};
use stripfold::kv::KeyValues;

#[derive(Parser, Debug)]
#[command(name = "stripfold", version, about = "Fabric strip folding lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// key = value experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Extra configuration entries, e.g. `trainer.strip.n_links=30`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CMA-ES policy search under randomized materials.
    Train(TrainArgs),
    /// Triangular and circular paths on a material grid.
    Baseline(GridArgs),
    /// Fold-height envelope, and the displacement envelope given weights.
    Sweep(SweepArgs),
    /// Policy against both baselines on held-out materials.
    Evaluate(EvaluateArgs),
    /// Gripper paths and strip snapshots of a policy.
    Trace(TraceArgs),
    /// Render-then-detect loop and homography recovery.
    RenderCheck(RenderArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    generations: Option<usize>,
    /// θ samples per candidate evaluation.
    #[arg(long)]
    samples: Option<usize>,
    /// Share one θ batch across the candidates of a generation.
    #[arg(long)]
    common_thetas: Option<bool>,
    /// Control steps before the forced horizontal phase.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    lift_height: Option<f64>,
    /// Force penalty scale.
    #[arg(long)]
    a: Option<f64>,
    /// Overtime penalty.
    #[arg(long)]
    c_h: Option<f64>,
    #[arg(long)]
    k_min: Option<f64>,
    #[arg(long)]
    k_max: Option<f64>,
    #[arg(long)]
    damping_span: Option<f64>,
    #[arg(long)]
    prior_seed: Option<u64>,
    /// Train a second time and compare ledgers.
    #[arg(long)]
    verify_replay: bool,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    grid_k: Option<usize>,
    #[arg(long)]
    grid_b: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated gripper heights, m.
    #[arg(long)]
    heights: Option<String>,
    #[arg(long)]
    envelope_k: Option<usize>,
    #[arg(long)]
    envelope_b: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Held-out draws.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Comma-separated stiffness values.
    #[arg(long)]
    k: Option<String>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    states: Option<usize>,
}

fn put<T: ToString>(kv: &mut KeyValues, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        kv.insert(key, v.to_string());
    }
}

fn put_path(kv: &mut KeyValues, key: &str, value: &Option<PathBuf>) {
    put(kv, key, &value.as_ref().map(|p| p.display().to_string()));
}

fn put_grid(kv: &mut KeyValues, g: &GridArgs) {
    put(kv, "grid_k", &g.grid_k);
    put(kv, "grid_b", &g.grid_b);
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Train(_) => ExperimentKind::Train,
            Command::Baseline(_) => ExperimentKind::Baseline,
            Command::Sweep(_) => ExperimentKind::Sweep,
            Command::Evaluate(_) => ExperimentKind::Evaluate,
            Command::Trace(_) => ExperimentKind::Trace,
            Command::RenderCheck(_) => ExperimentKind::RenderCheck,
        }
    }

    fn overrides(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        match self {
            Command::Train(t) => {
                put(&mut kv, "trainer.population", &t.population);
                put(&mut kv, "trainer.sigma0", &t.sigma0);
                put(&mut kv, "trainer.generations", &t.generations);
                put(&mut kv, "trainer.samples", &t.samples);
                put(&mut kv, "trainer.common_thetas", &t.common_thetas);
                put(&mut kv, "trainer.horizon", &t.horizon);
                put(&mut kv, "trainer.step_size", &t.step_size);
                put(&mut kv, "trainer.lift_height", &t.lift_height);
                put(&mut kv, "trainer.a", &t.a);
                put(&mut kv, "trainer.c_h", &t.c_h);
                put(&mut kv, "prior.k_min", &t.k_min);
                put(&mut kv, "prior.k_max", &t.k_max);
                put(&mut kv, "prior.damping_span", &t.damping_span);
                put(&mut kv, "prior.seed", &t.prior_seed);
                if t.verify_replay {
                    kv.insert("verify_replay", true);
                }
            }
            Command::Baseline(g) => put_grid(&mut kv, g),
            Command::Sweep(s) => {
                put(&mut kv, "heights", &s.heights);
                put(&mut kv, "envelope_k", &s.envelope_k);
                put(&mut kv, "envelope_b", &s.envelope_b);
                put_path(&mut kv, "weights", &s.weights);
                put_grid(&mut kv, &s.grid);
            }
            Command::Evaluate(e) => {
                put_path(&mut kv, "weights", &e.weights);
                put(&mut kv, "eval_samples", &e.samples);
            }
            Command::Trace(t) => {
                put_path(&mut kv, "weights", &t.weights);
                put(&mut kv, "trace_k", &t.k);
            }
            Command::RenderCheck(r) => {
                put_path(&mut kv, "weights", &r.weights);
                put(&mut kv, "vision_states", &r.states);
            }
        }
        kv
    }
}

/// Defaults, then the config file, then `--set`, then flags.
fn build_config(cli: &Cli) -> stripfold::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(cli.command.kind());
    if let Some(path) = &cli.common.config {
        config.update_from(&KeyValues::read(path)?)?;
    }
    if !cli.common.set.is_empty() {
        let text = cli.common.set.join("\n");
        config.update_from(&KeyValues::parse(&text, "--set")?)?;
    }
    config.update_from(&cli.command.overrides())?;
    config.kind = cli.command.kind();
    if let Some(seed) = cli.common.seed {
        config.set_seed(seed);
    }
    if let Some(out) = &cli.common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    log::info!("{} run in {}", config.kind, config.out_dir.display());
    match harness::run(&config) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{}", c.line());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
