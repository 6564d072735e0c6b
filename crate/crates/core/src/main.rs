//! `safejam` command line: train, eval, emit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use safejam::checkpoint::Checkpoint;
use safejam::harness::{run_inference, RunTrace, Trainer};
use safejam::output::{self, Figure};
use safejam::RunConfig;

#[derive(Parser)]
#[command(name = "safejam", about = "Actor-critic safe jamming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Success,
    Conflicts,
    Modes,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Success => Figure::Success,
            FigureArg::Conflicts => Figure::Conflicts,
            FigureArg::Modes => Figure::Modes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the agent and constraint model; writes a checkpoint and CSVs
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        shield: Option<Toggle>,
    },
    /// Greedy rollout of a trained checkpoint; writes inference CSVs
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the configuration stored in the checkpoint
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
        /// Reseed the inference RNG instead of continuing the checkpoint's
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        shield: Option<Toggle>,
    },
    /// Regenerate one figure CSV from a trace.csv
    Emit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        figure: FigureArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, shield: Option<Toggle>) {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(t) = shield {
        cfg.shield = matches!(t, Toggle::On);
    }
}

fn write_run(trace: &RunTrace, out: &Path) -> anyhow::Result<()> {
    output::save_trace(trace, out.join("trace.csv"))?;
    for fig in Figure::ALL {
        output::emit(trace, fig, out)?;
    }
    Ok(())
}

fn train(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>, shield: Option<Toggle>) -> anyhow::Result<()> {
    let mut cfg = match &config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, seed, shield);
    cfg.validate()?;
    std::fs::create_dir_all(&out)?;
    let ckpt_path = out.join("checkpoint.json");

    let mut trainer = Trainer::new(&cfg)?;
    trainer.warm_up()?;
    let mut last_good = Checkpoint::new(cfg.clone(), trainer.artifacts().clone(), trainer.rng().clone(), 0, 0);
    for _ in 0..cfg.train_episodes {
        if let Err(e) = trainer.run_episode() {
            last_good.save(&ckpt_path)?;
            bail!(
                "training aborted after {} episodes: {e}; last good checkpoint at {}",
                last_good.episodes_done,
                ckpt_path.display()
            );
        }
        last_good = Checkpoint::new(
            cfg.clone(),
            trainer.artifacts().clone(),
            trainer.rng().clone(),
            trainer.episodes_done(),
            trainer.trace().len() as u64,
        );
    }
    last_good.save(&ckpt_path)?;
    let trace = trainer.trace();
    write_run(trace, &out)?;
    output::write_episodes(std::fs::File::create(out.join("episodes.csv"))?, trace)?;
    let last = trace.episodes().last().copied();
    println!(
        "trained {} episodes ({} timeslots, {} conflicts); checkpoint {}",
        trainer.episodes_done(),
        trace.len(),
        trace.conflicts(),
        ckpt_path.display()
    );
    if let Some(e) = last {
        println!(
            "last episode: {} slots, {} conflicts, success {}",
            e.timeslots,
            e.conflicts,
            e.success_percent().map(|p| format!("{p:.1}%")).unwrap_or_else(|| "n/a".into())
        );
    }
    Ok(())
}

fn eval(
    checkpoint: PathBuf,
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    shield: Option<Toggle>,
) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let mut cfg = match &config {
        Some(p) => {
            let cfg = RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
            ckpt.config.check_compatible(&cfg)?;
            cfg
        }
        None => ckpt.config.clone(),
    };
    apply_overrides(&mut cfg, None, shield);
    let mut rng = match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ckpt.rng.clone(),
    };
    let trace = run_inference(&ckpt.artifacts, &cfg, &mut rng)?;
    std::fs::create_dir_all(&out)?;
    write_run(&trace, &out)?;
    let rate = trace
        .success_percent()
        .map(|p| format!("{p:.1}%"))
        .unwrap_or_else(|| "n/a (no confrontations)".into());
    let searching = trace.records.iter().filter(|r| r.mode_after == 1).count();
    println!(
        "inference: {} timeslots, {} conflicts, success {}, searching {}/{}",
        trace.len(),
        trace.conflicts(),
        rate,
        searching,
        trace.len()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            out,
            seed,
            shield,
        } => train(config, out, seed, shield),
        Command::Eval {
            checkpoint,
            config,
            out,
            seed,
            shield,
        } => eval(checkpoint, config, out, seed, shield),
        Command::Emit { trace, figure, out } => {
            let trace = output::load_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let path = output::emit(&trace, figure.into(), &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
