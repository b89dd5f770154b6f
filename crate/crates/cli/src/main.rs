use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sampent_core::experiment::{
    run_entropy_scan, run_experiment, run_jl_check, run_net_build, run_tailfit, Artifacts, EntropyScanConfig,
    ExperimentConfig, JlCheckConfig, NetBuildConfig, TailfitConfig,
};
use sampent_core::{Error, Result};

/// Covering nets, random measurements and reconstruction experiments.
#[derive(Parser)]
#[command(name = "sampent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Epsilon-net construction.
    Net {
        #[command(subcommand)]
        action: NetAction,
    },
    /// Distortion of random projections.
    Jl {
        #[command(subcommand)]
        action: JlAction,
    },
    /// Seeded reconstruction trials.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Entropy growth of constructed nets.
    Entropy {
        #[command(subcommand)]
        action: EntropyAction,
    },
    /// Fit and validate a tail-decay model.
    Tailfit(Common),
}

#[derive(Subcommand)]
enum NetAction {
    Build(Common),
}

#[derive(Subcommand)]
enum JlAction {
    Check(Common),
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run(Common),
}

#[derive(Subcommand)]
enum EntropyAction {
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    jobs: Option<usize>,
}

type Driver = fn(&Path, Option<u64>) -> Result<Artifacts>;

fn execute(command: Command) -> Result<(Artifacts, PathBuf)> {
    let (common, run): (Common, Driver) = match command {
        Command::Net { action: NetAction::Build(c) } => (c, |p, seed| {
            let mut cfg = NetBuildConfig::load(p)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            run_net_build(&cfg)
        }),
        Command::Jl { action: JlAction::Check(c) } => (c, |p, seed| {
            let mut cfg = JlCheckConfig::load(p)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            run_jl_check(&cfg)
        }),
        Command::Experiment { action: ExperimentAction::Run(c) } => (c, |p, seed| {
            let mut cfg = ExperimentConfig::load(p)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            run_experiment(&cfg)?.artifacts()
        }),
        Command::Entropy { action: EntropyAction::Scan(c) } => (c, |p, seed| {
            let mut cfg = EntropyScanConfig::load(p)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            run_entropy_scan(&cfg)
        }),
        Command::Tailfit(c) => (c, |p, seed| {
            let mut cfg = TailfitConfig::load(p)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            Ok(run_tailfit(&cfg)?.1)
        }),
    };
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    }
    let artifacts = run(&common.config, common.seed)?;
    artifacts.write_to(&common.out)?;
    Ok((artifacts, common.out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    match execute(cli.command) {
        Ok((artifacts, out)) => {
            println!("{}", artifacts.summary_line);
            for (name, _) in &artifacts.files {
                println!("wrote {}", out.join(name).display());
            }
            eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sampent: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
