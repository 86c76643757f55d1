//! Command-line front end: equilibrium reports, learning-dynamics sweeps,
//! single training runs and multi-seed studies.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gifting::learner::Backend;
use gifting::Error;

use commands::Status;
use config::{CliConfig, EnvKind, GameKind};

const DEFAULTS: &str = "\
Defaults ([given] = fixed learner setting, [chosen] = selected for this tool):
  gift amount gamma              10          [given]
  Stag Hunt r (low/med/high)     -2/-6/-10   [given]
  Adam learning rate             5e-4        [given]
  replay buffer                  100000      [given]
  epsilon                        0.3 -> 0.01 over 20000 steps, exponential  [given]
  target refresh                 every 250 episodes  [given]
  hidden layer                   64 ReLU units  [chosen]
  batch size                     4           [chosen]
  warm-up                        500 transitions  [chosen]
  episodes                       45000 (repeated game: 4500 of 10 steps)  [chosen]
  initial value noise            uniform +-0.3  [chosen]
  discount (repeated game)       0.99        [chosen]
  seeds per study cell           256         [chosen]
  transient study                150000 episodes, warm-up 5000, gift bias +1  [chosen]

Exit status: 0 success, 1 usage or config error, 2 game constraint violated,
3 too many failed runs or cells.";

#[derive(Parser)]
#[command(name = "gifting", version, about = "Zero-sum gifting in coordination games", after_help = DEFAULTS)]
struct Cli {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed from which every run seed is derived.
    #[arg(long, global = true)]
    study_seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "GIFTING_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pure equilibria of a game with and without gifting.
    Equilibria(GameArgs),
    /// Softmax gradient dynamics.
    #[command(subcommand)]
    Dynamics(DynamicsCommand),
    /// One training run.
    Train(TrainArgs),
    /// Multi-seed studies.
    #[command(subcommand)]
    Study(StudyCommand),
}

#[derive(Args)]
struct GameArgs {
    #[arg(long, value_enum)]
    game: Option<GameKind>,
    /// Game definition file (TOML).
    #[arg(long)]
    game_file: Option<PathBuf>,
    /// Stag Hunt payoff for hunting alone.
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Gift amount (0 disables gifting).
    #[arg(long)]
    gift: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid points per axis on [-3, 3].
    #[arg(long)]
    resolution: Option<usize>,
    /// Values per gift logit.
    #[arg(long)]
    gift_samples: Option<usize>,
}

#[derive(Subcommand)]
enum DynamicsCommand {
    /// Basin grids with and without gifting.
    Basin {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Prosocial frequency per risk level and gift amount.
    Freq {
        /// Risk levels, e.g. -10,-6,-2.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        r: Option<List>,
        /// Gift amounts, e.g. 1..20.
        #[arg(long, value_parser = parse_list)]
        gift: Option<List>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Normalized flow directions over [-3, 3]^2.
    Portrait {
        #[command(flatten)]
        game: GameArgs,
        /// Gift logits relative to the reference action, e.g. 0,0,0,0.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        gift_offsets: Option<List>,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Episodes per run, for every environment.
    #[arg(long)]
    episodes: Option<u64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendArg {
    Tabular,
    Mlp,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Gift amount (0 disables gifting).
    #[arg(long)]
    gift: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Args)]
struct StudyArgs {
    /// Seeds per cell.
    #[arg(long)]
    seeds: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Convergence table over the nine environments, gifting off and on.
    Table2 {
        #[command(flatten)]
        study: StudyArgs,
        /// Gift amount of the gifted arm.
        #[arg(long)]
        gift: Option<f64>,
    },
    /// Prosocial rate per risk level and gift amount.
    RiskGift {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        r: Option<List>,
        #[arg(long, value_parser = parse_list)]
        gift: Option<List>,
    },
    /// Batch gifting curves from gift-biased initial values.
    Transient {
        #[command(flatten)]
        study: StudyArgs,
    },
}

/// Comma-separated numbers and `lo..hi` ranges.
#[derive(Clone)]
struct List(Vec<f64>);

fn parse_list(text: &str) -> Result<List, String> {
    config::parse_list(text).map(List)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_game(cfg: &mut CliConfig, g: GameArgs) {
    set(&mut cfg.game.kind, g.game);
    if g.game_file.is_some() {
        cfg.game.file = g.game_file;
    }
    set(&mut cfg.game.r, g.r);
    set(&mut cfg.game.gamma, g.gift);
}

fn apply_grid(cfg: &mut CliConfig, g: GridArgs) {
    set(&mut cfg.dynamics.resolution, g.resolution);
    set(&mut cfg.dynamics.gift_samples, g.gift_samples);
}

fn backend(arg: Option<BackendArg>) -> Option<Backend> {
    arg.map(|b| match b {
        BackendArg::Tabular => Backend::Tabular,
        BackendArg::Mlp => Backend::Mlp,
    })
}

fn apply_learner(cfg: &mut CliConfig, l: LearnerArgs) {
    set(&mut cfg.train.backend, backend(l.backend));
    if let Some(e) = l.episodes {
        cfg.train.episodes = e;
        cfg.study.repeated_episodes = 0;
    }
}

fn run(cli: Cli) -> gifting::Result<Status> {
    let mut cfg = CliConfig::load(cli.config.as_deref())?;
    set(&mut cfg.out_dir, cli.out);
    set(&mut cfg.study_seed, cli.study_seed);
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if cfg.workers == Some(0) {
        return Err(Error::Config("worker count must be positive".into()));
    }
    match cli.command {
        Command::Equilibria(g) => {
            apply_game(&mut cfg, g);
            commands::equilibria(&cfg)
        }
        Command::Dynamics(DynamicsCommand::Basin { game, grid }) => {
            apply_game(&mut cfg, game);
            apply_grid(&mut cfg, grid);
            commands::basin(&cfg)
        }
        Command::Dynamics(DynamicsCommand::Freq { r, gift, grid }) => {
            set(&mut cfg.dynamics.r_values, r.map(|l| l.0));
            set(&mut cfg.dynamics.gammas, gift.map(|l| l.0));
            apply_grid(&mut cfg, grid);
            commands::frequency(&cfg)
        }
        Command::Dynamics(DynamicsCommand::Portrait {
            game,
            gift_offsets,
            resolution,
        }) => {
            apply_game(&mut cfg, game);
            set(&mut cfg.dynamics.gift_offsets, gift_offsets.map(|l| l.0));
            set(&mut cfg.dynamics.resolution, resolution);
            commands::portrait(&cfg)
        }
        Command::Train(t) => {
            set(&mut cfg.run.env, t.env);
            set(&mut cfg.game.r, t.r);
            set(&mut cfg.game.gamma, t.gift);
            set(&mut cfg.run.seed, t.seed);
            apply_learner(&mut cfg, t.learner);
            commands::train(&cfg)
        }
        Command::Study(StudyCommand::Table2 { study, gift }) => {
            set(&mut cfg.study.seeds, study.seeds);
            set(&mut cfg.game.gamma, gift);
            apply_learner(&mut cfg, study.learner);
            commands::table2(&cfg)
        }
        Command::Study(StudyCommand::RiskGift { study, r, gift }) => {
            set(&mut cfg.study.seeds, study.seeds);
            set(&mut cfg.study.r_values, r.map(|l| l.0));
            set(&mut cfg.study.gammas, gift.map(|l| l.0));
            apply_learner(&mut cfg, study.learner);
            commands::risk_gift(&cfg)
        }
        Command::Study(StudyCommand::Transient { study }) => {
            set(&mut cfg.transient.seeds, study.seeds);
            set(&mut cfg.transient.episodes, study.learner.episodes);
            set(&mut cfg.train.backend, backend(study.learner.backend));
            commands::transient(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unhealthy) => {
            eprintln!("error: more than 1% of runs or cells failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Constraint(_) => 2,
                _ => 1,
            })
        }
    }
}
