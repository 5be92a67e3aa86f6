use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridmmo::arena::{
    benchmark, by_name, elo_ratings, pairwise_records, read_results, run_episode, run_many, task_completion_report,
    write_results, Policy, Replay,
};
use gridmmo::config::{GameConfig, Profile};
use gridmmo::minigame::MinigameKind;
use gridmmo::obs::ObservationLayout;

#[derive(Parser)]
#[command(name = "gridmmo", about = "Many-agent minigame simulator and evaluation arena")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// mini or full
    #[arg(long, default_value = "mini")]
    profile: String,
    /// Config file in `KEY = value` form; overrides the profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `KEY=VALUE` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<GameConfig, String> {
        let mut cfg = match &self.config {
            Some(p) => GameConfig::load(p).map_err(|e| e.to_string())?,
            None => GameConfig::new(self.profile.parse::<Profile>().map_err(|e| e.to_string())?),
        };
        for a in &self.set {
            cfg.apply_assignment(a).map_err(|e| e.to_string())?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play one episode and print its result.
    Simulate {
        #[arg(long)]
        game: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated policy names.
        #[arg(long, default_value = "random_valid")]
        policies: String,
        /// Write the replay here.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a tournament and write one result record per episode.
    Evaluate {
        #[arg(long)]
        game: String,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        /// Number of seed groups; each runs `episodes` episodes.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "brawler,random_valid")]
        policies: String,
        #[arg(long, default_value = "results")]
        results: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit ratings from a results directory.
    Elo { results: PathBuf },
    /// Task-completion report from a results directory.
    Score { results: PathBuf },
    /// Measure agent steps per second.
    Benchmark {
        #[arg(long, default_value = "battle")]
        game: String,
        #[arg(long, default_value_t = 2)]
        episodes: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "random_valid")]
        policies: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Verify a replay file and optionally re-score it.
    Replay {
        file: PathBuf,
        #[arg(long)]
        rescore: bool,
    },
    /// Print the observation layout manifest.
    Layout {
        #[arg(long, default_value = "mini")]
        profile: String,
    },
}

fn policies(list: &str) -> Result<Vec<Box<dyn Policy>>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|n| by_name(n).ok_or_else(|| format!("unknown policy `{n}`")))
        .collect()
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Command::Simulate {
            game,
            seed,
            policies: list,
            replay,
            cfg,
        } => {
            let cfg = cfg.build()?;
            let kind: MinigameKind = game.parse().map_err(|e: gridmmo::minigame::MinigameError| e.to_string())?;
            let owned = policies(&list)?;
            let refs: Vec<&dyn Policy> = owned.iter().map(|p| p.as_ref()).collect();
            let run = run_episode(&cfg, kind, &refs, seed).map_err(|e| e.to_string())?;
            if let Some(path) = replay {
                run.replay.write(&path).map_err(|e| e.to_string())?;
            }
            println!("{}", json(&run.result));
        }
        Command::Evaluate {
            game,
            episodes,
            seeds,
            policies: list,
            results,
            workers,
            cfg,
        } => {
            let cfg = cfg.build()?;
            let kind: MinigameKind = game.parse().map_err(|e: gridmmo::minigame::MinigameError| e.to_string())?;
            let owned = policies(&list)?;
            let refs: Vec<&dyn Policy> = owned.iter().map(|p| p.as_ref()).collect();
            let all: Vec<u64> = (0..seeds)
                .flat_map(|g| (0..episodes as u64).map(move |e| g * 1_000_000 + e))
                .collect();
            let runs = run_many(&cfg, kind, &refs, &all, workers).map_err(|e| e.to_string())?;
            let res: Vec<_> = runs.into_iter().map(|r| r.result).collect();
            write_results(&results, &res).map_err(|e| e.to_string())?;
            let records = pairwise_records(&res);
            match elo_ratings(&records) {
                Ok(table) => println!("{}", json(&table)),
                Err(e) => println!("ratings unavailable: {e}"),
            }
        }
        Command::Elo { results } => {
            let res = read_results(&results).map_err(|e| e.to_string())?;
            let records = pairwise_records(&res);
            for ((a, b), r) in &records {
                println!("{a} vs {b}: {} wins, {} losses, {} draws", r.wins, r.losses, r.draws);
            }
            let table = elo_ratings(&records).map_err(|e| e.to_string())?;
            println!("{}", json(&table));
        }
        Command::Score { results } => {
            let res = read_results(&results).map_err(|e| e.to_string())?;
            println!("{}", json(&task_completion_report(&res)));
        }
        Command::Benchmark {
            game,
            episodes,
            workers,
            policies: list,
            cfg,
        } => {
            let cfg = cfg.build()?;
            let kind: MinigameKind = game.parse().map_err(|e: gridmmo::minigame::MinigameError| e.to_string())?;
            let owned = policies(&list)?;
            let refs: Vec<&dyn Policy> = owned.iter().map(|p| p.as_ref()).collect();
            let report = benchmark(&cfg, kind, episodes, &refs, workers).map_err(|e| e.to_string())?;
            println!("{}", json(&report));
        }
        Command::Replay { file, rescore } => {
            let replay = Replay::read(&file).map_err(|e| e.to_string())?;
            println!("digest {}", replay.digest());
            println!("ticks {}", replay.ticks.len());
            if rescore {
                let r = replay.rescore().map_err(|e| e.to_string())?;
                println!("{}", json(&r));
            }
        }
        Command::Layout { profile } => {
            let p: Profile = profile.parse().map_err(|e: gridmmo::config::ConfigError| e.to_string())?;
            print!("{}", ObservationLayout::new(p).manifest());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
