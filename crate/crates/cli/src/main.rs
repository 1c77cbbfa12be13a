use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ilea_core::comm::{read_message, MessageKind};
use ilea_core::engine::Schedule;
use ilea_core::harness::{
    run_experiment, write_synthetic_ratings, Experiment, ExperimentConfig, ExperimentReport,
    SyntheticCorpus, TransportKind,
};

#[derive(Parser)]
#[command(name = "ilea", version, about = "Distributed estimation on manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fréchet means of von Mises–Fisher samples on a sphere.
    FrechetSim {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
    },
    /// Low-rank matrix completion on a ratings file.
    MatrixCompletion {
        #[command(flatten)]
        common: Common,
        /// Tab-separated `user item rating [timestamp]` file.
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
    /// Finite-difference checks of every loss and surrogate gradient.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
    /// Prints the messages in a wire-format file such as a checkpoint.
    WireDump {
        path: PathBuf,
        /// Print payload values as well as headers.
        #[arg(long)]
        values: bool,
    },
    /// Writes a synthetic ratings corpus in MovieLens 100K format.
    GenRatings {
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Metrics CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Final iterate, written as an encoded Iterate message.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Extrinsic,
    Intrinsic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Inproc,
    Socket,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Roundrobin,
    Fixedfirst,
}

fn load_config(common: &Common, default: Experiment, allowed: &[Experiment]) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::new(default),
    };
    if !allowed.contains(&cfg.experiment) {
        bail!("config experiment {} does not match this subcommand", cfg.experiment);
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(m) = common.workers {
        cfg.workers = m;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(cp) = &common.checkpoint {
        cfg.checkpoint = Some(cp.clone());
    }
    if let Some(t) = common.transport {
        cfg.transport = match t {
            TransportArg::Inproc => TransportKind::InProc,
            TransportArg::Socket => TransportKind::Socket,
        };
    }
    if let Some(s) = common.schedule {
        cfg.ilea.schedule = match s {
            ScheduleArg::Roundrobin => Schedule::RoundRobin,
            ScheduleArg::Fixedfirst => Schedule::FixedFirst,
        };
    }
    Ok(cfg)
}

fn print_report(report: &ExperimentReport) {
    for t in &report.trials {
        let last = t.records.last();
        println!(
            "trial {:>3}  rmse {:.6e}  grad_norm {:.3e}  rounds {}",
            t.trial,
            t.final_rmse,
            last.map_or(f64::NAN, |r| r.grad_norm),
            t.records.len().saturating_sub(1)
        );
    }
    if !report.trials.is_empty() {
        println!("rmse over trials {:.6e}", report.aggregate_rmse());
    }
    if !report.gradcheck.is_empty() {
        let worst = report.gradcheck.iter().map(|g| g.2).fold(0.0, f64::max);
        for case in ilea_core::harness::GradCase::ALL {
            let max = report
                .gradcheck
                .iter()
                .filter(|g| g.0 == case)
                .map(|g| g.2)
                .fold(0.0, f64::max);
            println!("{case:?}: max relative error {max:.3e}");
        }
        println!("worst {worst:.3e}");
    }
}

fn wire_dump(path: &Path, values: bool) -> Result<()> {
    let mut reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut offset = 0usize;
    while let Some((msg, len)) = read_message(&mut reader)? {
        println!(
            "@{offset}: {:?} round {} sender {} shape {:?} ({len} bytes)",
            msg.kind, msg.round, msg.sender, msg.shape
        );
        if values && msg.kind != MessageKind::Shutdown {
            for chunk in msg.payload.chunks(6) {
                let row: Vec<String> = chunk.iter().map(|v| format!("{v:+.15e}")).collect();
                println!("    {}", row.join(" "));
            }
        }
        offset += len;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::FrechetSim { common, metric } => {
            let mut cfg = load_config(
                &common,
                Experiment::FrechetExtrinsic,
                &[Experiment::FrechetExtrinsic, Experiment::FrechetIntrinsic],
            )?;
            match metric {
                Some(Metric::Extrinsic) => cfg.experiment = Experiment::FrechetExtrinsic,
                Some(Metric::Intrinsic) => cfg.experiment = Experiment::FrechetIntrinsic,
                None => {}
            }
            print_report(&run_experiment(&cfg)?);
        }
        Command::MatrixCompletion { common, ratings } => {
            let mut cfg = load_config(&common, Experiment::MatrixCompletion, &[Experiment::MatrixCompletion])?;
            if ratings.is_some() {
                cfg.ratings = ratings;
            }
            if cfg.ratings.is_none() {
                bail!("matrix-completion needs --ratings or a ratings key in the config");
            }
            print_report(&run_experiment(&cfg)?);
        }
        Command::Gradcheck { common } => {
            let cfg = load_config(&common, Experiment::GradCheck, &[Experiment::GradCheck])?;
            print_report(&run_experiment(&cfg)?);
        }
        Command::WireDump { path, values } => wire_dump(&path, values)?,
        Command::GenRatings { out, seed } => {
            write_synthetic_ratings(&out, &SyntheticCorpus::movielens_100k(seed))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
