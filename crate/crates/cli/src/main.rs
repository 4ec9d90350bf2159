use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ftnn_cli::config::Config;
use ftnn_cli::{boundary, grad, mnist, sequence};

#[derive(Parser)]
#[command(name = "ftnn", version, about = "Functional transfer network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` experiment file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Layer-wise training plus fine-tuning sweep on MNIST.
    Mnist {
        #[command(flatten)]
        common: Common,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Train on a random subset of this many images.
        #[arg(long)]
        subset: Option<usize>,
        /// Test on a random subset of this many images.
        #[arg(long)]
        test_subset: Option<usize>,
        /// Worker threads.
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
        /// Fill the wall_seconds column.
        #[arg(long)]
        timing: bool,
    },
    /// Next-digit memorisation with the memory family.
    Memory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
    },
    /// Decision map of the three-ellipse classifier.
    Boundary {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of every family and a 4-2-3 network.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Mnist {
            common,
            seed,
            subset,
            test_subset,
            jobs,
            timing,
        } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(s) = seed {
                cfg.set("seed", s);
            }
            if let Some(k) = subset {
                cfg.set("train_subset", k);
            }
            if let Some(k) = test_subset {
                cfg.set("test_subset", k);
            }
            let exp = mnist::MnistExperiment::from_config(&cfg)?;
            let (train, test) = exp.load_data()?;
            eprintln!(
                "{} jobs, {} train / {} test images",
                exp.jobs().len(),
                train.len(),
                test.len()
            );
            let outcomes = mnist::run_mnist_experiment(&exp, &train, &test, jobs, |o| {
                eprintln!(
                    "{}: {} lwt {:?} ft {:?} ({:.1}s)",
                    o.job.id(),
                    o.status,
                    o.lwt_acc,
                    o.ft_acc,
                    o.wall_seconds
                );
            })?;
            emit(&common.output, &mnist::to_csv(&outcomes, timing))?;
            Ok(true)
        }
        Command::Memory { common, seed, jobs } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(s) = seed {
                cfg.set("seed", s);
            }
            let exp = sequence::MemoryExperiment::from_config(&cfg)?;
            let seq = exp.load_digits()?;
            let curves = sequence::run_memory_experiment(&exp, &seq, jobs, |c| {
                eprintln!(
                    "{}: max {:.2}%, first >= 90% at {:?}",
                    c.tag(),
                    c.max_accuracy(),
                    c.first_epoch_at(90.0)
                );
            })?;
            emit(&common.output, &sequence::to_csv(&curves))?;
            Ok(true)
        }
        Command::Boundary { common } => {
            let cfg = load_config(&common.config)?;
            let grid = boundary::grid_from_config(&cfg)?;
            emit(&common.output, &boundary::boundary_csv(&grid)?)?;
            Ok(true)
        }
        Command::Gradcheck {
            trials,
            tolerance,
            seed,
        } => {
            let (text, ok) = grad::gradcheck_report(trials, seed, tolerance)?;
            print!("{text}");
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
