use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twh_core::io::{self, Overrides, Pipeline, ReportFlags, Stage, StageOutcome, UNCERTIFIED_BANNER};
use twh_core::{Error, Result};

#[derive(Parser)]
#[command(name = "twh", version, about = "Travelling-wave homology for scalar reaction-diffusion problems")]
struct Cli {
    /// Experiment file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides the experiment's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized stationary search.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies every solver tolerance.
    #[arg(long = "tol-scale", global = true)]
    tol_scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary solutions, Morse indices and hyperbolicity.
    Stationary,
    /// Index-1 connecting orbits and the connection matrix.
    Orbits,
    /// Chain complex, homology, direct sums and the forcing bound.
    Homology,
    /// Continuation maps along the configured homotopy.
    Continue,
    /// Hypotheses on the nonlinearity and the energy lower bound.
    Validate,
    /// CSV and SVG plot data for a finished run.
    Report,
    /// Every stage listed in the experiment file, in pipeline order.
    Run,
}

fn print(o: &StageOutcome) {
    println!("{}: {} ({} files, {:.2} s)", o.stage, o.summary, o.files.len(), o.seconds);
    if !o.certified {
        println!("{}: {UNCERTIFIED_BANNER}", o.stage);
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let overrides = Overrides { out: cli.out.clone(), seed: cli.seed, tol_scale: cli.tol_scale, threads: cli.threads };
    let stage = match cli.command {
        Command::Stationary => Some(Stage::Stationary),
        Command::Orbits => Some(Stage::Orbits),
        Command::Homology => Some(Stage::Homology),
        Command::Continue => Some(Stage::Continuation),
        Command::Validate => Some(Stage::Validate),
        Command::Report => Some(Stage::Report),
        Command::Run => None,
    };
    let outcomes = match (&cli.config, stage) {
        (None, Some(Stage::Report)) => {
            let dir = cli.out.ok_or_else(|| Error::Config("report needs --out or --config".into()))?;
            vec![io::report_run(&dir, &ReportFlags::default())?]
        }
        (None, _) => return Err(Error::Config("--config is required".into())),
        (Some(path), stage) => {
            let pipeline = Pipeline::open(path, overrides)?;
            match stage {
                Some(s) => vec![pipeline.run(s)?],
                None => {
                    let mut done = Vec::new();
                    for s in pipeline.config.stages.iter().copied().collect::<std::collections::BTreeSet<_>>() {
                        let o = pipeline.run(s)?;
                        print(&o);
                        done.push(o);
                    }
                    return Ok(done.iter().all(|o| o.certified));
                }
            }
        }
    };
    outcomes.iter().for_each(print);
    Ok(outcomes.iter().all(|o| o.certified))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(io::EXIT_OK as u8),
        Ok(false) => ExitCode::from(io::EXIT_CERTIFICATION as u8),
        Err(e) => {
            eprintln!("{}", io::diagnostic(&e));
            ExitCode::from(io::exit_code(&e) as u8)
        }
    }
}
