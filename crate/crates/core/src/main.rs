use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use onbody::cli::{cmd_evaluate, cmd_featurize, cmd_protocol, cmd_simulate, cmd_theory_check, cmd_train, ExperimentConfig};

#[derive(Parser)]
#[command(name = "onbody", version, about = "On-body device authentication experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed; required when no config is given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Train or evaluate the alpha = beta = 0 baseline.
    #[arg(long, global = true)]
    baseline: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate labeled RSS traces.
    Simulate,
    /// Build normalized propagation profiles and the train/test split.
    Featurize,
    /// Train the adversarial model.
    Train,
    /// Score the test split and write metrics, ROC and charts.
    Evaluate,
    /// Run a protocol script against the gateway.
    Protocol,
    /// Check the equilibrium theory on tabular joints.
    TheoryCheck,
}

fn config(args: &Args) -> onbody::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.seed) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(seed)) => ExperimentConfig::new(seed),
        (None, None) => return Err(onbody::Error::InvalidParameter("a seed is required: pass --config or --seed".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn print<T: Serialize>(value: &T) -> onbody::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| onbody::Error::InvalidParameter(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(onbody::Error::Io { path: "<stdout>".into(), source: e }),
        _ => Ok(()),
    }
}

fn run(args: &Args) -> onbody::Result<()> {
    if args.baseline && !matches!(args.command, Command::Train | Command::Evaluate) {
        return Err(onbody::Error::InvalidParameter("--baseline applies only to train and evaluate".into()));
    }
    let cfg = config(args)?;
    match args.command {
        Command::Simulate => print(&cmd_simulate(&cfg)?),
        Command::Featurize => print(&cmd_featurize(&cfg)?),
        Command::Train => {
            let every = (cfg.train.outer_iters / 20).max(1);
            print(&cmd_train(&cfg, args.baseline, |r| {
                if (r.iter + 1) % every == 0 {
                    eprintln!("iter {:>6}  L_P {:.4}  L_D {:.4}  L_C {:.4}", r.iter + 1, r.l_p, r.l_d, r.l_c);
                }
            })?)
        }
        Command::Evaluate => print(&cmd_evaluate(&cfg, args.baseline)?),
        Command::Protocol => print(&cmd_protocol(&cfg)?),
        Command::TheoryCheck => {
            let report = cmd_theory_check(&cfg)?;
            print(&report)?;
            if report.all_pass {
                Ok(())
            } else {
                Err(onbody::Error::InvalidParameter("theory check failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
