use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssop_cli::config::ExperimentConfig;
use ssop_cli::error::{CliError, Result};
use ssop_cli::{eval_cmd, gen, report_cmd, sweep_cmd, train_cmd};

#[derive(Parser)]
#[command(name = "ssop", about = "Sequence-model operator-learning experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat `key = value` sections).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list; overrides protocol.seeds.
    #[arg(long = "seeds", alias = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Overwrite artifacts that already exist.
    #[arg(long)]
    force: bool,
    /// Wall-clock budget (seconds) for long-sequence timing rows.
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Graph-memory budget (MB) for long-sequence timing rows.
    #[arg(long)]
    budget_mem_mb: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the config's datasets plus a seed/hash manifest.
    Gen(RunArgs),
    /// Train one model per seed: checkpoint, loss curve, metrics table.
    Train(RunArgs),
    /// Score a stored checkpoint under the config's protocol.
    Eval(RunArgs),
    /// Run the full per-seed experiment grid for the protocol.
    Sweep(RunArgs),
    /// Merge finished runs into ranked comparison tables.
    Report {
        /// Finished run directories, each holding a metrics.csv.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Directory for report.csv, report.txt, and curves.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn seeds_of(args: &RunArgs, cfg: &ExperimentConfig) -> Vec<u64> {
    args.seeds.clone().unwrap_or_else(|| cfg.seeds.clone())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let (cfg, out) = load(&args)?;
            let files = gen::cmd_gen(&cfg, &out, args.force)?;
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Train(args) => {
            let (cfg, out) = load(&args)?;
            let seeds = seeds_of(&args, &cfg);
            let diverged = train_cmd::cmd_train(&cfg, &out, &seeds, args.force)?;
            println!("wrote {}", out.join("metrics.csv").display());
            if !diverged.is_empty() {
                return Err(CliError::Diverged(diverged));
            }
            Ok(())
        }
        Command::Eval(args) => {
            let (cfg, out) = load(&args)?;
            let seed = seeds_of(&args, &cfg)[0];
            eval_cmd::cmd_eval(&cfg, &out, seed, args.budget_seconds, args.budget_mem_mb)?;
            println!("evaluated {} under {}", out.display(), cfg.protocol.name());
            Ok(())
        }
        Command::Sweep(args) => {
            let (cfg, out) = load(&args)?;
            let seeds = seeds_of(&args, &cfg);
            let diverged = sweep_cmd::cmd_sweep(
                &cfg,
                &out,
                &seeds,
                args.force,
                args.budget_seconds,
                args.budget_mem_mb,
            )?;
            println!("wrote {}", out.join("metrics.csv").display());
            if !diverged.is_empty() {
                return Err(CliError::Diverged(diverged));
            }
            Ok(())
        }
        Command::Report { dirs, out } => {
            report_cmd::cmd_report(&dirs, &out)?;
            println!("wrote {}", out.join("report.txt").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
