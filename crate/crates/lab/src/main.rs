use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sigma_lab::{exit, registry, run};

#[derive(Parser)]
#[command(name = "sigma-lab", version, about = "Monte Carlo checks for class-(Sigma) submartingales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a `key = value` file.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the registry of models, weights and specs.
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::List => {
            for line in registry::registry_lines() {
                println!("{line}");
            }
            exit::PASS
        }
        Command::Run { config, workers, out } => match run(&config, workers, out.as_deref()) {
            Ok(summary) => {
                let verdict = if summary.outcome.pass { "pass" } else { "FAIL" };
                println!("{verdict}: results in {}", summary.out_dir.display());
                if summary.outcome.pass {
                    exit::PASS
                } else {
                    exit::CHECK_FAILED
                }
            }
            Err(e) => {
                eprintln!("sigma-lab: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
