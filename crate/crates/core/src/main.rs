use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tot::commands::{execute, Command};
use tot::{load_config, Overrides};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Knothe,
    Brenier,
    Continue,
    Compare,
}

/// Optimal transport maps on the 2-torus, from Knothe to Brenier.
#[derive(Parser, Debug)]
#[command(name = "tot", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Knothe => Command::Knothe,
        Cmd::Brenier => Command::Brenier,
        Cmd::Continue => Command::Continue,
        Cmd::Compare => Command::Compare,
    };
    let overrides = Overrides {
        grid: cli.grid,
        t0: cli.t0,
        steps: cli.steps,
        out: cli.out,
    };
    let result = load_config(&cli.config).and_then(|mut cfg| {
        overrides.apply(&mut cfg)?;
        execute(command, &cfg)
    });
    match result {
        Ok(lines) => {
            if !cli.quiet {
                for l in lines {
                    println!("{l}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
