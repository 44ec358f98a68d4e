use std::path::PathBuf;
use std::process::ExitCode;

use amoo_cli::reproduce::Target;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amoo", version, about = "Aligned multi-objective optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Regenerate one of the canonical figures or tables.
    Reproduce {
        #[arg(value_enum)]
        name: Target,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// List the problem families a config can name.
    ListProblems,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("AMOO_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let code = match cli.command {
        Command::Run { config } => amoo_cli::cmd_run(&config),
        Command::Reproduce { name, out } => amoo_cli::cmd_reproduce(name, &out),
        Command::ListProblems => {
            print!("{}", amoo_cli::list_problems());
            amoo_cli::EXIT_OK
        }
    };
    ExitCode::from(code)
}
