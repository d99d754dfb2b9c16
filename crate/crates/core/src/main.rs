use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isospec::cli::{recipes, run_source, Overrides};

#[derive(Parser)]
#[command(name = "isospec", version, about = "Run trace and Weyl-law experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a shipped recipe by name.
    Run {
        config: String,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the shipped recipes with their expected PASS bands.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", recipes::catalog());
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir, threads, seed } => {
            let (code, manifest, err) = run_source(&config, &Overrides { output_dir, threads, seed });
            if let Some(m) = &manifest {
                for c in &m.criteria {
                    println!("{} {}: {:e} (want {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.band);
                }
                println!("outputs in {}", m.config.output_dir.display());
            }
            if let Some(e) = err {
                eprintln!("isospec: {e}");
            }
            ExitCode::from(code as u8)
        }
    }
}
