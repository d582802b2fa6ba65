use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use floquet_edge_cli::{load_config, prepare, run, CliError, Command};

#[derive(Parser)]
#[command(name = "floquet-edge", version, about = "Edge modes of time-modulated resonator chains")]
struct Args {
    command: Command,
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = load_config(&args.config).and_then(|config| {
        let config = prepare(config, args.seed, args.out);
        run(&config, args.command)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("floquet-edge: {e}");
    ExitCode::from(e.exit_code() as u8)
}
