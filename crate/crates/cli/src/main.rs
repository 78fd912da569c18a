use std::path::PathBuf;
use std::process::ExitCode;

use brillouin_cli::{load, run, CliError, Command};
use clap::Parser;

/// Optoacoustic cooling of traveling phonons: steady state, dynamics,
/// stochastic ensembles, spectra and pump depletion.
#[derive(Parser, Debug)]
#[command(name = "brillouin-cool", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot next to each CSV.
    #[arg(long)]
    svg: bool,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let mut config = load(&args.config)?;
    if let Some(dir) = &args.out {
        config.set_output_dir(dir.clone());
    }
    if args.svg {
        config.set_svg(true);
    }
    let outcome = run(args.command, &config)?;
    print!("{}", outcome.summary);
    for path in outcome.write(&config.output_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
