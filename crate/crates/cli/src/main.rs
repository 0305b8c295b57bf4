use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fxsmile_cli::commands::{calibrate_command, price_command, ModelArgs, PriceArgs};
use fxsmile_cli::scenarios::{run_all, SCENARIOS};
use fxsmile_cli::CliError;

#[derive(Parser)]
#[command(name = "fxsmile", version, about = "FX volatility smile calibration and stress tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named reproduction, or `all`
    RunScenario {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run independent scenarios concurrently
        #[arg(long)]
        parallel: bool,
    },
    /// List scenario names
    List,
    /// Calibrate a model and print parameters and pillar residuals as JSON
    Calibrate(ModelArgs),
    /// Price a product off a calibrated smile and print JSON
    Price(PriceArgs),
}

fn print_json(v: &serde_json::Value) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for s in SCENARIOS {
                println!("{s}");
            }
            Ok(())
        }
        Command::Calibrate(args) => print_json(&calibrate_command(&args)?),
        Command::Price(args) => print_json(&price_command(&args)?),
        Command::RunScenario { name, out, parallel } => {
            let names: Vec<&str> = if name == "all" {
                SCENARIOS.to_vec()
            } else {
                vec![name.as_str()]
            };
            let mut failed = None;
            for (n, r) in names.iter().zip(run_all(&names, &out, parallel)) {
                match r {
                    Ok(o) => {
                        for f in &o.files {
                            println!("{}", f.display());
                        }
                    }
                    Err(e @ CliError::Usage(_)) => return Err(e),
                    Err(e) => {
                        eprintln!("fxsmile: scenario {n} failed: {e}");
                        failed = Some(e);
                    }
                }
            }
            failed.map_or(Ok(()), Err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("fxsmile: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("fxsmile: {e}");
            ExitCode::from(2)
        }
    }
}
