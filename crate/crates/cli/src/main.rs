//! `fleetplace`: generate synthetic ride streams, measure their fractal
//! dimension, and score placement policies against an offline oracle.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fleetplace_core::Algorithm;

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fleetplace", version, about)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the config's global seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the configured algorithm list (repeatable):
    /// urand_nh, pp_lh, ftl_ch, opt.
    #[arg(long = "algo", global = true, value_name = "NAME")]
    algos: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic ride-request stream.
    Synth,
    /// Estimate the correlation dimension of the stream's pickups.
    Fractal,
    /// Run the placement policies and score them per snapshot.
    Simulate,
    /// Merge simulation summaries into one comparison CSV.
    Report,
}

fn parse_algo(name: &str) -> Result<Algorithm> {
    Algorithm::from_wire(name).with_context(|| {
        format!("unknown algorithm {name:?} (expected urand_nh, pp_lh, ftl_ch, or opt)")
    })
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .context("this command needs --config")?;
    let algos = cli
        .algos
        .iter()
        .map(|s| parse_algo(s))
        .collect::<Result<Vec<_>>>()?;
    RunConfig::load(
        path,
        &Overrides {
            seed: cli.seed,
            out: cli.out.clone(),
            algos,
        },
    )
}

fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::Synth => commands::cmd_synth(&load_config(cli)?),
        Command::Fractal => commands::cmd_fractal(&load_config(cli)?),
        Command::Simulate => commands::cmd_simulate(&load_config(cli)?),
        Command::Report => {
            // Report only needs the output directory, so the config file is
            // optional when --out is given.
            let out = match (&cli.out, &cli.config) {
                (Some(out), _) => out.clone(),
                (None, Some(_)) => load_config(cli)?.out_dir()?.to_path_buf(),
                (None, None) => bail!("report needs --out or --config"),
            };
            commands::cmd_report(&out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One line on stderr, `error: <cause>: <cause>: ...`, so scripts
            // can grep it; newlines inside causes are flattened.
            let chain = err
                .chain()
                .map(|c| c.to_string().replace('\n', " "))
                .collect::<Vec<_>>()
                .join(": ");
            eprintln!("error: {chain}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_global_flags_anywhere() {
        let cli = Cli::parse_from([
            "fleetplace",
            "simulate",
            "--config",
            "run.toml",
            "--seed",
            "9",
            "--algo",
            "pp_lh",
            "--algo",
            "opt",
        ]);
        assert!(matches!(cli.command, Command::Simulate));
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.algos, vec!["pp_lh", "opt"]);
    }

    #[test]
    fn algo_names_validated() {
        assert_eq!(parse_algo("ftl_ch").unwrap(), Algorithm::FtlCh);
        let err = parse_algo("ftl").unwrap_err().to_string();
        assert!(err.contains("unknown algorithm"), "{err}");
    }
}
