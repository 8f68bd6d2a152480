use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use nsd_ensemble::io::parse_config;
use nsd_ensemble::scenarios::run_scenario;
use nsd_ensemble::scheme::SolveMode;
use nsd_ensemble::Error;

#[derive(Parser)]
#[command(version, about = "Ensemble SAV time stepping for coupled Navier-Stokes/Darcy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        config: PathBuf,
        /// Overrides `ensemble.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (0 uses all cores); overrides `output.threads`.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `scheme.mode`.
        #[arg(long)]
        mode: Option<SolveMode>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse { .. } | Error::ConfigValidation { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run { config, seed, out_dir, threads, mode } = Cli::parse().command;
    let result = parse_config(&config)
        .map_err(|e| match e {
            Error::Io(io) => Error::ConfigValidation { field: "config".into(), message: format!("{}: {io}", config.display()) },
            other => other,
        })
        .and_then(|mut cfg| {
            if let Some(s) = seed {
                cfg.ensemble.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if let Some(m) = mode {
                cfg.ensemble.mode = m;
            }
            cfg.validate()?;
            info!("running {} into {}", cfg.scenario, cfg.out_dir.display());
            run_scenario(&cfg)
        });
    match result {
        Ok(report) => {
            for a in &report.artifacts {
                println!("{}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
