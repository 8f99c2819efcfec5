//! `statefuzz`: learn, fuzz and replay against a controller cluster.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;

#[derive(Parser)]
#[command(name = "statefuzz", version, about = "Protocol state fuzzing for clustered SDN controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma list of vulnerability classes to enable, `all` or `none`.
    #[arg(long)]
    vulns: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a Mealy machine of the cluster.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Cluster seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Membership query budget.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_os_t = commands::default_out_dir())]
        out_dir: PathBuf,
    },
    /// Fuzz the cluster with mutants of the machine's seed sequences.
    Fuzz {
        /// Learned machine (JSON).
        #[arg(long)]
        machine: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of cases.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 1)]
        shards: usize,
        /// Keep one finding per criterion and class.
        #[arg(long)]
        dedup: bool,
        /// Exit nonzero when anything is found.
        #[arg(long)]
        fail_on_finding: bool,
        #[arg(long, default_value_os_t = commands::default_out_dir())]
        out_dir: PathBuf,
    },
    /// Replay a stored finding case.
    Replay {
        case: PathBuf,
        /// Replaces the cluster stored in the case.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the simulated cluster over TCP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "127.0.0.1:7600")]
        addr: String,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Learn { common, seed, budget, out_dir } => {
            let over = Overrides { seed, budget, vulns: common.vulns };
            commands::learn(common.config.as_deref(), &over, &out_dir)
        }
        Command::Fuzz { machine, common, seed, budget, shards, dedup, fail_on_finding, out_dir } => {
            let over = Overrides { seed, budget, vulns: common.vulns };
            commands::fuzz(&machine, common.config.as_deref(), &over, shards, dedup, fail_on_finding, &out_dir)
        }
        Command::Replay { case, config } => commands::replay_case(&case, config.as_deref()),
        Command::Serve { common, seed, addr } => {
            let over = Overrides { seed, budget: None, vulns: common.vulns };
            commands::serve(common.config.as_deref(), &over, &addr)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("STATEFUZZ_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
