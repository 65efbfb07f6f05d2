use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mamba_cli::oracles::{cmd_make_oracles, OracleOptions};
use mamba_cli::{cmd_verify, export::cmd_export, run::cmd_run};

#[derive(Parser)]
#[command(name = "mamba", version, about = "Imitation learning from multiple oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file; a lambda list or seed list runs a sweep.
    Run { config: PathBuf },
    /// Run an exact verification suite and print its check table.
    Verify {
        /// identities, improvement, trees, gradients, estimators, protocol or all
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write oracle files from partial training runs or built-in policies.
    MakeOracles {
        env: PathBuf,
        /// Training iterations per oracle, e.g. 5,20,80
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<usize>,
        /// Built-in oracle names such as gridworld-left
        #[arg(long, value_delimiter = ',')]
        handcrafted: Vec<String>,
        /// Random oracle order instead of best first
        #[arg(long)]
        shuffle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        eval_rollouts: usize,
        #[arg(short, long, default_value = "oracles")]
        out: PathBuf,
    },
    /// Median and quartiles of the best return across runs, as CSV.
    Export {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config).map(|()| true),
        Command::Verify { suite, seed } => cmd_verify(&suite, seed),
        Command::MakeOracles {
            env,
            budgets,
            handcrafted,
            shuffle,
            seed,
            eval_rollouts,
            out,
        } => {
            let options = OracleOptions {
                budgets,
                handcrafted,
                shuffle,
                seed,
                eval_rollouts,
                out_dir: out,
            };
            cmd_make_oracles(&env, &options).map(|manifest| {
                for m in manifest {
                    println!("{}\t{}\t{}", m.file, m.source, m.eval_return);
                }
                true
            })
        }
        Command::Export { dirs, out } => cmd_export(&dirs, &out).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
