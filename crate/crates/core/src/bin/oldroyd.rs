use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oldroyd::diagnostics::{run_simulation, verify_lemmas, EXIT_CERTIFICATE, EXIT_OK};

#[derive(Parser)]
#[command(name = "oldroyd", version, about = "Oldroyd-B finite element runs and free-energy certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation and write the configured outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run and print every step's dissipation certificate.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Randomized checks of the matrix lemmas and π_h identities.
    VerifyLemmas {
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let code = match Cli::parse().cmd {
        Cmd::Run { config } => run_simulation(&config, false),
        Cmd::Check { config } => run_simulation(&config, true),
        Cmd::VerifyLemmas { samples, seed } => {
            let r = verify_lemmas(samples, seed);
            println!("{r}");
            if r.pass() {
                EXIT_OK
            } else {
                EXIT_CERTIFICATE
            }
        }
    };
    ExitCode::from(code as u8)
}
