use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netspec::checks::KernelCheckOptions;
use netspec::commands;

#[derive(Parser)]
#[command(name = "netspec", about = "Networked MDP control with κ-local spectral features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-feature kernel gap against m.
    KernelCheck {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Comma-separated feature counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256,512,1024,2048,4096")]
        ms: Vec<usize>,
        #[arg(long, default_value_t = 25)]
        grid_points: usize,
        #[arg(long, default_value_t = 3.0)]
        grid_radius: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long = "seed-override", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Exponential-decay probe over κ.
    DecayCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discounted LQR benchmark for a thermal config.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("NETSPEC_THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match Cli::parse().command {
        Command::Run { config, seed_override, out } => {
            commands::cmd_run(&config, seed_override, out.as_deref()).map(|dir| println!("{}", dir.display()))
        }
        Command::KernelCheck { sigma, alpha, ms, grid_points, grid_radius, trials, seed, out } => {
            let opts = KernelCheckOptions { sigma, alpha, ms, grid_points, grid_radius, trials, seed, ..Default::default() };
            commands::cmd_kernel_check(&opts, &out).map(|slope| println!("slope {slope:.4}"))
        }
        Command::DecayCheck { config, seed_override, out } => {
            commands::cmd_decay_check(&config, seed_override, out.as_deref()).map(|dir| println!("{}", dir.display()))
        }
        Command::Oracle { config, out } => commands::cmd_oracle(&config, out.as_deref()).map(|json| print!("{json}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
