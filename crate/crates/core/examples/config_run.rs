//! Run a TOML experiment file end to end, as the `run` subcommand does.
//!
//! `cargo run --release --example config_run -- configs/quick.toml [out-dir]`

use std::path::PathBuf;

fn main() -> netspec::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/quick.toml".into()));
    let out = args.next().map(PathBuf::from);
    let dir = netspec::commands::cmd_run(&config, None, out.as_deref())?;
    let log = std::fs::read_to_string(dir.join("trainlog.csv"))?;
    for line in log.lines().take(8) {
        println!("{line}");
    }
    println!("outputs in {}", dir.display());
    Ok(())
}
