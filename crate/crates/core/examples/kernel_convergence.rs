//! Sup-grid gap between random Fourier features and the Gaussian kernel as
//! the feature count grows.
//!
//! `cargo run --release --example kernel_convergence`

use netspec::checks::{kernel_check, KernelCheckOptions};

fn main() -> netspec::Result<()> {
    let check = kernel_check(&KernelCheckOptions::default())?;
    println!("{:>6} {:>12} {:>12}", "m", "median gap", "p95 gap");
    for row in &check.rows {
        println!("{:>6} {:>12.5} {:>12.5}", row.m, row.median_gap, row.p95_gap);
    }
    println!("log-log slope over m in [64, 4096]: {:.3}", check.slope);
    Ok(())
}
