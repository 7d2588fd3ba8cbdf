//! Train localized controllers on a ten-zone ring building and compare the
//! learned cost against the discounted LQR optimum.
//!
//! `cargo run --release --example thermal_control [rounds]`

use netspec::actor::Normalization;
use netspec::env::{ThermalEnv, ThermalParams};
use netspec::graph::Topology;
use netspec::oracle::{hvac_to_lqr, oracle_report};
use netspec::trainer::{run_experiment, EvalOptions, SamplingOptions, TrainerSettings};

fn main() -> netspec::Result<()> {
    let rounds = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(20);
    let env = ThermalEnv::new(Topology::ring(10)?, &ThermalParams::default())?;
    let oracle = oracle_report(&hvac_to_lqr(&env)?)?;
    println!("LQR optimum {:.3}, zero controller {:.3}", oracle.optimal_cost, oracle.zero_cost);

    let settings = TrainerSettings {
        kappa: 1,
        kappa_pi: 1,
        m: 50,
        alpha: 0.0,
        samples: 200,
        rounds,
        eta: 0.2,
        policy_std: 1.0,
        ridge_scale: 1e-6,
        normalization: Normalization::Global,
        feature_sigma: None,
        sampling: SamplingOptions::with_horizon(20),
        eval: EvalOptions { episodes: 200, horizon: 60, deterministic: true },
    };
    for run in run_experiment(&env, &settings, &[0, 1, 2])? {
        let first = run.log.first().unwrap();
        let last = run.log.last().unwrap();
        println!(
            "seed {}: cost {:.3} -> {:.3} ({:+.2}% vs optimum), last critic condition {:.1e}",
            run.seed,
            first.cost,
            last.cost,
            100.0 * (last.cost / oracle.optimal_cost - 1.0),
            last.max_condition
        );
    }
    Ok(())
}
