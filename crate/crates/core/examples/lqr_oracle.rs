//! Discounted LQR benchmark for the thermal ring and a Monte Carlo check of
//! the analytic cost.
//!
//! `cargo run --release --example lqr_oracle`

use netspec::env::{NetworkEnv, ThermalEnv, ThermalParams};
use netspec::graph::Topology;
use netspec::oracle::{hvac_to_lqr, lqr_cost, oracle_report, policy_from_gain};
use netspec::trainer::{evaluate_policy, mc_horizon, EvalOptions};

fn main() -> netspec::Result<()> {
    let env = ThermalEnv::new(Topology::ring(10)?, &ThermalParams::default())?;
    let sys = hvac_to_lqr(&env)?;
    let report = oracle_report(&sys)?;
    println!(
        "Riccati: {} iterations, residual {:.2e}, tr P = {:.4}",
        report.iterations, report.residual, report.p_trace
    );
    println!("optimal cost {:.4}, zero controller {:.4}", report.optimal_cost, report.zero_cost);
    println!("gain row 0: {:?}", report.gain[0].iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());

    let k = nalgebra::DMatrix::from_fn(sys.dim(), sys.dim(), |r, c| report.gain[r][c]);
    let policy = policy_from_gain(&env, &k, env.topology().diameter()?, 0.1)?;
    let opts = EvalOptions { episodes: 5000, horizon: mc_horizon(env.discount(), 1e-12), deterministic: true };
    let stats = evaluate_policy(&env, &policy, &opts, 0)?;
    println!(
        "Monte Carlo {:.4} ± {:.4} vs analytic {:.4}",
        -stats.discounted_return,
        stats.return_se,
        lqr_cost(&sys, &k)?
    );
    Ok(())
}
