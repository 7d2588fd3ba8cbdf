//! Drive an eight-oscillator ring towards a common target frequency.
//!
//! `cargo run --release --example kuramoto_sync [rounds]`

use netspec::actor::Normalization;
use netspec::env::{KuramotoEnv, KuramotoParams};
use netspec::graph::Topology;
use netspec::trainer::{EvalOptions, SamplingOptions, Trainer, TrainerSettings};

fn main() -> netspec::Result<()> {
    let rounds = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(20);
    let env = KuramotoEnv::sample(Topology::ring(8)?, &KuramotoParams::default(), 0)?;
    let settings = TrainerSettings {
        kappa: 2,
        kappa_pi: 1,
        m: 256,
        alpha: 0.0,
        samples: 2000,
        rounds,
        eta: 0.2,
        policy_std: 0.5,
        ridge_scale: 1e-6,
        normalization: Normalization::Global,
        feature_sigma: None,
        sampling: SamplingOptions { horizon: 800, burn_in: 400, thinning: 1 },
        eval: EvalOptions { episodes: 4, horizon: 800, deterministic: true },
    };
    let mut trainer = Trainer::new(&env, settings, 0)?;
    let base = trainer.baseline()?;
    println!("round 0: reward per agent-step {:.4}", base.mean_reward);
    for _ in 0..rounds {
        let rec = trainer.run_round()?;
        println!("round {}: reward per agent-step {:.4}, |g| {:.3}", rec.round, rec.mean_reward, rec.grad_norm);
    }
    Ok(())
}
