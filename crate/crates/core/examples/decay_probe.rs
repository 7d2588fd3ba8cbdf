//! How much agent 0's Q-value moves when everything outside its κ-hop
//! neighborhood is resampled, on an eight-oscillator ring.
//!
//! `cargo run --release --example decay_probe`

use netspec::checks::{decay_check, random_policy, DecayCheckOptions};
use netspec::env::{KuramotoEnv, KuramotoParams, NetworkEnv};
use netspec::graph::Topology;

fn main() -> netspec::Result<()> {
    let env = KuramotoEnv::sample(Topology::ring(8)?, &KuramotoParams::default(), 0)?;
    let policy = random_policy(&env, 1, 0.1, 0.5, 11)?;
    let opts = DecayCheckOptions {
        agent: 0,
        kappas: (0..=env.topology().diameter()?).collect(),
        pairs: 10,
        rollouts: 20,
        horizon: None,
        seed: 0,
    };
    println!("{:>3} {:>12} {:>10} {:>12}", "κ", "max gap", "SE", "bound");
    for row in decay_check(&env, &policy, &opts)? {
        println!("{:>3} {:>12.4} {:>10.4} {:>12.4}", row.kappa, row.max_gap, row.max_gap_se, row.bound);
    }
    Ok(())
}
