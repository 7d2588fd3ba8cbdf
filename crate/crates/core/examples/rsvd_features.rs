//! Learn linear features of a thermal window with the randomized functional
//! SVD objective, using random Fourier features of the window mean as basis.
//!
//! `cargo run --release --example rsvd_features`

use netspec::checks::random_policy;
use netspec::env::{local_mean, NetworkEnv, ThermalEnv, ThermalParams};
use netspec::features::{rsvd_linear_fit, rsvd_objective, sample_feature_map, ProbeFunctions, RsvdOptions};
use netspec::graph::Topology;
use netspec::trainer::{sample_stationary_batch, SamplingOptions};

fn main() -> netspec::Result<()> {
    let env = ThermalEnv::new(Topology::ring(10)?, &ThermalParams::default())?;
    let policy = random_policy(&env, 1, 0.5, 0.1, 0)?;
    let batch = sample_stationary_batch(&env, &policy, 2000, &SamplingOptions::with_horizon(20), 1)?;
    let (agent, kappa) = (0, 1);
    // Basis over the (κ+1)-hop inputs, probes over the κ-hop next window.
    let basis = sample_feature_map(&env, agent, kappa, 40, 0.0, 2)?;
    let window = env.topology().khop(agent, kappa)?;
    let probes = ProbeFunctions::sample(window.len(), 8, 3);
    let mut psi = Vec::new();
    let mut omega = Vec::new();
    for tr in &batch.samples {
        psi.push(basis.phi_from_mean(&local_mean(&env, &tr.s, &tr.a, agent, kappa)?)?);
        omega.push(probes.eval(&tr.s_next.window(&window))?);
    }
    let fit = rsvd_linear_fit(&psi, &omega, RsvdOptions::default())?;
    let zero = nalgebra::DMatrix::zeros(fit.weights.nrows(), fit.weights.ncols());
    println!(
        "objective {:.4} (zero weights {:.4}) after {} iterations, gradient norm {:.2e}",
        fit.objective,
        rsvd_objective(&zero, &psi, &omega, 1e-6)?,
        fit.iterations,
        fit.gradient_norm
    );
    Ok(())
}
