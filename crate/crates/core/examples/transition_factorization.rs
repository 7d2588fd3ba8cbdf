//! L1 error of the factorized Gaussian transition density `φ̂(f)ᵀμ̂(y)` for a
//! one-dimensional window, against the feature count.
//!
//! `cargo run --release --example transition_factorization`

use netspec::features::RandomFeatureMap;

fn l1_error(map: &RandomFeatureMap, f: f64) -> netspec::Result<f64> {
    let intervals = 2400;
    let h = 12.0 / intervals as f64;
    let phi = map.phi_from_mean(&[f])?;
    let mut total = 0.0;
    for j in 0..=intervals {
        let y = f - 6.0 + j as f64 * h;
        let mu = map.eval_mu_hat(&[y])?;
        let approx: f64 = phi.iter().zip(&mu).map(|(a, b)| a * b).sum();
        let exact = (-(y - f) * (y - f) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let w = if j == 0 || j == intervals { 0.5 } else { 1.0 };
        total += w * h * (exact - approx).abs();
    }
    Ok(total)
}

fn main() -> netspec::Result<()> {
    println!("{:>6} {:>10}", "m", "L1 error");
    for m in [64, 256, 1024, 4096, 16384] {
        let map = RandomFeatureMap::standalone(1, m, 0.0, 1.0, 1)?;
        let err = (0..5).map(|k| l1_error(&map, k as f64 - 2.0)).sum::<netspec::Result<f64>>()? / 5.0;
        println!("{m:>6} {err:>10.4}");
    }
    Ok(())
}
