//! Diagnostic sweeps: kernel convergence in `m` and exponential decay in κ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actor::LocalizedGaussianPolicy;
use crate::env::NetworkEnv;
use crate::error::{Error, Result};
use crate::features::RandomFeatureMap;
use crate::rng::{self, mix, stream};
use crate::trainer::{decay_probe, mc_horizon, DecayOptions, DecayResult, McOptions};

/// Settings of a kernel-convergence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckOptions {
    pub sigma: f64,
    pub alpha: f64,
    pub ms: Vec<usize>,
    /// Evenly spaced points per axis.
    pub grid_points: usize,
    /// Grid covers `[-radius, radius]^dim`.
    pub grid_radius: f64,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// Slope is fitted over `m` in this closed range.
    pub fit_range: (usize, usize),
}

impl Default for KernelCheckOptions {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            alpha: 0.0,
            ms: (0..=12).map(|k| 1 << k).collect(),
            grid_points: 25,
            grid_radius: 3.0,
            dim: 1,
            trials: 20,
            seed: 0,
            fit_range: (64, 4096),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRow {
    pub m: usize,
    pub median_gap: f64,
    pub p95_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub rows: Vec<KernelRow>,
    /// Least-squares slope of `log(median_gap)` against `log(m)`.
    pub slope: f64,
}

/// Regular grid over `[-r, r]^dim`.
pub fn grid(dim: usize, points: usize, radius: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..points)
        .map(|k| if points == 1 { 0.0 } else { -radius + 2.0 * radius * k as f64 / (points - 1) as f64 })
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|p| axis.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
    }
    out
}

/// Empirical quantile by linear interpolation.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Sup-grid kernel gap for fresh feature draws at every `m`.
pub fn kernel_check(opts: &KernelCheckOptions) -> Result<KernelCheck> {
    if opts.alpha != 0.0 {
        return Err(Error::Unsupported("kernel check is defined for alpha = 0".into()));
    }
    if opts.trials == 0 || opts.ms.is_empty() || opts.grid_points == 0 || opts.dim == 0 {
        return Err(Error::Parameter("kernel check needs trials, m values and a non-empty grid".into()));
    }
    let points = grid(opts.dim, opts.grid_points, opts.grid_radius);
    let rows = opts
        .ms
        .iter()
        .map(|&m| {
            let gaps = (0..opts.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = mix(&[opts.seed, stream::FEATURES, m as u64, t as u64]);
                    RandomFeatureMap::standalone(opts.dim, m, 0.0, opts.sigma, seed)?.kernel_gap_on_points(&points)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(KernelRow { m, median_gap: quantile(&gaps, 0.5), p95_gap: quantile(&gaps, 0.95) })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = opts.fit_range;
    let fit: Vec<&KernelRow> = rows.iter().filter(|r| r.m >= lo && r.m <= hi).collect();
    if fit.len() < 2 {
        return Err(Error::Parameter("slope fit needs at least two m values in range".into()));
    }
    let x: Vec<f64> = fit.iter().map(|r| (r.m as f64).ln()).collect();
    let y: Vec<f64> = fit.iter().map(|r| r.median_gap.ln()).collect();
    Ok(KernelCheck { slope: ols_slope(&x, &y), rows })
}

/// Localized policy with `θ_i ~ N(0, scale²)` entrywise.
pub fn random_policy<E: NetworkEnv + ?Sized>(
    env: &E,
    kappa_pi: usize,
    std: f64,
    scale: f64,
    seed: u64,
) -> Result<LocalizedGaussianPolicy> {
    let mut policy = LocalizedGaussianPolicy::for_env(env, kappa_pi, std)?;
    for i in 0..env.n_agents() {
        let mut theta = vec![0.0; policy.params(i).len()];
        rng::gaussians(&[seed, stream::PROBE, i as u64], &mut theta);
        theta.iter_mut().for_each(|v| *v *= scale);
        policy.set_params(i, &theta)?;
    }
    Ok(policy)
}

/// Settings of a decay sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheckOptions {
    pub agent: usize,
    pub kappas: Vec<usize>,
    pub pairs: usize,
    pub rollouts: usize,
    pub horizon: Option<usize>,
    pub seed: u64,
}

/// [`decay_probe`] at every κ for a fixed policy.
pub fn decay_check<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    opts: &DecayCheckOptions,
) -> Result<Vec<DecayResult>> {
    let horizon = opts.horizon.unwrap_or_else(|| mc_horizon(env.discount(), 1e-3));
    let probe = DecayOptions {
        pairs: opts.pairs,
        mc: McOptions { horizon, rollouts: opts.rollouts, reward_offset: 0.0 },
    };
    opts.kappas
        .iter()
        .map(|&k| decay_probe(env, policy, opts.agent, k, &probe, mix(&[opts.seed, k as u64])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = grid(2, 3, 1.0);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(grid(1, 1, 2.0), vec![vec![0.0]]);
    }

    #[test]
    fn quantile_and_slope() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.95), 9.5);
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_check_reproducible_with_degenerate_row() {
        let opts = KernelCheckOptions { ms: vec![1, 64, 256], trials: 4, fit_range: (64, 256), ..Default::default() };
        let a = kernel_check(&opts).unwrap();
        assert_eq!(a, kernel_check(&opts).unwrap());
        assert_eq!(a.rows[0].m, 1);
        assert!(a.rows[0].median_gap > a.rows[2].median_gap);
        assert!(kernel_check(&KernelCheckOptions { alpha: 0.2, ..opts }).is_err());
    }
}
