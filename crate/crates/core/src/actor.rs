//! Localized linear-Gaussian policies and the truncated policy gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critic::{LocalCritic, TransitionDataset};
use crate::env::{GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::rng::{self, stream};

/// `π_i(a_i | s) = N(θ_iᵀ [s_{N_i^{κπ}}; 1], σ_π²)`, clipped to the action box
/// by the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedGaussianPolicy {
    kappa_pi: usize,
    windows: Vec<Vec<usize>>,
    state_dim: usize,
    theta: Vec<Vec<f64>>,
    std: f64,
    bounds: (f64, f64),
}

impl LocalizedGaussianPolicy {
    /// Zero-initialized policy over scalar actions.
    pub fn new(
        topology: &Topology,
        state_dim: usize,
        kappa_pi: usize,
        std: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::Parameter(format!("policy std must be finite and >= 0, got {std}")));
        }
        let windows = (0..topology.n())
            .map(|i| topology.khop(i, kappa_pi))
            .collect::<Result<Vec<_>>>()?;
        let theta = windows.iter().map(|w| vec![0.0; w.len() * state_dim + 1]).collect();
        Ok(Self { kappa_pi, windows, state_dim, theta, std, bounds })
    }

    /// Zero-initialized policy sized for an environment.
    pub fn for_env<E: NetworkEnv + ?Sized>(env: &E, kappa_pi: usize, std: f64) -> Result<Self> {
        if env.action_dim() != 1 {
            return Err(Error::Unsupported("policies are defined for scalar actions".into()));
        }
        Self::new(env.topology(), env.state_dim(), kappa_pi, std, env.action_bounds())
    }

    pub fn n_agents(&self) -> usize {
        self.theta.len()
    }

    pub fn kappa_pi(&self) -> usize {
        self.kappa_pi
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn with_std(mut self, std: f64) -> Self {
        self.std = std;
        self
    }

    pub fn window(&self, i: usize) -> &[usize] {
        &self.windows[i]
    }

    pub fn params(&self, i: usize) -> &[f64] {
        &self.theta[i]
    }

    pub fn set_params(&mut self, i: usize, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta[i].len() {
            return Err(Error::Dimension { expected: self.theta[i].len(), got: theta.len() });
        }
        self.theta[i].copy_from_slice(theta);
        Ok(())
    }

    /// Policy input `x = [s_{N_i^{κπ}}; 1]`.
    pub fn features(&self, i: usize, s: &GlobalState) -> Vec<f64> {
        let mut x = s.window(&self.windows[i]);
        x.push(1.0);
        x
    }

    pub fn mean(&self, i: usize, s: &GlobalState) -> f64 {
        self.features(i, s).iter().zip(&self.theta[i]).map(|(x, t)| x * t).sum()
    }

    /// Unclipped Gaussian draw; noise of agent `i` is keyed by `(seed, t, i)`.
    pub fn sample_raw(&self, s: &GlobalState, seed: u64) -> GlobalAction {
        let values = (0..self.n_agents())
            .map(|i| {
                let mu = self.mean(i, s);
                if self.std > 0.0 {
                    mu + self.std * rng::gaussian(&[seed, stream::ACTION, s.t(), i as u64])
                } else {
                    mu
                }
            })
            .collect();
        GlobalAction::new(values, 1).expect("scalar actions")
    }

    pub fn clip(&self, raw: &GlobalAction) -> GlobalAction {
        let (lo, hi) = self.bounds;
        let values = raw.values().iter().map(|v| v.clamp(lo, hi)).collect();
        GlobalAction::new(values, 1).expect("scalar actions")
    }

    /// Box-clipped action `clip(θ_iᵀx + σ_π ξ_i)`.
    pub fn sample_action(&self, s: &GlobalState, seed: u64) -> GlobalAction {
        self.clip(&self.sample_raw(s, seed))
    }

    /// Deterministic mean action, clipped.
    pub fn mean_action(&self, s: &GlobalState) -> GlobalAction {
        let values = (0..self.n_agents()).map(|i| self.mean(i, s)).collect();
        self.clip(&GlobalAction::new(values, 1).expect("scalar actions"))
    }

    /// Unclipped Gaussian log-density of `a_i`.
    pub fn log_density(&self, i: usize, s: &GlobalState, a_i: f64) -> Result<f64> {
        if self.std <= 0.0 {
            return Err(Error::Parameter("log-density undefined for a deterministic policy".into()));
        }
        let z = (a_i - self.mean(i, s)) / self.std;
        Ok(-0.5 * z * z - self.std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
    }

    /// `∇_{θ_i} log π_i(a_i | s) = ((a_i - θ_iᵀx) / σ_π²) x`.
    pub fn score(&self, i: usize, s: &GlobalState, a_i: f64) -> Result<Vec<f64>> {
        if self.std <= 0.0 {
            return Err(Error::Parameter("score undefined for a deterministic policy".into()));
        }
        let x = self.features(i, s);
        let coef = (a_i - self.mean(i, s)) / (self.std * self.std);
        Ok(x.into_iter().map(|v| coef * v).collect())
    }
}

/// Which norm [`normalized_update`] divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Each agent's gradient is normalized on its own.
    #[default]
    PerAgent,
    /// The concatenated gradient of all agents is normalized once.
    Global,
}

pub const NORM_FLOOR: f64 = 1e-12;

/// Core estimator on precomputed critic values.
///
/// `q[j][ℓ]` is `Q̂_ℓ` at sample `j`; `neighborhoods[i]` is the sorted set of
/// agents whose critics enter agent `i`'s gradient.
pub fn gradient_from_q(
    policy: &LocalizedGaussianPolicy,
    batch: &TransitionDataset,
    q: &[Vec<f64>],
    neighborhoods: &[Vec<usize>],
) -> Result<Vec<Vec<f64>>> {
    let n = policy.n_agents();
    if batch.is_empty() {
        return Err(Error::Sampling("gradient estimate needs a non-empty batch".into()));
    }
    if q.len() != batch.len() || neighborhoods.len() != n {
        return Err(Error::Dimension { expected: batch.len(), got: q.len() });
    }
    let n_f = n as f64;
    let m_s = batch.len() as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; policy.params(i).len()];
            for (tr, qj) in batch.samples.iter().zip(q) {
                let mut coef = 0.0;
                for &l in &neighborhoods[i] {
                    coef += qj[l] / n_f;
                }
                let score = policy.score(i, &tr.s, tr.a_raw.agent(i)[0])?;
                for (gk, sk) in g.iter_mut().zip(&score) {
                    *gk += coef * sk;
                }
            }
            for gk in g.iter_mut() {
                *gk /= m_s;
            }
            Ok(g)
        })
        .collect()
}

/// `Q̂_ℓ(s_j, a_j)` for every sample and every agent with a critic.
pub fn critic_values<E: NetworkEnv + ?Sized>(
    env: &E,
    critics: &[LocalCritic],
    batch: &TransitionDataset,
) -> Result<Vec<Vec<f64>>> {
    let n = env.n_agents();
    batch
        .samples
        .par_iter()
        .map(|tr| {
            let mut row = vec![f64::NAN; n];
            for c in critics {
                row[c.agent()] = c.q(env, &tr.s, &tr.a)?;
            }
            Ok(row)
        })
        .collect()
}

/// Truncated policy gradient: agent `i` sums `Q̂_ℓ / n` over
/// `ℓ ∈ N_i^{κ+κπ}` times its own score, averaged over the batch.
pub fn gradient_estimate<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    critics: &[LocalCritic],
    batch: &TransitionDataset,
    kappa: usize,
) -> Result<Vec<Vec<f64>>> {
    let neighborhoods = truncated_neighborhoods(env.topology(), kappa + policy.kappa_pi())?;
    let mut have = vec![false; env.n_agents()];
    for c in critics {
        if c.agent() >= have.len() {
            return Err(Error::Index { index: c.agent(), n: have.len() });
        }
        have[c.agent()] = true;
    }
    for (i, nbhd) in neighborhoods.iter().enumerate() {
        if let Some(&l) = nbhd.iter().find(|&&l| !have[l]) {
            return Err(Error::Config(format!("agent {i} needs a critic for agent {l}")));
        }
    }
    let q = critic_values(env, critics, batch)?;
    gradient_from_q(policy, batch, &q, &neighborhoods)
}

/// `N_i^{radius}` for every agent.
pub fn truncated_neighborhoods(topology: &Topology, radius: usize) -> Result<Vec<Vec<usize>>> {
    (0..topology.n()).map(|i| topology.khop(i, radius)).collect()
}

/// Per-agent and overall gradient norms from one update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub norms: Vec<f64>,
    pub global_norm: f64,
}

/// Normalized ascent `θ_i ← θ_i + η ĝ_i / max(||ĝ||, ε)`.
pub fn normalized_update(
    policy: &mut LocalizedGaussianPolicy,
    grads: &[Vec<f64>],
    eta: f64,
    mode: Normalization,
) -> Result<UpdateStats> {
    if grads.len() != policy.n_agents() {
        return Err(Error::Dimension { expected: policy.n_agents(), got: grads.len() });
    }
    if grads.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("policy gradient; round aborted".into()));
    }
    let norms: Vec<f64> = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let global_norm = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (i, g) in grads.iter().enumerate() {
        if g.len() != policy.theta[i].len() {
            return Err(Error::Dimension { expected: policy.theta[i].len(), got: g.len() });
        }
        let denom = match mode {
            Normalization::PerAgent => norms[i],
            Normalization::Global => global_norm,
        }
        .max(NORM_FLOOR);
        for (t, gk) in policy.theta[i].iter_mut().zip(g) {
            *t += eta * gk / denom;
        }
    }
    Ok(UpdateStats { norms, global_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::Transition;
    use proptest::prelude::*;

    fn ring_policy(n: usize, kappa_pi: usize, std: f64) -> LocalizedGaussianPolicy {
        LocalizedGaussianPolicy::new(&Topology::ring(n).unwrap(), 1, kappa_pi, std, (-1.0, 1.0)).unwrap()
    }

    fn state(values: Vec<f64>) -> GlobalState {
        GlobalState::new(values, 1, 0).unwrap()
    }

    #[test]
    fn zero_policy_acts_zero() {
        let p = ring_policy(5, 1, 0.0);
        let a = p.sample_action(&state(vec![0.3; 5]), 7);
        assert_eq!(a.values(), &[0.0; 5]);
    }

    #[test]
    fn actions_are_clipped_and_reproducible() {
        let mut p = ring_policy(4, 0, 0.5);
        for i in 0..4 {
            p.set_params(i, &[10.0, 0.0]).unwrap();
        }
        let s = state(vec![1.0, -1.0, 0.0, 0.01]);
        let a = p.sample_action(&s, 3);
        assert_eq!(a, p.sample_action(&s, 3));
        assert_eq!(a.agent(0)[0], 1.0);
        assert_eq!(a.agent(1)[0], -1.0);
        assert!(p.sample_raw(&s, 3).agent(0)[0] > 1.0);
    }

    #[test]
    fn locality_of_kappa_zero() {
        let mut p = ring_policy(6, 0, 0.2);
        for i in 0..6 {
            p.set_params(i, &[0.7, 0.1]).unwrap();
        }
        let s = state(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let mut t = s.clone();
        t.values_mut()[3] = -2.0;
        let (a, b) = (p.sample_action(&s, 9), p.sample_action(&t, 9));
        for i in 0..6 {
            if i == 3 {
                assert_ne!(a.agent(i), b.agent(i));
            } else {
                assert_eq!(a.agent(i), b.agent(i));
            }
        }
    }

    #[test]
    fn score_vanishes_at_mode() {
        let mut p = ring_policy(5, 1, 0.3);
        p.set_params(2, &[0.5, -0.2, 0.1, 0.05]).unwrap();
        let s = state(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let mode = p.mean(2, &s);
        assert!(p.score(2, &s, mode).unwrap().iter().all(|v| *v == 0.0));
        let det = ring_policy(5, 1, 0.0);
        assert!(det.score(0, &s, 0.0).is_err());
    }

    #[test]
    fn score_has_zero_mean() {
        let mut p = ring_policy(5, 1, 0.4);
        p.set_params(1, &[0.3, -0.6, 0.2, 0.1]).unwrap();
        let s = state(vec![0.5, -1.0, 0.25, 0.0, 2.0]);
        let samples = 10_000;
        let scores: Vec<Vec<f64>> = (0..samples)
            .map(|k| {
                let a = p.sample_raw(&s, k);
                p.score(1, &s, a.agent(1)[0]).unwrap()
            })
            .collect();
        for c in 0..4 {
            let vals: Vec<f64> = scores.iter().map(|v| v[c]).collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let se = (var / samples as f64).sqrt();
            assert!(mean.abs() <= 3.0 * se, "component {c}: mean {mean}, se {se}");
        }
    }

    fn batch_of(states: Vec<GlobalState>, raws: Vec<GlobalAction>) -> TransitionDataset {
        TransitionDataset {
            samples: states
                .into_iter()
                .zip(raws)
                .map(|(s, a)| Transition {
                    s: s.clone(),
                    a: a.clone(),
                    a_raw: a.clone(),
                    s_next: s,
                    a_next: a,
                })
                .collect(),
            provenance: Default::default(),
        }
    }

    #[test]
    fn zero_critic_values_give_zero_gradient() {
        let p = ring_policy(5, 1, 0.2);
        let batch = batch_of(vec![state(vec![0.1; 5])], vec![p.sample_raw(&state(vec![0.1; 5]), 0)]);
        let nbhd = truncated_neighborhoods(&Topology::ring(5).unwrap(), 2).unwrap();
        let g = gradient_from_q(&p, &batch, &[vec![0.0; 5]], &nbhd).unwrap();
        assert!(g.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn single_agent_single_sample() {
        // One agent (n = 1): ĝ = Q̂ · score exactly.
        let t = Topology::new(1, &[]).unwrap();
        let mut p = LocalizedGaussianPolicy::new(&t, 1, 0, 0.5, (-5.0, 5.0)).unwrap();
        p.set_params(0, &[0.4, 0.2]).unwrap();
        let s = GlobalState::new(vec![1.5], 1, 0).unwrap();
        let a = GlobalAction::new(vec![0.3], 1).unwrap();
        let batch = batch_of(vec![s.clone()], vec![a]);
        let g = gradient_from_q(&p, &batch, &[vec![-2.5]], &[vec![0]]).unwrap();
        let score = p.score(0, &s, 0.3).unwrap();
        assert_eq!(g[0], score.iter().map(|v| -2.5 * v).collect::<Vec<_>>());
    }

    #[test]
    fn update_moves_by_eta() {
        let mut p = ring_policy(4, 1, 0.1);
        let grads = vec![vec![3.0, 4.0, 0.0, 0.0], vec![0.0; 4], vec![1e-3, 0.0, 0.0, 0.0], vec![-1.0; 4]];
        let before = p.clone();
        normalized_update(&mut p, &grads, 0.2, Normalization::PerAgent).unwrap();
        for i in 0..4 {
            let step: f64 = p.params(i).iter().zip(before.params(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if i == 1 {
                assert_eq!(step, 0.0);
            } else {
                assert!((step - 0.2).abs() < 1e-12);
            }
        }
        let mut q = before.clone();
        let stats = normalized_update(&mut q, &grads, 0.2, Normalization::Global).unwrap();
        let total: f64 = (0..4)
            .flat_map(|i| q.params(i).iter().zip(before.params(i)).map(|(a, b)| (a - b).powi(2)).collect::<Vec<_>>())
            .sum::<f64>()
            .sqrt();
        assert!((total - 0.2).abs() < 1e-12);
        assert!((stats.global_norm - (25.0f64 + 1e-6 + 4.0).sqrt()).abs() < 1e-12);
        let bad = vec![vec![f64::NAN, 0.0, 0.0, 0.0], vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]];
        assert!(matches!(normalized_update(&mut q, &bad, 0.2, Normalization::PerAgent), Err(Error::Numeric(_))));
    }

    proptest! {
        #[test]
        fn score_matches_finite_difference(
            theta in proptest::collection::vec(-1.0f64..1.0, 4),
            s in proptest::collection::vec(-2.0f64..2.0, 5),
            a in -2.0f64..2.0,
            std in 0.2f64..1.5,
        ) {
            let mut p = ring_policy(5, 1, std);
            p.set_params(0, &theta).unwrap();
            let st = state(s);
            let score = p.score(0, &st, a).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                let mut up = theta.clone();
                up[k] += h;
                let mut dn = theta.clone();
                dn[k] -= h;
                let mut pu = p.clone();
                pu.set_params(0, &up).unwrap();
                let mut pd = p.clone();
                pd.set_params(0, &dn).unwrap();
                let fd = (pu.log_density(0, &st, a).unwrap() - pd.log_density(0, &st, a).unwrap()) / (2.0 * h);
                prop_assert!((fd - score[k]).abs() <= 1e-5 * (1.0 + score[k].abs()), "k={} fd={} score={}", k, fd, score[k]);
            }
        }

        #[test]
        fn update_norm_bounded(g in proptest::collection::vec(-1e3f64..1e3, 8), eta in 0.0f64..1.0) {
            let mut p = ring_policy(4, 0, 0.1);
            let before = p.clone();
            let grads: Vec<Vec<f64>> = g.chunks(2).map(|c| c.to_vec()).collect();
            normalized_update(&mut p, &grads, eta, Normalization::PerAgent).unwrap();
            for i in 0..4 {
                let step: f64 = p.params(i).iter().zip(before.params(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(step <= eta + 1e-12);
            }
        }
    }
}
