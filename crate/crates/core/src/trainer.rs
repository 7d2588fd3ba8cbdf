//! Round orchestration: stationary sampling, per-agent LSTD, truncated
//! gradients and normalized updates, plus Monte Carlo oracles.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actor::{gradient_estimate, normalized_update, LocalizedGaussianPolicy, Normalization};
use crate::critic::{fit_critic, LocalCritic, Provenance, Ridge, Transition, TransitionDataset};
use crate::env::{step, GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::features::{sample_feature_map, FeatureMapParams, RandomFeatureMap};
use crate::rng::{self, mix, stream};

/// Monte Carlo settings for discounted returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub horizon: usize,
    pub rollouts: usize,
    /// Subtracted from every reward before discounting.
    #[serde(default)]
    pub reward_offset: f64,
}

impl McOptions {
    /// Horizon from [`mc_horizon`] with tolerance `10⁻³`.
    pub fn for_discount(gamma: f64, rollouts: usize) -> Self {
        Self { horizon: mc_horizon(gamma, 1e-3), rollouts, reward_offset: 0.0 }
    }
}

/// Smallest `H ≥ 1` with `γ^H ≤ rel_tol`.
pub fn mc_horizon(gamma: f64, rel_tol: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((rel_tol.ln() / gamma.ln()).ceil() as usize).max(1)
}

/// Per-agent Monte Carlo mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct QEstimate {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Per-agent discounted return of one rollout from `(s, a)`.
///
/// The first action is fixed; later ones come from `policy` with draws keyed by
/// `action_seed`. Environment noise is keyed by `noise_seed`.
pub fn rollout_returns<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    s: &GlobalState,
    a: &GlobalAction,
    horizon: usize,
    noise_seed: u64,
    action_seed: u64,
    reward_offset: f64,
) -> Result<Vec<f64>> {
    let gamma = env.discount();
    let mut totals = vec![0.0; env.n_agents()];
    let mut state = s.clone();
    let mut action = a.clone();
    let mut discount = 1.0;
    for t in 0..horizon {
        let (next, rewards) = step(env, &state, &action, noise_seed)?;
        for (acc, r) in totals.iter_mut().zip(&rewards) {
            *acc += discount * (r - reward_offset);
        }
        discount *= gamma;
        if t + 1 < horizon {
            action = policy.sample_action(&next, action_seed);
        }
        state = next;
    }
    Ok(totals)
}

fn rollout_seeds(seed: u64, r: usize) -> (u64, u64) {
    (mix(&[seed, stream::EPISODE, r as u64]), mix(&[seed, stream::ACTION, r as u64]))
}

/// Per-rollout return vectors used by [`monte_carlo_q`].
pub fn monte_carlo_samples<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    s: &GlobalState,
    a: &GlobalAction,
    opts: &McOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if opts.rollouts == 0 || opts.horizon == 0 {
        return Err(Error::Parameter("Monte Carlo needs rollouts >= 1 and horizon >= 1".into()));
    }
    (0..opts.rollouts)
        .into_par_iter()
        .map(|r| {
            let (noise, act) = rollout_seeds(seed, r);
            rollout_returns(env, policy, s, a, opts.horizon, noise, act, opts.reward_offset)
        })
        .collect()
}

/// Mean and standard error over rows, per column.
pub fn column_stats(rows: &[Vec<f64>]) -> QEstimate {
    let k = rows.len() as f64;
    let n = rows.first().map_or(0, Vec::len);
    // Shifted by the first row so identical rows reproduce their value exactly.
    let origin = rows.first().cloned().unwrap_or_default();
    let mut mean = vec![0.0; n];
    for row in rows {
        for ((m, v), o) in mean.iter_mut().zip(row).zip(&origin) {
            *m += (v - o) / k;
        }
    }
    for (m, o) in mean.iter_mut().zip(&origin) {
        *m += o;
    }
    let se = (0..n)
        .map(|i| {
            if rows.len() < 2 {
                return 0.0;
            }
            let var = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    QEstimate { mean, se }
}

/// `Q_i^π(s, a)` for every agent as an average of discounted returns.
pub fn monte_carlo_q<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    s: &GlobalState,
    a: &GlobalAction,
    opts: &McOptions,
    seed: u64,
) -> Result<QEstimate> {
    Ok(column_stats(&monte_carlo_samples(env, policy, s, a, opts, seed)?))
}

/// Episode layout used to approximate draws from the stationary distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingOptions {
    pub horizon: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl SamplingOptions {
    /// Burn-in of half the horizon, no thinning.
    pub fn with_horizon(horizon: usize) -> Self {
        Self { horizon, burn_in: horizon / 2, thinning: 1 }
    }

    /// Samples one episode contributes.
    pub fn per_episode(&self) -> usize {
        if self.thinning == 0 || self.horizon <= self.burn_in {
            0
        } else {
            (self.horizon - self.burn_in).div_ceil(self.thinning)
        }
    }
}

fn episode<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    opts: &SamplingOptions,
    seed: u64,
    e: usize,
) -> Result<Vec<Transition>> {
    let ep_seed = mix(&[seed, stream::EPISODE, e as u64]);
    let action_seed = mix(&[ep_seed, stream::ACTION]);
    let next_seed = mix(&[ep_seed, stream::NEXT_ACTION]);
    let mut s = env.reset(mix(&[ep_seed, stream::RESET]));
    let mut out = Vec::with_capacity(opts.per_episode());
    for t in 0..opts.horizon {
        let a_raw = policy.sample_raw(&s, action_seed);
        let a = policy.clip(&a_raw);
        let (s_next, _) = step(env, &s, &a, ep_seed)?;
        if t >= opts.burn_in && (t - opts.burn_in) % opts.thinning == 0 {
            let a_next = policy.sample_action(&s_next, next_seed);
            out.push(Transition { s: s.clone(), a, a_raw, s_next: s_next.clone(), a_next });
        }
        s = s_next;
    }
    Ok(out)
}

/// Collect `count` quadruples `(s, a, s', a')` from episodes under `policy`.
///
/// Episodes are independent given `seed`, so they are simulated in parallel
/// and concatenated in episode order; `a'` is a fresh draw at `s'`.
pub fn sample_stationary_batch<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    count: usize,
    opts: &SamplingOptions,
    seed: u64,
) -> Result<TransitionDataset> {
    if count == 0 {
        return Err(Error::Sampling("sample count must be >= 1".into()));
    }
    let per = opts.per_episode();
    if per == 0 {
        return Err(Error::Sampling(format!(
            "episodes of {} steps with burn-in {} and thinning {} yield no samples",
            opts.horizon, opts.burn_in, opts.thinning
        )));
    }
    let episodes = count.div_ceil(per);
    let chunks: Vec<Vec<Transition>> =
        (0..episodes).into_par_iter().map(|e| episode(env, policy, opts, seed, e)).collect::<Result<_>>()?;
    let mut samples: Vec<Transition> = chunks.into_iter().flatten().collect();
    samples.truncate(count);
    Ok(TransitionDataset {
        samples,
        provenance: Provenance {
            seed,
            round: 0,
            horizon: opts.horizon,
            burn_in: opts.burn_in,
            thinning: opts.thinning,
            episodes,
        },
    })
}

/// Settings for [`decay_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    pub pairs: usize,
    pub mc: McOptions,
}

/// Outcome of one [`decay_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayResult {
    pub kappa: usize,
    /// Largest `|Q_i(s,a) - Q_i(s',a')|` over the probed pairs.
    pub max_gap: f64,
    /// Standard error of the pair attaining `max_gap`.
    pub max_gap_se: f64,
    pub mean_gap: f64,
    /// `γ^{κ+1} r̄ / (1 - γ)`.
    pub bound: f64,
    pub reward_bound: f64,
}

/// `γ^{κ+1} r̄ / (1 - γ)`.
pub fn decay_bound(gamma: f64, kappa: usize, reward_bound: f64) -> f64 {
    gamma.powi(kappa as i32 + 1) * reward_bound / (1.0 - gamma)
}

fn uniform_action(n: usize, bounds: (f64, f64), key: &[u64]) -> GlobalAction {
    use rand::Rng;
    let mut r = rng::rng_for(key);
    let (lo, hi) = bounds;
    let values = (0..n).map(|_| if hi > lo { r.random_range(lo..=hi) } else { lo }).collect();
    GlobalAction::new(values, 1).expect("scalar actions")
}

/// Probe the exponential-decay property of `Q_i` at radius κ.
///
/// Each pair shares states and actions on `N_i^κ` and is redrawn outside it.
/// Rewards are shifted to `[0, r̄]`; both members of a pair use the same noise
/// and action draws, so the gap estimate is a paired difference.
pub fn decay_probe<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    agent: usize,
    kappa: usize,
    opts: &DecayOptions,
    seed: u64,
) -> Result<DecayResult> {
    if policy.kappa_pi() > 1 {
        return Err(Error::Parameter("decay probe requires a policy radius of at most 1".into()));
    }
    let (lo, hi) = env
        .reward_range()
        .ok_or_else(|| Error::Unsupported(format!("{} rewards are unbounded", env.name())))?;
    let reward_bound = hi - lo;
    let gamma = env.discount();
    let bound = decay_bound(gamma, kappa, reward_bound);
    let n = env.n_agents();
    let outside = env.topology().khop_complement(agent, kappa)?;
    if outside.is_empty() || opts.pairs == 0 {
        return Ok(DecayResult { kappa, max_gap: 0.0, max_gap_se: 0.0, mean_gap: 0.0, bound, reward_bound });
    }
    let mc = McOptions { reward_offset: lo, ..opts.mc };
    let gaps: Vec<(f64, f64)> = (0..opts.pairs)
        .into_par_iter()
        .map(|p| {
            let key = mix(&[seed, stream::PROBE, p as u64]);
            let s = env.reset(mix(&[key, 0]));
            let a = uniform_action(n, env.action_bounds(), &[key, 1]);
            let other_s = env.reset(mix(&[key, 2]));
            let other_a = uniform_action(n, env.action_bounds(), &[key, 3]);
            let mut s2 = s.clone();
            let mut a2 = a.clone();
            for &j in &outside {
                s2.agent_mut(j).copy_from_slice(other_s.agent(j));
                a2.agent_mut(j).copy_from_slice(other_a.agent(j));
            }
            let mc_seed = mix(&[key, 4]);
            let x = monte_carlo_samples(env, policy, &s, &a, &mc, mc_seed)?;
            let y = monte_carlo_samples(env, policy, &s2, &a2, &mc, mc_seed)?;
            let diffs: Vec<Vec<f64>> = x.iter().zip(&y).map(|(u, v)| vec![u[agent] - v[agent]]).collect();
            let st = column_stats(&diffs);
            Ok((st.mean[0].abs(), st.se[0]))
        })
        .collect::<Result<_>>()?;
    let (max_gap, max_gap_se) = gaps.iter().copied().fold((0.0, 0.0), |acc, g| if g.0 > acc.0 { g } else { acc });
    let mean_gap = gaps.iter().map(|g| g.0).sum::<f64>() / gaps.len() as f64;
    Ok(DecayResult { kappa, max_gap, max_gap_se, mean_gap, bound, reward_bound })
}

/// How the per-round policy evaluation is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub episodes: usize,
    pub horizon: usize,
    /// Evaluate the mean action instead of sampling.
    #[serde(default = "yes")]
    pub deterministic: bool,
}

fn yes() -> bool {
    true
}

/// Return statistics of a policy from the initial-state distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    /// Discounted return summed over agents.
    pub discounted_return: f64,
    pub return_se: f64,
    /// Reward per agent per step.
    pub mean_reward: f64,
}

/// Evaluate `policy` over episodes keyed by `seed` (reused across rounds so
/// successive evaluations share noise).
pub fn evaluate_policy<E: NetworkEnv + ?Sized>(
    env: &E,
    policy: &LocalizedGaussianPolicy,
    opts: &EvalOptions,
    seed: u64,
) -> Result<EvalStats> {
    if opts.episodes == 0 || opts.horizon == 0 {
        return Err(Error::Parameter("evaluation needs episodes >= 1 and horizon >= 1".into()));
    }
    let gamma = env.discount();
    let n = env.n_agents() as f64;
    let per: Vec<(f64, f64)> = (0..opts.episodes)
        .into_par_iter()
        .map(|e| {
            let key = mix(&[seed, stream::EPISODE, e as u64]);
            let action_seed = mix(&[key, stream::ACTION]);
            let mut s = env.reset(mix(&[key, stream::RESET]));
            let (mut ret, mut total, mut discount) = (0.0, 0.0, 1.0);
            for _ in 0..opts.horizon {
                let a = if opts.deterministic { policy.mean_action(&s) } else { policy.sample_action(&s, action_seed) };
                let (next, rewards) = step(env, &s, &a, key)?;
                let sum: f64 = rewards.iter().sum();
                ret += discount * sum;
                total += sum;
                discount *= gamma;
                s = next;
            }
            Ok((ret, total / (n * opts.horizon as f64)))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = per.iter().map(|&(r, m)| vec![r, m]).collect();
    let st = column_stats(&rows);
    Ok(EvalStats { discounted_return: st.mean[0], return_se: st.se[0], mean_reward: st.mean[1] })
}

/// Algorithm settings shared by every seed of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSettings {
    pub kappa: usize,
    pub kappa_pi: usize,
    /// Random features per agent.
    pub m: usize,
    #[serde(default)]
    pub alpha: f64,
    /// Samples per round `M_s`.
    pub samples: usize,
    pub rounds: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_policy_std")]
    pub policy_std: f64,
    /// Ridge `λ = ridge_scale · trace(H) / (m + 1)`.
    #[serde(default = "default_ridge_scale")]
    pub ridge_scale: f64,
    #[serde(default)]
    pub normalization: Normalization,
    /// Kernel bandwidth for the features; the environment noise scale when absent.
    #[serde(default)]
    pub feature_sigma: Option<f64>,
    pub sampling: SamplingOptions,
    pub eval: EvalOptions,
}

fn default_eta() -> f64 {
    0.2
}

fn default_policy_std() -> f64 {
    0.1
}

fn default_ridge_scale() -> f64 {
    1e-6
}

impl TrainerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if self.m == 0 {
            return bad("m", "must be >= 1");
        }
        if self.samples == 0 {
            return bad("samples", "must be >= 1");
        }
        if self.rounds == 0 {
            return bad("rounds", "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [0, 1)");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta", "must be finite and >= 0");
        }
        if !(self.policy_std > 0.0 && self.policy_std.is_finite()) {
            return bad("policy_std", "must be finite and > 0");
        }
        if !(self.ridge_scale >= 0.0) {
            return bad("ridge_scale", "must be >= 0");
        }
        if self.feature_sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("feature_sigma", "must be finite and > 0");
        }
        if self.sampling.per_episode() == 0 {
            return bad("sampling", "horizon must exceed burn_in and thinning must be >= 1");
        }
        if self.eval.episodes == 0 || self.eval.horizon == 0 {
            return bad("eval", "episodes and horizon must be >= 1");
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub seed: u64,
    /// 0 is the initial policy before any update.
    pub round: usize,
    pub discounted_return: f64,
    pub return_se: f64,
    /// `-discounted_return`.
    pub cost: f64,
    pub mean_reward: f64,
    /// Largest `L` over agents.
    pub max_feature_norm: f64,
    /// Largest `D` over agents.
    pub max_inv_norm: f64,
    pub max_condition: f64,
    pub grad_norm: f64,
    pub max_agent_grad_norm: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Algorithm state for one seed.
pub struct Trainer<'a, E: NetworkEnv + ?Sized> {
    env: &'a E,
    settings: TrainerSettings,
    seed: u64,
    maps: Vec<RandomFeatureMap>,
    policy: LocalizedGaussianPolicy,
    critics: Vec<LocalCritic>,
    round: usize,
}

impl<'a, E: NetworkEnv + ?Sized> Trainer<'a, E> {
    /// Generates every agent's feature map once, then starts from `θ = 0`.
    pub fn new(env: &'a E, settings: TrainerSettings, seed: u64) -> Result<Self> {
        settings.validate()?;
        let feature_seed = mix(&[seed, stream::FEATURES]);
        let maps = (0..env.n_agents())
            .map(|i| {
                let map = sample_feature_map(env, i, settings.kappa, settings.m, settings.alpha, feature_seed)?;
                match settings.feature_sigma {
                    Some(sigma) => {
                        let params = FeatureMapParams { sigma, ..map.params().clone() };
                        RandomFeatureMap::from_params(params, map.members().to_vec())
                    }
                    None => Ok(map),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let policy = LocalizedGaussianPolicy::for_env(env, settings.kappa_pi, settings.policy_std)?;
        Ok(Self { env, settings, seed, maps, policy, critics: Vec::new(), round: 0 })
    }

    pub fn policy(&self) -> &LocalizedGaussianPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut LocalizedGaussianPolicy {
        &mut self.policy
    }

    pub fn critics(&self) -> &[LocalCritic] {
        &self.critics
    }

    pub fn maps(&self) -> &[RandomFeatureMap] {
        &self.maps
    }

    pub fn settings(&self) -> &TrainerSettings {
        &self.settings
    }

    pub fn round(&self) -> usize {
        self.round
    }

    fn eval_seed(&self) -> u64 {
        mix(&[self.seed, stream::PROBE])
    }

    /// Evaluation of the current policy.
    pub fn evaluate(&self) -> Result<EvalStats> {
        evaluate_policy(self.env, &self.policy, &self.settings.eval, self.eval_seed())
    }

    fn record(&self, eval: EvalStats, started: Instant) -> RoundRecord {
        let diag = self.critics.iter().map(|c| c.weights.diagnostics);
        let (mut l, mut d, mut cond) = (0.0f64, 0.0f64, 0.0f64);
        for x in diag {
            l = l.max(x.max_feature_norm);
            d = d.max(x.inv_norm);
            cond = cond.max(x.condition);
        }
        RoundRecord {
            seed: self.seed,
            round: self.round,
            discounted_return: eval.discounted_return,
            return_se: eval.return_se,
            cost: -eval.discounted_return,
            mean_reward: eval.mean_reward,
            max_feature_norm: l,
            max_inv_norm: d,
            max_condition: cond,
            grad_norm: 0.0,
            max_agent_grad_norm: 0.0,
            wall_seconds: started.elapsed().as_secs_f64(),
        }
    }

    /// Round-0 record of the initial policy.
    pub fn baseline(&self) -> Result<RoundRecord> {
        let started = Instant::now();
        Ok(self.record(self.evaluate()?, started))
    }

    /// Sample, fit every critic, estimate every gradient, then update every
    /// agent, in that order.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let started = Instant::now();
        let s = &self.settings;
        let batch_seed = mix(&[self.seed, stream::EPISODE, self.round as u64]);
        let mut batch = sample_stationary_batch(self.env, &self.policy, s.samples, &s.sampling, batch_seed)?;
        batch.provenance.round = self.round + 1;
        let gamma = self.env.discount();
        let ridge = Ridge::TraceScaled(s.ridge_scale);
        let env = self.env;
        self.critics = self
            .maps
            .par_iter()
            .map(|map| fit_critic(&batch, map, env, gamma, ridge))
            .collect::<Result<Vec<_>>>()?;
        let grads = gradient_estimate(env, &self.policy, &self.critics, &batch, s.kappa)?;
        let stats = normalized_update(&mut self.policy, &grads, s.eta, s.normalization)?;
        self.round += 1;
        let eval = self.evaluate()?;
        let mut rec = self.record(eval, started);
        rec.grad_norm = stats.global_norm;
        rec.max_agent_grad_norm = stats.norms.iter().copied().fold(0.0, f64::max);
        Ok(rec)
    }

    /// Baseline followed by every configured round.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let mut log = vec![self.baseline()?];
        for _ in 0..self.settings.rounds {
            log.push(self.run_round()?);
        }
        Ok(log)
    }
}

/// Outcome of one seed.
pub struct SeedRun {
    pub seed: u64,
    pub log: Vec<RoundRecord>,
    pub policy: LocalizedGaussianPolicy,
    pub critics: Vec<LocalCritic>,
}

/// Train every seed; seeds run concurrently.
pub fn run_experiment<E: NetworkEnv + ?Sized>(
    env: &E,
    settings: &TrainerSettings,
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut trainer = Trainer::new(env, settings.clone(), seed)?;
            let log = trainer.run()?;
            Ok(SeedRun { seed, log, policy: trainer.policy.clone(), critics: trainer.critics.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::thermal::{ThermalEnv, ThermalParams};
    use crate::graph::Topology;

    fn thermal(n: usize) -> ThermalEnv {
        ThermalEnv::new(Topology::ring(n).unwrap(), &ThermalParams::default()).unwrap()
    }

    fn settings() -> TrainerSettings {
        TrainerSettings {
            kappa: 1,
            kappa_pi: 1,
            m: 16,
            alpha: 0.0,
            samples: 60,
            rounds: 2,
            eta: 0.2,
            policy_std: 0.1,
            ridge_scale: 1e-6,
            normalization: Normalization::PerAgent,
            feature_sigma: None,
            sampling: SamplingOptions::with_horizon(20),
            eval: EvalOptions { episodes: 4, horizon: 20, deterministic: true },
        }
    }

    #[test]
    fn horizon_meets_tolerance() {
        assert_eq!(mc_horizon(0.0, 1e-3), 1);
        let h = mc_horizon(0.75, 1e-3);
        assert!(0.75f64.powi(h as i32) <= 1e-3 && 0.75f64.powi(h as i32 - 1) > 1e-3);
        assert!(0.99f64.powi(mc_horizon(0.99, 1e-3) as i32) <= 1e-3);
    }

    /// Thermal dynamics with a myopic discount.
    struct Myopic(ThermalEnv);

    impl NetworkEnv for Myopic {
        fn name(&self) -> &'static str {
            "myopic"
        }
        fn topology(&self) -> &Topology {
            self.0.topology()
        }
        fn discount(&self) -> f64 {
            0.0
        }
        fn noise_std(&self, i: usize) -> f64 {
            self.0.noise_std(i)
        }
        fn action_bounds(&self) -> (f64, f64) {
            self.0.action_bounds()
        }
        fn mean_block(&self, i: usize, s: &GlobalState, a: &GlobalAction) -> Vec<f64> {
            self.0.mean_block(i, s, a)
        }
        fn reward(&self, i: usize, s: &GlobalState, a: &GlobalAction) -> f64 {
            self.0.reward(i, s, a)
        }
        fn reset(&self, seed: u64) -> GlobalState {
            self.0.reset(seed)
        }
        fn reward_range(&self) -> Option<(f64, f64)> {
            None
        }
    }

    #[test]
    fn gamma_zero_q_is_reward() {
        let env = Myopic(thermal(4));
        let p = LocalizedGaussianPolicy::for_env(&env, 1, 0.3).unwrap();
        let s = GlobalState::new(vec![0.5, -1.0, 2.0, 0.1], 1, 0).unwrap();
        let a = GlobalAction::new(vec![0.2, 0.0, -0.3, 1.0], 1).unwrap();
        let opts = McOptions { horizon: 5, rollouts: 7, reward_offset: 0.0 };
        let q = monte_carlo_q(&env, &p, &s, &a, &opts, 1).unwrap();
        for i in 0..4 {
            assert_eq!(q.mean[i], env.reward(i, &s, &a));
            assert_eq!(q.se[i], 0.0);
        }
    }

    #[test]
    fn consecutive_samples_without_burn_in() {
        let env = thermal(3);
        let p = LocalizedGaussianPolicy::for_env(&env, 0, 0.1).unwrap();
        let opts = SamplingOptions { horizon: 10, burn_in: 0, thinning: 1 };
        let d = sample_stationary_batch(&env, &p, 10, &opts, 5).unwrap();
        assert_eq!(d.len(), 10);
        for w in d.samples.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
        let thin = SamplingOptions { horizon: 10, burn_in: 4, thinning: 2 };
        assert_eq!(thin.per_episode(), 3);
        let d = sample_stationary_batch(&env, &p, 7, &thin, 5).unwrap();
        assert_eq!(d.len(), 7);
        assert_eq!(d.provenance.episodes, 3);
        assert_eq!(d.samples[0].s.t(), 4);
        assert_eq!(d.samples[1].s.t(), 6);
    }

    #[test]
    fn sampling_errors() {
        let env = thermal(3);
        let p = LocalizedGaussianPolicy::for_env(&env, 0, 0.1).unwrap();
        let short = SamplingOptions { horizon: 5, burn_in: 5, thinning: 1 };
        assert!(matches!(sample_stationary_batch(&env, &p, 3, &short, 0), Err(Error::Sampling(_))));
        let zero = SamplingOptions { horizon: 5, burn_in: 0, thinning: 0 };
        assert!(matches!(sample_stationary_batch(&env, &p, 3, &zero, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn zero_eta_round_keeps_policy() {
        let env = thermal(5);
        let mut s = settings();
        s.eta = 0.0;
        s.rounds = 1;
        let mut t = Trainer::new(&env, s, 3).unwrap();
        let before = t.policy().clone();
        t.run_round().unwrap();
        assert_eq!(t.policy(), &before);
        assert_eq!(t.critics().len(), 5);
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let env = thermal(5);
        let strip = |log: Vec<RoundRecord>| {
            log.into_iter().map(|r| RoundRecord { wall_seconds: 0.0, ..r }).collect::<Vec<_>>()
        };
        let a = strip(Trainer::new(&env, settings(), 9).unwrap().run().unwrap());
        let b = strip(Trainer::new(&env, settings(), 9).unwrap().run().unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].round, 0);
    }

    #[test]
    fn invalid_settings_rejected() {
        let env = thermal(4);
        let mut s = settings();
        s.samples = 0;
        assert!(matches!(Trainer::new(&env, s, 0), Err(Error::Config(_))));
    }
}
