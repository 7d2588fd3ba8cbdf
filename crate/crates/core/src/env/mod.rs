//! Factorized network MDPs.
//!
//! Every environment has the form `s_i' = f_i(s_{N_i}, a_{N_i}) + ε_i` with
//! independent Gaussian `ε_i`, plus a local reward `r_i` evaluated at the
//! pre-transition state and action.

pub mod kuramoto;
pub mod thermal;

use std::io::Write;

pub use kuramoto::{KuramotoEnv, KuramotoParams, KuramotoPreset};
pub use thermal::{ThermalEnv, ThermalParams};

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::rng::{self, stream};

/// Per-agent state blocks of fixed dimension plus a time index.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    values: Vec<f64>,
    block: usize,
    t: u64,
}

impl GlobalState {
    pub fn new(values: Vec<f64>, block: usize, t: u64) -> Result<Self> {
        if block == 0 || values.len() % block != 0 {
            return Err(Error::Dimension { expected: block.max(1), got: values.len() });
        }
        Ok(Self { values, block, t })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn block_dim(&self) -> usize {
        self.block
    }

    pub fn n_agents(&self) -> usize {
        self.values.len() / self.block
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.values[i * self.block..(i + 1) * self.block]
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.block..(i + 1) * self.block]
    }

    /// Concatenate the blocks of `members` in the given order.
    pub fn window(&self, members: &[usize]) -> Vec<f64> {
        members.iter().flat_map(|&j| self.agent(j).iter().copied()).collect()
    }
}

/// Per-agent action blocks of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalAction {
    values: Vec<f64>,
    block: usize,
}

impl GlobalAction {
    pub fn new(values: Vec<f64>, block: usize) -> Result<Self> {
        if block == 0 || values.len() % block != 0 {
            return Err(Error::Dimension { expected: block.max(1), got: values.len() });
        }
        Ok(Self { values, block })
    }

    pub fn zeros(n: usize, block: usize) -> Self {
        Self { values: vec![0.0; n * block], block }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block_dim(&self) -> usize {
        self.block
    }

    pub fn n_agents(&self) -> usize {
        self.values.len() / self.block
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.values[i * self.block..(i + 1) * self.block]
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.block..(i + 1) * self.block]
    }

    pub fn window(&self, members: &[usize]) -> Vec<f64> {
        members.iter().flat_map(|&j| self.agent(j).iter().copied()).collect()
    }
}

/// The κ-hop window of one agent and the slicing it induces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalWindow {
    pub agent: usize,
    pub radius: usize,
    pub members: Vec<usize>,
}

impl LocalWindow {
    pub fn new(topology: &Topology, agent: usize, radius: usize) -> Result<Self> {
        Ok(Self { agent, radius, members: topology.khop(agent, radius)? })
    }

    pub fn states(&self, s: &GlobalState) -> Vec<f64> {
        s.window(&self.members)
    }

    pub fn actions(&self, a: &GlobalAction) -> Vec<f64> {
        a.window(&self.members)
    }

    pub fn state_dim(&self, block: usize) -> usize {
        self.members.len() * block
    }
}

/// A network MDP with factorized Gaussian transitions.
pub trait NetworkEnv: Send + Sync {
    fn name(&self) -> &'static str;

    fn topology(&self) -> &Topology;

    fn n_agents(&self) -> usize {
        self.topology().n()
    }

    /// Per-agent state block dimension `S`.
    fn state_dim(&self) -> usize {
        1
    }

    /// Per-agent action block dimension `A`.
    fn action_dim(&self) -> usize {
        1
    }

    fn discount(&self) -> f64;

    /// Standard deviation of the additive noise on every coordinate of agent `i`.
    fn noise_std(&self, agent: usize) -> f64;

    /// Closed box applied to every action coordinate.
    fn action_bounds(&self) -> (f64, f64);

    /// Mean next state `f_i(s_{N_i}, a_{N_i})` of one agent, before wrapping.
    fn mean_block(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> Vec<f64>;

    /// Local reward `r_i` at the pre-transition state and action.
    fn reward(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> f64;

    /// Map a raw next-state block back into the state space (phase wrapping).
    fn wrap_block(&self, _block: &mut [f64]) {}

    /// Draw an initial state; `seed` addresses the draw.
    fn reset(&self, seed: u64) -> GlobalState;

    /// Bounds `[lo, hi]` holding every per-agent reward, when they exist.
    fn reward_range(&self) -> Option<(f64, f64)>;

    fn clip_action(&self, a: &mut GlobalAction) {
        let (lo, hi) = self.action_bounds();
        for v in a.values.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
}

fn check_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{label} contains a non-finite entry")))
    }
}

fn check_shape<E: NetworkEnv + ?Sized>(env: &E, s: &GlobalState, a: &GlobalAction) -> Result<()> {
    let n = env.n_agents();
    if s.block_dim() != env.state_dim() || s.n_agents() != n {
        return Err(Error::Dimension { expected: n * env.state_dim(), got: s.values().len() });
    }
    if a.block_dim() != env.action_dim() || a.n_agents() != n {
        return Err(Error::Dimension { expected: n * env.action_dim(), got: a.values().len() });
    }
    Ok(())
}

/// Advance one step: `s_i' = f_i + σ_i ε_i`, with `ε_i` keyed by
/// `(noise_seed, t, i)` so the result does not depend on agent order.
///
/// Returns the next state and the per-agent rewards at `(s, a)`.
pub fn step<E: NetworkEnv + ?Sized>(
    env: &E,
    s: &GlobalState,
    a: &GlobalAction,
    noise_seed: u64,
) -> Result<(GlobalState, Vec<f64>)> {
    check_shape(env, s, a)?;
    check_finite("state", s.values())?;
    check_finite("action", a.values())?;
    let n = env.n_agents();
    let dim = env.state_dim();
    let mut next = Vec::with_capacity(n * dim);
    let mut noise = vec![0.0; dim];
    for i in 0..n {
        let mut block = env.mean_block(i, s, a);
        let sigma = env.noise_std(i);
        if sigma > 0.0 {
            rng::gaussians(&[noise_seed, stream::ENV_NOISE, s.t(), i as u64], &mut noise);
            for (x, e) in block.iter_mut().zip(&noise) {
                *x += sigma * e;
            }
        }
        env.wrap_block(&mut block);
        next.extend(block);
    }
    check_finite("next state", &next)?;
    let rewards = (0..n).map(|i| env.reward(i, s, a)).collect();
    Ok((GlobalState { values: next, block: dim, t: s.t() + 1 }, rewards))
}

/// Concatenated mean dynamics `f_{i,κ}` over the sorted κ-hop window of `i`.
pub fn local_mean<E: NetworkEnv + ?Sized>(
    env: &E,
    s: &GlobalState,
    a: &GlobalAction,
    agent: usize,
    kappa: usize,
) -> Result<Vec<f64>> {
    let members = env.topology().khop(agent, kappa)?;
    Ok(local_mean_over(env, s, a, &members))
}

/// [`local_mean`] with the member list already resolved.
pub fn local_mean_over<E: NetworkEnv + ?Sized>(
    env: &E,
    s: &GlobalState,
    a: &GlobalAction,
    members: &[usize],
) -> Vec<f64> {
    members.iter().flat_map(|&j| env.mean_block(j, s, a)).collect()
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: GlobalState,
    pub action: GlobalAction,
    pub rewards: Vec<f64>,
}

/// Write a trajectory as CSV with columns `t, agent, state..., action..., reward`.
pub fn write_trajectory_csv<W: Write>(out: W, steps: &[TrajectoryStep]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# schema=v1")?;
    let (sdim, adim) = steps
        .first()
        .map(|s| (s.state.block_dim(), s.action.block_dim()))
        .unwrap_or((1, 1));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((0..sdim).map(|k| format!("state_{k}")));
    header.extend((0..adim).map(|k| format!("action_{k}")));
    header.push("reward".into());
    w.write_record(&header)?;
    for step in steps {
        for i in 0..step.state.n_agents() {
            let mut row = vec![step.state.t().to_string(), i.to_string()];
            row.extend(step.state.agent(i).iter().map(f64::to_string));
            row.extend(step.action.agent(i).iter().map(f64::to_string));
            row.push(step.rewards[i].to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
