//! Kuramoto oscillator synchronization.
//!
//! Each agent is a phase oscillator
//! `θ_i' = θ_i + dt (ω_i + a_i + Σ_{j∈N_i} K_ij sin(θ_j - θ_i)) + ε_i`
//! rewarded by `-|θ̇_i - ω_target|`. Phases are wrapped to `[-π, π]` after
//! every step; the coupling only sees phase differences through `sin`, so
//! wrapping never introduces a discontinuity in the force.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::rng::{self, stream};

/// The two reference parameter sets. `Final` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KuramotoPreset {
    /// ω_target = 0.2, box [-1, 1], ω_i ~ U[-0.5, 0.5], noise 0.0025, n = 40.
    #[default]
    Final,
    /// ω_target = 0.75, box [-3, 3], ω_i ~ U[0, 1.5], noise 0.01, n = 20.
    Draft,
}

/// Sampling recipe for a Kuramoto network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuramotoParams {
    pub target: f64,
    pub action_limit: f64,
    pub natural_freq_range: (f64, f64),
    pub coupling_range: (f64, f64),
    pub noise_std: f64,
    pub dt: f64,
    pub gamma: f64,
}

impl KuramotoParams {
    pub fn preset(preset: KuramotoPreset) -> Self {
        match preset {
            KuramotoPreset::Final => Self {
                target: 0.2,
                action_limit: 1.0,
                natural_freq_range: (-0.5, 0.5),
                coupling_range: (0.2, 1.2),
                noise_std: 0.0025,
                dt: 0.01,
                gamma: 0.99,
            },
            KuramotoPreset::Draft => Self {
                target: 0.75,
                action_limit: 3.0,
                natural_freq_range: (0.0, 1.5),
                coupling_range: (0.2, 1.2),
                noise_std: 0.01,
                dt: 0.01,
                gamma: 0.99,
            },
        }
    }

    /// Agent count used with the preset in the reference experiments.
    pub fn preset_agents(preset: KuramotoPreset) -> usize {
        match preset {
            KuramotoPreset::Final => 40,
            KuramotoPreset::Draft => 20,
        }
    }
}

impl Default for KuramotoParams {
    fn default() -> Self {
        Self::preset(KuramotoPreset::Final)
    }
}

#[derive(Debug, Clone)]
pub struct KuramotoEnv {
    topology: Topology,
    natural_freq: Vec<f64>,
    /// `coupling[i][k]` is K_ij for `j = topology.neighbors(i)[k]`.
    coupling: Vec<Vec<f64>>,
    dt: f64,
    target: f64,
    noise_std: f64,
    action_limit: f64,
    gamma: f64,
}

/// Wrap an angle into `[-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    wrapped.clamp(-PI, PI)
}

impl KuramotoEnv {
    /// Draw natural frequencies and symmetric couplings from `params`.
    pub fn sample(topology: Topology, params: &KuramotoParams, seed: u64) -> Result<Self> {
        let n = topology.n();
        let mut rng = rng::rng_for(&[seed, stream::ENV_PARAMS]);
        let (wlo, whi) = params.natural_freq_range;
        let (klo, khi) = params.coupling_range;
        if !(wlo <= whi && klo <= khi) {
            return Err(Error::Parameter("empty sampling range".into()));
        }
        let natural_freq: Vec<f64> = (0..n).map(|_| wlo + (whi - wlo) * rng.random::<f64>()).collect();
        let mut edge_k = std::collections::BTreeMap::new();
        for (u, v) in topology.edges() {
            edge_k.insert((u, v), klo + (khi - klo) * rng.random::<f64>());
        }
        let coupling = (0..n)
            .map(|i| {
                topology
                    .neighbors(i)
                    .iter()
                    .map(|&j| edge_k[&(i.min(j), i.max(j))])
                    .collect()
            })
            .collect();
        Self::new(topology, natural_freq, coupling, params)
    }

    /// Explicit frequencies and couplings (`coupling[i]` aligned with `neighbors(i)`).
    pub fn new(
        topology: Topology,
        natural_freq: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        params: &KuramotoParams,
    ) -> Result<Self> {
        let n = topology.n();
        if natural_freq.len() != n || coupling.len() != n {
            return Err(Error::Dimension { expected: n, got: natural_freq.len().min(coupling.len()) });
        }
        for i in 0..n {
            if coupling[i].len() != topology.degree(i) {
                return Err(Error::Dimension { expected: topology.degree(i), got: coupling[i].len() });
            }
        }
        if params.dt <= 0.0 || params.noise_std < 0.0 || params.action_limit <= 0.0 {
            return Err(Error::Parameter("dt and action limit must be positive, noise non-negative".into()));
        }
        if !(params.gamma > 0.0 && params.gamma < 1.0) {
            return Err(Error::Parameter(format!("discount must lie in (0, 1), got {}", params.gamma)));
        }
        Ok(Self {
            topology,
            natural_freq,
            coupling,
            dt: params.dt,
            target: params.target,
            noise_std: params.noise_std,
            action_limit: params.action_limit,
            gamma: params.gamma,
        })
    }

    pub fn natural_freq(&self) -> &[f64] {
        &self.natural_freq
    }

    pub fn coupling(&self, i: usize) -> &[f64] {
        &self.coupling[i]
    }

    pub fn set_coupling_scale(&mut self, scale: f64) {
        for row in &mut self.coupling {
            for k in row.iter_mut() {
                *k *= scale;
            }
        }
    }

    pub fn set_noise_std(&mut self, sigma: f64) {
        self.noise_std = sigma;
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Instantaneous frequency `θ̇_i`.
    pub fn frequency(&self, i: usize, theta: &[f64], a: &[f64]) -> f64 {
        let coupling: f64 = self
            .topology
            .neighbors(i)
            .iter()
            .zip(&self.coupling[i])
            .map(|(&j, k)| k * (theta[j] - theta[i]).sin())
            .sum();
        self.natural_freq[i] + a[i] + coupling
    }

    /// Noise-free step: wrapped next phases and the per-agent frequencies.
    pub fn step_mean(&self, theta: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.topology.n();
        if theta.len() != n || a.len() != n {
            return Err(Error::Dimension { expected: n, got: theta.len().min(a.len()) });
        }
        let rates: Vec<f64> = (0..n).map(|i| self.frequency(i, theta, a)).collect();
        let next = theta.iter().zip(&rates).map(|(t, r)| wrap_phase(t + self.dt * r)).collect();
        Ok((next, rates))
    }
}

impl NetworkEnv for KuramotoEnv {
    fn name(&self) -> &'static str {
        "kuramoto"
    }

    fn topology(&self) -> &Topology {
        &self.topology
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn noise_std(&self, _agent: usize) -> f64 {
        self.noise_std
    }

    fn action_bounds(&self) -> (f64, f64) {
        (-self.action_limit, self.action_limit)
    }

    fn mean_block(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> Vec<f64> {
        let theta = s.values();
        vec![theta[agent] + self.dt * self.frequency(agent, theta, a.values())]
    }

    fn reward(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> f64 {
        -(self.frequency(agent, s.values(), a.values()) - self.target).abs()
    }

    fn wrap_block(&self, block: &mut [f64]) {
        for v in block {
            *v = wrap_phase(*v);
        }
    }

    fn reset(&self, seed: u64) -> GlobalState {
        let mut rng = rng::rng_for(&[seed, stream::RESET]);
        let values = (0..self.topology.n()).map(|_| rng.random_range(-PI..PI)).collect();
        GlobalState::new(values, 1, 0).expect("unit blocks")
    }

    fn reward_range(&self) -> Option<(f64, f64)> {
        let worst = (0..self.topology.n())
            .map(|i| {
                self.natural_freq[i].abs()
                    + self.action_limit
                    + self.coupling[i].iter().map(|k| k.abs()).sum::<f64>()
                    + self.target.abs()
            })
            .fold(0.0, f64::max);
        Some((-worst, 0.0))
    }
}
