//! Multi-zone building thermal control.
//!
//! Zone temperatures follow a linear recursion driven by the outdoor
//! temperature, heat exchange with adjacent zones and a local HVAC input:
//!
//! ```text
//! x_i' = x_i + Δ/(v_i ζ_i) (θ° - x_i) + Σ_{j∈N_i} Δ/(v_i ζ_ij) (x_j - x_i)
//!            + (Δ/v_i) α_i a_i + sqrt(Δ/v_i) β_i w_i
//! ```
//!
//! The per-step cost is `ρ_i (x_i - θ*_i)^2 + a_i^2` and the reward is its
//! negation.

use serde::{Deserialize, Serialize};

use super::{GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::rng::{self, stream};

/// Homogeneous building parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalParams {
    /// Time resolution Δ.
    pub delta: f64,
    /// Thermal capacitance v_i.
    pub capacitance: f64,
    /// Resistance ζ_i between a zone and the outside.
    pub window_resistance: f64,
    /// Resistance ζ_ij between adjacent zones.
    pub wall_resistance: f64,
    /// Input scaling α_i.
    pub input_gain: f64,
    /// Noise scaling β_i; `None` means sqrt(v/Δ), which gives unit noise.
    pub noise_gain: Option<f64>,
    /// Outdoor temperature θ°.
    pub outdoor: f64,
    /// Target temperature θ*.
    pub target: f64,
    /// Trade-off ρ_i between tracking and actuation.
    pub tradeoff: f64,
    /// Standard deviation of the initial zone temperatures.
    pub init_std: f64,
    /// Symmetric action limit; `None` leaves actions unbounded.
    pub action_limit: Option<f64>,
    pub gamma: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            delta: 20.0,
            capacitance: 200.0,
            window_resistance: 0.5,
            wall_resistance: 1.0,
            input_gain: 1.0 / 7.0,
            noise_gain: None,
            outdoor: 0.0,
            target: 0.0,
            tradeoff: 3.0,
            init_std: 1.0,
            action_limit: None,
            gamma: 0.75,
        }
    }
}

/// Parameters of a single zone after broadcasting.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub capacitance: f64,
    pub window_resistance: f64,
    pub input_gain: f64,
    pub noise_gain: f64,
    pub target: f64,
    pub tradeoff: f64,
}

#[derive(Debug, Clone)]
pub struct ThermalEnv {
    topology: Topology,
    delta: f64,
    wall_resistance: f64,
    outdoor: f64,
    init_std: f64,
    bounds: (f64, f64),
    gamma: f64,
    zones: Vec<Zone>,
}

impl ThermalEnv {
    pub fn new(topology: Topology, params: &ThermalParams) -> Result<Self> {
        let zone = Zone {
            capacitance: params.capacitance,
            window_resistance: params.window_resistance,
            input_gain: params.input_gain,
            noise_gain: params
                .noise_gain
                .unwrap_or_else(|| (params.capacitance / params.delta).sqrt()),
            target: params.target,
            tradeoff: params.tradeoff,
        };
        let bounds = match params.action_limit {
            Some(l) if l > 0.0 => (-l, l),
            Some(l) => return Err(Error::Parameter(format!("action_limit must be positive, got {l}"))),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let zones = vec![zone; topology.n()];
        Self::with_zones(topology, params.delta, params.wall_resistance, params.outdoor, zones)
            .map(|env| Self { init_std: params.init_std, bounds, ..env })
            .and_then(|env| env.with_gamma(params.gamma))
    }

    /// Heterogeneous building with one [`Zone`] per agent.
    pub fn with_zones(
        topology: Topology,
        delta: f64,
        wall_resistance: f64,
        outdoor: f64,
        zones: Vec<Zone>,
    ) -> Result<Self> {
        if zones.len() != topology.n() {
            return Err(Error::Dimension { expected: topology.n(), got: zones.len() });
        }
        if delta <= 0.0 || !delta.is_finite() {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        if wall_resistance <= 0.0 {
            return Err(Error::Parameter(format!(
                "wall resistance must be positive, got {wall_resistance}"
            )));
        }
        for (i, z) in zones.iter().enumerate() {
            if z.capacitance <= 0.0 || z.window_resistance <= 0.0 {
                return Err(Error::Parameter(format!(
                    "zone {i}: capacitance and window resistance must be positive"
                )));
            }
        }
        Ok(Self {
            topology,
            delta,
            wall_resistance,
            outdoor,
            init_std: 1.0,
            bounds: (f64::NEG_INFINITY, f64::INFINITY),
            gamma: 0.75,
            zones,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Parameter(format!("discount must lie in (0, 1), got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn wall_resistance(&self) -> f64 {
        self.wall_resistance
    }

    pub fn outdoor(&self) -> f64 {
        self.outdoor
    }

    pub fn init_std(&self) -> f64 {
        self.init_std
    }

    fn zone_mean(&self, i: usize, x: &[f64], a: &[f64]) -> f64 {
        let z = &self.zones[i];
        let scale = self.delta / z.capacitance;
        let mut next = x[i] + scale / z.window_resistance * (self.outdoor - x[i]);
        for &j in self.topology.neighbors(i) {
            next += scale / self.wall_resistance * (x[j] - x[i]);
        }
        next + scale * z.input_gain * a[i]
    }

    /// Noise-free recursion applied to every zone.
    pub fn step_mean(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let n = self.topology.n();
        if x.len() != n {
            return Err(Error::Dimension { expected: n, got: x.len() });
        }
        if a.len() != n {
            return Err(Error::Dimension { expected: n, got: a.len() });
        }
        Ok((0..n).map(|i| self.zone_mean(i, x, a)).collect())
    }

    /// Per-step cost `ρ_i (x_i - θ*_i)^2 + a_i^2`.
    pub fn cost(&self, i: usize, x_i: f64, a_i: f64) -> f64 {
        let z = &self.zones[i];
        z.tradeoff * (x_i - z.target).powi(2) + a_i * a_i
    }
}

impl NetworkEnv for ThermalEnv {
    fn name(&self) -> &'static str {
        "thermal"
    }

    fn topology(&self) -> &Topology {
        &self.topology
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn noise_std(&self, agent: usize) -> f64 {
        let z = &self.zones[agent];
        (self.delta / z.capacitance).sqrt() * z.noise_gain
    }

    fn action_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn mean_block(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> Vec<f64> {
        vec![self.zone_mean(agent, s.values(), a.values())]
    }

    fn reward(&self, agent: usize, s: &GlobalState, a: &GlobalAction) -> f64 {
        -self.cost(agent, s.agent(agent)[0], a.agent(agent)[0])
    }

    fn reset(&self, seed: u64) -> GlobalState {
        let values = (0..self.topology.n())
            .map(|i| self.init_std * rng::gaussian(&[seed, stream::RESET, i as u64]))
            .collect();
        GlobalState::new(values, 1, 0).expect("unit blocks")
    }

    fn reward_range(&self) -> Option<(f64, f64)> {
        None
    }
}
