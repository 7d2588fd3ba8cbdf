//! TOML experiment configuration.
//!
//! ```toml
//! [env]
//! kind = "thermal"
//! topology = "ring(10)"
//!
//! [algorithm]
//! kappa = 1
//! kappa_pi = 1
//! m = 50
//! samples = 200
//! rounds = 50
//! sampling = { horizon = 20, burn_in = 10, thinning = 1 }
//! eval = { episodes = 200, horizon = 40 }
//!
//! [run]
//! seeds = [0, 1, 2, 3, 4]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{KuramotoEnv, KuramotoParams, KuramotoPreset, NetworkEnv, ThermalEnv, ThermalParams};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::trainer::TrainerSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub algorithm: TrainerSettings,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Thermal,
    Kuramoto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// `ring(N)`, `path(N)` or `file:PATH` (edge list, relative to the config).
    pub topology: String,
    #[serde(default)]
    pub thermal: Option<ThermalParams>,
    #[serde(default)]
    pub kuramoto: Option<KuramotoConfig>,
}

/// Preset plus optional per-field overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuramotoConfig {
    #[serde(default)]
    pub preset: KuramotoPreset,
    /// Seed for the natural frequencies and couplings.
    #[serde(default)]
    pub param_seed: u64,
    pub target: Option<f64>,
    pub action_limit: Option<f64>,
    pub natural_freq_range: Option<(f64, f64)>,
    pub coupling_range: Option<(f64, f64)>,
    pub noise_std: Option<f64>,
    pub dt: Option<f64>,
    pub gamma: Option<f64>,
}

impl KuramotoConfig {
    pub fn params(&self) -> KuramotoParams {
        let base = KuramotoParams::preset(self.preset);
        KuramotoParams {
            target: self.target.unwrap_or(base.target),
            action_limit: self.action_limit.unwrap_or(base.action_limit),
            natural_freq_range: self.natural_freq_range.unwrap_or(base.natural_freq_range),
            coupling_range: self.coupling_range.unwrap_or(base.coupling_range),
            noise_std: self.noise_std.unwrap_or(base.noise_std),
            dt: self.dt.unwrap_or(base.dt),
            gamma: self.gamma.unwrap_or(base.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seeds: default_seeds(), output: default_output() }
    }
}

/// Settings of the exponential-decay check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default)]
    pub agent: usize,
    pub kappas: Vec<usize>,
    pub pairs: usize,
    pub rollouts: usize,
    /// Rollout length; derived from the discount when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Standard deviation of the random policy parameters.
    #[serde(default = "default_policy_scale")]
    pub policy_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_policy_scale() -> f64 {
    0.5
}

/// A constructed environment.
#[derive(Debug, Clone)]
pub enum BuiltEnv {
    Thermal(ThermalEnv),
    Kuramoto(KuramotoEnv),
}

impl BuiltEnv {
    pub fn as_dyn(&self) -> &dyn NetworkEnv {
        match self {
            BuiltEnv::Thermal(e) => e,
            BuiltEnv::Kuramoto(e) => e,
        }
    }
}

/// Parse a topology string.
pub fn parse_topology(text: &str, base_dir: &Path) -> Result<Topology> {
    let text = text.trim();
    let call = |name: &str| -> Option<Result<usize>> {
        let inner = text.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')?;
        Some(inner.trim().parse().map_err(|_| Error::Config(format!("env.topology: bad agent count in {text:?}"))))
    };
    if let Some(n) = call("ring") {
        return Topology::ring(n?);
    }
    if let Some(n) = call("path") {
        return Topology::path(n?);
    }
    if let Some(path) = text.strip_prefix("file:") {
        let text = std::fs::read_to_string(base_dir.join(path.trim()))?;
        return Topology::from_edge_list(&text);
    }
    Err(Error::Config(format!("env.topology: expected ring(N), path(N) or file:PATH, got {text:?}")))
}

impl EnvConfig {
    pub fn build(&self, base_dir: &Path) -> Result<BuiltEnv> {
        let topology = parse_topology(&self.topology, base_dir)?.require_connected()?;
        match self.kind {
            EnvKind::Thermal => {
                if self.kuramoto.is_some() {
                    return Err(Error::Config("env.kuramoto given for a thermal environment".into()));
                }
                let params = self.thermal.clone().unwrap_or_default();
                Ok(BuiltEnv::Thermal(ThermalEnv::new(topology, &params)?))
            }
            EnvKind::Kuramoto => {
                if self.thermal.is_some() {
                    return Err(Error::Config("env.thermal given for a Kuramoto environment".into()));
                }
                let cfg = self.kuramoto.clone().unwrap_or_default();
                Ok(BuiltEnv::Kuramoto(KuramotoEnv::sample(topology, &cfg.params(), cfg.param_seed)?))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds: at least one seed is required".into()));
        }
        if let Some(d) = &self.decay {
            if d.kappas.is_empty() || d.pairs == 0 || d.rollouts == 0 {
                return Err(Error::Config("decay: kappas, pairs and rollouts must be non-empty/positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THERMAL: &str = r#"
[env]
kind = "thermal"
topology = "ring(6)"

[algorithm]
kappa = 1
kappa_pi = 1
m = 20
samples = 50
rounds = 2
sampling = { horizon = 20, burn_in = 10, thinning = 1 }
eval = { episodes = 4, horizon = 20 }
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_toml(THERMAL).unwrap();
        assert_eq!(cfg.algorithm.eta, 0.2);
        assert_eq!(cfg.run.seeds, vec![0]);
        let env = cfg.env.build(Path::new(".")).unwrap();
        assert_eq!(env.as_dyn().n_agents(), 6);
        let echo = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(echo, cfg);
    }

    #[test]
    fn missing_kappa_is_named() {
        let text = THERMAL.replace("kappa = 1\n", "");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config(msg)) => assert!(msg.contains("kappa"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = THERMAL.replace("rounds = 2", "rounds = 2\nroundz = 3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn topology_strings() {
        let here = Path::new(".");
        assert_eq!(parse_topology("ring(5)", here).unwrap().n(), 5);
        assert_eq!(parse_topology(" path( 4 )", here).unwrap().diameter().unwrap(), 3);
        assert!(parse_topology("star(4)", here).is_err());
        assert!(parse_topology("ring(x)", here).is_err());
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0 1\n1 2\n").unwrap();
        assert_eq!(parse_topology("file:g.txt", dir.path()).unwrap().n(), 3);
    }

    #[test]
    fn kuramoto_overrides() {
        let text = r#"
[env]
kind = "kuramoto"
topology = "ring(8)"
kuramoto = { preset = "draft", target = 0.5 }

[algorithm]
kappa = 2
kappa_pi = 1
m = 32
samples = 100
rounds = 1
sampling = { horizon = 200, burn_in = 100, thinning = 1 }
eval = { episodes = 2, horizon = 100 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let p = cfg.env.kuramoto.as_ref().unwrap().params();
        assert_eq!(p.target, 0.5);
        assert_eq!(p.action_limit, 3.0);
        assert!(matches!(cfg.env.build(Path::new(".")).unwrap(), BuiltEnv::Kuramoto(_)));
    }
}
