//! File-producing entry points behind the `netspec` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checks::{decay_check, kernel_check, random_policy, DecayCheckOptions, KernelCheckOptions};
use crate::config::{BuiltEnv, ExperimentConfig};
use crate::critic::LocalCritic;
use crate::env::NetworkEnv;
use crate::error::{Error, Result};
use crate::oracle::{hvac_to_lqr, oracle_report, OracleReport};
use crate::trainer::{RoundRecord, Trainer};

pub const SCHEMA_LINE: &str = "# schema=v1";

/// Content hash in the style of a git blob id: SHA-256 of
/// `"blob <len>\0" + content`, hex encoded.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub config_echo: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(file))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
}

fn load(config: &Path, seed_override: Option<u64>) -> Result<(ExperimentConfig, String)> {
    let text = fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = seed_override {
        cfg.run.seeds = vec![seed];
        if let Some(d) = cfg.decay.as_mut() {
            d.seed = seed;
        }
    }
    Ok((cfg, text))
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_manifest(out: &Path, command: &str, config: &Path, text: &str, cfg: &ExperimentConfig, outputs: &[String]) -> Result<()> {
    let echo = cfg.to_toml()?;
    fs::write(out.join("config.toml"), &echo)?;
    let manifest = RunManifest {
        command: command.into(),
        config_path: config.display().to_string(),
        config_hash: blob_hash(text.as_bytes()),
        config_echo: "config.toml".into(),
        seeds: cfg.run.seeds.clone(),
        outputs: outputs.to_vec(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

struct SeedTrace {
    log: Vec<RoundRecord>,
    critics: Vec<(usize, Vec<LocalCritic>)>,
    policies: Vec<(usize, Vec<Vec<f64>>)>,
}

fn train_seed(env: &dyn NetworkEnv, cfg: &ExperimentConfig, seed: u64) -> Result<SeedTrace> {
    let mut trainer = Trainer::new(env, cfg.algorithm.clone(), seed)?;
    let params = |t: &Trainer<dyn NetworkEnv>| (0..env.n_agents()).map(|i| t.policy().params(i).to_vec()).collect();
    let mut trace = SeedTrace { log: vec![trainer.baseline()?], critics: Vec::new(), policies: vec![(0, params(&trainer))] };
    for _ in 0..cfg.algorithm.rounds {
        let rec = trainer.run_round()?;
        trace.critics.push((rec.round, trainer.critics().to_vec()));
        trace.policies.push((rec.round, params(&trainer)));
        trace.log.push(rec);
    }
    Ok(trace)
}

/// Oracle report when the environment admits one.
pub fn oracle_for(env: &BuiltEnv) -> Result<OracleReport> {
    match env {
        BuiltEnv::Thermal(t) => oracle_report(&hvac_to_lqr(t)?),
        BuiltEnv::Kuramoto(_) => Err(Error::Unsupported("the LQR oracle needs the linear thermal environment".into())),
    }
}

/// Train every seed and write `trainlog.csv`, `critics.csv`, `policy.csv`,
/// `timings.csv`, the config echo and the manifest into `out`.
pub fn cmd_run(config: &Path, seed_override: Option<u64>, out: Option<&Path>) -> Result<PathBuf> {
    let (cfg, text) = load(config, seed_override)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.run.output.clone());
    fs::create_dir_all(&out)?;
    let built = cfg.env.build(&base_dir(config))?;
    let env = built.as_dyn();
    let oracle = match &built {
        BuiltEnv::Thermal(_) => {
            let report = oracle_for(&built)?;
            fs::write(out.join("oracle.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            Some(report)
        }
        BuiltEnv::Kuramoto(_) => None,
    };
    let traces = cfg
        .run
        .seeds
        .par_iter()
        .map(|&seed| train_seed(env, &cfg, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut log = csv_writer(&out.join("trainlog.csv"))?;
    let mut header = vec![
        "seed", "round", "discounted_return", "return_se", "cost", "mean_reward", "max_feature_norm",
        "max_inv_norm", "max_condition", "grad_norm", "max_agent_grad_norm",
    ];
    if oracle.is_some() {
        header.push("optimal_cost");
    }
    log.write_record(&header).map_err(Error::from)?;
    let mut timings = csv_writer(&out.join("timings.csv"))?;
    timings.write_record(["seed", "round", "wall_seconds"]).map_err(Error::from)?;
    for (seed, trace) in cfg.run.seeds.iter().zip(&traces) {
        for r in &trace.log {
            let mut row = vec![
                seed.to_string(),
                r.round.to_string(),
                r.discounted_return.to_string(),
                r.return_se.to_string(),
                r.cost.to_string(),
                r.mean_reward.to_string(),
                r.max_feature_norm.to_string(),
                r.max_inv_norm.to_string(),
                r.max_condition.to_string(),
                r.grad_norm.to_string(),
                r.max_agent_grad_norm.to_string(),
            ];
            if let Some(o) = &oracle {
                row.push(o.optimal_cost.to_string());
            }
            log.write_record(&row).map_err(Error::from)?;
            timings.write_record([seed.to_string(), r.round.to_string(), format!("{:.6}", r.wall_seconds)]).map_err(Error::from)?;
        }
    }
    log.flush()?;
    timings.flush()?;

    let mut critics = csv_writer(&out.join("critics.csv"))?;
    critics.write_record(["seed", "round", "agent", "max_feature_norm", "inv_norm", "condition", "ridge", "w"]).map_err(Error::from)?;
    let mut policy = csv_writer(&out.join("policy.csv"))?;
    policy.write_record(["seed", "round", "agent", "theta"]).map_err(Error::from)?;
    for (seed, trace) in cfg.run.seeds.iter().zip(&traces) {
        for (round, cs) in &trace.critics {
            for c in cs {
                let d = c.weights.diagnostics;
                critics
                    .write_record([
                        seed.to_string(),
                        round.to_string(),
                        c.agent().to_string(),
                        d.max_feature_norm.to_string(),
                        d.inv_norm.to_string(),
                        d.condition.to_string(),
                        d.ridge.to_string(),
                        join(&c.weights.w),
                    ])
                    .map_err(Error::from)?;
            }
        }
        for (round, thetas) in &trace.policies {
            for (i, theta) in thetas.iter().enumerate() {
                policy.write_record([seed.to_string(), round.to_string(), i.to_string(), join(theta)]).map_err(Error::from)?;
            }
        }
    }
    critics.flush()?;
    policy.flush()?;

    let mut outputs: Vec<String> = ["trainlog.csv", "critics.csv", "policy.csv", "timings.csv"].map(String::from).to_vec();
    if oracle.is_some() {
        outputs.push("oracle.json".into());
    }
    write_manifest(&out, "run", config, &text, &cfg, &outputs)?;
    Ok(out)
}

/// Kernel sweep to `kernel_check.csv`; returns the fitted slope.
pub fn cmd_kernel_check(opts: &KernelCheckOptions, out: &Path) -> Result<f64> {
    fs::create_dir_all(out)?;
    let check = kernel_check(opts)?;
    let mut w = csv_writer(&out.join("kernel_check.csv"))?;
    w.write_record(["m", "median_gap", "p95_gap"]).map_err(Error::from)?;
    for r in &check.rows {
        w.write_record([r.m.to_string(), r.median_gap.to_string(), r.p95_gap.to_string()]).map_err(Error::from)?;
    }
    w.flush()?;
    let summary = serde_json::json!({ "slope": check.slope, "fit_range": opts.fit_range, "options": opts });
    fs::write(out.join("kernel_slope.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(check.slope)
}

/// Decay sweep over the configured κ values to `decay_check.csv`.
pub fn cmd_decay_check(config: &Path, seed_override: Option<u64>, out: Option<&Path>) -> Result<PathBuf> {
    let (cfg, text) = load(config, seed_override)?;
    let decay = cfg.decay.clone().ok_or_else(|| Error::Config("missing [decay] section".into()))?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.run.output.clone());
    fs::create_dir_all(&out)?;
    let built = cfg.env.build(&base_dir(config))?;
    let env = built.as_dyn();
    let policy = random_policy(env, cfg.algorithm.kappa_pi, cfg.algorithm.policy_std, decay.policy_scale, decay.seed)?;
    let opts = DecayCheckOptions {
        agent: decay.agent,
        kappas: decay.kappas.clone(),
        pairs: decay.pairs,
        rollouts: decay.rollouts,
        horizon: decay.horizon,
        seed: decay.seed,
    };
    let rows = decay_check(env, &policy, &opts)?;
    let mut w = csv_writer(&out.join("decay_check.csv"))?;
    w.write_record(["kappa", "max_gap", "max_gap_se", "mean_gap", "bound", "reward_bound"]).map_err(Error::from)?;
    for r in &rows {
        w.write_record([
            r.kappa.to_string(),
            r.max_gap.to_string(),
            r.max_gap_se.to_string(),
            r.mean_gap.to_string(),
            r.bound.to_string(),
            r.reward_bound.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    write_manifest(&out, "decay-check", config, &text, &cfg, &["decay_check.csv".into()])?;
    Ok(out)
}

/// LQR report as pretty JSON; also written to `oracle.json` when `out` is given.
pub fn cmd_oracle(config: &Path, out: Option<&Path>) -> Result<String> {
    let (cfg, _) = load(config, None)?;
    let built = cfg.env.build(&base_dir(config))?;
    let json = serde_json::to_string_pretty(&oracle_for(&built)?)? + "\n";
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("oracle.json"), &json)?;
    }
    Ok(json)
}
