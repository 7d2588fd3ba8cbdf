//! Acceptance suite. Every criterion prints one `[PASS]`/`[FAIL]` line; the
//! process exits non-zero when any criterion fails.
//!
//! `NETSPEC_ACCEPTANCE=1,4,10` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use netspec::actor::{gradient_estimate, LocalizedGaussianPolicy, Normalization};
use netspec::checks::{decay_check, kernel_check, ols_slope, random_policy, DecayCheckOptions, KernelCheckOptions};
use netspec::critic::{assemble_from_rows, feature_rows, fit_critic, lstd_solve, LocalCritic, Ridge};
use netspec::env::{KuramotoEnv, KuramotoParams, NetworkEnv, ThermalEnv, ThermalParams};
use netspec::features::{rsvd_linear_fit, sample_feature_map, RandomFeatureMap, RsvdOptions};
use netspec::graph::Topology;
use netspec::oracle::{hvac_to_lqr, lqr_cost, policy_from_gain, riccati_solve, RICCATI_MAX_ITER, RICCATI_TOL};
use netspec::rng::gaussian;
use netspec::trainer::{
    evaluate_policy, mc_horizon, monte_carlo_q, run_experiment, sample_stationary_batch, EvalOptions, McOptions,
    SamplingOptions, TrainerSettings,
};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn thermal(n: usize) -> ThermalEnv {
    ThermalEnv::new(Topology::ring(n).unwrap(), &ThermalParams::default()).unwrap()
}

/// Two states, two actions, features `[r, 1{(0,0)}, 1{(0,1)}, 1{(1,0)}]`.
fn tabular_lstd() -> Outcome {
    let gamma = 0.9;
    // p[s][a] = P(s' = 1 | s, a)
    let p = [[0.2, 0.7], [0.6, 0.1]];
    let pi = [[0.3, 0.7], [0.55, 0.45]];
    let r = [[1.0, -0.5], [0.25, 2.0]];
    let trans = |s: usize, a: usize, s2: usize| if s2 == 1 { p[s][a] } else { 1.0 - p[s][a] };
    let feature = |s: usize, a: usize| {
        let k = 2 * s + a;
        vec![r[s][a], (k == 0) as u8 as f64, (k == 1) as u8 as f64, (k == 2) as u8 as f64]
    };
    // Stationary distribution of the state chain under π.
    let to1 = |s: usize| pi[s][0] * trans(s, 0, 1) + pi[s][1] * trans(s, 1, 1);
    let nu1 = to1(0) / (to1(0) + 1.0 - to1(1));
    let nu = [1.0 - nu1, nu1];

    let (mut cur, mut nxt, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..2 {
        for a in 0..2 {
            for s2 in 0..2 {
                for a2 in 0..2 {
                    cur.push(feature(s, a));
                    nxt.push(feature(s2, a2));
                    w.push(nu[s] * pi[s][a] * trans(s, a, s2) * pi[s2][a2]);
                }
            }
        }
    }
    let sys = assemble_from_rows(&cur, &nxt, Some(&w), gamma).map_err(err)?;
    let weights = lstd_solve(&sys, Ridge::Fixed(0.0), false).map_err(err)?;

    let mut p_pi = DMatrix::zeros(4, 4);
    let mut rv = DVector::zeros(4);
    for s in 0..2 {
        for a in 0..2 {
            rv[2 * s + a] = r[s][a];
            for s2 in 0..2 {
                for a2 in 0..2 {
                    p_pi[(2 * s + a, 2 * s2 + a2)] = trans(s, a, s2) * pi[s2][a2];
                }
            }
        }
    }
    let q = (DMatrix::identity(4, 4) - p_pi * gamma).lu().solve(&rv).ok_or("singular Bellman system")?;
    let mut worst: f64 = 0.0;
    for s in 0..2 {
        for a in 0..2 {
            worst = worst.max((weights.q_hat(&feature(s, a)) - q[2 * s + a]).abs());
        }
    }
    check(worst <= 1e-8, format!("max |Q̂ - Q| = {worst:.2e} (tol 1e-8)"))
}

fn gamma_zero_identity() -> Outcome {
    let env = thermal(10);
    let policy = random_policy(&env, 1, 0.5, 0.2, 3).map_err(err)?;
    let batch = sample_stationary_batch(&env, &policy, 400, &SamplingOptions::with_horizon(20), 5).map_err(err)?;
    for i in 0..env.n_agents() {
        let map = sample_feature_map(&env, i, 1, 50, 0.0, 9).map_err(err)?;
        let (cur, nxt) = feature_rows(&batch, &map, &env).map_err(err)?;
        let sys = assemble_from_rows(&cur, &nxt, None, 0.0).map_err(err)?;
        if sys.m != sys.h {
            return Err(format!("agent {i}: M != H at gamma = 0"));
        }
        let w = lstd_solve(&sys, Ridge::Fixed(0.0), false).map_err(err)?;
        let mut e1 = vec![0.0; w.w.len()];
        e1[0] = 1.0;
        if w.w != e1 {
            return Err(format!("agent {i}: w differs from e1"));
        }
        for (tr, row) in batch.samples.iter().zip(&cur) {
            if w.q_hat(row) != env.reward(i, &tr.s, &tr.a) {
                return Err(format!("agent {i}: Q̂ differs from r"));
            }
        }
    }
    Ok("w == e1 and Q̂ == r bit-exactly for 10 agents x 400 samples".into())
}

fn kernel_convergence() -> Outcome {
    let res = kernel_check(&KernelCheckOptions::default()).map_err(err)?;
    let s = res.slope;
    check((-0.65..=-0.35).contains(&s), format!("slope {s:.3} (target -0.5 ± 0.15)"))
}

/// `∫|p(y|f) - φ̂(f)ᵀμ̂(y)| dy` over `[f - 6, f + 6]` by Simpson's rule.
fn transition_factorization() -> Outcome {
    let map = RandomFeatureMap::standalone(1, 4096, 0.0, 1.0, 2024).map_err(err)?;
    let intervals = 4800;
    let h = 12.0 / intervals as f64;
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let f = 1.5 * gaussian(&[77, k]);
        let phi = map.phi_from_mean(&[f]).map_err(err)?;
        let mut total = 0.0;
        for j in 0..=intervals {
            let y = f - 6.0 + j as f64 * h;
            let mu = map.eval_mu_hat(&[y]).map_err(err)?;
            let approx: f64 = phi.iter().zip(&mu).map(|(a, b)| a * b).sum();
            let exact = (-(y - f) * (y - f) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let wgt = if j == 0 || j == intervals { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            total += wgt * (exact - approx).abs();
        }
        worst = worst.max(total * h / 3.0);
    }
    check(worst <= 0.05, format!("max L1 error {worst:.4} over 10 points (tol 0.05)"))
}

fn exponential_decay() -> Outcome {
    let env = KuramotoEnv::sample(Topology::ring(8).unwrap(), &KuramotoParams::default(), 0).map_err(err)?;
    let diameter = env.topology().diameter().map_err(err)?;
    let policy = random_policy(&env, 1, 0.1, 0.5, 11).map_err(err)?;
    let opts = DecayCheckOptions {
        agent: 0,
        kappas: (0..=diameter).collect(),
        pairs: 10,
        rollouts: 20,
        horizon: None,
        seed: 0,
    };
    let rows = decay_check(&env, &policy, &opts).map_err(err)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for r in &rows {
        let pass = if r.kappa >= diameter { r.max_gap == 0.0 } else { r.max_gap <= r.bound + 3.0 * r.max_gap_se };
        ok &= pass;
        parts.push(format!("κ={} gap {:.3e} bound {:.3e}", r.kappa, r.max_gap, r.bound));
    }
    check(ok, parts.join("; "))
}

fn statistical_rate() -> Outcome {
    let env = thermal(10);
    let policy = random_policy(&env, 1, 0.5, 0.1, 7).map_err(err)?;
    let opts = SamplingOptions::with_horizon(20);
    let probes = sample_stationary_batch(&env, &policy, 20, &opts, 999).map_err(err)?;
    let mc = McOptions::for_discount(env.discount(), 4000);
    let truth = probes
        .samples
        .iter()
        .enumerate()
        .map(|(k, tr)| monte_carlo_q(&env, &policy, &tr.s, &tr.a, &mc, k as u64))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let sizes = [125usize, 500, 2000, 8000];
    let seeds = 10u64;
    let mut errors = Vec::new();
    for &ms in &sizes {
        let mut total = 0.0;
        for seed in 0..seeds {
            let batch = sample_stationary_batch(&env, &policy, ms, &opts, 1000 + seed).map_err(err)?;
            for i in 0..env.n_agents() {
                let map = sample_feature_map(&env, i, 1, 50, 0.0, seed).map_err(err)?;
                let critic = fit_critic(&batch, &map, &env, env.discount(), Ridge::default()).map_err(err)?;
                for (tr, t) in probes.samples.iter().zip(&truth) {
                    total += (t.mean[i] - critic.q(&env, &tr.s, &tr.a).map_err(err)?).abs();
                }
            }
        }
        errors.push(total / (seeds as usize * env.n_agents() * probes.len()) as f64);
    }
    let x: Vec<f64> = sizes.iter().map(|&v| (v as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let slope = ols_slope(&x, &y);
    let table: Vec<String> = sizes.iter().zip(&errors).map(|(m, e)| format!("{m}:{e:.3}")).collect();
    check((-0.7..=-0.3).contains(&slope), format!("slope {slope:.3} (target -0.5 ± 0.2), errors {}", table.join(" ")))
}

fn thermal_settings(kappa: usize, kappa_pi: usize, m: usize, samples: usize) -> TrainerSettings {
    TrainerSettings {
        kappa,
        kappa_pi,
        m,
        alpha: 0.0,
        samples,
        rounds: 50,
        eta: 0.2,
        policy_std: 1.0,
        ridge_scale: 1e-6,
        normalization: Normalization::Global,
        feature_sigma: None,
        sampling: SamplingOptions::with_horizon(20),
        eval: EvalOptions { episodes: 500, horizon: 60, deterministic: true },
    }
}

fn thermal_benchmark() -> Outcome {
    let env = thermal(10);
    let optimal = netspec::oracle::oracle_report(&hvac_to_lqr(&env).map_err(err)?).map_err(err)?.optimal_cost;
    let seeds = [0, 1, 2, 3, 4];
    let final_cost = |s: &TrainerSettings| -> Result<f64, String> {
        let runs = run_experiment(&env, s, &seeds).map_err(err)?;
        Ok(runs.iter().map(|r| r.log.last().unwrap().cost).sum::<f64>() / runs.len() as f64)
    };
    let local = final_cost(&thermal_settings(0, 0, 30, 100))?;
    let wide = final_cost(&thermal_settings(1, 1, 50, 200))?;
    let ratio = wide / optimal;
    check(
        wide < local && ratio <= 1.15,
        format!("final cost κπ=1 {wide:.2}, κπ=0 {local:.2}, optimal {optimal:.2}, ratio {ratio:.3}"),
    )
}

fn oracle_consistency() -> Outcome {
    let env = thermal(10);
    let sys = hvac_to_lqr(&env).map_err(err)?;
    let sol = riccati_solve(&sys, RICCATI_TOL, RICCATI_MAX_ITER).map_err(err)?;
    let analytic = lqr_cost(&sys, &sol.k).map_err(err)?;
    let diameter = env.topology().diameter().map_err(err)?;
    let policy = policy_from_gain(&env, &sol.k, diameter, 0.1).map_err(err)?;
    let eval = EvalOptions { episodes: 10_000, horizon: mc_horizon(env.discount(), 1e-12), deterministic: true };
    let stats = evaluate_policy(&env, &policy, &eval, 42).map_err(err)?;
    let mc = -stats.discounted_return;
    let z = (mc - analytic).abs() / stats.return_se;
    let n = sys.dim();
    let mut worse = 0;
    for p in 0..20u64 {
        let delta = DMatrix::from_fn(n, n, |r, c| 0.05 * gaussian(&[p, r as u64, c as u64]));
        if lqr_cost(&sys, &(&sol.k + delta)).map_err(err)? >= analytic {
            worse += 1;
        }
    }
    check(
        sol.residual < 1e-10 && z <= 3.0 && worse == 20,
        format!(
            "residual {:.2e}, analytic {analytic:.3} vs MC {mc:.3} ({z:.2} SE), {worse}/20 perturbations costlier",
            sol.residual
        ),
    )
}

fn kuramoto_improvement() -> Outcome {
    let env = KuramotoEnv::sample(Topology::ring(8).unwrap(), &KuramotoParams::default(), 0).map_err(err)?;
    let rounds = 60;
    let settings = TrainerSettings {
        kappa: 2,
        kappa_pi: 1,
        m: 256,
        alpha: 0.0,
        samples: 2000,
        rounds,
        eta: 0.2,
        policy_std: 0.5,
        ridge_scale: 1e-6,
        normalization: Normalization::Global,
        feature_sigma: None,
        sampling: SamplingOptions { horizon: 800, burn_in: 400, thinning: 1 },
        eval: EvalOptions { episodes: 4, horizon: 800, deterministic: true },
    };
    let runs = run_experiment(&env, &settings, &[0, 1, 2, 3, 4]).map_err(err)?;
    let k = runs.len() as f64;
    let baseline = runs.iter().map(|r| r.log[0].mean_reward).sum::<f64>() / k;
    let peak = runs.iter().flat_map(|r| r.log.iter().map(|x| x.mean_reward)).fold(f64::NEG_INFINITY, f64::max);
    let tail = (rounds / 10).max(1);
    let last = runs
        .iter()
        .map(|r| r.log[r.log.len() - tail..].iter().map(|x| x.mean_reward).sum::<f64>() / tail as f64)
        .sum::<f64>()
        / k;
    let frac = (last - baseline) / (peak - baseline);
    check(
        peak > baseline && frac >= 0.2,
        format!("baseline {baseline:.4}, best peak {peak:.4}, tail mean {last:.4}, fraction {frac:.3} (need 0.2)"),
    )
}

/// Direct REINFORCE over every agent's critic, summed in agent order.
fn untruncated_gradient(
    env: &ThermalEnv,
    policy: &LocalizedGaussianPolicy,
    critics: &[LocalCritic],
    batch: &netspec::critic::TransitionDataset,
) -> Result<Vec<Vec<f64>>, String> {
    let n = env.n_agents();
    let mut out = Vec::new();
    for i in 0..n {
        let mut g = vec![0.0; policy.params(i).len()];
        for tr in &batch.samples {
            let mut coef = 0.0;
            for c in critics {
                coef += c.q(env, &tr.s, &tr.a).map_err(err)? / n as f64;
            }
            let score = policy.score(i, &tr.s, tr.a_raw.agent(i)[0]).map_err(err)?;
            for (gk, sk) in g.iter_mut().zip(&score) {
                *gk += coef * sk;
            }
        }
        g.iter_mut().for_each(|v| *v /= batch.len() as f64);
        out.push(g);
    }
    Ok(out)
}

fn gradient_saturation() -> Outcome {
    let env = thermal(5);
    let policy = random_policy(&env, 1, 0.3, 0.2, 4).map_err(err)?;
    let batch = sample_stationary_batch(&env, &policy, 300, &SamplingOptions::with_horizon(20), 8).map_err(err)?;
    let critics = (0..5)
        .map(|i| {
            let map = sample_feature_map(&env, i, 1, 20, 0.0, 6)?;
            fit_critic(&batch, &map, &env, env.discount(), Ridge::default())
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let truncated = gradient_estimate(&env, &policy, &critics, &batch, 1).map_err(err)?;
    let full = untruncated_gradient(&env, &policy, &critics, &batch)?;
    check(truncated == full, "κ+κπ = diameter = 2 on ring(5): estimators bit-identical".into())
}

fn rsvd_closed_form() -> Outcome {
    let (rows, p, l) = (300usize, 6usize, 4usize);
    let psi: Vec<Vec<f64>> = (0..rows).map(|j| (0..p).map(|k| gaussian(&[1, j as u64, k as u64])).collect()).collect();
    let probes: Vec<Vec<f64>> = psi
        .iter()
        .enumerate()
        .map(|(j, x)| (0..l).map(|k| x[k] - 0.5 * x[k + 1] + 0.3 * gaussian(&[2, j as u64, k as u64])).collect())
        .collect();
    let ridge = 1e-6;
    let fit = rsvd_linear_fit(&psi, &probes, RsvdOptions { ridge, ..Default::default() }).map_err(err)?;
    let x = DMatrix::from_fn(rows, p, |j, k| psi[j][k]);
    let y = DMatrix::from_fn(rows, l, |j, k| probes[j][k]);
    let gram = x.transpose() * &x / rows as f64 + DMatrix::identity(p, p) * ridge;
    let cross = y.transpose() * &x / rows as f64;
    // W (G + λI) = C
    let w = gram.lu().solve(&cross.transpose()).ok_or("singular Gram matrix")?.transpose();
    let gap = (&fit.weights - &w).abs().max();
    check(gap <= 1e-6, format!("max |W - W*| = {gap:.2e} after {} iterations (tol 1e-6)", fit.iterations))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "tabular LSTD matches Bellman solve", budget: secs(1), run: tabular_lstd },
        Criterion { id: 2, name: "gamma = 0 gives e1 and Q̂ = r", budget: secs(1), run: gamma_zero_identity },
        Criterion { id: 3, name: "random-feature kernel convergence rate", budget: secs(120), run: kernel_convergence },
        Criterion { id: 4, name: "transition factorization L1 error", budget: secs(60), run: transition_factorization },
        Criterion { id: 5, name: "exponential decay bound", budget: secs(300), run: exponential_decay },
        Criterion { id: 6, name: "LSTD statistical error rate", budget: secs(600), run: statistical_rate },
        Criterion { id: 7, name: "thermal benchmark trend", budget: secs(900), run: thermal_benchmark },
        Criterion { id: 8, name: "LQR oracle self-consistency", budget: secs(120), run: oracle_consistency },
        Criterion { id: 9, name: "Kuramoto improvement trend", budget: secs(1800), run: kuramoto_improvement },
        Criterion { id: 10, name: "truncated gradient saturation", budget: secs(1), run: gradient_saturation },
        Criterion { id: 11, name: "rsvd fit matches closed form", budget: secs(1), run: rsvd_closed_form },
    ];
    let only: Option<Vec<u32>> = std::env::var("NETSPEC_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.id))) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let in_budget = elapsed <= c.budget;
        if !in_budget {
            detail.push_str(&format!("; over the {}s budget", c.budget.as_secs()));
        }
        let pass = ok && in_budget;
        failed += usize::from(!pass);
        println!(
            "[{}] {:02} {}: {} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
