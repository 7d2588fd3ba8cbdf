//! Per-agent LSTD policy evaluation over reward-prefixed spectral features.
//!
//! For agent `i` with augmented features `φ̃ = [r_i, φ̂_{i,κ}]`:
//!
//! ```text
//! M = (1/|D|) Σ φ̃ (φ̃ - γ φ̃')ᵀ      H = (1/|D|) Σ φ̃ φ̃ᵀ
//! w = (M + λI)⁻¹ H e₁               Q̂_i = φ̃ᵀ w
//! ```

use nalgebra::{DMatrix, DVector};

use crate::actor::LocalizedGaussianPolicy;
use crate::env::{GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::features::{dot, RandomFeatureMap};
use crate::trainer::{monte_carlo_q, McOptions};

/// One `(s, a, s', a')` sample.
///
/// `a` is the executed (box-clipped) action; `a_raw` is the policy's
/// unclipped Gaussian draw, which is what the score function needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: GlobalState,
    pub a: GlobalAction,
    pub a_raw: GlobalAction,
    pub s_next: GlobalState,
    pub a_next: GlobalAction,
}

/// How a dataset was drawn.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub round: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub episodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionDataset {
    pub samples: Vec<Transition>,
    pub provenance: Provenance,
}

impl TransitionDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Assembled LSTD matrices for one agent.
#[derive(Debug, Clone)]
pub struct LstdSystem {
    pub m: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Largest `||φ̃||` seen while assembling.
    pub max_feature_norm: f64,
}

/// Augmented features of agent `map.agent` at every `(s, a)` and `(s', a')`.
pub fn feature_rows<E: NetworkEnv + ?Sized>(
    data: &TransitionDataset,
    map: &RandomFeatureMap,
    env: &E,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut current = Vec::with_capacity(data.len());
    let mut next = Vec::with_capacity(data.len());
    for tr in &data.samples {
        current.push(map.augmented(env, &tr.s, &tr.a)?);
        next.push(map.augmented(env, &tr.s_next, &tr.a_next)?);
    }
    Ok((current, next))
}

/// Assemble `M` and `H` from precomputed feature rows.
///
/// `weights`, when given, replaces the uniform `1/|D|` with a probability
/// vector (used for exhaustive tabular datasets).
pub fn assemble_from_rows(
    current: &[Vec<f64>],
    next: &[Vec<f64>],
    weights: Option<&[f64]>,
    gamma: f64,
) -> Result<LstdSystem> {
    if current.is_empty() {
        return Err(Error::Sampling("LSTD needs at least one sample".into()));
    }
    if current.len() != next.len() || weights.is_some_and(|w| w.len() != current.len()) {
        return Err(Error::Dimension { expected: current.len(), got: next.len() });
    }
    let dim = current[0].len();
    let rows = current.len();
    let uniform = 1.0 / rows as f64;
    let mut left = DMatrix::zeros(rows, dim);
    let mut phi = DMatrix::zeros(rows, dim);
    let mut diff = DMatrix::zeros(rows, dim);
    let mut max_norm: f64 = 0.0;
    for (j, (p, q)) in current.iter().zip(next).enumerate() {
        if p.len() != dim || q.len() != dim {
            return Err(Error::Dimension { expected: dim, got: p.len().min(q.len()) });
        }
        let wj = weights.map_or(uniform, |w| w[j]);
        for c in 0..dim {
            left[(j, c)] = wj * p[c];
            phi[(j, c)] = p[c];
            diff[(j, c)] = p[c] - gamma * q[c];
        }
        max_norm = max_norm.max(dot(p, p).sqrt()).max(dot(q, q).sqrt());
    }
    let m = left.tr_mul(&diff);
    let h = left.tr_mul(&phi);
    Ok(LstdSystem { m, h, max_feature_norm: max_norm })
}

/// `(M_i, H_i)` for one agent's feature map over a dataset.
pub fn assemble_lstd<E: NetworkEnv + ?Sized>(
    data: &TransitionDataset,
    map: &RandomFeatureMap,
    env: &E,
    gamma: f64,
) -> Result<LstdSystem> {
    let (current, next) = feature_rows(data, map, env)?;
    assemble_from_rows(&current, &next, None, gamma)
}

/// Ridge added to `M` before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    Fixed(f64),
    /// `λ = c · trace(H) / dim`.
    TraceScaled(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::TraceScaled(1e-6)
    }
}

impl Ridge {
    pub fn value(&self, h: &DMatrix<f64>) -> f64 {
        match *self {
            Ridge::Fixed(l) => l,
            Ridge::TraceScaled(c) => c * h.trace() / h.nrows() as f64,
        }
    }
}

/// Constants reported after every solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticDiagnostics {
    /// `L = max ||φ̃||` over the dataset.
    pub max_feature_norm: f64,
    /// `D = ||(M + λI)⁻¹||₂`.
    pub inv_norm: f64,
    /// 2-norm condition number of `M + λI`.
    pub condition: f64,
    pub ridge: f64,
}

/// Critic weights `w_i`; `Q̂_i = φ̃ᵀ w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticWeights {
    pub w: Vec<f64>,
    pub diagnostics: CriticDiagnostics,
}

impl CriticWeights {
    pub fn q_hat(&self, features: &[f64]) -> f64 {
        dot(features, &self.w)
    }
}

/// Solve `(M + λI) w = H e₁`.
///
/// The system is solved for the correction `δ = w - e₁`, i.e.
/// `(M + λI) δ = H e₁ - (M + λI) e₁`, so that `M = H, λ = 0` returns `e₁`
/// without rounding. When the factorization fails and `pinv_fallback` is set
/// the minimum-norm least-squares solution is returned instead.
pub fn lstd_solve(system: &LstdSystem, ridge: Ridge, pinv_fallback: bool) -> Result<CriticWeights> {
    let dim = system.m.nrows();
    let lambda = ridge.value(&system.h);
    let mut a = system.m.clone();
    for k in 0..dim {
        a[(k, k)] += lambda;
    }
    let rhs: DVector<f64> = system.h.column(0) - a.column(0);
    let singular = a.clone().singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let diagnostics = CriticDiagnostics {
        max_feature_norm: system.max_feature_norm,
        inv_norm: if smin > 0.0 { 1.0 / smin } else { f64::INFINITY },
        condition,
        ridge: lambda,
    };
    let solved = if rhs.iter().all(|v| *v == 0.0) {
        Some(DVector::zeros(dim))
    } else if condition.is_finite() && condition < 1e15 {
        a.clone().lu().solve(&rhs).filter(|d| d.iter().all(|v| v.is_finite()))
    } else {
        None
    };
    let delta = match solved {
        Some(d) => d,
        None if pinv_fallback => a
            .svd(true, true)
            .solve(&rhs, smax * dim as f64 * f64::EPSILON)
            .map_err(|e| Error::Solver { reason: e.to_string(), condition })?,
        None => {
            return Err(Error::Solver {
                reason: format!("M + λI is numerically singular (λ = {lambda:e})"),
                condition,
            })
        }
    };
    let mut w: Vec<f64> = delta.iter().copied().collect();
    w[0] += 1.0;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("critic weights".into()));
    }
    Ok(CriticWeights { w, diagnostics })
}

/// A feature map together with its fitted weights.
#[derive(Debug, Clone)]
pub struct LocalCritic {
    pub map: RandomFeatureMap,
    pub weights: CriticWeights,
}

impl LocalCritic {
    pub fn agent(&self) -> usize {
        self.map.params().agent
    }

    pub fn q<E: NetworkEnv + ?Sized>(&self, env: &E, s: &GlobalState, a: &GlobalAction) -> Result<f64> {
        Ok(self.weights.q_hat(&self.map.augmented(env, s, a)?))
    }
}

/// Fit one agent's critic on a dataset.
pub fn fit_critic<E: NetworkEnv + ?Sized>(
    data: &TransitionDataset,
    map: &RandomFeatureMap,
    env: &E,
    gamma: f64,
    ridge: Ridge,
) -> Result<LocalCritic> {
    let system = assemble_lstd(data, map, env, gamma)?;
    let weights = lstd_solve(&system, ridge, false)?;
    Ok(LocalCritic { map: map.clone(), weights })
}

/// Probe points and Monte Carlo settings for [`policy_eval_probe`].
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub points: Vec<(GlobalState, GlobalAction)>,
    pub mc: McOptions,
    pub seed: u64,
}

/// Mean absolute error of each critic against Monte Carlo `Q_i^π` over the
/// probe points, averaged over critics and points.
pub fn policy_eval_probe<E: NetworkEnv + ?Sized>(
    critics: &[LocalCritic],
    env: &E,
    policy: &LocalizedGaussianPolicy,
    probes: &ProbeSet,
) -> Result<f64> {
    if critics.is_empty() || probes.points.is_empty() {
        return Err(Error::Parameter("probe needs critics and probe points".into()));
    }
    let mut total = 0.0;
    for (k, (s, a)) in probes.points.iter().enumerate() {
        let truth = monte_carlo_q(env, policy, s, a, &probes.mc, crate::rng::mix(&[probes.seed, k as u64]))?;
        for critic in critics {
            total += (truth.mean[critic.agent()] - critic.q(env, s, a)?).abs();
        }
    }
    Ok(total / (critics.len() * probes.points.len()) as f64)
}
