//! Network κ-local spectral features.
//!
//! For Gaussian noise `s'_{N_i^κ} = f_{i,κ} + ε`, `ε ~ N(0, σ² I_d)`, the
//! κ-hop block transition density factorizes approximately as
//! `P(y | x) ≈ φ̂(x)ᵀ μ̂(y)` with random Fourier features:
//!
//! ```text
//! φ̂(x) = scale(x) · sqrt(2/m) · cos(ω_ℓᵀ f_{i,κ}(x) / sqrt(1-α²) + b_ℓ)
//! μ̂(y) = weight(y) · sqrt(2/m) · cos(sqrt(1-α²) ω_ℓᵀ y + b_ℓ)
//! ```
//!
//! with `ω_ℓ ~ N(0, σ⁻² I_d)` and `b_ℓ ~ U[0, 2π]`. At `α = 0` the scale is 1
//! and the weight is the Gaussian normalizer `(2πσ²)^{-d/2}`; for `α > 0`
//! `scale = g_α(f)/α^d` and `weight = p_α(y)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{local_mean_over, GlobalAction, GlobalState, NetworkEnv};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Everything needed to regenerate a feature map exactly.
///
/// Dumps store these parameters rather than the frequency draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapParams {
    pub agent: usize,
    pub kappa: usize,
    pub m: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Window dimension `|N_i^κ| · S`.
    pub input_dim: usize,
}

/// Frozen random Fourier features for one agent's κ-hop window.
#[derive(Debug, Clone)]
pub struct RandomFeatureMap {
    params: FeatureMapParams,
    members: Vec<usize>,
    /// Row-major `m × input_dim`.
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl RandomFeatureMap {
    /// Draw a map from its parameters; `members` is the sorted κ-hop window.
    pub fn from_params(params: FeatureMapParams, members: Vec<usize>) -> Result<Self> {
        if params.m == 0 {
            return Err(Error::Parameter("feature count m must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&params.alpha) {
            return Err(Error::Parameter(format!("alpha must lie in [0, 1), got {}", params.alpha)));
        }
        if !(params.sigma > 0.0 && params.sigma.is_finite()) {
            return Err(Error::Parameter(format!("noise scale must be positive, got {}", params.sigma)));
        }
        if params.input_dim == 0 {
            return Err(Error::Parameter("feature input dimension must be positive".into()));
        }
        let mut rng = rng::rng_for(&[
            params.seed,
            stream::FEATURES,
            params.agent as u64,
            params.kappa as u64,
            params.m as u64,
            params.alpha.to_bits(),
        ]);
        let inv_sigma = 1.0 / params.sigma;
        let mut omegas = Vec::with_capacity(params.m * params.input_dim);
        let mut phases = Vec::with_capacity(params.m);
        for _ in 0..params.m {
            for _ in 0..params.input_dim {
                let z: f64 = rng.sample(StandardNormal);
                omegas.push(z * inv_sigma);
            }
            phases.push(rng.random_range(0.0..2.0 * PI));
        }
        Ok(Self { params, members, omegas, phases })
    }

    /// Standalone map over `R^input_dim`, not tied to an environment window.
    pub fn standalone(input_dim: usize, m: usize, alpha: f64, sigma: f64, seed: u64) -> Result<Self> {
        Self::from_params(
            FeatureMapParams { agent: 0, kappa: 0, m, alpha, sigma, seed, input_dim },
            Vec::new(),
        )
    }

    pub fn params(&self) -> &FeatureMapParams {
        &self.params
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    pub fn omega(&self, l: usize) -> &[f64] {
        let d = self.params.input_dim;
        &self.omegas[l * d..(l + 1) * d]
    }

    pub fn phase(&self, l: usize) -> f64 {
        self.phases[l]
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.params.input_dim {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.params.input_dim, got: v.len() })
        }
    }

    fn cosines(&self, x: &[f64], freq_scale: f64, amplitude: f64) -> Vec<f64> {
        let root = (2.0 / self.params.m as f64).sqrt() * amplitude;
        (0..self.params.m)
            .map(|l| {
                let dot: f64 = self.omega(l).iter().zip(x).map(|(w, v)| w * v).sum();
                root * (freq_scale * dot + self.phases[l]).cos()
            })
            .collect()
    }

    /// Unscaled cosine map `z(x) = sqrt(2/m) cos(ω_ℓᵀx + b_ℓ)`.
    pub fn kernel_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.cosines(x, 1.0, 1.0))
    }

    /// `φ̂` evaluated at a precomputed window mean `f_{i,κ}`.
    pub fn phi_from_mean(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        let alpha = self.params.alpha;
        if alpha == 0.0 {
            return Ok(self.cosines(f, 1.0, 1.0));
        }
        let one_minus = 1.0 - alpha * alpha;
        let norm2: f64 = f.iter().map(|v| v * v).sum();
        let sigma2 = self.params.sigma * self.params.sigma;
        let d = self.params.input_dim as i32;
        let scale = (alpha * alpha * norm2 / (2.0 * one_minus * sigma2)).exp() / alpha.powi(d);
        Ok(self.cosines(f, 1.0 / one_minus.sqrt(), scale))
    }

    /// `φ̂(s, a)`, computing `f_{i,κ}` from the environment's mean dynamics.
    pub fn eval_phi_hat<E: NetworkEnv + ?Sized>(
        &self,
        env: &E,
        s: &GlobalState,
        a: &GlobalAction,
    ) -> Result<Vec<f64>> {
        self.phi_from_mean(&local_mean_over(env, s, a, &self.members))
    }

    /// Augmented feature `[r_i(s, a), φ̂(s, a)]` of dimension `m + 1`.
    pub fn augmented<E: NetworkEnv + ?Sized>(
        &self,
        env: &E,
        s: &GlobalState,
        a: &GlobalAction,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.params.m + 1);
        out.push(env.reward(self.params.agent, s, a));
        out.extend(self.eval_phi_hat(env, s, a)?);
        Ok(out)
    }

    /// Density weight applied to `μ̂` at `y`.
    pub fn mu_weight(&self, y: &[f64]) -> f64 {
        let d = self.params.input_dim as f64;
        let sigma2 = self.params.sigma * self.params.sigma;
        let normalizer = (2.0 * PI * sigma2).powf(-d / 2.0);
        let alpha = self.params.alpha;
        if alpha == 0.0 {
            normalizer
        } else {
            let norm2: f64 = y.iter().map(|v| v * v).sum();
            alpha.powf(d) * normalizer * (-alpha * alpha * norm2 / (2.0 * sigma2)).exp()
        }
    }

    /// `μ̂(y)` for a next-window state `y`.
    pub fn eval_mu_hat(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let freq = (1.0 - self.params.alpha * self.params.alpha).sqrt();
        Ok(self.cosines(y, freq, self.mu_weight(y)))
    }

    /// Approximate transition density `φ̂(f)ᵀ μ̂(y)`.
    pub fn density(&self, f: &[f64], y: &[f64]) -> Result<f64> {
        let phi = self.phi_from_mean(f)?;
        let mu = self.eval_mu_hat(y)?;
        Ok(dot(&phi, &mu))
    }

    /// Largest `|z(x)ᵀz(y) - k(x, y)|` over the given pairs, where `k` is the
    /// Gaussian kernel with bandwidth σ.
    pub fn kernel_gap(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::Parameter("kernel gap needs a non-empty grid".into()));
        }
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            let zx = self.kernel_features(x)?;
            let zy = self.kernel_features(y)?;
            worst = worst.max((dot(&zx, &zy) - gaussian_kernel(x, y, self.params.sigma)).abs());
        }
        Ok(worst)
    }

    /// Sup gap over every pair drawn from `points`, evaluating `z` once per point.
    pub fn kernel_gap_on_points(&self, points: &[Vec<f64>]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::Parameter("kernel gap needs a non-empty grid".into()));
        }
        let zs = points.iter().map(|p| self.kernel_features(p)).collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for (p, zp) in points.iter().zip(&zs) {
            for (q, zq) in points.iter().zip(&zs) {
                let gap = (dot(zp, zq) - gaussian_kernel(p, q, self.params.sigma)).abs();
                worst = worst.max(gap);
            }
        }
        Ok(worst)
    }
}

/// Sample the feature map of agent `i` at radius κ for an environment.
///
/// The window noise must be homogeneous; its common scale becomes σ.
pub fn sample_feature_map<E: NetworkEnv + ?Sized>(
    env: &E,
    agent: usize,
    kappa: usize,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<RandomFeatureMap> {
    let members = env.topology().khop(agent, kappa)?;
    let sigma = env.noise_std(agent);
    if members.iter().any(|&j| env.noise_std(j) != sigma) {
        return Err(Error::Parameter(format!(
            "agent {agent}: noise scale differs within the {kappa}-hop window"
        )));
    }
    let params = FeatureMapParams {
        agent,
        kappa,
        m,
        alpha,
        sigma,
        seed,
        input_dim: members.len() * env.state_dim(),
    };
    RandomFeatureMap::from_params(params, members)
}

/// `exp(-||x - y||² / (2σ²))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kronecker product of the factors, left to right.
pub fn tensor_compose(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        out = out.iter().flat_map(|&u| f.iter().map(move |&v| u * v)).collect();
    }
    out
}

/// Random probe functions `ω_k(y) = cos(c_kᵀ y + d_k)` with `c_k ~ N(0, I)`
/// and `d_k ~ U[0, 2π]`.
#[derive(Debug, Clone)]
pub struct ProbeFunctions {
    dim: usize,
    coeffs: Vec<f64>,
    offsets: Vec<f64>,
}

impl ProbeFunctions {
    pub fn sample(dim: usize, count: usize, seed: u64) -> Self {
        let mut rng = rng::rng_for(&[seed, stream::PROBE, dim as u64, count as u64]);
        let coeffs = (0..dim * count).map(|_| rng.sample(StandardNormal)).collect();
        let offsets = (0..count).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self { dim, coeffs, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: y.len() });
        }
        Ok(self
            .offsets
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let c = &self.coeffs[k * self.dim..(k + 1) * self.dim];
                (dot(c, y) + d).cos()
            })
            .collect())
    }
}

/// Result of [`rsvd_linear_fit`].
#[derive(Debug, Clone)]
pub struct RsvdFit {
    /// `L × dim ψ`; learned features are `φ = W ψ`.
    pub weights: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl RsvdFit {
    pub fn features(&self, psi: &[f64]) -> Vec<f64> {
        (&self.weights * DVector::from_column_slice(psi)).iter().copied().collect()
    }
}

/// Gradient-descent settings for [`rsvd_linear_fit`].
#[derive(Debug, Clone, Copy)]
pub struct RsvdOptions {
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RsvdOptions {
    fn default() -> Self {
        Self { ridge: 1e-6, tol: 1e-12, max_iter: 10_000 }
    }
}

fn empirical_moments(psi: &[Vec<f64>], probes: &[Vec<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if psi.is_empty() || psi.len() != probes.len() {
        return Err(Error::Sampling(format!(
            "rsvd fit needs matching non-empty samples ({} basis rows, {} probe rows)",
            psi.len(),
            probes.len()
        )));
    }
    let p = psi[0].len();
    let l = probes[0].len();
    let mut gram = DMatrix::zeros(p, p);
    let mut cross = DMatrix::zeros(l, p);
    for (ps, om) in psi.iter().zip(probes) {
        if ps.len() != p {
            return Err(Error::Dimension { expected: p, got: ps.len() });
        }
        if om.len() != l {
            return Err(Error::Dimension { expected: l, got: om.len() });
        }
        let ps = DVector::from_column_slice(ps);
        let om = DVector::from_column_slice(om);
        gram += &ps * ps.transpose();
        cross += &om * ps.transpose();
    }
    let inv_n = 1.0 / psi.len() as f64;
    Ok((gram * inv_n, cross * inv_n))
}

/// Empirical objective `Ê||Wψ||² - 2Ê[ω(s')ᵀWψ] + λ||W||²_F`.
pub fn rsvd_objective(weights: &DMatrix<f64>, psi: &[Vec<f64>], probes: &[Vec<f64>], ridge: f64) -> Result<f64> {
    let (gram, cross) = empirical_moments(psi, probes)?;
    Ok(objective_from_moments(weights, &gram, &cross, ridge))
}

fn objective_from_moments(w: &DMatrix<f64>, gram: &DMatrix<f64>, cross: &DMatrix<f64>, ridge: f64) -> f64 {
    (w * gram * w.transpose()).trace() - 2.0 * (w * cross.transpose()).trace() + ridge * w.norm_squared()
}

/// Fit linear features `φ = Wψ` to random probes of the next window by
/// conjugate gradient on the randomized functional-SVD objective.
///
/// `psi[j]` is the basis evaluated at sample `j`'s `(s, a)` window and
/// `probes[j]` the probe functions evaluated at its next window.
pub fn rsvd_linear_fit(psi: &[Vec<f64>], probes: &[Vec<f64>], opts: RsvdOptions) -> Result<RsvdFit> {
    let (gram, cross) = empirical_moments(psi, probes)?;
    let p = gram.nrows();
    let reg = &gram + DMatrix::identity(p, p) * opts.ridge;
    let eig = reg.clone().symmetric_eigenvalues();
    let (lmax, lmin) = (eig.max(), eig.min());
    if !(lmin > 0.0) {
        return Err(Error::Solver {
            reason: "basis Gram matrix is singular; add a ridge".into(),
            condition: lmax / lmin.max(0.0),
        });
    }
    // Conjugate gradient on the quadratic; the objective's gradient is
    // 2(W(G+λI) - C) = -2R. The residual is recomputed every `restart` steps.
    let restart = 2 * p.max(1);
    let mut w = DMatrix::zeros(cross.nrows(), p);
    let mut resid = cross.clone();
    let mut dir = resid.clone();
    let mut rs = resid.norm_squared();
    let mut grad_norm = rs.sqrt();
    let mut iterations = 0;
    while grad_norm >= opts.tol && iterations < opts.max_iter {
        let a_dir = &dir * &reg;
        let step = rs / dir.dot(&a_dir);
        w += &dir * step;
        iterations += 1;
        if iterations % restart == 0 {
            resid = &cross - &w * &reg;
            dir = resid.clone();
            rs = resid.norm_squared();
        } else {
            resid -= a_dir * step;
            let rs_new = resid.norm_squared();
            dir = &resid + &dir * (rs_new / rs);
            rs = rs_new;
        }
        grad_norm = rs.sqrt();
    }
    if !(grad_norm < opts.tol) {
        return Err(Error::Solver {
            reason: format!("conjugate gradient stalled at gradient norm {grad_norm:e}"),
            condition: lmax / lmin,
        });
    }
    let objective = objective_from_moments(&w, &gram, &cross, opts.ridge);
    Ok(RsvdFit { weights: w, objective, iterations, gradient_norm: grad_norm })
}
