//! Discounted LQR ground truth for the linear thermal building.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::actor::LocalizedGaussianPolicy;
use crate::env::thermal::ThermalEnv;
use crate::env::NetworkEnv;
use crate::error::{Error, Result};

pub const RICCATI_TOL: f64 = 1e-10;
pub const RICCATI_MAX_ITER: usize = 100_000;

/// `x' = A x + B u + w`, `w ~ N(0, Σ)`, stage cost `xᵀQx + uᵀRu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    /// Covariance of the zero-mean initial state.
    pub init_cov: DMatrix<f64>,
    pub gamma: f64,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (name, m) in [("A", &self.a), ("B", &self.b), ("Q", &self.q), ("R", &self.r)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension { expected: n, got: m.nrows().max(m.ncols()) });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("{name} has non-finite entries")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Parameter(format!("discount must lie in (0, 1), got {}", self.gamma)));
        }
        if (&self.q - self.q.transpose()).amax() > 1e-12 || (&self.r - self.r.transpose()).amax() > 1e-12 {
            return Err(Error::Parameter("Q and R must be symmetric".into()));
        }
        if self.r.clone().cholesky().is_none() {
            return Err(Error::Parameter("R must be positive definite".into()));
        }
        Ok(())
    }
}

/// Linear-quadratic form of a thermal building with zero outdoor and target
/// temperatures and unbounded actions.
pub fn hvac_to_lqr(env: &ThermalEnv) -> Result<LinearSystem> {
    if env.outdoor() != 0.0 || env.zones().iter().any(|z| z.target != 0.0) {
        return Err(Error::Unsupported("LQR oracle needs zero outdoor and target temperatures".into()));
    }
    let (lo, hi) = env.action_bounds();
    if lo.is_finite() || hi.is_finite() {
        return Err(Error::Unsupported("LQR oracle needs unbounded actions".into()));
    }
    let n = env.n_agents();
    let topo = env.topology();
    let mut a = DMatrix::identity(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    let mut noise_cov = DMatrix::zeros(n, n);
    for (i, z) in env.zones().iter().enumerate() {
        let scale = env.delta() / z.capacitance;
        a[(i, i)] -= scale / z.window_resistance;
        for &j in topo.neighbors(i) {
            let c = scale / env.wall_resistance();
            a[(i, i)] -= c;
            a[(i, j)] += c;
        }
        b[(i, i)] = scale * z.input_gain;
        q[(i, i)] = z.tradeoff;
        noise_cov[(i, i)] = env.noise_std(i).powi(2);
    }
    let init_cov = DMatrix::identity(n, n) * env.init_std().powi(2);
    Ok(LinearSystem { a, b, q, r: DMatrix::identity(n, n), noise_cov, init_cov, gamma: env.discount() })
}

/// Fixed point `P` and gain `K` (control `u = -K x`).
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// `||P - F(P)||∞` at return.
    pub residual: f64,
}

fn gain(sys: &LinearSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = sys.gamma;
    let s = &sys.r + g * sys.b.transpose() * p * &sys.b;
    let rhs = g * sys.b.transpose() * p * &sys.a;
    s.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Oracle("R + γBᵀPB is not positive definite".into()))
}

/// One application of the discounted Riccati map.
pub fn riccati_map(sys: &LinearSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = gain(sys, p)?;
    let g = sys.gamma;
    let apa = sys.a.transpose() * p * &sys.a;
    let cross = sys.a.transpose() * p * &sys.b * &k;
    let next = &sys.q + g * (apa - cross);
    Ok((&next + next.transpose()) * 0.5)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Value iteration on `P` from `P₀ = Q` until `||ΔP||∞ < tol`.
pub fn riccati_solve(sys: &LinearSystem, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    sys.validate()?;
    let mut p = sys.q.clone();
    for it in 1..=max_iter {
        let next = riccati_map(sys, &p)?;
        let change = inf_norm(&(&next - &p));
        if !change.is_finite() {
            return Err(Error::Oracle("Riccati iteration diverged".into()));
        }
        p = next;
        if change < tol {
            let residual = inf_norm(&(&p - riccati_map(sys, &p)?));
            let k = gain(sys, &p)?;
            return Ok(RiccatiSolution { p, k, iterations: it, residual });
        }
    }
    Err(Error::Oracle(format!("Riccati iteration did not converge in {max_iter} iterations")))
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `P_K` of `u = -K x`: the fixed point of `P = Q + KᵀRK + γ LᵀPL`, `L = A - BK`.
pub fn policy_value_matrix(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sys.validate()?;
    let l = &sys.a - &sys.b * k;
    let rho = spectral_radius(&(&l * sys.gamma.sqrt()));
    if rho >= 1.0 {
        return Err(Error::Oracle(format!("closed loop is not discount-stable (radius {rho:.6})")));
    }
    let stage = &sys.q + k.transpose() * &sys.r * k;
    let mut p = stage.clone();
    for _ in 0..RICCATI_MAX_ITER {
        let next = &stage + sys.gamma * l.transpose() * &p * &l;
        let change = inf_norm(&(&next - &p));
        p = next;
        if change <= 1e-13 * (1.0 + inf_norm(&p)) {
            return Ok((&p + p.transpose()) * 0.5);
        }
    }
    Err(Error::Oracle("Lyapunov iteration did not converge".into()))
}

/// `E[x₀ᵀ P_K x₀] + γ/(1-γ) · tr(P_K Σ)`.
pub fn lqr_cost(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<f64> {
    let p = policy_value_matrix(sys, k)?;
    Ok((&p * &sys.init_cov).trace() + sys.gamma / (1.0 - sys.gamma) * (&p * &sys.noise_cov).trace())
}

/// Linear policy `a_i = -Σ_j K_ij x_j` restricted to each agent's window.
///
/// Exact when every window covers the whole network.
pub fn policy_from_gain<E: NetworkEnv + ?Sized>(
    env: &E,
    k: &DMatrix<f64>,
    kappa_pi: usize,
    std: f64,
) -> Result<LocalizedGaussianPolicy> {
    let mut policy = LocalizedGaussianPolicy::for_env(env, kappa_pi, std)?;
    for i in 0..env.n_agents() {
        let mut theta: Vec<f64> = policy.window(i).iter().map(|&j| -k[(i, j)]).collect();
        theta.push(0.0);
        policy.set_params(i, &theta)?;
    }
    Ok(policy)
}

/// Serialized oracle output.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub gamma: f64,
    pub gain: Vec<Vec<f64>>,
    pub p_trace: f64,
    pub optimal_cost: f64,
    pub zero_cost: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub fn oracle_report(sys: &LinearSystem) -> Result<OracleReport> {
    let sol = riccati_solve(sys, RICCATI_TOL, RICCATI_MAX_ITER)?;
    let n = sys.dim();
    Ok(OracleReport {
        n,
        gamma: sys.gamma,
        gain: sol.k.row_iter().map(|r| r.iter().copied().collect()).collect(),
        p_trace: sol.p.trace(),
        optimal_cost: lqr_cost(sys, &sol.k)?,
        zero_cost: lqr_cost(sys, &DMatrix::zeros(n, n))?,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}
