//! Closed-form references on the Euler-discretized scalar LQ problem
//!
//! ```text
//! x_{j+1} = (1 + a·dt)·x_j + b·dt·u_j + σ·√dt·w_j
//! J = Σ_{j=1}^{K−1} ½q_x·x_j²·dt + Σ_{j=0}^{K−1} ½r·u_j²·dt + ½q_T·x_K²
//! ```
//!
//! The stage accounting is the rollout engine's: the start state carries no
//! cost and the terminal state carries only `ψ`. Working on the discrete
//! chain means the references share the simulator's discretization error.
//!
//! Writing `S` for the curvature of the cost-to-go including the state cost
//! at `x_{j+1}`, the recursions are
//!
//! ```text
//! risk neutral:   g = b·S·α/(r + b²·S·dt)      P = α²·S·r/(r + b²·S·dt)
//! exponential θ:  S̃ = S/(1 − S·σ²·dt/θ)        then the same with S̃
//! ```
//!
//! with `α = 1 + a·dt` and `S = q_x·dt + P` before the last step, `S = q_T`
//! at it.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DrpiError, Result};
use crate::rollout::{stream_rng, SeedSpec, StreamKind};

/// Default Gauss–Hermite order per dimension.
pub const QUADRATURE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLQProblem {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub q_x: f64,
    pub r: f64,
    pub q_t: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl ScalarLQProblem {
    /// The unit problem: `a = 0`, `b = σ = q_x = r = 1`, `q_T = 0`, `T = 1`.
    pub fn unit(dt: f64) -> Self {
        ScalarLQProblem {
            a: 0.0,
            b: 1.0,
            sigma: 1.0,
            q_x: 1.0,
            r: 1.0,
            q_t: 0.0,
            horizon: 1.0,
            dt,
        }
    }

    /// `K = T/dt`, required to be a positive integer.
    pub fn steps(&self) -> Result<usize> {
        self.validate()?;
        Ok((self.horizon / self.dt).round() as usize)
    }

    /// `θ* = σ²·r/b²`.
    pub fn theta_star(&self) -> f64 {
        self.sigma * self.sigma * self.r / (self.b * self.b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.sigma, self.q_x, self.r, self.q_t, self.horizon, self.dt];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DrpiError::NonFinite("LQ problem"));
        }
        if !(self.r > 0.0) {
            return Err(DrpiError::invalid("r", "must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(DrpiError::invalid("sigma", "must be positive"));
        }
        if self.b == 0.0 {
            return Err(DrpiError::invalid("b", "must be non-zero"));
        }
        if self.q_x < 0.0 || self.q_t < 0.0 {
            return Err(DrpiError::invalid("q", "state weights must be nonnegative"));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(DrpiError::invalid("dt", "step and horizon must be positive"));
        }
        let k = (self.horizon / self.dt).round();
        if k < 1.0 || (k * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(DrpiError::invalid("dt", "must divide the horizon"));
        }
        Ok(())
    }
}

/// Feedback gains `g_0..g_{K−1}` (`u_j = −g_j·x_j`) plus the value
/// `½·P_0·x² + c_0` at the start.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPolicy {
    pub gains: Vec<f64>,
    pub p0: f64,
    pub c0: f64,
}

impl QuadraticPolicy {
    pub fn value(&self, x0: f64) -> f64 {
        0.5 * self.p0 * x0 * x0 + self.c0
    }
}

fn backward(prob: &ScalarLQProblem, theta: Option<f64>) -> Result<QuadraticPolicy> {
    let k = prob.steps()?;
    let ScalarLQProblem {
        a, b, sigma, q_x, r, q_t, dt, ..
    } = *prob;
    let alpha = 1.0 + a * dt;
    let var = sigma * sigma * dt;
    let mut gains = vec![0.0; k];
    let mut p = 0.0;
    let mut c = 0.0;
    for j in (0..k).rev() {
        let s = if j + 1 == k { q_t } else { q_x * dt + p };
        let s_eff = match theta {
            None => {
                c += 0.5 * s * var;
                s
            }
            Some(theta) => {
                let shrink = 1.0 - s * var / theta;
                if !(shrink > 0.0) {
                    return Err(DrpiError::RiskBreakdown { step: j });
                }
                c -= 0.5 * theta * shrink.ln();
                s / shrink
            }
        };
        let den = r + b * b * s_eff * dt;
        gains[j] = b * s_eff * alpha / den;
        p = alpha * alpha * s_eff * r / den;
    }
    Ok(QuadraticPolicy { gains, p0: p, c0: c })
}

/// Risk-neutral feedback gains from the backward Riccati difference equation.
pub fn lqr_gains(prob: &ScalarLQProblem) -> Result<Vec<f64>> {
    Ok(backward(prob, None)?.gains)
}

/// Gains and value coefficients of the risk-neutral problem.
pub fn lqr_policy(prob: &ScalarLQProblem) -> Result<QuadraticPolicy> {
    backward(prob, None)
}

/// Optimal expected cost `E[J]` from `x0`.
pub fn lqr_value(prob: &ScalarLQProblem, x0: f64) -> Result<f64> {
    Ok(backward(prob, None)?.value(x0))
}

/// Gains and the optimal `θ·ln E[exp(J/θ)]` from `x0`.
///
/// Fails with [`DrpiError::RiskBreakdown`] once `θ` is small enough that the
/// exponential cost has infinite expectation.
pub fn leqg_gains_and_value(prob: &ScalarLQProblem, theta: f64, x0: f64) -> Result<(Vec<f64>, f64)> {
    let policy = leqg_policy(prob, theta)?;
    let value = policy.value(x0);
    Ok((policy.gains, value))
}

pub fn leqg_policy(prob: &ScalarLQProblem, theta: f64) -> Result<QuadraticPolicy> {
    if !(theta > 0.0) {
        return Err(DrpiError::invalid("theta", "must be positive"));
    }
    if theta == f64::INFINITY {
        return backward(prob, None);
    }
    backward(prob, Some(theta))
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the standard
/// normal density (Golub–Welsch). Weights sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for i in 1..n {
        let off = (i as f64).sqrt();
        jacobi[(i, i - 1)] = off;
        jacobi[(i - 1, i)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(z, w)| (z, w / total)).unzip()
}

/// Costs and weights of every quadrature path of the uncontrolled chain.
fn quadrature_paths(prob: &ScalarLQProblem, steps: usize, x0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    prob.validate()?;
    if !(1..=3).contains(&steps) {
        return Err(DrpiError::invalid("steps", "quadrature supports 1 to 3 steps"));
    }
    let (z, w) = gauss_hermite(QUADRATURE_NODES);
    let alpha = 1.0 + prob.a * prob.dt;
    let scale = prob.sigma * prob.dt.sqrt();
    let total = QUADRATURE_NODES.pow(steps as u32);
    let mut costs = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut x = x0;
        let mut cost = 0.0;
        let mut weight = 1.0;
        for s in 0..steps {
            let node = idx % QUADRATURE_NODES;
            idx /= QUADRATURE_NODES;
            x = alpha * x + scale * z[node];
            weight *= w[node];
            cost += if s + 1 < steps {
                0.5 * prob.q_x * x * x * prob.dt
            } else {
                0.5 * prob.q_t * x * x
            };
        }
        costs.push(cost);
        weights.push(weight);
    }
    Ok((costs, weights))
}

/// `−λ·ln E[exp(−J/λ)]` over `steps` uncontrolled steps from `x0`, by
/// tensor-product Gauss–Hermite quadrature.
pub fn free_energy_quadrature(prob: &ScalarLQProblem, steps: usize, lambda_eff: f64, x0: f64) -> Result<f64> {
    if !(lambda_eff > 0.0) {
        return Err(DrpiError::invalid("lambda_eff", "must be positive"));
    }
    let (costs, weights) = quadrature_paths(prob, steps, x0)?;
    let m = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let z: f64 = costs
        .iter()
        .zip(&weights)
        .map(|(j, w)| w * (-(j - m) / lambda_eff).exp_m1())
        .sum();
    Ok(m - lambda_eff * z.ln_1p())
}

/// `E[J]` over the same quadrature paths.
pub fn expected_cost_quadrature(prob: &ScalarLQProblem, steps: usize, x0: f64) -> Result<f64> {
    let (costs, weights) = quadrature_paths(prob, steps, x0)?;
    Ok(costs.iter().zip(&weights).map(|(j, w)| j * w).sum())
}

/// Sampled closed-loop costs under the linear feedback `u_j = −g_j·x_j`.
///
/// Path `i` draws its noise from the rollout stream `i` at `seed`.
pub fn feedback_cost_samples(
    prob: &ScalarLQProblem,
    gains: &[f64],
    x0: f64,
    samples: usize,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    let k = prob.steps()?;
    if gains.len() != k {
        return Err(DrpiError::DimensionMismatch {
            what: "gains",
            expected: k,
            got: gains.len(),
        });
    }
    let alpha = 1.0 + prob.a * prob.dt;
    let scale = prob.sigma * prob.dt.sqrt();
    Ok((0..samples)
        .map(|i| {
            let mut rng = stream_rng(seed, StreamKind::Rollout, i as u64);
            let mut x = x0;
            let mut cost = 0.0;
            for (j, g) in gains.iter().enumerate() {
                let u = -g * x;
                cost += 0.5 * prob.r * u * u * prob.dt;
                let w: f64 = rng.sample(StandardNormal);
                x = alpha * x + prob.b * prob.dt * u + scale * w;
                cost += if j + 1 < k {
                    0.5 * prob.q_x * x * x * prob.dt
                } else {
                    0.5 * prob.q_t * x * x
                };
            }
            cost
        })
        .collect())
}
