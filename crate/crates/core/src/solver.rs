//! The robust decomposition: a univariate master problem over the risk
//! parameter `θ` on top of a risk-sensitive subproblem evaluated from one
//! batch of uncontrolled trajectory costs.
//!
//! For `θ > θ*` the subproblem value is the soft-min free energy
//!
//! ```text
//! F(λ) = −λ·ln( (1/M)·Σ exp(−J_i/λ) ),     λ = θ·θ*/(θ − θ*)
//! ```
//!
//! where `θ*` solves `θ*·G R⁻¹ Gᵀ = Σ Σᵀ`. `λ → θ*` as `θ → ∞` (risk
//! neutral) and `λ → ∞` as `θ → θ*⁺`, where `F` tends to the mean cost. The
//! master problem minimizes `γ·θ + F(λ(θ))`.
//!
//! The search runs in `v = ln(θ/θ* − 1)`, where `θ = θ*(1 + eᵛ)` and
//! `λ = θ*(1 + e⁻ᵛ)`; both ends of the admissible domain are then resolved
//! on the same logarithmic scale without cancellation near the pole.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, DrpiError, Result};
use crate::models::DynamicsModel;

/// Relative distance from the pole `θ*` that the admissible domain keeps.
pub const SINGULAR_MARGIN: f64 = 1e-6;
/// Relative Frobenius residual accepted when solving for `θ*`.
const THETA_STAR_TOL: f64 = 1e-9;
/// Condition number above which the actuated projection counts as singular.
const MAX_CONDITION: f64 = 1e12;

/// Master line-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub grid_points: usize,
    pub rel_tol: f64,
    /// Upper end of the domain as a multiple of `θ*`.
    pub theta_max_factor: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_points: 200,
            rel_tol: 1e-8,
            theta_max_factor: 1e6,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(DrpiError::invalid("search.grid_points", "need at least 3 points"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(DrpiError::invalid("search.rel_tol", "must lie in (0, 1)"));
        }
        if !(self.theta_max_factor > 1.0 + 2.0 * SINGULAR_MARGIN && self.theta_max_factor.is_finite()) {
            return Err(DrpiError::invalid(
                "search.theta_max_factor",
                "must exceed 1 + 2e-6 and be finite",
            ));
        }
        Ok(())
    }

    /// Search bounds in `v = ln(θ/θ* − 1)`.
    fn v_bounds(&self) -> (f64, f64) {
        // offset keeps the lower end strictly inside the open domain
        let lo = SINGULAR_MARGIN.ln() + 1e-6;
        let hi = (self.theta_max_factor - 1.0).ln();
        (lo, hi)
    }
}

/// Outcome of the master problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolution {
    pub theta_hat: f64,
    pub theta_star: f64,
    pub lambda_eff: f64,
    pub master_value: f64,
    pub evaluations: usize,
}

/// The scalar `θ*` with `θ*·G R⁻¹ Gᵀ = Σ Σᵀ`, fitted by least squares over
/// the model's probe states and accepted only if every residual is below
/// `1e-9·‖ΣΣᵀ‖_F`.
pub fn theta_star(model: &DynamicsModel, r: &DMatrix<f64>) -> Result<f64> {
    check_len("control weight", model.control_dim(), r.nrows())?;
    check_len("control weight", model.control_dim(), r.ncols())?;
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| DrpiError::invalid("R", "control weight must be positive definite"))?
        .inverse();
    let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = model
        .probe_states()
        .iter()
        .map(|x| {
            let g = model.control_matrix(x, 0.0);
            let s = model.diffusion(x, 0.0);
            (&g * &r_inv * g.transpose(), &s * s.transpose())
        })
        .collect();
    let num: f64 = pairs.iter().map(|(a, b)| a.dot(b)).sum();
    let den: f64 = pairs.iter().map(|(a, _)| a.dot(a)).sum();
    if den <= 0.0 {
        return Err(DrpiError::NoLinearizingTheta {
            residual: f64::INFINITY,
        });
    }
    let theta = num / den;
    let worst = pairs
        .iter()
        .map(|(a, b)| (a * theta - b).norm() / b.norm())
        .fold(0.0, f64::max);
    if !(theta > 0.0) || worst > THETA_STAR_TOL {
        return Err(DrpiError::NoLinearizingTheta { residual: worst });
    }
    Ok(theta)
}

/// `λ = θ·θ*/(θ − θ*)`, defined for `θ > θ*(1 + 1e-6)`.
pub fn effective_temperature(theta: f64, theta_star: f64) -> Result<f64> {
    let limit = theta_star * (1.0 + SINGULAR_MARGIN);
    if !(theta > limit) {
        return Err(DrpiError::SingularTheta { theta, limit });
    }
    Ok(theta * theta_star / (theta - theta_star))
}

fn check_costs(costs: &[f64]) -> Result<()> {
    if costs.is_empty() {
        return Err(DrpiError::Empty("costs"));
    }
    check_finite("costs", costs)
}

fn check_temperature(lambda: f64) -> Result<()> {
    if lambda > 0.0 && !lambda.is_nan() {
        Ok(())
    } else {
        Err(DrpiError::invalid("lambda_eff", "temperature must be positive"))
    }
}

fn min_cost(costs: &[f64]) -> f64 {
    costs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Soft-min free energy without input checks.
///
/// Shifted by the minimum and written as `m − λ·ln1p(mean(expm1(−(J−m)/λ)))`
/// so it stays accurate both for `λ` far below the cost spread and for `λ`
/// so large that the result approaches the mean.
fn free_energy_unchecked(costs: &[f64], lambda: f64) -> f64 {
    let m = min_cost(costs);
    let inv = 1.0 / lambda;
    let z: f64 = costs.iter().map(|&j| (-(j - m) * inv).exp_m1()).sum::<f64>() / costs.len() as f64;
    m - lambda * z.ln_1p()
}

/// `−λ·ln((1/M)·Σ exp(−J_i/λ))`; lies between `min J` and `mean J`.
pub fn free_energy(costs: &[f64], lambda_eff: f64) -> Result<f64> {
    check_costs(costs)?;
    check_temperature(lambda_eff)?;
    Ok(free_energy_unchecked(costs, lambda_eff))
}

/// `γ·θ + F(costs, λ(θ))`.
pub fn master_objective(gamma: f64, theta: f64, theta_star: f64, costs: &[f64]) -> Result<f64> {
    check_costs(costs)?;
    let lambda = effective_temperature(theta, theta_star)?;
    Ok(gamma * theta + free_energy_unchecked(costs, lambda))
}

/// Golden-section minimization of `f` on `[a, b]`; returns `(x, f(x), evals)`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    while (b - a) > rel_tol * (1.0 + 0.5 * (a + b).abs()) && evals < 500 {
        // ties move right, toward larger θ
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    if fc < fd {
        (c, fc, evals)
    } else {
        (d, fd, evals)
    }
}

/// Solves `min_θ γ·θ + F(costs, λ(θ))` over `(θ*(1+1e-6), θ*·factor]`.
///
/// A uniform grid in `v = ln(θ/θ* − 1)` brackets the minimum, then
/// golden-section search refines it. Ties go to the larger `θ`. With
/// `γ = 0` the risk-neutral endpoint is returned directly: `θ̂ = θ_max`,
/// `λ = θ*`.
pub fn solve_master(
    gamma: f64,
    theta_star: f64,
    costs: &[f64],
    search: &SearchConfig,
) -> Result<ThetaSolution> {
    check_costs(costs)?;
    search.validate()?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(DrpiError::invalid("gamma", "must be finite and nonnegative"));
    }
    if !(theta_star > 0.0 && theta_star.is_finite()) {
        return Err(DrpiError::invalid("theta_star", "must be positive"));
    }

    if gamma == 0.0 {
        return Ok(ThetaSolution {
            theta_hat: theta_star * search.theta_max_factor,
            theta_star,
            lambda_eff: theta_star,
            master_value: free_energy_unchecked(costs, theta_star),
            evaluations: 1,
        });
    }

    let objective = |v: f64| {
        let theta = theta_star * (1.0 + v.exp());
        let lambda = theta_star * (1.0 + (-v).exp());
        gamma * theta + free_energy_unchecked(costs, lambda)
    };

    let (lo, hi) = search.v_bounds();
    let n = search.grid_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&v| objective(v)).collect();
    let mut best = 0;
    for (i, &val) in values.iter().enumerate() {
        if val <= values[best] {
            best = i;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let (v_ref, f_ref, evals) = golden_section(objective, a, b, search.rel_tol);

    let (v_hat, value) = if f_ref < values[best] {
        (v_ref, f_ref)
    } else {
        (grid[best], values[best])
    };
    Ok(ThetaSolution {
        theta_hat: theta_star * (1.0 + v_hat.exp()),
        theta_star,
        lambda_eff: theta_star * (1.0 + (-v_hat).exp()),
        master_value: value,
        evaluations: n + evals,
    })
}

/// Normalized soft-min weights `r_i ∝ exp(−J_i/λ)`.
pub fn path_integral_weights(costs: &[f64], lambda_eff: f64) -> Result<Vec<f64>> {
    check_costs(costs)?;
    check_temperature(lambda_eff)?;
    let m = min_cost(costs);
    let inv = 1.0 / lambda_eff;
    let mut w: Vec<f64> = costs.iter().map(|&j| (-(j - m) * inv).exp()).collect();
    let total: f64 = w.iter().sum();
    for r in &mut w {
        *r /= total;
    }
    Ok(w)
}

/// Control estimate `u = R⁻¹G_cᵀ(G_c R⁻¹ G_cᵀ)⁻¹ Σ_c Σ_i r_i ε_i / √dt`.
///
/// For channel-noise models (`Σ = G·S`) the prefactor collapses to `S`, so
/// `u = S·Σ_i r_i ε_i / √dt`. Otherwise `G_c`, `Σ_c` are the actuated rows.
pub fn control_from_weights(
    model: &DynamicsModel,
    r: &DMatrix<f64>,
    x_k: &[f64],
    weights: &[f64],
    first_step_noise: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let (p, k) = (model.noise_dim(), model.control_dim());
    check_len("state", model.state_dim(), x_k.len())?;
    check_len("control weight", k, r.nrows())?;
    check_len("first-step noise", weights.len() * p, first_step_noise.len())?;
    if weights.is_empty() {
        return Err(DrpiError::Empty("weights"));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) || (total - 1.0).abs() > 1e-9 {
        return Err(DrpiError::invalid("weights", "must lie on the probability simplex"));
    }
    if !(dt > 0.0) {
        return Err(DrpiError::invalid("dt", "step size must be positive"));
    }

    let mut mean_eps = DVector::zeros(p);
    for (w, eps) in weights.iter().zip(first_step_noise.chunks_exact(p)) {
        for j in 0..p {
            mean_eps[j] += w * eps[j];
        }
    }
    let scale = 1.0 / dt.sqrt();

    let u = match model.channel() {
        Some(s) => s * mean_eps * scale,
        None => {
            let idx = model.actuated_indices();
            let g = model.control_matrix(x_k, 0.0).select_rows(idx);
            let sigma = model.diffusion(x_k, 0.0).select_rows(idx);
            let r_inv = r
                .clone()
                .try_inverse()
                .ok_or(DrpiError::SingularProjection {
                    condition: f64::INFINITY,
                })?;
            let gram = &g * &r_inv * g.transpose();
            let sv = gram.clone().svd(false, false).singular_values;
            let condition = sv.max() / sv.min();
            if !(condition <= MAX_CONDITION) {
                return Err(DrpiError::SingularProjection { condition });
            }
            let gram_inv = gram
                .try_inverse()
                .ok_or(DrpiError::SingularProjection { condition })?;
            &r_inv * g.transpose() * gram_inv * sigma * mean_eps * scale
        }
    };
    Ok(u.iter().copied().collect())
}
