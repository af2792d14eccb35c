//! Control-affine stochastic dynamics
//!
//! ```text
//! dx = f(x,t) dt + G(x,t) u dt + Σ(x,t) dξ,     dξ = μ dt + dw
//! ```
//!
//! discretized with the Euler–Maruyama step
//! `x' = x + f·dt + G·u·dt + Σ·Δξ`. Every model in the registry is
//! time-invariant; evaluators still take `t` so time-varying models fit the
//! same interface.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_finite, check_len, DrpiError, Result};

/// Tolerance for the channel identity `Σ = G·S` at probe states.
const CHANNEL_TOL: f64 = 1e-12;
/// Relative singular-value floor for the full-column-rank checks.
const RANK_TOL: f64 = 1e-10;
const PROBE_SEED: u64 = 0x5eed_0f9b_0be5;
const PROBE_COUNT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// Planar particle with velocity states, `n = 4, k = p = 2`.
    DoubleIntegrator,
    /// Planar unicycle `[px, py, heading]`, `n = 3, k = p = 2`.
    Unicycle,
    /// `dx = a·x dt + b·u dt + σ dξ`, the 1-D linear-quadratic test model.
    ScalarLq,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::DoubleIntegrator => "double_integrator",
            ModelFamily::Unicycle => "unicycle",
            ModelFamily::ScalarLq => "scalar_lq",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = DrpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double_integrator" => Ok(ModelFamily::DoubleIntegrator),
            "unicycle" => Ok(ModelFamily::Unicycle),
            "scalar_lq" => Ok(ModelFamily::ScalarLq),
            other => Err(DrpiError::UnknownModel(other.to_string())),
        }
    }
}

/// Family parameters. Only `scalar_lq` reads them; the navigation models
/// have no free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            a: 0.0,
            b: 1.0,
            sigma: 1.0,
        }
    }
}

/// A control-affine SDE descriptor.
///
/// When `channel` is set, `Σ(x,t) = G(x,t)·S` for the constant `k×p` matrix
/// `S`, i.e. the noise enters through the control channels. Both navigation
/// models are of this form with `S = I`.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    family: ModelFamily,
    params: ModelParams,
    n: usize,
    k: usize,
    p: usize,
    actuated_indices: Vec<usize>,
    channel: Option<DMatrix<f64>>,
}

/// Builds a model from the registry and checks its invariants at probe states.
pub fn make_model(family: ModelFamily, params: ModelParams) -> Result<DynamicsModel> {
    let model = match family {
        ModelFamily::DoubleIntegrator => DynamicsModel {
            family,
            params,
            n: 4,
            k: 2,
            p: 2,
            actuated_indices: vec![2, 3],
            channel: Some(DMatrix::identity(2, 2)),
        },
        // The row subset of G for the unicycle is rank deficient, so the
        // control law always uses the channel form. Every state is driven
        // directly by some control channel.
        ModelFamily::Unicycle => DynamicsModel {
            family,
            params,
            n: 3,
            k: 2,
            p: 2,
            actuated_indices: vec![0, 1, 2],
            channel: Some(DMatrix::identity(2, 2)),
        },
        ModelFamily::ScalarLq => {
            let ModelParams { a, b, sigma } = params;
            if !(a.is_finite() && b.is_finite() && sigma.is_finite()) {
                return Err(DrpiError::NonFinite("scalar_lq parameters"));
            }
            if b == 0.0 {
                return Err(DrpiError::invalid("b", "control gain must be non-zero"));
            }
            if sigma <= 0.0 {
                return Err(DrpiError::invalid("sigma", "noise scale must be positive"));
            }
            DynamicsModel {
                family,
                params,
                n: 1,
                k: 1,
                p: 1,
                actuated_indices: vec![0],
                channel: Some(DMatrix::from_element(1, 1, sigma / b)),
            }
        }
    };
    model.validate()?;
    Ok(model)
}

/// Looks a family up by name and builds it.
pub fn make_model_by_name(name: &str, params: ModelParams) -> Result<DynamicsModel> {
    make_model(name.parse()?, params)
}

impl DynamicsModel {
    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        self.family.as_str()
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.k
    }

    pub fn noise_dim(&self) -> usize {
        self.p
    }

    pub fn actuated_indices(&self) -> &[usize] {
        &self.actuated_indices
    }

    /// The constant channel matrix `S` with `Σ = G·S`, if the model has one.
    pub fn channel(&self) -> Option<&DMatrix<f64>> {
        self.channel.as_ref()
    }

    pub fn is_channel_noise(&self) -> bool {
        self.channel.is_some()
    }

    /// The same dynamics with the channel form disabled, so the control law
    /// falls back to actuated-row submatrices.
    pub fn without_channel(mut self) -> Self {
        self.channel = None;
        self
    }

    /// Passive drift `f(x,t)`.
    pub fn drift(&self, x: &[f64], _t: f64) -> Vec<f64> {
        match self.family {
            ModelFamily::DoubleIntegrator => vec![x[2], x[3], 0.0, 0.0],
            ModelFamily::Unicycle => vec![0.0; 3],
            ModelFamily::ScalarLq => vec![self.params.a * x[0]],
        }
    }

    /// Control transition matrix `G(x,t)`, `n×k`.
    pub fn control_matrix(&self, x: &[f64], _t: f64) -> DMatrix<f64> {
        match self.family {
            ModelFamily::DoubleIntegrator => DMatrix::from_row_slice(
                4,
                2,
                &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            ),
            ModelFamily::Unicycle => {
                let (s, c) = x[2].sin_cos();
                DMatrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0])
            }
            ModelFamily::ScalarLq => DMatrix::from_element(1, 1, self.params.b),
        }
    }

    /// Diffusion matrix `Σ(x,t)`, `n×p`.
    pub fn diffusion(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        match self.family {
            ModelFamily::DoubleIntegrator | ModelFamily::Unicycle => self.control_matrix(x, t),
            ModelFamily::ScalarLq => DMatrix::from_element(1, 1, self.params.sigma),
        }
    }

    /// Fused Euler–Maruyama update `x + f·dt + G·u·dt + Σ·dxi` into `out`.
    ///
    /// No validation; callers guarantee the slice lengths. Each component is
    /// evaluated in the order `((x + f·dt) + (G·u)·dt) + Σ·dxi`, the same
    /// order [`em_step_general`] uses.
    #[inline]
    pub fn step_into(&self, x: &[f64], _t: f64, u: &[f64], dxi: &[f64], dt: f64, out: &mut [f64]) {
        match self.family {
            ModelFamily::DoubleIntegrator => {
                out[0] = x[0] + x[2] * dt;
                out[1] = x[1] + x[3] * dt;
                out[2] = x[2] + u[0] * dt + dxi[0];
                out[3] = x[3] + u[1] * dt + dxi[1];
            }
            ModelFamily::Unicycle => {
                let (s, c) = x[2].sin_cos();
                out[0] = x[0] + (c * u[0]) * dt + c * dxi[0];
                out[1] = x[1] + (s * u[0]) * dt + s * dxi[0];
                out[2] = x[2] + u[1] * dt + dxi[1];
            }
            ModelFamily::ScalarLq => {
                let ModelParams { a, b, sigma } = self.params;
                out[0] = x[0] + (a * x[0]) * dt + (b * u[0]) * dt + sigma * dxi[0];
            }
        }
    }

    /// Deterministic probe states used for the numerical invariant checks.
    pub fn probe_states(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        (0..PROBE_COUNT)
            .map(|_| (0..self.n).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect()
    }

    /// Checks rank and channel invariants at the probe states.
    pub fn validate(&self) -> Result<()> {
        if self.actuated_indices.len() > self.n {
            return Err(DrpiError::invalid("actuated_indices", "more entries than states"));
        }
        let mut seen = vec![false; self.n];
        for &i in &self.actuated_indices {
            if i >= self.n || seen[i] {
                return Err(DrpiError::invalid(
                    "actuated_indices",
                    format!("index {i} out of range or repeated"),
                ));
            }
            seen[i] = true;
        }
        for x in self.probe_states() {
            let g = self.control_matrix(&x, 0.0);
            let sigma = self.diffusion(&x, 0.0);
            if !full_column_rank(&g) {
                return Err(DrpiError::invalid("G", "control matrix is rank deficient"));
            }
            if !full_column_rank(&sigma) {
                return Err(DrpiError::invalid("Sigma", "diffusion matrix is rank deficient"));
            }
            if let Some(s) = &self.channel {
                let gap = (&g * s - &sigma).amax();
                if gap > CHANNEL_TOL {
                    return Err(DrpiError::invalid(
                        "channel",
                        format!("Sigma != G*S at a probe state (gap {gap:e})"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn full_column_rank(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    max > 0.0 && sv.iter().all(|&s| s > RANK_TOL * max)
}

/// One Euler–Maruyama step with input validation.
pub fn em_step(
    model: &DynamicsModel,
    x: &[f64],
    t: f64,
    u: &[f64],
    dxi: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    check_len("state", model.n, x.len())?;
    check_len("control", model.k, u.len())?;
    check_len("disturbance increment", model.p, dxi.len())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DrpiError::invalid("dt", "step size must be positive and finite"));
    }
    check_finite("state", x)?;
    check_finite("control", u)?;
    check_finite("disturbance increment", dxi)?;
    let mut out = vec![0.0; model.n];
    model.step_into(x, t, u, dxi, dt, &mut out);
    Ok(out)
}

/// The same update assembled from the matrix evaluators. Slow; kept as the
/// reference for the fused path.
pub fn em_step_general(
    model: &DynamicsModel,
    x: &[f64],
    t: f64,
    u: &[f64],
    dxi: &[f64],
    dt: f64,
) -> Vec<f64> {
    let f = model.drift(x, t);
    let g = model.control_matrix(x, t);
    let sigma = model.diffusion(x, t);
    (0..model.n)
        .map(|i| {
            let gu: f64 = (0..model.k).map(|j| g[(i, j)] * u[j]).sum();
            let sd: f64 = (0..model.p).map(|j| sigma[(i, j)] * dxi[j]).sum();
            x[i] + f[i] * dt + gu * dt + sd
        })
        .collect()
}
