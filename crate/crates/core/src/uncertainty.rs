//! Drift estimation from disturbance increments and the KL ambiguity radius.
//!
//! With a constant true drift `μ`, increments are `Δξ ~ N(μ·Δt, Δt·I)` and
//! the nominal law uses the sample drift `μ̂`. Girsanov reduces the KL
//! divergence between the two path laws on `[0, T]` to `(T/2)·‖μ̂ − μ‖²`,
//! which gives the finite-sample radius
//!
//! ```text
//! γ(ε) = (√p / N)·ln(2p/ε),     P[true law in the ball] ≥ 1 − 2p·exp(−γN/√p)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{check_finite, check_len, DrpiError, Result};

/// Running estimate of the disturbance drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    mu_hat: Vec<f64>,
    count: u64,
    dt: f64,
}

impl DriftEstimate {
    /// The zero prior: no data absorbed yet.
    pub fn prior(p: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DrpiError::invalid("dt", "sampling interval must be positive"));
        }
        Ok(DriftEstimate {
            mu_hat: vec![0.0; p],
            count: 0,
            dt,
        })
    }

    /// A fixed drift that is not updated from data (count 0).
    pub fn fixed(mu_hat: Vec<f64>, dt: f64) -> Result<Self> {
        check_finite("drift", &mu_hat)?;
        let mut est = Self::prior(mu_hat.len(), dt)?;
        est.mu_hat = mu_hat;
        Ok(est)
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    /// Absorbs one increment: `μ̂ ← μ̂ + (Δξ/Δt − μ̂)/(count + 1)`.
    pub fn update(&mut self, dxi: &[f64]) -> Result<()> {
        check_len("disturbance increment", self.mu_hat.len(), dxi.len())?;
        check_finite("disturbance increment", dxi)?;
        self.count += 1;
        let n = self.count as f64;
        for (m, d) in self.mu_hat.iter_mut().zip(dxi) {
            *m += (d / self.dt - *m) / n;
        }
        Ok(())
    }
}

/// `μ̂ = Σ_{i,k} Δξ⁽ⁱ⁾(k) / (N·K·Δt)` over `N` sequences of `K` increments.
pub fn estimate_drift_batch(sequences: &[Vec<Vec<f64>>], dt: f64) -> Result<DriftEstimate> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DrpiError::invalid("dt", "sampling interval must be positive"));
    }
    let p = sequences
        .iter()
        .flat_map(|s| s.first())
        .map(|d| d.len())
        .next()
        .ok_or(DrpiError::Empty("disturbance data"))?;
    let mut sum = vec![0.0; p];
    let mut count = 0u64;
    for dxi in sequences.iter().flatten() {
        check_len("disturbance increment", p, dxi.len())?;
        check_finite("disturbance increment", dxi)?;
        for (s, d) in sum.iter_mut().zip(dxi) {
            *s += d;
        }
        count += 1;
    }
    let scale = count as f64 * dt;
    Ok(DriftEstimate {
        mu_hat: sum.into_iter().map(|s| s / scale).collect(),
        count,
        dt,
    })
}

/// Functional form of [`DriftEstimate::update`].
pub fn update_drift_online(est: &DriftEstimate, dxi: &[f64]) -> Result<DriftEstimate> {
    let mut next = est.clone();
    next.update(dxi)?;
    Ok(next)
}

/// Smallest KL radius that contains the true law with probability `1 − ε`.
pub fn gamma_for_confidence(p: usize, n: usize, epsilon: f64) -> Result<f64> {
    if p == 0 {
        return Err(DrpiError::invalid("p", "dimension must be positive"));
    }
    if n == 0 {
        return Err(DrpiError::invalid("N", "sample count must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DrpiError::invalid("epsilon", "must lie in (0, 1)"));
    }
    let p = p as f64;
    Ok(p.sqrt() / n as f64 * (2.0 * p / epsilon).ln())
}

/// `1 − 2p·exp(−γN/√p)`. Negative values mean the bound is vacuous and are
/// returned unchanged.
pub fn coverage_lower_bound(gamma: f64, n: usize, p: usize) -> f64 {
    let p = p as f64;
    1.0 - 2.0 * p * (-gamma * n as f64 / p.sqrt()).exp()
}

/// KL divergence between Brownian path laws with drifts `mu_hat` and `mu`
/// on `[0, T]`: `(T/2)·‖μ̂ − μ‖²`.
pub fn kl_drifted_brownian(mu_hat: &[f64], mu: &[f64], horizon: f64) -> Result<f64> {
    check_len("drift", mu_hat.len(), mu.len())?;
    if !(horizon > 0.0) {
        return Err(DrpiError::invalid("T", "horizon must be positive"));
    }
    let sq: f64 = mu_hat.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * horizon * sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSchedule {
    /// Constant radius; `gamma = 0` is the risk-neutral baseline.
    Fixed,
    /// `γ = 1/k`.
    InverseK,
    /// `γ = gamma_for_confidence(p, N, ε)` with the data count as `N`.
    FiniteSample,
}

impl GammaSchedule {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaSchedule::Fixed => "fixed",
            GammaSchedule::InverseK => "inverse_k",
            GammaSchedule::FiniteSample => "finite_sample",
        }
    }
}

impl fmt::Display for GammaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GammaSchedule {
    type Err = DrpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(GammaSchedule::Fixed),
            "inverse_k" => Ok(GammaSchedule::InverseK),
            "finite_sample" => Ok(GammaSchedule::FiniteSample),
            other => Err(DrpiError::invalid(
                "robust.schedule",
                format!("unknown schedule `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub schedule: GammaSchedule,
    pub p: usize,
}

impl RobustnessConfig {
    pub fn new(gamma: f64, epsilon: f64, schedule: GammaSchedule, p: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(DrpiError::invalid("robust.gamma", "must be finite and nonnegative"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DrpiError::invalid("robust.epsilon", "must lie in (0, 1)"));
        }
        if p == 0 {
            return Err(DrpiError::invalid("p", "dimension must be positive"));
        }
        Ok(RobustnessConfig {
            gamma,
            epsilon,
            schedule,
            p,
        })
    }

    /// Fixed radius zero: the risk-neutral path integral baseline.
    pub fn risk_neutral(p: usize) -> Self {
        RobustnessConfig {
            gamma: 0.0,
            epsilon: 0.1,
            schedule: GammaSchedule::Fixed,
            p,
        }
    }
}

/// Ambiguity radius at step `k ≥ 1` with `n_available` data points.
pub fn gamma_schedule(rc: &RobustnessConfig, k: usize, n_available: usize) -> f64 {
    match rc.schedule {
        GammaSchedule::Fixed => rc.gamma,
        GammaSchedule::InverseK => 1.0 / k.max(1) as f64,
        GammaSchedule::FiniteSample => {
            gamma_for_confidence(rc.p, n_available.max(1), rc.epsilon).unwrap_or(rc.gamma)
        }
    }
}
