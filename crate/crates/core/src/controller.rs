//! Closed-loop DRPI and the risk-neutral PIC baseline.
//!
//! Every step samples `M` uncontrolled rollouts over the remaining horizon,
//! solves the master problem on their costs, and applies the weighted noise
//! average as the control. The plant is then advanced with a disturbance
//! drawn from the episode's truth stream, and that increment becomes the
//! newest data point of the drift estimate.

use std::fmt;
use std::str::FromStr;

use crate::costs::{CostModel, PathCost};
use crate::error::{check_finite, check_len, DrpiError, Result};
use crate::models::DynamicsModel;
use crate::rollout::{rollout_uncontrolled, standard_normals, NoiseSource, SeedSpec, SeededNoise, StreamKind};
use crate::solver::{
    control_from_weights, path_integral_weights, solve_master, theta_star, SearchConfig,
    ThetaSolution,
};
use crate::uncertainty::{gamma_schedule, DriftEstimate, RobustnessConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Drpi,
    /// DRPI with the radius pinned at zero.
    Pic,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Drpi => "drpi",
            Scheme::Pic => "pic",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = DrpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drpi" => Ok(Scheme::Drpi),
            "pic" => Ok(Scheme::Pic),
            other => Err(DrpiError::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeStatus {
    Success,
    Collision,
    Timeout,
}

impl EpisodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeStatus::Success => "success",
            EpisodeStatus::Collision => "collision",
            EpisodeStatus::Timeout => "timeout",
        }
    }
}

impl fmt::Display for EpisodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the controller needs besides the state and the drift.
#[derive(Debug, Clone)]
pub struct Planner {
    model: DynamicsModel,
    cost: CostModel,
    horizon: usize,
    dt: f64,
    samples: usize,
    search: SearchConfig,
    theta_star: f64,
}

impl Planner {
    /// Checks dimensions and solves for `θ*` once.
    pub fn new(
        model: DynamicsModel,
        cost: CostModel,
        horizon: usize,
        dt: f64,
        samples: usize,
        search: SearchConfig,
    ) -> Result<Self> {
        check_len("control weight", model.control_dim(), cost.control_dim())?;
        if cost.navigation_cost().is_some() && model.state_dim() < 2 {
            return Err(DrpiError::invalid(
                "model",
                "navigation costs need a planar position state",
            ));
        }
        if horizon == 0 {
            return Err(DrpiError::invalid("horizon", "need at least one step"));
        }
        if samples == 0 {
            return Err(DrpiError::invalid("samples", "need at least one rollout"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DrpiError::invalid("dt", "step size must be positive"));
        }
        search.validate()?;
        let theta_star = theta_star(&model, cost.control_weight())?;
        Ok(Planner {
            model,
            cost,
            horizon,
            dt,
            samples,
            search,
            theta_star,
        })
    }

    pub fn model(&self) -> &DynamicsModel {
        &self.model
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    /// One controller update at step `k` with rollout noise from `seed`.
    pub fn drpi_step(
        &self,
        x_k: &[f64],
        k: usize,
        drift: &DriftEstimate,
        gamma: f64,
        seed: SeedSpec,
    ) -> Result<(Vec<f64>, ThetaSolution)> {
        if k >= self.horizon {
            return Err(DrpiError::invalid("k", "step index beyond the horizon"));
        }
        let noise = SeededNoise {
            trajectories: self.samples,
            steps: self.horizon - k,
            dim: self.model.noise_dim(),
            seed,
        };
        self.drpi_step_with_noise(x_k, k, drift, gamma, &noise)
    }

    /// [`Planner::drpi_step`] with caller-supplied rollout noise.
    pub fn drpi_step_with_noise<N: NoiseSource + ?Sized>(
        &self,
        x_k: &[f64],
        k: usize,
        drift: &DriftEstimate,
        gamma: f64,
        noise: &N,
    ) -> Result<(Vec<f64>, ThetaSolution)> {
        let step = || -> Result<(Vec<f64>, ThetaSolution)> {
            let batch =
                rollout_uncontrolled(&self.model, &self.cost, x_k, k, drift, noise, self.dt, false)?;
            let sol = solve_master(gamma, self.theta_star, &batch.costs, &self.search)?;
            let weights = path_integral_weights(&batch.costs, sol.lambda_eff)?;
            let u = control_from_weights(
                &self.model,
                self.cost.control_weight(),
                x_k,
                &weights,
                &batch.first_step_noise,
                self.dt,
            )?;
            Ok((u, sol))
        };
        step().map_err(|e| e.at_timestep(k))
    }

    /// Runs one closed-loop episode from `x0` against the hidden drift
    /// `true_mu`.
    pub fn run_episode(
        &self,
        scheme: Scheme,
        x0: &[f64],
        true_mu: &[f64],
        rc: &RobustnessConfig,
        seed: SeedSpec,
    ) -> Result<EpisodeRecord> {
        self.episode(scheme, x0, true_mu, rc, seed)
            .map_err(|e| e.in_episode(seed.episode))
    }

    fn episode(
        &self,
        scheme: Scheme,
        x0: &[f64],
        true_mu: &[f64],
        rc: &RobustnessConfig,
        seed: SeedSpec,
    ) -> Result<EpisodeRecord> {
        let (n, p) = (self.model.state_dim(), self.model.noise_dim());
        check_len("initial state", n, x0.len())?;
        check_finite("initial state", x0)?;
        check_len("true drift", p, true_mu.len())?;
        check_finite("true drift", true_mu)?;
        let dt = self.dt;
        let seed = seed.at_timestep(0);
        let nav = self.cost.navigation_cost();

        let truth_increment = |kind: StreamKind, timestep: usize| -> Vec<f64> {
            standard_normals(seed.at_timestep(timestep as u64), kind, 0, p)
                .iter()
                .zip(true_mu)
                .map(|(w, mu)| mu * dt + w * dt.sqrt())
                .collect()
        };

        let mut drift = DriftEstimate::prior(p, dt)?;
        let first = truth_increment(StreamKind::Prior, 0);
        drift.update(&first)?;

        let mut rec = EpisodeRecord {
            scheme,
            states: vec![x0.to_vec()],
            controls: Vec::new(),
            theta_hats: Vec::new(),
            lambda_effs: Vec::new(),
            gammas: Vec::new(),
            mu_hats: Vec::new(),
            increments: vec![first],
            status: EpisodeStatus::Timeout,
            arrive_time: None,
            realized_state_cost: 0.0,
            realized_total_cost: 0.0,
        };

        let mut running = 0.0;
        let mut control_cost = 0.0;
        let mut x = x0.to_vec();
        let mut next = vec![0.0; n];

        let mut status = nav.and_then(|nav| {
            if nav.collides(&x) {
                Some(EpisodeStatus::Collision)
            } else if nav.reached_goal(&x) {
                Some(EpisodeStatus::Success)
            } else {
                None
            }
        });
        let mut k = 0;
        while status.is_none() && k < self.horizon {
            if k > 0 {
                let last = rec.increments.last().expect("prior increment is recorded");
                drift.update(last)?;
            }
            let gamma = match scheme {
                Scheme::Pic => 0.0,
                Scheme::Drpi => gamma_schedule(rc, k + 1, drift.count() as usize),
            };
            let (u, sol) = self.drpi_step(&x, k, &drift, gamma, seed.at_timestep(k as u64))?;

            let dxi = truth_increment(StreamKind::Truth, k);
            self.model.step_into(&x, k as f64 * dt, &u, &dxi, dt, &mut next);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(DrpiError::NonFinite("closed-loop state").at_timestep(k));
            }
            std::mem::swap(&mut x, &mut next);
            k += 1;

            control_cost += self.cost.control_cost_unchecked(&u) * dt;
            rec.controls.push(u);
            rec.theta_hats.push(sol.theta_hat);
            rec.lambda_effs.push(sol.lambda_eff);
            rec.gammas.push(gamma);
            rec.mu_hats.push(drift.mu_hat().to_vec());
            rec.increments.push(dxi);
            rec.states.push(x.clone());

            status = nav.and_then(|nav| {
                if nav.collides(&x) {
                    Some(EpisodeStatus::Collision)
                } else if nav.reached_goal(&x) {
                    Some(EpisodeStatus::Success)
                } else {
                    None
                }
            });
            if status.is_none() && k < self.horizon {
                running += self.cost.running(&x) * dt;
            }
        }

        rec.status = status.unwrap_or(EpisodeStatus::Timeout);
        if rec.status == EpisodeStatus::Success {
            rec.arrive_time = Some(k as f64 * dt);
        }
        rec.realized_state_cost = running + self.cost.terminal(&x);
        rec.realized_total_cost = rec.realized_state_cost + control_cost;
        Ok(rec)
    }
}

/// The closed-loop trace of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub scheme: Scheme,
    /// `x(0)..=x(end)`.
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub theta_hats: Vec<f64>,
    pub lambda_effs: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Drift estimate used at each step.
    pub mu_hats: Vec<Vec<f64>>,
    /// The pre-episode increment followed by every realized plant increment.
    pub increments: Vec<Vec<f64>>,
    pub status: EpisodeStatus,
    /// Seconds until the goal was reached; only set on success.
    pub arrive_time: Option<f64>,
    /// `Σ q(x)·dt` over the intermediate states plus `ψ` at the final state.
    pub realized_state_cost: f64,
    /// State cost plus `Σ ½uᵀRu·dt`.
    pub realized_total_cost: f64,
}

impl EpisodeRecord {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}
