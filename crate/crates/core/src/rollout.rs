//! Monte Carlo rollouts of the uncontrolled dynamics.
//!
//! Noise comes from counter-based streams: trajectory `i` at
//! `(master_seed, episode, timestep)` owns a ChaCha8 generator whose 256-bit
//! key is exactly those four words, with the ChaCha stream id separating the
//! rollout, truth and prior purposes. A draw therefore depends only on its
//! coordinates, never on scheduling, and a rollout batch is bit-identical for
//! any number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::costs::PathCost;
use crate::error::{check_finite, check_len, DrpiError, Result};
use crate::models::DynamicsModel;
use crate::uncertainty::DriftEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub episode: u64,
    pub timestep: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, episode: u64, timestep: u64) -> Self {
        SeedSpec {
            master_seed,
            episode,
            timestep,
        }
    }

    pub fn at_timestep(self, timestep: u64) -> Self {
        SeedSpec { timestep, ..self }
    }
}

/// Purpose tag of a random stream. Streams of different kinds never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    /// Rollout noise `ε` for the controller's sampled trajectories.
    Rollout = 0,
    /// The disturbance that actually drives the simulated plant.
    Truth = 1,
    /// The single pre-episode sample that seeds the drift estimate.
    Prior = 2,
}

/// The generator for stream `index` of `kind` at `seed`.
pub fn stream_rng(seed: SeedSpec, kind: StreamKind, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&seed.episode.to_le_bytes());
    key[16..24].copy_from_slice(&seed.timestep.to_le_bytes());
    key[24..32].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(kind as u64);
    rng
}

/// `count` standard normal draws from one stream.
pub fn standard_normals(seed: SeedSpec, kind: StreamKind, index: u64, count: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, kind, index);
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Provider of standard normal rollout noise, laid out `[M][steps][p]`.
pub trait NoiseSource: Sync {
    fn trajectories(&self) -> usize;
    fn steps(&self) -> usize;
    fn dim(&self) -> usize;
    /// Writes the `steps·dim` draws of trajectory `i` (step-major) into `out`.
    fn fill(&self, i: usize, out: &mut [f64]);
}

/// Noise drawn lazily from the rollout streams of a [`SeedSpec`].
#[derive(Debug, Clone, Copy)]
pub struct SeededNoise {
    pub trajectories: usize,
    pub steps: usize,
    pub dim: usize,
    pub seed: SeedSpec,
}

impl NoiseSource for SeededNoise {
    fn trajectories(&self) -> usize {
        self.trajectories
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        let mut rng = stream_rng(self.seed, StreamKind::Rollout, i as u64);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}

/// A materialized `[M][steps][p]` noise tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTensor {
    m: usize,
    steps: usize,
    p: usize,
    data: Vec<f64>,
}

impl NoiseTensor {
    pub fn from_vec(m: usize, steps: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        check_len("noise tensor", m * steps * p, data.len())?;
        check_finite("noise tensor", &data)?;
        Ok(NoiseTensor { m, steps, p, data })
    }

    pub fn zeros(m: usize, steps: usize, p: usize) -> Self {
        NoiseTensor {
            m,
            steps,
            p,
            data: vec![0.0; m * steps * p],
        }
    }

    pub fn get(&self, i: usize, step: usize, j: usize) -> f64 {
        self.data[(i * self.steps + step) * self.p + j]
    }

    pub fn trajectory(&self, i: usize) -> &[f64] {
        let len = self.steps * self.p;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl NoiseSource for NoiseTensor {
    fn trajectories(&self) -> usize {
        self.m
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.trajectory(i));
    }
}

/// Materializes `M` trajectories of `steps` i.i.d. `N(0, I_p)` draws.
pub fn sample_disturbances(m: usize, steps: usize, p: usize, seed: SeedSpec) -> NoiseTensor {
    let source = SeededNoise {
        trajectories: m,
        steps,
        dim: p,
        seed,
    };
    let len = steps * p;
    let mut data = vec![0.0; m * len];
    data.par_chunks_mut(len.max(1))
        .take(m)
        .enumerate()
        .for_each(|(i, chunk)| source.fill(i, chunk));
    NoiseTensor { m, steps, p, data }
}

/// Costs and first-step noise of `M` uncontrolled trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub costs: Vec<f64>,
    /// `ε⁽ⁱ⁾(k)`, `M×p` row-major.
    pub first_step_noise: Vec<f64>,
    pub steps: usize,
    pub p: usize,
    pub dt: f64,
    /// Full state paths `x_k..=x_K`, kept only when requested.
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn first_step(&self, i: usize) -> &[f64] {
        &self.first_step_noise[i * self.p..(i + 1) * self.p]
    }
}

struct Scratch {
    noise: Vec<f64>,
    x: Vec<f64>,
    next: Vec<f64>,
    dxi: Vec<f64>,
    u: Vec<f64>,
}

/// Simulates `M` uncontrolled trajectories from `x_k` at step `k` with
/// increments `Δξ = μ̂·dt + ε·√dt` and accumulates
/// `J = Σ_{k'=k}^{K−2} q(x(k'+1))·dt + ψ(x(K))`.
///
/// Runs on the ambient rayon pool; results are merged in trajectory order.
#[allow(clippy::too_many_arguments)]
pub fn rollout_uncontrolled<C: PathCost + ?Sized, N: NoiseSource + ?Sized>(
    model: &DynamicsModel,
    cost: &C,
    x_k: &[f64],
    k: usize,
    drift: &DriftEstimate,
    noise: &N,
    dt: f64,
    keep_paths: bool,
) -> Result<RolloutBatch> {
    let (n, p) = (model.state_dim(), model.noise_dim());
    check_len("state", n, x_k.len())?;
    check_finite("state", x_k)?;
    check_len("drift", p, drift.dim())?;
    check_len("noise dimension", p, noise.dim())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DrpiError::invalid("dt", "step size must be positive"));
    }
    let m = noise.trajectories();
    let steps = noise.steps();
    if m == 0 {
        return Err(DrpiError::Empty("rollout batch"));
    }
    if steps == 0 {
        return Err(DrpiError::Empty("rollout horizon"));
    }

    let sqrt_dt = dt.sqrt();
    let mean_step: Vec<f64> = drift.mu_hat().iter().map(|mu| mu * dt).collect();
    let k_ctrl = model.control_dim();

    type Traj = (f64, Vec<f64>, Option<Vec<Vec<f64>>>);
    let results: Vec<Result<Traj>> = (0..m)
        .into_par_iter()
        .map_init(
            || Scratch {
                noise: vec![0.0; steps * p],
                x: vec![0.0; n],
                next: vec![0.0; n],
                dxi: vec![0.0; p],
                u: vec![0.0; k_ctrl],
            },
            |s, i| {
                noise.fill(i, &mut s.noise);
                s.x.copy_from_slice(x_k);
                let mut path = keep_paths.then(|| {
                    let mut v = Vec::with_capacity(steps + 1);
                    v.push(x_k.to_vec());
                    v
                });
                let mut cost_acc = 0.0;
                for step in 0..steps {
                    let eps = &s.noise[step * p..(step + 1) * p];
                    for j in 0..p {
                        s.dxi[j] = mean_step[j] + eps[j] * sqrt_dt;
                    }
                    let t = (k + step) as f64 * dt;
                    model.step_into(&s.x, t, &s.u, &s.dxi, dt, &mut s.next);
                    if !s.next.iter().all(|v| v.is_finite()) {
                        return Err(DrpiError::NonFiniteRollout {
                            trajectory: i,
                            step: k + step + 1,
                        });
                    }
                    if step + 1 < steps {
                        cost_acc += cost.running(&s.next) * dt;
                    } else {
                        cost_acc += cost.terminal(&s.next);
                    }
                    if let Some(path) = path.as_mut() {
                        path.push(s.next.clone());
                    }
                    std::mem::swap(&mut s.x, &mut s.next);
                }
                if !cost_acc.is_finite() {
                    return Err(DrpiError::NonFiniteRollout {
                        trajectory: i,
                        step: k + steps,
                    });
                }
                Ok((cost_acc, s.noise[..p].to_vec(), path))
            },
        )
        .collect();

    let mut costs = Vec::with_capacity(m);
    let mut first_step_noise = Vec::with_capacity(m * p);
    let mut paths = keep_paths.then(|| Vec::with_capacity(m));
    for r in results {
        let (c, first, path) = r?;
        costs.push(c);
        first_step_noise.extend_from_slice(&first);
        if let (Some(all), Some(path)) = (paths.as_mut(), path) {
            all.push(path);
        }
    }

    Ok(RolloutBatch {
        costs,
        first_step_noise,
        steps,
        p,
        dt,
        paths,
    })
}

/// Runs `f` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
