use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::summary::{episodes_csv, fmt_f64, summarize, trajectory_csv, ExperimentSummary, SchemeSummary};
use crate::controller::{EpisodeRecord, Scheme};
use crate::error::{DrpiError, Result};
use crate::rollout::{with_workers, SeedSpec};
use crate::uncertainty::GammaSchedule;

/// Records of every episode, scheme-major in configuration order.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub summary: ExperimentSummary,
    pub records: Vec<(u64, EpisodeRecord)>,
}

/// Runs the configured episodes without touching the filesystem.
///
/// Episode `e` of every scheme uses `SeedSpec(seed, e, ·)`, so the schemes
/// face the same plant disturbances.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let planner = cfg.planner()?;
    let rc = cfg.robustness()?;
    let episodes = cfg.episodes as u64;
    let records = with_workers(cfg.workers, || -> Result<Vec<(u64, EpisodeRecord)>> {
        let mut all = Vec::with_capacity(cfg.schemes.len() * cfg.episodes);
        for &scheme in &cfg.schemes {
            let batch: Vec<Result<EpisodeRecord>> = (0..episodes)
                .into_par_iter()
                .map(|e| {
                    planner.run_episode(scheme, &cfg.x0, &cfg.true_mu, &rc, SeedSpec::new(cfg.seed, e, 0))
                })
                .collect();
            for (e, r) in batch.into_iter().enumerate() {
                all.push((e as u64, r?));
            }
        }
        Ok(all)
    })?;
    let plain: Vec<EpisodeRecord> = records.iter().map(|(_, r)| r.clone()).collect();
    Ok(ExperimentRun {
        summary: summarize(&plain)?,
        records,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> DrpiError {
    DrpiError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes `summary.json`, `episodes.csv` and, if requested,
/// `<scheme>/traj_<episode>.csv` under `dir`.
pub fn write_outputs(dir: &Path, run: &ExperimentRun, dt: f64, save_trajectories: bool) -> Result<()> {
    write(&dir.join("summary.json"), &run.summary.to_json())?;
    let rows: Vec<(u64, &EpisodeRecord)> = run.records.iter().map(|(e, r)| (*e, r)).collect();
    write(&dir.join("episodes.csv"), &episodes_csv(&rows))?;
    if save_trajectories {
        for (e, r) in &run.records {
            let path = dir.join(r.scheme.as_str()).join(format!("traj_{e}.csv"));
            write(&path, &trajectory_csv(r, dt))?;
        }
    }
    Ok(())
}

/// [`simulate`] followed by [`write_outputs`] into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let run = simulate(cfg)?;
    write_outputs(&cfg.out_dir, &run, cfg.dt, cfg.save_trajectories)?;
    Ok(run.summary)
}

/// DRPI with each fixed radius in `gammas`; writes `sweep.csv` to
/// `cfg.out_dir` and returns the rows.
pub fn run_sweep(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<Vec<(f64, SchemeSummary)>> {
    if gammas.is_empty() {
        return Err(DrpiError::Empty("gamma list"));
    }
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let point = ExperimentConfig {
            gamma,
            schedule: GammaSchedule::Fixed,
            schemes: vec![Scheme::Drpi],
            ..cfg.clone()
        };
        let run = simulate(&point)?;
        let summary = run
            .summary
            .get(Scheme::Drpi)
            .cloned()
            .ok_or(DrpiError::Empty("sweep result"))?;
        rows.push((gamma, summary));
    }
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut csv = String::from("gamma,episodes,success_rate,arrive_mean,arrive_std,arrive_p95,collisions,timeouts\n");
    for (gamma, s) in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(*gamma),
            s.episodes,
            fmt_f64(s.success_rate),
            opt(s.arrive.map(|a| a.mean)),
            opt(s.arrive.map(|a| a.std)),
            opt(s.arrive.map(|a| a.p95)),
            s.collisions,
            s.timeouts
        ));
    }
    write(&cfg.out_dir.join("sweep.csv"), &csv)?;
    Ok(rows)
}
