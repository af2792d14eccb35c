//! Acceptance suite: runs the nine end-to-end checks at their stated
//! tolerances and prints one PASS/FAIL line per check.
//!
//! Built with `harness = false`, so the lines are visible under a plain
//! `cargo test`. The process exits non-zero if any check fails.
//!
//! Set `DRPI_ACCEPTANCE=1,4,9` to run a subset.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use drpi::controller::{Planner, Scheme};
use drpi::costs::CostModel;
use drpi::harness::{simulate, ExperimentConfig};
use drpi::models::{make_model, DynamicsModel, ModelFamily, ModelParams};
use drpi::oracles::{free_energy_quadrature, leqg_gains_and_value, lqr_gains, lqr_value, ScalarLQProblem};
use drpi::rollout::{rollout_uncontrolled, SeedSpec, SeededNoise};
use drpi::solver::{
    effective_temperature, free_energy, master_objective, path_integral_weights, solve_master,
    SearchConfig,
};
use drpi::uncertainty::{
    coverage_lower_bound, estimate_drift_batch, gamma_for_confidence, gamma_schedule,
    kl_drifted_brownian, DriftEstimate, GammaSchedule, RobustnessConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scalar_model(prob: &ScalarLQProblem) -> DynamicsModel {
    let params = ModelParams {
        a: prob.a,
        b: prob.b,
        sigma: prob.sigma,
    };
    make_model(ModelFamily::ScalarLq, params).expect("valid scalar model")
}

fn scalar_cost(prob: &ScalarLQProblem) -> CostModel {
    CostModel::quadratic(prob.q_x, prob.q_t, prob.r).expect("valid quadratic cost")
}

/// Costs of `m` uncontrolled rollouts of `prob` from `x0` over `steps`.
fn scalar_rollout_costs(prob: &ScalarLQProblem, x0: f64, steps: usize, m: usize, seed: SeedSpec) -> Vec<f64> {
    let model = scalar_model(prob);
    let drift = DriftEstimate::prior(1, prob.dt).unwrap();
    let noise = SeededNoise {
        trajectories: m,
        steps,
        dim: 1,
        seed,
    };
    rollout_uncontrolled(&model, &scalar_cost(prob), &[x0], 0, &drift, &noise, prob.dt, false)
        .expect("rollout succeeds")
        .costs
}

fn pic_vs_lqr() -> Outcome {
    let prob = ScalarLQProblem::unit(0.05);
    let k = prob.steps().unwrap();
    let planner = Planner::new(
        scalar_model(&prob),
        scalar_cost(&prob),
        k,
        prob.dt,
        20_000,
        SearchConfig::default(),
    )
    .unwrap();
    let drift = DriftEstimate::prior(1, prob.dt).unwrap();
    let reference = -lqr_gains(&prob).unwrap()[0];
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let (u, _) = planner
            .drpi_step(&[1.0], 0, &drift, 0.0, SeedSpec::new(1000 + seed, 0, 0))
            .unwrap();
        let rel = ((u[0] - reference) / reference).abs();
        worst = worst.max(rel);
        if rel <= 0.10 {
            within += 1;
        }
    }
    outcome(
        within >= 18,
        format!("{within}/20 seeds within 10% of LQR u0={reference:.5} (worst {:.2}%)", worst * 100.0),
    )
}

fn subproblem_vs_leqg() -> Outcome {
    let prob = ScalarLQProblem::unit(0.05);
    let k = prob.steps().unwrap();
    let theta_star = prob.theta_star();
    let costs = scalar_rollout_costs(&prob, 1.0, k, 100_000, SeedSpec::new(77, 0, 0));
    let mut ok = true;
    let mut parts = Vec::new();
    let mut values = Vec::new();
    for factor in [2.0, 5.0, 20.0] {
        let theta = factor * theta_star;
        let lambda = effective_temperature(theta, theta_star).unwrap();
        let sampled = free_energy(&costs, lambda).unwrap();
        let (_, exact) = leqg_gains_and_value(&prob, theta, 1.0).unwrap();
        let rel = (sampled - exact).abs() / exact.abs();
        ok &= rel <= 0.10;
        parts.push(format!("{factor}θ*: F={sampled:.5} LEQG={exact:.5} ({:.2}%)", rel * 100.0));
        values.push(sampled);
    }
    let lqr = lqr_value(&prob, 1.0).unwrap();
    let (hi, lo) = (values[1].max(lqr), values[1].min(lqr));
    let between = values[2] >= lo && values[2] <= hi;
    ok &= between;
    parts.push(format!("LQR={lqr:.5}, 20θ* between 5θ* and LQR: {between}"));
    outcome(ok, parts.join("; "))
}

fn quadrature_vs_monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for draw in 0..5u64 {
        let dt = rng.random_range(0.05..0.2);
        let prob = ScalarLQProblem {
            a: rng.random_range(-0.5..0.5),
            b: rng.random_range(0.5..2.0),
            sigma: rng.random_range(0.5..1.5),
            q_x: rng.random_range(0.0..2.0),
            r: rng.random_range(0.5..2.0),
            q_t: rng.random_range(0.0..2.0),
            horizon: 2.0 * dt,
            dt,
        };
        let lambda = prob.theta_star() * rng.random_range(0.5..3.0);
        let x0 = rng.random_range(-1.5..1.5);
        let exact = free_energy_quadrature(&prob, 2, lambda, x0).unwrap();

        let costs = scalar_rollout_costs(&prob, x0, 2, 1_000_000, SeedSpec::new(300 + draw, 0, 0));
        let sampled = free_energy(&costs, lambda).unwrap();
        // delta method on F = −λ ln Z̄
        let m = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let z: Vec<f64> = costs.iter().map(|j| (-(j - m) / lambda).exp()).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = lambda * (var / n).sqrt() / mean;
        let ratio = (sampled - exact).abs() / se;
        worst = worst.max(ratio);
        ok &= ratio <= 3.0;
    }
    outcome(ok, format!("5 draws, worst |quadrature − MC| = {worst:.2} standard errors"))
}

fn coverage_frequency() -> Outcome {
    let (p, horizon, eps) = (2usize, 1.0, 0.1);
    let mu = [0.3, -0.3];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    let mut parts = Vec::new();
    for nk in [1usize, 5, 20] {
        // N sequences of K increments, each sequence spanning [0, T]
        let mut splits = vec![(nk, 1usize), (1, nk)];
        splits.dedup();
        for (n, k) in splits {
            let dt = horizon / k as f64;
            let gamma = gamma_for_confidence(p, n, eps).unwrap();
            let mut hits = 0;
            for _ in 0..1000 {
                let data: Vec<Vec<Vec<f64>>> = (0..n)
                    .map(|_| {
                        (0..k)
                            .map(|_| {
                                mu.iter()
                                    .map(|m| m * dt + dt.sqrt() * rng.sample::<f64, _>(StandardNormal))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                let est = estimate_drift_batch(&data, dt).unwrap();
                if kl_drifted_brownian(est.mu_hat(), &mu, horizon).unwrap() <= gamma {
                    hits += 1;
                }
            }
            let freq = hits as f64 / 1000.0;
            ok &= freq >= 1.0 - eps;
            parts.push(format!("N={n},K={k}: {freq:.3}"));
        }
    }
    outcome(ok, parts.join(", "))
}

fn bound_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.random_range(1..=10usize);
        let n = rng.random_range(1..=10_000usize);
        let eps = rng.random_range(1e-6..0.999);
        let gamma = gamma_for_confidence(p, n, eps).unwrap();
        worst = worst.max((coverage_lower_bound(gamma, n, p) - (1.0 - eps)).abs());
    }
    outcome(worst <= 1e-12, format!("max |bound − (1−ε)| = {worst:.2e} over 100 draws"))
}

fn random_batch(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.random_range(-2.0..3.0));
    let shift = rng.random_range(-50.0..50.0);
    (0..m).map(|_| shift + scale * rng.random::<f64>()).collect()
}

/// Costs on a 2⁻²⁰ grid below 2¹², where adding a 2⁻⁶-grid shift is exact.
fn dyadic_batch(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| rng.random_range(0..(1i64 << 31)) as f64 / (1u64 << 20) as f64)
        .collect()
}

fn solver_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let search = SearchConfig::default();
    let mut failures = Vec::new();

    let mut weight_err: f64 = 0.0;
    let mut bound_ok = true;
    for _ in 0..1000 {
        let m = rng.random_range(1..200);
        let costs = if rng.random_bool(0.5) {
            random_batch(&mut rng, m)
        } else {
            dyadic_batch(&mut rng, m)
        };
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let w = path_integral_weights(&costs, lambda).unwrap();
        weight_err = weight_err.max((w.iter().sum::<f64>() - 1.0).abs());

        // exact shift on a dyadic grid, so only the softmax itself is tested
        let grid = dyadic_batch(&mut rng, m);
        let shift = rng.random_range(-4096..4096) as f64 / 64.0;
        let shifted: Vec<f64> = grid.iter().map(|c| c + shift).collect();
        let w1 = path_integral_weights(&grid, lambda).unwrap();
        let w2 = path_integral_weights(&shifted, lambda).unwrap();
        for (a, b) in w1.iter().zip(&w2) {
            weight_err = weight_err.max((a - b).abs());
        }
        let f = free_energy(&costs, lambda).unwrap();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = costs.iter().sum::<f64>() / m as f64;
        let slack = 1e-12 * (1.0 + min.abs().max(mean.abs()));
        bound_ok &= f >= min - slack && f <= mean + slack;
    }
    if weight_err > 1e-12 {
        failures.push(format!("weights off by {weight_err:.1e}"));
    }
    if !bound_ok {
        failures.push("free energy outside [min, mean]".to_string());
    }

    let mut monotone = true;
    for _ in 0..100 {
        let costs = random_batch(&mut rng, 100);
        let theta_star = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut gammas: Vec<f64> = (0..6).map(|_| 10f64.powf(rng.random_range(-4.0..2.0))).collect();
        gammas.push(0.0);
        gammas.sort_by(f64::total_cmp);
        let sols: Vec<_> = gammas
            .iter()
            .map(|&g| solve_master(g, theta_star, &costs, &search).unwrap())
            .collect();
        for pair in sols.windows(2) {
            let tol = 1e-9 * pair[0].master_value.abs().max(1.0);
            monotone &= pair[1].theta_hat <= pair[0].theta_hat * (1.0 + 1e-6);
            monotone &= pair[1].master_value >= pair[0].master_value - tol;
        }
    }
    if !monotone {
        failures.push("comparative statics violated".to_string());
    }

    let mut scan_gap: f64 = 0.0;
    for _ in 0..5 {
        let costs = random_batch(&mut rng, 50);
        let theta_star = 10f64.powf(rng.random_range(-3.0..1.0));
        let gamma = 10f64.powf(rng.random_range(-3.0..1.0));
        let sol = solve_master(gamma, theta_star, &costs, &search).unwrap();
        let lo = theta_star * (1.0 + 1e-6);
        let hi = theta_star * 1e6;
        let (la, lb) = ((lo - theta_star).ln(), (hi - theta_star).ln());
        let points = 1_000_000;
        let mut best = f64::INFINITY;
        for i in 0..points {
            let t = la + (lb - la) * (i as f64 + 0.5) / points as f64;
            let theta = theta_star + t.exp();
            if let Ok(v) = master_objective(gamma, theta, theta_star, &costs) {
                best = best.min(v);
            }
        }
        scan_gap = scan_gap.max((sol.master_value - best) / best.abs().max(1e-300));
    }
    if scan_gap > 1e-6 {
        failures.push(format!("dense scan beats solver by {scan_gap:.2e}"));
    }

    let detail = if failures.is_empty() {
        format!("weights err {weight_err:.1e}, bounds ok, statics ok, dense-scan gap {scan_gap:.1e}")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = "run.horizon = 5\nrun.samples = 200\nrun.episodes = 4\nrun.seed = 11\n";
    let mut outputs = Vec::new();
    for workers in [1usize, 4] {
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        cfg.workers = workers;
        cfg.out_dir = dir.path().join(format!("w{workers}"));
        cfg.save_trajectories = true;
        drpi::harness::run_experiment(&cfg).unwrap();
        outputs.push(std::fs::read(cfg.out_dir.join("summary.json")).unwrap());
    }
    let same = outputs[0] == outputs[1];
    outcome(same, format!("summary.json identical for 1 and 4 workers: {same}"))
}

fn benchmark_ordering() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for family in ["double_integrator", "unicycle"] {
        let cfg = ExperimentConfig::parse(&format!("model.family = {family}\nrun.seed = 2024\n")).unwrap();
        let run = simulate(&cfg).unwrap();
        let drpi = run.summary.get(Scheme::Drpi).unwrap();
        let pic = run.summary.get(Scheme::Pic).unwrap();
        let rate_ok = drpi.success_rate >= pic.success_rate + 10.0;
        let time_ok = match (drpi.arrive_mean(), pic.arrive_mean()) {
            (Some(d), Some(p)) => d <= p,
            (Some(_), None) => true,
            _ => false,
        };
        ok &= rate_ok && time_ok;
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |m| format!("{m:.2}s"));
        parts.push(format!(
            "{family}: DRPI {:.0}% ({}) vs PIC {:.0}% ({})",
            drpi.success_rate,
            fmt(drpi.arrive_mean()),
            pic.success_rate,
            fmt(pic.arrive_mean())
        ));
    }
    outcome(ok, parts.join("; "))
}

fn online_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(1..4usize);
        let len = rng.random_range(1..200usize);
        let dt = rng.random_range(0.01..0.5);
        let stream: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let mut est = DriftEstimate::prior(p, dt).unwrap();
        for dxi in &stream {
            est.update(dxi).unwrap();
        }
        let batch = estimate_drift_batch(&[stream], dt).unwrap();
        for (a, b) in est.mu_hat().iter().zip(batch.mu_hat()) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let rc = RobustnessConfig::new(1.0, 0.1, GammaSchedule::InverseK, 2).unwrap();
    let exact = (1..=1000).all(|k| gamma_schedule(&rc, k, k) == 1.0 / k as f64);
    outcome(
        worst <= 1e-12 && exact,
        format!("streaming vs batch max err {worst:.1e}; γ = 1/k exact: {exact}"),
    )
}

type Check = (u32, &'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 9] = [
        (1, "risk-neutral PIC vs LQR", pic_vs_lqr),
        (2, "risk-sensitive subproblem vs LEQG", subproblem_vs_leqg),
        (3, "quadrature vs Monte Carlo free energy", quadrature_vs_monte_carlo),
        (4, "coverage frequency of the KL radius", coverage_frequency),
        (5, "radius and coverage bound invert", bound_algebra),
        (6, "solver property suite", solver_properties),
        (7, "worker-count determinism", determinism),
        (8, "benchmark ordering DRPI over PIC", benchmark_ordering),
        (9, "online drift estimator and schedule", online_estimator),
    ];
    let selected: Option<BTreeSet<u32>> = std::env::var("DRPI_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());

    let mut failed = Vec::new();
    for (id, name, check) in checks {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name} ({secs:.1}s): {}", result.detail);
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
