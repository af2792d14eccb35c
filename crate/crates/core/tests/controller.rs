use drpi::controller::{EpisodeStatus, Planner, Scheme};
use drpi::costs::{CostModel, NavigationCost, Rect};
use drpi::models::{make_model, ModelFamily, ModelParams};
use drpi::rollout::{NoiseTensor, SeedSpec};
use drpi::solver::SearchConfig;
use drpi::uncertainty::{DriftEstimate, GammaSchedule, RobustnessConfig};

fn di_planner(horizon: usize, samples: usize) -> Planner {
    let model = make_model(ModelFamily::DoubleIntegrator, ModelParams::default()).unwrap();
    Planner::new(model, CostModel::benchmark(), horizon, 0.05, samples, SearchConfig::default()).unwrap()
}

fn fixed(gamma: f64) -> RobustnessConfig {
    RobustnessConfig::new(gamma, 0.1, GammaSchedule::Fixed, 2).unwrap()
}

const START: [f64; 4] = [-3.5, 2.5, 0.0, 0.0];
const MU: [f64; 2] = [0.3, -0.3];

#[test]
fn zero_rollout_noise_gives_zero_control() {
    let planner = di_planner(10, 16);
    let drift = DriftEstimate::fixed(MU.to_vec(), 0.05).unwrap();
    let noise = NoiseTensor::zeros(16, 10, 2);
    for gamma in [0.0, 1.0, 10.0] {
        let (u, sol) = planner.drpi_step_with_noise(&START, 0, &drift, gamma, &noise).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
        assert!(sol.theta_hat > sol.theta_star);
    }
}

#[test]
fn larger_radius_never_raises_the_selected_temperature() {
    let planner = di_planner(20, 200);
    let drift = DriftEstimate::fixed(MU.to_vec(), 0.05).unwrap();
    let seed = SeedSpec::new(3, 0, 0);
    let (_, neutral) = planner.drpi_step(&START, 0, &drift, 0.0, seed).unwrap();
    let (_, robust) = planner.drpi_step(&START, 0, &drift, 10.0, seed).unwrap();
    assert!(robust.theta_hat <= neutral.theta_hat);
    assert!(robust.lambda_eff >= neutral.lambda_eff);
    assert_eq!(neutral.theta_hat, planner.theta_star() * SearchConfig::default().theta_max_factor);
}

#[test]
fn step_index_past_the_horizon_is_rejected() {
    let planner = di_planner(5, 4);
    let drift = DriftEstimate::fixed(MU.to_vec(), 0.05).unwrap();
    assert!(planner.drpi_step(&START, 5, &drift, 1.0, SeedSpec::new(0, 0, 0)).is_err());
}

#[test]
fn episode_starting_in_the_goal_succeeds_immediately() {
    let planner = di_planner(10, 8);
    let rec = planner
        .run_episode(Scheme::Drpi, &[0.1, -0.1, 0.0, 0.0], &MU, &fixed(1.0), SeedSpec::new(1, 0, 0))
        .unwrap();
    assert_eq!(rec.status, EpisodeStatus::Success);
    assert_eq!(rec.arrive_time, Some(0.0));
    assert_eq!(rec.steps(), 0);
    assert_eq!(rec.states.len(), 1);
}

#[test]
fn episode_starting_inside_an_obstacle_collides_immediately() {
    let planner = di_planner(10, 8);
    let rec = planner
        .run_episode(Scheme::Pic, &[-1.5, 1.5, 0.0, 0.0], &MU, &fixed(1.0), SeedSpec::new(1, 0, 0))
        .unwrap();
    assert_eq!(rec.status, EpisodeStatus::Collision);
    assert_eq!(rec.arrive_time, None);
    assert_eq!(rec.steps(), 0);
}

#[test]
fn two_step_horizon_far_from_everything_times_out() {
    let nav = NavigationCost {
        obstacle: Rect::new(10.0, 11.0, 10.0, 11.0),
        boundary: Rect::new(-100.0, 100.0, -100.0, 100.0),
        ..NavigationCost::default()
    };
    let model = make_model(ModelFamily::DoubleIntegrator, ModelParams::default()).unwrap();
    let cost = CostModel::navigation(nav, 1e-3).unwrap();
    let planner = Planner::new(model, cost, 2, 0.05, 16, SearchConfig::default()).unwrap();
    let rec = planner
        .run_episode(Scheme::Drpi, &START, &MU, &fixed(1.0), SeedSpec::new(5, 2, 0))
        .unwrap();
    assert_eq!(rec.status, EpisodeStatus::Timeout);
    assert_eq!(rec.steps(), 2);
    assert_eq!(rec.states.len(), 3);
    assert_eq!(rec.increments.len(), 3);
    assert!(rec.realized_total_cost >= rec.realized_state_cost);
}

#[test]
fn plant_noise_does_not_depend_on_the_rollout_count() {
    let small = di_planner(6, 10);
    let large = di_planner(6, 40);
    let seed = SeedSpec::new(9, 4, 0);
    let a = small.run_episode(Scheme::Drpi, &START, &MU, &fixed(1.0), seed).unwrap();
    let b = large.run_episode(Scheme::Drpi, &START, &MU, &fixed(1.0), seed).unwrap();
    assert_eq!(a.increments, b.increments);
    assert_ne!(a.controls, b.controls);
}

#[test]
fn episodes_replay_bit_for_bit() {
    let planner = di_planner(8, 32);
    let seed = SeedSpec::new(77, 3, 0);
    let rc = RobustnessConfig::new(1.0, 0.1, GammaSchedule::FiniteSample, 2).unwrap();
    let a = planner.run_episode(Scheme::Drpi, &START, &MU, &rc, seed).unwrap();
    let b = planner.run_episode(Scheme::Drpi, &START, &MU, &rc, seed).unwrap();
    assert_eq!(a, b);
    let other = planner.run_episode(Scheme::Drpi, &START, &MU, &rc, SeedSpec::new(77, 4, 0)).unwrap();
    assert_ne!(a.increments, other.increments);
}

#[test]
fn drift_estimate_tracks_the_realized_increments() {
    let planner = di_planner(8, 16);
    let rec = planner
        .run_episode(Scheme::Drpi, &START, &MU, &fixed(1.0), SeedSpec::new(2, 0, 0))
        .unwrap();
    let dt = planner.dt();
    for (k, mu_hat) in rec.mu_hats.iter().enumerate() {
        for j in 0..2 {
            let mean = rec.increments[..=k].iter().map(|d| d[j]).sum::<f64>() / (k + 1) as f64;
            assert!((mu_hat[j] - mean / dt).abs() < 1e-12, "k={k} j={j}");
        }
    }
}

#[test]
fn pic_coincides_with_drpi_at_zero_radius() {
    let planner = di_planner(6, 24);
    let seed = SeedSpec::new(13, 1, 0);
    let pic = planner.run_episode(Scheme::Pic, &START, &MU, &fixed(1.0), seed).unwrap();
    let drpi = planner.run_episode(Scheme::Drpi, &START, &MU, &fixed(0.0), seed).unwrap();
    assert_eq!(pic.controls, drpi.controls);
    assert_eq!(pic.states, drpi.states);
    assert!(pic.gammas.iter().all(|&g| g == 0.0));
}

#[test]
fn finite_sample_schedule_shrinks_with_data() {
    let planner = di_planner(10, 8);
    let rc = RobustnessConfig::new(1.0, 0.1, GammaSchedule::FiniteSample, 2).unwrap();
    let rec = planner.run_episode(Scheme::Drpi, &START, &MU, &rc, SeedSpec::new(4, 0, 0)).unwrap();
    assert!(rec.gammas.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn unicycle_episode_runs_on_planar_pose() {
    let model = make_model(ModelFamily::Unicycle, ModelParams::default()).unwrap();
    let planner = Planner::new(model, CostModel::benchmark(), 4, 0.05, 16, SearchConfig::default()).unwrap();
    let x0 = [-3.5, 2.5, -std::f64::consts::FRAC_PI_4];
    let rec = planner
        .run_episode(Scheme::Drpi, &x0, &MU, &fixed(1.0), SeedSpec::new(0, 0, 0))
        .unwrap();
    assert_eq!(rec.controls[0].len(), 2);
    assert_eq!(rec.states[0].len(), 3);
}

#[test]
fn mismatched_control_weight_is_rejected() {
    let model = make_model(ModelFamily::ScalarLq, ModelParams::default()).unwrap();
    assert!(Planner::new(model, CostModel::benchmark(), 4, 0.05, 16, SearchConfig::default()).is_err());
}
