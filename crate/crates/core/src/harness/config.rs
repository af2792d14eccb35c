//! Flat `section.key = value` experiment configuration.
//!
//! ```text
//! # comments run to the end of the line
//! model.family = unicycle
//! model.x0 = -3.5, 2.5, -0.7853981633974483
//! run.episodes = 100
//! robust.schedule = inverse_k
//! ```
//!
//! Every key is optional; omitted keys take the defaults of the selected
//! model family. Unknown or repeated keys are errors. [`ExperimentConfig::to_text`]
//! writes every key in a fixed order with round-trip float formatting, so
//! `parse(to_text(c)) == c` and emitting twice gives identical text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::{Planner, Scheme};
use crate::costs::{CostModel, NavigationCost, QuadraticCost, Rect, StateCost};
use crate::error::{DrpiError, Result};
use crate::models::{make_model, DynamicsModel, ModelFamily, ModelParams};
use crate::solver::SearchConfig;
use crate::uncertainty::{GammaSchedule, RobustnessConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Navigation,
    Quadratic,
}

impl CostKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CostKind::Navigation => "navigation",
            CostKind::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: ModelFamily,
    pub params: ModelParams,
    pub x0: Vec<f64>,
    /// The hidden disturbance drift that drives the simulated plant.
    pub true_mu: Vec<f64>,
    pub cost_kind: CostKind,
    /// Control weight `R = rho·I`.
    pub rho: f64,
    pub navigation: NavigationCost,
    pub quadratic: QuadraticCost,
    pub dt: f64,
    /// Episode length `T` in seconds; `K = T/dt`.
    pub horizon: f64,
    pub samples: usize,
    pub episodes: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub save_trajectories: bool,
    pub gamma: f64,
    pub epsilon: f64,
    pub schedule: GammaSchedule,
    pub search: SearchConfig,
}

const KEYS: &[&str] = &[
    "model.family",
    "model.a",
    "model.b",
    "model.sigma",
    "model.x0",
    "model.true_mu",
    "cost.kind",
    "cost.rho",
    "cost.c1",
    "cost.c2",
    "cost.c3",
    "cost.target",
    "cost.goal_radius",
    "cost.obstacle",
    "cost.boundary",
    "cost.terminal_weight",
    "cost.q_x",
    "cost.q_t",
    "run.dt",
    "run.horizon",
    "run.samples",
    "run.episodes",
    "run.seed",
    "run.schemes",
    "run.workers",
    "run.out_dir",
    "run.save_trajectories",
    "robust.gamma",
    "robust.epsilon",
    "robust.schedule",
    "search.grid_points",
    "search.rel_tol",
    "search.theta_max_factor",
];

fn config_err(key: &str, reason: impl Into<String>) -> DrpiError {
    DrpiError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| config_err(key, format!("`{v}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(config_err(key, "must be finite"))
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| config_err(key, format!("`{v}` is not a nonnegative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_fixed<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let list = parse_list(key, v)?;
    list.try_into()
        .map_err(|l: Vec<f64>| config_err(key, format!("expected {N} numbers, got {}", l.len())))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_err(key, "expected `true` or `false`")),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Defaults for a model family.
    pub fn defaults(family: ModelFamily) -> Self {
        let (x0, true_mu, cost_kind, rho, dt, horizon) = match family {
            ModelFamily::DoubleIntegrator => (
                vec![-3.5, 2.5, 0.0, 0.0],
                vec![0.3, -0.3],
                CostKind::Navigation,
                1e-3,
                0.05,
                25.0,
            ),
            ModelFamily::Unicycle => (
                vec![-3.5, 2.5, -std::f64::consts::FRAC_PI_4],
                vec![0.3, -0.3],
                CostKind::Navigation,
                1e-3,
                0.05,
                25.0,
            ),
            ModelFamily::ScalarLq => (vec![1.0], vec![0.0], CostKind::Quadratic, 1.0, 0.05, 1.0),
        };
        ExperimentConfig {
            family,
            params: ModelParams::default(),
            x0,
            true_mu,
            cost_kind,
            rho,
            navigation: NavigationCost::default(),
            quadratic: QuadraticCost { q_x: 1.0, q_t: 0.0 },
            dt,
            horizon,
            samples: 1000,
            episodes: 100,
            seed: 0,
            schemes: vec![Scheme::Drpi, Scheme::Pic],
            workers: 1,
            out_dir: PathBuf::from("out"),
            save_trajectories: false,
            gamma: 1.0,
            epsilon: 0.1,
            schedule: GammaSchedule::InverseK,
            search: SearchConfig::default(),
        }
    }

    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(&format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(config_err(key, "unknown key"));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(config_err(key, "given more than once"));
            }
        }

        let family = match entries.get("model.family") {
            Some(v) => v.parse().map_err(|e: DrpiError| config_err("model.family", e.to_string()))?,
            None => ModelFamily::DoubleIntegrator,
        };
        let mut cfg = Self::defaults(family);
        for (key, v) in &entries {
            cfg.apply(key, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DrpiError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model.family" => {}
            "model.a" => self.params.a = parse_f64(key, v)?,
            "model.b" => self.params.b = parse_f64(key, v)?,
            "model.sigma" => self.params.sigma = parse_f64(key, v)?,
            "model.x0" => self.x0 = parse_list(key, v)?,
            "model.true_mu" => self.true_mu = parse_list(key, v)?,
            "cost.kind" => {
                self.cost_kind = match v {
                    "navigation" => CostKind::Navigation,
                    "quadratic" => CostKind::Quadratic,
                    _ => return Err(config_err(key, "expected `navigation` or `quadratic`")),
                }
            }
            "cost.rho" => self.rho = parse_f64(key, v)?,
            "cost.c1" => self.navigation.c1 = parse_f64(key, v)?,
            "cost.c2" => self.navigation.c2 = parse_f64(key, v)?,
            "cost.c3" => self.navigation.c3 = parse_f64(key, v)?,
            "cost.target" => self.navigation.target = parse_fixed::<2>(key, v)?,
            "cost.goal_radius" => self.navigation.goal_radius = parse_f64(key, v)?,
            "cost.obstacle" => {
                let [a, b, c, d] = parse_fixed::<4>(key, v)?;
                self.navigation.obstacle = Rect::new(a, b, c, d);
            }
            "cost.boundary" => {
                let [a, b, c, d] = parse_fixed::<4>(key, v)?;
                self.navigation.boundary = Rect::new(a, b, c, d);
            }
            "cost.terminal_weight" => self.navigation.terminal_weight = parse_f64(key, v)?,
            "cost.q_x" => self.quadratic.q_x = parse_f64(key, v)?,
            "cost.q_t" => self.quadratic.q_t = parse_f64(key, v)?,
            "run.dt" => self.dt = parse_f64(key, v)?,
            "run.horizon" => self.horizon = parse_f64(key, v)?,
            "run.samples" => self.samples = parse_int(key, v)?,
            "run.episodes" => self.episodes = parse_int(key, v)?,
            "run.seed" => self.seed = parse_int(key, v)?,
            "run.schemes" => {
                self.schemes = v
                    .split(',')
                    .map(|s| s.trim().parse::<Scheme>())
                    .collect::<Result<_>>()
                    .map_err(|e| config_err(key, e.to_string()))?
            }
            "run.workers" => self.workers = parse_int(key, v)?,
            "run.out_dir" => self.out_dir = PathBuf::from(v),
            "run.save_trajectories" => self.save_trajectories = parse_bool(key, v)?,
            "robust.gamma" => self.gamma = parse_f64(key, v)?,
            "robust.epsilon" => self.epsilon = parse_f64(key, v)?,
            "robust.schedule" => {
                self.schedule = v.parse().map_err(|e: DrpiError| config_err(key, e.to_string()))?
            }
            "search.grid_points" => self.search.grid_points = parse_int(key, v)?,
            "search.rel_tol" => self.search.rel_tol = parse_f64(key, v)?,
            "search.theta_max_factor" => self.search.theta_max_factor = parse_f64(key, v)?,
            other => return Err(config_err(other, "unknown key")),
        }
        Ok(())
    }

    /// Canonical text form with every key.
    pub fn to_text(&self) -> String {
        let nav = &self.navigation;
        let rect = |r: &Rect| fmt_list(&[r.x_min, r.x_max, r.y_min, r.y_max]);
        let schemes: Vec<&str> = self.schemes.iter().map(|s| s.as_str()).collect();
        let values: Vec<String> = vec![
            self.family.to_string(),
            format!("{:?}", self.params.a),
            format!("{:?}", self.params.b),
            format!("{:?}", self.params.sigma),
            fmt_list(&self.x0),
            fmt_list(&self.true_mu),
            self.cost_kind.as_str().to_string(),
            format!("{:?}", self.rho),
            format!("{:?}", nav.c1),
            format!("{:?}", nav.c2),
            format!("{:?}", nav.c3),
            fmt_list(&nav.target),
            format!("{:?}", nav.goal_radius),
            rect(&nav.obstacle),
            rect(&nav.boundary),
            format!("{:?}", nav.terminal_weight),
            format!("{:?}", self.quadratic.q_x),
            format!("{:?}", self.quadratic.q_t),
            format!("{:?}", self.dt),
            format!("{:?}", self.horizon),
            self.samples.to_string(),
            self.episodes.to_string(),
            self.seed.to_string(),
            schemes.join(", "),
            self.workers.to_string(),
            self.out_dir.display().to_string(),
            self.save_trajectories.to_string(),
            format!("{:?}", self.gamma),
            format!("{:?}", self.epsilon),
            self.schedule.to_string(),
            self.search.grid_points.to_string(),
            format!("{:?}", self.search.rel_tol),
            format!("{:?}", self.search.theta_max_factor),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        let mut section = "";
        for (key, value) in KEYS.iter().zip(values) {
            let head = key.split('.').next().unwrap_or("");
            if head != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = head;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Number of control steps `K = T/dt`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn model(&self) -> Result<DynamicsModel> {
        make_model(self.family, self.params).map_err(|e| config_err("model", e.to_string()))
    }

    pub fn cost(&self) -> Result<CostModel> {
        let k = self.model()?.control_dim();
        let state = match self.cost_kind {
            CostKind::Navigation => StateCost::Navigation(self.navigation.clone()),
            CostKind::Quadratic => StateCost::Quadratic(self.quadratic),
        };
        CostModel::new(state, nalgebra::DMatrix::identity(k, k) * self.rho)
            .map_err(|e| config_err("cost", e.to_string()))
    }

    pub fn planner(&self) -> Result<Planner> {
        Planner::new(
            self.model()?,
            self.cost()?,
            self.steps(),
            self.dt,
            self.samples,
            self.search,
        )
    }

    pub fn robustness(&self) -> Result<RobustnessConfig> {
        let p = self.model()?.noise_dim();
        RobustnessConfig::new(self.gamma, self.epsilon, self.schedule, p)
            .map_err(|e| config_err("robust", e.to_string()))
    }

    /// Checks every cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(config_err("run.dt", "must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(config_err("run.horizon", "must be positive"));
        }
        let k = (self.horizon / self.dt).round();
        if k < 1.0 || (k * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(config_err("run.horizon", "must be a positive multiple of run.dt"));
        }
        if self.samples == 0 {
            return Err(config_err("run.samples", "must be at least 1"));
        }
        if self.episodes == 0 {
            return Err(config_err("run.episodes", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("run.workers", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(config_err("run.schemes", "need at least one scheme"));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(config_err("run.schemes", "schemes must be distinct"));
        }
        let model = self.model()?;
        if self.x0.len() != model.state_dim() {
            return Err(config_err(
                "model.x0",
                format!("expected {} entries, got {}", model.state_dim(), self.x0.len()),
            ));
        }
        if self.true_mu.len() != model.noise_dim() {
            return Err(config_err(
                "model.true_mu",
                format!("expected {} entries, got {}", model.noise_dim(), self.true_mu.len()),
            ));
        }
        self.search
            .validate()
            .map_err(|e| config_err("search", e.to_string()))?;
        self.robustness()?;
        self.planner().map_err(|e| match e {
            DrpiError::Config { .. } => e,
            other => config_err("model", other.to_string()),
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_double_integrator_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(ModelFamily::DoubleIntegrator));
        assert_eq!(cfg.steps(), 500);
        assert_eq!(cfg.samples, 1000);
        assert_eq!(cfg.true_mu, vec![0.3, -0.3]);
    }

    #[test]
    fn family_selects_defaults() {
        let cfg = ExperimentConfig::parse("model.family = unicycle\n").unwrap();
        assert_eq!(cfg.x0.len(), 3);
        assert!((cfg.x0[2] + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let lq = ExperimentConfig::parse("model.family = scalar_lq").unwrap();
        assert_eq!(lq.cost_kind, CostKind::Quadratic);
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# header\nrun.episodes = 7   # trailing\n\nrun.schemes = pic\nrobust.schedule = fixed\nrobust.gamma = 0.25\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.episodes, 7);
        assert_eq!(cfg.schemes, vec![Scheme::Pic]);
        assert_eq!(cfg.schedule, GammaSchedule::Fixed);
        assert_eq!(cfg.gamma, 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        let err = |t: &str| ExperimentConfig::parse(t).unwrap_err();
        assert!(matches!(err("run.colour = red"), DrpiError::Config { key, .. } if key == "run.colour"));
        assert!(matches!(err("run.dt = 0.05\nrun.dt = 0.1"), DrpiError::Config { .. }));
        assert!(matches!(err("run.dt"), DrpiError::Config { .. }));
        assert!(matches!(err("run.horizon = 1.01\nrun.dt = 0.1"), DrpiError::Config { key, .. } if key == "run.horizon"));
        assert!(matches!(err("model.x0 = 1, 2"), DrpiError::Config { key, .. } if key == "model.x0"));
        assert!(matches!(err("model.family = pendulum"), DrpiError::Config { .. }));
        assert!(matches!(err("run.episodes = 0"), DrpiError::Config { .. }));
        assert!(matches!(err("cost.obstacle = -6, 0, 0, 1"), DrpiError::Config { .. }));
        assert!(matches!(err("run.schemes = pic, pic"), DrpiError::Config { .. }));
    }

    #[test]
    fn text_round_trip_is_idempotent() {
        for family in ["double_integrator", "unicycle", "scalar_lq"] {
            let cfg = ExperimentConfig::parse(&format!("model.family = {family}\nrun.seed = 42")).unwrap();
            let text = cfg.to_text();
            let again = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(again.to_text(), text);
        }
    }
}
