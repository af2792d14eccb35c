//! Running, terminal and control costs.
//!
//! The running cost is `q(x) + ½uᵀRu`. For the navigation benchmarks
//!
//! ```text
//! q(x) = c1·‖x − x*‖ + c2·q_o(x) + c3·q_b(x),     ψ(x) = c_T·‖pos(x) − target‖
//! ```
//!
//! where `q_o` is 1 inside the closed obstacle rectangle and `q_b` is 1
//! strictly outside the boundary rectangle. Positions are the first two
//! state entries; `x*` is the target with every other component zero.

use nalgebra::DMatrix;

use crate::error::{check_finite, check_len, DrpiError, Result};

/// State-dependent part of a trajectory cost, as seen by the rollout engine.
pub trait PathCost: Sync {
    /// Running state cost rate `q(x)`.
    fn running(&self, x: &[f64]) -> f64;
    /// Terminal cost `ψ(x)`.
    fn terminal(&self, x: &[f64]) -> f64;
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Membership in the closed rectangle.
    #[inline]
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x_min && px <= self.x_max && py >= self.y_min && py <= self.y_max
    }

    /// True when `self` lies in the open interior of `outer`.
    pub fn strictly_inside(&self, outer: &Rect) -> bool {
        self.x_min > outer.x_min
            && self.x_max < outer.x_max
            && self.y_min > outer.y_min
            && self.y_max < outer.y_max
    }

    fn is_proper(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

/// Navigation cost with obstacle and boundary indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationCost {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub target: [f64; 2],
    pub goal_radius: f64,
    pub obstacle: Rect,
    pub boundary: Rect,
    pub terminal_weight: f64,
}

impl Default for NavigationCost {
    fn default() -> Self {
        NavigationCost {
            c1: 1e-2,
            c2: 1e2,
            c3: 1e2,
            target: [0.0, 0.0],
            goal_radius: 0.5,
            obstacle: Rect::new(-2.5, -0.5, 0.5, 2.5),
            boundary: Rect::new(-5.0, 5.0, -5.0, 5.0),
            terminal_weight: 10.0,
        }
    }
}

impl NavigationCost {
    #[inline]
    pub fn obstacle_indicator(&self, x: &[f64]) -> f64 {
        if self.obstacle.contains(x[0], x[1]) {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn boundary_indicator(&self, x: &[f64]) -> f64 {
        if self.boundary.contains(x[0], x[1]) {
            0.0
        } else {
            1.0
        }
    }

    /// Obstacle hit or boundary left.
    pub fn collides(&self, x: &[f64]) -> bool {
        self.obstacle.contains(x[0], x[1]) || !self.boundary.contains(x[0], x[1])
    }

    pub fn distance_to_target(&self, x: &[f64]) -> f64 {
        (x[0] - self.target[0]).hypot(x[1] - self.target[1])
    }

    pub fn reached_goal(&self, x: &[f64]) -> bool {
        self.distance_to_target(x) <= self.goal_radius
    }

    /// `‖x − x*‖₂` over the full state, with `x*` zero outside the position.
    #[inline]
    pub fn state_distance(&self, x: &[f64]) -> f64 {
        let dx = x[0] - self.target[0];
        let dy = x[1] - self.target[1];
        let rest: f64 = x[2..].iter().map(|v| v * v).sum();
        (dx * dx + dy * dy + rest).sqrt()
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cost.c1", self.c1),
            ("cost.c2", self.c2),
            ("cost.c3", self.c3),
            ("cost.terminal_weight", self.terminal_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DrpiError::invalid(name, "must be finite and nonnegative"));
            }
        }
        if !(self.goal_radius > 0.0 && self.goal_radius.is_finite()) {
            return Err(DrpiError::invalid("cost.goal_radius", "must be positive"));
        }
        check_finite("cost.target", &self.target)?;
        if !self.obstacle.is_proper() || !self.boundary.is_proper() {
            return Err(DrpiError::invalid("cost geometry", "degenerate rectangle"));
        }
        if !self.obstacle.strictly_inside(&self.boundary) {
            return Err(DrpiError::invalid(
                "cost.obstacle",
                "obstacle must lie strictly inside the boundary",
            ));
        }
        Ok(())
    }
}

impl PathCost for NavigationCost {
    #[inline]
    fn running(&self, x: &[f64]) -> f64 {
        self.c1 * self.state_distance(x)
            + self.c2 * self.obstacle_indicator(x)
            + self.c3 * self.boundary_indicator(x)
    }

    #[inline]
    fn terminal(&self, x: &[f64]) -> f64 {
        self.terminal_weight * self.distance_to_target(x)
    }
}

/// `q(x) = ½·q_x·‖x‖²`, `ψ(x) = ½·q_t·‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub q_x: f64,
    pub q_t: f64,
}

impl PathCost for QuadraticCost {
    #[inline]
    fn running(&self, x: &[f64]) -> f64 {
        0.5 * self.q_x * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[inline]
    fn terminal(&self, x: &[f64]) -> f64 {
        0.5 * self.q_t * x.iter().map(|v| v * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateCost {
    Navigation(NavigationCost),
    Quadratic(QuadraticCost),
}

impl PathCost for StateCost {
    #[inline]
    fn running(&self, x: &[f64]) -> f64 {
        match self {
            StateCost::Navigation(c) => c.running(x),
            StateCost::Quadratic(c) => c.running(x),
        }
    }

    #[inline]
    fn terminal(&self, x: &[f64]) -> f64 {
        match self {
            StateCost::Navigation(c) => c.terminal(x),
            StateCost::Quadratic(c) => c.terminal(x),
        }
    }
}

/// State cost plus the positive definite control weight `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    state: StateCost,
    r: DMatrix<f64>,
}

impl CostModel {
    pub fn new(state: StateCost, r: DMatrix<f64>) -> Result<Self> {
        if !r.is_square() {
            return Err(DrpiError::invalid("R", "control weight must be square"));
        }
        check_finite("R", r.as_slice())?;
        if (&r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) {
            return Err(DrpiError::invalid("R", "control weight must be symmetric"));
        }
        if r.clone().cholesky().is_none() {
            return Err(DrpiError::invalid("R", "control weight must be positive definite"));
        }
        match &state {
            StateCost::Navigation(nav) => nav.validate()?,
            StateCost::Quadratic(q) => {
                if !(q.q_x >= 0.0 && q.q_t >= 0.0) {
                    return Err(DrpiError::invalid("cost.q", "weights must be nonnegative"));
                }
            }
        }
        Ok(CostModel { state, r })
    }

    /// Navigation cost with `R = ρ·I₂`.
    pub fn navigation(nav: NavigationCost, rho: f64) -> Result<Self> {
        Self::new(StateCost::Navigation(nav), DMatrix::identity(2, 2) * rho)
    }

    /// The navigation benchmark cost: default geometry, `R = 10⁻³·I`.
    pub fn benchmark() -> Self {
        Self::navigation(NavigationCost::default(), 1e-3).expect("default benchmark cost is valid")
    }

    pub fn quadratic(q_x: f64, q_t: f64, r: f64) -> Result<Self> {
        Self::new(
            StateCost::Quadratic(QuadraticCost { q_x, q_t }),
            DMatrix::from_element(1, 1, r),
        )
    }

    pub fn state(&self) -> &StateCost {
        &self.state
    }

    pub fn navigation_cost(&self) -> Option<&NavigationCost> {
        match &self.state {
            StateCost::Navigation(nav) => Some(nav),
            StateCost::Quadratic(_) => None,
        }
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn control_dim(&self) -> usize {
        self.r.nrows()
    }

    /// `q(x)` with validation.
    pub fn state_cost(&self, x: &[f64]) -> Result<f64> {
        if matches!(self.state, StateCost::Navigation(_)) && x.len() < 2 {
            return Err(DrpiError::DimensionMismatch {
                what: "navigation state",
                expected: 2,
                got: x.len(),
            });
        }
        check_finite("state", x)?;
        Ok(self.state.running(x))
    }

    /// `ψ(x)` with validation.
    pub fn terminal_cost(&self, x: &[f64]) -> Result<f64> {
        self.state_cost(x)?;
        Ok(self.state.terminal(x))
    }

    /// `½·uᵀRu`.
    pub fn control_cost(&self, u: &[f64]) -> Result<f64> {
        check_len("control", self.r.nrows(), u.len())?;
        Ok(self.control_cost_unchecked(u))
    }

    #[inline]
    pub(crate) fn control_cost_unchecked(&self, u: &[f64]) -> f64 {
        let k = u.len();
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += u[i] * self.r[(i, j)] * u[j];
            }
        }
        0.5 * acc
    }

    /// Uncontrolled path cost `ψ(x_K) + Σ_{s=k+1}^{K−1} q(x_s)·dt` for the
    /// states `x_k..=x_K`. The start state carries no cost.
    pub fn trajectory_cost(&self, states: &[Vec<f64>], dt: f64) -> Result<f64> {
        let (last, rest) = states.split_last().ok_or(DrpiError::Empty("trajectory"))?;
        if !(dt > 0.0) {
            return Err(DrpiError::invalid("dt", "step size must be positive"));
        }
        let mut running = 0.0;
        for x in rest.iter().skip(1) {
            running += self.state_cost(x)? * dt;
        }
        Ok(running + self.terminal_cost(last)?)
    }
}

impl PathCost for CostModel {
    #[inline]
    fn running(&self, x: &[f64]) -> f64 {
        self.state.running(x)
    }

    #[inline]
    fn terminal(&self, x: &[f64]) -> f64 {
        self.state.terminal(x)
    }
}
