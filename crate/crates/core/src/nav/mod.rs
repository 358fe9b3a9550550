//! Planning and simulated navigation over social cost maps.

mod astar;
mod bench;
mod grid;
mod metrics;
mod sim;

use serde::{Deserialize, Serialize};

pub use astar::{astar, astar_observed, moves, octile, Cell, PlanResult};
pub use bench::{benchmark, benchmark_with, episode_scenario, mean_std, reports_to_csv, BenchmarkReport, MetricSummary};
pub use grid::{fuse_cost, NavGrid, LETHAL};
pub use metrics::{metrics_from_tracks, EpisodeMetrics, METRIC_NAMES};
pub use sim::{
    compute_metrics, run_episode, scenario_hash, EpisodeResult, GmmProvider, MapProvider, ModelProvider, Outcome, TeacherProvider,
};

use crate::geom::Point2;
use crate::scenario::ScenarioError;

#[derive(Debug, thiserror::Error)]
pub enum NavError {
    #[error("navigation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl TimedPose {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Cost fusion, controller and metric settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavConfig {
    pub cost_floor: f64,
    pub lambda: f64,
    pub lethal_threshold: f64,
    /// Metres.
    pub robot_radius: f64,
    /// Extra clearance added to the robot radius when marking walls and
    /// objects lethal, covering the grid discretisation.
    pub inflation_margin: f64,
    /// m/s.
    pub v_max: f64,
    /// rad/s.
    pub omega_max: f64,
    /// Seconds.
    pub dt: f64,
    pub replan_interval: f64,
    pub timeout: f64,
    pub goal_radius: f64,
    /// Distance along the path the controller steers towards.
    pub lookahead: f64,
    pub intimate_distance: f64,
    pub personal_distance: f64,
    pub interaction_distance: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            cost_floor: 0.05,
            lambda: 1.0,
            lethal_threshold: 0.05,
            robot_radius: 0.25,
            inflation_margin: 0.07,
            v_max: 0.55,
            omega_max: 1.0,
            dt: 0.1,
            replan_interval: 0.5,
            timeout: 60.0,
            goal_radius: 0.3,
            lookahead: 0.6,
            intimate_distance: 0.45,
            personal_distance: 1.2,
            interaction_distance: 0.5,
        }
    }
}

impl NavConfig {
    pub fn inflation_radius(&self) -> f64 {
        self.robot_radius + self.inflation_margin
    }

    pub fn check(&self) -> Result<(), NavError> {
        let positive = [self.cost_floor, self.v_max, self.omega_max, self.dt, self.replan_interval, self.timeout, self.goal_radius, self.lookahead];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(NavError::Config("cost floor, speeds, timing, goal radius and lookahead must be positive".into()));
        }
        let non_negative = [self.lambda, self.lethal_threshold, self.robot_radius, self.inflation_margin];
        if non_negative.iter().any(|v| !(*v >= 0.0)) {
            return Err(NavError::Config("lambda, lethal threshold, radius and margin must be non-negative".into()));
        }
        if !(self.intimate_distance > 0.0 && self.intimate_distance <= self.personal_distance) {
            return Err(NavError::Config("intimate distance must be positive and at most the personal distance".into()));
        }
        if !(self.interaction_distance > 0.0) {
            return Err(NavError::Config("interaction distance must be positive".into()));
        }
        Ok(())
    }
}
