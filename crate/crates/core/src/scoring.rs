//! Analytic disruption scorers.
//!
//! [`reference_score`] scores a single robot placement and is the teacher
//! sampled to build training maps. [`gmm_costmap`] evaluates the same
//! Gaussian kernels directly over a whole grid; it is the proxemics baseline
//! the learned maps are compared against during navigation.

use serde::{Deserialize, Serialize};

use crate::costmap::CostMap;
use crate::geom::{distance_to_boundary, point_in_polygon, point_segment_distance, Point2};
use crate::graph::grid_coords_unchecked;
use crate::scenario::{Frame, Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialParams {
    pub sigma_front: f64,
    pub sigma_side: f64,
    pub sigma_back: f64,
    pub interaction_halfwidth: f64,
    pub wall_margin: f64,
    /// Lowest score the human and interaction kernels alone can produce.
    pub intimate_floor: f64,
}

impl Default for SocialParams {
    fn default() -> Self {
        Self {
            sigma_front: 1.0,
            sigma_side: 0.6,
            sigma_back: 0.5,
            interaction_halfwidth: 0.5,
            wall_margin: 0.35,
            intimate_floor: 0.0,
        }
    }
}

impl SocialParams {
    pub fn check(&self) -> Result<(), String> {
        let lengths = [self.sigma_front, self.sigma_side, self.sigma_back, self.interaction_halfwidth, self.wall_margin];
        if lengths.iter().any(|v| !(*v > 0.0)) {
            return Err("all social length parameters must be positive".into());
        }
        if !(0.0..1.0).contains(&self.intimate_floor) {
            return Err(format!("intimate_floor must lie in [0, 1), got {}", self.intimate_floor));
        }
        Ok(())
    }
}

/// Personal-space kernel. `rel` is the robot position in the human's frame
/// (human facing +x). Returns 1 at the human, decaying with distance; wider
/// in front than behind.
pub fn human_discomfort(rel: Point2, p: &SocialParams) -> f64 {
    let sx = if rel.x >= 0.0 { p.sigma_front } else { p.sigma_back };
    (-(rel.x * rel.x / (2.0 * sx * sx) + rel.y * rel.y / (2.0 * p.sigma_side * p.sigma_side))).exp()
}

fn capsule_discomfort(d: f64, p: &SocialParams) -> f64 {
    (-(d * d) / (2.0 * p.interaction_halfwidth * p.interaction_halfwidth)).exp()
}

fn wall_blocked(at: Point2, room: &[Point2], p: &SocialParams) -> bool {
    !point_in_polygon(at, room) || distance_to_boundary(at, room) < p.wall_margin
}

fn combine(d_social: f64, blocked: bool, p: &SocialParams) -> f64 {
    if blocked {
        return 0.0;
    }
    (1.0 - d_social).clamp(0.0, 1.0).max(p.intimate_floor)
}

/// Score the robot would get if it stood at `at` (robot-frame coordinates)
/// of scenario `s`.
pub fn score_at(s: &Scenario, at: Point2, p: &SocialParams) -> f64 {
    let d_humans = s
        .humans
        .iter()
        .map(|h| human_discomfort(h.pose.to_local(at), p))
        .fold(0.0, f64::max);
    let d_inter = s
        .interaction_segments()
        .iter()
        .map(|seg| capsule_discomfort(point_segment_distance(at, seg.a, seg.b), p))
        .fold(0.0, f64::max);
    combine(d_humans.max(d_inter), wall_blocked(at, &s.room, p), p)
}

/// Disruption score of the robot where it currently stands (the origin of a
/// robot-frame scenario).
pub fn reference_score(s: &Scenario, p: &SocialParams) -> Result<f64, ScenarioError> {
    if s.frame != Frame::Robot {
        return Err(ScenarioError::WrongFrame { expected: Frame::Robot, found: s.frame });
    }
    Ok(score_at(s, Point2::ORIGIN, p))
}

/// A 1D scorer: one scalar per scenario.
pub trait Scorer: Sync {
    fn score(&self, s: &Scenario) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceScorer {
    pub params: SocialParams,
}

impl Scorer for ReferenceScorer {
    fn score(&self, s: &Scenario) -> f64 {
        score_at(s, Point2::ORIGIN, &self.params)
    }
}

impl<F: Fn(&Scenario) -> f64 + Sync> Scorer for F {
    fn score(&self, s: &Scenario) -> f64 {
        self(s)
    }
}

struct HumanComponent {
    mean: Point2,
    cos: f64,
    sin: f64,
}

/// Gaussian-mixture proxemics map: one asymmetric Gaussian per human and one
/// capsule Gaussian per interaction, evaluated at every cell position.
pub fn gmm_costmap(s: &Scenario, p: &SocialParams, side: usize, area_side: f64) -> Result<CostMap, ScenarioError> {
    if s.frame != Frame::Robot {
        return Err(ScenarioError::WrongFrame { expected: Frame::Robot, found: s.frame });
    }
    assert!(side >= 2, "cost map side must be at least 2");
    let humans: Vec<HumanComponent> = s
        .humans
        .iter()
        .map(|h| HumanComponent { mean: h.pose.position(), cos: h.pose.theta.cos(), sin: h.pose.theta.sin() })
        .collect();
    let capsules = s.interaction_segments();

    let mut values = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let (x, y) = grid_coords_unchecked(i, j, side, area_side);
            let at = Point2::new(x, y);
            let mut mix = 0.0f64;
            for h in &humans {
                let d = at - h.mean;
                let rel = Point2::new(h.cos * d.x + h.sin * d.y, -h.sin * d.x + h.cos * d.y);
                mix = mix.max(human_discomfort(rel, p));
            }
            for c in &capsules {
                mix = mix.max(capsule_discomfort(point_segment_distance(at, c.a, c.b), p));
            }
            values.push(combine(mix, wall_blocked(at, &s.room, p), p));
        }
    }
    Ok(CostMap::new(side, area_side, values).expect("scores lie in [0, 1]"))
}
