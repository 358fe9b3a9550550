//! Scenario entities, frame transforms and validation.
//!
//! A [`Scenario`] is a room polygon populated with humans, objects and
//! interactions, plus the robot pose and its goal. Scenarios are produced in
//! the world frame by [`generate_scenario`] and moved into the robot frame
//! with [`to_robot_frame`] before anything is scored or turned into a graph.

mod generate;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, OrientedBox, Point2};

pub use generate::{generate_scenario, GeneratorParams};
pub use validate::validate;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not place {what} after {attempts} attempts (room too crowded)")]
    Generation { what: String, attempts: usize },
    #[error("scenario must be in the {expected} frame, found {found}")]
    WrongFrame { expected: Frame, found: Frame },
    #[error("unknown scenario class {0:?} (expected S_A, S_B or S_C)")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in (-π, π].
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Expresses the world point `p` in this pose's local frame.
    pub fn to_local(&self, p: Point2) -> Point2 {
        (p - self.position()).rotated(-self.theta)
    }

    /// Maps a point expressed in this pose's local frame back to the world.
    pub fn to_world(&self, p: Point2) -> Point2 {
        p.rotated(self.theta) + self.position()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Human {
    pub id: u32,
    pub pose: Pose2D,
    pub walking: bool,
    /// m/s, zero for standing humans.
    pub speed: f64,
    pub waypoints: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntity {
    pub id: u32,
    pub pose: Pose2D,
    pub width: f64,
    pub depth: f64,
}

impl ObjectEntity {
    pub fn footprint(&self) -> OrientedBox {
        OrientedBox {
            center: self.pose.position(),
            theta: self.pose.theta,
            width: self.width,
            depth: self.depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    HumanHuman,
    HumanObject,
}

/// `a` is always a human; `b` is a human or an object depending on `kind`.
/// Human-human interactions are stored once and are symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    World,
    Robot,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::World => "world",
            Frame::Robot => "robot",
        })
    }
}

/// Population classes used for evaluation: (standing, walking) humans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioClass {
    #[serde(rename = "S_A")]
    SA,
    #[serde(rename = "S_B")]
    SB,
    #[serde(rename = "S_C")]
    SC,
}

impl ScenarioClass {
    pub const ALL: [ScenarioClass; 3] = [ScenarioClass::SA, ScenarioClass::SB, ScenarioClass::SC];

    /// (standing, walking) human counts.
    pub fn population(self) -> (usize, usize) {
        match self {
            ScenarioClass::SA => (2, 1),
            ScenarioClass::SB => (4, 2),
            ScenarioClass::SC => (5, 3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioClass::SA => "S_A",
            ScenarioClass::SB => "S_B",
            ScenarioClass::SC => "S_C",
        }
    }
}

impl fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioClass {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S_A" | "SA" | "A" => Ok(ScenarioClass::SA),
            "S_B" | "SB" | "B" => Ok(ScenarioClass::SB),
            "S_C" | "SC" | "C" => Ok(ScenarioClass::SC),
            other => Err(ScenarioError::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Closed polygon, vertices in order (closing edge implied).
    pub room: Vec<Point2>,
    pub humans: Vec<Human>,
    pub objects: Vec<ObjectEntity>,
    pub interactions: Vec<Interaction>,
    pub robot: Pose2D,
    pub goal: Point2,
    pub frame: Frame,
}

/// Endpoint of an interaction, resolved to a position.
#[derive(Debug, Clone, Copy)]
pub struct InteractionSegment {
    pub a: Point2,
    pub b: Point2,
}

impl Scenario {
    pub fn human(&self, id: u32) -> Option<&Human> {
        self.humans.iter().find(|h| h.id == id)
    }

    pub fn object(&self, id: u32) -> Option<&ObjectEntity> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Segments joining each pair of interacting entities. Interactions that
    /// reference missing entities are skipped.
    pub fn interaction_segments(&self) -> Vec<InteractionSegment> {
        self.interactions
            .iter()
            .filter_map(|it| {
                let a = self.human(it.a)?.pose.position();
                let b = match it.kind {
                    InteractionKind::HumanHuman => self.human(it.b)?.pose.position(),
                    InteractionKind::HumanObject => self.object(it.b)?.pose.position(),
                };
                Some(InteractionSegment { a, b })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Applies a rigid transform `p -> R(rot) (p - origin)` to every entity
    /// except the robot.
    fn map_entities(&mut self, origin: Point2, rot: f64) {
        let tp = |p: Point2| (p - origin).rotated(rot);
        let tpose = |p: &Pose2D| {
            let q = tp(p.position());
            Pose2D { x: q.x, y: q.y, theta: wrap_angle(p.theta + rot) }
        };
        for v in &mut self.room {
            *v = tp(*v);
        }
        for h in &mut self.humans {
            h.pose = tpose(&h.pose);
            for w in &mut h.waypoints {
                *w = tp(*w);
            }
        }
        for o in &mut self.objects {
            o.pose = tpose(&o.pose);
        }
        self.goal = tp(self.goal);
    }
}

/// Re-expresses a world-frame scenario relative to the robot: the robot ends up
/// at (0, 0, 0), its forward direction along +x and its left along +y.
pub fn to_robot_frame(s: &Scenario) -> Result<Scenario, ScenarioError> {
    if s.frame != Frame::World {
        return Err(ScenarioError::WrongFrame { expected: Frame::World, found: s.frame });
    }
    let mut out = s.clone();
    if s.robot.x != 0.0 || s.robot.y != 0.0 || s.robot.theta != 0.0 {
        out.map_entities(s.robot.position(), -s.robot.theta);
    }
    out.robot = Pose2D::default();
    out.frame = Frame::Robot;
    Ok(out)
}

/// Moves the scene by `(-dx, -dy)` around a robot that stays at the origin,
/// which is the same as placing the robot at `(dx, dy)` of the original scene.
pub fn shift_scenario(s: &Scenario, dx: f64, dy: f64) -> Result<Scenario, ScenarioError> {
    if s.frame != Frame::Robot {
        return Err(ScenarioError::WrongFrame { expected: Frame::Robot, found: s.frame });
    }
    let mut out = s.clone();
    if dx != 0.0 || dy != 0.0 {
        out.map_entities(Point2::new(dx, dy), 0.0);
    }
    Ok(out)
}
