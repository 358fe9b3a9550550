use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Frame, Human, Interaction, InteractionKind, ObjectEntity, Pose2D, Scenario, ScenarioClass,
    ScenarioError,
};
use crate::geom::{distance_to_boundary, point_in_polygon, segment_inside_polygon, wrap_angle, Point2};
use crate::seeds::rng_for;

/// Sampling bounds for random rooms and their occupants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorParams {
    pub room_side: (f64, f64),
    pub l_shape_probability: f64,
    pub max_objects: usize,
    pub object_width: (f64, f64),
    pub object_depth: (f64, f64),
    pub interaction_probability: f64,
    pub human_human_distance: (f64, f64),
    pub human_object_distance: (f64, f64),
    pub waypoint_count: (usize, usize),
    pub walking_speed: (f64, f64),
    pub min_separation: f64,
    pub wall_clearance: f64,
    pub goal_distance: (f64, f64),
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            room_side: (6.0, 10.0),
            l_shape_probability: 0.5,
            max_objects: 4,
            object_width: (0.4, 1.2),
            object_depth: (0.4, 1.0),
            interaction_probability: 0.3,
            human_human_distance: (1.0, 2.5),
            human_object_distance: (0.5, 2.0),
            waypoint_count: (2, 4),
            walking_speed: (0.4, 0.8),
            min_separation: 0.6,
            wall_clearance: 0.6,
            goal_distance: (2.0, 8.0),
            max_attempts: 1000,
        }
    }
}

/// Placed entity, as a disc, for separation checks.
#[derive(Clone, Copy)]
struct Disc {
    c: Point2,
    r: f64,
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    p: &'a GeneratorParams,
    room: Vec<Point2>,
    lo: Point2,
    hi: Point2,
    placed: Vec<Disc>,
}

impl Builder<'_> {
    fn uniform(&mut self, (a, b): (f64, f64)) -> f64 {
        if a == b {
            a
        } else {
            self.rng.gen_range(a..b)
        }
    }

    fn angle(&mut self) -> f64 {
        wrap_angle(self.rng.gen_range(-PI..PI))
    }

    fn clear_of_walls(&self, c: Point2, clearance: f64) -> bool {
        point_in_polygon(c, &self.room) && distance_to_boundary(c, &self.room) >= clearance
    }

    fn separated(&self, d: Disc, skip: Option<usize>) -> bool {
        self.placed.iter().enumerate().all(|(k, o)| {
            Some(k) == skip || d.c.dist(o.c) - d.r - o.r >= self.p.min_separation
        })
    }

    fn random_point(&mut self, clearance: f64) -> Option<Point2> {
        for _ in 0..self.p.max_attempts {
            let c = Point2::new(self.uniform((self.lo.x, self.hi.x)), self.uniform((self.lo.y, self.hi.y)));
            if self.clear_of_walls(c, clearance) {
                return Some(c);
            }
        }
        None
    }

    /// Rejection-samples a free disc of radius `r`.
    fn place(&mut self, r: f64, what: &str) -> Result<Point2, ScenarioError> {
        for _ in 0..self.p.max_attempts {
            let c = Point2::new(self.uniform((self.lo.x, self.hi.x)), self.uniform((self.lo.y, self.hi.y)));
            if self.clear_of_walls(c, self.p.wall_clearance.max(r + 0.1)) && self.separated(Disc { c, r }, None) {
                return Ok(c);
            }
        }
        Err(ScenarioError::Generation { what: what.to_string(), attempts: self.p.max_attempts })
    }
}

fn room_polygon(w: f64, h: f64, cut: Option<usize>) -> Vec<Point2> {
    let (hw, hh) = (w / 2.0, h / 2.0);
    let pts: &[(f64, f64)] = match cut {
        None => &[(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)],
        Some(0) => &[(0.0, 0.0), (w, 0.0), (w, hh), (hw, hh), (hw, h), (0.0, h)],
        Some(1) => &[(0.0, 0.0), (w, 0.0), (w, h), (hw, h), (hw, hh), (0.0, hh)],
        Some(2) => &[(hw, 0.0), (w, 0.0), (w, h), (0.0, h), (0.0, hh), (hw, hh)],
        Some(_) => &[(0.0, 0.0), (hw, 0.0), (hw, hh), (w, hh), (w, h), (0.0, h)],
    };
    // Centre the bounding box on the world origin.
    pts.iter().map(|&(x, y)| Point2::new(x - hw, y - hh)).collect()
}

/// Generates a random world-frame scenario of the given class with the
/// default [`GeneratorParams`]. Deterministic in `(class, seed)`.
pub fn generate_scenario(class: ScenarioClass, seed: u64) -> Result<Scenario, ScenarioError> {
    GeneratorParams::default().generate(class, seed)
}

impl GeneratorParams {
    pub fn generate(&self, class: ScenarioClass, seed: u64) -> Result<Scenario, ScenarioError> {
        let mut rng = rng_for(seed, class as u64);
        let w = rng.gen_range(self.room_side.0..=self.room_side.1);
        let h = rng.gen_range(self.room_side.0..=self.room_side.1);
        let cut = rng.gen_bool(self.l_shape_probability).then(|| rng.gen_range(0..4usize));
        let room = room_polygon(w, h, cut);
        let mut b = Builder {
            rng,
            p: self,
            lo: Point2::new(-w / 2.0, -h / 2.0),
            hi: Point2::new(w / 2.0, h / 2.0),
            room,
            placed: Vec::new(),
        };

        let (n_standing, n_walking) = class.population();
        let n_humans = (n_standing + n_walking) as u32;

        let n_objects = b.rng.gen_range(0..=self.max_objects);
        let mut objects = Vec::with_capacity(n_objects);
        for k in 0..n_objects {
            let width = b.uniform(self.object_width);
            let depth = b.uniform(self.object_depth);
            let r = 0.5 * width.hypot(depth);
            let c = b.place(r, "object")?;
            let theta = b.angle();
            b.placed.push(Disc { c, r });
            objects.push(ObjectEntity { id: n_humans + k as u32, pose: Pose2D::new(c.x, c.y, theta), width, depth });
        }

        let mut humans: Vec<Human> = Vec::with_capacity(n_humans as usize);
        let mut interactions = Vec::new();
        let mut paired = vec![false; n_humans as usize];

        for k in 0..n_standing {
            let id = k as u32;
            let mut placed = false;
            if b.rng.gen_bool(self.interaction_probability) {
                let partners: Vec<usize> = (0..k).filter(|&j| !paired[j]).collect();
                let want_hh = match (partners.is_empty(), objects.is_empty()) {
                    (true, true) => None,
                    (false, true) => Some(true),
                    (true, false) => Some(false),
                    (false, false) => Some(b.rng.gen_bool(0.5)),
                };
                if let Some(hh) = want_hh {
                    let (target, target_disc, r_target) = if hh {
                        let j = partners[b.rng.gen_range(0..partners.len())];
                        (j, objects.len() + j, 0.0)
                    } else {
                        let j = b.rng.gen_range(0..objects.len());
                        let o: &ObjectEntity = &objects[j];
                        (j, j, 0.5 * o.width.hypot(o.depth))
                    };
                    let center = b.placed[target_disc].c;
                    let span = if hh { self.human_human_distance } else { self.human_object_distance };
                    for _ in 0..self.max_attempts {
                        let d = b.uniform(span) + r_target;
                        let phi = b.angle();
                        let c = center + Point2::new(phi.cos(), phi.sin()) * d;
                        if b.clear_of_walls(c, self.wall_clearance)
                            && b.separated(Disc { c, r: 0.0 }, Some(target_disc))
                        {
                            humans.push(Human {
                                id,
                                pose: Pose2D::new(c.x, c.y, phi + PI),
                                walking: false,
                                speed: 0.0,
                                waypoints: vec![],
                            });
                            b.placed.push(Disc { c, r: 0.0 });
                            if hh {
                                humans[target].pose.theta = wrap_angle(phi);
                                paired[target] = true;
                                paired[k] = true;
                                interactions.push(Interaction { kind: InteractionKind::HumanHuman, a: id, b: target as u32 });
                            } else {
                                paired[k] = true;
                                interactions.push(Interaction { kind: InteractionKind::HumanObject, a: id, b: objects[target].id });
                            }
                            placed = true;
                            break;
                        }
                    }
                }
            }
            if !placed {
                let c = b.place(0.0, "standing human")?;
                let theta = b.angle();
                b.placed.push(Disc { c, r: 0.0 });
                humans.push(Human { id, pose: Pose2D::new(c.x, c.y, theta), walking: false, speed: 0.0, waypoints: vec![] });
            }
        }

        for k in n_standing..(n_standing + n_walking) {
            let c = b.place(0.0, "walking human")?;
            let mut route = None;
            for _ in 0..self.max_attempts {
                let n_wp = b.rng.gen_range(self.waypoint_count.0..=self.waypoint_count.1);
                let wps: Option<Vec<Point2>> = (0..n_wp).map(|_| b.random_point(self.wall_clearance)).collect();
                let Some(wps) = wps else { break };
                let mut legs = std::iter::once(c).chain(wps.iter().copied()).collect::<Vec<_>>();
                legs.push(wps[0]);
                if legs.windows(2).all(|l| segment_inside_polygon(l[0], l[1], &b.room)) {
                    route = Some(wps);
                    break;
                }
            }
            let wps = route.ok_or(ScenarioError::Generation {
                what: "walking route".into(),
                attempts: self.max_attempts,
            })?;
            let speed = b.uniform(self.walking_speed);
            let heading = (wps[0] - c).y.atan2((wps[0] - c).x);
            b.placed.push(Disc { c, r: 0.0 });
            humans.push(Human { id: k as u32, pose: Pose2D::new(c.x, c.y, heading), walking: true, speed, waypoints: wps });
        }

        let rc = b.place(0.0, "robot")?;
        let robot = Pose2D::new(rc.x, rc.y, b.angle());
        b.placed.push(Disc { c: rc, r: 0.0 });

        let mut goal = None;
        for _ in 0..self.max_attempts {
            let Ok(g) = b.place(0.0, "goal") else { break };
            let d = g.dist(rc);
            if d >= self.goal_distance.0 && d <= self.goal_distance.1 {
                goal = Some(g);
                break;
            }
        }
        let goal = goal.ok_or(ScenarioError::Generation { what: "goal".into(), attempts: self.max_attempts })?;

        Ok(Scenario { room: b.room, humans, objects, interactions, robot, goal, frame: Frame::World })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::validate;

    #[test]
    fn class_populations() {
        for (class, total, walking) in [(ScenarioClass::SA, 3, 1), (ScenarioClass::SB, 6, 2), (ScenarioClass::SC, 8, 3)] {
            for seed in 0..20 {
                let s = generate_scenario(class, seed).unwrap();
                assert_eq!(s.humans.len(), total);
                assert_eq!(s.humans.iter().filter(|h| h.walking).count(), walking);
                assert!(s.objects.len() <= 4);
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_scenario(ScenarioClass::SA, 7).unwrap();
        let b = generate_scenario(ScenarioClass::SA, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_scenario(ScenarioClass::SA, 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn always_valid() {
        for class in ScenarioClass::ALL {
            for seed in 0..300 {
                let s = generate_scenario(class, seed).unwrap();
                let v = validate(&s);
                assert!(v.is_empty(), "{class} seed {seed}: {v:?}");
            }
        }
    }

    #[test]
    fn interactions_appear_and_face_each_other() {
        let mut hh = 0;
        let mut ho = 0;
        for seed in 0..200 {
            let s = generate_scenario(ScenarioClass::SC, seed).unwrap();
            for it in &s.interactions {
                let a = s.human(it.a).unwrap();
                let b_pos = match it.kind {
                    InteractionKind::HumanHuman => {
                        hh += 1;
                        let b = s.human(it.b).unwrap();
                        let d = a.pose.position().dist(b.pose.position());
                        assert!((1.0..=2.5 + 1e-9).contains(&d), "pair distance {d}");
                        b.pose.position()
                    }
                    InteractionKind::HumanObject => {
                        ho += 1;
                        s.object(it.b).unwrap().pose.position()
                    }
                };
                let rel = a.pose.to_local(b_pos);
                assert!(rel.y.abs() < 1e-6 && rel.x > 0.0, "human {} does not face its partner", a.id);
            }
        }
        assert!(hh > 0 && ho > 0);
    }

    #[test]
    fn overcrowded_room_fails() {
        let p = GeneratorParams { room_side: (1.5, 1.5), max_attempts: 50, ..Default::default() };
        assert!(matches!(p.generate(ScenarioClass::SC, 1), Err(ScenarioError::Generation { .. })));
    }
}
