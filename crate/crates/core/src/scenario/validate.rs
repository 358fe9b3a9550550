use std::collections::HashSet;
use std::f64::consts::PI;

use super::{InteractionKind, Pose2D, Scenario};
use crate::geom::{is_simple_polygon, point_in_polygon, Point2};

fn theta_ok(p: &Pose2D) -> bool {
    p.theta.is_finite() && p.theta > -PI && p.theta <= PI
}

fn right_angled(room: &[Point2]) -> bool {
    let n = room.len();
    (0..n).all(|i| {
        let prev = room[(i + n - 1) % n];
        let cur = room[i];
        let next = room[(i + 1) % n];
        let (u, v) = (cur - prev, next - cur);
        u.dot(v).abs() <= 1e-6 * u.norm() * v.norm()
    })
}

/// Checks every scenario invariant. Returns one human-readable description per
/// violation; an empty list means the scenario is well formed.
pub fn validate(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let room = &s.room;

    if room.len() != 4 && room.len() != 6 {
        out.push(format!(
            "room: polygon has {} vertices, expected 4 (rectangle) or 6 (L-shape)",
            room.len()
        ));
    }
    let room_ok = room.len() >= 3 && is_simple_polygon(room);
    if !room_ok {
        out.push("room: polygon is not simple".to_string());
    } else if !right_angled(room) {
        out.push("room: polygon corners are not right angles".to_string());
    }
    let inside = |p: Point2| room_ok && point_in_polygon(p, room);

    let mut ids = HashSet::new();
    for h in &s.humans {
        if !ids.insert(h.id) {
            out.push(format!("human {}: duplicate entity id", h.id));
        }
        if !theta_ok(&h.pose) {
            out.push(format!("human {}: orientation not in (-pi, pi]", h.id));
        }
        if !inside(h.pose.position()) {
            out.push(format!("human {}: outside the room polygon", h.id));
        }
        if !(h.speed >= 0.0) {
            out.push(format!("human {}: negative speed", h.id));
        }
        let moving = h.speed > 0.0 && !h.waypoints.is_empty();
        if h.walking != moving {
            out.push(format!(
                "human {}: walking flag disagrees with speed/waypoints",
                h.id
            ));
        }
        if h.waypoints.iter().any(|w| !inside(*w)) {
            out.push(format!("human {}: waypoint outside the room polygon", h.id));
        }
    }
    for o in &s.objects {
        if !ids.insert(o.id) {
            out.push(format!("object {}: duplicate entity id", o.id));
        }
        if !theta_ok(&o.pose) {
            out.push(format!("object {}: orientation not in (-pi, pi]", o.id));
        }
        if !(o.width > 0.0 && o.depth > 0.0) {
            out.push(format!("object {}: non-positive width or depth", o.id));
        }
        if !inside(o.pose.position()) {
            out.push(format!("object {}: outside the room polygon", o.id));
        }
    }
    if !theta_ok(&s.robot) {
        out.push("robot: orientation not in (-pi, pi]".to_string());
    }
    if !inside(s.robot.position()) {
        out.push("robot: outside the room polygon".to_string());
    }
    if !inside(s.goal) {
        out.push("goal: outside the room polygon".to_string());
    }

    for (k, it) in s.interactions.iter().enumerate() {
        if it.a == it.b {
            out.push(format!("interaction {k}: a and b are the same entity {}", it.a));
        }
        if s.human(it.a).is_none() {
            out.push(format!("interaction {k}: a = {} is not a human id", it.a));
        }
        let b_ok = match it.kind {
            InteractionKind::HumanHuman => s.human(it.b).is_some(),
            InteractionKind::HumanObject => s.object(it.b).is_some(),
        };
        if !b_ok {
            let want = match it.kind {
                InteractionKind::HumanHuman => "human",
                InteractionKind::HumanObject => "object",
            };
            out.push(format!("interaction {k}: b = {} is not a {want} id", it.b));
        }
    }
    out
}
