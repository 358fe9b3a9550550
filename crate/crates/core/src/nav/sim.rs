use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::astar::{astar, moves, Cell, PlanResult};
use super::grid::{fuse_cost, NavGrid};
use super::metrics::{metrics_from_tracks, EpisodeMetrics};
use super::{NavConfig, NavError, TimedPose};
use crate::bootstrap::sample_map;
use crate::costmap::CostMap;
use crate::geom::{distance_to_boundary, point_in_polygon, point_segment_distance, wrap_angle, Point2};
use crate::graph::{build_scene_graph, GraphConfig};
use crate::nn::Sngnn2d;
use crate::scalar::Scalar;
use crate::scenario::{to_robot_frame, Frame, Human, Pose2D, Scenario};
use crate::scoring::{gmm_costmap, ReferenceScorer, SocialParams};

/// Source of robot-centred social cost maps during an episode.
pub trait MapProvider: Sync {
    fn name(&self) -> &str;
    /// Map for a robot-frame scenario.
    fn cost_map(&self, s: &Scenario) -> Result<CostMap, String>;
}

pub struct ModelProvider<'a, T: Scalar> {
    pub model: &'a Sngnn2d<T>,
    pub graph: GraphConfig,
}

impl<T: Scalar> MapProvider for ModelProvider<'_, T> {
    fn name(&self) -> &str {
        "sngnn2d"
    }

    fn cost_map(&self, s: &Scenario) -> Result<CostMap, String> {
        let g = build_scene_graph(s, &self.graph).map_err(|e| e.to_string())?;
        self.model.forward(&g).map_err(|e| e.to_string())
    }
}

pub struct GmmProvider {
    pub params: SocialParams,
    pub side: usize,
    pub area_side: f64,
}

impl MapProvider for GmmProvider {
    fn name(&self) -> &str {
        "gmm"
    }

    fn cost_map(&self, s: &Scenario) -> Result<CostMap, String> {
        gmm_costmap(s, &self.params, self.side, self.area_side).map_err(|e| e.to_string())
    }
}

/// Builds each map by querying the pointwise teacher at every cell.
pub struct TeacherProvider {
    pub params: SocialParams,
    pub side: usize,
    pub area_side: f64,
}

impl MapProvider for TeacherProvider {
    fn name(&self) -> &str {
        "teacher"
    }

    fn cost_map(&self, s: &Scenario) -> Result<CostMap, String> {
        sample_map(s, &ReferenceScorer { params: self.params }, self.side, self.area_side).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cause")]
pub enum Outcome {
    Reached,
    Timeout,
    Collision,
    ProviderFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub provider: String,
    /// World-frame scenario at t = 0.
    pub scenario: Scenario,
    pub scenario_hash: String,
    pub trajectory: Vec<TimedPose>,
    /// One track per human, in scenario order, sampled with the trajectory.
    pub human_tracks: Vec<Vec<TimedPose>>,
    pub reached_goal: bool,
    pub outcome: Outcome,
    pub replans: usize,
    pub metrics: EpisodeMetrics,
}

impl EpisodeResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode serializes")
    }
}

pub fn compute_metrics(e: &EpisodeResult, cfg: &NavConfig) -> EpisodeMetrics {
    metrics_from_tracks(&e.trajectory, &e.human_tracks, &e.scenario, cfg)
}

pub fn scenario_hash(s: &Scenario) -> String {
    Sha256::digest(s.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

struct Walker {
    target: usize,
}

/// Advances a walking human by `dt` along its cyclic waypoint route.
fn step_human(h: &mut Human, w: &mut Walker, dt: f64) {
    if !h.walking || h.waypoints.is_empty() {
        return;
    }
    let mut budget = h.speed * dt;
    let mut p = h.pose.position();
    let mut heading = h.pose.theta;
    for _ in 0..=h.waypoints.len() {
        let goal = h.waypoints[w.target];
        let d = p.dist(goal);
        if d > 1e-12 {
            heading = (goal - p).y.atan2((goal - p).x);
        }
        if d > budget {
            p = p + (goal - p) * (budget / d);
            break;
        }
        budget -= d;
        p = goal;
        w.target = (w.target + 1) % h.waypoints.len();
    }
    h.pose = Pose2D::new(p.x, p.y, heading);
}

fn collides(p: Point2, s: &Scenario, radius: f64) -> bool {
    !point_in_polygon(p, &s.room)
        || distance_to_boundary(p, &s.room) < radius
        || s.objects.iter().any(|o| o.footprint().distance(p) < radius)
}

/// Reachable cell closest to `goal` (ties to the lowest index).
fn goal_cell(grid: &NavGrid, start: Cell, goal: Point2) -> Cell {
    let mut seen = vec![false; grid.side * grid.side];
    let mut stack = vec![start];
    seen[grid.index(start)] = true;
    let mut best = (grid.cell_world(start).dist(goal), grid.index(start), start);
    while let Some(c) = stack.pop() {
        for (n, _) in moves(grid.side, &grid.costs, c) {
            let k = grid.index(n);
            if !seen[k] {
                seen[k] = true;
                let d = grid.cell_world(n).dist(goal);
                if (d, k) < (best.0, best.1) {
                    best = (d, k, n);
                }
                stack.push(n);
            }
        }
    }
    best.2
}

/// Point `lookahead` metres along `path` past the point nearest to `p`.
fn lookahead_point(path: &[Point2], p: Point2, lookahead: f64) -> Point2 {
    if path.len() == 1 {
        return path[0];
    }
    let mut seg = 0;
    let mut best = f64::INFINITY;
    for (k, w) in path.windows(2).enumerate() {
        let d = point_segment_distance(p, w[0], w[1]);
        if d < best {
            best = d;
            seg = k;
        }
    }
    let (a, b) = (path[seg], path[seg + 1]);
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let mut from = a + ab * t;
    let mut left = lookahead;
    for k in seg + 1..path.len() {
        let d = from.dist(path[k]);
        if d >= left {
            return from + (path[k] - from) * (left / d);
        }
        left -= d;
        from = path[k];
    }
    *path.last().unwrap()
}

/// Runs one episode of `world` (a world-frame scenario) with maps from
/// `provider`.
pub fn run_episode(world: &Scenario, provider: &dyn MapProvider, cfg: &NavConfig) -> Result<EpisodeResult, NavError> {
    cfg.check()?;
    if world.frame != Frame::World {
        return Err(NavError::Config(format!("episodes start from a world-frame scenario, got {}", world.frame)));
    }
    let dt = cfg.dt;
    let steps = (cfg.timeout / dt).round() as usize;
    let replan_every = ((cfg.replan_interval / dt).round() as usize).max(1);
    let mut state = world.clone();
    let mut walkers: Vec<Walker> = state.humans.iter().map(|_| Walker { target: 0 }).collect();
    let mut robot = world.robot;
    let record = |t: f64, p: Pose2D| TimedPose { t, x: p.x, y: p.y, theta: p.theta };
    let mut trajectory = vec![record(0.0, robot)];
    let mut human_tracks: Vec<Vec<TimedPose>> = state.humans.iter().map(|h| vec![record(0.0, h.pose)]).collect();
    let mut path: Vec<Point2> = vec![robot.position()];
    let mut replans = 0;
    let mut outcome = Outcome::Timeout;

    if robot.position().dist(world.goal) < cfg.goal_radius {
        outcome = Outcome::Reached;
    }
    for step in 0..steps {
        if outcome != Outcome::Timeout {
            break;
        }
        if step % replan_every == 0 {
            state.robot = robot;
            let local = to_robot_frame(&state).map_err(|e| NavError::Config(e.to_string()))?;
            let map = match provider.cost_map(&local) {
                Ok(m) => m,
                Err(e) => {
                    outcome = Outcome::ProviderFailure(e);
                    break;
                }
            };
            let mut grid = fuse_cost(&map, &state, robot, cfg);
            let start = grid.clamped_cell(robot.position());
            let si = grid.index(start);
            if !grid.costs[si].is_finite() {
                grid.costs[si] = cfg.cost_floor;
            }
            let target = goal_cell(&grid, start, world.goal);
            replans += 1;
            path = match astar(&grid, start, target) {
                PlanResult::Found { cells, .. } => {
                    let mut pts: Vec<Point2> = cells.iter().map(|&c| grid.cell_world(c)).collect();
                    pts[0] = robot.position();
                    if grid.world_cell(world.goal) == Some(target) && pts.len() > 1 {
                        *pts.last_mut().unwrap() = world.goal;
                    }
                    pts
                }
                PlanResult::NoPath => vec![robot.position()],
            };
        }

        let pos = robot.position();
        let aim = lookahead_point(&path, pos, cfg.lookahead);
        let (v, omega) = if aim.dist(pos) < 1e-9 {
            (0.0, 0.0)
        } else {
            let err = wrap_angle((aim - pos).y.atan2((aim - pos).x) - robot.theta);
            let omega = (err / dt).clamp(-cfg.omega_max, cfg.omega_max);
            let end = *path.last().unwrap();
            let v = (cfg.v_max * err.cos().max(0.0)).min(pos.dist(end) / dt);
            (v, omega)
        };
        let theta = wrap_angle(robot.theta + omega * dt);
        robot = Pose2D::new(pos.x + v * theta.cos() * dt, pos.y + v * theta.sin() * dt, theta);
        for (h, w) in state.humans.iter_mut().zip(&mut walkers) {
            step_human(h, w, dt);
        }
        let t = (step + 1) as f64 * dt;
        trajectory.push(record(t, robot));
        for (track, h) in human_tracks.iter_mut().zip(&state.humans) {
            track.push(record(t, h.pose));
        }
        if collides(robot.position(), world, cfg.robot_radius) {
            outcome = Outcome::Collision;
        } else if robot.position().dist(world.goal) < cfg.goal_radius {
            outcome = Outcome::Reached;
        }
    }
    let metrics = metrics_from_tracks(&trajectory, &human_tracks, world, cfg);
    Ok(EpisodeResult {
        provider: provider.name().to_string(),
        scenario: world.clone(),
        scenario_hash: scenario_hash(world),
        trajectory,
        human_tracks,
        reached_goal: outcome == Outcome::Reached,
        outcome,
        replans,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::grid::LETHAL;
    use crate::scenario::{Interaction, InteractionKind, ObjectEntity};

    fn room(h: f64) -> Vec<Point2> {
        vec![Point2::new(-h, -h), Point2::new(h, -h), Point2::new(h, h), Point2::new(-h, h)]
    }

    fn empty(goal: Point2) -> Scenario {
        Scenario {
            room: room(4.0),
            humans: vec![],
            objects: vec![],
            interactions: vec![],
            robot: Pose2D::new(-2.5, -1.0, 0.3),
            goal,
            frame: Frame::World,
        }
    }

    fn gmm() -> GmmProvider {
        GmmProvider { params: SocialParams::default(), side: 73, area_side: 10.0 }
    }

    #[test]
    fn straight_shot_in_empty_room() {
        let s = empty(Point2::new(2.5, 1.0));
        let e = run_episode(&s, &gmm(), &NavConfig::default()).unwrap();
        assert!(e.reached_goal, "{:?}", e.outcome);
        let straight = s.robot.position().dist(s.goal);
        assert!(e.metrics.d_t <= 1.1 * straight, "{} vs {straight}", e.metrics.d_t);
        let ts: Vec<f64> = e.trajectory.iter().map(|p| p.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0] && (w[1] - w[0] - 0.1).abs() < 1e-9));
    }

    #[test]
    fn walks_around_interaction() {
        let mut s = empty(Point2::new(2.5, 0.0));
        s.robot = Pose2D::new(-2.5, 0.0, 0.0);
        let h = |id, y: f64, th: f64| Human { id, pose: Pose2D::new(0.0, y, th), walking: false, speed: 0.0, waypoints: vec![] };
        s.humans = vec![h(0, 1.1, -std::f64::consts::FRAC_PI_2), h(1, -1.1, std::f64::consts::FRAC_PI_2)];
        s.interactions = vec![Interaction { kind: InteractionKind::HumanHuman, a: 0, b: 1 }];
        let e = run_episode(&s, &gmm(), &NavConfig::default()).unwrap();
        assert!(e.reached_goal, "{:?}", e.outcome);
        assert_eq!(e.metrics.si_r, 0.0);
        assert_eq!(e.metrics.si_i, 0.0);
    }

    #[test]
    fn goal_inside_object_times_out() {
        let mut s = empty(Point2::new(2.0, 2.0));
        s.objects.push(ObjectEntity { id: 0, pose: Pose2D::new(2.0, 2.0, 0.0), width: 1.0, depth: 1.0 });
        let cfg = NavConfig { timeout: 20.0, ..NavConfig::default() };
        let e = run_episode(&s, &gmm(), &cfg).unwrap();
        assert!(!e.reached_goal);
        assert_eq!(e.outcome, Outcome::Timeout);
        assert!((e.metrics.tau - 20.0).abs() < 1e-9);
    }

    struct Failing;
    impl MapProvider for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn cost_map(&self, _: &Scenario) -> Result<CostMap, String> {
            Err("no map".into())
        }
    }

    #[test]
    fn provider_failure_is_reported() {
        let e = run_episode(&empty(Point2::new(2.0, 0.0)), &Failing, &NavConfig::default()).unwrap();
        assert_eq!(e.outcome, Outcome::ProviderFailure("no map".into()));
        assert!(!e.reached_goal);
    }

    #[test]
    fn walkers_follow_route() {
        let mut h = Human { id: 0, pose: Pose2D::new(0.0, 0.0, 0.0), walking: true, speed: 0.5, waypoints: vec![Point2::new(1.0, 0.0), Point2::new(1.0, 1.0)] };
        let mut w = Walker { target: 0 };
        for _ in 0..30 {
            step_human(&mut h, &mut w, 0.1);
        }
        // 1.5 m: past the first waypoint, half way up the second leg.
        assert!(h.pose.position().dist(Point2::new(1.0, 0.5)) < 1e-9);
        assert!((h.pose.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        for _ in 0..10 {
            step_human(&mut h, &mut w, 0.1);
        }
        // Reached (1, 1) then heads back towards (1, 0).
        assert!(h.pose.position().dist(Point2::new(1.0, 1.0)) < 1e-9);
        step_human(&mut h, &mut w, 0.1);
        assert!(h.pose.position().dist(Point2::new(1.0, 0.95)) < 1e-9);
    }

    #[test]
    fn replanning_static_scene_is_identical() {
        let s = crate::scenario::generate_scenario(crate::scenario::ScenarioClass::SB, 5).unwrap();
        let local = to_robot_frame(&s).unwrap();
        let map = gmm().cost_map(&local).unwrap();
        let g = fuse_cost(&map, &s, s.robot, &NavConfig::default());
        let start = g.clamped_cell(s.robot.position());
        let t = goal_cell(&g, start, s.goal);
        assert_eq!(astar(&g, start, t), astar(&fuse_cost(&map, &s, s.robot, &NavConfig::default()), start, t));
    }

    #[test]
    fn goal_cell_prefers_reachable() {
        let mut costs = vec![0.05; 25];
        for j in 0..5 {
            costs[10 + j] = LETHAL;
        }
        let g = NavGrid { side: 5, resolution: 1.0, origin: Pose2D::default(), cost_floor: 0.05, costs };
        let target = g.cell_world((4, 2));
        assert_eq!(goal_cell(&g, (0, 2), target), (1, 2));
    }

    #[test]
    fn episodes_are_deterministic() {
        let s = crate::scenario::generate_scenario(crate::scenario::ScenarioClass::SC, 2).unwrap();
        let a = run_episode(&s, &gmm(), &NavConfig::default()).unwrap();
        let b = run_episode(&s, &gmm(), &NavConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.metrics.si_i <= a.metrics.si_p);
        assert_eq!(a.metrics.d_min <= 0.45, a.metrics.si_i > 0.0);
    }
}
