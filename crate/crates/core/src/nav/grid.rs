use serde::{Deserialize, Serialize};

use super::NavConfig;
use crate::costmap::CostMap;
use crate::geom::{distance_to_boundary, point_in_polygon, Point2};
use crate::scenario::{Pose2D, Scenario};

/// Cost of a cell the planner may never enter.
pub const LETHAL: f64 = f64::INFINITY;

/// Planning grid registered to the world. Row `i` runs against the robot's
/// forward axis and column `j` along its left axis, as in [`CostMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavGrid {
    pub side: usize,
    /// Metres per cell.
    pub resolution: f64,
    /// World pose of cell (0, 0); its heading is the robot's.
    pub origin: Pose2D,
    pub cost_floor: f64,
    pub costs: Vec<f64>,
}

impl NavGrid {
    pub fn index(&self, (i, j): (usize, usize)) -> usize {
        i * self.side + j
    }

    pub fn cost(&self, cell: (usize, usize)) -> f64 {
        self.costs[self.index(cell)]
    }

    pub fn traversable(&self, cell: (usize, usize)) -> bool {
        self.cost(cell).is_finite()
    }

    pub fn cell_world(&self, (i, j): (usize, usize)) -> Point2 {
        self.origin.to_world(Point2::new(-(i as f64) * self.resolution, j as f64 * self.resolution))
    }

    /// Cell containing world point `p`, or `None` outside the grid.
    pub fn world_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let l = self.origin.to_local(p);
        let i = (-l.x / self.resolution).round();
        let j = (l.y / self.resolution).round();
        let max = (self.side - 1) as f64;
        ((0.0..=max).contains(&i) && (0.0..=max).contains(&j)).then_some((i as usize, j as usize))
    }

    /// Cell nearest to world point `p`, clamped into the grid.
    pub fn clamped_cell(&self, p: Point2) -> (usize, usize) {
        let l = self.origin.to_local(p);
        let max = (self.side - 1) as f64;
        let i = (-l.x / self.resolution).round().clamp(0.0, max);
        let j = (l.y / self.resolution).round().clamp(0.0, max);
        (i as usize, j as usize)
    }
}

/// Fuses a robot-centred social map with the static geometry of `world`
/// (a world-frame scenario) into a planning grid around `robot`.
///
/// Cell cost is `cost_floor + lambda * (1 - value)`. Cells whose map value is
/// below `lethal_threshold`, that lie outside the room or closer than the
/// inflation radius to a wall, or that fall inside an inflated object
/// footprint, become [`LETHAL`].
pub fn fuse_cost(map: &CostMap, world: &Scenario, robot: Pose2D, cfg: &NavConfig) -> NavGrid {
    let side = map.side();
    let resolution = map.area_side() / (side - 1) as f64;
    let (ci, cj) = map.centre();
    let origin_local = Point2::new(ci as f64 * resolution, -(cj as f64) * resolution);
    let o = robot.to_world(origin_local);
    let origin = Pose2D { x: o.x, y: o.y, theta: robot.theta };
    let inflate = cfg.inflation_radius();
    let footprints: Vec<_> = world.objects.iter().map(|ob| ob.footprint()).collect();
    let mut grid = NavGrid { side, resolution, origin, cost_floor: cfg.cost_floor, costs: vec![0.0; side * side] };
    for i in 0..side {
        for j in 0..side {
            let v = map.get(i, j);
            let p = grid.cell_world((i, j));
            let blocked = v < cfg.lethal_threshold
                || !point_in_polygon(p, &world.room)
                || distance_to_boundary(p, &world.room) < inflate
                || footprints.iter().any(|f| f.contains(p, inflate));
            grid.costs[i * side + j] = if blocked { LETHAL } else { cfg.cost_floor + cfg.lambda * (1.0 - v) };
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Frame, ObjectEntity};

    fn square_room(h: f64) -> Scenario {
        Scenario {
            room: vec![Point2::new(-h, -h), Point2::new(h, -h), Point2::new(h, h), Point2::new(-h, h)],
            humans: vec![],
            objects: vec![],
            interactions: vec![],
            robot: Pose2D::default(),
            goal: Point2::new(1.0, 1.0),
            frame: Frame::World,
        }
    }

    #[test]
    fn uniform_open_map_is_floor() {
        let map = CostMap::new(9, 2.0, vec![1.0; 81]).unwrap();
        let g = fuse_cost(&map, &square_room(5.0), Pose2D::default(), &NavConfig::default());
        assert!(g.costs.iter().all(|&c| c == 0.05));
    }

    #[test]
    fn threshold_rule() {
        let mut v = vec![1.0; 81];
        v[40] = 0.0;
        v[41] = 0.05;
        let map = CostMap::new(9, 2.0, v).unwrap();
        let cfg = NavConfig { lethal_threshold: 0.1, ..NavConfig::default() };
        let g = fuse_cost(&map, &square_room(5.0), Pose2D::default(), &cfg);
        assert_eq!(g.costs[40], LETHAL);
        assert_eq!(g.costs[41], LETHAL);
        assert_eq!(g.costs[42], 0.05);
        let g = fuse_cost(&map, &square_room(5.0), Pose2D::default(), &NavConfig::default());
        assert_eq!(g.costs[40], LETHAL);
        assert!((g.costs[41] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn registration_follows_robot_pose() {
        let map = CostMap::new(73, 10.0, vec![1.0; 73 * 73]).unwrap();
        let robot = Pose2D::new(1.0, -0.5, 0.8);
        let g = fuse_cost(&map, &square_room(20.0), robot, &NavConfig::default());
        for (i, j) in [(0, 0), (36, 36), (10, 50), (72, 3)] {
            let (x, y) = map.cell_position(i, j);
            let want = robot.to_world(Point2::new(x, y));
            assert!(g.cell_world((i, j)).dist(want) < 1e-9);
            assert_eq!(g.world_cell(want), Some((i, j)));
        }
        assert_eq!(g.world_cell(robot.position()), Some((36, 36)));
        assert_eq!(g.world_cell(robot.to_world(Point2::new(6.0, 0.0))), None);
        assert_eq!(g.clamped_cell(robot.to_world(Point2::new(6.0, 0.0))), (0, 36));
    }

    #[test]
    fn walls_and_objects_are_lethal() {
        let mut s = square_room(3.0);
        s.objects.push(ObjectEntity { id: 0, pose: Pose2D::new(1.5, 0.0, 0.0), width: 0.6, depth: 0.6 });
        let map = CostMap::new(73, 10.0, vec![1.0; 73 * 73]).unwrap();
        let cfg = NavConfig::default();
        let g = fuse_cost(&map, &s, Pose2D::default(), &cfg);
        for i in 0..73 {
            for j in 0..73 {
                let p = g.cell_world((i, j));
                let near_wall = p.x.abs().max(p.y.abs()) > 3.0 - cfg.inflation_radius();
                let ex = ((p.x - 1.5).abs() - 0.3).max(0.0);
                let ey = (p.y.abs() - 0.3).max(0.0);
                let obj_d = ex.hypot(ey);
                let lethal = g.costs[i * 73 + j] == LETHAL;
                if near_wall || obj_d <= cfg.inflation_radius() {
                    assert!(lethal, "({i},{j}) {p:?}");
                } else if p.x.abs().max(p.y.abs()) < 2.9 - cfg.inflation_radius() && obj_d > cfg.inflation_radius() + 0.01 {
                    assert!(!lethal, "({i},{j}) {p:?}");
                }
            }
        }
    }

    #[test]
    fn ring_around_human_matches_score() {
        use crate::scenario::{to_robot_frame, Human};
        use crate::scoring::{gmm_costmap, score_at, SocialParams};
        let mut s = square_room(5.0);
        s.humans.push(Human { id: 0, pose: Pose2D::new(1.0, 0.5, 2.0), walking: false, speed: 0.0, waypoints: vec![] });
        let p = SocialParams::default();
        let map = gmm_costmap(&to_robot_frame(&s).unwrap(), &p, 73, 10.0).unwrap();
        let cfg = NavConfig::default();
        let g = fuse_cost(&map, &s, Pose2D::default(), &cfg);
        let mut checked = 0;
        for i in 0..73 {
            for j in 0..73 {
                let w = g.cell_world((i, j));
                let d = w.dist(Point2::new(1.0, 0.5));
                if (0.6..1.5).contains(&d) {
                    let want = cfg.cost_floor + cfg.lambda * (1.0 - score_at(&s, w, &p));
                    assert!((g.cost((i, j)) - want).abs() < 1e-9);
                    assert!(g.cost((i, j)) > cfg.cost_floor);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }
}
