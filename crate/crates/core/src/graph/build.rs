use log::warn;

use super::{
    entity_features, grid_coords_unchecked, segment_walls, Edge, EntityRef, GraphConfig, GraphError, Node, Relation,
    SceneGraph,
};
use crate::scenario::{validate, Frame, InteractionKind, Scenario};

/// Nearest lattice index along one axis for coordinate `v`, where
/// `coord(k) = sign * w * (k - c) / (n - 1)`. Ties resolve to the lower index.
fn nearest_axis(v: f64, n: usize, w: f64, sign: f64) -> (usize, bool) {
    let c = ((n - 1) / 2) as f64;
    let d = (n - 1) as f64;
    let real = c + sign * v * d / w;
    let lo = real.floor();
    let hi = lo + 1.0;
    let coord = |k: f64| sign * w * (k - c) / d;
    let pick = if (coord(lo) - v).abs() <= (coord(hi) - v).abs() { lo } else { hi };
    let outside = pick < 0.0 || pick > d;
    (pick.clamp(0.0, d) as usize, outside)
}

/// Lattice node closest to `(x, y)`, ties broken by lowest `(i, j)`. The flag
/// is set when the point lies beyond the lattice and was clamped.
pub(crate) fn nearest_grid_node(x: f64, y: f64, n: usize, w: f64) -> ((usize, usize), bool) {
    let (i, oi) = nearest_axis(x, n, w, -1.0);
    let (j, oj) = nearest_axis(y, n, w, 1.0);
    ((i, j), oi || oj)
}

struct Edges(Vec<Edge>);

impl Edges {
    fn add(&mut self, src: usize, dst: usize, relation: Relation) {
        self.0.push(Edge { src, dst, relation });
    }

    fn both(&mut self, a: usize, b: usize, ab: Relation, ba: Relation) {
        self.add(a, b, ab);
        self.add(b, a, ba);
    }
}

/// Builds the scene graph of a robot-frame scenario.
///
/// Node order is canonical: room, humans, objects, wall segments, then grid
/// nodes in row-major order.
pub fn build_scene_graph(s: &Scenario, cfg: &GraphConfig) -> Result<SceneGraph, GraphError> {
    cfg.check()?;
    if s.frame != Frame::Robot {
        return Err(GraphError::NotRobotFrame);
    }
    let violations = validate(s);
    if !violations.is_empty() {
        return Err(GraphError::InvalidScenario(violations.join("; ")));
    }
    let n = cfg.grid_side;
    let w = cfg.area_side;
    let walls = segment_walls(&s.room, cfg.max_wall_segment)?;

    let mut nodes: Vec<Node> = Vec::with_capacity(1 + s.humans.len() + s.objects.len() + walls.len() + n * n);
    let mut push = |entity: EntityRef<'_>| -> Result<usize, GraphError> {
        let id = nodes.len();
        let kind = entity.kind();
        nodes.push(Node { id, kind, feature: entity_features(entity, kind)?.to_vec() });
        Ok(id)
    };

    let room = push(EntityRef::Room { humans: s.humans.len() })?;
    let human_ids = s.humans.iter().map(|h| push(EntityRef::Human(h))).collect::<Result<Vec<_>, _>>()?;
    let object_ids = s.objects.iter().map(|o| push(EntityRef::Object(o))).collect::<Result<Vec<_>, _>>()?;
    let wall_ids = walls.iter().map(|wl| push(EntityRef::Wall(wl))).collect::<Result<Vec<_>, _>>()?;
    let mut grid_index = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = grid_coords_unchecked(i, j, n, w);
            grid_index.push(push(EntityRef::Grid { x, y })?);
        }
    }
    let node_count = nodes.len();

    let mut e = Edges(Vec::with_capacity(node_count * 3 + 4 * n * n + walls.len() * 4));

    // Room links.
    for &h in &human_ids {
        e.both(room, h, Relation::RoomToHuman, Relation::HumanToRoom);
    }
    for &o in &object_ids {
        e.both(room, o, Relation::RoomToObject, Relation::ObjectToRoom);
    }
    for &wl in &wall_ids {
        e.both(room, wl, Relation::RoomToWall, Relation::WallToRoom);
    }
    for &g in &grid_index {
        e.both(room, g, Relation::RoomToGrid, Relation::GridToRoom);
    }

    // Interactions.
    let human_node = |id: u32| s.humans.iter().position(|h| h.id == id).map(|k| human_ids[k]);
    let object_node = |id: u32| s.objects.iter().position(|o| o.id == id).map(|k| object_ids[k]);
    for it in &s.interactions {
        let a = human_node(it.a).expect("validated");
        match it.kind {
            InteractionKind::HumanHuman => {
                let b = human_node(it.b).expect("validated");
                e.both(a, b, Relation::HumanHumanInteraction, Relation::HumanHumanInteraction);
            }
            InteractionKind::HumanObject => {
                let b = object_node(it.b).expect("validated");
                e.both(a, b, Relation::HumanObjectInteraction, Relation::ObjectHumanInteraction);
            }
        }
    }

    // Adjacent wall segments, closing the loop.
    let nw = wall_ids.len();
    if nw >= 2 {
        let pairs = if nw == 2 { 1 } else { nw };
        for k in 0..pairs {
            e.both(wall_ids[k], wall_ids[(k + 1) % nw], Relation::WallAdjacent, Relation::WallAdjacent);
        }
    }

    // Lattice: the relation names the direction of travel from src to dst.
    // "Up" is towards row 0, i.e. ahead of the robot.
    for i in 0..n {
        for j in 0..n {
            let here = grid_index[i * n + j];
            if i + 1 < n {
                e.both(here, grid_index[(i + 1) * n + j], Relation::GridDown, Relation::GridUp);
            }
            if j + 1 < n {
                e.both(here, grid_index[i * n + j + 1], Relation::GridRight, Relation::GridLeft);
            }
        }
    }

    // Grounding of every entity node (not the room) to its nearest grid node.
    let grounded = human_ids.iter().chain(&object_ids).chain(&wall_ids);
    for &id in grounded {
        let f = &nodes[id].feature;
        let r = nodes[id].kind.metric_range();
        let (x, y) = (f[r.start], f[r.start + 1]);
        let ((i, j), clamped) = nearest_grid_node(x, y, n, w);
        if clamped {
            warn!(
                "{} node {id} at ({x:.2}, {y:.2}) lies outside the {w} m grid area; grounded to boundary node ({i}, {j})",
                nodes[id].kind.name()
            );
        }
        e.both(id, grid_index[i * n + j], Relation::EntityGrounding, Relation::GridGrounding);
    }

    for id in 0..node_count {
        e.add(id, id, Relation::SelfLoop);
    }

    Ok(SceneGraph { nodes, edges: e.0, grid_side: n, grid_index })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::graph::NodeKind;
    use crate::geom::Point2;
    use crate::graph::{grid_coords, FEATURE_DIM};
    use crate::scenario::{generate_scenario, to_robot_frame, Human, Interaction, ObjectEntity, Pose2D, ScenarioClass};

    fn empty_square(side: f64) -> Scenario {
        let h = side / 2.0;
        Scenario {
            room: vec![Point2::new(-h, -h), Point2::new(h, -h), Point2::new(h, h), Point2::new(-h, h)],
            humans: vec![],
            objects: vec![],
            interactions: vec![],
            robot: Pose2D::default(),
            goal: Point2::new(1.0, 1.0),
            frame: Frame::Robot,
        }
    }

    fn brute_nearest(x: f64, y: f64, n: usize, w: f64) -> (usize, usize) {
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..n {
            for j in 0..n {
                let (gx, gy) = grid_coords(i, j, n, w).unwrap();
                let d = (gx - x).hypot(gy - y);
                if d < best.0 {
                    best = (d, (i, j));
                }
            }
        }
        best.1
    }

    #[test]
    fn empty_room_node_count() {
        let g = build_scene_graph(&empty_square(4.0), &GraphConfig::default()).unwrap();
        assert_eq!(g.nodes.len(), 1 + 8 + 324);
    }

    #[test]
    fn lattice_edge_count() {
        let g = build_scene_graph(&empty_square(4.0), &GraphConfig::default()).unwrap();
        let lattice = g
            .edges
            .iter()
            .filter(|e| matches!(e.relation, Relation::GridUp | Relation::GridDown | Relation::GridLeft | Relation::GridRight))
            .count();
        assert_eq!(lattice, 2 * 2 * 18 * 17);
        assert_eq!(lattice, 1224);
    }

    #[test]
    fn lattice_directions() {
        let g = build_scene_graph(&empty_square(4.0), &GraphConfig::default()).unwrap();
        let (a, b) = (g.grid_node(5, 5), g.grid_node(4, 5));
        assert!(g.edges.contains(&Edge { src: a, dst: b, relation: Relation::GridUp }));
        let c = g.grid_node(5, 6);
        assert!(g.edges.contains(&Edge { src: a, dst: c, relation: Relation::GridRight }));
    }

    fn figure_scene() -> Scenario {
        // Five humans, one object, a conversing couple and a human using the object.
        let mut s = empty_square(8.0);
        let poses = [(1.0, 1.0, 0.0), (2.5, 1.0, std::f64::consts::PI), (-2.0, 2.0, 0.5), (-1.0, -2.0, 1.0), (2.0, -2.5, -1.0)];
        for (k, &(x, y, t)) in poses.iter().enumerate() {
            s.humans.push(Human { id: k as u32, pose: Pose2D::new(x, y, t), walking: false, speed: 0.0, waypoints: vec![] });
        }
        s.objects.push(ObjectEntity { id: 5, pose: Pose2D::new(-2.0, 3.0, 0.0), width: 1.0, depth: 0.5 });
        s.interactions.push(Interaction { kind: InteractionKind::HumanHuman, a: 0, b: 1 });
        s.interactions.push(Interaction { kind: InteractionKind::HumanObject, a: 2, b: 5 });
        s
    }

    #[test]
    fn interaction_edges() {
        let g = build_scene_graph(&figure_scene(), &GraphConfig::default()).unwrap();
        // Node ids: room 0, humans 1..=5, object 6.
        let has = |src, dst, relation| g.edges.contains(&Edge { src, dst, relation });
        assert!(has(1, 2, Relation::HumanHumanInteraction));
        assert!(has(2, 1, Relation::HumanHumanInteraction));
        assert!(has(3, 6, Relation::HumanObjectInteraction));
        assert!(has(6, 3, Relation::ObjectHumanInteraction));
        assert!(!has(4, 6, Relation::HumanObjectInteraction));
    }

    #[test]
    fn structural_invariants() {
        for seed in 0..30 {
            let s = to_robot_frame(&generate_scenario(ScenarioClass::ALL[seed % 3], seed as u64).unwrap()).unwrap();
            let cfg = GraphConfig::default();
            let g = build_scene_graph(&s, &cfg).unwrap();
            let n_nodes = g.nodes.len();

            let rooms: Vec<_> = g.nodes.iter().filter(|n| n.kind == NodeKind::Room).collect();
            assert_eq!(rooms.len(), 1);
            let room = rooms[0].id;
            assert_eq!(g.nodes.iter().filter(|n| n.kind == NodeKind::Grid).count(), 18 * 18);

            let out_deg = g.edges.iter().filter(|e| e.src == room).count();
            assert_eq!(out_deg, n_nodes - 1 + 1);
            let targets: HashSet<_> = g.edges.iter().filter(|e| e.src == room).map(|e| e.dst).collect();
            let sources: HashSet<_> = g.edges.iter().filter(|e| e.dst == room).map(|e| e.src).collect();
            assert_eq!(targets.len(), n_nodes);
            assert_eq!(sources.len(), n_nodes);

            for node in &g.nodes {
                assert_eq!(node.feature.len(), FEATURE_DIM);
                let hot: Vec<_> = (0..5).filter(|&k| node.feature[k] != 0.0).collect();
                assert_eq!(hot, vec![node.kind.index()]);
                let own = node.kind.metric_range();
                for k in 5..FEATURE_DIM {
                    if !own.contains(&k) {
                        assert_eq!(node.feature[k], 0.0);
                    }
                }
                assert!(g.edges.contains(&Edge { src: node.id, dst: node.id, relation: Relation::SelfLoop }));
            }

            // Grounding minimizes distance over the whole lattice.
            for node in g.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Human | NodeKind::Object | NodeKind::Wall)) {
                let ground: Vec<_> = g
                    .edges
                    .iter()
                    .filter(|e| e.src == node.id && e.relation == Relation::EntityGrounding)
                    .collect();
                assert_eq!(ground.len(), 1);
                let p = g.position_of(node.id).unwrap();
                let (bi, bj) = brute_nearest(p.x, p.y, 18, cfg.area_side);
                assert_eq!(ground[0].dst, g.grid_node(bi, bj));
                assert!(g.edges.contains(&Edge { src: ground[0].dst, dst: node.id, relation: Relation::GridGrounding }));
            }
        }
    }

    #[test]
    fn nearest_grid_matches_brute_force_with_ties() {
        for n in [2usize, 3, 18, 19] {
            let w = 10.0;
            for i in 0..n {
                for j in 0..n {
                    // Exact lattice points and exact midpoints between neighbours.
                    let (x, y) = grid_coords(i, j, n, w).unwrap();
                    assert_eq!(nearest_grid_node(x, y, n, w).0, brute_nearest(x, y, n, w));
                    if i + 1 < n && j + 1 < n {
                        let (x2, y2) = grid_coords(i + 1, j + 1, n, w).unwrap();
                        let (mx, my) = ((x + x2) / 2.0, (y + y2) / 2.0);
                        assert_eq!(nearest_grid_node(mx, my, n, w).0, brute_nearest(mx, my, n, w));
                    }
                }
            }
            for k in 0..2000 {
                let x = ((k * 7919) % 2003) as f64 / 2003.0 * 14.0 - 7.0;
                let y = ((k * 104729) % 1999) as f64 / 1999.0 * 14.0 - 7.0;
                assert_eq!(nearest_grid_node(x, y, n, w).0, brute_nearest(x, y, n, w), "({x}, {y}) n={n}");
            }
        }
    }

    #[test]
    fn out_of_area_entity_grounds_to_boundary() {
        let mut s = empty_square(14.0);
        s.humans.push(Human { id: 0, pose: Pose2D::new(6.5, -6.5, 0.0), walking: false, speed: 0.0, waypoints: vec![] });
        let g = build_scene_graph(&s, &GraphConfig::default()).unwrap();
        let e = g.edges.iter().find(|e| e.src == 1 && e.relation == Relation::EntityGrounding).unwrap();
        assert_eq!(e.dst, g.grid_node(0, 0));
    }

    #[test]
    fn deterministic_and_serializable() {
        let s = to_robot_frame(&generate_scenario(ScenarioClass::SB, 4).unwrap()).unwrap();
        let a = build_scene_graph(&s, &GraphConfig::default()).unwrap();
        let b = build_scene_graph(&s, &GraphConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back = SceneGraph::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert!(a.to_json().contains("\"room→grid\""));
    }

    #[test]
    fn rejects_world_frame() {
        let s = generate_scenario(ScenarioClass::SA, 1).unwrap();
        assert!(matches!(build_scene_graph(&s, &GraphConfig::default()), Err(GraphError::NotRobotFrame)));
    }
}
