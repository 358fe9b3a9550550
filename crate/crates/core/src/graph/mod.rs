//! Heterogeneous scene graph: typed entity nodes, a robot-centred grid
//! lattice, and labelled directed edges.
//!
//! Node features are 21-dimensional, laid out as
//! `[kind one-hot (5) | human (4) | object (4) | room (2) | wall (4) | grid (2)]`.
//! Only the block matching the node kind is non-zero.

mod build;
mod walls;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point2;
use crate::scenario::{Human, ObjectEntity};

pub use build::build_scene_graph;
pub use walls::{segment_walls, WallSegment};

pub const FEATURE_DIM: usize = 21;

const HUMAN_OFFSET: usize = 5;
const OBJECT_OFFSET: usize = 9;
const ROOM_OFFSET: usize = 13;
const WALL_OFFSET: usize = 15;
const GRID_OFFSET: usize = 19;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("grid index ({i}, {j}) out of range for N = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("invalid graph config: {0}")]
    Config(String),
    #[error("degenerate polygon: edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("unknown node kind {0:?}")]
    UnknownKind(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("scenario must be in the robot frame")]
    NotRobotFrame,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Node types, in one-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Human,
    Object,
    Room,
    Wall,
    Grid,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [NodeKind::Human, NodeKind::Object, NodeKind::Room, NodeKind::Wall, NodeKind::Grid];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<NodeKind> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Human => "human",
            NodeKind::Object => "object",
            NodeKind::Room => "room",
            NodeKind::Wall => "wall",
            NodeKind::Grid => "grid",
        }
    }

    /// Feature-vector range owned by this kind's metric block.
    pub fn metric_range(self) -> std::ops::Range<usize> {
        match self {
            NodeKind::Human => HUMAN_OFFSET..OBJECT_OFFSET,
            NodeKind::Object => OBJECT_OFFSET..ROOM_OFFSET,
            NodeKind::Room => ROOM_OFFSET..WALL_OFFSET,
            NodeKind::Wall => WALL_OFFSET..GRID_OFFSET,
            NodeKind::Grid => GRID_OFFSET..FEATURE_DIM,
        }
    }
}

impl FromStr for NodeKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GraphError::UnknownKind(s.to_string()))
    }
}

macro_rules! relations {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Edge labels. The set is closed; its size fixes the number of
        /// relation-specific weight matrices in the model.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Relation {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl Relation {
            pub const ALL: &'static [Relation] = &[$(Relation::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Relation::$variant => $name,)*
                }
            }
        }
    };
}

relations! {
    RoomToHuman => "room→human",
    HumanToRoom => "human→room",
    RoomToObject => "room→object",
    ObjectToRoom => "object→room",
    RoomToWall => "room→wall",
    WallToRoom => "wall→room",
    RoomToGrid => "room→grid",
    GridToRoom => "grid→room",
    HumanHumanInteraction => "human→human_interaction",
    HumanObjectInteraction => "human→object_interaction",
    ObjectHumanInteraction => "object→human_interaction",
    WallAdjacent => "wall→wall_adjacent",
    GridUp => "grid_up",
    GridDown => "grid_down",
    GridLeft => "grid_left",
    GridRight => "grid_right",
    EntityGrounding => "entity_grounding",
    GridGrounding => "grid_grounding",
    SelfLoop => "self_loop",
}

pub const RELATION_COUNT: usize = Relation::ALL.len();

impl Relation {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Relation> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| GraphError::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Grid nodes per side.
    pub grid_side: usize,
    /// Side of the covered square area, metres.
    pub area_side: f64,
    /// Longest allowed wall segment, metres.
    pub max_wall_segment: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { grid_side: 18, area_side: 10.0, max_wall_segment: 2.0 }
    }
}

impl GraphConfig {
    pub fn check(&self) -> Result<(), GraphError> {
        if self.grid_side < 2 {
            return Err(GraphError::Config(format!("grid_side must be >= 2, got {}", self.grid_side)));
        }
        if !(self.area_side > 0.0) || !(self.max_wall_segment > 0.0) {
            return Err(GraphError::Config("area_side and max_wall_segment must be positive".into()));
        }
        Ok(())
    }
}

/// Robot-frame coordinates of lattice node `(i, j)` on an `n`×`n` grid
/// spanning `w` metres. Row 0 is the farthest ahead (+x), column 0 the
/// farthest to the right (-y).
pub fn grid_coords(i: usize, j: usize, n: usize, w: f64) -> Result<(f64, f64), GraphError> {
    if n < 2 || i >= n || j >= n {
        return Err(GraphError::IndexOutOfRange { i, j, n });
    }
    Ok(grid_coords_unchecked(i, j, n, w))
}

#[inline]
pub(crate) fn grid_coords_unchecked(i: usize, j: usize, n: usize, w: f64) -> (f64, f64) {
    let c = ((n - 1) / 2) as f64;
    let d = (n - 1) as f64;
    (w * (c - i as f64) / d, w * (j as f64 - c) / d)
}

/// Anything that becomes a graph node.
#[derive(Debug, Clone, Copy)]
pub enum EntityRef<'a> {
    Human(&'a Human),
    Object(&'a ObjectEntity),
    Room { humans: usize },
    Wall(&'a WallSegment),
    Grid { x: f64, y: f64 },
}

impl EntityRef<'_> {
    pub fn kind(&self) -> NodeKind {
        match self {
            EntityRef::Human(_) => NodeKind::Human,
            EntityRef::Object(_) => NodeKind::Object,
            EntityRef::Room { .. } => NodeKind::Room,
            EntityRef::Wall(_) => NodeKind::Wall,
            EntityRef::Grid { .. } => NodeKind::Grid,
        }
    }
}

/// Initial feature vector of a node. `kind` must agree with the entity.
pub fn entity_features(entity: EntityRef<'_>, kind: NodeKind) -> Result<[f64; FEATURE_DIM], GraphError> {
    if entity.kind() != kind {
        return Err(GraphError::UnknownKind(format!("{} given for a {} entity", kind.name(), entity.kind().name())));
    }
    let mut f = [0.0; FEATURE_DIM];
    f[kind.index()] = 1.0;
    let metric: &[f64] = match entity {
        EntityRef::Human(h) => &[h.pose.x, h.pose.y, h.pose.theta.cos(), h.pose.theta.sin()],
        EntityRef::Object(o) => &[o.pose.x, o.pose.y, o.pose.theta.cos(), o.pose.theta.sin()],
        EntityRef::Room { humans } => &[humans as f64, humans as f64 / 10.0],
        EntityRef::Wall(w) => &[w.midpoint.x, w.midpoint.y, w.orientation.cos(), w.orientation.sin()],
        EntityRef::Grid { x, y } => &[x, y],
    };
    f[kind.metric_range()].copy_from_slice(metric);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub relation: Relation,
}

/// Typed graph over a robot-frame scenario. Node ids equal their position in
/// `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub grid_side: usize,
    /// Row-major `(i, j) -> node id`.
    pub grid_index: Vec<usize>,
}

impl SceneGraph {
    pub fn grid_node(&self, i: usize, j: usize) -> usize {
        self.grid_index[i * self.grid_side + j]
    }

    pub fn room_node(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.kind == NodeKind::Room)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Renumbers nodes: old node `k` becomes `perm[k]`. Edges and the grid
    /// index are remapped accordingly and nodes are stored in new-id order.
    pub fn relabeled(&self, perm: &[usize]) -> SceneGraph {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = self.nodes.clone();
        for (old, n) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = Node { id: perm[old], ..n.clone() };
        }
        SceneGraph {
            nodes,
            edges: self
                .edges
                .iter()
                .map(|e| Edge { src: perm[e.src], dst: perm[e.dst], relation: e.relation })
                .collect(),
            grid_side: self.grid_side,
            grid_index: self.grid_index.iter().map(|&k| perm[k]).collect(),
        }
    }

    /// Entity-and-wall positions keyed by node id; used by tests and rendering.
    pub fn position_of(&self, id: usize) -> Option<Point2> {
        let n = &self.nodes[id];
        let f = &n.feature;
        let r = n.kind.metric_range();
        match n.kind {
            NodeKind::Room => None,
            _ => Some(Point2::new(f[r.start], f[r.start + 1])),
        }
    }
}
