use std::cmp::Ordering;

use super::ModelError;
use crate::graph::SceneGraph;

/// All incoming edges of one node under one relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Group {
    pub dst: u32,
    pub relation: u16,
    pub start: u32,
    pub end: u32,
}

impl Group {
    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Message-passing structure of a scene graph, grouped by `(dst, relation)`.
///
/// Groups are ordered by destination then relation index. Sources inside a
/// group are ordered by their input feature vectors rather than by node id,
/// so aggregation sums in the same order however the nodes are numbered.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    pub node_count: usize,
    pub groups: Vec<Group>,
    pub sources: Vec<u32>,
    /// First group of each node; `group_offsets[n]` ends node `n`'s groups.
    pub group_offsets: Vec<usize>,
    pub grid_side: usize,
    pub grid_nodes: Vec<usize>,
}

fn feature_order(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

impl GraphTopology {
    pub fn new(g: &SceneGraph, relation_count: usize) -> Result<Self, ModelError> {
        let n = g.nodes.len();
        if g.grid_index.len() != g.grid_side * g.grid_side {
            return Err(ModelError::Structure(format!(
                "grid index has {} entries for a {}x{} lattice",
                g.grid_index.len(),
                g.grid_side,
                g.grid_side
            )));
        }
        if let Some(&bad) = g.grid_index.iter().find(|&&k| k >= n) {
            return Err(ModelError::Structure(format!("grid index points at missing node {bad}")));
        }
        let mut edges: Vec<(u32, u16, u32)> = Vec::with_capacity(g.edges.len());
        for e in &g.edges {
            let r = e.relation.index();
            if r >= relation_count {
                return Err(ModelError::Structure(format!("relation {} outside the model's {relation_count}", e.relation)));
            }
            if e.src >= n || e.dst >= n {
                return Err(ModelError::Structure(format!("edge {}->{} references a missing node", e.src, e.dst)));
            }
            edges.push((e.dst as u32, r as u16, e.src as u32));
        }
        let feat = |k: u32| g.nodes[k as usize].feature.as_slice();
        edges.sort_by(|a, b| {
            (a.0, a.1)
                .cmp(&(b.0, b.1))
                .then_with(|| feature_order(feat(a.2), feat(b.2)))
                .then_with(|| a.2.cmp(&b.2))
        });
        edges.dedup();

        let mut groups = Vec::new();
        let mut sources = Vec::with_capacity(edges.len());
        let mut group_offsets = vec![0usize; n + 1];
        for (k, &(dst, rel, src)) in edges.iter().enumerate() {
            if k == 0 || edges[k - 1].0 != dst || edges[k - 1].1 != rel {
                groups.push(Group { dst, relation: rel, start: k as u32, end: k as u32 });
            }
            groups.last_mut().unwrap().end += 1;
            sources.push(src);
        }
        let mut gi = 0;
        for node in 0..n {
            group_offsets[node] = gi;
            while gi < groups.len() && groups[gi].dst as usize == node {
                gi += 1;
            }
        }
        group_offsets[n] = gi;
        Ok(Self { node_count: n, groups, sources, group_offsets, grid_side: g.grid_side, grid_nodes: g.grid_index.clone() })
    }

    pub fn node_groups(&self, node: usize) -> &[Group] {
        &self.groups[self.group_offsets[node]..self.group_offsets[node + 1]]
    }
}
