//! Little-endian record codec for split files.
//!
//! ```text
//! file    := magic "SCMD" | u32 version | u32 record_count | record*
//! record  := u32 payload_len | payload
//! payload := u32 id_len | id (utf-8)
//!          | u32 scenario_len | scenario (compact JSON, utf-8)
//!          | u32 node_count | u32 feature_dim
//!          | node_count × u8 kind
//!          | node_count × feature_dim × f32 features
//!          | u32 edge_count | edge_count × (u32 src | u32 dst | u8 relation)
//!          | u32 grid_side | grid_side² × u32 node id
//!          | u32 map_side | map_side² × f32 target
//! ```

use crate::costmap::CostMap;
use crate::graph::{Edge, Node, NodeKind, Relation, SceneGraph};
use crate::scenario::Scenario;

pub const MAGIC: &[u8; 4] = b"SCMD";

pub(crate) struct Writer(pub Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
    }

    fn f32(&mut self, v: f64) {
        self.0.extend_from_slice(&(v as f32).to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len());
        self.0.extend_from_slice(b);
    }
}

pub(crate) fn file_header(count: usize, version: u32) -> Vec<u8> {
    let mut h = Vec::with_capacity(12);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&version.to_le_bytes());
    h.extend_from_slice(&(count as u32).to_le_bytes());
    h
}

/// Encodes one sample, including its length prefix.
pub(crate) fn encode_record(id: &str, scenario: &Scenario, graph: &SceneGraph, target: &CostMap) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.bytes(id.as_bytes());
    w.bytes(serde_json::to_string(scenario).expect("scenario serializes").as_bytes());
    let dim = graph.nodes.first().map_or(0, |n| n.feature.len());
    w.u32(graph.nodes.len());
    w.u32(dim);
    for n in &graph.nodes {
        w.u8(n.kind.index() as u8);
    }
    for n in &graph.nodes {
        for &v in &n.feature {
            w.f32(v);
        }
    }
    w.u32(graph.edges.len());
    for e in &graph.edges {
        w.u32(e.src);
        w.u32(e.dst);
        w.u8(e.relation.index() as u8);
    }
    w.u32(graph.grid_side);
    for &k in &graph.grid_index {
        w.u32(k);
    }
    w.u32(target.side());
    for &v in target.values() {
        w.f32(v);
    }
    let mut out = Vec::with_capacity(w.0.len() + 4);
    out.extend_from_slice(&(w.0.len() as u32).to_le_bytes());
    out.extend_from_slice(&w.0);
    out
}

#[derive(Debug)]
pub(crate) struct DecodeError(pub String);

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, DecodeError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize, DecodeError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f32(&mut self, what: &str) -> Result<f64, DecodeError> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes(b.try_into().unwrap()) as f64)
    }

    fn bytes(&mut self, what: &str) -> Result<&'a [u8], DecodeError> {
        let n = self.u32(what)?;
        self.take(n, what)
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Reads just the sample id from a payload, for error messages.
pub(crate) fn peek_id(payload: &[u8]) -> Option<String> {
    let mut r = Reader::new(payload);
    r.bytes("id").ok().and_then(|b| String::from_utf8(b.to_vec()).ok())
}

pub(crate) struct DecodedRecord {
    pub id: String,
    pub scenario: Scenario,
    pub graph: SceneGraph,
    pub target_side: usize,
    pub target: Vec<f64>,
}

/// Decodes a payload (without its length prefix).
pub(crate) fn decode_payload(payload: &[u8]) -> Result<DecodedRecord, DecodeError> {
    let mut r = Reader::new(payload);
    let id = String::from_utf8(r.bytes("sample id")?.to_vec()).map_err(|_| DecodeError("sample id is not utf-8".into()))?;
    let scenario_json = r.bytes("scenario")?;
    let scenario: Scenario =
        serde_json::from_slice(scenario_json).map_err(|e| DecodeError(format!("scenario JSON: {e}")))?;

    let n_nodes = r.u32("node count")?;
    let dim = r.u32("feature dim")?;
    let mut kinds = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let k = r.u8("node kind")?;
        kinds.push(NodeKind::from_index(k as usize).ok_or_else(|| DecodeError(format!("bad node kind {k}")))?);
    }
    let mut nodes = Vec::with_capacity(n_nodes);
    for (id, kind) in kinds.into_iter().enumerate() {
        let feature = (0..dim).map(|_| r.f32("features")).collect::<Result<Vec<_>, _>>()?;
        nodes.push(Node { id, kind, feature });
    }
    let n_edges = r.u32("edge count")?;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let src = r.u32("edge")?;
        let dst = r.u32("edge")?;
        let rel = r.u8("edge relation")?;
        let relation = Relation::from_index(rel as usize).ok_or_else(|| DecodeError(format!("bad relation {rel}")))?;
        if src >= n_nodes || dst >= n_nodes {
            return Err(DecodeError(format!("edge {src}->{dst} references a missing node")));
        }
        edges.push(Edge { src, dst, relation });
    }
    let grid_side = r.u32("grid side")?;
    let grid_index = (0..grid_side * grid_side).map(|_| r.u32("grid index")).collect::<Result<Vec<_>, _>>()?;
    if grid_index.iter().any(|&k| k >= n_nodes) {
        return Err(DecodeError("grid index references a missing node".into()));
    }
    let target_side = r.u32("target side")?;
    let target = (0..target_side * target_side).map(|_| r.f32("target")).collect::<Result<Vec<_>, _>>()?;
    if !r.done() {
        return Err(DecodeError("trailing bytes after target".into()));
    }
    Ok(DecodedRecord { id, scenario, graph: SceneGraph { nodes, edges, grid_side, grid_index }, target_side, target })
}
