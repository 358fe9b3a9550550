use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::deconv::ConvTranspose;
use super::layout::ParamLayout;
use super::rgcn::{act, act_grad, rgcn_backward, rgcn_forward, RgcnCache, RgcnWeights};
use super::topology::GraphTopology;
use super::{ModelConfig, ModelError};
use crate::costmap::CostMap;
use crate::graph::{NodeKind, SceneGraph};
use crate::scalar::Scalar;
use crate::seeds::rng_for;

/// Graph with its message-passing structure precomputed and features
/// converted to the model's scalar type.
#[derive(Debug, Clone)]
pub struct PreparedGraph<T> {
    pub topology: GraphTopology,
    pub features: Vec<T>,
    /// Side of the area covered by the grid lattice, metres.
    pub area_side: f64,
}

/// Recovers the lattice extent from the last grid node's coordinates.
fn lattice_area_side(g: &SceneGraph) -> Option<f64> {
    let n = g.grid_side;
    let last = *g.grid_index.last()?;
    let node = g.nodes.get(last)?;
    if node.kind != NodeKind::Grid || n < 2 {
        return None;
    }
    let x = node.feature[NodeKind::Grid.metric_range().start];
    let c = ((n - 1) / 2) as f64;
    let d = (n - 1) as f64;
    Some(x * d / (c - d))
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(g: &SceneGraph, cfg: &ModelConfig) -> Result<Self, ModelError> {
        if g.grid_side != cfg.grid_side {
            return Err(ModelError::Structure(format!(
                "graph lattice is {}x{0}, model expects {}x{1}",
                g.grid_side, cfg.grid_side
            )));
        }
        let dim = cfg.dim_schedule[0];
        let mut features = Vec::with_capacity(g.nodes.len() * dim);
        for n in &g.nodes {
            if n.feature.len() != dim {
                return Err(ModelError::Shape(format!("node {} has {} features, expected {dim}", n.id, n.feature.len())));
            }
            features.extend(n.feature.iter().map(|&v| T::of(v)));
        }
        let topology = GraphTopology::new(g, cfg.relation_count)?;
        let area_side = lattice_area_side(g).ok_or_else(|| ModelError::Structure("grid index does not end at a grid node".into()))?;
        Ok(Self { topology, features, area_side })
    }
}

/// Intermediate values of one forward pass.
struct Trace<T> {
    layer_inputs: Vec<Vec<T>>,
    caches: Vec<RgcnCache<T>>,
    grid_tensor: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
}

/// Graph-to-grid model: relational graph layers, lattice extraction and two
/// transposed convolutions.
#[derive(Debug)]
pub struct Sngnn2d<T: Scalar> {
    config: ModelConfig,
    layout: ParamLayout,
    params: Vec<T>,
    queries: AtomicU64,
}

impl<T: Scalar> Clone for Sngnn2d<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.clone(),
            queries: AtomicU64::new(self.queries.load(Ordering::Relaxed)),
        }
    }
}

impl<T: Scalar> Sngnn2d<T> {
    /// Random initialization: symmetric uniform, scaled by fan-in.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        let mut rng = rng_for(seed, 0x1417);
        let mut fill = |r: std::ops::Range<usize>, bound: f64| {
            for v in &mut params[r] {
                *v = T::of(rng.gen_range(-bound..=bound));
            }
        };
        for g in &layout.graph {
            let b = 1.0 / (g.din as f64).sqrt();
            fill(g.relation.clone(), 0.5 * b);
            fill(g.coefficients.clone(), 1.0 / (config.num_bases as f64).sqrt());
            fill(g.self_weight.clone(), b);
        }
        for c in &layout.conv {
            let fan_in = (c.cin * c.kernel * c.kernel) as f64 / (config.stride * config.stride) as f64;
            fill(c.weight.clone(), 1.0 / fan_in.sqrt());
        }
        let out_bias = layout.conv[1].bias.clone();
        params[out_bias].iter_mut().for_each(|b| *b = T::of(0.5));
        Ok(Self { config, layout, params, queries: AtomicU64::new(0) })
    }

    pub fn from_params(config: ModelConfig, params: Vec<T>) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            return Err(ModelError::Shape(format!("expected {} parameters, got {}", layout.total, params.len())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Shape("parameters must be finite".into()));
        }
        Ok(Self { config, layout, params, queries: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Number of forward passes run so far.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// Converts to another scalar type (e.g. `f32` weights into `f64`).
    pub fn cast<U: Scalar>(&self) -> Sngnn2d<U> {
        Sngnn2d {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            queries: AtomicU64::new(0),
        }
    }

    /// Per-relation matrices of graph layer `l`, expanding bases if used.
    fn relation_mats(&self, l: usize) -> Cow<'_, [T]> {
        let g = &self.layout.graph[l];
        let raw = &self.params[g.relation.clone()];
        if !self.config.uses_bases() {
            return Cow::Borrowed(raw);
        }
        let (nb, nr, sz) = (self.config.num_bases, self.config.relation_count, g.din * g.dout);
        let coef = &self.params[g.coefficients.clone()];
        let mut out = vec![T::zero(); nr * sz];
        for r in 0..nr {
            let dst = &mut out[r * sz..(r + 1) * sz];
            for b in 0..nb {
                let a = coef[r * nb + b];
                for (d, v) in dst.iter_mut().zip(&raw[b * sz..(b + 1) * sz]) {
                    *d += a * *v;
                }
            }
        }
        Cow::Owned(out)
    }

    fn conv(&self, k: usize) -> ConvTranspose<'_, T> {
        let c = &self.layout.conv[k];
        ConvTranspose {
            cin: c.cin,
            cout: c.cout,
            kernel: c.kernel,
            stride: self.config.stride,
            padding: self.config.padding,
            weight: &self.params[c.weight.clone()],
            bias: &self.params[c.bias.clone()],
        }
    }

    pub fn prepare(&self, g: &SceneGraph) -> Result<PreparedGraph<T>, ModelError> {
        PreparedGraph::new(g, &self.config)
    }

    fn run(&self, pg: &PreparedGraph<T>, keep: bool) -> Result<(Vec<T>, Option<Trace<T>>), ModelError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let a = self.config.activation;
        let mut h = pg.features.clone();
        let mut layer_inputs = Vec::new();
        let mut caches = Vec::new();
        for (l, g) in self.layout.graph.iter().enumerate() {
            let rel = self.relation_mats(l);
            let w = RgcnWeights { din: g.din, dout: g.dout, relation: &rel, self_weight: &self.params[g.self_weight.clone()] };
            let (next, cache) = rgcn_forward(&h, &pg.topology, w, a)?;
            if keep {
                layer_inputs.push(std::mem::replace(&mut h, next));
                caches.push(cache);
            } else {
                h = next;
            }
        }
        let grid_tensor = grid_extract(&h, &pg.topology, *self.config.dim_schedule.last().unwrap())?;
        let n = self.config.grid_side;
        let hidden_pre = self.conv(0).forward(&grid_tensor, n);
        let hidden: Vec<T> = hidden_pre.iter().map(|&z| act(a, z)).collect();
        let mid = self.conv(0).output_side(n);
        let out = self.conv(1).forward(&hidden, mid);
        let trace = keep.then(|| Trace { layer_inputs, caches, grid_tensor, hidden_pre, hidden });
        Ok((out, trace))
    }

    /// Unclamped output map, row-major `side × side`.
    pub fn forward_raw(&self, pg: &PreparedGraph<T>) -> Result<Vec<T>, ModelError> {
        Ok(self.run(pg, false)?.0)
    }

    /// One forward pass producing the full cost map, clamped to [0, 1].
    pub fn forward(&self, g: &SceneGraph) -> Result<CostMap, ModelError> {
        let pg = self.prepare(g)?;
        self.forward_prepared(&pg)
    }

    pub fn forward_prepared(&self, pg: &PreparedGraph<T>) -> Result<CostMap, ModelError> {
        let raw = self.forward_raw(pg)?;
        CostMap::from_clamped(self.config.output_side, pg.area_side, raw.into_iter().map(|v| v.to_f64_lossy()))
            .map_err(|e| ModelError::Shape(e.to_string()))
    }

    /// Mean squared error of the unclamped output against `target`, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_grad(&self, pg: &PreparedGraph<T>, target: &[T]) -> Result<(T, Vec<T>), ModelError> {
        let (out, trace) = self.run(pg, true)?;
        let trace = trace.expect("trace kept");
        if target.len() != out.len() {
            return Err(ModelError::Shape(format!("target has {} cells, model emits {}", target.len(), out.len())));
        }
        let cells = T::of(out.len() as f64);
        let mut loss = T::zero();
        let dout: Vec<T> = out
            .iter()
            .zip(target)
            .map(|(&y, &t)| {
                let d = y - t;
                loss += d * d;
                T::of(2.0) * d / cells
            })
            .collect();
        loss /= cells;

        let a = self.config.activation;
        let n = self.config.grid_side;
        let mid = self.conv(0).output_side(n);
        let mut grad = vec![T::zero(); self.layout.total];

        let c1 = self.layout.conv[1].clone();
        let (gw1, gb1) = split_pair(&mut grad, c1.weight.clone(), c1.bias.clone());
        let dhidden = self.conv(1).backward(&trace.hidden, mid, &dout, gw1, gb1);
        let dhidden_pre: Vec<T> = dhidden.iter().zip(&trace.hidden_pre).map(|(&g, &z)| g * act_grad(a, z)).collect();
        let c0 = self.layout.conv[0].clone();
        let (gw0, gb0) = split_pair(&mut grad, c0.weight.clone(), c0.bias.clone());
        let dgrid = self.conv(0).backward(&trace.grid_tensor, n, &dhidden_pre, gw0, gb0);

        let dlast = *self.config.dim_schedule.last().unwrap();
        let mut dh = vec![T::zero(); pg.topology.node_count * dlast];
        grid_scatter(&dgrid, &pg.topology, dlast, &mut dh);

        for l in (0..self.layout.graph.len()).rev() {
            let g = self.layout.graph[l].clone();
            let rel = self.relation_mats(l);
            let w = RgcnWeights { din: g.din, dout: g.dout, relation: &rel, self_weight: &self.params[g.self_weight.clone()] };
            let mut grel = if self.config.uses_bases() { vec![T::zero(); rel.len()] } else { Vec::new() };
            let next = {
                let (grel_slice, gself) = if self.config.uses_bases() {
                    (&mut grel[..], &mut grad[g.self_weight.clone()])
                } else {
                    split_pair(&mut grad, g.relation.clone(), g.self_weight.clone())
                };
                rgcn_backward(&trace.layer_inputs[l], &pg.topology, w, a, &trace.caches[l], &dh, grel_slice, gself, l > 0)
            };
            if self.config.uses_bases() {
                self.project_basis_grad(l, &grel, &mut grad);
            }
            if let Some(next) = next {
                dh = next;
            }
        }
        Ok((loss, grad))
    }

    fn project_basis_grad(&self, l: usize, grel: &[T], grad: &mut [T]) {
        let g = &self.layout.graph[l];
        let (nb, nr, sz) = (self.config.num_bases, self.config.relation_count, g.din * g.dout);
        let bases = &self.params[g.relation.clone()];
        let coef = &self.params[g.coefficients.clone()];
        for r in 0..nr {
            let gr = &grel[r * sz..(r + 1) * sz];
            for b in 0..nb {
                let vb = &bases[b * sz..(b + 1) * sz];
                let dot: T = gr.iter().zip(vb).map(|(x, y)| *x * *y).sum();
                grad[g.coefficients.start + r * nb + b] += dot;
                let a = coef[r * nb + b];
                for (d, x) in grad[g.relation.start + b * sz..g.relation.start + (b + 1) * sz].iter_mut().zip(gr) {
                    *d += a * *x;
                }
            }
        }
    }
}

fn split_pair<T>(v: &mut [T], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> (&mut [T], &mut [T]) {
    debug_assert!(a.end <= b.start);
    let (lo, hi) = v.split_at_mut(b.start);
    (&mut lo[a], &mut hi[..b.len()])
}

/// Gathers lattice-node features into a `[channel][row][col]` tensor. Only
/// `grid_index` decides placement; node storage order is irrelevant.
pub fn grid_extract<T: Scalar>(feats: &[T], topo: &GraphTopology, width: usize) -> Result<Vec<T>, ModelError> {
    let n = topo.grid_side;
    if topo.grid_nodes.len() != n * n {
        return Err(ModelError::Structure(format!("expected {} grid nodes, found {}", n * n, topo.grid_nodes.len())));
    }
    if feats.len() != topo.node_count * width {
        return Err(ModelError::Shape(format!("features are not {} nodes x {width}", topo.node_count)));
    }
    let mut t = vec![T::zero(); width * n * n];
    for (cell, &node) in topo.grid_nodes.iter().enumerate() {
        for c in 0..width {
            t[c * n * n + cell] = feats[node * width + c];
        }
    }
    Ok(t)
}

fn grid_scatter<T: Scalar>(dgrid: &[T], topo: &GraphTopology, width: usize, dh: &mut [T]) {
    let nn = topo.grid_side * topo.grid_side;
    for (cell, &node) in topo.grid_nodes.iter().enumerate() {
        for c in 0..width {
            dh[node * width + c] += dgrid[c * nn + cell];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_scene_graph, GraphConfig};
    use crate::scenario::{generate_scenario, to_robot_frame, ScenarioClass};

    fn sample_graph(seed: u64) -> SceneGraph {
        let s = to_robot_frame(&generate_scenario(ScenarioClass::ALL[(seed % 3) as usize], seed).unwrap()).unwrap();
        build_scene_graph(&s, &GraphConfig::default()).unwrap()
    }

    #[test]
    fn forward_shape_finite_and_deterministic() {
        let m = Sngnn2d::<f32>::new(ModelConfig::default(), 1).unwrap();
        let g = sample_graph(2);
        let a = m.forward(&g).unwrap();
        let b = m.forward(&g).unwrap();
        assert_eq!(a.side(), 73);
        assert!(a.values().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        assert_eq!(a, b);
        assert!((a.area_side() - 10.0).abs() < 1e-5);
        assert_eq!(m.query_count(), 2);
    }

    #[test]
    fn grid_extract_follows_index() {
        let g = sample_graph(1);
        let topo = GraphTopology::new(&g, 19).unwrap();
        let w = 7;
        let mut feats = vec![0.0f64; g.nodes.len() * w];
        for i in 0..18 {
            for j in 0..18 {
                let node = g.grid_node(i, j);
                feats[node * w] = i as f64;
                feats[node * w + 1] = j as f64;
            }
        }
        let t = grid_extract(&feats, &topo, w).unwrap();
        assert_eq!(t.len(), 18 * 18 * 7);
        for i in 0..18 {
            for j in 0..18 {
                assert_eq!(t[i * 18 + j], i as f64);
                assert_eq!(t[18 * 18 + i * 18 + j], j as f64);
            }
        }
    }

    #[test]
    fn grid_extract_missing_nodes() {
        let mut g = sample_graph(1);
        g.grid_index.pop();
        assert!(matches!(GraphTopology::new(&g, 19), Err(ModelError::Structure(_))));
    }

    #[test]
    fn node_permutation_leaves_output_identical() {
        let m = Sngnn2d::<f64>::new(ModelConfig::default(), 4).unwrap();
        let g = sample_graph(5);
        let n = g.nodes.len();
        // Reverse plus a rotation: nothing stays in place.
        let perm: Vec<usize> = (0..n).map(|k| (n - 1 - k + 7) % n).collect();
        let p = g.relabeled(&perm);
        let a = m.forward_raw(&m.prepare(&g).unwrap()).unwrap();
        let b = m.forward_raw(&m.prepare(&p).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_decoder_with_bias() {
        let cfg = ModelConfig::default();
        let mut m = Sngnn2d::<f64>::new(cfg, 1).unwrap();
        let layout = m.layout().clone();
        // All-zero decoder input: zero every graph weight so the lattice is 0.
        for g in &layout.graph {
            m.params_mut()[g.relation.clone()].iter_mut().for_each(|v| *v = 0.0);
            m.params_mut()[g.self_weight.clone()].iter_mut().for_each(|v| *v = 0.0);
        }
        let b0 = 0.3;
        let b1 = -0.2;
        m.params_mut()[layout.conv[0].bias.clone()].iter_mut().for_each(|v| *v = b0);
        m.params_mut()[layout.conv[1].bias.clone()].iter_mut().for_each(|v| *v = b1);
        let g = sample_graph(3);
        let raw = m.forward_raw(&m.prepare(&g).unwrap()).unwrap();
        m.params_mut()[layout.conv[1].weight.clone()].iter_mut().for_each(|v| *v = 0.0);
        let raw0 = m.forward_raw(&m.prepare(&g).unwrap()).unwrap();
        assert!(raw0.iter().all(|&v| v == b1));
        assert_eq!(raw.len(), 73 * 73);

        let w = 0.1;
        m.params_mut()[layout.conv[1].weight.clone()].iter_mut().for_each(|v| *v = w);
        let raw = m.forward_raw(&m.prepare(&g).unwrap()).unwrap();
        let hidden = b0; // ELU of a positive bias is the bias.
        let c1 = 4.0;
        // Odd output rows/cols receive two taps per axis, even ones one.
        let taps = |o: usize| if o % 2 == 1 { 2.0 } else { 1.0 };
        for (oy, ox) in [(10usize, 10usize), (11, 10), (11, 11), (36, 36)] {
            let want = b1 + c1 * hidden * w * taps(oy) * taps(ox);
            assert!((raw[oy * 73 + ox] - want).abs() < 1e-12, "({oy},{ox}) {} vs {want}", raw[oy * 73 + ox]);
        }
    }

    #[test]
    fn basis_decomposition_runs() {
        let cfg = ModelConfig { num_bases: 3, ..ModelConfig::default() };
        let m = Sngnn2d::<f64>::new(cfg, 2).unwrap();
        let out = m.forward(&sample_graph(4)).unwrap();
        assert_eq!(out.side(), 73);
    }

    #[test]
    fn wrong_param_count() {
        assert!(Sngnn2d::<f32>::from_params(ModelConfig::default(), vec![0.0; 5]).is_err());
    }
}
