//! Relational graph convolution:
//! `h_i' = act(W_0 h_i + Σ_r Σ_{j ∈ N_r(i)} W_r h_j / |N_r(i)|)`.

use super::topology::GraphTopology;
use super::{Activation, ModelError};
use crate::scalar::Scalar;

/// Borrowed weights of one graph layer with per-relation matrices already
/// materialized.
#[derive(Debug, Clone, Copy)]
pub struct RgcnWeights<'a, T> {
    pub din: usize,
    pub dout: usize,
    /// `[relation][out][in]`.
    pub relation: &'a [T],
    /// `[out][in]`.
    pub self_weight: &'a [T],
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct RgcnCache<T> {
    /// Normalized per-group neighbour means, `[group][in]`.
    pub messages: Vec<T>,
    /// Pre-activation outputs, `[node][out]`.
    pub pre: Vec<T>,
}

#[inline]
pub(crate) fn act<T: Scalar>(a: Activation, z: T) -> T {
    match a {
        Activation::Elu => {
            if z > T::zero() {
                z
            } else {
                z.exp_m1()
            }
        }
        Activation::Identity => z,
    }
}

#[inline]
pub(crate) fn act_grad<T: Scalar>(a: Activation, z: T) -> T {
    match a {
        Activation::Elu => {
            if z > T::zero() {
                T::one()
            } else {
                z.exp()
            }
        }
        Activation::Identity => T::one(),
    }
}

/// `out += M x` for row-major `M` of shape `rows × x.len()`.
#[inline]
fn matvec_acc<T: Scalar>(m: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        let mut s = T::zero();
        for (a, b) in row.iter().zip(x) {
            s += *a * *b;
        }
        *o += s;
    }
}

/// `out += Mᵀ y` for row-major `M` of shape `y.len() × out.len()`.
#[inline]
fn matvec_t_acc<T: Scalar>(m: &[T], y: &[T], out: &mut [T]) {
    let cols = out.len();
    for (row, &yv) in m.chunks_exact(cols).zip(y) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += *a * yv;
        }
    }
}

/// `g += y xᵀ`.
#[inline]
fn outer_acc<T: Scalar>(g: &mut [T], y: &[T], x: &[T]) {
    let cols = x.len();
    for (row, &yv) in g.chunks_exact_mut(cols).zip(y) {
        for (o, a) in row.iter_mut().zip(x) {
            *o += yv * *a;
        }
    }
}

/// Runs one layer, returning activated outputs and the cache for backward.
pub fn rgcn_forward<T: Scalar>(
    feats: &[T],
    topo: &GraphTopology,
    w: RgcnWeights<'_, T>,
    activation: Activation,
) -> Result<(Vec<T>, RgcnCache<T>), ModelError> {
    let (din, dout) = (w.din, w.dout);
    if feats.len() != topo.node_count * din {
        return Err(ModelError::Shape(format!(
            "layer expects {} nodes x {din} features, got {} values",
            topo.node_count,
            feats.len()
        )));
    }
    let mut messages = vec![T::zero(); topo.groups.len() * din];
    for (g, msg) in topo.groups.iter().zip(messages.chunks_exact_mut(din)) {
        for &src in &topo.sources[g.start as usize..g.end as usize] {
            let h = &feats[src as usize * din..(src as usize + 1) * din];
            for (m, v) in msg.iter_mut().zip(h) {
                *m += *v;
            }
        }
        let norm = T::one() / T::of(g.len() as f64);
        for m in msg.iter_mut() {
            *m *= norm;
        }
    }
    let mut pre = vec![T::zero(); topo.node_count * dout];
    let rel_stride = dout * din;
    for (node, z) in pre.chunks_exact_mut(dout).enumerate() {
        matvec_acc(w.self_weight, &feats[node * din..(node + 1) * din], z);
        let first = topo.group_offsets[node];
        for (k, g) in topo.node_groups(node).iter().enumerate() {
            let r = g.relation as usize;
            let gi = first + k;
            matvec_acc(&w.relation[r * rel_stride..(r + 1) * rel_stride], &messages[gi * din..(gi + 1) * din], z);
        }
    }
    let out = pre.iter().map(|&z| act(activation, z)).collect();
    Ok((out, RgcnCache { messages, pre }))
}

/// Backpropagates through one layer. Accumulates weight gradients into
/// `grad_relation` / `grad_self` and returns the input gradient when
/// `need_input_grad` is set.
#[allow(clippy::too_many_arguments)]
pub fn rgcn_backward<T: Scalar>(
    feats: &[T],
    topo: &GraphTopology,
    w: RgcnWeights<'_, T>,
    activation: Activation,
    cache: &RgcnCache<T>,
    grad_out: &[T],
    grad_relation: &mut [T],
    grad_self: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let (din, dout) = (w.din, w.dout);
    let rel_stride = dout * din;
    let dz: Vec<T> = grad_out.iter().zip(&cache.pre).map(|(&g, &z)| g * act_grad(activation, z)).collect();
    let mut dfeats = if need_input_grad { vec![T::zero(); feats.len()] } else { Vec::new() };
    let mut dmsg = vec![T::zero(); din];
    for node in 0..topo.node_count {
        let dzi = &dz[node * dout..(node + 1) * dout];
        let hi = &feats[node * din..(node + 1) * din];
        outer_acc(grad_self, dzi, hi);
        if need_input_grad {
            matvec_t_acc(w.self_weight, dzi, &mut dfeats[node * din..(node + 1) * din]);
        }
        let first = topo.group_offsets[node];
        for (k, g) in topo.node_groups(node).iter().enumerate() {
            let r = g.relation as usize;
            let gi = first + k;
            outer_acc(&mut grad_relation[r * rel_stride..(r + 1) * rel_stride], dzi, &cache.messages[gi * din..(gi + 1) * din]);
            if need_input_grad {
                dmsg.iter_mut().for_each(|v| *v = T::zero());
                matvec_t_acc(&w.relation[r * rel_stride..(r + 1) * rel_stride], dzi, &mut dmsg);
                let norm = T::one() / T::of(g.len() as f64);
                for &src in &topo.sources[g.start as usize..g.end as usize] {
                    let d = &mut dfeats[src as usize * din..(src as usize + 1) * din];
                    for (a, b) in d.iter_mut().zip(&dmsg) {
                        *a += *b * norm;
                    }
                }
            }
        }
    }
    need_input_grad.then_some(dfeats)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::{Edge, Node, NodeKind, Relation, SceneGraph, FEATURE_DIM, RELATION_COUNT};

    fn graph(n: usize, edges: Vec<Edge>) -> SceneGraph {
        SceneGraph {
            nodes: (0..n).map(|id| Node { id, kind: NodeKind::Grid, feature: vec![id as f64; FEATURE_DIM] }).collect(),
            edges,
            grid_side: 1,
            grid_index: vec![0],
        }
    }

    #[test]
    fn self_loop_identity_is_fixed_point() {
        let g = graph(1, vec![Edge { src: 0, dst: 0, relation: Relation::SelfLoop }]);
        let topo = GraphTopology::new(&g, RELATION_COUNT).unwrap();
        let d = 3;
        let eye: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let zeros = vec![0.0; RELATION_COUNT * d * d];
        let w = RgcnWeights { din: d, dout: d, relation: &zeros, self_weight: &eye };
        let x = vec![0.5, -1.25, 3.0];
        let (y, _) = rgcn_forward(&x, &topo, w, Activation::Identity).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn single_relation_edge() {
        let g = graph(2, vec![Edge { src: 0, dst: 1, relation: Relation::GridUp }]);
        let topo = GraphTopology::new(&g, RELATION_COUNT).unwrap();
        let d = 2;
        let mut rel = vec![0.0; RELATION_COUNT * d * d];
        let r = Relation::GridUp.index();
        rel[r * 4] = 1.0;
        rel[r * 4 + 3] = 1.0;
        let zeros = vec![0.0; d * d];
        let w = RgcnWeights { din: d, dout: d, relation: &rel, self_weight: &zeros };
        let x = vec![-0.5, 2.0, 7.0, 9.0];
        let (y, _) = rgcn_forward(&x, &topo, w, Activation::Elu).unwrap();
        assert_eq!(&y[..2], &[0.0, 0.0]);
        assert_eq!(y[2], (-0.5f64).exp_m1());
        assert_eq!(y[3], 2.0);
    }

    #[test]
    fn width_mismatch() {
        let g = graph(2, vec![]);
        let topo = GraphTopology::new(&g, RELATION_COUNT).unwrap();
        let rel = vec![0.0; RELATION_COUNT * 4];
        let w = RgcnWeights { din: 2, dout: 2, relation: &rel, self_weight: &[0.0; 4] };
        assert!(matches!(rgcn_forward(&[1.0; 3], &topo, w, Activation::Elu), Err(ModelError::Shape(_))));
    }

    /// Dense formulation: per-relation normalized adjacency matrices.
    fn dense_oracle(
        n: usize,
        edges: &[Edge],
        x: &[f64],
        din: usize,
        dout: usize,
        rel: &[f64],
        w0: &[f64],
        a: Activation,
    ) -> Vec<f64> {
        let mut adj = vec![vec![vec![0.0f64; n]; n]; RELATION_COUNT];
        let mut uniq = edges.to_vec();
        uniq.sort_by_key(|e| (e.dst, e.relation, e.src));
        uniq.dedup();
        for e in &uniq {
            adj[e.relation.index()][e.dst][e.src] = 1.0;
        }
        for m in adj.iter_mut() {
            for row in m.iter_mut() {
                let deg: f64 = row.iter().sum();
                if deg > 0.0 {
                    row.iter_mut().for_each(|v| *v /= deg);
                }
            }
        }
        let mut out = vec![0.0; n * dout];
        for i in 0..n {
            for o in 0..dout {
                let mut z = 0.0;
                for k in 0..din {
                    z += w0[o * din + k] * x[i * din + k];
                }
                for (r, m) in adj.iter().enumerate() {
                    for j in 0..n {
                        if m[i][j] == 0.0 {
                            continue;
                        }
                        for k in 0..din {
                            z += m[i][j] * rel[r * dout * din + o * din + k] * x[j * din + k];
                        }
                    }
                }
                out[i * dout + o] = act(a, z);
            }
        }
        out
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.gen_range(1..=20);
            let (din, dout) = (rng.gen_range(1..8), rng.gen_range(1..8));
            let edges: Vec<Edge> = (0..rng.gen_range(0..60))
                .map(|_| Edge {
                    src: rng.gen_range(0..n),
                    dst: rng.gen_range(0..n),
                    relation: Relation::from_index(rng.gen_range(0..RELATION_COUNT)).unwrap(),
                })
                .collect();
            let g = graph(n, edges.clone());
            let topo = GraphTopology::new(&g, RELATION_COUNT).unwrap();
            let x: Vec<f64> = (0..n * din).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let rel: Vec<f64> = (0..RELATION_COUNT * dout * din).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w0: Vec<f64> = (0..dout * din).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = RgcnWeights { din, dout, relation: &rel, self_weight: &w0 };
            let (y, _) = rgcn_forward(&x, &topo, w, Activation::Elu).unwrap();
            let want = dense_oracle(n, &edges, &x, din, dout, &rel, &w0, Activation::Elu);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
    }
}
