use std::ops::Range;

use super::ModelConfig;

/// Where each weight tensor lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLayerLayout {
    pub din: usize,
    pub dout: usize,
    /// `[relation][out][in]` when no bases are used, otherwise `[basis][out][in]`.
    pub relation: Range<usize>,
    /// `[relation][basis]`, empty without bases.
    pub coefficients: Range<usize>,
    /// `[out][in]`.
    pub self_weight: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayout {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    /// `[in][out][ky][kx]`.
    pub weight: Range<usize>,
    pub bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub graph: Vec<GraphLayerLayout>,
    pub conv: [ConvLayout; 2],
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let mats = if cfg.uses_bases() { cfg.num_bases } else { cfg.relation_count };
        let graph = cfg
            .dim_schedule
            .windows(2)
            .map(|w| {
                let (din, dout) = (w[0], w[1]);
                let relation = take(mats * dout * din);
                let coefficients = take(if cfg.uses_bases() { cfg.relation_count * cfg.num_bases } else { 0 });
                let self_weight = take(dout * din);
                GraphLayerLayout { din, dout, relation, coefficients, self_weight }
            })
            .collect();
        let mut conv = |k: usize| {
            let (cin, cout, kernel) = (cfg.conv_channels[k], cfg.conv_channels[k + 1], cfg.kernels[k]);
            let weight = take(cin * cout * kernel * kernel);
            let bias = take(cout);
            ConvLayout { cin, cout, kernel, weight, bias }
        };
        let conv = [conv(0), conv(1)];
        ParamLayout { graph, conv, total: at }
    }

    /// Named tensors with shapes, in storage order.
    pub fn tensors(&self, cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Range<usize>)> {
        let mut out = Vec::new();
        for (l, g) in self.graph.iter().enumerate() {
            if cfg.uses_bases() {
                out.push((format!("rgcn.{l}.bases"), vec![cfg.num_bases, g.dout, g.din], g.relation.clone()));
                out.push((format!("rgcn.{l}.coefficients"), vec![cfg.relation_count, cfg.num_bases], g.coefficients.clone()));
            } else {
                out.push((format!("rgcn.{l}.relation_weights"), vec![cfg.relation_count, g.dout, g.din], g.relation.clone()));
            }
            out.push((format!("rgcn.{l}.self_weight"), vec![g.dout, g.din], g.self_weight.clone()));
        }
        for (k, c) in self.conv.iter().enumerate() {
            out.push((format!("deconv.{k}.weight"), vec![c.cin, c.cout, c.kernel, c.kernel], c.weight.clone()));
            out.push((format!("deconv.{k}.bias"), vec![c.cout], c.bias.clone()));
        }
        out
    }
}
