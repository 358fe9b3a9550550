use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::model::{PreparedGraph, Sngnn2d};
use super::{ModelConfig, ModelError, TrainConfig};
use crate::bootstrap::DatasetSample;
use crate::scalar::Scalar;
use crate::seeds::rng_for;

#[derive(Debug, Clone)]
pub struct PreparedSample<T> {
    pub sample_id: String,
    pub graph: PreparedGraph<T>,
    pub target: Vec<T>,
}

impl<T: Scalar> PreparedSample<T> {
    pub fn new(s: &DatasetSample, cfg: &ModelConfig) -> Result<Self, ModelError> {
        if s.target.side() != cfg.output_side {
            return Err(ModelError::Shape(format!(
                "{}: target is {}x{0}, model emits {}x{1}",
                s.sample_id,
                s.target.side(),
                cfg.output_side
            )));
        }
        Ok(Self {
            sample_id: s.sample_id.clone(),
            graph: PreparedGraph::new(&s.graph, cfg)?,
            target: s.target.values().iter().map(|&v| T::of(v)).collect(),
        })
    }
}

pub fn prepare_samples<T: Scalar>(samples: &[DatasetSample], cfg: &ModelConfig) -> Result<Vec<PreparedSample<T>>, ModelError> {
    samples.par_iter().map(|s| PreparedSample::new(s, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub dev_mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_mse: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,dev_mse\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{:.9},{:.9}", r.epoch, r.train_mse, r.dev_mse);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub model: Sngnn2d<T>,
    pub history: TrainHistory,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        self.t += 1;
        let (b1, b2) = (T::of(Self::B1), T::of(Self::B2));
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let step = T::of(lr * c2.sqrt() / c1);
        let eps = T::of(Self::EPS * c2.sqrt());
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * *g;
            *v = b2 * *v + (T::one() - b2) * *g * *g;
            *p -= step * *m / (v.sqrt() + eps);
        }
    }
}

/// Mean over samples of the per-cell MSE of the clamped output.
pub fn evaluate<T: Scalar>(model: &Sngnn2d<T>, samples: &[PreparedSample<T>]) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptySplit("evaluation"));
    }
    let per: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let out = model.forward_raw(&s.graph)?;
            let se: f64 = out
                .iter()
                .zip(&s.target)
                .map(|(&y, &t)| {
                    let y = y.to_f64_lossy();
                    let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, 1.0) };
                    (y - t.to_f64_lossy()).powi(2)
                })
                .sum();
            Ok(se / out.len() as f64)
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Mini-batch Adam on unclamped MSE with early stopping on dev MSE. Returns
/// the parameters from the best dev epoch. Batch gradients are computed in
/// parallel and summed in sample order, so results do not depend on the
/// thread count.
pub fn train<T: Scalar>(
    mut model: Sngnn2d<T>,
    train: &[PreparedSample<T>],
    dev: &[PreparedSample<T>],
    tcfg: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    tcfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if dev.is_empty() {
        return Err(ModelError::EmptySplit("dev"));
    }
    let n = model.parameter_count();
    let mut adam = Adam::new(n);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory { best_dev_mse: f64::INFINITY, ..Default::default() };
    let mut best = model.params().to_vec();
    let mut since_best = 0;
    for epoch in 1..=tcfg.max_epochs {
        order.shuffle(&mut rng_for(tcfg.seed, 0x7a11 + epoch as u64));
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(tcfg.batch_size).enumerate() {
            let results: Vec<(T, Vec<T>)> = idx
                .par_iter()
                .map(|&k| model.loss_and_grad(&train[k].graph, &train[k].target))
                .collect::<Result<_, _>>()?;
            let mut grad = vec![T::zero(); n];
            let mut loss = T::zero();
            for (l, g) in &results {
                loss += *l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += *b);
            }
            let inv = T::one() / T::of(idx.len() as f64);
            grad.iter_mut().for_each(|g| *g *= inv);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFinite { epoch, batch });
            }
            epoch_loss += loss.to_f64_lossy();
            adam.step(model.params_mut(), &grad, tcfg.learning_rate);
        }
        let train_mse = epoch_loss / train.len() as f64;
        let dev_mse = evaluate(&model, dev)?;
        log::info!("epoch {epoch}: train {train_mse:.6} dev {dev_mse:.6}");
        history.epochs.push(EpochRecord { epoch, train_mse, dev_mse });
        if dev_mse < history.best_dev_mse {
            history.best_dev_mse = dev_mse;
            history.best_epoch = epoch;
            best.copy_from_slice(model.params());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tcfg.patience {
                history.stopped_early = epoch < tcfg.max_epochs;
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best);
    model.reset_query_count();
    Ok(TrainOutcome { model, history })
}
