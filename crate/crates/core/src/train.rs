//! Negative-sampling training with binary cross-entropy and AdamW.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{indices, Tape, Tensor};
use crate::dataset::{Quadruple, Split, TkgDataset};
use crate::error::{Error, Result};
use crate::model::{score_all, Context, MessageGraph, ModelConfig, ModelParams, Query};
use crate::parallel;

fn d_epochs() -> usize {
    10
}
fn d_batch() -> usize {
    16
}
fn d_negatives() -> usize {
    512
}
fn d_lr() -> f64 {
    5e-4
}
fn d_wd() -> f64 {
    0.01
}
fn d_clip() -> f64 {
    10.0
}
fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(rename = "batch", default = "d_batch")]
    pub batch_size: usize,
    #[serde(rename = "negatives", default = "d_negatives")]
    pub negatives_per_positive: usize,
    #[serde(rename = "lr", default = "d_lr")]
    pub learning_rate: f64,
    #[serde(rename = "wd", default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default)]
    pub seed: u64,
    /// Drop each positive fact (and its inverse twin) from the message
    /// graph of its own query.
    #[serde(default = "d_true")]
    pub remove_query_edge: bool,
    #[serde(default = "d_clip")]
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: d_epochs(),
            batch_size: d_batch(),
            negatives_per_positive: d_negatives(),
            learning_rate: d_lr(),
            weight_decay: d_wd(),
            seed: 0,
            remove_query_edge: true,
            clip_norm: d_clip(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("train.negatives must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train.lr must be positive".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Config("train.wd must be >= 0 and clip_norm > 0".into()));
        }
        Ok(())
    }
}

/// `count` entities drawn uniformly with replacement from all entities
/// except `gold`.
pub fn negative_sample(
    entity_count: usize,
    gold: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if entity_count < 2 {
        return Err(Error::TooFewEntities);
    }
    Ok((0..count)
        .map(|_| {
            let c = rng.gen_range(0..entity_count - 1);
            if c >= gold {
                c + 1
            } else {
                c
            }
        })
        .collect())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `-log sigmoid(pos) - mean log(1 - sigmoid(neg))`, in softplus form.
pub fn bce_loss(pos: f64, negs: &[f64]) -> f64 {
    softplus(-pos) + negs.iter().map(|&x| softplus(x)).sum::<f64>() / negs.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments and decoupled decay:
/// `p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`.
pub fn adamw_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut OptimizerState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape("adamw_step", &[params.len()], &[grads.len(), state.m.len()]));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adamw_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((x, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mh = *mi / c1;
            let vh = *vi / c2;
            *x -= cfg.lr * (mh / (vh.sqrt() + cfg.eps) + cfg.weight_decay * *x);
        }
    }
    Ok(())
}

/// Rescale gradients so their global 2-norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }
    norm
}

/// Message graphs for one query; a graph is skipped when its blend weight
/// is zero.
pub fn query_graphs(
    ctx: &Context,
    config: &ModelConfig,
    time: usize,
    exclude: &[Quadruple],
) -> Result<(Option<MessageGraph>, Option<MessageGraph>)> {
    let global = if config.alpha < 1.0 {
        Some(ctx.global(exclude)?)
    } else {
        None
    };
    let local = if config.alpha > 0.0 {
        Some(ctx.window(time, config.k, exclude)?)
    } else {
        None
    };
    Ok((global, local))
}

/// Loss and parameter gradients for a single positive fact.
pub fn query_loss(
    params: &ModelParams,
    ctx: &Context,
    fact: &Quadruple,
    negatives: &[usize],
    exclude: &[Quadruple],
) -> Result<(f64, Vec<Tensor>)> {
    let (global, local) = query_graphs(ctx, params.config(), fact.time, exclude)?;
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, true);
    let q = Query::new(fact.head, fact.relation, fact.time);
    let scores = score_all(
        &mut tape,
        params,
        &vars,
        ctx.relations(),
        global.as_ref(),
        local.as_ref(),
        q,
    )?;
    let pos = tape.gather(scores, indices([fact.tail]))?;
    let neg = tape.gather(scores, negatives.iter().copied().collect())?;
    let loss = tape.bce_with_logits(pos, neg);
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss on fact {fact}")));
    }
    let mut grads = tape.backward(loss)?;
    let out = vars
        .iter()
        .zip(params.values())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((value, out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

impl std::fmt::Display for EpochLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "epoch={} loss={:.6} seconds={:.3}", self.epoch, self.loss, self.seconds)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

/// Train from scratch on the (inverse-augmented) training split. Every
/// training fact yields one tail query; inverse facts cover head queries.
/// `on_epoch` runs after each epoch; returning `false` stops early.
pub fn train(
    dataset: &TkgDataset,
    model: &ModelConfig,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &ModelParams) -> bool,
) -> Result<TrainOutcome> {
    config.validate()?;
    if !dataset.is_inverse_augmented() {
        return Err(Error::NotAugmented);
    }
    let facts = dataset.split(Split::Train).to_vec();
    if facts.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let ctx = Context::new(
        dataset.entity_count(),
        dataset.relation_count(),
        facts.iter().copied(),
        model.self_loops,
    )?;
    let mut params = ModelParams::init(model, config.seed)?;
    let mut state = OptimizerState::new(params.values());
    let adam = AdamConfig::new(config.learning_rate, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let pool = parallel::pool()?;
    let mut log = Vec::with_capacity(config.epochs);
    let mut order = facts.clone();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            // Draw negatives up front so results do not depend on scheduling.
            let jobs: Vec<(Quadruple, Vec<usize>, Vec<Quadruple>)> = batch
                .iter()
                .map(|f| {
                    let negs = negative_sample(
                        dataset.entity_count(),
                        f.tail,
                        config.negatives_per_positive,
                        &mut rng,
                    )?;
                    let exclude = if config.remove_query_edge {
                        let twin = Quadruple::new(f.tail, dataset.inverse_of(f.relation), f.head, f.time);
                        vec![*f, twin]
                    } else {
                        Vec::new()
                    };
                    Ok((*f, negs, exclude))
                })
                .collect::<Result<_>>()?;
            let results: Vec<Result<(f64, Vec<Tensor>)>> = pool.install(|| {
                jobs.par_iter()
                    .map(|(f, negs, ex)| query_loss(&params, &ctx, f, negs, ex))
                    .collect()
            });
            let n = batch.len() as f64;
            let mut sum: Vec<Tensor> = params.values().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for r in results {
                let (loss, grads) = r?;
                total += loss;
                for (s, g) in sum.iter_mut().zip(&grads) {
                    for (a, b) in s.data_mut().iter_mut().zip(g.data()) {
                        *a += b / n;
                    }
                }
            }
            clip_gradients(&mut sum, config.clip_norm);
            adamw_step(params.values_mut(), &sum, &mut state, &adam)?;
        }
        let entry = EpochLog {
            epoch,
            loss: total / facts.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        let go_on = on_epoch(&entry, &params);
        log.push(entry);
        if !go_on {
            break;
        }
    }
    Ok(TrainOutcome { params, log })
}
