//! Minibatch Adam training on binary cross-entropy with corrupted-triple negatives.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{rank_eval, RankOptions};
use super::graph::{KnowledgeGraph, Split, Triple};
use super::model::{KgModel, ModelKind};
use crate::error::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KgTrainConfig {
    /// Model family.
    pub kind: ModelKind,
    /// Entity dimension.
    pub d_e: usize,
    /// Relation dimension; `None` picks the kind default (30 for TuckER, `d_e` otherwise).
    pub d_r: Option<usize>,
    /// Adam learning rate.
    pub lr: f64,
    /// Positive triples per minibatch.
    pub batch: usize,
    /// Negatives per positive.
    pub negs: usize,
    /// Maximum epochs.
    pub epochs: usize,
    /// Root seed for initialisation, shuffling and negative sampling.
    pub seed: u64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Adam epsilon.
    pub eps: f64,
    /// Epochs between validation checks; 0 disables early stopping.
    pub eval_every: usize,
    /// Stop once this many epochs pass without a better validation Hits@10.
    pub patience: usize,
    /// Use at most this many validation triples per check.
    pub valid_limit: Option<usize>,
    /// Update only the entity rows, relation blocks and biases touched by each batch
    /// (moments of untouched rows are left as they are). Dense updates by default.
    pub lazy_adam: bool,
}

impl Default for KgTrainConfig {
    fn default() -> Self {
        KgTrainConfig {
            kind: ModelKind::MuRE,
            d_e: 200,
            d_r: None,
            lr: 0.001,
            batch: 128,
            negs: 50,
            epochs: 500,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eval_every: 5,
            patience: 20,
            valid_limit: None,
            lazy_adam: false,
        }
    }
}

/// Training trace.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean BCE per sample for each epoch run.
    pub epoch_losses: Vec<f64>,
    /// Validation Hits@10 at each check, as `(epoch, hits10)`.
    pub valid_hits10: Vec<(usize, f64)>,
    /// Epoch whose parameters were kept (1-based; last epoch without validation).
    pub best_epoch: usize,
    /// Whether patience ran out before the epoch budget.
    pub stopped_early: bool,
}

/// Numerically stable `log(1 + exp(x))`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One labelled training sample.
#[derive(Debug, Clone, Copy)]
struct Sample {
    s: usize,
    r: usize,
    o: usize,
    y: f64,
}

fn build_batch(pos: &[Triple], n_e: usize, negs: usize, rng: &mut ChaCha8Rng, out: &mut Vec<Sample>) {
    out.clear();
    for &(s, r, o) in pos {
        out.push(Sample { s, r, o, y: 1.0 });
        for _ in 0..negs {
            let x = rng.random_range(0..n_e);
            if rng.random_bool(0.5) {
                out.push(Sample { s: x, r, o, y: 0.0 });
            } else {
                out.push(Sample { s, r, o: x, y: 0.0 });
            }
        }
    }
}

/// Mean BCE over `samples`; adds its gradient into `grad`.
fn batch_gradient(model: &KgModel, samples: &[Sample], grad: &mut [f64]) -> f64 {
    let scale = 1.0 / samples.len() as f64;
    if model.kind == ModelKind::TuckER {
        return tucker_batch_gradient(model, samples, scale, grad);
    }
    let mut loss = 0.0;
    for smp in samples {
        let phi = model.score(smp.s, smp.r, smp.o);
        loss += if smp.y > 0.5 { softplus(-phi) } else { softplus(phi) };
        model.accumulate_gradient(smp.s, smp.r, smp.o, scale * (sigmoid(phi) - smp.y), grad);
    }
    loss * scale
}

/// TuckER path: samples grouped by relation share one `M_r = W x2 r`, and the core gradient
/// is accumulated through `G_r = sum_j g_j e_s e_o^T`.
fn tucker_batch_gradient(model: &KgModel, samples: &[Sample], scale: f64, grad: &mut [f64]) -> f64 {
    let (d, dr) = (model.d_e, model.d_r);
    let l = model.layout;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, smp) in samples.iter().enumerate() {
        groups.entry(smp.r).or_default().push(i);
    }
    let mut loss = 0.0;
    for (r, idx) in groups {
        let m = model.tucker_matrix(r);
        let k = idx.len();
        let mut sm = DMatrix::zeros(d, k);
        let mut om = DMatrix::zeros(d, k);
        for (j, &i) in idx.iter().enumerate() {
            sm.set_column(j, &DVector::from_column_slice(model.entity(samples[i].s)));
            om.set_column(j, &DVector::from_column_slice(model.entity(samples[i].o)));
        }
        let q = &m * &om;
        let p = m.tr_mul(&sm);
        let mut gs = DVector::zeros(k);
        for (j, &i) in idx.iter().enumerate() {
            let phi = sm.column(j).dot(&q.column(j));
            let y = samples[i].y;
            loss += if y > 0.5 { softplus(-phi) } else { softplus(phi) };
            let g = scale * (sigmoid(phi) - y);
            gs[j] = g;
            let (s, o) = (samples[i].s, samples[i].o);
            for c in 0..d {
                grad[s * d + c] += g * q[(c, j)];
                grad[o * d + c] += g * p[(c, j)];
            }
        }
        let mut og = om;
        for j in 0..k {
            og.column_mut(j).scale_mut(gs[j]);
        }
        let gmat = sm * og.transpose();
        let rv = model.relation(r);
        let w = model.core();
        let gr = l.rel + r * l.rel_len;
        for a in 0..d {
            for b in 0..dr {
                let base = a * dr * d + b * d;
                let mut acc = 0.0;
                for c in 0..d {
                    let gac = gmat[(a, c)];
                    acc += w[base + c] * gac;
                    grad[l.core + base + c] += rv[b] * gac;
                }
                grad[gr + b] += acc;
            }
        }
    }
    loss * scale
}

/// Dense Adam state.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn update(p: &mut [f64], g: &mut [f64], m: &mut [f64], v: &mut [f64], k: &AdamConsts) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = k.b1 * m[i] + (1.0 - k.b1) * gi;
            v[i] = k.b2 * v[i] + (1.0 - k.b2) * gi * gi;
            p[i] -= k.lr * (m[i] / k.c1) / ((v[i] / k.c2).sqrt() + k.eps);
            g[i] = 0.0;
        }
    }

    fn consts(&mut self, cfg: &KgTrainConfig) -> AdamConsts {
        self.t += 1;
        AdamConsts {
            b1: cfg.beta1,
            b2: cfg.beta2,
            c1: 1.0 - cfg.beta1.powi(self.t),
            c2: 1.0 - cfg.beta2.powi(self.t),
            lr: cfg.lr,
            eps: cfg.eps,
        }
    }

    /// Applies one dense step and zeroes `grad`.
    fn step(&mut self, params: &mut [f64], grad: &mut [f64], cfg: &KgTrainConfig) {
        let k = self.consts(cfg);
        const CHUNK: usize = 4096;
        params
            .par_chunks_mut(CHUNK)
            .zip(grad.par_chunks_mut(CHUNK))
            .zip(self.m.par_chunks_mut(CHUNK))
            .zip(self.v.par_chunks_mut(CHUNK))
            .for_each(|(((p, g), m), v)| Self::update(p, g, m, v, &k));
    }

    /// Applies one step restricted to `ranges` (disjoint, sorted) and zeroes them in `grad`.
    fn step_ranges(&mut self, params: &mut [f64], grad: &mut [f64], ranges: &[(usize, usize)], cfg: &KgTrainConfig) {
        let k = self.consts(cfg);
        for &(a, b) in ranges {
            Self::update(&mut params[a..b], &mut grad[a..b], &mut self.m[a..b], &mut self.v[a..b], &k);
        }
    }
}

struct AdamConsts {
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    lr: f64,
    eps: f64,
}

/// Parameter ranges touched by a batch, sorted and merged.
fn touched_ranges(model: &KgModel, samples: &[Sample]) -> Vec<(usize, usize)> {
    let (d, l) = (model.d_e, model.layout);
    let mut ranges = Vec::with_capacity(4 * samples.len() + 1);
    for smp in samples {
        for e in [smp.s, smp.o] {
            ranges.push((e * d, (e + 1) * d));
        }
        ranges.push((l.rel + smp.r * l.rel_len, l.rel + (smp.r + 1) * l.rel_len));
        if model.kind.has_bias() {
            ranges.push((l.bias_s + smp.s, l.bias_s + smp.s + 1));
            ranges.push((l.bias_o + smp.o, l.bias_o + smp.o + 1));
        }
    }
    if l.bias_s > l.core {
        ranges.push((l.core, l.bias_s));
    }
    ranges.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
    for (a, b) in ranges {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

/// Trains a model on the training split; see [`train_kg_with`].
pub fn train_kg(kg: &KnowledgeGraph, cfg: &KgTrainConfig) -> Result<(KgModel, TrainReport)> {
    train_kg_with(kg, cfg, |_, _| {})
}

/// Trains a model, calling `on_epoch(epoch, mean_loss)` after each epoch. With a non-empty
/// validation split and `eval_every > 0`, raw validation Hits@10 is checked periodically and
/// the best parameters are returned.
pub fn train_kg_with(
    kg: &KnowledgeGraph,
    cfg: &KgTrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(KgModel, TrainReport)> {
    if kg.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if cfg.batch == 0 || cfg.lr <= 0.0 || !cfg.lr.is_finite() {
        return Err(Error::invalid("batch must be positive and lr a positive finite number"));
    }
    let d_r = cfg.d_r.unwrap_or_else(|| cfg.kind.default_d_r(cfg.d_e));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_seed: u64 = rng.random();
    let mut model = KgModel::init(cfg.kind, kg.n_entities(), kg.n_relations(), cfg.d_e, d_r, init_seed)?;
    model.seed = cfg.seed;
    let mut adam = Adam::new(model.layout.len);
    let mut grad = vec![0.0; model.layout.len];
    let mut order: Vec<Triple> = kg.train.clone();
    let mut samples = Vec::with_capacity(cfg.batch * (cfg.negs + 1));
    let mut report = TrainReport::default();
    let validate = cfg.eval_every > 0 && !kg.valid.is_empty();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let rank_opts = RankOptions { limit: cfg.valid_limit, ..RankOptions::default() };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut n = 0usize;
        for chunk in order.chunks(cfg.batch) {
            build_batch(chunk, kg.n_entities(), cfg.negs, &mut rng, &mut samples);
            let loss = batch_gradient(&model, &samples, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss became non-finite in epoch {epoch}")));
            }
            if cfg.lazy_adam {
                let ranges = touched_ranges(&model, &samples);
                adam.step_ranges(&mut model.params, &mut grad, &ranges, cfg);
            } else {
                adam.step(&mut model.params, &mut grad, cfg);
            }
            total += loss * samples.len() as f64;
            n += samples.len();
        }
        let mean = total / n as f64;
        model.check_finite().map_err(|e| Error::Numerical(format!("epoch {epoch}: {e}")))?;
        report.epoch_losses.push(mean);
        on_epoch(epoch, mean);
        report.best_epoch = epoch;
        if validate && epoch % cfg.eval_every == 0 {
            let h10 = rank_eval(&model, kg, Split::Valid, &rank_opts)?.overall.hits10;
            report.valid_hits10.push((epoch, h10));
            if best.as_ref().is_none_or(|(b, _)| h10 > *b) {
                best = Some((h10, model.params.clone()));
            }
            let best_epoch = report
                .valid_hits10
                .iter()
                .fold((0, f64::NEG_INFINITY), |acc, &(e, h)| if h > acc.1 { (e, h) } else { acc })
                .0;
            if epoch - best_epoch >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        report.best_epoch = report
            .valid_hits10
            .iter()
            .fold((0, f64::NEG_INFINITY), |acc, &(e, h)| if h > acc.1 { (e, h) } else { acc })
            .0;
        model.params = params;
    }
    Ok((model, report))
}
