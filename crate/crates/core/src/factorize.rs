//! Embedding matrices `W`, `C` (d × n, one column per word) learned under
//! the SGNS or least-squares losses, or built from an eigendecomposition of a
//! symmetric PMI matrix.

use std::borrow::Cow;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceStats;
use crate::error::{Error, Result};
use crate::pmi::{distort, PmiMatrix, ProbabilityModel};
use crate::sparse::SparseMatrix;

/// Tolerance on `|P − Pᵀ|` accepted by [`analytic_factorize`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Default SGD learning rate for the SGNS loss.
pub const SGNS_LR: f64 = 0.007;

/// Default SGD learning rate for the least-squares losses.
pub const LSQ_LR: f64 = 0.01;

/// Distortion power applied to the noise distribution.
pub const NOISE_POWER: f64 = 0.75;

/// Objective an [`EmbeddingSet`] was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Sgns,
    Lsq,
    LsqTied,
    Analytic,
    /// Loaded from a third-party word2vec file.
    External,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Sgns => "sgns",
            LossKind::Lsq => "lsq",
            LossKind::LsqTied => "lsq_tied",
            LossKind::Analytic => "analytic",
            LossKind::External => "external",
        })
    }
}

/// Which embeddings are paired when comparing words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interaction {
    #[default]
    WW,
    WC,
    AA,
}

impl FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "WW" => Ok(Interaction::WW),
            "WC" => Ok(Interaction::WC),
            "AA" => Ok(Interaction::AA),
            _ => Err(Error::Usage(format!("interaction must be WW, WC or AA, got {s:?}"))),
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interaction::WW => "WW",
            Interaction::WC => "WC",
            Interaction::AA => "AA",
        })
    }
}

/// Context-embedding storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContextMatrix {
    Separate(DMatrix<f64>),
    /// `C` is `W`.
    Tied,
    /// Not available (third-party file).
    Absent,
}

/// Full eigendecomposition kept by [`analytic_factorize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParts {
    /// All eigenvalues, selected ones first, in selection order.
    pub eigenvalues: DVector<f64>,
    /// Matching unit eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Number of selected eigenpairs.
    pub dim: usize,
}

/// Word and context embeddings with training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub words: Vec<String>,
    w: DMatrix<f64>,
    context: ContextMatrix,
    pub loss: LossKind,
    /// Negative-sampling `k` the targets were shifted by (1 if unshifted).
    pub shift_k: f64,
    pub seed: u64,
    pub epochs: usize,
    /// Per-epoch summed loss, recorded at visit time.
    pub epoch_losses: Vec<f64>,
    #[serde(skip)]
    analytic: Option<AnalyticParts>,
}

impl EmbeddingSet {
    /// Assemble a set from explicit matrices.
    pub fn from_parts(words: Vec<String>, w: DMatrix<f64>, context: ContextMatrix, loss: LossKind) -> Result<Self> {
        if w.ncols() != words.len() {
            return Err(Error::Mismatch(format!("W has {} columns for {} words", w.ncols(), words.len())));
        }
        if let ContextMatrix::Separate(c) = &context {
            if c.shape() != w.shape() {
                return Err(Error::Mismatch(format!("C is {:?}, W is {:?}", c.shape(), w.shape())));
            }
        }
        Ok(Self {
            words,
            w,
            context,
            loss,
            shift_k: 1.0,
            seed: 0,
            epochs: 0,
            epoch_losses: Vec::new(),
            analytic: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn n(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `C`, resolving tied storage to `W`; `None` when absent.
    pub fn c(&self) -> Option<&DMatrix<f64>> {
        match &self.context {
            ContextMatrix::Separate(c) => Some(c),
            ContextMatrix::Tied => Some(&self.w),
            ContextMatrix::Absent => None,
        }
    }

    /// `C`, or an error when the set has none.
    pub fn require_c(&self) -> Result<&DMatrix<f64>> {
        self.c()
            .ok_or_else(|| Error::invalid("embedding set has no context matrix"))
    }

    pub fn context_storage(&self) -> &ContextMatrix {
        &self.context
    }

    pub fn is_tied(&self) -> bool {
        matches!(self.context, ContextMatrix::Tied)
    }

    pub fn analytic_parts(&self) -> Option<&AnalyticParts> {
        self.analytic.as_ref()
    }

    /// Id of `word`, or an out-of-vocabulary error.
    pub fn word_id(&self, word: &str) -> Result<usize> {
        self.words
            .iter()
            .position(|w| w == word)
            .ok_or_else(|| Error::OutOfVocabulary(vec![word.to_owned()]))
    }

    /// Map from word to id.
    pub fn index(&self) -> std::collections::HashMap<&str, usize> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }

    /// Left and right matrices for an interaction.
    pub fn interaction(&self, it: Interaction) -> Result<(Cow<'_, DMatrix<f64>>, Cow<'_, DMatrix<f64>>)> {
        Ok(match it {
            Interaction::WW => (Cow::Borrowed(&self.w), Cow::Borrowed(&self.w)),
            Interaction::WC => (Cow::Borrowed(&self.w), Cow::Borrowed(self.require_c()?)),
            Interaction::AA => {
                let a = mean_embeddings(self)?;
                (Cow::Owned(a.clone()), Cow::Owned(a))
            }
        })
    }

    /// Multiply every embedding by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.w *= factor;
        if let ContextMatrix::Separate(c) = &mut out.context {
            *c *= factor;
        }
        out.analytic = None;
        out
    }
}

/// `A = (W + C)/2`.
pub fn mean_embeddings(set: &EmbeddingSet) -> Result<DMatrix<f64>> {
    match &set.context {
        ContextMatrix::Tied => Ok(set.w.clone()),
        ContextMatrix::Separate(c) => Ok((&set.w + c) * 0.5),
        ContextMatrix::Absent => Err(Error::invalid("mean embeddings need a context matrix")),
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

/// `log σ(x)`, stable for large `|x|`.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Probability-normalized inputs of the SGNS loss:
/// `p(w_i, c_j)`, `p(w_i)`, noise distribution `p_n(c_j)` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsTargets {
    pub p_pair: SparseMatrix,
    pub p_target: Vec<f64>,
    pub p_noise: Vec<f64>,
    pub k: f64,
}

impl SgnsTargets {
    /// Targets from corpus counts; with `distort_noise`, the context marginal
    /// is raised to 0.75 and renormalized.
    pub fn from_stats(stats: &CooccurrenceStats, k: f64, distort_noise: bool) -> Result<Self> {
        let d = stats.total_weight();
        if !(d > 0.0) {
            return Err(Error::invalid("statistics are empty"));
        }
        let n = stats.n();
        let trip = stats.entries().into_iter().map(|(i, j, v)| (i, j, v / d)).collect();
        let p_context: Vec<f64> = stats.context_weights().iter().map(|v| v / d).collect();
        Self::from_parts(
            SparseMatrix::from_triplets(n, n, trip),
            stats.target_weights().iter().map(|v| v / d).collect(),
            if distort_noise { distort(&p_context, NOISE_POWER) } else { p_context },
            k,
        )
    }

    /// Targets from a probability model.
    pub fn from_model(model: &ProbabilityModel, k: f64, distort_noise: bool) -> Result<Self> {
        let pc = model.p_context().to_vec();
        Self::from_parts(
            model.p_pair_matrix().clone(),
            model.p_target().to_vec(),
            if distort_noise { distort(&pc, NOISE_POWER) } else { pc },
            k,
        )
    }

    /// Targets whose SGNS optimum is exactly `opt`:
    /// `p(w_i, c_j) = k p(w_i) p_n(c_j) exp(opt_ij)`.
    pub fn from_optimum(opt: &DMatrix<f64>, p_target: Vec<f64>, p_noise: Vec<f64>, k: f64) -> Result<Self> {
        let n = opt.nrows();
        let pair = DMatrix::from_fn(n, n, |i, j| k * p_target[i] * p_noise[j] * opt[(i, j)].exp());
        Self::from_parts(SparseMatrix::from_dense_where(&pair, |v| v > 0.0), p_target, p_noise, k)
    }

    pub fn from_parts(p_pair: SparseMatrix, p_target: Vec<f64>, p_noise: Vec<f64>, k: f64) -> Result<Self> {
        let n = p_target.len();
        if p_pair.rows() != n || p_pair.cols() != n || p_noise.len() != n {
            return Err(Error::Mismatch("SGNS target dimensions disagree".into()));
        }
        if !(k > 0.0) {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(Self {
            p_pair,
            p_target,
            p_noise,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.p_target.len()
    }

    /// Cell-wise optimum `log(p(w_i, c_j) / (k p(w_i) p_n(c_j)))`; −∞ where
    /// the pair never occurs.
    pub fn optimum(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let p = self.p_pair.get(i, j).unwrap_or(0.0);
            (p / (self.k * self.p_target[i] * self.p_noise[j])).ln()
        })
    }

    fn negative_weight(&self, i: usize, j: usize) -> f64 {
        self.k * self.p_target[i] * self.p_noise[j]
    }

    /// Scale making the mean cell weight `p_ij + k p_i p_nj` equal to 1.
    fn cell_scale(&self) -> f64 {
        let n = self.n() as f64;
        let neg: f64 = self.k * self.p_target.iter().sum::<f64>() * self.p_noise.iter().sum::<f64>();
        n * n / (self.p_pair.sum() + neg)
    }
}

/// SGNS loss `−Σ_ij p_ij log σ(w_iᵀc_j) + k p_i p_nj log σ(−w_iᵀc_j)`.
pub fn sgns_loss(w: &DMatrix<f64>, c: &DMatrix<f64>, t: &SgnsTargets) -> f64 {
    let x = w.transpose() * c;
    let n = t.n();
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = t.p_pair.get(i, j).unwrap_or(0.0);
            loss -= p * log_sigmoid(x[(i, j)]) + t.negative_weight(i, j) * log_sigmoid(-x[(i, j)]);
        }
    }
    loss
}

/// Gradient of [`sgns_loss`] with respect to `W` and `C`.
pub fn sgns_gradient(w: &DMatrix<f64>, c: &DMatrix<f64>, t: &SgnsTargets) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = w.transpose() * c;
    let n = t.n();
    let g = DMatrix::from_fn(n, n, |i, j| {
        let p = t.p_pair.get(i, j).unwrap_or(0.0);
        (p + t.negative_weight(i, j)) * sigmoid(x[(i, j)]) - p
    });
    (c * g.transpose(), w * g)
}

/// `½ Σ_ij (w_iᵀc_j − P_ij)²`.
pub fn lsq_loss(w: &DMatrix<f64>, c: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    0.5 * (w.transpose() * c - p).norm_squared()
}

/// Gradient of [`lsq_loss`] with respect to `W` and `C`.
pub fn lsq_gradient(w: &DMatrix<f64>, c: &DMatrix<f64>, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = w.transpose() * c - p;
    (c * r.transpose(), w * r)
}

/// Gradient of `½ Σ_ij (e_iᵀe_j − P_ij)²` with respect to the tied matrix.
pub fn lsq_tied_gradient(e: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let r = e.transpose() * e - p;
    e * (&r + r.transpose())
}

/// SGD settings shared by the word-embedding trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

fn init_matrix(d: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = 0.5 / d as f64;
    DMatrix::from_fn(d, n, |_, _| rng.random_range(-b..=b))
}

fn check_config(cfg: &TrainConfig, n: usize) -> Result<()> {
    if cfg.dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("vocabulary is empty"));
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(())
}

/// Visit every cell once: rows in shuffled order, columns of each row in
/// shuffled order.
fn sweep_order(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    let cols: Vec<usize> = (0..n).collect();
    (rows, cols)
}

fn diverged(epoch: usize, lr: f64, loss: f64) -> Error {
    Error::Numerical(format!(
        "loss became {loss} in epoch {epoch}; learning rate {lr} is too high"
    ))
}

/// Update `a -= lr·g·b` and `b -= lr·g·a` using the old `a`.
#[inline]
fn pair_step(a: &mut [f64], b: &mut [f64], step: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let ox = *x;
        *x -= step * *y;
        *y -= step * ox;
    }
}

/// Train on the expected SGNS loss by per-cell SGD.
///
/// Each cell's gradient is multiplied by `n² / Σ_ij (p_ij + k p_i p_nj)` so
/// the mean cell weight is one.
pub fn train_sgns(targets: &SgnsTargets, words: Vec<String>, cfg: &TrainConfig) -> Result<EmbeddingSet> {
    let n = targets.n();
    check_config(cfg, n)?;
    if words.len() != n {
        return Err(Error::Mismatch(format!("{} words for {n} targets", words.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = init_matrix(cfg.dim, n, &mut rng);
    let mut c = init_matrix(cfg.dim, n, &mut rng);
    let scale = targets.cell_scale();
    let d = cfg.dim;
    let mut row_p = vec![0.0; n];
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (rows, mut cols) = sweep_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for &i in &rows {
            let (idx, vals) = targets.p_pair.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                row_p[j as usize] = v;
            }
            cols.shuffle(&mut rng);
            let wi = &mut w.as_mut_slice()[i * d..(i + 1) * d];
            for &j in &cols {
                let cj = &mut c.as_mut_slice()[j * d..(j + 1) * d];
                let x: f64 = wi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                let p = row_p[j];
                let neg = targets.negative_weight(i, j);
                epoch_loss -= p * log_sigmoid(x) + neg * log_sigmoid(-x);
                let g = scale * ((p + neg) * sigmoid(x) - p);
                pair_step(wi, cj, cfg.lr * g);
            }
            for &j in idx {
                row_p[j as usize] = 0.0;
            }
        }
        if !epoch_loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(diverged(epoch, cfg.lr, epoch_loss));
        }
        losses.push(epoch_loss);
    }
    let mut set = EmbeddingSet::from_parts(words, w, ContextMatrix::Separate(c), LossKind::Sgns)?;
    set.shift_k = targets.k;
    set.seed = cfg.seed;
    set.epochs = cfg.epochs;
    set.epoch_losses = losses;
    Ok(set)
}

/// Fill `buf` with row `i` of `pmi` under its missing policy.
fn pmi_row(pmi: &PmiMatrix, i: usize, fill: f64, buf: &mut [f64]) {
    buf.iter_mut().for_each(|v| *v = fill);
    let (idx, vals) = pmi.defined_entries().row(i);
    for (&j, &v) in idx.iter().zip(vals) {
        buf[j as usize] = v;
    }
}

/// Train on `½ Σ (w_iᵀc_j − P_ij)²` by per-cell SGD. With `tied`, a single
/// matrix plays both roles.
pub fn train_lsq(pmi: &PmiMatrix, words: Vec<String>, cfg: &TrainConfig, tied: bool) -> Result<EmbeddingSet> {
    let n = pmi.n();
    check_config(cfg, n)?;
    if words.len() != n {
        return Err(Error::Mismatch(format!("{} words for a {n}x{n} PMI matrix", words.len())));
    }
    if !pmi.is_complete() {
        return Err(Error::invalid("PMI matrix has undefined cells; apply a sentinel policy first"));
    }
    let fill = match pmi.policy() {
        crate::pmi::MissingPolicy::Sentinel(s) => s,
        crate::pmi::MissingPolicy::Undefined => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let mut w = init_matrix(d, n, &mut rng);
    let mut c = if tied { DMatrix::zeros(0, 0) } else { init_matrix(d, n, &mut rng) };
    let mut row = vec![0.0; n];
    let mut tmp = vec![0.0; d];
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (rows, mut cols) = sweep_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for &i in &rows {
            pmi_row(pmi, i, fill, &mut row);
            cols.shuffle(&mut rng);
            for &j in &cols {
                if tied {
                    let data = w.as_mut_slice();
                    if i == j {
                        let ei = &mut data[i * d..(i + 1) * d];
                        let x: f64 = ei.iter().map(|a| a * a).sum();
                        let r = x - row[j];
                        epoch_loss += 0.5 * r * r;
                        // d/de_i of ½(e_iᵀe_i − P)² is 2 r e_i.
                        ei.iter_mut().for_each(|v| *v -= cfg.lr * 2.0 * r * *v);
                    } else {
                        tmp.copy_from_slice(&data[i * d..(i + 1) * d]);
                        let ej = &data[j * d..(j + 1) * d];
                        let x: f64 = tmp.iter().zip(ej).map(|(a, b)| a * b).sum();
                        let r = x - row[j];
                        epoch_loss += 0.5 * r * r;
                        let step = cfg.lr * r;
                        for t in 0..d {
                            let ejt = data[j * d + t];
                            data[i * d + t] -= step * ejt;
                            data[j * d + t] -= step * tmp[t];
                        }
                    }
                } else {
                    let wi = &mut w.as_mut_slice()[i * d..(i + 1) * d];
                    let cj = &mut c.as_mut_slice()[j * d..(j + 1) * d];
                    let x: f64 = wi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                    let r = x - row[j];
                    epoch_loss += 0.5 * r * r;
                    pair_step(wi, cj, cfg.lr * r);
                }
            }
        }
        if !epoch_loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(diverged(epoch, cfg.lr, epoch_loss));
        }
        losses.push(epoch_loss);
    }
    let (context, loss) = if tied {
        (ContextMatrix::Tied, LossKind::LsqTied)
    } else {
        (ContextMatrix::Separate(c), LossKind::Lsq)
    };
    let mut set = EmbeddingSet::from_parts(words, w, context, loss)?;
    set.shift_k = pmi.shift().exp();
    set.seed = cfg.seed;
    set.epochs = cfg.epochs;
    set.epoch_losses = losses;
    Ok(set)
}

/// Order eigenpairs by `|λ|` descending, then positive before negative, then
/// original index.
fn selection_order(values: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        y.abs()
            .total_cmp(&x.abs())
            .then_with(|| (y >= 0.0).cmp(&(x >= 0.0)))
            .then_with(|| a.cmp(&b))
    });
    idx
}

/// Factorize a symmetric PMI matrix through its eigendecomposition:
/// keep the `d` eigenpairs of largest `|λ|`, `W = |S|^{1/2} Uᵀ`, `C = I′W`.
pub fn analytic_factorize(pmi: &PmiMatrix, d: usize, words: Vec<String>) -> Result<EmbeddingSet> {
    let p = pmi.to_dense()?;
    analytic_factorize_dense(&p, d, words)
}

/// [`analytic_factorize`] on a dense matrix.
pub fn analytic_factorize_dense(p: &DMatrix<f64>, d: usize, words: Vec<String>) -> Result<EmbeddingSet> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::invalid("matrix must be square"));
    }
    if d == 0 || d > n {
        return Err(Error::invalid(format!("dimension must be in 1..={n}, got {d}")));
    }
    let asym = (p - p.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!("matrix is not symmetric (max |P - Pᵀ| = {asym:e})")));
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let order = selection_order(&eig.eigenvalues);
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // Fix the sign: largest-magnitude component positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
    }
    let mut w = DMatrix::zeros(d, n);
    let mut c = DMatrix::zeros(d, n);
    for k in 0..d {
        let lam = values[k];
        let row = vectors.column(k).transpose() * lam.abs().sqrt();
        let sign = if lam < 0.0 { -1.0 } else { 1.0 };
        w.set_row(k, &row);
        c.set_row(k, &(row * sign));
    }
    let mut set = EmbeddingSet::from_parts(words, w, ContextMatrix::Separate(c), LossKind::Analytic)?;
    set.analytic = Some(AnalyticParts {
        eigenvalues: values,
        eigenvectors: vectors,
        dim: d,
    });
    Ok(set)
}

/// Both sides of the three interaction identities at one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReport {
    pub wc: f64,
    pub ww: f64,
    pub aa: f64,
    pub p: f64,
    /// Contribution of discarded eigenpairs.
    pub e: f64,
    /// Contribution of selected negative eigenpairs.
    pub f: f64,
    /// `|w_iᵀc_j − (P − E)|`.
    pub residual_wc: f64,
    /// `|w_iᵀw_j − (P − E − 2F)|`.
    pub residual_ww: f64,
    /// `|a_iᵀa_j − (P − E − F)|`.
    pub residual_aa: f64,
}

/// Evaluate `wᵀc = P − E`, `wᵀw = P − E − 2F`, `aᵀa = P − E − F` at
/// `(i, j)` for a set built by [`analytic_factorize`] on `p`.
pub fn interaction_identities(set: &EmbeddingSet, p: &DMatrix<f64>, i: usize, j: usize) -> Result<InteractionReport> {
    let parts = set
        .analytic
        .as_ref()
        .ok_or_else(|| Error::invalid("interaction identities need an analytic factorization"))?;
    let n = set.n();
    if i >= n || j >= n {
        return Err(Error::OutOfRange { id: i.max(j), size: n });
    }
    let u = &parts.eigenvectors;
    let lam = &parts.eigenvalues;
    let e: f64 = (parts.dim..n).map(|k| lam[k] * u[(i, k)] * u[(j, k)]).sum();
    let f: f64 = (0..parts.dim)
        .filter(|&k| lam[k] < 0.0)
        .map(|k| lam[k] * u[(i, k)] * u[(j, k)])
        .sum();
    let w = set.w();
    let c = set.require_c()?;
    let a = mean_embeddings(set)?;
    let wc = w.column(i).dot(&c.column(j));
    let ww = w.column(i).dot(&w.column(j));
    let aa = a.column(i).dot(&a.column(j));
    let pij = p[(i, j)];
    Ok(InteractionReport {
        wc,
        ww,
        aa,
        p: pij,
        e,
        f,
        residual_wc: (wc - (pij - e)).abs(),
        residual_ww: (ww - (pij - e - 2.0 * f)).abs(),
        residual_aa: (aa - (pij - e - f)).abs(),
    })
}

/// Write `n d` then `token v1 .. vd` per column, 9 significant digits.
pub fn write_word2vec_text(path: impl AsRef<Path>, words: &[String], m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let w = |e| Error::io(path, e);
    writeln!(out, "{} {}", m.ncols(), m.nrows()).map_err(w)?;
    for (i, word) in words.iter().enumerate() {
        write!(out, "{word}").map_err(w)?;
        for v in m.column(i).iter() {
            write!(out, " {v:.8e}").map_err(w)?;
        }
        writeln!(out).map_err(w)?;
    }
    out.flush().map_err(w)
}

/// Read a word2vec text file into words and a d × n matrix.
pub fn read_word2vec_text(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "missing `n d` header")),
    };
    let mut hd = header.split_whitespace();
    let (n, d): (usize, usize) = match (
        hd.next().and_then(|s| s.parse().ok()),
        hd.next().and_then(|s| s.parse().ok()),
        hd.next(),
    ) {
        (Some(n), Some(d), None) => (n, d),
        _ => return Err(Error::parse(path, 1, format!("header {header:?} is not `n d`"))),
    };
    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        if words.len() == n {
            return Err(Error::parse(path, lineno, format!("more than the {n} rows announced in the header")));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap().to_owned();
        let before = data.len();
        for tok in parts {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad value {tok:?}")))?;
            data.push(v);
        }
        let got = data.len() - before;
        if got != d {
            return Err(Error::parse(path, lineno, format!("expected {d} values, found {got}")));
        }
        words.push(word);
    }
    if words.len() != n {
        return Err(Error::parse(path, n + 1, format!("header announces {n} rows, found {}", words.len())));
    }
    Ok((words, DMatrix::from_vec(d, n, data)))
}

/// Metadata stored next to saved matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SavedMeta {
    loss: LossKind,
    dim: usize,
    n: usize,
    shift_k: f64,
    seed: u64,
    epochs: usize,
    tied: bool,
    epoch_losses: Vec<f64>,
}

/// Save into directory `dir`: `w.txt`, `c.txt` (omitted when tied) and
/// `meta.json`.
pub fn save_embeddings(set: &EmbeddingSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_word2vec_text(dir.join("w.txt"), &set.words, &set.w)?;
    if let ContextMatrix::Separate(c) = &set.context {
        write_word2vec_text(dir.join("c.txt"), &set.words, c)?;
    }
    let meta = SavedMeta {
        loss: set.loss,
        dim: set.dim(),
        n: set.n(),
        shift_k: set.shift_k,
        seed: set.seed,
        epochs: set.epochs,
        tied: set.is_tied(),
        epoch_losses: set.epoch_losses.clone(),
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Load a directory written by [`save_embeddings`], or a single word2vec
/// text file (loaded as `W` with no context matrix).
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    if path.is_file() {
        let (words, w) = read_word2vec_text(path)?;
        return EmbeddingSet::from_parts(words, w, ContextMatrix::Absent, LossKind::External);
    }
    let meta_path = path.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SavedMeta = serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;
    let (words, w) = read_word2vec_text(path.join("w.txt"))?;
    let context = if meta.tied {
        ContextMatrix::Tied
    } else if path.join("c.txt").exists() {
        let (cw, c) = read_word2vec_text(path.join("c.txt"))?;
        if cw != words {
            return Err(Error::Mismatch("w.txt and c.txt list different words".into()));
        }
        ContextMatrix::Separate(c)
    } else {
        ContextMatrix::Absent
    };
    if w.nrows() != meta.dim || w.ncols() != meta.n {
        return Err(Error::Mismatch("meta.json disagrees with w.txt".into()));
    }
    let mut set = EmbeddingSet::from_parts(words, w, context, meta.loss)?;
    set.shift_k = meta.shift_k;
    set.seed = meta.seed;
    set.epochs = meta.epochs;
    set.epoch_losses = meta.epoch_losses;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmi::MissingPolicy;
    use nalgebra::SVD;
    use proptest::prelude::*;
    use rand::Rng;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn random_matrix(r: usize, c: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
    }

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = random_matrix(n, n, 1.0, rng);
        (&a + a.transpose()) * 0.5
    }

    /// Synthetic SGNS task whose optimum is exactly `WᵀC` of rank `d`.
    fn rank_d_targets(n: usize, d: usize, k: f64, seed: u64) -> (SgnsTargets, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_matrix(d, n, 0.8, &mut rng);
        let c = random_matrix(d, n, 0.8, &mut rng);
        let s = w.transpose() * c;
        let pt: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let tot: f64 = pt.iter().sum();
        let pt: Vec<f64> = pt.iter().map(|x| x / tot).collect();
        let t = SgnsTargets::from_optimum(&s, pt.clone(), pt, k).unwrap();
        (t, s)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    fn finite_diff<F: Fn(&DMatrix<f64>) -> f64>(f: F, x: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(x.nrows(), x.ncols());
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += h;
            xm[idx] -= h;
            g[idx] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn sgns_gradient_matches_finite_differences() {
        let (t, _) = rank_d_targets(5, 3, 5.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_matrix(3, 5, 1.0, &mut rng);
        let c = random_matrix(3, 5, 1.0, &mut rng);
        let (gw, gc) = sgns_gradient(&w, &c, &t);
        let fw = finite_diff(|x| sgns_loss(x, &c, &t), &w, 1e-5);
        let fc = finite_diff(|x| sgns_loss(&w, x, &t), &c, 1e-5);
        for (a, b) in gw.iter().zip(fw.iter()).chain(gc.iter().zip(fc.iter())) {
            assert!(rel_err(*a, *b) < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn lsq_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_matrix(4, 4, 2.0, &mut rng);
        let w = random_matrix(3, 4, 1.0, &mut rng);
        let c = random_matrix(3, 4, 1.0, &mut rng);
        let (gw, gc) = lsq_gradient(&w, &c, &p);
        let fw = finite_diff(|x| lsq_loss(x, &c, &p), &w, 1e-5);
        let fc = finite_diff(|x| lsq_loss(&w, x, &p), &c, 1e-5);
        for (a, b) in gw.iter().zip(fw.iter()).chain(gc.iter().zip(fc.iter())) {
            assert!(rel_err(*a, *b) < 1e-4);
        }
        let ge = lsq_tied_gradient(&w, &p);
        let fe = finite_diff(|x| lsq_loss(x, x, &p), &w, 1e-5);
        for (a, b) in ge.iter().zip(fe.iter()) {
            assert!(rel_err(*a, *b) < 1e-4);
        }
    }

    #[test]
    fn sgns_converges_on_rank_d_task() {
        let (t, s) = rank_d_targets(6, 6, 5.0, 4);
        let cfg = TrainConfig { dim: 6, lr: 0.05, epochs: 6000, seed: 1 };
        let set = train_sgns(&t, words(6), &cfg).unwrap();
        let x = set.w().transpose() * set.c().unwrap();
        let worst = (x - &s).amax();
        assert!(worst < 1e-2, "max residual {worst}");
    }

    #[test]
    fn sgns_loss_decreases_over_first_epochs() {
        let (t, _) = rank_d_targets(8, 8, 5.0, 5);
        let cfg = TrainConfig { dim: 8, lr: SGNS_LR, epochs: 10, seed: 2 };
        let set = train_sgns(&t, words(8), &cfg).unwrap();
        for pair in set.epoch_losses.windows(2) {
            assert!(pair[1] <= pair[0], "{:?}", set.epoch_losses);
        }
    }

    #[test]
    fn lsq_full_rank_psd_fits_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_matrix(5, 5, 1.0, &mut rng);
        let p = b.transpose() * &b;
        let pmi = PmiMatrix::from_dense(&p, 0.0).unwrap();
        let cfg = TrainConfig { dim: 5, lr: LSQ_LR, epochs: 20000, seed: 3 };
        for tied in [false, true] {
            let set = train_lsq(&pmi, words(5), &cfg, tied).unwrap();
            let c = set.c().unwrap();
            let loss = lsq_loss(set.w(), c, &p);
            assert!(loss < 1e-6, "tied={tied} loss={loss}");
            assert_eq!(set.is_tied(), tied);
        }
    }

    #[test]
    fn lsq_loss_decreases_over_first_epochs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_matrix(3, 8, 1.0, &mut rng);
        let p = s.transpose() * random_matrix(3, 8, 1.0, &mut rng);
        let pmi = PmiMatrix::from_dense(&p, 0.0).unwrap();
        let cfg = TrainConfig { dim: 8, lr: LSQ_LR, epochs: 10, seed: 4 };
        for tied in [false, true] {
            let set = train_lsq(&pmi, words(8), &cfg, tied).unwrap();
            for w in set.epoch_losses.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn sgns_and_shifted_lsq_agree() {
        let k = 5.0;
        let (t, _) = rank_d_targets(6, 6, k, 8);
        let sg = train_sgns(&t, words(6), &TrainConfig { dim: 6, lr: 0.05, epochs: 6000, seed: 5 }).unwrap();
        let pmi = PmiMatrix::from_dense(&t.optimum(), k.ln()).unwrap();
        let ls = train_lsq(&pmi, words(6), &TrainConfig { dim: 6, lr: LSQ_LR, epochs: 6000, seed: 5 }, false).unwrap();
        let a = sg.w().transpose() * sg.c().unwrap();
        let b = ls.w().transpose() * ls.c().unwrap();
        assert!((a - b).amax() < 5e-2);
    }

    #[test]
    fn divergence_is_numerical_error() {
        let p = DMatrix::from_element(4, 4, 50.0);
        let pmi = PmiMatrix::from_dense(&p, 0.0).unwrap();
        let cfg = TrainConfig { dim: 4, lr: 10.0, epochs: 50, seed: 1 };
        let err = train_lsq(&pmi, words(4), &cfg, false).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn undefined_cells_are_rejected() {
        let pair = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let model = ProbabilityModel::from_tables(words(2), &pair, vec![]).unwrap();
        let pmi = crate::pmi::pmi_matrix(&model, 1.0, MissingPolicy::Undefined).unwrap();
        let cfg = TrainConfig { dim: 2, lr: 0.01, epochs: 1, seed: 1 };
        assert!(train_lsq(&pmi, words(2), &cfg, false).is_err());
        let filled = pmi.with_policy(MissingPolicy::default());
        assert!(train_lsq(&filled, words(2), &cfg, false).is_ok());
    }

    #[test]
    fn init_is_within_bounds_and_seeded() {
        let pmi = PmiMatrix::from_dense(&DMatrix::zeros(5, 5), 0.0).unwrap();
        let cfg = TrainConfig { dim: 4, lr: 0.01, epochs: 0, seed: 9 };
        let a = train_lsq(&pmi, words(5), &cfg, false).unwrap();
        let b = train_lsq(&pmi, words(5), &cfg, false).unwrap();
        assert_eq!(a, b);
        assert!(a.w().amax() <= 0.5 / 4.0);
    }

    #[test]
    fn analytic_psd_gives_w_equal_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random_matrix(6, 6, 1.0, &mut rng);
        let p = b.transpose() * &b;
        let set = analytic_factorize_dense(&p, 4, words(6)).unwrap();
        assert_eq!(set.w(), set.c().unwrap());
        assert_eq!(&mean_embeddings(&set).unwrap(), set.w());
        let r = interaction_identities(&set, &p, 1, 2).unwrap();
        assert!(r.f.abs() < 1e-12);
        assert!((r.wc - r.ww).abs() < 1e-12 && (r.wc - r.aa).abs() < 1e-12);
    }

    #[test]
    fn analytic_rejects_asymmetric() {
        let mut p = DMatrix::identity(3, 3);
        p[(0, 1)] = 1e-6;
        assert!(analytic_factorize_dense(&p, 2, words(3)).is_err());
    }

    #[test]
    fn analytic_signs_and_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_symmetric(8, &mut rng);
        let set = analytic_factorize_dense(&p, 5, words(8)).unwrap();
        let parts = set.analytic_parts().unwrap();
        let c = set.c().unwrap();
        let mut negative = false;
        for k in 0..5 {
            let sign = if parts.eigenvalues[k] < 0.0 { -1.0 } else { 1.0 };
            negative |= sign < 0.0;
            assert_eq!(c.row(k), set.w().row(k) * sign);
        }
        assert!(negative, "random symmetric matrix should select a negative eigenvalue");
        let a = mean_embeddings(&set).unwrap();
        for k in 0..5 {
            if parts.eigenvalues[k] < 0.0 {
                assert!(a.row(k).amax() == 0.0);
            } else {
                assert_eq!(a.row(k), set.w().row(k));
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                let r = interaction_identities(&set, &p, i, j).unwrap();
                assert!(r.residual_wc < 1e-10 && r.residual_ww < 1e-10 && r.residual_aa < 1e-10);
                assert!((r.aa - r.wc + r.f).abs() < 1e-10);
                assert!((r.ww - r.wc + 2.0 * r.f).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn analytic_matches_svd_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_symmetric(20, &mut rng);
        let set = analytic_factorize_dense(&p, 6, words(20)).unwrap();
        let err = (set.w().transpose() * set.c().unwrap() - &p).norm();
        let svd = SVD::new(p.clone(), false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let optimal = sv[6..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((err - optimal).abs() < 1e-8);
    }

    #[test]
    fn degenerate_selection_prefers_positive() {
        let p = DMatrix::from_diagonal(&DVector::from_column_slice(&[-2.0, 1.0, 2.0]));
        let set = analytic_factorize_dense(&p, 1, words(3)).unwrap();
        let parts = set.analytic_parts().unwrap();
        assert_eq!(parts.eigenvalues[0], 2.0);
        assert_eq!(parts.eigenvalues[1], -2.0);
    }

    #[test]
    fn non_analytic_identities_are_refused() {
        let set = EmbeddingSet::from_parts(words(2), DMatrix::zeros(1, 2), ContextMatrix::Tied, LossKind::LsqTied).unwrap();
        assert!(interaction_identities(&set, &DMatrix::zeros(2, 2), 0, 0).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = random_matrix(3, 4, 1.0, &mut rng);
        let c = random_matrix(3, 4, 1.0, &mut rng);
        let mut set = EmbeddingSet::from_parts(words(4), w, ContextMatrix::Separate(c), LossKind::Lsq).unwrap();
        set.seed = 42;
        let dir = tempfile::tempdir().unwrap();
        save_embeddings(&set, dir.path()).unwrap();
        let back = load_embeddings(dir.path()).unwrap();
        assert_eq!(back.words, set.words);
        assert!((back.w() - set.w()).amax() < 1e-6);
        assert!((back.c().unwrap() - set.c().unwrap()).amax() < 1e-6);
        assert_eq!(back.seed, 42);
        assert_eq!(back.loss, LossKind::Lsq);

        let tied = EmbeddingSet::from_parts(words(4), set.w().clone(), ContextMatrix::Tied, LossKind::LsqTied).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        save_embeddings(&tied, dir2.path()).unwrap();
        assert!(load_embeddings(dir2.path()).unwrap().is_tied());
    }

    #[test]
    fn third_party_file_loads_without_context() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "2 3\nthe 0.1 0.2 0.3\ncat -1 0 1e-2\n").unwrap();
        let set = load_embeddings(&path).unwrap();
        assert_eq!(set.loss, LossKind::External);
        assert!(set.c().is_none());
        assert_eq!(set.w()[(2, 1)], 1e-2);
        assert!(mean_embeddings(&set).is_err());
    }

    #[test]
    fn header_mismatch_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "2 3\nthe 0.1 0.2 0.3\ncat -1 0\n").unwrap();
        match read_word2vec_text(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        fs::write(&path, "1 1\na 1\nb 2\n").unwrap();
        match read_word2vec_text(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sentinel_policy_fills_training_targets() {
        let sp = crate::sparse::SparseMatrix::from_triplets(2, 2, vec![(0, 1, 0.5), (1, 0, 0.5)]);
        let t = SgnsTargets::from_parts(sp, vec![0.5, 0.5], vec![0.5, 0.5], 1.0).unwrap();
        let opt = t.optimum();
        assert!(opt[(0, 0)].is_infinite());
        assert!((opt[(0, 1)] - 2f64.ln()).abs() < 1e-15);
        let pm = PmiMatrix::from_dense(&DMatrix::zeros(2, 2), 0.0).unwrap().with_policy(MissingPolicy::default());
        assert!(pm.is_complete());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn analytic_product_is_deterministic(seed in any::<u64>(), d in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_symmetric(7, &mut rng);
            let a = analytic_factorize_dense(&p, d, words(7)).unwrap();
            let b = analytic_factorize_dense(&p, d, words(7)).unwrap();
            prop_assert_eq!(a.w().transpose() * a.c().unwrap(), b.w().transpose() * b.c().unwrap());
        }

        #[test]
        fn mean_of_untied_is_elementwise(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_matrix(3, 5, 1.0, &mut rng);
            let c = random_matrix(3, 5, 1.0, &mut rng);
            let set = EmbeddingSet::from_parts(words(5), w.clone(), ContextMatrix::Separate(c.clone()), LossKind::Lsq).unwrap();
            let a = mean_embeddings(&set).unwrap();
            for idx in 0..15 {
                prop_assert_eq!(a[idx], (w[idx] + c[idx]) * 0.5);
            }
        }
    }
}
