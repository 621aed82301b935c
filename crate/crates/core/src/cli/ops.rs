//! Stage operations shared by the subcommands and the pipeline runner.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceStats;
use crate::corpus::{subsample_filter, tokenize, Dictionary, SubsampleReport, Weighting};
use crate::error::{Error, Result};
use crate::factorize::{analytic_factorize, train_lsq, train_sgns, EmbeddingSet, SgnsTargets, TrainConfig, LSQ_LR, SGNS_LR};
use crate::pmi::{estimate_probabilities, pmi_matrix, MissingPolicy, PmiMatrix};

/// Embedding trainer selected on the command line or in a pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    /// Skip-gram negative-sampling loss on co-occurrence counts.
    Sgns,
    /// Least squares on PMI with separate W and C.
    Lsq,
    /// Least squares on PMI with W = C.
    Tied,
    /// Truncated eigendecomposition of the PMI matrix.
    Analytic,
}

impl Trainer {
    /// Default learning rate.
    pub fn default_lr(self) -> f64 {
        match self {
            Trainer::Sgns => SGNS_LR,
            _ => LSQ_LR,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Dictionary of a text file after the frequency cut-off.
pub fn build_vocab(input: &Path, min_count: u64) -> Result<Dictionary> {
    let text = read_text(input)?;
    Dictionary::build(tokenize(&text), min_count)
}

/// Co-occurrence counts of a text file under a dictionary, with optional subsampling.
pub fn count_pairs(
    input: &Path,
    dict: &Dictionary,
    window: u32,
    weighting: Weighting,
    subsample: Option<f64>,
    seed: u64,
) -> Result<(CooccurrenceStats, Option<SubsampleReport>)> {
    let text = read_text(input)?;
    let stream = dict.encode(tokenize(&text));
    let (stream, report) = match subsample {
        Some(tau) => {
            let (s, r) = subsample_filter(&stream, dict, tau, seed)?;
            (s, Some(r))
        }
        None => (stream, None),
    };
    let stats = CooccurrenceStats::accumulate_tokens(&stream, dict.len(), window, weighting)?;
    Ok((stats, report))
}

/// Shifted PMI matrix from counts.
pub fn compute_pmi(stats: &CooccurrenceStats, dict: &Dictionary, shift: f64, policy: MissingPolicy, ppmi: bool) -> Result<PmiMatrix> {
    let model = estimate_probabilities(stats, &[], dict.tokens().to_vec())?;
    let m = pmi_matrix(&model, shift, policy)?;
    Ok(if ppmi { m.ppmi() } else { m })
}

/// Inputs available to [`train_embeddings`].
pub struct TrainInputs<'a> {
    /// Dictionary (word order).
    pub dict: &'a Dictionary,
    /// Co-occurrence counts (required for SGNS).
    pub counts: Option<&'a CooccurrenceStats>,
    /// PMI matrix (required for the least-squares and analytic trainers).
    pub pmi: Option<&'a PmiMatrix>,
}

/// Embedding hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingParams {
    /// Trainer.
    pub trainer: Trainer,
    /// Dimension.
    pub dim: usize,
    /// Negatives per positive (SGNS).
    pub neg: f64,
    /// Learning rate.
    pub lr: f64,
    /// Epochs.
    pub epochs: usize,
    /// Seed.
    pub seed: u64,
    /// Raise the SGNS noise distribution to 0.75.
    pub distort_noise: bool,
}

/// Trains word embeddings with the selected trainer.
pub fn train_embeddings(inputs: &TrainInputs, p: &EmbeddingParams) -> Result<EmbeddingSet> {
    let words = inputs.dict.tokens().to_vec();
    let cfg = TrainConfig { dim: p.dim, lr: p.lr, epochs: p.epochs, seed: p.seed };
    let need_pmi = || inputs.pmi.ok_or_else(|| Error::Usage(format!("{:?} training needs a PMI matrix", p.trainer)));
    match p.trainer {
        Trainer::Sgns => {
            let counts = inputs.counts.ok_or_else(|| Error::Usage("sgns training needs co-occurrence counts".into()))?;
            let targets = SgnsTargets::from_stats(counts, p.neg, p.distort_noise)?;
            train_sgns(&targets, words, &cfg)
        }
        Trainer::Lsq => train_lsq(need_pmi()?, words, &cfg, false),
        Trainer::Tied => train_lsq(need_pmi()?, words, &cfg, true),
        Trainer::Analytic => analytic_factorize(need_pmi()?, p.dim, words),
    }
}
