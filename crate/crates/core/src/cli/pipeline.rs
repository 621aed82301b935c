//! Config-driven pipelines with content-addressed, resumable stage outputs.
//!
//! Each stage writes into `work_dir/cache/<stage>-<key>/`, where the key hashes the stage
//! name, the keys or file hashes of its inputs, its config section and its seed. A stage
//! whose directory holds a completion marker is reused; a stage not listed in `stages`
//! must already be cached.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::manifest::{derive_seed, hash_path, hash_str, resolve_seed, write_atomic, ManifestWriter};
use super::ops::{build_vocab, compute_pmi, count_pairs, train_embeddings, EmbeddingParams, TrainInputs, Trainer};
use super::report::{Format, Table};
use crate::cooccur::CooccurrenceStats;
use crate::corpus::{Dictionary, Weighting};
use crate::error::{Error, Result};
use crate::eval::{default_eval_options, eval_analogies, eval_wordsim, AnalogyDataset, WordSimDataset};
use crate::factorize::{load_embeddings, save_embeddings, Interaction};
use crate::kgraph::{
    build_report, builtin_relation_types, classify_eval, load_relation_types, rank_eval, split_nell, train_kg,
    KgModel, KgTrainConfig, KnowledgeGraph, ModelKind, RankOptions, Split,
};
use crate::pmi::{MissingPolicy, PmiMatrix};
use crate::semantics::{AnalogyMethod, Metric};

/// Marker written last into a completed stage directory.
pub const DONE_MARKER: &str = "DONE";

/// Pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Vocabulary and co-occurrence counts.
    Corpus,
    /// PMI matrix.
    Pmi,
    /// Word-embedding training.
    Train,
    /// Word-embedding evaluation.
    Eval,
    /// Knowledge-graph training.
    KgTrain,
    /// Knowledge-graph evaluation and diagnostics.
    KgEval,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Corpus => "corpus",
            Stage::Pmi => "pmi",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::KgTrain => "kg_train",
            Stage::KgEval => "kg_eval",
        }
    }
}

/// Top-level pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; `SEMVEC_SEED` overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory (relative to the config file); defaults to `<config stem>.out`.
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
    /// Stages to execute, in order.
    #[serde(default)]
    pub stages: Vec<Stage>,
    /// Corpus stage settings.
    #[serde(default)]
    pub corpus: Option<CorpusSection>,
    /// PMI stage settings.
    #[serde(default)]
    pub pmi: PmiSection,
    /// Embedding models to train.
    #[serde(default)]
    pub train: Vec<TrainSection>,
    /// Evaluation settings.
    #[serde(default)]
    pub eval: Option<EvalSection>,
    /// Knowledge-graph settings.
    #[serde(default)]
    pub kg: Option<KgSection>,
}

/// Corpus stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    /// Whitespace-tokenised text file.
    pub input: PathBuf,
    /// Frequency cut-off.
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    /// Context window.
    #[serde(default = "default_window")]
    pub window: u32,
    /// Distance weighting.
    #[serde(default)]
    pub weighting: Weighting,
    /// Subsampling threshold; omitted means no subsampling.
    #[serde(default)]
    pub subsample: Option<f64>,
}

fn default_min_count() -> u64 {
    5
}
fn default_window() -> u32 {
    5
}

/// PMI stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmiSection {
    /// Shift `k` (PMI minus log k).
    #[serde(default = "one")]
    pub shift: f64,
    /// Missing-cell policy: `sentinel:<v>` or `undefined`.
    #[serde(default = "default_missing")]
    pub missing: String,
    /// Clip to positive PMI.
    #[serde(default)]
    pub ppmi: bool,
}

fn one() -> f64 {
    1.0
}
fn default_missing() -> String {
    MissingPolicy::default().to_string()
}

impl Default for PmiSection {
    fn default() -> Self {
        PmiSection { shift: 1.0, missing: default_missing(), ppmi: false }
    }
}

/// One embedding model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    /// Model name used in reports.
    pub name: String,
    /// Trainer.
    pub loss: Trainer,
    /// Dimension.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Negatives (SGNS).
    #[serde(default = "default_neg")]
    pub neg: f64,
    /// Learning rate; defaults per trainer.
    #[serde(default)]
    pub lr: Option<f64>,
    /// Epochs.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Repetitions with derived seeds; reports average them.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Raise the SGNS noise distribution to 0.75.
    #[serde(default = "yes")]
    pub distort_noise: bool,
}

fn default_dim() -> usize {
    500
}
fn default_neg() -> f64 {
    5.0
}
fn default_epochs() -> usize {
    100
}
fn default_repeats() -> usize {
    1
}
fn yes() -> bool {
    true
}

/// A named dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    /// Column name in the results table.
    pub name: String,
    /// File path.
    pub path: PathBuf,
}

/// Embedding evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Word-similarity datasets.
    #[serde(default)]
    pub wordsim: Vec<DatasetRef>,
    /// Analogy datasets.
    #[serde(default)]
    pub analogy: Vec<DatasetRef>,
    /// Embedding interaction: WW, WC or AA.
    #[serde(default = "default_interaction")]
    pub interaction: String,
    /// Analogy method.
    #[serde(default = "default_method")]
    pub method: String,
    /// Analogy metric.
    #[serde(default = "default_metric")]
    pub metric: String,
}

fn default_interaction() -> String {
    "WW".into()
}
fn default_method() -> String {
    "offset".into()
}
fn default_metric() -> String {
    default_eval_options().metric.to_string()
}

/// Knowledge-graph pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgSection {
    /// Dataset directory with train/valid/test files.
    pub data: PathBuf,
    /// Relation types: `wn18rr`, `nell995` or a TSV path.
    #[serde(default)]
    pub types: Option<String>,
    /// Re-split the pooled triples (NELL-995 protocol).
    #[serde(default)]
    pub split_nell: bool,
    /// Models to train.
    #[serde(default)]
    pub models: Vec<KgModelSection>,
    /// Also compute the filtered ranking.
    #[serde(default)]
    pub filtered: bool,
}

/// One knowledge-graph model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgModelSection {
    /// Model kind.
    pub kind: String,
    /// Training overrides (any [`KgTrainConfig`] field except `kind` and `seed`).
    #[serde(default)]
    pub config: Option<toml::Table>,
}

/// Loads and validates a config file; errors name the offending key path.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config { path: "<root>".into(), msg: e.to_string() })?;
    let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        msg: e.inner().message().to_string(),
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn cfg_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

fn validate(cfg: &PipelineConfig) -> Result<()> {
    cfg.pmi.missing.parse::<MissingPolicy>().map_err(|e| cfg_err("pmi.missing", e.to_string()))?;
    if !(cfg.pmi.shift > 0.0) {
        return Err(cfg_err("pmi.shift", "must be positive"));
    }
    let mut names = std::collections::HashSet::new();
    for (i, t) in cfg.train.iter().enumerate() {
        if !names.insert(&t.name) {
            return Err(cfg_err(format!("train[{i}].name"), format!("duplicate model name `{}`", t.name)));
        }
        if t.dim == 0 {
            return Err(cfg_err(format!("train[{i}].dim"), "must be positive"));
        }
        if t.repeats == 0 {
            return Err(cfg_err(format!("train[{i}].repeats"), "must be positive"));
        }
    }
    if let Some(e) = &cfg.eval {
        e.interaction.parse::<Interaction>().map_err(|x| cfg_err("eval.interaction", x.to_string()))?;
        e.method.parse::<AnalogyMethod>().map_err(|x| cfg_err("eval.method", x.to_string()))?;
        e.metric.parse::<Metric>().map_err(|x| cfg_err("eval.metric", x.to_string()))?;
    }
    if let Some(kg) = &cfg.kg {
        for (i, m) in kg.models.iter().enumerate() {
            m.kind.parse::<ModelKind>().map_err(|x| cfg_err(format!("kg.models[{i}].kind"), x.to_string()))?;
            kg_train_config(m, 0).map_err(|x| match x {
                Error::Config { path, msg } => cfg_err(format!("kg.models[{i}].config.{path}"), msg),
                other => other,
            })?;
        }
    }
    for s in &cfg.stages {
        let missing = match s {
            Stage::Corpus => cfg.corpus.is_none().then_some("corpus"),
            Stage::Train => cfg.train.is_empty().then_some("train"),
            Stage::Eval => cfg.eval.is_none().then_some("eval"),
            Stage::KgTrain | Stage::KgEval => cfg.kg.is_none().then_some("kg"),
            Stage::Pmi => None,
        };
        if let Some(sec) = missing {
            return Err(cfg_err("stages", format!("stage `{}` needs a `[{sec}]` section", s.name())));
        }
    }
    Ok(())
}

fn kg_train_config(m: &KgModelSection, seed: u64) -> Result<KgTrainConfig> {
    let kind: ModelKind = m.kind.parse()?;
    let mut table = m.config.clone().unwrap_or_default();
    for reserved in ["kind", "seed"] {
        if table.contains_key(reserved) {
            return Err(cfg_err(reserved, "set by the pipeline"));
        }
    }
    table.insert("kind".into(), toml::Value::try_from(kind).map_err(|e| cfg_err("kind", e.to_string()))?);
    table.insert("seed".into(), toml::Value::Integer((seed >> 1) as i64));
    let mut cfg: KgTrainConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| cfg_err(e.path().to_string(), e.inner().to_string()))?;
    cfg.seed = seed;
    Ok(cfg)
}

/// Outcome of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    /// Stage name (with model name where relevant).
    pub stage: String,
    /// Content key.
    pub key: String,
    /// Output directory.
    pub dir: PathBuf,
    /// Reused from a previous run.
    pub cached: bool,
}

/// Summary of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    /// Stage outcomes in execution order.
    pub stages: Vec<StageRun>,
    /// Result files.
    pub results: Vec<PathBuf>,
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    base: PathBuf,
    work: PathBuf,
    seed: u64,
    summary: PipelineSummary,
    keys: BTreeMap<String, (String, PathBuf)>,
    inputs: Vec<PathBuf>,
}

impl Runner<'_> {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn enabled(&self, s: Stage) -> bool {
        self.cfg.stages.contains(&s)
    }

    /// Runs `f` into the stage directory unless a completed one exists.
    fn stage(
        &mut self,
        stage: Stage,
        label: &str,
        key_material: Value,
        f: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<(String, PathBuf)> {
        let key = hash_str(&serde_json::to_string(&json!({"stage": stage.name(), "label": label, "in": key_material})).expect("json"));
        let name = if label.is_empty() { stage.name().to_string() } else { format!("{}-{label}", stage.name()) };
        let dir = self.work.join("cache").join(format!("{name}-{}", &key[..16]));
        let cached = dir.join(DONE_MARKER).is_file();
        if !cached {
            if !self.enabled(stage) {
                return Err(Error::Usage(format!(
                    "intermediate `{name}` (key {}) is missing; run the `{}` stage first",
                    &key[..16],
                    stage.name()
                )));
            }
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            log::info!("stage {name}: computing into {}", dir.display());
            f(&dir)?;
            std::fs::write(dir.join(DONE_MARKER), &key).map_err(|e| Error::io(&dir, e))?;
        } else {
            log::info!("stage {name}: cached at {}", dir.display());
        }
        self.summary.stages.push(StageRun { stage: name.clone(), key: key.clone(), dir: dir.clone(), cached });
        self.keys.insert(name, (key.clone(), dir.clone()));
        Ok((key, dir))
    }

    fn needs(&self, s: Stage) -> bool {
        let after = |x: Stage| self.cfg.stages.iter().any(|&y| y >= x && y <= Stage::Eval);
        match s {
            Stage::Corpus => after(Stage::Corpus),
            Stage::Pmi => after(Stage::Pmi),
            Stage::Train => after(Stage::Train),
            Stage::Eval => self.enabled(Stage::Eval),
            Stage::KgTrain => self.enabled(Stage::KgTrain) || self.enabled(Stage::KgEval),
            Stage::KgEval => self.enabled(Stage::KgEval),
        }
    }

    fn run_words(&mut self) -> Result<()> {
        if !self.needs(Stage::Corpus) {
            return Ok(());
        }
        let c = self.cfg.corpus.clone().ok_or_else(|| cfg_err("corpus", "section required by the selected stages"))?;
        let input = self.resolve(&c.input);
        let input_hash = hash_path(&input)?;
        self.inputs.push(input.clone());
        let sub_seed = derive_seed(self.seed, "corpus.subsample");
        let (ckey, cdir) = self.stage(Stage::Corpus, "", json!({"input": input_hash, "cfg": c, "seed": sub_seed}), |dir| {
            let dict = build_vocab(&input, c.min_count)?;
            let (stats, rep) = count_pairs(&input, &dict, c.window, c.weighting, c.subsample, sub_seed)?;
            dict.save_tsv(dir.join("vocab.tsv"))?;
            stats.save_tsv(dir.join("counts.tsv"))?;
            let info = json!({"vocab": dict.len(), "tokens": dict.total_tokens(), "nnz": stats.nnz(), "subsample": rep});
            write_atomic(&dir.join("stats.json"), serde_json::to_string_pretty(&info).expect("json").as_bytes())
        })?;
        let needs_pmi = self.cfg.train.iter().any(|t| t.loss != Trainer::Sgns) || self.enabled(Stage::Pmi);
        let mut pmi_key = None;
        if self.needs(Stage::Pmi) && needs_pmi {
            let p = self.cfg.pmi.clone();
            let cdir2 = cdir.clone();
            let (k, d) = self.stage(Stage::Pmi, "", json!({"corpus": ckey, "cfg": p}), move |dir| {
                let dict = Dictionary::load_tsv(cdir2.join("vocab.tsv"))?;
                let stats = CooccurrenceStats::load_tsv(cdir2.join("counts.tsv"))?;
                let policy: MissingPolicy = p.missing.parse()?;
                compute_pmi(&stats, &dict, p.shift, policy, p.ppmi)?.save_tsv(dir.join("pmi.tsv"))
            })?;
            pmi_key = Some((k, d));
        }
        if !self.needs(Stage::Train) {
            return Ok(());
        }
        let mut models: Vec<(String, Vec<PathBuf>)> = Vec::new();
        for t in self.cfg.train.clone() {
            let mut dirs = Vec::new();
            for rep in 0..t.repeats {
                let seed = derive_seed(self.seed, &format!("train.{}.{rep}", t.name));
                let upstream = match t.loss {
                    Trainer::Sgns => ckey.clone(),
                    _ => pmi_key.as_ref().map(|x| x.0.clone()).ok_or_else(|| Error::Usage("PMI stage output missing".into()))?,
                };
                let label = format!("{}-{rep}", t.name);
                let (cd, pd) = (cdir.clone(), pmi_key.as_ref().map(|x| x.1.clone()));
                let params = EmbeddingParams {
                    trainer: t.loss,
                    dim: t.dim,
                    neg: t.neg,
                    lr: t.lr.unwrap_or(t.loss.default_lr()),
                    epochs: t.epochs,
                    seed,
                    distort_noise: t.distort_noise,
                };
                let (_, d) = self.stage(Stage::Train, &label, json!({"up": upstream, "cfg": t, "params": params}), move |dir| {
                    let dict = Dictionary::load_tsv(cd.join("vocab.tsv"))?;
                    let counts = match params.trainer {
                        Trainer::Sgns => Some(CooccurrenceStats::load_tsv(cd.join("counts.tsv"))?),
                        _ => None,
                    };
                    let pmi = match &pd {
                        Some(p) if params.trainer != Trainer::Sgns => Some(PmiMatrix::load_tsv(p.join("pmi.tsv"))?),
                        _ => None,
                    };
                    let set = train_embeddings(&TrainInputs { dict: &dict, counts: counts.as_ref(), pmi: pmi.as_ref() }, &params)?;
                    save_embeddings(&set, dir)
                })?;
                dirs.push(d);
            }
            models.push((t.name.clone(), dirs));
        }
        if self.enabled(Stage::Eval) {
            self.run_eval(&models)?;
        }
        Ok(())
    }

    fn run_eval(&mut self, models: &[(String, Vec<PathBuf>)]) -> Result<()> {
        let e = self.cfg.eval.clone().ok_or_else(|| cfg_err("eval", "section required by the eval stage"))?;
        let mut data_hashes = Vec::new();
        for d in e.wordsim.iter().chain(&e.analogy) {
            let p = self.resolve(&d.path);
            data_hashes.push(hash_path(&p)?);
            self.inputs.push(p);
        }
        let model_keys: Vec<String> = self
            .summary
            .stages
            .iter()
            .filter(|s| s.stage.starts_with("train-"))
            .map(|s| s.key.clone())
            .collect();
        let resolved: Vec<(DatasetRef, PathBuf)> = e.wordsim.iter().map(|d| (d.clone(), self.resolve(&d.path))).collect();
        let resolved_an: Vec<(DatasetRef, PathBuf)> = e.analogy.iter().map(|d| (d.clone(), self.resolve(&d.path))).collect();
        let models = models.to_vec();
        let (_, dir) = self.stage(Stage::Eval, "", json!({"models": model_keys, "data": data_hashes, "cfg": e}), move |dir| {
            let interaction: Interaction = e.interaction.parse()?;
            let mut opts = default_eval_options();
            opts.method = e.method.parse()?;
            opts.metric = e.metric.parse()?;
            opts.interaction = interaction;
            let wordsim: Vec<(String, WordSimDataset)> =
                resolved.iter().map(|(d, p)| Ok((d.name.clone(), WordSimDataset::load(p)?))).collect::<Result<_>>()?;
            let analogy: Vec<(String, AnalogyDataset)> =
                resolved_an.iter().map(|(d, p)| Ok((d.name.clone(), AnalogyDataset::load(p)?))).collect::<Result<_>>()?;
            let mut detail = Vec::new();
            let mut summary = Vec::new();
            for (name, dirs) in &models {
                let mut row = serde_json::Map::new();
                row.insert("model".into(), json!(name));
                let mut sums: BTreeMap<String, f64> = BTreeMap::new();
                for (rep, d) in dirs.iter().enumerate() {
                    let set = load_embeddings(d)?;
                    for (dn, ds) in &wordsim {
                        let r = eval_wordsim(&set, ds, interaction)?;
                        *sums.entry(dn.clone()).or_default() += r.spearman;
                        detail.push(json!({"model": name, "repeat": rep, "dataset": dn, "task": "wordsim",
                            "score": r.spearman, "scored": r.scored, "oov": r.oov}));
                    }
                    for (dn, ds) in &analogy {
                        let r = eval_analogies(&set, ds, &opts)?;
                        *sums.entry(dn.clone()).or_default() += r.accuracy;
                        detail.push(json!({"model": name, "repeat": rep, "dataset": dn, "task": "analogy",
                            "score": r.accuracy, "scored": r.scored, "oov": r.oov}));
                    }
                }
                for (dn, _) in wordsim.iter().map(|(n, _)| (n, ())).chain(analogy.iter().map(|(n, _)| (n, ()))) {
                    row.insert(dn.clone(), json!(sums[dn] / dirs.len() as f64));
                }
                summary.push(serde_json::Value::Object(row));
            }
            let table = Table::from_json(&json!({ "rows": summary }), "eval")?;
            table.write(&dir.join("results.csv"), Format::Csv)?;
            table.write(&dir.join("results.json"), Format::Json)?;
            let det = Table::from_json(&json!({ "rows": detail }), "eval")?;
            det.write(&dir.join("detail.csv"), Format::Csv)
        })?;
        self.publish(&dir, &["results.csv", "results.json", "detail.csv"], "eval")
    }

    fn publish(&mut self, dir: &Path, files: &[&str], prefix: &str) -> Result<()> {
        let out = self.work.join("results");
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        for f in files {
            let src = dir.join(f);
            let dst = out.join(format!("{prefix}_{f}"));
            std::fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
            self.summary.results.push(dst);
        }
        Ok(())
    }

    fn run_kg(&mut self) -> Result<()> {
        if !self.needs(Stage::KgTrain) {
            return Ok(());
        }
        let kg_cfg = self.cfg.kg.clone().ok_or_else(|| cfg_err("kg", "section required by the selected stages"))?;
        let data = self.resolve(&kg_cfg.data);
        let data_hash = hash_path(&data)?;
        self.inputs.push(data.clone());
        let (mut kg, rep) = KnowledgeGraph::load_dir(&data)?;
        if rep.duplicates.iter().sum::<usize>() > 0 {
            log::warn!("dropped duplicate triples per split (train, valid, test): {:?}", rep.duplicates);
        }
        if rep.unseen_entities > 0 {
            log::warn!("{} held-out entities never occur in train ({} triples)", rep.unseen_entities, rep.unseen_triples);
        }
        if kg_cfg.split_nell {
            kg = split_nell(&kg, derive_seed(self.seed, "kg.split_nell"))?;
        }
        if let Some(t) = &kg_cfg.types {
            let table = match builtin_relation_types(t) {
                Ok(tb) => tb,
                Err(_) => load_relation_types(&self.resolve(Path::new(t)))?,
            };
            kg.assign_types(&table);
        }
        let graph_key = hash_str(&format!("{data_hash}/{}", kg.split_hash()));
        let mut trained = Vec::new();
        for (i, m) in kg_cfg.models.iter().enumerate() {
            let seed = derive_seed(self.seed, &format!("kg.{i}.{}", m.kind));
            let tc = kg_train_config(m, seed)?;
            let label = format!("{}-{i}", tc.kind);
            let kg_ref = &kg;
            let (_, dir) = self.stage(Stage::KgTrain, &label, json!({"graph": graph_key, "cfg": tc}), |dir| {
                let (model, report) = train_kg(kg_ref, &tc)?;
                model.save(dir)?;
                write_atomic(&dir.join("train_report.json"), serde_json::to_string_pretty(&report).expect("json").as_bytes())
            })?;
            trained.push((label, dir));
        }
        if !self.enabled(Stage::KgEval) {
            return Ok(());
        }
        for (label, mdir) in trained {
            let mkey = self.keys[&format!("kg_train-{label}")].0.clone();
            let kg_ref = &kg;
            let filtered = kg_cfg.filtered;
            let (_, dir) = self.stage(Stage::KgEval, &label, json!({"model": mkey, "types": kg_cfg.types, "filtered": filtered}), |dir| {
                let model = KgModel::load(&mdir)?;
                let rank = rank_eval(&model, kg_ref, Split::Test, &RankOptions::default())?;
                let cls = classify_eval(&model, kg_ref);
                let report = build_report(kg_ref, Some(&model), Some(&rank), Some(&cls))?;
                write_atomic(&dir.join("report.json"), pretty(&report).as_bytes())?;
                write_atomic(&dir.join("rank.json"), pretty(&rank).as_bytes())?;
                write_atomic(&dir.join("classify.json"), pretty(&cls).as_bytes())?;
                if filtered {
                    let f = rank_eval(&model, kg_ref, Split::Test, &RankOptions { filtered: true, ..Default::default() })?;
                    write_atomic(&dir.join("rank_filtered.json"), pretty(&f).as_bytes())?;
                }
                Ok(())
            })?;
            self.publish(&dir, &["report.json"], &format!("kg_{label}"))?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable")
}

/// Runs the configured stages; the manifest goes to `work_dir/manifest.json`.
pub fn run_pipeline(config_path: &Path, command: Vec<String>) -> Result<PipelineSummary> {
    let cfg = load_config(config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let work = match &cfg.work_dir {
        Some(w) if w.is_absolute() => w.clone(),
        Some(w) => base.join(w),
        None => base.join(format!(
            "{}.out",
            config_path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_else(|| "pipeline".into())
        )),
    };
    std::fs::create_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    let seed = resolve_seed(cfg.seed)?;
    let snapshot = serde_json::to_value(&cfg).map_err(|e| Error::invalid(e.to_string()))?;
    let mut manifest = ManifestWriter::start(&work.join("manifest.json"), command, snapshot, &[config_path.to_path_buf()])?;
    manifest.seed("root", seed);
    let mut runner = Runner {
        cfg: &cfg,
        base,
        work: work.clone(),
        seed,
        summary: PipelineSummary::default(),
        keys: BTreeMap::new(),
        inputs: Vec::new(),
    };
    let outcome = runner.run_words().and_then(|_| runner.run_kg());
    for s in &runner.summary.stages {
        manifest.output(&s.dir);
    }
    for r in &runner.summary.results {
        manifest.output(r);
    }
    let input_hashes: Vec<(String, String)> =
        runner.inputs.iter().filter_map(|p| hash_path(p).ok().map(|h| (p.display().to_string(), h))).collect();
    let summary = runner.summary.clone();
    let mut m = manifest;
    for (p, h) in input_hashes {
        m.add_input(p, h);
    }
    let status = match &outcome {
        Ok(()) => Ok(()),
        Err(e) => Err(Error::invalid(e.to_string())),
    };
    m.finish(&status)?;
    outcome.map(|_| summary)
}

