//! Command-line front end: subcommands, manifests, seeds and exit codes.
//!
//! Every subcommand that writes files also writes a run manifest, either at `--manifest`
//! or next to its primary output (`<out>.manifest.json`, or `<dir>/manifest.json` when the
//! output is a directory). The manifest is written before the work starts and finalized
//! after it ends.

pub mod manifest;
pub mod ops;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cooccur::CooccurrenceStats;
use crate::corpus::{Dictionary, Weighting};
use crate::error::{Error, Result};
use crate::eval::{eval_analogies, eval_wordsim, AnalogyDataset, WordSimDataset};
use crate::factorize::{load_embeddings, save_embeddings, Interaction};
use crate::kgraph::{
    build_report, builtin_relation_types, classify_eval, load_relation_types, rank_eval, split_nell, train_kg_with,
    validate_report_json, KgModel, KgTrainConfig, KnowledgeGraph, ModelKind, RankOptions, Split, TiePolicy,
};
use crate::pmi::{enumerate_exact_distribution, ExactSpec, MissingPolicy, PmiMatrix};
use crate::semantics::{analogy_decomposition, solve_analogy, verify_lemma1, verify_lemma2, AnalogyOptions};
use crate::surface::{check_properties, check_properties_over};
use manifest::{resolve_seed, ManifestWriter};
use ops::{build_vocab, compute_pmi, count_pairs, train_embeddings, EmbeddingParams, TrainInputs, Trainer};
use report::{merge, Format, Table};

/// Top-level arguments.
#[derive(Debug, Parser)]
#[command(name = "semvec", version, about = "Word-embedding and knowledge-graph workbench")]
pub struct Cli {
    /// Manifest path (defaults to a file next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Vocabulary and co-occurrence counting.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// PMI matrix from counts.
    Pmi(PmiArgs),
    /// Sampled checks of the PMI surface properties.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Embedding training.
    Train(TrainArgs),
    /// Exact decompositions and analogy queries.
    #[command(subcommand)]
    Semantics(SemanticsCmd),
    /// Intrinsic embedding evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Knowledge-graph training, evaluation and diagnostics.
    #[command(subcommand)]
    Kg(KgCmd),
    /// Merge tabular reports and convert between JSON and CSV.
    Report(ReportArgs),
    /// Run a pipeline config.
    Run(RunArgs),
}

/// `corpus` subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum CorpusCmd {
    /// Build a vocabulary TSV.
    Vocab {
        /// Input text.
        #[arg(long)]
        input: PathBuf,
        /// Frequency cut-off.
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        /// Output TSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Count windowed co-occurrences.
    Pairs {
        /// Input text.
        #[arg(long)]
        input: PathBuf,
        /// Vocabulary TSV.
        #[arg(long)]
        vocab: PathBuf,
        /// Context window.
        #[arg(long, default_value_t = 5)]
        window: u32,
        /// `uniform` or `inverse_distance`.
        #[arg(long, default_value = "uniform")]
        weighting: String,
        /// Subsampling threshold.
        #[arg(long)]
        subsample: Option<f64>,
        /// Seed (overrides `SEMVEC_SEED`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output counts TSV.
        #[arg(long)]
        out: PathBuf,
    },
}

/// `pmi` arguments.
#[derive(Debug, Args, Serialize)]
pub struct PmiArgs {
    /// Counts TSV.
    #[arg(long)]
    pub counts: PathBuf,
    /// Vocabulary TSV.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Shift `k`.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Missing-cell policy: `undefined` or `sentinel:<v>`.
    #[arg(long)]
    pub missing: Option<String>,
    /// Clip at zero.
    #[arg(long)]
    pub ppmi: bool,
    /// Output TSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// `surface` subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum SurfaceCmd {
    /// Sample points and report residuals of each property.
    Check {
        /// Exact distribution spec whose context marginal is the base (random base if omitted).
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Dimension (ignored with `--dist`).
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Sampled points.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Seed (overrides `SEMVEC_SEED`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSON (stdout if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// `train` arguments.
#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Trainer.
    #[arg(value_enum)]
    pub trainer: Trainer,
    /// Vocabulary TSV.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Counts TSV (SGNS).
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// PMI TSV (least-squares and analytic trainers).
    #[arg(long)]
    pub pmi: Option<PathBuf>,
    /// Dimension.
    #[arg(long, default_value_t = 500)]
    pub dim: usize,
    /// Negatives per positive (SGNS).
    #[arg(long, default_value_t = 5.0)]
    pub neg: f64,
    /// Learning rate (trainer default if omitted).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs.
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Use the undistorted unigram noise distribution.
    #[arg(long)]
    pub no_distort: bool,
    /// Seed (overrides `SEMVEC_SEED`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// `semantics` subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum SemanticsCmd {
    /// Write a random strictly positive exact distribution spec.
    Spec {
        /// Number of words.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Dirichlet concentration.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Make the pair table symmetric.
        #[arg(long)]
        symmetric: bool,
        /// Seed (overrides `SEMVEC_SEED`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a decomposition identity on an exact distribution.
    Decompose {
        /// Exact distribution spec (JSON).
        #[arg(long)]
        dist: PathBuf,
        /// Paraphrase target word (single-word identity).
        #[arg(long, conflicts_with_all = ["star", "analogy"])]
        target: Option<String>,
        /// Word set W, comma-separated.
        #[arg(long, value_delimiter = ',')]
        set: Vec<String>,
        /// Second word set W*, comma-separated (set identity).
        #[arg(long, value_delimiter = ',')]
        star: Vec<String>,
        /// Analogy words `a,a*,b,b*`.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        analogy: Vec<String>,
        /// Output JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve `a : a* :: b : ?`.
    Analogy {
        /// Embedding directory or file.
        #[arg(long)]
        model: PathBuf,
        /// Query words `a a* b`, whitespace-separated.
        #[arg(long)]
        query: String,
        /// Method.
        #[arg(long, default_value = "offset")]
        method: String,
        /// Metric.
        #[arg(long, default_value = "cosine")]
        metric: String,
        /// Interaction.
        #[arg(long, default_value = "WW")]
        interaction: String,
        /// Labelled pairs `x:y` for the mean-offset method.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Candidates to print.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

/// `eval` subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum EvalCmd {
    /// Spearman correlation on a word-similarity dataset.
    Wordsim {
        /// Embedding directory or file.
        #[arg(long)]
        model: PathBuf,
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Interaction.
        #[arg(long, default_value = "WW")]
        interaction: String,
        /// Output JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy on an analogy dataset.
    Analogy {
        /// Embedding directory or file.
        #[arg(long)]
        model: PathBuf,
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Method.
        #[arg(long, default_value = "offset")]
        method: String,
        /// Metric.
        #[arg(long, default_value = "euclidean")]
        metric: String,
        /// Interaction.
        #[arg(long, default_value = "WW")]
        interaction: String,
        /// Keep the query words as candidates.
        #[arg(long)]
        keep_query: bool,
        /// Output JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Dataset and relation-type arguments shared by the `kg` subcommands.
#[derive(Debug, Args, Serialize)]
pub struct KgData {
    /// Dataset directory with train/valid/test files.
    #[arg(long)]
    pub data: PathBuf,
    /// Relation types: `wn18rr`, `nell995` or a TSV file.
    #[arg(long)]
    pub types: Option<String>,
}

/// `kg` subcommands.
#[derive(Debug, Subcommand, Serialize)]
pub enum KgCmd {
    /// Train a model.
    Train {
        #[command(flatten)]
        data: KgData,
        /// Model kind.
        #[arg(long, default_value = "mure")]
        model: String,
        /// Entity dimension.
        #[arg(long, default_value_t = 200)]
        dim: usize,
        /// Relation dimension (TuckER).
        #[arg(long)]
        dr: Option<usize>,
        /// Epochs.
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        /// Learning rate.
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        /// Batch size.
        #[arg(long, default_value_t = 128)]
        batch: usize,
        /// Negatives per positive.
        #[arg(long, default_value_t = 50)]
        negs: usize,
        /// Update only rows touched by each batch.
        #[arg(long)]
        lazy_adam: bool,
        /// Validate every this many epochs (0 disables early stopping).
        #[arg(long, default_value_t = 5)]
        eval_every: usize,
        /// Validation triples used for early stopping.
        #[arg(long)]
        valid_limit: Option<usize>,
        /// Seed (overrides `SEMVEC_SEED`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model.
    Eval {
        /// `rank` or `classify`.
        #[arg(value_parser = ["rank", "classify"])]
        protocol: String,
        #[command(flatten)]
        data: KgData,
        /// Model directory.
        #[arg(long)]
        model: PathBuf,
        /// Split to rank: `valid` or `test`.
        #[arg(long, default_value = "test")]
        split: String,
        /// Filtered ranking.
        #[arg(long)]
        filtered: bool,
        /// Tie policy: `pessimistic` or `expected`.
        #[arg(long, default_value = "pessimistic")]
        ties: String,
        /// Output JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-relation report (graph statistics, plus model metrics when a model is given).
    Diagnose {
        #[command(flatten)]
        data: KgData,
        /// Model directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool and re-split triples into 10,000 validation and 10,000 test triples.
    SplitNell {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Seed (overrides `SEMVEC_SEED`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// `report` arguments.
#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Input JSON or CSV tables.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub format: Option<Format>,
    /// Output file; the format follows its extension unless `--format` is given.
    #[arg(long)]
    pub out: PathBuf,
}

/// `run` arguments.
#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Pipeline config (TOML).
    pub config: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let command: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn seed_or_env(explicit: Option<u64>) -> Result<u64> {
    match explicit {
        Some(s) => Ok(s),
        None => resolve_seed(0),
    }
}

/// Files read by a command, for hashing into the manifest.
fn inputs_of(cmd: &Command) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = match cmd {
        Command::Corpus(CorpusCmd::Vocab { input, .. }) => vec![input.clone()],
        Command::Corpus(CorpusCmd::Pairs { input, vocab, .. }) => vec![input.clone(), vocab.clone()],
        Command::Pmi(a) => vec![a.counts.clone(), a.vocab.clone()],
        Command::Surface(SurfaceCmd::Check { dist, .. }) => dist.iter().cloned().collect(),
        Command::Run(_) | Command::Semantics(SemanticsCmd::Spec { .. }) => vec![],
        Command::Train(a) => [Some(&a.vocab), a.counts.as_ref(), a.pmi.as_ref()].into_iter().flatten().cloned().collect(),
        Command::Semantics(SemanticsCmd::Decompose { dist, .. }) => vec![dist.clone()],
        Command::Semantics(SemanticsCmd::Analogy { model, .. }) => vec![model.clone()],
        Command::Eval(EvalCmd::Wordsim { model, data, .. } | EvalCmd::Analogy { model, data, .. }) => {
            vec![model.clone(), data.clone()]
        }
        Command::Kg(KgCmd::Train { data, .. }) => vec![data.data.clone()],
        Command::Kg(KgCmd::Eval { data, model, .. }) => vec![data.data.clone(), model.clone()],
        Command::Kg(KgCmd::Diagnose { data, model, .. }) => {
            std::iter::once(data.data.clone()).chain(model.clone()).collect()
        }
        Command::Kg(KgCmd::SplitNell { data, .. }) => vec![data.clone()],
        Command::Report(a) => a.inputs.clone(),
    };
    if let Command::Kg(KgCmd::Train { data, .. } | KgCmd::Eval { data, .. } | KgCmd::Diagnose { data, .. }) = cmd {
        if let Some(t) = &data.types {
            if builtin_relation_types(t).is_err() {
                v.push(PathBuf::from(t));
            }
        }
    }
    v
}

/// Primary output and whether it is a directory.
fn output_of(cmd: &Command) -> Option<(PathBuf, bool)> {
    match cmd {
        Command::Corpus(CorpusCmd::Vocab { out, .. } | CorpusCmd::Pairs { out, .. }) => Some((out.clone(), false)),
        Command::Pmi(a) => Some((a.out.clone(), false)),
        Command::Surface(SurfaceCmd::Check { report, .. }) => report.clone().map(|p| (p, false)),
        Command::Train(a) => Some((a.out.clone(), true)),
        Command::Semantics(SemanticsCmd::Spec { out, .. }) => Some((out.clone(), false)),
        Command::Semantics(SemanticsCmd::Decompose { out, .. }) => out.clone().map(|p| (p, false)),
        Command::Semantics(SemanticsCmd::Analogy { .. }) | Command::Run(_) => None,
        Command::Eval(EvalCmd::Wordsim { out, .. } | EvalCmd::Analogy { out, .. }) => out.clone().map(|p| (p, false)),
        Command::Kg(KgCmd::Train { out, .. } | KgCmd::SplitNell { out, .. }) => Some((out.clone(), true)),
        Command::Kg(KgCmd::Eval { out, .. }) => out.clone().map(|p| (p, false)),
        Command::Kg(KgCmd::Diagnose { out, .. }) => Some((out.clone(), false)),
        Command::Report(a) => Some((a.out.clone(), false)),
    }
}

fn default_manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli, command: Vec<String>) -> Result<()> {
    if let Command::Run(a) = &cli.command {
        let summary = pipeline::run_pipeline(&a.config, command)?;
        for s in &summary.stages {
            println!("{}\t{}\t{}", s.stage, if s.cached { "cached" } else { "computed" }, s.dir.display());
        }
        return Ok(());
    }
    let out = output_of(&cli.command);
    let manifest_path = cli.manifest.clone().or_else(|| out.as_ref().map(|(p, d)| default_manifest_path(p, *d)));
    let Some(manifest_path) = manifest_path else {
        return execute(&cli.command, None);
    };
    if let Some((p, true)) = &out {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    let config = serde_json::to_value(&cli.command).map_err(|e| Error::invalid(e.to_string()))?;
    let mut m = ManifestWriter::start(&manifest_path, command, config, &inputs_of(&cli.command))?;
    let outcome = execute(&cli.command, Some(&mut m));
    if outcome.is_ok() {
        if let Some((p, _)) = &out {
            m.output(p);
        }
    }
    let status = match &outcome {
        Ok(()) => Ok(()),
        Err(e) => Err(Error::invalid(e.to_string())),
    };
    m.finish(&status)?;
    outcome
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    match out {
        Some(p) => manifest::write_atomic(p, text.as_bytes()),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn record_seed(m: &mut Option<&mut ManifestWriter>, name: &str, v: u64) {
    if let Some(m) = m.as_deref_mut() {
        m.seed(name, v);
    }
}

fn load_kg(data: &KgData) -> Result<KnowledgeGraph> {
    let (mut kg, rep) = KnowledgeGraph::load_dir(&data.data)?;
    if rep.duplicates.iter().sum::<usize>() > 0 {
        log::warn!("dropped duplicate triples per split (train, valid, test): {:?}", rep.duplicates);
    }
    if rep.unseen_entities > 0 {
        log::warn!("{} held-out entities never occur in train ({} triples)", rep.unseen_entities, rep.unseen_triples);
    }
    if let Some(t) = &data.types {
        let table = match builtin_relation_types(t) {
            Ok(tb) => tb,
            Err(_) => load_relation_types(Path::new(t))?,
        };
        let typed = kg.assign_types(&table);
        log::info!("typed {typed} of {} relations", kg.n_relations());
    }
    Ok(kg)
}

fn read_spec(path: &Path) -> Result<ExactSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

fn write_split(kg: &KnowledgeGraph, split: Split, path: &Path) -> Result<()> {
    let mut s = String::new();
    for &(h, r, t) in kg.split(split) {
        s.push_str(&format!("{}\t{}\t{}\n", kg.entities[h], kg.relations[r], kg.entities[t]));
    }
    manifest::write_atomic(path, s.as_bytes())
}

fn execute(cmd: &Command, mut m: Option<&mut ManifestWriter>) -> Result<()> {
    match cmd {
        Command::Corpus(CorpusCmd::Vocab { input, min_count, out }) => {
            let dict = build_vocab(input, *min_count)?;
            log::info!("vocabulary: {} words", dict.len());
            dict.save_tsv(out)
        }
        Command::Corpus(CorpusCmd::Pairs { input, vocab, window, weighting, subsample, seed, out }) => {
            let weighting: Weighting = weighting.parse()?;
            let seed = seed_or_env(*seed)?;
            record_seed(&mut m, "subsample", seed);
            let dict = Dictionary::load_tsv(vocab)?;
            let (stats, rep) = count_pairs(input, &dict, *window, weighting, *subsample, seed)?;
            if let Some(r) = rep {
                log::info!("subsampling: {r:?}");
            }
            stats.save_tsv(out)
        }
        Command::Pmi(a) => {
            let dict = Dictionary::load_tsv(&a.vocab)?;
            let stats = CooccurrenceStats::load_tsv(&a.counts)?;
            let policy: MissingPolicy = match &a.missing {
                Some(s) => s.parse()?,
                None => MissingPolicy::default(),
            };
            compute_pmi(&stats, &dict, a.shift, policy, a.ppmi)?.save_tsv(&a.out)
        }
        Command::Surface(SurfaceCmd::Check { dist, n, samples, seed, report }) => {
            let seed = seed_or_env(*seed)?;
            record_seed(&mut m, "root", seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = match dist {
                Some(d) => {
                    let model = enumerate_exact_distribution(&read_spec(d)?)?;
                    check_properties_over(&DVector::from_column_slice(model.p_context()), *samples, &mut rng)?
                }
                None => check_properties(*n, *samples, &mut rng)?,
            };
            emit(&r, report.as_deref())
        }
        Command::Train(a) => {
            let seed = seed_or_env(a.seed)?;
            record_seed(&mut m, "root", seed);
            let dict = Dictionary::load_tsv(&a.vocab)?;
            let counts = a.counts.as_ref().map(CooccurrenceStats::load_tsv).transpose()?;
            let pmi = a.pmi.as_ref().map(PmiMatrix::load_tsv).transpose()?;
            let params = EmbeddingParams {
                trainer: a.trainer,
                dim: a.dim,
                neg: a.neg,
                lr: a.lr.unwrap_or(a.trainer.default_lr()),
                epochs: a.epochs,
                seed,
                distort_noise: !a.no_distort,
            };
            let set = train_embeddings(&TrainInputs { dict: &dict, counts: counts.as_ref(), pmi: pmi.as_ref() }, &params)?;
            save_embeddings(&set, &a.out)
        }
        Command::Semantics(SemanticsCmd::Spec { n, alpha, symmetric, seed, out }) => {
            let seed = seed_or_env(*seed)?;
            record_seed(&mut m, "root", seed);
            let spec = ExactSpec::random(*n, *alpha, *symmetric, &mut ChaCha8Rng::seed_from_u64(seed))?;
            emit(&spec, Some(out))
        }
        Command::Semantics(SemanticsCmd::Decompose { dist, target, set, star, analogy, out }) => {
            let model = enumerate_exact_distribution(&read_spec(dist)?)?;
            let ids = |ws: &[String]| ws.iter().map(|w| model.word_id(w)).collect::<Result<Vec<u32>>>();
            let report = if !analogy.is_empty() {
                let v = ids(analogy)?;
                analogy_decomposition(&model, v[0], v[1], v[2], v[3])?
            } else if let Some(t) = target {
                verify_lemma1(&model, model.word_id(t)?, &ids(set)?)?
            } else if !star.is_empty() {
                verify_lemma2(&model, &ids(set)?, &ids(star)?)?
            } else {
                return Err(Error::Usage("give --target, --star or --analogy".into()));
            };
            emit(&report, out.as_deref())
        }
        Command::Semantics(SemanticsCmd::Analogy { model, query, method, metric, interaction, pairs, k }) => {
            let set = load_embeddings(model)?;
            let opts = AnalogyOptions {
                method: method.parse()?,
                metric: metric.parse()?,
                interaction: interaction.parse()?,
                exclude: true,
            };
            let pairs: Vec<(String, String)> = pairs
                .iter()
                .map(|p| {
                    p.split_once(':')
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .ok_or_else(|| Error::Usage(format!("pair {p:?} is not of the form x:y")))
                })
                .collect::<Result<_>>()?;
            let q: Vec<&str> = query.split_whitespace().collect();
            let [a, a_star, b] = q[..] else {
                return Err(Error::Usage(format!("--query needs three words, got {}", q.len())));
            };
            let top = solve_analogy(&set, a, a_star, b, &opts, &pairs, *k)?;
            for (w, s) in top {
                println!("{w}\t{s}");
            }
            Ok(())
        }
        Command::Eval(EvalCmd::Wordsim { model, data, interaction, out }) => {
            let set = load_embeddings(model)?;
            let ds = WordSimDataset::load(data)?;
            let interaction: Interaction = interaction.parse()?;
            emit(&eval_wordsim(&set, &ds, interaction)?, out.as_deref())
        }
        Command::Eval(EvalCmd::Analogy { model, data, method, metric, interaction, keep_query, out }) => {
            let set = load_embeddings(model)?;
            let ds = AnalogyDataset::load(data)?;
            let opts = AnalogyOptions {
                method: method.parse()?,
                metric: metric.parse()?,
                interaction: interaction.parse()?,
                exclude: !keep_query,
            };
            emit(&eval_analogies(&set, &ds, &opts)?, out.as_deref())
        }
        Command::Kg(KgCmd::Train {
            data,
            model,
            dim,
            dr,
            epochs,
            lr,
            batch,
            negs,
            lazy_adam,
            eval_every,
            valid_limit,
            seed,
            out,
        }) => {
            let kind: ModelKind = model.parse()?;
            let seed = seed_or_env(*seed)?;
            record_seed(&mut m, "root", seed);
            let kg = load_kg(data)?;
            let cfg = KgTrainConfig {
                kind,
                d_e: *dim,
                d_r: *dr,
                lr: *lr,
                batch: *batch,
                negs: *negs,
                epochs: *epochs,
                seed,
                eval_every: *eval_every,
                valid_limit: *valid_limit,
                lazy_adam: *lazy_adam,
                ..KgTrainConfig::default()
            };
            let (model, report) = train_kg_with(&kg, &cfg, |e, loss| log::info!("epoch {e}: loss {loss:.6}"))?;
            model.save(out)?;
            emit(&json!({"config": cfg, "report": report}), Some(&out.join("train_report.json")))
        }
        Command::Kg(KgCmd::Eval { protocol, data, model, split, filtered, ties, out }) => {
            let kg = load_kg(data)?;
            let model = KgModel::load(model)?;
            if protocol == "classify" {
                return emit(&classify_eval(&model, &kg), out.as_deref());
            }
            let split = match split.as_str() {
                "valid" => Split::Valid,
                "test" => Split::Test,
                s => return Err(Error::Usage(format!("split must be valid or test, got {s:?}"))),
            };
            let ties: TiePolicy = ties.parse()?;
            let opts = RankOptions { ties, filtered: *filtered, limit: None };
            emit(&rank_eval(&model, &kg, split, &opts)?, out.as_deref())
        }
        Command::Kg(KgCmd::Diagnose { data, model, out }) => {
            let kg = load_kg(data)?;
            let model = model.as_deref().map(KgModel::load).transpose()?;
            let (rank, cls) = match &model {
                Some(mm) => (Some(rank_eval(mm, &kg, Split::Test, &RankOptions::default())?), Some(classify_eval(mm, &kg))),
                None => (None, None),
            };
            let report = build_report(&kg, model.as_ref(), rank.as_ref(), cls.as_ref())?;
            let value = serde_json::to_value(&report).map_err(|e| Error::invalid(e.to_string()))?;
            validate_report_json(&value)?;
            emit(&value, Some(out))
        }
        Command::Kg(KgCmd::SplitNell { data, seed, out }) => {
            let seed = seed_or_env(*seed)?;
            record_seed(&mut m, "split", seed);
            let (kg, _) = KnowledgeGraph::load_dir(data)?;
            let split = split_nell(&kg, seed)?;
            write_split(&split, Split::Train, &out.join("train.txt"))?;
            write_split(&split, Split::Valid, &out.join("valid.txt"))?;
            write_split(&split, Split::Test, &out.join("test.txt"))
        }
        Command::Report(a) => {
            let tables = a.inputs.iter().map(|p| Table::read(p)).collect::<Result<Vec<_>>>()?;
            let merged = merge(tables)?;
            let format = a.format.unwrap_or(
                if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) { Format::Csv } else { Format::Json },
            );
            merged.write(&a.out, format)
        }
        Command::Run(_) => unreachable!("handled by run"),
    }
}
