//! Link-prediction ranking (Hits@k, MRR) and threshold classification evaluation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{KnowledgeGraph, Split};
use super::model::{KgModel, Scorer};
use crate::error::{Error, Result};

/// How a true triple is ranked among candidates with an equal score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TiePolicy {
    /// The true triple is placed after every tied candidate.
    #[default]
    Pessimistic,
    /// Expectation over a uniformly random order of the tied group.
    Expected,
}

impl FromStr for TiePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            "expected" => Ok(TiePolicy::Expected),
            other => Err(Error::Usage(format!("unknown tie policy `{other}` (pessimistic, expected)"))),
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Pessimistic => "pessimistic",
            TiePolicy::Expected => "expected",
        })
    }
}

/// Ranking options.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankOptions {
    /// Tie handling.
    pub ties: TiePolicy,
    /// Exclude other known-true triples (any split) from the candidates.
    pub filtered: bool,
    /// Evaluate only the first `limit` triples of the split.
    pub limit: Option<usize>,
}

/// Aggregate ranking metrics; every evaluated triple contributes an object and a subject query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    /// Number of ranking queries (twice the triple count).
    pub queries: usize,
    /// Fraction ranked first.
    pub hits1: f64,
    /// Fraction ranked in the top 3.
    pub hits3: f64,
    /// Fraction ranked in the top 10.
    pub hits10: f64,
    /// Mean reciprocal rank.
    pub mrr: f64,
}

/// Ranking results per relation and overall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    /// Options used.
    pub options: RankOptions,
    /// Per relation id; `None` where the split has no triple of that relation.
    pub per_relation: Vec<Option<RankStats>>,
    /// All queries pooled.
    pub overall: RankStats,
}

/// Per-query contributions `(hits1, hits3, hits10, rr)`.
#[derive(Debug, Clone, Copy, Default)]
struct Contribution([f64; 4]);

/// Ranks `scores[truth]` among the candidates not in `skip`.
fn contribution(scores: &[f64], truth: usize, skip: &[usize], ties: TiePolicy) -> Contribution {
    let t = scores[truth];
    let (mut greater, mut equal) = (0usize, 0usize);
    for (x, &v) in scores.iter().enumerate() {
        if x == truth || skip.contains(&x) {
            continue;
        }
        if t.is_nan() || v.is_nan() || v > t {
            greater += 1;
        } else if v == t {
            equal += 1;
        }
    }
    match ties {
        TiePolicy::Pessimistic => {
            let rank = (1 + greater + equal) as f64;
            let hit = |k: f64| if rank <= k { 1.0 } else { 0.0 };
            Contribution([hit(1.0), hit(3.0), hit(10.0), 1.0 / rank])
        }
        TiePolicy::Expected => {
            let group = (equal + 1) as f64;
            let hit = |k: f64| ((k - greater as f64) / group).clamp(0.0, 1.0);
            let rr = (greater + 1..=greater + equal + 1).map(|p| 1.0 / p as f64).sum::<f64>() / group;
            Contribution([hit(1.0), hit(3.0), hit(10.0), rr])
        }
    }
}

/// Known-true completions used by the filtered protocol and by classification.
struct Truths {
    objects: HashMap<(usize, usize), Vec<usize>>,
    subjects: HashMap<(usize, usize), Vec<usize>>,
}

impl Truths {
    fn new(kg: &KnowledgeGraph) -> Self {
        let mut objects: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut subjects: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for &(s, r, o) in kg.train.iter().chain(&kg.valid).chain(&kg.test) {
            objects.entry((s, r)).or_default().push(o);
            subjects.entry((r, o)).or_default().push(s);
        }
        Truths { objects, subjects }
    }
}

fn stats(sum: [f64; 4], queries: usize) -> RankStats {
    let n = queries.max(1) as f64;
    RankStats { queries, hits1: sum[0] / n, hits3: sum[1] / n, hits10: sum[2] / n, mrr: sum[3] / n }
}

/// Ranks every triple of `split` against all object and all subject substitutions.
pub fn rank_eval(model: &KgModel, kg: &KnowledgeGraph, split: Split, opts: &RankOptions) -> Result<RankReport> {
    if model.n_e != kg.n_entities() || model.n_r != kg.n_relations() {
        return Err(Error::Mismatch(format!(
            "model has {} entities / {} relations, graph has {} / {}",
            model.n_e,
            model.n_r,
            kg.n_entities(),
            kg.n_relations()
        )));
    }
    let triples = kg.split(split);
    let triples = &triples[..opts.limit.unwrap_or(triples.len()).min(triples.len())];
    let scorer = Scorer::new(model);
    let truths = opts.filtered.then(|| Truths::new(kg));
    let empty: Vec<usize> = Vec::new();
    let per: Vec<(usize, Contribution, Contribution)> = triples
        .par_iter()
        .map(|&(s, r, o)| {
            let (skip_o, skip_s) = match &truths {
                Some(t) => (&t.objects[&(s, r)], &t.subjects[&(r, o)]),
                None => (&empty, &empty),
            };
            let co = contribution(&scorer.objects(s, r), o, skip_o, opts.ties);
            let cs = contribution(&scorer.subjects(r, o), s, skip_s, opts.ties);
            (r, co, cs)
        })
        .collect();
    let mut rel_sum = vec![[0.0; 4]; kg.n_relations()];
    let mut rel_n = vec![0usize; kg.n_relations()];
    let mut all = [0.0; 4];
    for (r, a, b) in per {
        for c in [a, b] {
            for i in 0..4 {
                rel_sum[r][i] += c.0[i];
                all[i] += c.0[i];
            }
        }
        rel_n[r] += 2;
    }
    let per_relation = (0..kg.n_relations()).map(|r| (rel_n[r] > 0).then(|| stats(rel_sum[r], rel_n[r]))).collect();
    Ok(RankReport { options: *opts, per_relation, overall: stats(all, 2 * triples.len()) })
}

/// Classification counts for one relation (or all relations).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifyStats {
    /// Distinct test `(subject, relation)` pairs evaluated.
    pub pairs: usize,
    /// Training objects of those pairs.
    pub train_total: usize,
    /// Training objects predicted positive.
    pub train_correct: usize,
    /// Test and validation objects of those pairs not already in training.
    pub test_total: usize,
    /// Such objects predicted positive.
    pub test_correct: usize,
    /// Positive predictions outside every known truth.
    pub other_total: usize,
    /// `train_correct / train_total`.
    pub accuracy_train: Option<f64>,
    /// `test_correct / test_total`.
    pub accuracy_test: Option<f64>,
    /// `other_total / pairs`.
    pub other_avg: Option<f64>,
}

impl ClassifyStats {
    fn add(&mut self, o: &ClassifyStats) {
        self.pairs += o.pairs;
        self.train_total += o.train_total;
        self.train_correct += o.train_correct;
        self.test_total += o.test_total;
        self.test_correct += o.test_correct;
        self.other_total += o.other_total;
    }

    fn finish(&mut self) {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        self.accuracy_train = ratio(self.train_correct, self.train_total);
        self.accuracy_test = ratio(self.test_correct, self.test_total);
        self.other_avg = ratio(self.other_total, self.pairs);
    }
}

/// Classification results per relation and overall (micro-averaged).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyReport {
    /// Per relation id; `None` where no test pair has that relation.
    pub per_relation: Vec<Option<ClassifyStats>>,
    /// All pairs pooled.
    pub overall: ClassifyStats,
}

/// For every distinct test `(s, r)`, predicts each object positive iff `sigma(phi) > 0.5`
/// (equivalently `phi > 0`) and splits positives into training truths, test/validation truths
/// and others.
pub fn classify_eval(model: &KgModel, kg: &KnowledgeGraph) -> ClassifyReport {
    let mut train_obj: HashMap<(usize, usize), HashSet<usize>> = HashMap::new();
    for &(s, r, o) in &kg.train {
        train_obj.entry((s, r)).or_default().insert(o);
    }
    let mut held_obj: HashMap<(usize, usize), HashSet<usize>> = HashMap::new();
    for &(s, r, o) in kg.test.iter().chain(&kg.valid) {
        held_obj.entry((s, r)).or_default().insert(o);
    }
    let pairs: Vec<(usize, usize)> =
        kg.test.iter().map(|&(s, r, _)| (s, r)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let scorer = Scorer::new(model);
    let empty = HashSet::new();
    let per_pair: Vec<(usize, ClassifyStats)> = pairs
        .par_iter()
        .map(|&(s, r)| {
            let scores = scorer.objects(s, r);
            let tr = train_obj.get(&(s, r)).unwrap_or(&empty);
            let held = held_obj.get(&(s, r)).unwrap_or(&empty);
            let mut st = ClassifyStats { pairs: 1, ..Default::default() };
            st.train_total = tr.len();
            st.test_total = held.difference(tr).count();
            for (o, &phi) in scores.iter().enumerate() {
                if phi > 0.0 {
                    if tr.contains(&o) {
                        st.train_correct += 1;
                    } else if held.contains(&o) {
                        st.test_correct += 1;
                    } else {
                        st.other_total += 1;
                    }
                }
            }
            (r, st)
        })
        .collect();
    let mut per: BTreeMap<usize, ClassifyStats> = BTreeMap::new();
    let mut overall = ClassifyStats::default();
    for (r, st) in &per_pair {
        per.entry(*r).or_default().add(st);
        overall.add(st);
    }
    overall.finish();
    let per_relation = (0..kg.n_relations())
        .map(|r| {
            per.remove(&r).map(|mut s| {
                s.finish();
                s
            })
        })
        .collect();
    ClassifyReport { per_relation, overall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::model::ModelKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n_e: usize, n_r: usize, test: Vec<(usize, usize, usize)>, train: Vec<(usize, usize, usize)>) -> KnowledgeGraph {
        KnowledgeGraph {
            entities: (0..n_e).map(|i| format!("e{i}")).collect(),
            relations: (0..n_r).map(|i| format!("r{i}")).collect(),
            train,
            valid: vec![],
            test,
            relation_types: vec![None; n_r],
        }
    }

    fn random_triples(n: usize, n_e: usize, n_r: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize, usize)> {
        let mut set = std::collections::BTreeSet::new();
        while set.len() < n {
            set.insert((rng.random_range(0..n_e), rng.random_range(0..n_r), rng.random_range(0..n_e)));
        }
        set.into_iter().collect()
    }

    fn brute_rank(m: &KgModel, kg: &KnowledgeGraph, filtered: bool) -> [f64; 4] {
        let known: HashSet<_> = kg.train.iter().chain(&kg.test).copied().collect();
        let mut sum = [0.0; 4];
        for &(s, r, o) in &kg.test {
            for obj in [true, false] {
                let t = m.score(s, r, o);
                let mut rank = 1;
                for x in 0..m.n_e {
                    let cand = if obj { (s, r, x) } else { (x, r, o) };
                    if cand == (s, r, o) || (filtered && known.contains(&cand)) {
                        continue;
                    }
                    if m.score(cand.0, cand.1, cand.2) >= t {
                        rank += 1;
                    }
                }
                let rank = rank as f64;
                sum[0] += (rank <= 1.0) as u8 as f64;
                sum[1] += (rank <= 3.0) as u8 as f64;
                sum[2] += (rank <= 10.0) as u8 as f64;
                sum[3] += 1.0 / rank;
            }
        }
        let n = 2.0 * kg.test.len() as f64;
        sum.map(|x| x / n)
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let triples = random_triples(80, 30, 3, &mut rng);
        let kg = graph(30, 3, triples[..20].to_vec(), triples[20..].to_vec());
        for kind in ModelKind::ALL {
            let mut m = KgModel::zeros(kind, 30, 3, 4, 3).unwrap();
            m.randomize(1.0, &mut rng);
            for filtered in [false, true] {
                let rep = rank_eval(&m, &kg, Split::Test, &RankOptions { filtered, ..Default::default() }).unwrap();
                let o = &rep.overall;
                let want = brute_rank(&m, &kg, filtered);
                for (got, w) in [o.hits1, o.hits3, o.hits10, o.mrr].iter().zip(want) {
                    assert!((got - w).abs() < 1e-12, "{kind} filtered={filtered}");
                }
                assert_eq!(o.queries, 40);
            }
        }
    }

    #[test]
    fn unique_top_triple_scores_one() {
        let mut m = KgModel::zeros(ModelKind::TransE, 12, 1, 2, 2).unwrap();
        for e in 0..12 {
            m.entity_mut(e).copy_from_slice(&[e as f64 * 3.0, 0.0]);
        }
        m.relation_mut(0).copy_from_slice(&[3.0, 0.0]);
        let kg = graph(12, 1, vec![(4, 0, 5)], vec![(0, 0, 1)]);
        let rep = rank_eval(&m, &kg, Split::Test, &RankOptions::default()).unwrap();
        assert_eq!(rep.overall.hits1, 1.0);
        assert_eq!(rep.overall.mrr, 1.0);
        assert_eq!(rep.per_relation[0].as_ref().unwrap().hits10, 1.0);
    }

    #[test]
    fn constant_model_under_both_tie_policies() {
        let n_e = 100;
        let m = KgModel::zeros(ModelKind::DistMult, n_e, 1, 2, 2).unwrap();
        let kg = graph(n_e, 1, vec![(0, 0, 1), (2, 0, 3), (5, 0, 9)], vec![(1, 0, 2)]);
        let pess = rank_eval(&m, &kg, Split::Test, &RankOptions::default()).unwrap().overall;
        assert_eq!(pess.hits10, 0.0);
        assert!((pess.mrr - 1.0 / n_e as f64).abs() < 1e-15);
        let exp = rank_eval(&m, &kg, Split::Test, &RankOptions { ties: TiePolicy::Expected, ..Default::default() })
            .unwrap()
            .overall;
        assert!((exp.hits10 - 10.0 / n_e as f64).abs() < 1e-15);
        assert!((exp.hits1 - 1.0 / n_e as f64).abs() < 1e-15);
        let harmonic: f64 = (1..=n_e).map(|p| 1.0 / p as f64).sum::<f64>() / n_e as f64;
        assert!((exp.mrr - harmonic).abs() < 1e-12);
    }

    #[test]
    fn shifting_all_scores_leaves_ranks_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let triples = random_triples(40, 20, 2, &mut rng);
        let kg = graph(20, 2, triples[..15].to_vec(), triples[15..].to_vec());
        let mut m = KgModel::zeros(ModelKind::MuReI, 20, 2, 3, 3).unwrap();
        m.randomize(1.0, &mut rng);
        let base = rank_eval(&m, &kg, Split::Test, &RankOptions::default()).unwrap();
        let l = m.layout;
        for x in &mut m.params[l.bias_s..l.bias_o] {
            *x += 2.5;
        }
        let shifted = rank_eval(&m, &kg, Split::Test, &RankOptions::default()).unwrap();
        assert_eq!(base.overall, shifted.overall);
    }

    #[test]
    fn nan_true_score_ranks_last() {
        let c = contribution(&[f64::NAN, 0.0, 1.0], 0, &[], TiePolicy::Pessimistic);
        assert_eq!(c.0[3], 1.0 / 3.0);
    }

    #[test]
    fn all_zero_model_predicts_nothing() {
        let m = KgModel::zeros(ModelKind::DistMult, 10, 2, 4, 4).unwrap();
        let kg = graph(10, 2, vec![(0, 0, 1), (3, 1, 4)], vec![(0, 0, 2), (3, 1, 5)]);
        let rep = classify_eval(&m, &kg);
        let o = &rep.overall;
        assert_eq!((o.train_correct, o.test_correct, o.other_total), (0, 0, 0));
        assert_eq!(o.accuracy_train, Some(0.0));
        assert_eq!(o.pairs, 2);
        assert_eq!(o.test_total, 2);
    }

    #[test]
    fn classification_counts_by_oracle() {
        let mut m = KgModel::zeros(ModelKind::DistMult, 6, 1, 6, 6).unwrap();
        for e in 0..6 {
            m.entity_mut(e)[e] = 1.0;
        }
        m.entity_mut(0).fill(1.0);
        m.relation_mut(0).copy_from_slice(&[0.0, 1.0, 1.0, -1.0, 1.0, -1.0]);
        // phi(0, 0, x) = r_x for x >= 1: positives are 1, 2, 4.
        let kg = graph(6, 1, vec![(0, 0, 2), (0, 0, 3)], vec![(0, 0, 1), (0, 0, 5)]);
        let st = classify_eval(&m, &kg).overall;
        assert_eq!(st.pairs, 1);
        assert_eq!((st.train_total, st.train_correct), (2, 1));
        assert_eq!((st.test_total, st.test_correct), (2, 1));
        assert_eq!(st.other_total, 2);
        assert_eq!(st.accuracy_train, Some(0.5));
        assert_eq!(st.other_avg, Some(2.0));
    }
}
