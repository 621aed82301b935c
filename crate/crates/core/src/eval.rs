//! Intrinsic evaluation: Spearman correlation against human similarity
//! judgements and analogy accuracy.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorize::{EmbeddingSet, Interaction};
use crate::semantics::{AnalogyMethod, AnalogyOptions, AnalogySolver, Metric};

/// Minimum number of in-vocabulary items an evaluation needs.
pub const MIN_SCORABLE: usize = 5;

/// Word pairs with human similarity or relatedness scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSimDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
    /// Repeated pairs dropped by the loader (first occurrence kept).
    pub duplicates: usize,
}

impl WordSimDataset {
    /// Build from pairs; scores must be finite and pairs unique.
    pub fn new(name: impl Into<String>, pairs: Vec<(String, String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (a, b, s) in &pairs {
            if !s.is_finite() {
                return Err(Error::invalid(format!("score for ({a}, {b}) is not finite")));
            }
            if !seen.insert((a.clone(), b.clone())) {
                return Err(Error::invalid(format!("pair ({a}, {b}) appears twice")));
            }
        }
        Ok(Self {
            name: name.into(),
            pairs,
            duplicates: 0,
        })
    }

    /// Read `w1 w2 score` lines (tab or space separated); `#` starts a
    /// comment line. Words are lowercased. A repeated pair keeps its first
    /// score and is counted in `duplicates`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        let mut duplicates = 0;
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno, format!("expected `w1 w2 score`, found {} fields", fields.len())));
            }
            let score: f64 = fields[2]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::parse(path, lineno, format!("bad score {:?}", fields[2])))?;
            let (a, b) = (fields[0].to_lowercase(), fields[1].to_lowercase());
            if !seen.insert((a.clone(), b.clone())) {
                duplicates += 1;
                continue;
            }
            pairs.push((a, b, score));
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self { name, pairs, duplicates })
    }
}

/// One analogy question `a : a* :: b : b*`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub a: String,
    pub a_star: String,
    pub b: String,
    pub b_star: String,
    pub section: String,
}

/// Analogy questions grouped by section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyDataset {
    pub name: String,
    pub questions: Vec<AnalogyQuestion>,
}

impl AnalogyDataset {
    /// Read the `: section` / `a a* b b*` format. Words are lowercased.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut section: Option<String> = None;
        let mut questions = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                section = Some(name.trim().to_owned());
                continue;
            }
            let fields: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
            if fields.len() != 4 {
                return Err(Error::parse(path, lineno, format!("expected 4 words, found {}", fields.len())));
            }
            let section = section
                .clone()
                .ok_or_else(|| Error::parse(path, lineno, "question before the first `: section` header"))?;
            let [a, a_star, b, b_star]: [String; 4] = fields.try_into().unwrap();
            questions.push(AnalogyQuestion { a, a_star, b, b_star, section });
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self { name, questions })
    }

    /// Section names in first-appearance order.
    pub fn sections(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.questions
            .iter()
            .filter(|q| seen.insert(q.section.clone()))
            .map(|q| q.section.clone())
            .collect()
    }
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average ranks for ties. NaN when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Mismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("Spearman correlation needs at least two values"));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Outcome of a word-similarity evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSimResult {
    pub dataset: String,
    pub interaction: Interaction,
    pub spearman: f64,
    pub scored: usize,
    /// Pairs dropped because a word is out of vocabulary.
    pub oov: usize,
}

/// Spearman correlation between cosine similarities and human scores.
pub fn eval_wordsim(set: &EmbeddingSet, data: &WordSimDataset, interaction: Interaction) -> Result<WordSimResult> {
    let (left, right) = set.interaction(interaction)?;
    let index = set.index();
    let mut model = Vec::new();
    let mut human = Vec::new();
    let mut oov = 0;
    for (a, b, s) in &data.pairs {
        match (index.get(a.as_str()), index.get(b.as_str())) {
            (Some(&i), Some(&j)) => {
                let (u, v) = (left.column(i), right.column(j));
                let denom = u.norm() * v.norm();
                model.push(if denom > 0.0 { u.dot(&v) / denom } else { 0.0 });
                human.push(*s);
            }
            _ => oov += 1,
        }
    }
    if model.len() < MIN_SCORABLE {
        return Err(Error::invalid(format!(
            "{}: only {} of {} pairs are in vocabulary; at least {MIN_SCORABLE} needed",
            data.name,
            model.len(),
            data.pairs.len()
        )));
    }
    Ok(WordSimResult {
        dataset: data.name.clone(),
        interaction,
        spearman: spearman(&model, &human)?,
        scored: model.len(),
        oov,
    })
}

/// Options for analogy accuracy; the default ranks by Euclidean distance.
pub fn default_eval_options() -> AnalogyOptions {
    AnalogyOptions {
        metric: Metric::Euclidean,
        ..AnalogyOptions::default()
    }
}

/// Per-section analogy accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionResult {
    pub section: String,
    pub correct: usize,
    pub scored: usize,
}

/// Outcome of an analogy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyResult {
    pub dataset: String,
    pub options: AnalogyOptions,
    pub accuracy: f64,
    pub correct: usize,
    pub scored: usize,
    /// Questions dropped because a word is out of vocabulary.
    pub oov: usize,
    pub sections: Vec<SectionResult>,
}

/// Fraction of in-vocabulary questions whose top candidate is `b*`.
///
/// The mean-offset method averages `w_{x*} − w_x` over the distinct pairs
/// of the question's section, leaving out the question's own `(b, b*)`.
pub fn eval_analogies(set: &EmbeddingSet, data: &AnalogyDataset, options: &AnalogyOptions) -> Result<AnalogyResult> {
    let index = set.index();
    let solver = AnalogySolver::new(set, options.clone())?;
    let ids = |q: &AnalogyQuestion| -> Option<[usize; 4]> {
        Some([
            *index.get(q.a.as_str())?,
            *index.get(q.a_star.as_str())?,
            *index.get(q.b.as_str())?,
            *index.get(q.b_star.as_str())?,
        ])
    };
    let scorable: Vec<(&AnalogyQuestion, [usize; 4])> = data.questions.iter().filter_map(|q| ids(q).map(|v| (q, v))).collect();
    let oov = data.questions.len() - scorable.len();
    if scorable.len() < MIN_SCORABLE {
        return Err(Error::invalid(format!(
            "{}: only {} of {} questions are in vocabulary; at least {MIN_SCORABLE} needed",
            data.name,
            scorable.len(),
            data.questions.len()
        )));
    }

    // Distinct labelled pairs per section, summed offsets.
    let mut section_pairs: HashMap<&str, HashSet<(usize, usize)>> = HashMap::new();
    if options.method == AnalogyMethod::MeanOffset {
        for (q, v) in &scorable {
            let e = section_pairs.entry(q.section.as_str()).or_default();
            e.insert((v[0], v[1]));
            e.insert((v[2], v[3]));
        }
    }
    let section_sums: HashMap<&str, (DVector<f64>, usize)> = section_pairs
        .iter()
        .map(|(s, pairs)| {
            let pairs: Vec<(usize, usize)> = pairs.iter().copied().collect();
            let mean = solver.mean_offset(&pairs).expect("pairs are in range");
            (*s, (mean * pairs.len() as f64, pairs.len()))
        })
        .collect();
    let left = set.interaction(options.interaction)?.0.into_owned();

    let outcomes: Vec<Result<bool>> = scorable
        .par_iter()
        .map(|(q, v)| {
            let offset = if options.method == AnalogyMethod::MeanOffset {
                let (sum, count) = &section_sums[q.section.as_str()];
                let own = left.column(v[3]) - left.column(v[2]);
                if *count > 1 {
                    Some((sum - own) / (*count - 1) as f64)
                } else {
                    Some(sum.clone())
                }
            } else {
                None
            };
            let top = solver.solve(v[0], v[1], v[2], offset.as_ref(), 1)?;
            Ok(top.first().map(|t| t.0) == Some(v[3]))
        })
        .collect();

    let mut per: BTreeMap<usize, SectionResult> = BTreeMap::new();
    let order: HashMap<String, usize> = data.sections().into_iter().enumerate().map(|(k, s)| (s, k)).collect();
    let mut correct = 0;
    for ((q, _), ok) in scorable.iter().zip(outcomes) {
        let ok = ok?;
        let entry = per.entry(order[&q.section]).or_insert_with(|| SectionResult {
            section: q.section.clone(),
            correct: 0,
            scored: 0,
        });
        entry.scored += 1;
        if ok {
            entry.correct += 1;
            correct += 1;
        }
    }
    Ok(AnalogyResult {
        dataset: data.name.clone(),
        options: options.clone(),
        accuracy: correct as f64 / scorable.len() as f64,
        correct,
        scored: scorable.len(),
        oov,
        sections: per.into_values().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorize::{ContextMatrix, LossKind};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn set_from(w: DMatrix<f64>) -> EmbeddingSet {
        let n = w.ncols();
        EmbeddingSet::from_parts(words(n), w.clone(), ContextMatrix::Separate(w), LossKind::External).unwrap()
    }

    #[test]
    fn spearman_matches_reference_values() {
        // Reference values from a standard statistics package.
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[5.0, 6.0, 7.0, 8.0, 7.0]).unwrap();
        assert!((r - 0.820_782_681_668_123_3).abs() < 1e-12);
        let r = spearman(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0], &[2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0]).unwrap();
        assert!((r - 0.198_853_681_209_924_67).abs() < 1e-12);
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    /// Pair k gets cosine similarity decreasing in k.
    fn ordered_pairs(n_pairs: usize) -> EmbeddingSet {
        let mut w = DMatrix::zeros(2, 2 * n_pairs);
        for k in 0..n_pairs {
            let theta = 0.1 + 0.2 * k as f64;
            w[(0, 2 * k)] = 1.0;
            w[(0, 2 * k + 1)] = theta.cos();
            w[(1, 2 * k + 1)] = theta.sin();
        }
        set_from(w)
    }

    #[test]
    fn perfect_and_reversed_orderings() {
        let set = ordered_pairs(6);
        let pairs = |sign: f64| {
            (0..6)
                .map(|k| (format!("w{}", 2 * k), format!("w{}", 2 * k + 1), sign * (10.0 - k as f64)))
                .collect::<Vec<_>>()
        };
        let up = WordSimDataset::new("up", pairs(1.0)).unwrap();
        let down = WordSimDataset::new("down", pairs(-1.0)).unwrap();
        assert!((eval_wordsim(&set, &up, Interaction::WW).unwrap().spearman - 1.0).abs() < 1e-12);
        assert!((eval_wordsim(&set, &down, Interaction::WW).unwrap().spearman + 1.0).abs() < 1e-12);
    }

    #[test]
    fn oov_pairs_are_filtered_and_counted() {
        let set = ordered_pairs(6);
        let mut pairs: Vec<_> = (0..6).map(|k| (format!("w{}", 2 * k), format!("w{}", 2 * k + 1), k as f64)).collect();
        pairs.push(("w0".into(), "unknown".into(), 1.0));
        let r = eval_wordsim(&set, &WordSimDataset::new("d", pairs).unwrap(), Interaction::WC).unwrap();
        assert_eq!(r.oov, 1);
        assert_eq!(r.scored, 6);
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        let set = ordered_pairs(6);
        let pairs: Vec<_> = (0..4).map(|k| (format!("w{}", 2 * k), format!("w{}", 2 * k + 1), k as f64)).collect();
        assert!(eval_wordsim(&set, &WordSimDataset::new("d", pairs).unwrap(), Interaction::WW).is_err());
    }

    #[test]
    fn duplicate_pairs_are_rejected() {
        let p = vec![("a".to_string(), "b".to_string(), 1.0), ("a".to_string(), "b".to_string(), 2.0)];
        assert!(WordSimDataset::new("d", p).is_err());
    }

    fn question(a: &str, a_star: &str, b: &str, b_star: &str, section: &str) -> AnalogyQuestion {
        AnalogyQuestion {
            a: a.into(),
            a_star: a_star.into(),
            b: b.into(),
            b_star: b_star.into(),
            section: section.into(),
        }
    }

    #[test]
    fn trivial_analogies_are_solved_without_exclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = set_from(DMatrix::from_fn(6, 8, |_, _| rng.random_range(-1.0..1.0)));
        let qs = (0..6).map(|k| {
            let (a, b) = (format!("w{k}"), format!("w{}", k + 1));
            question(&a, &b, &a, &b, "t")
        });
        let data = AnalogyDataset { name: "t".into(), questions: qs.collect() };
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let opts = AnalogyOptions { exclude: false, metric, ..Default::default() };
            assert_eq!(eval_analogies(&set, &data, &opts).unwrap().accuracy, 1.0);
        }
    }

    #[test]
    fn parallelogram_embedding_is_fully_accurate() {
        // Pairs (x_k, y_k) with y_k = x_k + r.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let mut w = DMatrix::zeros(8, 12);
        for k in 0..6 {
            let x = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
            w.set_column(2 * k, &x);
            w.set_column(2 * k + 1, &(x + &r));
        }
        let set = set_from(w);
        let mut qs = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    let n = |k: usize| format!("w{k}");
                    qs.push(question(&n(2 * i), &n(2 * i + 1), &n(2 * j), &n(2 * j + 1), "s"));
                }
            }
        }
        let data = AnalogyDataset { name: "p".into(), questions: qs };
        let res = eval_analogies(&set, &data, &default_eval_options()).unwrap();
        assert_eq!(res.accuracy, 1.0);
        assert_eq!(res.scored, 30);
        let mo = AnalogyOptions { method: AnalogyMethod::MeanOffset, ..default_eval_options() };
        assert_eq!(eval_analogies(&set, &data, &mo).unwrap().accuracy, 1.0);
    }

    #[test]
    fn loads_wordsim_and_analogy_formats() {
        let dir = tempfile::tempdir().unwrap();
        let ws = dir.path().join("ws.tsv");
        fs::write(&ws, "# header\n# Word 1\tWord 2\tHuman\nLove\tsex\t6.77\ntiger cat 7.35\n").unwrap();
        let d = WordSimDataset::load(&ws).unwrap();
        assert_eq!(d.pairs[0], ("love".into(), "sex".into(), 6.77));
        assert_eq!(d.name, "ws");
        fs::write(&ws, "a b 1\na b x\n").unwrap();
        match WordSimDataset::load(&ws).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        fs::write(&ws, "a b 1\nc d 2\na b 3\n").unwrap();
        let d = WordSimDataset::load(&ws).unwrap();
        assert_eq!(d.duplicates, 1);
        assert_eq!(d.pairs, vec![("a".into(), "b".into(), 1.0), ("c".into(), "d".into(), 2.0)]);

        let an = dir.path().join("q.txt");
        fs::write(&an, ": capital\nAthens Greece Baghdad Iraq\n: family\nboy girl brother sister\n").unwrap();
        let d = AnalogyDataset::load(&an).unwrap();
        assert_eq!(d.questions.len(), 2);
        assert_eq!(d.questions[0].a, "athens");
        assert_eq!(d.sections(), vec!["capital".to_string(), "family".to_string()]);
        fs::write(&an, "a b c d\n").unwrap();
        assert!(AnalogyDataset::load(&an).is_err());
        fs::write(&an, ": s\na b c\n").unwrap();
        match AnalogyDataset::load(&an).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn spearman_is_rank_invariant(x in proptest::collection::vec(-10.0f64..10.0, 6..20), shift in -5.0f64..5.0) {
            let y: Vec<f64> = x.iter().map(|v| v.powi(3) + shift).collect();
            let r = spearman(&x, &y).unwrap();
            prop_assume!(r.is_finite());
            prop_assert!((r - 1.0).abs() < 1e-12);
        }

        #[test]
        fn scores_invariant_to_rescaling(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = set_from(DMatrix::from_fn(4, 10, |_, _| rng.random_range(-1.0..1.0)));
            let pairs: Vec<_> = (0..9).map(|k| (format!("w{k}"), format!("w{}", k + 1), rng.random_range(0.0..10.0))).collect();
            let data = WordSimDataset::new("d", pairs).unwrap();
            let a = eval_wordsim(&set, &data, Interaction::AA).unwrap().spearman;
            let b = eval_wordsim(&set.scaled(scale), &data, Interaction::AA).unwrap().spearman;
            prop_assert!((a - b).abs() < 1e-9);
            let qs: Vec<_> = (0..6).map(|k| question(&format!("w{k}"), &format!("w{}", k + 1), &format!("w{}", k + 2), &format!("w{}", k + 3), "s")).collect();
            let data = AnalogyDataset { name: "a".into(), questions: qs };
            let a = eval_analogies(&set, &data, &default_eval_options()).unwrap().correct;
            let b = eval_analogies(&set.scaled(scale), &data, &default_eval_options()).unwrap().correct;
            prop_assert_eq!(a, b);
        }
    }
}
