//! Tokenization, dictionary construction, frequency subsampling and
//! windowed (target, context) pair extraction.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default subsampling threshold.
pub const DEFAULT_SUBSAMPLE: f64 = 1e-5;

/// Split text into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = Cow<'_, str>> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            if t.chars().any(char::is_uppercase) {
                Cow::Owned(t.to_lowercase())
            } else {
                Cow::Borrowed(t)
            }
        })
}

/// Token/id bijection with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Dictionary {
    /// Count tokens and keep those with `count >= min_count`.
    ///
    /// Ids are assigned by descending count, ties broken lexicographically.
    pub fn build<I, S>(tokens: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for t in tokens {
            let t = t.as_ref();
            total += 1;
            match freq.get_mut(t) {
                Some(c) => *c += 1,
                None => {
                    freq.insert(t.to_owned(), 1);
                }
            }
        }
        if total == 0 {
            return Err(Error::invalid("token stream is empty"));
        }
        let mut kept: Vec<(String, u64)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyDictionary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (tokens, counts): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        Ok(Self::from_parts(tokens, counts, total))
    }

    /// Assemble from explicit parts. Order of `tokens` defines the ids.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>, total_tokens: u64) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            ids,
            counts,
            total_tokens,
        }
    }

    /// Dictionary over `tokens` with unit counts, in the given order.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let n = tokens.len();
        Self::from_parts(tokens, vec![1; n], n as u64)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Look up a token or fail with an out-of-vocabulary error.
    pub fn require(&self, token: &str) -> Result<u32> {
        self.id(token)
            .ok_or_else(|| Error::OutOfVocabulary(vec![token.to_owned()]))
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Relative corpus frequency of `id`.
    pub fn frequency(&self, id: u32) -> f64 {
        self.counts[id as usize] as f64 / self.total_tokens as f64
    }

    /// Map tokens to ids, keeping positions; unknown tokens become `None`.
    pub fn encode<I, S>(&self, tokens: I) -> Vec<Option<u32>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        tokens.into_iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.ids = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    /// Write `token<TAB>count` lines in id order.
    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(out, "{t}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a vocabulary TSV. Line number is the id; `total_tokens` becomes
    /// the sum of the listed counts.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, cnt) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno + 1, "expected token<TAB>count"))?;
            let cnt: u64 = cnt
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad count {cnt:?}")))?;
            tokens.push(tok.to_owned());
            counts.push(cnt);
        }
        if tokens.is_empty() {
            return Err(Error::parse(path, 0, "empty vocabulary file"));
        }
        let total = counts.iter().sum();
        let dict = Self::from_parts(tokens, counts, total);
        if dict.ids.len() != dict.tokens.len() {
            return Err(Error::parse(path, 0, "duplicate token in vocabulary"));
        }
        Ok(dict)
    }
}

/// Statistics from [`subsample_filter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleReport {
    pub kept: u64,
    pub discarded: u64,
    /// Occurrences dropped because they are not in the dictionary.
    pub skipped: u64,
}

/// Probability that one occurrence of a word with relative frequency `f` is
/// discarded under threshold `tau`.
pub fn discard_probability(f: f64, tau: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    (1.0 - (tau / f).sqrt()).max(0.0)
}

/// Frequency subsampling. Discarded occurrences and unknown tokens are removed
/// from the stream, so surviving tokens close up.
pub fn subsample_filter(
    stream: &[Option<u32>],
    dict: &Dictionary,
    tau: f64,
    seed: u64,
) -> Result<(Vec<Option<u32>>, SubsampleReport)> {
    if !(tau > 0.0) {
        return Err(Error::invalid("subsample threshold must be positive"));
    }
    let discard: Vec<f64> = (0..dict.len() as u32)
        .map(|i| discard_probability(dict.frequency(i), tau))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SubsampleReport::default();
    let mut out = Vec::with_capacity(stream.len());
    for tok in stream {
        let Some(id) = *tok else {
            report.skipped += 1;
            continue;
        };
        let p = *discard
            .get(id as usize)
            .ok_or(Error::OutOfRange { id: id as usize, size: dict.len() })?;
        let u: f64 = rng.random();
        if u < p {
            report.discarded += 1;
        } else {
            report.kept += 1;
            out.push(Some(id));
        }
    }
    Ok((out, report))
}

/// Weight assigned to a context at a given distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    #[default]
    InverseDistance,
}

impl Weighting {
    pub fn weight(self, distance: u32) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::InverseDistance => 1.0 / distance as f64,
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::InverseDistance => "inverse_distance",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "inverse_distance" => Ok(Weighting::InverseDistance),
            other => Err(Error::Usage(format!("unknown weighting {other:?}"))),
        }
    }
}

/// One weighted co-occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub target: u32,
    pub context: u32,
    pub weight: f64,
    pub distance: u32,
}

/// Materialized pair sequence with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStream {
    pub pairs: Vec<Pair>,
    pub window: u32,
    pub weighting: Weighting,
}

/// Visit every (target, context) pair within `window` positions. Unknown
/// tokens occupy a position but emit nothing.
pub fn for_each_pair<F>(stream: &[Option<u32>], window: u32, weighting: Weighting, mut f: F)
where
    F: FnMut(Pair),
{
    let l = window as usize;
    let n = stream.len();
    for t in 0..n {
        let Some(target) = stream[t] else { continue };
        let lo = t.saturating_sub(l);
        let hi = (t + l).min(n - 1);
        for u in lo..=hi {
            if u == t {
                continue;
            }
            if let Some(context) = stream[u] {
                let distance = t.abs_diff(u) as u32;
                f(Pair {
                    target,
                    context,
                    weight: weighting.weight(distance),
                    distance,
                });
            }
        }
    }
}

/// Collect all pairs of `stream` into a [`PairStream`].
pub fn extract_pairs(stream: &[Option<u32>], window: u32, weighting: Weighting) -> Result<PairStream> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let mut pairs = Vec::new();
    for_each_pair(stream, window, weighting, |p| pairs.push(p));
    Ok(PairStream {
        pairs,
        window,
        weighting,
    })
}
