//! Sparse co-occurrence sufficient statistics: pair weights, marginals and
//! joint word-set counts.
//!
//! Pair weights are kept internally as integer multiples of `1/lcm(1..=l)`,
//! so every `1/distance` weight is exact and accumulation is associative.
//! Sharded accumulation followed by [`CooccurrenceStats::merge`] is therefore
//! bit-identical to a single pass.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{for_each_pair, Pair, PairStream, Weighting};
use crate::error::{Error, Result};

/// Largest supported window; keeps `lcm(1..=l)` well inside `u64`.
pub const MAX_WINDOW: u32 = 20;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn weight_scale(window: u32, weighting: Weighting) -> u64 {
    match weighting {
        Weighting::Uniform => 1,
        Weighting::InverseDistance => (1..=window as u64).fold(1, |acc, d| acc / gcd(acc, d) * d),
    }
}

/// Pair counts `#(w_i, c_j)` with marginals `#(w_i)`, `#(c_j)` and total `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceStats {
    n: usize,
    window: u32,
    weighting: Weighting,
    scale: u64,
    pairs: HashMap<(u32, u32), u64>,
    target_units: Vec<u64>,
    context_units: Vec<u64>,
    total_units: u64,
}

impl CooccurrenceStats {
    /// Empty statistics over a dictionary of size `n`.
    pub fn new(n: usize, window: u32, weighting: Weighting) -> Result<Self> {
        if window == 0 || window > MAX_WINDOW {
            return Err(Error::invalid(format!("window must be in 1..={MAX_WINDOW}, got {window}")));
        }
        Ok(Self {
            n,
            window,
            weighting,
            scale: weight_scale(window, weighting),
            pairs: HashMap::new(),
            target_units: vec![0; n],
            context_units: vec![0; n],
            total_units: 0,
        })
    }

    /// Accumulate a materialized pair stream over a dictionary of size `n`.
    pub fn accumulate(pairs: &PairStream, n: usize) -> Result<Self> {
        let mut stats = Self::new(n, pairs.window, pairs.weighting)?;
        for p in &pairs.pairs {
            stats.add_pair(p)?;
        }
        Ok(stats)
    }

    /// Extract and accumulate pairs in one pass without materializing them.
    pub fn accumulate_tokens(stream: &[Option<u32>], n: usize, window: u32, weighting: Weighting) -> Result<Self> {
        let mut stats = Self::new(n, window, weighting)?;
        let mut err = None;
        for_each_pair(stream, window, weighting, |p| {
            if err.is_none() {
                if let Err(e) = stats.add_pair(&p) {
                    err = Some(e);
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(stats),
        }
    }

    /// Add one pair; its weight is taken from `distance` and the weighting.
    pub fn add_pair(&mut self, p: &Pair) -> Result<()> {
        for id in [p.target, p.context] {
            if id as usize >= self.n {
                return Err(Error::OutOfRange { id: id as usize, size: self.n });
            }
        }
        if p.distance == 0 || p.distance > self.window {
            return Err(Error::invalid(format!(
                "pair distance {} outside 1..={}",
                p.distance, self.window
            )));
        }
        let units = match self.weighting {
            Weighting::Uniform => 1,
            Weighting::InverseDistance => self.scale / p.distance as u64,
        };
        *self.pairs.entry((p.target, p.context)).or_insert(0) += units;
        self.target_units[p.target as usize] += units;
        self.context_units[p.context as usize] += units;
        self.total_units += units;
        Ok(())
    }

    /// Element-wise sum. Both inputs must share size, window and weighting.
    pub fn merge(a: &Self, b: &Self) -> Result<Self> {
        if a.n != b.n || a.window != b.window || a.weighting != b.weighting {
            return Err(Error::Mismatch(format!(
                "cannot merge (n={}, l={}, {}) with (n={}, l={}, {})",
                a.n, a.window, a.weighting, b.n, b.window, b.weighting
            )));
        }
        let mut out = a.clone();
        for (&k, &v) in &b.pairs {
            *out.pairs.entry(k).or_insert(0) += v;
        }
        for (x, y) in out.target_units.iter_mut().zip(&b.target_units) {
            *x += y;
        }
        for (x, y) in out.context_units.iter_mut().zip(&b.context_units) {
            *x += y;
        }
        out.total_units += b.total_units;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    /// Number of stored non-zero pairs.
    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    fn to_weight(&self, units: u64) -> f64 {
        units as f64 / self.scale as f64
    }

    /// `#(w_i, c_j)`.
    pub fn pair_weight(&self, i: u32, j: u32) -> f64 {
        self.to_weight(self.pairs.get(&(i, j)).copied().unwrap_or(0))
    }

    /// `#(w_i)`.
    pub fn target_weight(&self, i: u32) -> f64 {
        self.to_weight(self.target_units[i as usize])
    }

    /// `#(c_j)`.
    pub fn context_weight(&self, j: u32) -> f64 {
        self.to_weight(self.context_units[j as usize])
    }

    /// `D`, the total pair weight.
    pub fn total_weight(&self) -> f64 {
        self.to_weight(self.total_units)
    }

    pub fn target_weights(&self) -> Vec<f64> {
        self.target_units.iter().map(|&u| self.to_weight(u)).collect()
    }

    pub fn context_weights(&self) -> Vec<f64> {
        self.context_units.iter().map(|&u| self.to_weight(u)).collect()
    }

    /// Non-zero entries sorted by `(i, j)`.
    pub fn entries(&self) -> Vec<(u32, u32, f64)> {
        let mut v: Vec<(u32, u32, f64)> = self
            .pairs
            .iter()
            .map(|(&(i, j), &u)| (i, j, self.to_weight(u)))
            .collect();
        v.sort_unstable_by_key(|&(i, j, _)| (i, j));
        v
    }

    /// Write the TSV form: one header line, then `i<TAB>j<TAB>weight` sorted.
    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let w = |e| Error::io(path, e);
        writeln!(
            out,
            "# D={} l={} weighting={} n={}",
            self.total_weight(),
            self.window,
            self.weighting,
            self.n
        )
        .map_err(w)?;
        for (i, j, v) in self.entries() {
            writeln!(out, "{i}\t{j}\t{v}").map_err(w)?;
        }
        out.flush().map_err(w)
    }

    /// Read the TSV form written by [`save_tsv`](Self::save_tsv).
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let fields = parse_header(header).map_err(|m| Error::parse(path, 1, m))?;
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| Error::parse(path, 1, format!("header lacks `{k}`")))
        };
        let window: u32 = get("l")?.parse().map_err(|_| Error::parse(path, 1, "bad `l`"))?;
        let weighting: Weighting = get("weighting")?
            .parse()
            .map_err(|_| Error::parse(path, 1, "bad `weighting`"))?;
        let n: usize = get("n")?.parse().map_err(|_| Error::parse(path, 1, "bad `n`"))?;
        let mut stats = Self::new(n, window, weighting)?;
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::parse(path, lineno + 1, m.to_owned());
            let mut it = line.split('\t');
            let i: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad row id"))?;
            let j: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad column id"))?;
            let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad weight"))?;
            if it.next().is_some() {
                return Err(bad("too many fields"));
            }
            if i as usize >= n || j as usize >= n {
                return Err(bad("id out of range"));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad("weight must be finite and non-negative"));
            }
            let units = (v * stats.scale as f64).round() as u64;
            *stats.pairs.entry((i, j)).or_insert(0) += units;
            stats.target_units[i as usize] += units;
            stats.context_units[j as usize] += units;
            stats.total_units += units;
        }
        Ok(stats)
    }
}

/// Parse `# key=value key=value` into a map.
pub(crate) fn parse_header(line: &str) -> std::result::Result<HashMap<String, String>, String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| "header must start with `#`".to_owned())?;
    let mut map = HashMap::new();
    for field in body.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field {field:?}"))?;
        map.insert(k.to_owned(), v.to_owned());
    }
    Ok(map)
}

/// Joint counts for one word set `W`.
///
/// At each position `t` whose token is in the dictionary, the set's weight is
/// the product over members of the summed pair weights of that member's
/// occurrences within `l` positions of `t` (excluding `t`). That weight is
/// added to `#(W, c_t)` and to `#(W) = Σ_c #(W, c)`. A singleton set
/// reproduces the pair layer exactly: `#({a}, c) = #(a, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStats {
    /// Sorted, distinct member ids.
    pub set: Vec<u32>,
    pub window: u32,
    pub weighting: Weighting,
    /// `#(W)`.
    pub set_count: f64,
    /// `#(W, c_j)`, non-zero entries only.
    pub context_counts: BTreeMap<u32, f64>,
}

impl JointStats {
    /// `#(W, c_j)`.
    pub fn context_count(&self, j: u32) -> f64 {
        self.context_counts.get(&j).copied().unwrap_or(0.0)
    }

    /// True when `|W| > l/2`, where windows rarely hold the whole set.
    pub fn exceeds_half_window(&self) -> bool {
        2 * self.set.len() > self.window as usize
    }
}

/// Normalize a word set: sort, reject duplicates and emptiness.
pub fn canonical_set(set: &[u32]) -> Result<Vec<u32>> {
    if set.is_empty() {
        return Err(Error::invalid("word set is empty"));
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("word set {set:?} has a repeated member")));
    }
    Ok(s)
}

/// Joint counts for each registered set over one token stream.
pub fn accumulate_joint(
    stream: &[Option<u32>],
    n: usize,
    sets: &[Vec<u32>],
    window: u32,
    weighting: Weighting,
) -> Result<Vec<JointStats>> {
    if window == 0 || window > MAX_WINDOW {
        return Err(Error::invalid(format!("window must be in 1..={MAX_WINDOW}, got {window}")));
    }
    let mut canon = Vec::with_capacity(sets.len());
    for s in sets {
        let s = canonical_set(s)?;
        if s.len() >= window as usize {
            return Err(Error::invalid(format!(
                "set of size {} needs a window larger than {window}",
                s.len()
            )));
        }
        if let Some(&bad) = s.iter().find(|&&id| id as usize >= n) {
            return Err(Error::OutOfRange { id: bad as usize, size: n });
        }
        canon.push(s);
    }
    let mut out: Vec<JointStats> = canon
        .into_iter()
        .map(|set| JointStats {
            set,
            window,
            weighting,
            set_count: 0.0,
            context_counts: BTreeMap::new(),
        })
        .collect();

    let l = window as usize;
    let len = stream.len();
    let mut near: HashMap<u32, f64> = HashMap::new();
    for t in 0..len {
        let Some(c) = stream[t] else { continue };
        near.clear();
        let lo = t.saturating_sub(l);
        let hi = (t + l).min(len.saturating_sub(1));
        for u in lo..=hi {
            if u == t {
                continue;
            }
            if let Some(w) = stream[u] {
                *near.entry(w).or_insert(0.0) += weighting.weight(t.abs_diff(u) as u32);
            }
        }
        for js in out.iter_mut() {
            let mut weight = 1.0;
            for m in &js.set {
                match near.get(m) {
                    Some(&x) => weight *= x,
                    None => {
                        weight = 0.0;
                        break;
                    }
                }
            }
            if weight > 0.0 {
                js.set_count += weight;
                *js.context_counts.entry(c).or_insert(0.0) += weight;
            }
        }
    }
    Ok(out)
}
