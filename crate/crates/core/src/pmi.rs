//! Probability estimates and (shifted) PMI values, from corpus statistics or
//! from an exactly enumerated joint distribution.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::cooccur::{canonical_set, parse_header, CooccurrenceStats, JointStats};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Tolerance on probability normalization.
pub const NORM_TOL: f64 = 1e-12;

/// Largest vocabulary accepted by [`enumerate_exact_distribution`].
pub const MAX_EXACT_WORDS: usize = 8;

/// Where a [`ProbabilityModel`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Empirical,
    Exact,
}

/// Joint probabilities of one word set `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub set: Vec<u32>,
    /// `p(W)`.
    pub p_set: f64,
    /// `p(c_j | W)`, dense over contexts.
    pub p_context_given_set: Vec<f64>,
    /// `p(W | c_j)`, dense over contexts.
    pub p_set_given_context: Vec<f64>,
}

/// Target, context, pair and word-set probabilities over one vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityModel {
    words: Vec<String>,
    p_target: Vec<f64>,
    p_context: Vec<f64>,
    p_pair: SparseMatrix,
    joints: BTreeMap<Vec<u32>, JointTable>,
    source: Source,
}

fn check_normalized(what: &str, total: f64) -> Result<()> {
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Estimate probabilities from corpus counts: every count divided by `D`,
/// joint tables normalized the same way.
pub fn estimate_probabilities(stats: &CooccurrenceStats, joints: &[JointStats], words: Vec<String>) -> Result<ProbabilityModel> {
    let d = stats.total_weight();
    if !(d > 0.0) {
        return Err(Error::invalid("cannot estimate probabilities: D = 0"));
    }
    if words.len() != stats.n() {
        return Err(Error::Mismatch(format!(
            "{} words for statistics over {} ids",
            words.len(),
            stats.n()
        )));
    }
    let n = stats.n();
    let trip = stats.entries().into_iter().map(|(i, j, w)| (i, j, w / d)).collect();
    let p_pair = SparseMatrix::from_triplets(n, n, trip);
    let p_target: Vec<f64> = stats.target_weights().iter().map(|w| w / d).collect();
    let context_weight = stats.context_weights();
    let p_context: Vec<f64> = context_weight.iter().map(|w| w / d).collect();
    let mut tables = BTreeMap::new();
    for js in joints {
        let set = canonical_set(&js.set)?;
        let mut given_set = vec![0.0; n];
        let mut given_ctx = vec![0.0; n];
        for (&c, &v) in &js.context_counts {
            if js.set_count > 0.0 {
                given_set[c as usize] = v / js.set_count;
            }
            if context_weight[c as usize] > 0.0 {
                given_ctx[c as usize] = v / context_weight[c as usize];
            }
        }
        tables.insert(
            set.clone(),
            JointTable {
                set,
                p_set: js.set_count / d,
                p_context_given_set: given_set,
                p_set_given_context: given_ctx,
            },
        );
    }
    Ok(ProbabilityModel {
        words,
        p_target,
        p_context,
        p_pair,
        joints: tables,
        source: Source::Empirical,
    })
}

/// One outcome of an exact window distribution: the centre context and the
/// set of target words observed around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub context: usize,
    pub targets: Vec<usize>,
    pub p: f64,
}

/// Joint distribution over (context, target set) outcomes for a small
/// vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSpec {
    pub words: Vec<String>,
    pub outcomes: Vec<Outcome>,
}

impl ExactSpec {
    /// Strictly positive spec over every (context, non-empty target set),
    /// with Dirichlet(`alpha`) outcome probabilities.
    ///
    /// When `symmetric` is set, singleton outcomes are adjusted so the
    /// induced pair table is symmetric.
    pub fn random<R: Rng + ?Sized>(n: usize, alpha: f64, symmetric: bool, rng: &mut R) -> Result<Self> {
        if n == 0 || n > MAX_EXACT_WORDS {
            return Err(Error::invalid(format!("exact specs need 1..={MAX_EXACT_WORDS} words")));
        }
        let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let mut outcomes = Vec::new();
        for c in 0..n {
            for mask in 1u32..(1 << n) {
                let targets: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                // Floor keeps every outcome comfortably positive.
                let p = gamma.sample(rng) + 1e-3;
                outcomes.push(Outcome { context: c, targets, p });
            }
        }
        if symmetric {
            // A[i][c]: pair mass from multi-word outcomes.
            let mut a = vec![vec![0.0; n]; n];
            for o in outcomes.iter().filter(|o| o.targets.len() > 1) {
                for &i in &o.targets {
                    a[i][o.context] += o.p;
                }
            }
            for o in outcomes.iter_mut().filter(|o| o.targets.len() == 1) {
                let i = o.targets[0];
                let c = o.context;
                let m = a[i][c].max(a[c][i]);
                // Symmetric target M[i][c] = max(A[i][c], A[c][i]) + s[i][c] with s symmetric.
                let s = 0.1 + ((i * 31 + c * 31 + i * c) % 7) as f64 * 0.05;
                o.p = m + s - a[i][c];
            }
        }
        let total: f64 = outcomes.iter().map(|o| o.p).sum();
        for o in &mut outcomes {
            o.p /= total;
        }
        Ok(Self { words, outcomes })
    }
}

/// Enumerate the pair layer and every word-set table of an exact spec.
///
/// With `Z = Σ P(c, X)|X|`: `p(w_i, c) = Σ_{X∋i} P(c, X)/Z`;
/// `p(W, c) = Σ_{X⊇W} P(c, X)/Z`; `p(W) = Σ_c p(W, c)`;
/// `p(c|W) = p(W, c)/p(W)`; `p(W|c) = p(W, c)/p(c)`. Tables are registered
/// for every subset of size at least two.
pub fn enumerate_exact_distribution(spec: &ExactSpec) -> Result<ProbabilityModel> {
    let n = spec.words.len();
    if n == 0 || n > MAX_EXACT_WORDS {
        return Err(Error::invalid(format!("exact specs need 1..={MAX_EXACT_WORDS} words, got {n}")));
    }
    let mut total = 0.0;
    for o in &spec.outcomes {
        if !(o.p >= 0.0) || !o.p.is_finite() {
            return Err(Error::invalid(format!("outcome probability {} is not a probability", o.p)));
        }
        if o.context >= n {
            return Err(Error::OutOfRange { id: o.context, size: n });
        }
        let set: Vec<u32> = o.targets.iter().map(|&t| t as u32).collect();
        canonical_set(&set)?;
        if let Some(&bad) = o.targets.iter().find(|&&t| t >= n) {
            return Err(Error::OutOfRange { id: bad, size: n });
        }
        total += o.p;
    }
    check_normalized("exact spec", total)?;

    let z: f64 = spec.outcomes.iter().map(|o| o.p * o.targets.len() as f64).sum();
    // mass[mask][c] = Σ_{X ⊇ mask} P(c, X) / Z
    let full = 1usize << n;
    let mut mass = vec![vec![0.0; n]; full];
    for o in &spec.outcomes {
        let xmask: usize = o.targets.iter().map(|&t| 1usize << t).sum();
        let v = o.p / z;
        // Enumerate every non-empty submask of xmask.
        let mut sub = xmask;
        while sub > 0 {
            mass[sub][o.context] += v;
            sub = (sub - 1) & xmask;
        }
    }
    let mut pair = DMatrix::zeros(n, n);
    for i in 0..n {
        for c in 0..n {
            pair[(i, c)] = mass[1 << i][c];
        }
    }
    let p_target: Vec<f64> = (0..n).map(|i| pair.row(i).sum()).collect();
    let p_context: Vec<f64> = (0..n).map(|c| pair.column(c).sum()).collect();
    let mut joints = BTreeMap::new();
    for mask in 1..full {
        if (mask as u32).count_ones() < 2 {
            continue;
        }
        let set: Vec<u32> = (0..n as u32).filter(|i| mask & (1 << i) != 0).collect();
        let p_set: f64 = mass[mask].iter().sum();
        let given_set = mass[mask]
            .iter()
            .map(|&v| if p_set > 0.0 { v / p_set } else { 0.0 })
            .collect();
        let given_ctx = mass[mask]
            .iter()
            .zip(&p_context)
            .map(|(&v, &pc)| if pc > 0.0 { v / pc } else { 0.0 })
            .collect();
        joints.insert(
            set.clone(),
            JointTable {
                set,
                p_set,
                p_context_given_set: given_set,
                p_set_given_context: given_ctx,
            },
        );
    }
    Ok(ProbabilityModel {
        words: spec.words.clone(),
        p_target,
        p_context,
        p_pair: SparseMatrix::from_dense_where(&pair, |v| v > 0.0),
        joints,
        source: Source::Exact,
    })
}

impl ProbabilityModel {
    /// Exact model from a dense joint pair table and explicit word-set
    /// tables `(W, p(W), p(c|W))`. `p(W|c)` is derived by Bayes' rule.
    pub fn from_tables(words: Vec<String>, pair: &DMatrix<f64>, joints: Vec<(Vec<u32>, f64, Vec<f64>)>) -> Result<Self> {
        let n = words.len();
        if pair.nrows() != n || pair.ncols() != n {
            return Err(Error::Mismatch(format!("pair table is {}x{}, vocabulary {n}", pair.nrows(), pair.ncols())));
        }
        if pair.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("pair table has negative or NaN entries"));
        }
        check_normalized("pair table", pair.sum())?;
        let p_target: Vec<f64> = (0..n).map(|i| pair.row(i).sum()).collect();
        let p_context: Vec<f64> = (0..n).map(|c| pair.column(c).sum()).collect();
        let mut tables = BTreeMap::new();
        for (set, p_set, given_set) in joints {
            let set = canonical_set(&set)?;
            if given_set.len() != n {
                return Err(Error::Mismatch("conditional table length differs from vocabulary".into()));
            }
            check_normalized("p(c|W)", given_set.iter().sum())?;
            let given_ctx = given_set
                .iter()
                .zip(&p_context)
                .map(|(&g, &pc)| if pc > 0.0 { g * p_set / pc } else { 0.0 })
                .collect();
            tables.insert(
                set.clone(),
                JointTable {
                    set,
                    p_set,
                    p_context_given_set: given_set,
                    p_set_given_context: given_ctx,
                },
            );
        }
        Ok(Self {
            words,
            p_target,
            p_context,
            p_pair: SparseMatrix::from_dense_where(pair, |v| v > 0.0),
            joints: tables,
            source: Source::Exact,
        })
    }

    pub fn n(&self) -> usize {
        self.p_target.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Id of a word, or an out-of-vocabulary error.
    pub fn word_id(&self, w: &str) -> Result<u32> {
        self.words
            .iter()
            .position(|x| x == w)
            .map(|i| i as u32)
            .ok_or_else(|| Error::OutOfVocabulary(vec![w.to_owned()]))
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn p_target(&self) -> &[f64] {
        &self.p_target
    }

    pub fn p_context(&self) -> &[f64] {
        &self.p_context
    }

    pub fn p_pair_matrix(&self) -> &SparseMatrix {
        &self.p_pair
    }

    /// `p(w_i, c_j)`.
    pub fn p_pair(&self, i: u32, j: u32) -> f64 {
        self.p_pair.get(i as usize, j as usize).unwrap_or(0.0)
    }

    /// `p(c_j | w_i)`; `None` when `p(w_i) = 0`.
    pub fn p_context_given_target(&self, i: u32, j: u32) -> Option<f64> {
        let pt = self.p_target[i as usize];
        (pt > 0.0).then(|| self.p_pair(i, j) / pt)
    }

    /// `p(w_i | c_j)`; `None` when `p(c_j) = 0`.
    pub fn p_target_given_context(&self, i: u32, j: u32) -> Option<f64> {
        let pc = self.p_context[j as usize];
        (pc > 0.0).then(|| self.p_pair(i, j) / pc)
    }

    /// Registered word sets (size two or more).
    pub fn registered_sets(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.joints.keys()
    }

    /// Joint table for `set`. Singletons are read off the pair layer.
    pub fn joint(&self, set: &[u32]) -> Result<JointTable> {
        let set = canonical_set(set)?;
        let n = self.n();
        if let Some(&bad) = set.iter().find(|&&i| i as usize >= n) {
            return Err(Error::OutOfRange { id: bad as usize, size: n });
        }
        if set.len() == 1 {
            let i = set[0];
            let p_set = self.p_target[i as usize];
            let given_set = (0..n as u32)
                .map(|j| self.p_context_given_target(i, j).unwrap_or(0.0))
                .collect();
            let given_ctx = (0..n as u32)
                .map(|j| self.p_target_given_context(i, j).unwrap_or(0.0))
                .collect();
            return Ok(JointTable {
                set,
                p_set,
                p_context_given_set: given_set,
                p_set_given_context: given_ctx,
            });
        }
        self.joints
            .get(&set)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("word set {set:?} is not registered in the model")))
    }

    /// True when every pair, marginal and registered joint probability is
    /// strictly positive.
    pub fn has_full_support(&self) -> bool {
        let n = self.n();
        self.p_pair.nnz() == n * n
            && self.p_pair.iter().all(|(_, _, v)| v > 0.0)
            && self.joints.values().all(|t| t.p_set > 0.0 && t.p_context_given_set.iter().all(|&v| v > 0.0))
    }

    /// Check the normalization invariants.
    pub fn validate(&self) -> Result<()> {
        check_normalized("p_target", self.p_target.iter().sum())?;
        check_normalized("p_context", self.p_context.iter().sum())?;
        check_normalized("p_pair", self.p_pair.sum())?;
        for (i, &pt) in self.p_target.iter().enumerate() {
            if pt > 0.0 {
                let (_, vals) = self.p_pair.row(i);
                check_normalized("p(c|w)", vals.iter().sum::<f64>() / pt)?;
            }
        }
        for t in self.joints.values() {
            if t.p_set > 0.0 {
                check_normalized("p(c|W)", t.p_context_given_set.iter().sum())?;
            }
        }
        Ok(())
    }
}

/// `PMI(w_i, c_j) − log k`. `Ok(None)` when `p(w_i, c_j) = 0`.
pub fn pmi_value(model: &ProbabilityModel, i: u32, j: u32, k: f64) -> Result<Option<f64>> {
    let n = model.n();
    for id in [i, j] {
        if id as usize >= n {
            return Err(Error::OutOfRange { id: id as usize, size: n });
        }
    }
    let pt = model.p_target[i as usize];
    let pc = model.p_context[j as usize];
    if pt <= 0.0 {
        return Err(Error::MarginalUndefined(format!("p(w_{i}) = 0")));
    }
    if pc <= 0.0 {
        return Err(Error::MarginalUndefined(format!("p(c_{j}) = 0")));
    }
    let pij = model.p_pair(i, j);
    if pij <= 0.0 {
        return Ok(None);
    }
    Ok(Some(pij.ln() - pt.ln() - pc.ln() - k.ln()))
}

/// Treatment of cells with `p(w_i, c_j) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Substitute a fixed value.
    Sentinel(f64),
    /// Leave the cell undefined.
    Undefined,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        MissingPolicy::Sentinel(-1.0)
    }
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissingPolicy::Sentinel(v) => write!(f, "sentinel:{v}"),
            MissingPolicy::Undefined => f.write_str("undefined"),
        }
    }
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "undefined" {
            return Ok(MissingPolicy::Undefined);
        }
        let v = s
            .strip_prefix("sentinel:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Usage(format!("missing policy must be `undefined` or `sentinel:<v>`, got {s:?}")))?;
        Ok(MissingPolicy::Sentinel(v))
    }
}

/// Shifted PMI values over an `n × n` grid with an explicit missing policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiMatrix {
    n: usize,
    values: SparseMatrix,
    /// `log k`; zero when unshifted.
    shift: f64,
    policy: MissingPolicy,
}

/// Build the PMI matrix of `model`, shifted by `log k`.
pub fn pmi_matrix(model: &ProbabilityModel, k: f64, policy: MissingPolicy) -> Result<PmiMatrix> {
    if !(k > 0.0) {
        return Err(Error::invalid("shift k must be positive"));
    }
    let lk = k.ln();
    let n = model.n();
    let mut trip = Vec::with_capacity(model.p_pair.nnz());
    for (i, j, pij) in model.p_pair.iter() {
        if pij > 0.0 {
            let pt = model.p_target[i];
            let pc = model.p_context[j];
            trip.push((i as u32, j as u32, pij.ln() - pt.ln() - pc.ln() - lk));
        }
    }
    Ok(PmiMatrix {
        n,
        values: SparseMatrix::from_triplets(n, n, trip),
        shift: lk,
        policy,
    })
}

impl PmiMatrix {
    /// Fully defined matrix from dense values.
    pub fn from_dense(m: &DMatrix<f64>, shift: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("PMI matrix must be square"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PMI matrix has non-finite entries"));
        }
        Ok(Self {
            n: m.nrows(),
            values: SparseMatrix::from_dense_where(m, |_| true),
            shift,
            policy: MissingPolicy::Undefined,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn policy(&self) -> MissingPolicy {
        self.policy
    }

    /// Same values under a different missing policy.
    pub fn with_policy(&self, policy: MissingPolicy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }

    /// Number of defined (non-missing) cells.
    pub fn n_defined(&self) -> usize {
        self.values.nnz()
    }

    pub fn defined_entries(&self) -> &SparseMatrix {
        &self.values
    }

    /// Value at `(i, j)` after applying the missing policy.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        match (self.values.get(i, j), self.policy) {
            (Some(v), _) => Some(v),
            (None, MissingPolicy::Sentinel(s)) => Some(s),
            (None, MissingPolicy::Undefined) => None,
        }
    }

    /// True when every cell has a value under the policy.
    pub fn is_complete(&self) -> bool {
        matches!(self.policy, MissingPolicy::Sentinel(_)) || self.values.nnz() == self.n * self.n
    }

    /// Dense matrix; fails when undefined cells remain.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self.policy {
            MissingPolicy::Sentinel(s) => Ok(self.values.to_dense(s)),
            MissingPolicy::Undefined if self.is_complete() => Ok(self.values.to_dense(0.0)),
            MissingPolicy::Undefined => Err(Error::invalid(format!(
                "{} undefined PMI cells; choose a sentinel policy",
                self.n * self.n - self.values.nnz()
            ))),
        }
    }

    /// Positive PMI: `max(0, ·)` on every cell; missing cells become 0.
    pub fn ppmi(&self) -> Self {
        Self {
            n: self.n,
            values: self.values.map_values(|v| v.max(0.0)),
            shift: self.shift,
            policy: MissingPolicy::Sentinel(0.0),
        }
    }

    /// Largest `|P_ij − P_ji|` over cells defined in both positions.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.values.iter() {
            match self.get(j, i) {
                Some(w) => worst = worst.max((v - w).abs()),
                None => return f64::INFINITY,
            }
        }
        worst
    }

    /// Write `i<TAB>j<TAB>value` for defined cells, sorted, after a header.
    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let w = |e| Error::io(path, e);
        writeln!(out, "# shift={} policy={} n={}", self.shift, self.policy, self.n).map_err(w)?;
        for (i, j, v) in self.values.iter() {
            writeln!(out, "{i}\t{j}\t{v}").map_err(w)?;
        }
        out.flush().map_err(w)
    }

    /// Read the format written by [`save_tsv`](Self::save_tsv).
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let f = parse_header(header).map_err(|m| Error::parse(path, 1, m))?;
        let field = |k: &str| f.get(k).ok_or_else(|| Error::parse(path, 1, format!("header lacks `{k}`")));
        let shift: f64 = field("shift")?.parse().map_err(|_| Error::parse(path, 1, "bad shift"))?;
        let policy: MissingPolicy = field("policy")?.parse().map_err(|_| Error::parse(path, 1, "bad policy"))?;
        let n: usize = field("n")?.parse().map_err(|_| Error::parse(path, 1, "bad n"))?;
        let mut trip = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::parse(path, lineno + 1, m.to_owned());
            let mut it = line.split('\t');
            let i: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad row id"))?;
            let j: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad column id"))?;
            let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad value"))?;
            if i as usize >= n || j as usize >= n {
                return Err(bad("id out of range"));
            }
            trip.push((i, j, v));
        }
        Ok(Self {
            n,
            values: SparseMatrix::from_triplets(n, n, trip),
            shift,
            policy,
        })
    }
}

/// PMI vector `p^i = log p(E|w_i)/p(E)`. Missing components follow
/// `policy`; undefined ones are NaN.
pub fn pmi_vector(model: &ProbabilityModel, i: u32, policy: MissingPolicy) -> Result<DVector<f64>> {
    let n = model.n();
    if i as usize >= n {
        return Err(Error::OutOfRange { id: i as usize, size: n });
    }
    if model.p_target[i as usize] <= 0.0 {
        return Err(Error::MarginalUndefined(format!("p(w_{i}) = 0")));
    }
    let mut v = DVector::zeros(n);
    for j in 0..n as u32 {
        v[j as usize] = match pmi_value(model, i, j, 1.0) {
            Ok(Some(x)) => x,
            Ok(None) | Err(Error::MarginalUndefined(_)) => match policy {
                MissingPolicy::Sentinel(s) => s,
                MissingPolicy::Undefined => f64::NAN,
            },
            Err(e) => return Err(e),
        };
    }
    Ok(v)
}

/// Raise a distribution to `power` and renormalize.
pub fn distort(p: &[f64], power: f64) -> Vec<f64> {
    let raised: Vec<f64> = p.iter().map(|&x| if x > 0.0 { x.powf(power) } else { 0.0 }).collect();
    let total: f64 = raised.iter().sum();
    raised.iter().map(|x| x / total).collect()
}
