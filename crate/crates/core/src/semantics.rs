//! Paraphrase and dependence error terms, exact decomposition identities for
//! PMI vectors, analogy solving with offset methods, and diagnostics relating
//! embedding geometry to probabilities.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cooccur::canonical_set;
use crate::error::{Error, Result};
use crate::factorize::{EmbeddingSet, Interaction};
use crate::pmi::{pmi_vector, MissingPolicy, ProbabilityModel};

/// Vector with per-component flags for undefined values (stored as NaN).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedVector {
    pub values: DVector<f64>,
    pub missing: Vec<bool>,
}

impl FlaggedVector {
    fn from_fn(n: usize, f: impl Fn(usize) -> Option<f64>) -> Self {
        let mut values = DVector::zeros(n);
        let mut missing = vec![false; n];
        for j in 0..n {
            match f(j) {
                Some(v) if v.is_finite() => values[j] = v,
                _ => {
                    values[j] = f64::NAN;
                    missing[j] = true;
                }
            }
        }
        Self { values, missing }
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Values, or an error naming the first undefined component.
    pub fn complete(self) -> Result<DVector<f64>> {
        match self.missing.iter().position(|&m| m) {
            None => Ok(self.values),
            Some(j) => Err(Error::MarginalUndefined(format!("component {j} is undefined (zero probability)"))),
        }
    }
}

/// Both sides of a decomposition identity and its error terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Paraphrase error `ρ`.
    pub rho: DVector<f64>,
    /// Conditional dependence error `σ` of the first set.
    pub sigma: DVector<f64>,
    /// Marginal dependence error `τ` of the first set.
    pub tau: f64,
    /// `σ` of the second set, when the identity has one.
    pub sigma_star: Option<DVector<f64>>,
    /// `τ` of the second set, when the identity has one.
    pub tau_star: Option<f64>,
    /// Combined error `ρ + σ − σ* − (τ − τ*)1`.
    pub error: DVector<f64>,
    pub lhs: DVector<f64>,
    pub rhs: DVector<f64>,
    /// `max |lhs − rhs|`.
    pub residual: f64,
}

fn set_ids(model: &ProbabilityModel, set: &[u32]) -> Result<Vec<u32>> {
    let set = canonical_set(set)?;
    let n = model.n();
    if let Some(&bad) = set.iter().find(|&&i| i as usize >= n) {
        return Err(Error::OutOfRange { id: bad as usize, size: n });
    }
    Ok(set)
}

/// `ρ^{W,W*}_j = log p(c_j|W*) − log p(c_j|W)`.
pub fn set_paraphrase_error(model: &ProbabilityModel, w: &[u32], w_star: &[u32]) -> Result<FlaggedVector> {
    let a = model.joint(&set_ids(model, w)?)?;
    let b = model.joint(&set_ids(model, w_star)?)?;
    for t in [&a, &b] {
        if !(t.p_set > 0.0) {
            return Err(Error::MarginalUndefined(format!("p({:?}) = 0", t.set)));
        }
    }
    Ok(FlaggedVector::from_fn(model.n(), |j| {
        let (x, y) = (b.p_context_given_set[j], a.p_context_given_set[j]);
        (x > 0.0 && y > 0.0).then(|| x.ln() - y.ln())
    }))
}

/// `ρ_j = log p(c_j|target) − log p(c_j|W)`.
pub fn paraphrase_error(model: &ProbabilityModel, target: u32, w: &[u32]) -> Result<FlaggedVector> {
    set_paraphrase_error(model, w, &[target])
}

/// Conditional and marginal dependence errors of `W`:
/// `σ_j = log p(W|c_j) − Σ_i log p(w_i|c_j)` and `τ = log p(W) − Σ_i log p(w_i)`.
pub fn dependence_errors(model: &ProbabilityModel, w: &[u32]) -> Result<(FlaggedVector, f64)> {
    let set = set_ids(model, w)?;
    let table = model.joint(&set)?;
    let pt = model.p_target();
    if !(table.p_set > 0.0) {
        return Err(Error::MarginalUndefined(format!("p({set:?}) = 0")));
    }
    if let Some(&i) = set.iter().find(|&&i| !(pt[i as usize] > 0.0)) {
        return Err(Error::MarginalUndefined(format!("p(w_{i}) = 0")));
    }
    let tau = table.p_set.ln() - set.iter().map(|&i| pt[i as usize].ln()).sum::<f64>();
    let sigma = FlaggedVector::from_fn(model.n(), |j| {
        let joint = table.p_set_given_context[j];
        if !(joint > 0.0) {
            return None;
        }
        let mut s = joint.ln();
        for &i in &set {
            let p = model.p_target_given_context(i, j as u32)?;
            if !(p > 0.0) {
                return None;
            }
            s -= p.ln();
        }
        Some(s)
    });
    Ok((sigma, tau))
}

fn require_positive(model: &ProbabilityModel) -> Result<()> {
    if model.has_full_support() {
        Ok(())
    } else {
        Err(Error::invalid(
            "decomposition identities need strictly positive probabilities; the model has zero cells",
        ))
    }
}

fn pmi_sum(model: &ProbabilityModel, set: &[u32]) -> Result<DVector<f64>> {
    let mut acc = DVector::zeros(model.n());
    for &i in set {
        acc += pmi_vector(model, i, MissingPolicy::Undefined)?;
    }
    Ok(acc)
}

fn report(
    rho: DVector<f64>,
    (sigma, tau): (DVector<f64>, f64),
    star: Option<(DVector<f64>, f64)>,
    lhs: DVector<f64>,
    base: DVector<f64>,
) -> DecompositionReport {
    let n = rho.len();
    let (ss, ts) = match &star {
        Some((s, t)) => (s.clone(), *t),
        None => (DVector::zeros(n), 0.0),
    };
    let error = &rho + &sigma - &ss - DVector::from_element(n, tau - ts);
    let rhs = base + &error;
    let residual = (&lhs - &rhs).amax();
    DecompositionReport {
        rho,
        sigma,
        tau,
        sigma_star: star.as_ref().map(|s| s.0.clone()),
        tau_star: star.map(|s| s.1),
        error,
        lhs,
        rhs,
        residual,
    }
}

/// Check `PMI_* = Σ_{w∈W} PMI_w + ρ + σ − τ1` for one target word.
pub fn verify_lemma1(model: &ProbabilityModel, target: u32, w: &[u32]) -> Result<DecompositionReport> {
    require_positive(model)?;
    let set = set_ids(model, w)?;
    let rho = paraphrase_error(model, target, &set)?.complete()?;
    let (sigma, tau) = dependence_errors(model, &set)?;
    let lhs = pmi_vector(model, target, MissingPolicy::Undefined)?;
    Ok(report(rho, (sigma.complete()?, tau), None, lhs, pmi_sum(model, &set)?))
}

/// Check `Σ_{W*} PMI = Σ_W PMI + ρ^{W,W*} + σ^W − σ^{W*} − (τ^W − τ^{W*})1`.
pub fn verify_lemma2(model: &ProbabilityModel, w: &[u32], w_star: &[u32]) -> Result<DecompositionReport> {
    require_positive(model)?;
    let a = set_ids(model, w)?;
    let b = set_ids(model, w_star)?;
    let rho = set_paraphrase_error(model, &a, &b)?.complete()?;
    let (sa, ta) = dependence_errors(model, &a)?;
    let (sb, tb) = dependence_errors(model, &b)?;
    let lhs = pmi_sum(model, &b)?;
    Ok(report(rho, (sa.complete()?, ta), Some((sb.complete()?, tb)), lhs, pmi_sum(model, &a)?))
}

/// Decompose the analogy "a is to a* as b is to b*":
/// `PMI_{b*} − (PMI_{a*} − PMI_a + PMI_b)` against the error terms of
/// `W = {b, a*}`, `W* = {b*, a}`.
pub fn analogy_decomposition(model: &ProbabilityModel, a: u32, a_star: u32, b: u32, b_star: u32) -> Result<DecompositionReport> {
    require_positive(model)?;
    let w = [b, a_star];
    let ws = [b_star, a];
    let mut r = verify_lemma2(model, &w, &ws)?;
    let p = |i| pmi_vector(model, i, MissingPolicy::Undefined);
    r.lhs = p(b_star)? - (p(a_star)? - p(a)? + p(b)?);
    r.rhs = r.error.clone();
    r.residual = (&r.lhs - &r.rhs).amax();
    Ok(r)
}

/// Query vector construction for analogies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyMethod {
    /// `w_b + w_{a*} − w_a`.
    #[default]
    Offset,
    /// `w_b`.
    Nn,
    /// `w_b + w_{a*}`.
    AddOnly,
    /// `w_b − w_{a*} + w_a`.
    Reverse,
    /// `w_b` plus the mean offset over a labelled pair set.
    MeanOffset,
}

impl FromStr for AnalogyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "offset" => Self::Offset,
            "nn" => Self::Nn,
            "add_only" => Self::AddOnly,
            "reverse" => Self::Reverse,
            "mean_offset" => Self::MeanOffset,
            _ => {
                return Err(Error::Usage(format!(
                    "unknown analogy method {s:?} (offset, nn, add_only, reverse, mean_offset)"
                )))
            }
        })
    }
}

impl fmt::Display for AnalogyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Offset => "offset",
            Self::Nn => "nn",
            Self::AddOnly => "add_only",
            Self::Reverse => "reverse",
            Self::MeanOffset => "mean_offset",
        })
    }
}

/// Candidate scoring metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    /// Negated Euclidean distance.
    Euclidean,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            _ => Err(Error::Usage(format!("unknown metric {s:?} (cosine, euclidean)"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cosine => "cosine",
            Self::Euclidean => "euclidean",
        })
    }
}

/// Analogy solving options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyOptions {
    pub method: AnalogyMethod,
    pub metric: Metric,
    pub interaction: Interaction,
    /// Drop the query words from the candidates.
    pub exclude: bool,
}

impl Default for AnalogyOptions {
    fn default() -> Self {
        Self {
            method: AnalogyMethod::Offset,
            metric: Metric::Cosine,
            interaction: Interaction::WW,
            exclude: true,
        }
    }
}

/// Precomputed query and candidate matrices for repeated analogy queries.
///
/// Queries are built from the left matrix of the interaction and scored
/// against the columns of the right matrix.
#[derive(Debug, Clone)]
pub struct AnalogySolver {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    right_norms: DVector<f64>,
    pub options: AnalogyOptions,
}

impl AnalogySolver {
    pub fn new(set: &EmbeddingSet, options: AnalogyOptions) -> Result<Self> {
        let (l, r) = set.interaction(options.interaction)?;
        let right = r.into_owned();
        let right_norms = DVector::from_iterator(right.ncols(), right.column_iter().map(|c| c.norm()));
        Ok(Self {
            left: l.into_owned(),
            right,
            right_norms,
            options,
        })
    }

    pub fn n(&self) -> usize {
        self.left.ncols()
    }

    /// Mean of `w_{x*} − w_x` over labelled pairs.
    pub fn mean_offset(&self, pairs: &[(usize, usize)]) -> Result<DVector<f64>> {
        if pairs.is_empty() {
            return Err(Error::invalid("mean offset needs at least one labelled pair"));
        }
        let mut acc = DVector::zeros(self.left.nrows());
        for &(x, xs) in pairs {
            self.check(x)?;
            self.check(xs)?;
            acc += self.left.column(xs) - self.left.column(x);
        }
        Ok(acc / pairs.len() as f64)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::OutOfRange { id: i, size: self.n() });
        }
        Ok(())
    }

    /// Query vector for `a : a* :: b : ?`. `offset` is required for the
    /// mean-offset method.
    pub fn query(&self, a: usize, a_star: usize, b: usize, offset: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        for i in [a, a_star, b] {
            self.check(i)?;
        }
        let w = |i: usize| self.left.column(i).into_owned();
        Ok(match self.options.method {
            AnalogyMethod::Offset => w(b) + w(a_star) - w(a),
            AnalogyMethod::Nn => w(b),
            AnalogyMethod::AddOnly => w(b) + w(a_star),
            AnalogyMethod::Reverse => w(b) - w(a_star) + w(a),
            AnalogyMethod::MeanOffset => {
                let off = offset.ok_or_else(|| Error::invalid("mean_offset needs a labelled pair set"))?;
                w(b) + off
            }
        })
    }

    /// Score of every candidate against `q`; higher is better.
    pub fn scores(&self, q: &DVector<f64>) -> DVector<f64> {
        match self.options.metric {
            Metric::Cosine => {
                let qn = q.norm();
                let dots = self.right.tr_mul(q);
                DVector::from_iterator(
                    dots.len(),
                    dots.iter().zip(self.right_norms.iter()).map(|(&d, &rn)| {
                        if qn > 0.0 && rn > 0.0 {
                            d / (qn * rn)
                        } else {
                            0.0
                        }
                    }),
                )
            }
            Metric::Euclidean => DVector::from_iterator(
                self.right.ncols(),
                self.right.column_iter().map(|c| -(c - q).norm()),
            ),
        }
    }

    /// Top `k` candidates as `(id, score)`, best first; ties go to the lower id.
    pub fn solve(&self, a: usize, a_star: usize, b: usize, offset: Option<&DVector<f64>>, k: usize) -> Result<Vec<(usize, f64)>> {
        let q = self.query(a, a_star, b, offset)?;
        let scores = self.scores(&q);
        let excluded = |i: usize| self.options.exclude && (i == a || i == a_star || i == b);
        Ok(top_k(&scores, k, excluded))
    }
}

/// Highest `k` scores, ties broken by lower index.
pub(crate) fn top_k(scores: &DVector<f64>, k: usize, skip: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = scores.iter().enumerate().filter(|(i, _)| !skip(*i)).map(|(i, &s)| (i, s)).collect();
    let cmp = |x: &(usize, f64), y: &(usize, f64)| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand
}

/// Solve `a : a* :: b : ?` by word, returning the `k` best candidates.
/// `pairs` is the labelled pair set for the mean-offset method.
pub fn solve_analogy(
    set: &EmbeddingSet,
    a: &str,
    a_star: &str,
    b: &str,
    options: &AnalogyOptions,
    pairs: &[(String, String)],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let index = set.index();
    let lookup = |words: &[&str]| -> Result<Vec<usize>> {
        let missing: Vec<String> = words.iter().filter(|w| !index.contains_key(*w)).map(|w| w.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::OutOfVocabulary(missing));
        }
        Ok(words.iter().map(|w| index[w]).collect())
    };
    let ids = lookup(&[a, a_star, b])?;
    let solver = AnalogySolver::new(set, options.clone())?;
    let offset = if options.method == AnalogyMethod::MeanOffset {
        let mut ps = Vec::with_capacity(pairs.len());
        for (x, xs) in pairs {
            let v = lookup(&[x.as_str(), xs.as_str()])?;
            ps.push((v[0], v[1]));
        }
        Some(solver.mean_offset(&ps)?)
    } else {
        None
    };
    let top = solver.solve(ids[0], ids[1], ids[2], offset.as_ref(), k)?;
    Ok(top.into_iter().map(|(i, s)| (set.words[i].clone(), s)).collect())
}

/// `D_KL[p ‖ q]` in nats; rejects zero components of `p` or `q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Mismatch("distributions differ in length".into()));
    }
    let mut kl = 0.0;
    for (j, (&a, &b)) in p.iter().zip(q).enumerate() {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid(format!("zero probability at component {j}; KL needs strictly positive distributions")));
        }
        kl += a * (a / b).ln();
    }
    Ok(kl)
}

/// Result of the weak paraphrase projection for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakParaphrase {
    /// `D_KL[p(E|W) ‖ p(E|candidate)]`.
    pub kl_forward: f64,
    /// `D_KL[p(E|candidate) ‖ p(E|W)]`.
    pub kl_reverse: f64,
    /// `w_*ᵀĉ`.
    pub lhs: f64,
    /// `w_Wᵀĉ − KL + σ̂ − τ`.
    pub rhs: f64,
    pub residual: f64,
    /// `max |WᵀC − PMI|`; the identity needs this to be zero.
    pub fit_residual: f64,
}

fn check_alignment(model: &ProbabilityModel, set: &EmbeddingSet) -> Result<()> {
    if model.words() != set.words.as_slice() {
        return Err(Error::Mismatch("embedding and probability vocabularies differ".into()));
    }
    Ok(())
}

fn pmi_fit_residual(model: &ProbabilityModel, set: &EmbeddingSet) -> Result<f64> {
    let x = set.w().transpose() * set.require_c()?;
    let mut worst: f64 = 0.0;
    for i in 0..model.n() {
        let p = pmi_vector(model, i as u32, MissingPolicy::Undefined)?;
        for j in 0..model.n() {
            worst = worst.max((x[(i, j)] - p[j]).abs());
        }
    }
    Ok(worst)
}

/// Project onto the `p(E|W)`-weighted mean context embedding
/// `ĉ = Σ_j p(c_j|W) c_j` and compare `w_*ᵀĉ` with `w_Wᵀĉ − KL + σ̂ − τ`.
pub fn weak_paraphrase_projection(model: &ProbabilityModel, set: &EmbeddingSet, w: &[u32], candidate: u32) -> Result<WeakParaphrase> {
    check_alignment(model, set)?;
    let ids = set_ids(model, w)?;
    let c = set.require_c()?;
    let table = model.joint(&ids)?;
    let cand = model.joint(&[candidate])?;
    let q = &table.p_context_given_set;
    let kl_forward = kl_divergence(q, &cand.p_context_given_set)?;
    let kl_reverse = kl_divergence(&cand.p_context_given_set, q)?;
    let (sigma, tau) = dependence_errors(model, &ids)?;
    let sigma = sigma.complete()?;
    let c_hat = c * DVector::from_column_slice(q);
    let sigma_hat: f64 = q.iter().zip(sigma.iter()).map(|(a, b)| a * b).sum();
    let w_set: DVector<f64> = ids.iter().map(|&i| set.w().column(i as usize).into_owned()).fold(DVector::zeros(set.dim()), |a, b| a + b);
    let lhs = set.w().column(candidate as usize).dot(&c_hat);
    let rhs = w_set.dot(&c_hat) - kl_forward + sigma_hat - tau;
    Ok(WeakParaphrase {
        kl_forward,
        kl_reverse,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        fit_residual: pmi_fit_residual(model, set)?,
    })
}

/// Words minimising each KL direction against `p(E|W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlArgmin {
    /// Argmin and value of `D_KL[p(E|W) ‖ p(E|w)]`.
    pub forward: (u32, f64),
    /// Argmin and value of `D_KL[p(E|w) ‖ p(E|W)]`.
    pub reverse: (u32, f64),
}

/// Best paraphrase candidates under both KL directions. Members of `W`
/// are skipped when `exclude_members` is set.
pub fn kl_argmin(model: &ProbabilityModel, w: &[u32], exclude_members: bool) -> Result<KlArgmin> {
    let ids = set_ids(model, w)?;
    let q = model.joint(&ids)?.p_context_given_set;
    let mut fwd = (u32::MAX, f64::INFINITY);
    let mut rev = (u32::MAX, f64::INFINITY);
    for i in 0..model.n() as u32 {
        if exclude_members && ids.contains(&i) {
            continue;
        }
        let p = model.joint(&[i])?.p_context_given_set;
        let f = kl_divergence(&q, &p)?;
        let r = kl_divergence(&p, &q)?;
        if f < fwd.1 {
            fwd = (i, f);
        }
        if r < rev.1 {
            rev = (i, r);
        }
    }
    if fwd.0 == u32::MAX {
        return Err(Error::invalid("no candidate words left"));
    }
    Ok(KlArgmin { forward: fwd, reverse: rev })
}

/// `max |(w_* − w_W) − (Cᵀ)⁺(ρ + σ − τ1)|` for an embedding set that
/// factorizes the PMI matrix exactly.
pub fn projection_residual(model: &ProbabilityModel, set: &EmbeddingSet, target: u32, w: &[u32]) -> Result<f64> {
    check_alignment(model, set)?;
    let r = verify_lemma1(model, target, w)?;
    let ids = set_ids(model, w)?;
    let c = set.require_c()?;
    let pinv = c
        .transpose()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let mut lhs = set.w().column(target as usize).into_owned();
    for &i in &ids {
        lhs -= set.w().column(i as usize);
    }
    Ok((lhs - pinv * r.error).amax())
}

/// `Σ_k (w_i − w_j)_k`.
pub fn difference_sum(set: &EmbeddingSet, i: usize, j: usize) -> Result<f64> {
    let n = set.n();
    for id in [i, j] {
        if id >= n {
            return Err(Error::OutOfRange { id, size: n });
        }
    }
    Ok((set.w().column(i) - set.w().column(j)).sum())
}

/// Summary of a residual sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub count: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
}

impl ResidualSummary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut s = Self::default();
        for v in values {
            s.count += 1;
            s.mean += v;
            s.mean_abs += v.abs();
            s.max_abs = s.max_abs.max(v.abs());
        }
        if s.count > 0 {
            s.mean /= s.count as f64;
            s.mean_abs /= s.count as f64;
        }
        s
    }
}

/// Residuals of the single-embedding generative-model relations:
/// `log p(w_i) ≈ −w_iᵀc_i/2 + log p(w_i, c_i)/2` per word and
/// `log p(w_i, c_j) ≈ −(w_i − w_j)ᵀ(c_i − c_j)/2 + log(p(w_i, c_i) p(w_j, c_j))/2`
/// per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AroraReport {
    /// `(word id, residual)`.
    pub word_residuals: Vec<(u32, f64)>,
    /// `(i, j, residual)`.
    pub pair_residuals: Vec<(u32, u32, f64)>,
    /// Words without self co-occurrence.
    pub skipped_words: usize,
    /// Pairs with a zero cell.
    pub skipped_pairs: usize,
    pub word_summary: ResidualSummary,
    pub pair_summary: ResidualSummary,
}

/// Evaluate both relations; residual is left side minus right side.
pub fn arora_assumption_check(set: &EmbeddingSet, model: &ProbabilityModel, pairs: &[(u32, u32)]) -> Result<AroraReport> {
    check_alignment(model, set)?;
    let w = set.w();
    let c = set.require_c()?;
    let n = model.n();
    let pt = model.p_target();
    let self_pair = |i: u32| model.p_pair(i, i);
    let mut word_residuals = Vec::new();
    let mut skipped_words = 0;
    for i in 0..n as u32 {
        let pii = self_pair(i);
        if !(pii > 0.0) || !(pt[i as usize] > 0.0) {
            skipped_words += 1;
            continue;
        }
        let pred = -w.column(i as usize).dot(&c.column(i as usize)) / 2.0 + pii.ln() / 2.0;
        word_residuals.push((i, pt[i as usize].ln() - pred));
    }
    let mut pair_residuals = Vec::new();
    let mut skipped_pairs = 0;
    for &(i, j) in pairs {
        for id in [i, j] {
            if id as usize >= n {
                return Err(Error::OutOfRange { id: id as usize, size: n });
            }
        }
        let (pij, pii, pjj) = (model.p_pair(i, j), self_pair(i), self_pair(j));
        if !(pij > 0.0 && pii > 0.0 && pjj > 0.0) {
            skipped_pairs += 1;
            continue;
        }
        let dw = w.column(i as usize) - w.column(j as usize);
        let dc = c.column(i as usize) - c.column(j as usize);
        let pred = -dw.dot(&dc) / 2.0 + (pii.ln() + pjj.ln()) / 2.0;
        pair_residuals.push((i, j, pij.ln() - pred));
    }
    Ok(AroraReport {
        word_summary: ResidualSummary::of(word_residuals.iter().map(|r| r.1)),
        pair_summary: ResidualSummary::of(pair_residuals.iter().map(|r| r.2)),
        word_residuals,
        pair_residuals,
        skipped_words,
        skipped_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorize::{analytic_factorize_dense, ContextMatrix, LossKind};
    use crate::pmi::{enumerate_exact_distribution, ExactSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(n: usize, seed: u64) -> ProbabilityModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        enumerate_exact_distribution(&ExactSpec::random(n, 1.0, false, &mut rng).unwrap()).unwrap()
    }

    fn symmetric_exact(n: usize, seed: u64) -> ProbabilityModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        enumerate_exact_distribution(&ExactSpec::random(n, 1.0, true, &mut rng).unwrap()).unwrap()
    }

    fn pmi_dense(model: &ProbabilityModel) -> DMatrix<f64> {
        let n = model.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m.set_row(i, &pmi_vector(model, i as u32, MissingPolicy::Undefined).unwrap().transpose());
        }
        m
    }

    /// Words a, b independent given every context and marginally; x, y take
    /// the remaining mass. Contexts are uniform.
    fn independent_model() -> ProbabilityModel {
        let u = [1.0, 1.0, -1.0, -1.0];
        let v = [1.0, -1.0, 1.0, -1.0];
        let pa: Vec<f64> = u.iter().map(|x| 0.3 * (1.0 + 0.5 * x)).collect();
        let pb: Vec<f64> = v.iter().map(|x| 0.2 * (1.0 + 0.5 * x)).collect();
        let mut pair = DMatrix::zeros(4, 4);
        for c in 0..4 {
            let rest = 1.0 - pa[c] - pb[c];
            let col = [pa[c], pb[c], 0.4 * rest, 0.6 * rest];
            for i in 0..4 {
                pair[(i, c)] = col[i] * 0.25;
            }
        }
        let p_a = 0.3;
        let p_b = 0.2;
        let joint: Vec<f64> = (0..4).map(|c| pa[c] * pb[c] * 0.25 / (p_a * p_b)).collect();
        let words = ["a", "b", "x", "y"].iter().map(|s| s.to_string()).collect();
        ProbabilityModel::from_tables(words, &pair, vec![(vec![0, 1], p_a * p_b, joint)]).unwrap()
    }

    #[test]
    fn self_paraphrase_is_exactly_zero() {
        let m = exact(4, 1);
        let rho = paraphrase_error(&m, 2, &[2]).unwrap();
        assert!(rho.values.iter().all(|&v| v == 0.0));
        let r = verify_lemma1(&m, 2, &[2]).unwrap();
        assert_eq!(r.tau, 0.0);
        assert!(r.sigma.iter().all(|&v| v == 0.0));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn paraphrase_error_matches_log_ratio() {
        let m = exact(5, 2);
        let set = [1u32, 3];
        let rho = paraphrase_error(&m, 0, &set).unwrap().complete().unwrap();
        let t = m.joint(&set).unwrap();
        for j in 0..5u32 {
            let oracle = (m.p_pair(0, j) / m.p_target()[0]).ln() - t.p_context_given_set[j as usize].ln();
            assert!((rho[j as usize] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn paraphrase_error_is_antisymmetric() {
        let m = exact(5, 3);
        let a = set_paraphrase_error(&m, &[0, 1], &[2, 4]).unwrap().values;
        let b = set_paraphrase_error(&m, &[2, 4], &[0, 1]).unwrap().values;
        assert!((a + b).amax() < 1e-15);
    }

    #[test]
    fn independent_set_has_no_dependence_error() {
        let m = independent_model();
        let (sigma, tau) = dependence_errors(&m, &[0, 1]).unwrap();
        assert!(sigma.complete().unwrap().amax() < 1e-12);
        assert!(tau.abs() < 1e-12);
        let (s1, t1) = dependence_errors(&m, &[2]).unwrap();
        assert!(s1.values.iter().all(|&v| v == 0.0));
        assert_eq!(t1, 0.0);
    }

    #[test]
    fn dependence_errors_match_enumeration() {
        let m = exact(4, 4);
        let set = [0u32, 2, 3];
        let (sigma, tau) = dependence_errors(&m, &set).unwrap();
        let sigma = sigma.complete().unwrap();
        let t = m.joint(&set).unwrap();
        let pt = m.p_target();
        let oracle_tau = t.p_set.ln() - set.iter().map(|&i| pt[i as usize].ln()).sum::<f64>();
        assert!((tau - oracle_tau).abs() < 1e-12);
        for j in 0..4 {
            let pc = m.p_context()[j];
            let prod: f64 = set.iter().map(|&i| (m.p_pair(i, j as u32) / pc).ln()).sum();
            assert!((sigma[j] - ((t.p_set_given_context[j]).ln() - prod)).abs() < 1e-12);
        }
    }

    #[test]
    fn identities_hold_on_random_distributions() {
        for seed in 0..20 {
            let n = 4 + (seed as usize % 3);
            let m = exact(n, 100 + seed);
            assert!(verify_lemma1(&m, 0, &[1, 2]).unwrap().residual < 1e-10);
            assert!(verify_lemma1(&m, 3, &[0, 1, 2]).unwrap().residual < 1e-10);
            assert!(verify_lemma2(&m, &[0, 1], &[2, 3]).unwrap().residual < 1e-10);
            assert!(analogy_decomposition(&m, 0, 1, 2, 3).unwrap().residual < 1e-10);
        }
    }

    #[test]
    fn lemma2_cancels_on_equal_sets() {
        let m = exact(4, 5);
        let r = verify_lemma2(&m, &[0, 2], &[2, 0]).unwrap();
        assert!(r.error.iter().all(|&v| v == 0.0));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn lemma2_swap_negates_error() {
        let m = exact(5, 6);
        let a = verify_lemma2(&m, &[0, 1], &[3]).unwrap();
        let b = verify_lemma2(&m, &[3], &[0, 1]).unwrap();
        assert!((&a.rho + &b.rho).amax() < 1e-15);
        assert_eq!(a.sigma, b.sigma_star.clone().unwrap());
        assert_eq!(a.tau, b.tau_star.unwrap());
        assert!((a.residual - b.residual).abs() < 1e-12);
    }

    #[test]
    fn lemma1_pair_rearrangement() {
        // PMI_i + PMI_j = PMI_{ij} − σ + τ1, where PMI_{ij} = log p(c|{i,j})/p(c).
        let m = exact(5, 7);
        let (sigma, tau) = dependence_errors(&m, &[1, 4]).unwrap();
        let t = m.joint(&[1, 4]).unwrap();
        let set_pmi = DVector::from_iterator(5, (0..5).map(|j| (t.p_context_given_set[j] / m.p_context()[j]).ln()));
        let lhs = pmi_vector(&m, 1, MissingPolicy::Undefined).unwrap() + pmi_vector(&m, 4, MissingPolicy::Undefined).unwrap();
        let rhs = set_pmi - sigma.values + DVector::from_element(5, tau);
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn trivial_analogy_errors_cancel() {
        let m = exact(5, 8);
        let r = analogy_decomposition(&m, 0, 1, 0, 1).unwrap();
        assert!(r.error.iter().all(|&v| v == 0.0));
        assert!(r.tau.abs() > 1e-6);
        assert!(r.residual < 1e-14);
        let r = analogy_decomposition(&m, 2, 2, 3, 3).unwrap();
        assert!(r.lhs.amax() < 1e-14 && r.rhs.amax() < 1e-14);
    }

    #[test]
    fn empirical_zero_cells_are_refused() {
        let pair = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let m = ProbabilityModel::from_tables(vec!["a".into(), "b".into()], &pair, vec![]).unwrap();
        assert!(verify_lemma1(&m, 0, &[1]).is_err());
        let rho = paraphrase_error(&m, 0, &[1]).unwrap();
        assert_eq!(rho.n_missing(), 2);
    }

    fn set_from(m: DMatrix<f64>, c: DMatrix<f64>) -> EmbeddingSet {
        let n = m.ncols();
        EmbeddingSet::from_parts((0..n).map(|i| format!("w{i}")).collect(), m, ContextMatrix::Separate(c), LossKind::External).unwrap()
    }

    #[test]
    fn degenerate_offset_returns_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = DMatrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let set = set_from(w.clone(), w);
        let opts = AnalogyOptions { exclude: false, ..Default::default() };
        let top = solve_analogy(&set, "w1", "w1", "w3", &opts, &[], 3).unwrap();
        assert_eq!(top[0].0, "w3");
    }

    #[test]
    fn parallelogram_is_solved() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut w = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let target = w.column(1) - w.column(0) + w.column(2);
        w.set_column(3, &target);
        let set = set_from(w.clone(), w);
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let opts = AnalogyOptions { metric, ..Default::default() };
            let top = solve_analogy(&set, "w0", "w1", "w2", &opts, &[], 1).unwrap();
            assert_eq!(top[0].0, "w3");
        }
    }

    #[test]
    fn methods_build_expected_queries() {
        let w = DMatrix::from_fn(2, 4, |r, c| (r * 4 + c) as f64);
        let set = set_from(w.clone(), w.clone());
        let col = |i: usize| w.column(i).into_owned();
        for (method, expect) in [
            (AnalogyMethod::Offset, col(2) + col(1) - col(0)),
            (AnalogyMethod::Nn, col(2)),
            (AnalogyMethod::AddOnly, col(2) + col(1)),
            (AnalogyMethod::Reverse, col(2) - col(1) + col(0)),
        ] {
            let s = AnalogySolver::new(&set, AnalogyOptions { method, ..Default::default() }).unwrap();
            assert_eq!(s.query(0, 1, 2, None).unwrap(), expect);
        }
        let s = AnalogySolver::new(&set, AnalogyOptions { method: AnalogyMethod::MeanOffset, ..Default::default() }).unwrap();
        let off = s.mean_offset(&[(0, 1), (2, 3)]).unwrap();
        assert_eq!(off, (col(1) - col(0) + col(3) - col(2)) / 2.0);
        assert_eq!(s.query(0, 1, 2, Some(&off)).unwrap(), col(2) + off);
        assert!(s.query(0, 1, 2, None).is_err());
    }

    #[test]
    fn oov_query_lists_words() {
        let set = set_from(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        match solve_analogy(&set, "w0", "zz", "yy", &AnalogyOptions::default(), &[], 1).unwrap_err() {
            Error::OutOfVocabulary(ws) => assert_eq!(ws, vec!["zz".to_string(), "yy".to_string()]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn exclusion_removes_query_words() {
        let w = DMatrix::from_fn(3, 5, |r, c| ((r + 1) * (c + 2)) as f64 % 5.0);
        let set = set_from(w.clone(), w);
        let top = solve_analogy(&set, "w0", "w1", "w2", &AnalogyOptions::default(), &[], 5).unwrap();
        assert_eq!(top.len(), 2);
        assert!(top.iter().all(|(w, _)| w == "w3" || w == "w4"));
    }

    #[test]
    fn weak_paraphrase_identity_at_full_rank() {
        let m = symmetric_exact(5, 11);
        let p = pmi_dense(&m);
        let set = analytic_factorize_dense(&p, 5, m.words().to_vec()).unwrap();
        for cand in 0..5 {
            let r = weak_paraphrase_projection(&m, &set, &[0, 2], cand).unwrap();
            assert!(r.fit_residual < 1e-10);
            assert!(r.residual < 1e-8, "{r:?}");
            assert!(r.kl_forward > 0.0 && r.kl_reverse > 0.0);
        }
        let best = kl_argmin(&m, &[0, 2], false).unwrap();
        let f = weak_paraphrase_projection(&m, &set, &[0, 2], best.forward.0).unwrap();
        assert!((f.kl_forward - best.forward.1).abs() < 1e-15);
    }

    #[test]
    fn exact_paraphrase_has_zero_kl() {
        let m = exact(4, 12);
        let argmin = kl_argmin(&m, &[1], false).unwrap();
        assert_eq!(argmin.forward, (1, 0.0));
        assert_eq!(argmin.reverse, (1, 0.0));
        let other = kl_argmin(&m, &[1], true).unwrap();
        assert_ne!(other.forward.0, 1);
    }

    #[test]
    fn kl_rejects_zero_components() {
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!((kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap() - (0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
    }

    #[test]
    fn projection_preserved_at_full_rank() {
        let m = symmetric_exact(5, 13);
        let p = pmi_dense(&m);
        let set = analytic_factorize_dense(&p, 5, m.words().to_vec()).unwrap();
        assert!(projection_residual(&m, &set, 4, &[0, 1]).unwrap() < 1e-8);
        assert!(projection_residual(&m, &set, 2, &[1, 3, 4]).unwrap() < 1e-8);
    }

    #[test]
    fn difference_sum_matches_pseudo_inverse() {
        let m = symmetric_exact(5, 14);
        let p = pmi_dense(&m);
        let set = analytic_factorize_dense(&p, 5, m.words().to_vec()).unwrap();
        let cpinv = set.c().unwrap().clone().pseudo_inverse(1e-12).unwrap();
        for (i, j) in [(0, 1), (2, 4), (3, 3)] {
            let dp = (p.row(i) - p.row(j)).into_owned();
            let oracle = (dp * &cpinv).sum();
            let got = difference_sum(&set, i, j).unwrap();
            assert!((got - oracle).abs() < 1e-6);
            assert!((got + difference_sum(&set, j, i).unwrap()).abs() < 1e-15);
        }
        assert_eq!(difference_sum(&set, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn arora_word_relation_exact_under_factorization() {
        let m = symmetric_exact(5, 15);
        let p = pmi_dense(&m);
        let set = analytic_factorize_dense(&p, 5, m.words().to_vec()).unwrap();
        let r = arora_assumption_check(&set, &m, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(r.word_residuals.len(), 5);
        assert!(r.word_summary.max_abs < 1e-6);
        assert_eq!(r.pair_residuals.len(), 2);
    }

    #[test]
    fn arora_skips_words_without_self_pairs() {
        let pair = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.2]);
        let m = ProbabilityModel::from_tables(vec!["w0".into(), "w1".into()], &pair, vec![]).unwrap();
        let set = set_from(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let r = arora_assumption_check(&set, &m, &[(0, 1)]).unwrap();
        assert_eq!(r.skipped_words, 1);
        assert_eq!(r.skipped_pairs, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn identities_hold_for_any_sets(seed in any::<u64>(), n in 4usize..7, picks in proptest::collection::vec(0u32..6, 4)) {
            let m = exact(n, seed);
            let id = |k: usize| picks[k] % n as u32;
            let (a, a_star, b, b_star) = (id(0), id(1), id(2), id(3));
            let r = verify_lemma1(&m, a, &[b, (b + 1) % n as u32]).unwrap();
            prop_assert!(r.residual < 1e-10);
            if b != a_star && b_star != a {
                let r = analogy_decomposition(&m, a, a_star, b, b_star).unwrap();
                prop_assert!(r.residual < 1e-10);
            }
        }

        #[test]
        fn cosine_ranking_is_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = DMatrix::from_fn(4, 8, |_, _| rng.random_range(-1.0..1.0));
            let set = set_from(w.clone(), w);
            let scaled = set.scaled(scale);
            for metric in [Metric::Cosine, Metric::Euclidean] {
                let opts = AnalogyOptions { metric, ..Default::default() };
                let a = solve_analogy(&set, "w0", "w1", "w2", &opts, &[], 1).unwrap();
                let b = solve_analogy(&scaled, "w0", "w1", "w2", &opts, &[], 1).unwrap();
                prop_assert_eq!(&a[0].0, &b[0].0);
            }
        }
    }
}
