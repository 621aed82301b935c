//! Relation-level diagnostics: matrix symmetry, Krackhardt hierarchy score and path lengths,
//! eigenvalue profiles, translation-vector norms and the per-relation report.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eval::{ClassifyReport, RankReport};
use super::graph::{KnowledgeGraph, RelationType};
use super::model::{KgModel, ModelKind};
use crate::error::{Error, Result};

/// Hubert-Baker symmetry statistic of the off-diagonal entries of a square matrix, in
/// `[-1, 1]`: 1 for symmetric, -1 for antisymmetric. When the off-diagonal entries have
/// zero variance the statistic is 0/0: a constant nonzero off-diagonal is exactly symmetric
/// and scores 1, an all-zero off-diagonal is undefined (`None`), as is `d < 2`.
pub fn symmetry_score(m: &DMatrix<f64>) -> Option<f64> {
    let d = m.nrows();
    if d < 2 || m.ncols() != d {
        return None;
    }
    let (mut sum, mut sum_sq, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let x = m[(i, j)];
                sum += x;
                sum_sq += x * x;
                cross += x * m[(j, i)];
            }
        }
    }
    let centre = sum * sum / (d * (d - 1)) as f64;
    let den = sum_sq - centre;
    if den.abs() <= 1e-300 || den.abs() <= 1e-14 * sum_sq {
        return (sum_sq > 0.0).then_some(1.0);
    }
    Some(((cross - centre) / den).clamp(-1.0, 1.0))
}

/// Hierarchy statistics of one relation's directed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhsReport {
    /// Fraction of reachable ordered pairs that are not mutually reachable.
    pub khs: f64,
    /// Longest shortest path over reachable pairs.
    pub max_path: usize,
    /// Mean shortest path over reachable pairs.
    pub avg_path: f64,
    /// Distinct nodes touched by the relation.
    pub nodes: usize,
    /// Distinct edges.
    pub edges: usize,
    /// Reachable ordered pairs (the closure size, including nodes on cycles reaching themselves).
    pub reachable_pairs: usize,
}

/// Krackhardt hierarchy score of relation `r` over the given triples. The closure `M` has
/// `M_ij = 1` when a directed path of length at least one leads from `i` to `j`; the score is
/// `#(M_ij and not M_ji) / #M_ij`. Path statistics use BFS distances over pairs `i != j`.
pub fn khs(triples: &[(usize, usize, usize)], r: usize) -> Result<KhsReport> {
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &(s, rr, o) in triples {
        if rr != r {
            continue;
        }
        let n = ids.len();
        let a = *ids.entry(s).or_insert(n);
        let n = ids.len();
        let b = *ids.entry(o).or_insert(n);
        edges.push((a, b));
    }
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        return Err(Error::invalid(format!("relation {r} has no edges")));
    }
    let n = ids.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
    }
    // Reachable sets with distances, one BFS per source.
    let mut reach: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        let mut found = Vec::new();
        let mut self_loop = false;
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if v == src {
                    self_loop = true;
                }
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    found.push((v, dist[v]));
                    queue.push_back(v);
                }
            }
        }
        dist[src] = usize::MAX;
        for &(v, _) in &found {
            dist[v] = usize::MAX;
        }
        if self_loop {
            found.push((src, 0));
        }
        found.sort_unstable();
        reach.push(found);
    }
    let reaches = |i: usize, j: usize| reach[i].binary_search_by_key(&j, |x| x.0).is_ok();
    let (mut total, mut oneway, mut max_path, mut path_sum, mut path_n) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for &(j, dij) in &reach[i] {
            total += 1;
            if !reaches(j, i) {
                oneway += 1;
            }
            if i != j {
                max_path = max_path.max(dij);
                path_sum += dij;
                path_n += 1;
            }
        }
    }
    Ok(KhsReport {
        khs: oneway as f64 / total as f64,
        max_path,
        avg_path: if path_n > 0 { path_sum as f64 / path_n as f64 } else { 0.0 },
        nodes: n,
        edges: edges.len(),
        reachable_pairs: total,
    })
}

/// Eigenvalue magnitudes of relation `r`'s matrix, sorted descending and scaled by the
/// largest (all zeros if the matrix is zero). Diagonal kinds (DistMult, MuRE, ComplEx) use
/// the diagonal entries (complex moduli for ComplEx); RESCAL and TuckER use the full matrix.
pub fn relation_spectrum(model: &KgModel, r: usize) -> Result<Vec<f64>> {
    let d = model.d_e;
    let mut mags: Vec<f64> = match model.kind {
        ModelKind::DistMult => model.relation(r).iter().map(|x| x.abs()).collect(),
        ModelKind::MuRE => model.relation(r)[..d].iter().map(|x| x.abs()).collect(),
        ModelKind::ComplEx => {
            let rel = model.relation(r);
            let h = d / 2;
            (0..h).map(|k| rel[k].hypot(rel[h + k])).collect()
        }
        ModelKind::Rescal | ModelKind::TuckER => {
            let m = model.relation_matrix(r).expect("kind has a relation matrix");
            m.complex_eigenvalues().iter().map(|z| z.norm()).collect()
        }
        ModelKind::TransE | ModelKind::MuReI => {
            return Err(Error::invalid(format!("{} has no relation matrix", model.kind)))
        }
    };
    mags.sort_by(|a, b| b.total_cmp(a));
    let top = mags.first().copied().unwrap_or(0.0);
    if top > 0.0 {
        mags.iter_mut().for_each(|x| *x /= top);
    }
    Ok(mags)
}

/// Euclidean norm of every relation's translation vector.
pub fn relation_vector_norms(model: &KgModel) -> Result<Vec<f64>> {
    if !model.kind.has_translation() {
        return Err(Error::invalid(format!("{} has no translation vector", model.kind)));
    }
    Ok((0..model.n_r)
        .map(|r| model.translation(r).expect("kind has translation").iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect())
}

/// Symmetry score of relation `r`'s matrix; `None` for kinds without one or undefined scores.
pub fn relation_symmetry(model: &KgModel, r: usize) -> Option<f64> {
    model.relation_matrix(r).and_then(|m| symmetry_score(&m))
}

/// One per-relation row of the diagnostic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    /// Relation name.
    pub relation: String,
    /// Relation type label.
    #[serde(rename = "type")]
    pub kind: Option<RelationType>,
    /// Share of training triples with this relation.
    pub pct_train: f64,
    /// Test triples with this relation.
    pub n_test: usize,
    /// Krackhardt hierarchy score of the training graph.
    pub khs: Option<f64>,
    /// Longest shortest path in the training graph.
    pub max_path: Option<usize>,
    /// Mean shortest path in the training graph.
    pub avg_path: Option<f64>,
    /// Raw Hits@10 on the test split.
    pub hits10: Option<f64>,
    /// Raw MRR on the test split.
    pub mrr: Option<f64>,
    /// Classification accuracy on training truths.
    pub accuracy_train: Option<f64>,
    /// Classification accuracy on held-out truths.
    pub accuracy_test: Option<f64>,
    /// Average "other" positives per test pair.
    pub other_true_avg: Option<f64>,
    /// Symmetry score of the relation matrix.
    pub symmetry: Option<f64>,
    /// Norm of the translation vector.
    pub vec_norm: Option<f64>,
    /// Normalised eigenvalue magnitudes.
    pub spectrum: Option<Vec<f64>>,
}

/// Per-relation diagnostic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgReport {
    /// Model kind the model-dependent columns come from, if any.
    pub model: Option<ModelKind>,
    /// One record per relation.
    pub relations: Vec<RelationRecord>,
}

/// Field names of [`RelationRecord`] in serialisation order.
pub const REPORT_FIELDS: [&str; 15] = [
    "relation",
    "type",
    "pct_train",
    "n_test",
    "khs",
    "max_path",
    "avg_path",
    "hits10",
    "mrr",
    "accuracy_train",
    "accuracy_test",
    "other_true_avg",
    "symmetry",
    "vec_norm",
    "spectrum",
];

/// Assembles the report from graph statistics and whatever model results are available.
pub fn build_report(
    kg: &KnowledgeGraph,
    model: Option<&KgModel>,
    rank: Option<&RankReport>,
    classify: Option<&ClassifyReport>,
) -> Result<KgReport> {
    let n_r = kg.n_relations();
    let mut train_counts = vec![0usize; n_r];
    for &(_, r, _) in &kg.train {
        train_counts[r] += 1;
    }
    let mut test_counts = vec![0usize; n_r];
    for &(_, r, _) in &kg.test {
        test_counts[r] += 1;
    }
    let norms = model.and_then(|m| relation_vector_norms(m).ok());
    let mut relations = Vec::with_capacity(n_r);
    for r in 0..n_r {
        let k = if train_counts[r] > 0 { Some(khs(&kg.train, r)?) } else { None };
        let rk = rank.and_then(|x| x.per_relation.get(r).cloned().flatten());
        let cl = classify.and_then(|x| x.per_relation.get(r).cloned().flatten());
        relations.push(RelationRecord {
            relation: kg.relations[r].clone(),
            kind: kg.relation_types[r],
            pct_train: if kg.train.is_empty() { 0.0 } else { train_counts[r] as f64 / kg.train.len() as f64 },
            n_test: test_counts[r],
            khs: k.as_ref().map(|k| k.khs),
            max_path: k.as_ref().map(|k| k.max_path),
            avg_path: k.as_ref().map(|k| k.avg_path),
            hits10: rk.as_ref().map(|s| s.hits10),
            mrr: rk.as_ref().map(|s| s.mrr),
            accuracy_train: cl.as_ref().and_then(|s| s.accuracy_train),
            accuracy_test: cl.as_ref().and_then(|s| s.accuracy_test),
            other_true_avg: cl.as_ref().and_then(|s| s.other_avg),
            symmetry: model.and_then(|m| relation_symmetry(m, r)),
            vec_norm: norms.as_ref().map(|n| n[r]),
            spectrum: model.and_then(|m| relation_spectrum(m, r).ok()),
        });
    }
    Ok(KgReport { model: model.map(|m| m.kind), relations })
}

/// Validates a JSON value against the report schema: an object with a `relations` array whose
/// records carry exactly the schema fields with the right value types.
pub fn validate_report_json(v: &serde_json::Value) -> Result<()> {
    let bad = |msg: String| Err(Error::invalid(format!("report schema: {msg}")));
    let Some(rels) = v.get("relations").and_then(|r| r.as_array()) else {
        return bad("missing `relations` array".into());
    };
    let fields = REPORT_FIELDS;
    for (i, rec) in rels.iter().enumerate() {
        let Some(obj) = rec.as_object() else { return bad(format!("record {i} is not an object")) };
        if obj.len() != fields.len() {
            return bad(format!("record {i} has {} fields, expected {}", obj.len(), fields.len()));
        }
        for f in &fields {
            let Some(x) = obj.get(*f) else { return bad(format!("record {i} lacks `{f}`")) };
            let ok = match *f {
                "relation" => x.is_string(),
                "type" => x.is_null() || matches!(x.as_str(), Some("R" | "S" | "C")),
                "n_test" => x.is_u64(),
                "max_path" => x.is_null() || x.is_u64(),
                "spectrum" => x.is_null() || x.as_array().is_some_and(|a| a.iter().all(|e| e.is_number())),
                "pct_train" => x.is_number(),
                _ => x.is_null() || x.is_number(),
            };
            if !ok {
                return bad(format!("record {i} field `{f}` has the wrong type"));
            }
        }
    }
    Ok(())
}
