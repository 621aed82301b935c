//! Acceptance suite: one PASS/FAIL (or BLOCKED) line per criterion.
//!
//! Criteria that need external datasets read them from `SEMVEC_DATA`:
//!
//! * `$SEMVEC_DATA/text8/text8` plus `$SEMVEC_DATA/text8/{relatedness,similarity}.txt` and
//!   `$SEMVEC_DATA/text8/analogy.txt` for the word-embedding reproduction;
//! * `$SEMVEC_DATA/WN18RR/{train,valid,test}.txt` for the knowledge-graph criteria.
//!
//! Without them the data-gated criteria print `BLOCKED`. The multi-hour training criteria
//! run only under `cargo test --test acceptance -- --ignored`; trained models are cached in
//! `$SEMVEC_WORK` (default `target/acceptance-work`) and shared between criteria.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semvec::cli::ops::{build_vocab, compute_pmi, count_pairs};
use semvec::corpus::Weighting;
use semvec::factorize::{
    analytic_factorize_dense, interaction_identities, lsq_gradient, lsq_loss, sgns_gradient, sgns_loss, SgnsTargets,
};
use semvec::kgraph::{
    builtin_relation_types, classify_eval, khs, rank_eval, relation_spectrum, relation_symmetry,
    relation_vector_norms, train_kg, KgModel, KgTrainConfig, KnowledgeGraph, ModelKind, RankOptions, RelationType,
    Split, TiePolicy,
};
use semvec::pmi::{enumerate_exact_distribution, ExactSpec, MissingPolicy};
use semvec::semantics::{analogy_decomposition, verify_lemma1, verify_lemma2};
use semvec::surface::check_properties_over;

/// Prints the verdict line and fails the test on FAIL.
fn verdict(id: &str, ok: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn blocked(id: &str, why: &str) {
    println!("BLOCKED criterion {id}: {why}");
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("SEMVEC_DATA").map(PathBuf::from)
}

fn work_dir() -> PathBuf {
    std::env::var_os("SEMVEC_WORK")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/acceptance-work"))
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)` for one parameterization.
fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn central_diff(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn random_matrix(r: usize, c: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn distinct(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut v: Vec<u32> = (0..n as u32).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        v.swap(i, j);
    }
    v.truncate(k);
    v
}

#[test]
fn criterion_1_identity_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_identity, mut worst_normal, mut worst_origin) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sign_failures, mut closure_failures, mut points) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(4..=6);
        let spec = ExactSpec::random(n, 1.0, false, &mut rng).unwrap();
        let model = enumerate_exact_distribution(&spec).unwrap();
        let ids = distinct(n, 4, &mut rng);
        let l1 = verify_lemma1(&model, ids[0], &ids[1..3]).unwrap();
        let l2 = verify_lemma2(&model, &ids[0..2], &ids[2..4]).unwrap();
        let an = analogy_decomposition(&model, ids[0], ids[1], ids[2], ids[3]).unwrap();
        worst_identity = worst_identity.max(l1.residual).max(l2.residual).max(an.residual);

        let p = nalgebra::DVector::from_column_slice(model.p_context());
        let rep = check_properties_over(&p, 10, &mut rng).unwrap();
        worst_origin = worst_origin.max(rep.origin_residual);
        worst_normal = worst_normal.max(rep.max_normal_residual);
        sign_failures += rep.orthant_failures;
        closure_failures += rep.closure_asymmetry_failures;
        points += 2 * rep.samples;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_identity < 1e-10
        && worst_origin < 1e-8
        && worst_normal < 1e-8
        && sign_failures == 0
        && closure_failures == 0
        && secs < 60.0;
    verdict(
        "1",
        ok,
        format!(
            "200 distributions: max identity residual {worst_identity:.2e}, origin {worst_origin:.2e}, \
             normal {worst_normal:.2e}, sign failures {sign_failures}/{points}, closure asymmetries {closure_failures}, {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_2_gradient_checks() {
    let start = Instant::now();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: HashMap<String, f64> = HashMap::new();
    let mut note = |name: &str, e: f64| {
        let w = worst.entry(name.to_string()).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..50 {
        let n = rng.random_range(4..=6);
        let model = enumerate_exact_distribution(&ExactSpec::random(n, 1.0, false, &mut rng).unwrap()).unwrap();
        let t = SgnsTargets::from_model(&model, 5.0, true).unwrap();
        let d = 3;
        let w = random_matrix(d, n, 1.0, &mut rng);
        let c = random_matrix(d, n, 1.0, &mut rng);
        let (gw, gc) = sgns_gradient(&w, &c, &t);
        let fw = central_diff(|x| sgns_loss(x, &c, &t), &w, h);
        let fc = central_diff(|x| sgns_loss(&w, x, &t), &c, h);
        note("sgns", vec_rel_err(&[gw.as_slice(), gc.as_slice()].concat(), &[fw, fc].concat()));

        let p = random_matrix(n, n, 2.0, &mut rng);
        let (gw, gc) = lsq_gradient(&w, &c, &p);
        let fw = central_diff(|x| lsq_loss(x, &c, &p), &w, h);
        let fc = central_diff(|x| lsq_loss(&w, x, &p), &c, h);
        note("lsq", vec_rel_err(&[gw.as_slice(), gc.as_slice()].concat(), &[fw, fc].concat()));

        for kind in ModelKind::ALL {
            let mut m = KgModel::zeros(kind, 6, 3, 4, 3).unwrap();
            m.randomize(1.0, &mut rng);
            let (s, r, o) = (rng.random_range(0..6), rng.random_range(0..3), rng.random_range(0..6));
            let mut g = vec![0.0; m.params.len()];
            m.accumulate_gradient(s, r, o, 1.0, &mut g);
            let mut q = m.clone();
            let fd: Vec<f64> = (0..m.params.len())
                .map(|i| {
                    let x = m.params[i];
                    q.params[i] = x + h;
                    let up = q.score(s, r, o);
                    q.params[i] = x - h;
                    let dn = q.score(s, r, o);
                    q.params[i] = x;
                    (up - dn) / (2.0 * h)
                })
                .collect();
            note(&kind.to_string(), vec_rel_err(&g, &fd));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.values().copied().fold(0.0, f64::max);
    let mut names: Vec<_> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    names.sort();
    verdict("2", max < 1e-4 && secs < 60.0, format!("max relative error {max:.2e} over 50 draws each ({}); {secs:.1}s", names.join(", ")));
}

/// Best rank-`d` Frobenius error from singular values, independent of the eigen path.
fn svd_truncation_error(p: &DMatrix<f64>, d: usize) -> f64 {
    let mut s: Vec<f64> = p.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s[d..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn criterion_3_eckart_young_and_interactions() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, d) = (50, 10);
    let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let (mut worst_opt, mut worst_id) = (0.0f64, 0.0f64);
    let mut sign_rows_ok = true;
    for _ in 0..20 {
        let a = random_matrix(n, n, 1.0, &mut rng);
        let p = (&a + a.transpose()) * 0.5;
        let set = analytic_factorize_dense(&p, d, words.clone()).unwrap();
        let (w, c) = (set.w(), set.c().unwrap());
        let err = (&p - w.transpose() * c).norm();
        worst_opt = worst_opt.max((err - svd_truncation_error(&p, d)).abs());
        for k in 0..d {
            let (wr, cr) = (w.row(k), c.row(k));
            sign_rows_ok &= wr == cr || wr == -cr;
        }
        for i in 0..n {
            for j in 0..n {
                let r = interaction_identities(&set, &p, i, j).unwrap();
                worst_id = worst_id.max(r.residual_wc).max(r.residual_ww).max(r.residual_aa);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "3",
        worst_opt < 1e-8 && worst_id < 1e-8 && sign_rows_ok && secs < 60.0,
        format!(
            "20 matrices 50x50, d=10: |err - SVD optimum| {worst_opt:.2e}, rows C=±W {sign_rows_ok}, \
             interaction identities {worst_id:.2e}, {secs:.1}s"
        ),
    );
}

/// Exhaustive ranking of one query; pessimistic ties, optional filtering.
fn brute_hits10(m: &KgModel, known: &HashSet<(usize, usize, usize)>, t: (usize, usize, usize), filtered: bool) -> usize {
    let (s, r, o) = t;
    let truth = m.score(s, r, o);
    let mut hits = 0;
    for object_side in [true, false] {
        let mut rank = 1;
        for x in 0..m.n_e {
            let cand = if object_side { (s, r, x) } else { (x, r, o) };
            if cand == t || (filtered && known.contains(&cand)) {
                continue;
            }
            if m.score(cand.0, cand.1, cand.2) >= truth {
                rank += 1;
            }
        }
        hits += (rank <= 10) as usize;
    }
    hits
}

#[test]
fn criterion_9_small_instance_oracles() {
    // Knowledge-graph half: 30 entities, per-triple Hits@10 against exhaustive ranking.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut triples = HashSet::new();
    while triples.len() < 90 {
        triples.insert((rng.random_range(0..30), rng.random_range(0..3), rng.random_range(0..30)));
    }
    let mut triples: Vec<_> = triples.into_iter().collect();
    triples.sort();
    for i in (1..triples.len()).rev() {
        triples.swap(i, rng.random_range(0..=i));
    }
    let kg = KnowledgeGraph {
        entities: (0..30).map(|i| format!("e{i}")).collect(),
        relations: (0..3).map(|i| format!("r{i}")).collect(),
        train: triples[..60].to_vec(),
        valid: vec![],
        test: triples[60..].to_vec(),
        relation_types: vec![None; 3],
    };
    let known: HashSet<_> = triples.iter().copied().collect();
    let mut mismatches = 0;
    let mut checked = 0;
    for kind in ModelKind::ALL {
        let m = KgModel::init(kind, 30, 3, 4, 4, rng.random()).unwrap();
        for filtered in [false, true] {
            let mut prev = 0usize;
            for (k, &t) in kg.test.iter().enumerate() {
                let opts = RankOptions { ties: TiePolicy::Pessimistic, filtered, limit: Some(k + 1) };
                let o = rank_eval(&m, &kg, Split::Test, &opts).unwrap().overall;
                let cum = (o.hits10 * o.queries as f64).round() as usize;
                mismatches += (cum - prev != brute_hits10(&m, &known, t, filtered)) as usize;
                prev = cum;
                checked += 1;
            }
        }
    }

    // Corpus half: 20 alternating tokens, counts and PMI enumerated by hand.
    //
    // Window 1: the 19 adjacent pairs are all a-b, so #(a,b) = #(b,a) = 19, D = 38,
    // #(a) = #(b) = 19 and PMI(a,b) = log(19 * 38 / 19^2) = log 2.
    // Window 3 adds 18 distance-2 pairs (9 a-a, 9 b-b, each counted both ways) and
    // 17 distance-3 a-b pairs: #(a,b) = 36, #(a,a) = #(b,b) = 18, D = 108, so
    // PMI(a,b) = log(4/3) and PMI(a,a) = log(2/3).
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.txt");
    std::fs::write(&input, "a b ".repeat(10)).unwrap();
    let dict = build_vocab(&input, 1).unwrap();
    let (a, b) = (dict.id("a").unwrap(), dict.id("b").unwrap());
    let (s1, _) = count_pairs(&input, &dict, 1, Weighting::Uniform, None, 0).unwrap();
    let (s3, _) = count_pairs(&input, &dict, 3, Weighting::Uniform, None, 0).unwrap();
    let counts_ok = dict.total_tokens() == 20
        && s1.pair_weight(a, b) == 19.0
        && s1.pair_weight(b, a) == 19.0
        && s1.pair_weight(a, a) == 0.0
        && s1.total_weight() == 38.0
        && s3.pair_weight(a, b) == 36.0
        && s3.pair_weight(a, a) == 18.0
        && s3.pair_weight(b, b) == 18.0
        && s3.total_weight() == 108.0
        && s3.target_weight(a) == 54.0;
    let p1 = compute_pmi(&s1, &dict, 1.0, MissingPolicy::Undefined, false).unwrap();
    let p3 = compute_pmi(&s3, &dict, 1.0, MissingPolicy::Undefined, false).unwrap();
    let close = |x: Option<f64>, y: f64| x.is_some_and(|x| (x - y).abs() <= 4.0 * f64::EPSILON);
    let pmi_ok = close(p1.get(a as usize, b as usize), 2f64.ln())
        && p1.get(a as usize, a as usize).is_none()
        && close(p3.get(a as usize, b as usize), (4.0f64 / 3.0).ln())
        && close(p3.get(b as usize, b as usize), (2.0f64 / 3.0).ln());
    verdict(
        "9",
        mismatches == 0 && counts_ok && pmi_ok,
        format!(
            "KG per-triple Hits@10 mismatches {mismatches}/{checked} (7 kinds, raw and filtered); \
             20-token counts exact {counts_ok}; PMI log 2 / log 4/3 / log 2/3 {pmi_ok}"
        ),
    );
}

fn wn18rr() -> Option<KnowledgeGraph> {
    let dir = data_dir()?.join("WN18RR");
    if !dir.join("train.txt").is_file() {
        return None;
    }
    let (mut kg, _) = KnowledgeGraph::load_dir(&dir).expect("WN18RR loads");
    kg.assign_types(&builtin_relation_types("wn18rr").unwrap());
    Some(kg)
}

#[test]
fn criterion_6_khs_on_wn18rr() {
    let Some(kg) = wn18rr() else {
        return blocked("6", "WN18RR not found under $SEMVEC_DATA/WN18RR");
    };
    let targets = [
        ("also_see", 0.24),
        ("instance_hypernym", 1.00),
        ("hypernym", 0.99),
        ("member_meronym", 1.00),
        ("has_part", 1.00),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, want) in targets {
        let r = kg.relation_id(name).expect("relation present");
        let got = khs(&kg.train, r).unwrap().khs;
        ok &= (got - want).abs() <= 0.01;
        parts.push(format!("{name} {got:.3} (paper {want:.2})"));
    }
    verdict("6", ok, parts.join(", "));
}

/// WN18RR training configuration shared by the model-based criteria.
fn wn18rr_config(kind: ModelKind) -> KgTrainConfig {
    KgTrainConfig {
        kind,
        d_e: 200,
        d_r: (kind == ModelKind::TuckER).then_some(30),
        lr: 0.001,
        batch: 128,
        negs: 50,
        epochs: 500,
        seed: 1,
        lazy_adam: true,
        ..KgTrainConfig::default()
    }
}

/// Trains a WN18RR model or loads it from the shared cache.
fn wn18rr_model(kg: &KnowledgeGraph, kind: ModelKind) -> KgModel {
    let dir = work_dir().join(format!("wn18rr-{kind}-seed1"));
    if dir.join("model.json").is_file() {
        return KgModel::load(&dir).expect("cached model loads");
    }
    let (m, _) = train_kg(kg, &wn18rr_config(kind)).expect("training succeeds");
    std::fs::create_dir_all(&dir).unwrap();
    m.save(&dir).unwrap();
    m
}

fn gated(id: &str) -> Option<KnowledgeGraph> {
    let kg = wn18rr();
    if kg.is_none() {
        blocked(id, "WN18RR not found under $SEMVEC_DATA/WN18RR");
    }
    kg
}

#[test]
fn criteria_4_5_7_8_need_data_or_ignored_run() {
    let text8 = data_dir().is_some_and(|d| d.join("text8/text8").is_file());
    if !text8 {
        blocked("4", "text8 and evaluation sets not found under $SEMVEC_DATA/text8");
    } else {
        println!("DEFERRED criterion 4: data present; run `cargo test --release --test acceptance -- --ignored`");
    }
    for id in ["5", "7", "8 (WN18RR part)"] {
        if wn18rr().is_none() {
            blocked(id, "WN18RR not found under $SEMVEC_DATA/WN18RR");
        } else {
            println!("DEFERRED criterion {id}: data present; run `cargo test --release --test acceptance -- --ignored`");
        }
    }
}

#[test]
#[ignore = "hours of training on text8"]
fn criterion_4_word_embedding_table() {
    let Some(data) = data_dir().filter(|d| d.join("text8/text8").is_file()) else {
        return blocked("4", "text8 and evaluation sets not found under $SEMVEC_DATA/text8");
    };
    let t8 = data.join("text8");
    let work = work_dir().join("text8");
    std::fs::create_dir_all(&work).unwrap();
    let cfg = work.join("table.toml");
    let mut text = format!(
        "seed = 1\nwork_dir = \"{}\"\nstages = [\"corpus\", \"pmi\", \"train\", \"eval\"]\n\n\
         [corpus]\ninput = \"{}\"\nmin_count = 5\nwindow = 5\n\n",
        work.display(),
        t8.join("text8").display()
    );
    for (name, loss) in [("w2v", "sgns"), ("tied", "tied"), ("lsq", "lsq")] {
        text.push_str(&format!("[[train]]\nname = \"{name}\"\nloss = \"{loss}\"\ndim = 500\nneg = 5\nepochs = 100\nrepeats = 3\n\n"));
    }
    text.push_str(&format!(
        "[eval]\nwordsim = [{{ name = \"relatedness\", path = \"{}\" }}, {{ name = \"similarity\", path = \"{}\" }}]\n\
         analogy = [{{ name = \"analogy\", path = \"{}\" }}]\nmetric = \"euclidean\"\n",
        t8.join("relatedness.txt").display(),
        t8.join("similarity.txt").display(),
        t8.join("analogy.txt").display()
    ));
    std::fs::write(&cfg, text).unwrap();
    semvec::cli::pipeline::run_pipeline(&cfg, vec!["acceptance".into()]).unwrap();
    let table = semvec::cli::report::Table::read(&work.join("results/eval_results.csv")).unwrap();
    let get = |model: &str, col: &str| -> f64 {
        let row = table.rows.iter().find(|r| r["model"] == model).unwrap();
        row[col].as_f64().unwrap()
    };
    let paper = [("w2v", [0.628, 0.703, 0.283]), ("tied", [0.721, 0.786, 0.411]), ("lsq", [0.727, 0.791, 0.425])];
    let cols = ["relatedness", "similarity", "analogy"];
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, want) in paper {
        for (c, w) in cols.iter().zip(want) {
            let g = get(model, c);
            ok &= (g - w).abs() <= 0.05;
            parts.push(format!("{model}/{c} {g:.3} (paper {w:.3})"));
        }
    }
    for c in cols {
        ok &= get("lsq", c) >= get("tied", c);
    }
    ok &= get("lsq", "analogy") - get("w2v", "analogy") >= 0.05;
    verdict("4", ok, parts.join(", "));
}

fn hits10_for(kg: &KnowledgeGraph, m: &KgModel, name: &str) -> f64 {
    let rep = rank_eval(m, kg, Split::Test, &RankOptions { filtered: true, ..Default::default() }).unwrap();
    rep.per_relation[kg.relation_id(name).unwrap()].as_ref().map_or(f64::NAN, |s| s.hits10)
}

#[test]
#[ignore = "hours of training on WN18RR"]
fn criterion_5_wn18rr_link_prediction() {
    let Some(kg) = gated("5") else { return };
    let opts = RankOptions { filtered: true, ..Default::default() };
    let mut overall = HashMap::new();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [ModelKind::MuRE, ModelKind::DistMult, ModelKind::MuReI] {
        let m = wn18rr_model(&kg, kind);
        let h = rank_eval(&m, &kg, Split::Test, &opts).unwrap().overall.hits10;
        overall.insert(kind, h);
        let drf = hits10_for(&kg, &m, "derivationally_related_form");
        let hyp = hits10_for(&kg, &m, "hypernym");
        ok &= drf >= 0.85 && hyp <= 0.40;
        parts.push(format!("{kind} H@10 {h:.3} (drf {drf:.3}, hypernym {hyp:.3})"));
    }
    let (mure, dm, mi) = (overall[&ModelKind::MuRE], overall[&ModelKind::DistMult], overall[&ModelKind::MuReI]);
    ok &= mure >= 0.50 && dm >= 0.45 && mi >= 0.45 && mure >= dm && dm >= mi - 0.02;
    verdict("5", ok, parts.join(", "));
}

fn type_split(kg: &KnowledgeGraph) -> (Vec<usize>, Vec<usize>) {
    let mut r = Vec::new();
    let mut sc = Vec::new();
    for (i, t) in kg.relation_types.iter().enumerate() {
        match t {
            Some(RelationType::R) => r.push(i),
            Some(_) => sc.push(i),
            None => {}
        }
    }
    (r, sc)
}

#[test]
#[ignore = "hours of training on WN18RR"]
fn criterion_7_relation_pattern_checks() {
    let Some(kg) = gated("7") else { return };
    let (rr, sc) = type_split(&kg);
    let tucker = wn18rr_model(&kg, ModelKind::TuckER);
    let sym = |r: usize| relation_symmetry(&tucker, r).unwrap_or(f64::NAN);
    let min_r = rr.iter().map(|&r| sym(r)).fold(f64::INFINITY, f64::min);
    let max_sc = sc.iter().map(|&r| sym(r)).fold(f64::NEG_INFINITY, f64::max);
    let murei = wn18rr_model(&kg, ModelKind::MuReI);
    let norms = relation_vector_norms(&murei).unwrap();
    let max_r_norm = rr.iter().map(|&r| norms[r]).fold(f64::NEG_INFINITY, f64::max);
    let min_sc_norm = sc.iter().map(|&r| norms[r]).fold(f64::INFINITY, f64::min);
    let mure = wn18rr_model(&kg, ModelKind::MuRE);
    let mean_spec = |rels: &[usize]| {
        rels.iter()
            .map(|&r| {
                let s = relation_spectrum(&mure, r).unwrap();
                s.iter().sum::<f64>() / s.len() as f64
            })
            .sum::<f64>()
            / rels.len() as f64
    };
    let (spec_r, spec_sc) = (mean_spec(&rr), mean_spec(&sc));
    verdict(
        "7",
        min_r > max_sc && max_r_norm < min_sc_norm && spec_r > spec_sc,
        format!(
            "TuckER symmetry min R {min_r:.3} vs max S/C {max_sc:.3}; MuRE_I norm max R {max_r_norm:.3} vs min S/C \
             {min_sc_norm:.3}; MuRE mean spectrum R {spec_r:.3} vs S/C {spec_sc:.3}"
        ),
    );
}

/// Toy memorization half of the classification criterion; runs without data.
#[test]
fn criterion_8_toy_memorization() {
    let n_e = 40;
    let train: Vec<_> = (0..20).map(|i| (i, i % 2, (i * 7 + 3) % n_e)).collect();
    let kg = KnowledgeGraph {
        entities: (0..n_e).map(|i| format!("e{i}")).collect(),
        relations: vec!["a".into(), "b".into()],
        test: train.iter().step_by(3).copied().collect(),
        train,
        valid: vec![],
        relation_types: vec![None; 2],
    };
    let cfg = KgTrainConfig {
        kind: ModelKind::Rescal,
        d_e: n_e,
        lr: 0.02,
        epochs: 300,
        negs: 9,
        batch: 4,
        seed: 5,
        ..Default::default()
    };
    let (model, _) = train_kg(&kg, &cfg).unwrap();
    let acc = classify_eval(&model, &kg).overall.accuracy_train.unwrap_or(0.0);
    verdict("8 (toy memorization part)", acc == 1.0, format!("train accuracy {acc:.3}"));
}

#[test]
#[ignore = "hours of training on WN18RR"]
fn criterion_8_wn18rr_classification() {
    let Some(kg) = gated("8 (WN18RR part)") else { return };
    let acc = |kind| classify_eval(&wn18rr_model(&kg, kind), &kg).overall.accuracy_test.unwrap_or(f64::NAN);
    let (mure, tucker, dm) = (acc(ModelKind::MuRE), acc(ModelKind::TuckER), acc(ModelKind::DistMult));
    verdict(
        "8 (WN18RR part)",
        (mure - 0.50).abs() <= 0.07 && tucker <= mure - 0.08 && dm <= mure - 0.08,
        format!("test accuracy MuRE {mure:.3} (paper 0.50), TuckER {tucker:.3}, DistMult {dm:.3} (paper 0.37)"),
    );
}

#[test]
fn nell_split_size_contract() {
    use semvec::kgraph::split_nell;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut set = HashSet::new();
    while set.len() < 26_000 {
        set.insert((rng.random_range(0..3000), rng.random_range(0..20), rng.random_range(0..3000)));
    }
    let train: Vec<_> = set.into_iter().collect();
    let kg = KnowledgeGraph {
        entities: (0..3000).map(|i| format!("e{i}")).collect(),
        relations: (0..20).map(|i| format!("r{i}")).collect(),
        train,
        valid: vec![],
        test: vec![],
        relation_types: vec![None; 20],
    };
    let s = split_nell(&kg, 7).unwrap();
    let v: HashSet<_> = s.valid.iter().collect();
    let t: HashSet<_> = s.test.iter().collect();
    let ok = s.valid.len() == 10_000 && s.test.len() == 10_000 && v.is_disjoint(&t) && s.train.len() == 6_000;
    verdict("NELL split", ok, format!("|valid| {} |test| {} disjoint {}", s.valid.len(), s.test.len(), v.is_disjoint(&t)));
}
