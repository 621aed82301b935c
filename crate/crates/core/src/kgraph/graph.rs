//! Knowledge-graph container, triple-file loading, relation-type labels and the NELL-995 resplit.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A `(subject, relation, object)` id triple.
pub type Triple = (usize, usize, usize);

/// Size of each of the validation and test sets drawn by [`split_nell`].
pub const NELL_HELDOUT: usize = 10_000;
/// Minimum pooled triple count accepted by [`split_nell`].
pub const NELL_MIN_TRIPLES: usize = 25_000;

/// Relation-type label: relatedness (R), specialisation (S) or context shift (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationType {
    /// Relatedness: entities share aspects in both directions.
    R,
    /// Specialisation: one entity is an instance or kind of the other.
    S,
    /// Generalised context shift.
    C,
}

impl FromStr for RelationType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(RelationType::R),
            "S" | "s" => Ok(RelationType::S),
            "C" | "c" => Ok(RelationType::C),
            other => Err(Error::invalid(format!("unknown relation type `{other}` (expected R, S or C)"))),
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelationType::R => "R",
            RelationType::S => "S",
            RelationType::C => "C",
        };
        f.write_str(s)
    }
}

/// Dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    /// Training triples.
    Train,
    /// Validation triples.
    Valid,
    /// Test triples.
    Test,
}

/// Counts of issues found while loading triple files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Duplicate lines dropped, per split (train, valid, test).
    pub duplicates: [usize; 3],
    /// Distinct entities in valid or test that never occur in train.
    pub unseen_entities: usize,
    /// Valid or test triples touching such an entity (kept).
    pub unseen_triples: usize,
}

/// Entity and relation dictionaries with per-split triple lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    /// Entity names by id.
    pub entities: Vec<String>,
    /// Relation names by id.
    pub relations: Vec<String>,
    /// Training triples.
    pub train: Vec<Triple>,
    /// Validation triples.
    pub valid: Vec<Triple>,
    /// Test triples.
    pub test: Vec<Triple>,
    /// Optional type label per relation.
    pub relation_types: Vec<Option<RelationType>>,
}

/// Canonical relation name used to match type labels: leading `_` and `concept:`/`concept_`
/// prefixes are stripped and the known NELL spelling variants are repaired.
pub fn normalize_relation_name(name: &str) -> String {
    let mut s = name.trim().trim_start_matches('_');
    for prefix in ["concept:", "concept_"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest;
        }
    }
    match s {
        "teamploysagainstteam" | "teamploysagainsteam" => "teamplaysagainstteam".to_string(),
        other => other.to_string(),
    }
}

fn read_tsv_triples(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected `head<TAB>relation<TAB>tail`, found {} field(s)", fields.len()),
            ));
        }
        out.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()));
    }
    Ok(out)
}

impl KnowledgeGraph {
    /// Builds a graph from named triples; dictionaries are sorted over the union of splits.
    pub fn from_named(
        train: &[(String, String, String)],
        valid: &[(String, String, String)],
        test: &[(String, String, String)],
    ) -> Result<(Self, LoadReport)> {
        let mut ents = BTreeSet::new();
        let mut rels = BTreeSet::new();
        for (h, r, t) in train.iter().chain(valid).chain(test) {
            ents.insert(h.as_str());
            ents.insert(t.as_str());
            rels.insert(r.as_str());
        }
        if ents.is_empty() || rels.is_empty() {
            return Err(Error::invalid("knowledge graph has no triples"));
        }
        let entities: Vec<String> = ents.into_iter().map(str::to_string).collect();
        let relations: Vec<String> = rels.into_iter().map(str::to_string).collect();
        let eidx: HashMap<&str, usize> = entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
        let ridx: HashMap<&str, usize> = relations.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let mut report = LoadReport::default();
        let mut convert = |rows: &[(String, String, String)], slot: usize| {
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(rows.len());
            for (h, r, t) in rows {
                let tr = (eidx[h.as_str()], ridx[r.as_str()], eidx[t.as_str()]);
                if seen.insert(tr) {
                    out.push(tr);
                } else {
                    report.duplicates[slot] += 1;
                }
            }
            out
        };
        let train = convert(train, 0);
        let valid = convert(valid, 1);
        let test = convert(test, 2);
        let mut in_train = vec![false; entities.len()];
        for &(s, _, o) in &train {
            in_train[s] = true;
            in_train[o] = true;
        }
        let mut unseen = HashSet::new();
        for &(s, _, o) in valid.iter().chain(&test) {
            if !in_train[s] || !in_train[o] {
                report.unseen_triples += 1;
            }
            for e in [s, o] {
                if !in_train[e] {
                    unseen.insert(e);
                }
            }
        }
        report.unseen_entities = unseen.len();
        let n_r = relations.len();
        Ok((
            KnowledgeGraph { entities, relations, train, valid, test, relation_types: vec![None; n_r] },
            report,
        ))
    }

    /// Loads `head<TAB>relation<TAB>tail` files for the three splits; `valid`/`test` may be absent.
    pub fn load(train: &Path, valid: Option<&Path>, test: Option<&Path>) -> Result<(Self, LoadReport)> {
        let tr = read_tsv_triples(train)?;
        let va = match valid {
            Some(p) => read_tsv_triples(p)?,
            None => Vec::new(),
        };
        let te = match test {
            Some(p) => read_tsv_triples(p)?,
            None => Vec::new(),
        };
        Self::from_named(&tr, &va, &te)
    }

    /// Loads `train.txt`, `valid.txt` and `test.txt` from a dataset directory (`.tsv` also accepted).
    pub fn load_dir(dir: &Path) -> Result<(Self, LoadReport)> {
        let find = |stem: &str| {
            ["txt", "tsv"].iter().map(|ext| dir.join(format!("{stem}.{ext}"))).find(|p| p.is_file())
        };
        let train = find("train").ok_or_else(|| Error::invalid(format!("{}: no train.txt", dir.display())))?;
        let valid = find("valid");
        let test = find("test");
        Self::load(&train, valid.as_deref(), test.as_deref())
    }

    /// Number of entities.
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of relations.
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    /// Triples of a split.
    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Relation id by exact or normalised name.
    pub fn relation_id(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.relations.iter().position(|r| r == name) {
            return Some(i);
        }
        let want = normalize_relation_name(name);
        self.relations.iter().position(|r| normalize_relation_name(r) == want)
    }

    /// Entity id by name.
    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e == name)
    }

    /// Attaches type labels by normalised relation name; returns how many relations got a label.
    pub fn assign_types(&mut self, table: &HashMap<String, RelationType>) -> usize {
        let mut n = 0;
        for (i, name) in self.relations.iter().enumerate() {
            let t = table.get(&normalize_relation_name(name)).copied();
            if t.is_some() {
                n += 1;
            }
            self.relation_types[i] = t;
        }
        n
    }

    /// Checks id ranges, non-emptiness and per-split uniqueness.
    pub fn validate(&self) -> Result<()> {
        let (n_e, n_r) = (self.n_entities(), self.n_relations());
        if n_e == 0 || n_r == 0 {
            return Err(Error::invalid("knowledge graph needs at least one entity and one relation"));
        }
        if self.relation_types.len() != n_r {
            return Err(Error::invalid("relation type table length differs from relation count"));
        }
        for split in [&self.train, &self.valid, &self.test] {
            let mut seen = HashSet::with_capacity(split.len());
            for &(s, r, o) in split.iter() {
                if s >= n_e || o >= n_e {
                    return Err(Error::OutOfRange { id: s.max(o), size: n_e });
                }
                if r >= n_r {
                    return Err(Error::OutOfRange { id: r, size: n_r });
                }
                if !seen.insert((s, r, o)) {
                    return Err(Error::invalid(format!("duplicate triple ({s}, {r}, {o}) within a split")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the dictionaries and the three triple lists in order.
    pub fn split_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entities {
            h.update(e.as_bytes());
            h.update([0u8]);
        }
        for r in &self.relations {
            h.update(r.as_bytes());
            h.update([0u8]);
        }
        for split in [&self.train, &self.valid, &self.test] {
            h.update((split.len() as u64).to_le_bytes());
            for &(s, r, o) in split.iter() {
                for x in [s, r, o] {
                    h.update((x as u64).to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// Parses a relation-type table `relation<TAB>{R|S|C}`; keys are normalised names.
pub fn parse_relation_types(text: &str, origin: &str) -> Result<HashMap<String, RelationType>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(name), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(origin, i + 1, "expected `relation<TAB>{R|S|C}`"));
        };
        let kind = kind.parse().map_err(|e: Error| Error::parse(origin, i + 1, e.to_string()))?;
        out.insert(normalize_relation_name(name), kind);
    }
    Ok(out)
}

/// Reads a relation-type TSV file.
pub fn load_relation_types(path: &Path) -> Result<HashMap<String, RelationType>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_relation_types(&text, &path.display().to_string())
}

/// Built-in relation-type table for `wn18rr` or `nell995`.
pub fn builtin_relation_types(name: &str) -> Result<HashMap<String, RelationType>> {
    let text = match name {
        "wn18rr" => include_str!("../../../../data/relation_types/wn18rr.tsv"),
        "nell995" | "nell-995" => include_str!("../../../../data/relation_types/nell995.tsv"),
        other => return Err(Error::invalid(format!("no built-in relation types for `{other}`"))),
    };
    parse_relation_types(text, name)
}

/// Pools every triple, draws disjoint validation and test sets of 10,000 each with a seeded
/// shuffle and keeps the remainder for training. The pooled multiset is conserved.
pub fn split_nell(kg: &KnowledgeGraph, seed: u64) -> Result<KnowledgeGraph> {
    let mut pool: Vec<Triple> = kg.train.iter().chain(&kg.valid).chain(&kg.test).copied().collect();
    if pool.len() < NELL_MIN_TRIPLES {
        return Err(Error::invalid(format!(
            "split_nell needs at least {NELL_MIN_TRIPLES} triples, found {}",
            pool.len()
        )));
    }
    pool.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let valid = pool[..NELL_HELDOUT].to_vec();
    let test = pool[NELL_HELDOUT..2 * NELL_HELDOUT].to_vec();
    let train = pool[2 * NELL_HELDOUT..].to_vec();
    Ok(KnowledgeGraph {
        entities: kg.entities.clone(),
        relations: kg.relations.clone(),
        train,
        valid,
        test,
        relation_types: kg.relation_types.clone(),
    })
}
