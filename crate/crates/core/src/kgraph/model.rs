//! Linear link-prediction models: parameter layout, scores, analytic gradients and
//! all-entity scoring for ranking.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviation of the normal initialisation for embeddings and relation vectors.
pub const INIT_STD: f64 = 0.1;

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// `-||e_s + r - e_o||^2`.
    TransE,
    /// `e_s^T diag(r) e_o`.
    DistMult,
    /// `e_s^T R e_o` with full `R`.
    Rescal,
    /// `Re(e_s^T diag(r) conj(e_o))` over `d_e / 2` complex coordinates.
    ComplEx,
    /// `W x1 e_s x2 r x3 e_o` with a shared core tensor.
    TuckER,
    /// `-||R e_s + r - e_o||^2 + b_s + b_o` with diagonal `R`.
    MuRE,
    /// MuRE with `R` fixed to the identity.
    MuReI,
}

impl ModelKind {
    /// Every kind, in display order.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::TransE,
        ModelKind::DistMult,
        ModelKind::Rescal,
        ModelKind::ComplEx,
        ModelKind::TuckER,
        ModelKind::MuRE,
        ModelKind::MuReI,
    ];

    /// Whether the kind carries subject/object entity biases.
    pub fn has_bias(self) -> bool {
        matches!(self, ModelKind::MuRE | ModelKind::MuReI)
    }

    /// Whether the kind has a translation vector `r`.
    pub fn has_translation(self) -> bool {
        matches!(self, ModelKind::TransE | ModelKind::MuRE | ModelKind::MuReI)
    }

    /// Default relation dimension for an entity dimension `d_e`.
    pub fn default_d_r(self, d_e: usize) -> usize {
        match self {
            ModelKind::TuckER => 30,
            _ => d_e,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "rescal" => Ok(ModelKind::Rescal),
            "complex" => Ok(ModelKind::ComplEx),
            "tucker" => Ok(ModelKind::TuckER),
            "mure" => Ok(ModelKind::MuRE),
            "mure_i" | "murei" => Ok(ModelKind::MuReI),
            other => Err(Error::Usage(format!(
                "unknown model `{other}` (transe, distmult, rescal, complex, tucker, mure, mure_i)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::Rescal => "rescal",
            ModelKind::ComplEx => "complex",
            ModelKind::TuckER => "tucker",
            ModelKind::MuRE => "mure",
            ModelKind::MuReI => "mure_i",
        };
        f.write_str(s)
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    /// Entity block start (always 0); `n_e * d_e` values, one row per entity.
    pub ent: usize,
    /// Relation block start; `n_r * rel_len` values.
    pub rel: usize,
    /// Length of one relation's block.
    pub rel_len: usize,
    /// Core tensor start (TuckER only); `d_e * d_r * d_e` values.
    pub core: usize,
    /// Subject bias start (MuRE family); `n_e` values.
    pub bias_s: usize,
    /// Object bias start (MuRE family); `n_e` values.
    pub bias_o: usize,
    /// Total parameter count.
    pub len: usize,
}

impl Layout {
    fn new(kind: ModelKind, n_e: usize, n_r: usize, d_e: usize, d_r: usize) -> Self {
        let rel_len = match kind {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::ComplEx | ModelKind::MuReI => d_e,
            ModelKind::Rescal => d_e * d_e,
            ModelKind::TuckER => d_r,
            ModelKind::MuRE => 2 * d_e,
        };
        let ent = 0;
        let rel = n_e * d_e;
        let core = rel + n_r * rel_len;
        let core_len = if kind == ModelKind::TuckER { d_e * d_r * d_e } else { 0 };
        let bias_s = core + core_len;
        let bias_len = if kind.has_bias() { n_e } else { 0 };
        let bias_o = bias_s + bias_len;
        Layout { ent, rel, rel_len, core, bias_s, bias_o, len: bias_o + bias_len }
    }
}

/// A link-prediction model with all parameters in one flat vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KgModel {
    /// Model family.
    pub kind: ModelKind,
    /// Entity count.
    pub n_e: usize,
    /// Relation count.
    pub n_r: usize,
    /// Entity dimension.
    pub d_e: usize,
    /// Relation dimension (TuckER); equals `d_e` otherwise.
    pub d_r: usize,
    /// Initialisation seed.
    pub seed: u64,
    /// Block offsets.
    pub layout: Layout,
    /// Flat parameters.
    #[serde(skip)]
    pub params: Vec<f64>,
}

fn sq(x: f64) -> f64 {
    x * x
}

impl KgModel {
    /// All-zero model of the given shape.
    pub fn zeros(kind: ModelKind, n_e: usize, n_r: usize, d_e: usize, d_r: usize) -> Result<Self> {
        if n_e == 0 || n_r == 0 || d_e == 0 || d_r == 0 {
            return Err(Error::invalid("model dimensions and counts must be positive"));
        }
        if kind == ModelKind::ComplEx && d_e % 2 != 0 {
            return Err(Error::invalid("ComplEx needs an even d_e (real and imaginary halves)"));
        }
        let d_r = if kind == ModelKind::TuckER { d_r } else { d_e };
        let layout = Layout::new(kind, n_e, n_r, d_e, d_r);
        Ok(KgModel { kind, n_e, n_r, d_e, d_r, seed: 0, layout, params: vec![0.0; layout.len] })
    }

    /// Seeded random initialisation: entities and relation vectors `N(0, 0.1^2)`, diagonal
    /// relation matrices and the TuckER core `U(-1, 1)`, full RESCAL matrices `N(0, 0.1^2)`,
    /// biases zero.
    pub fn init(kind: ModelKind, n_e: usize, n_r: usize, d_e: usize, d_r: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(kind, n_e, n_r, d_e, d_r)?;
        m.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let unif = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        let l = m.layout;
        for x in &mut m.params[l.ent..l.rel] {
            *x = normal.sample(&mut rng);
        }
        for r in 0..n_r {
            let block = &mut m.params[l.rel + r * l.rel_len..l.rel + (r + 1) * l.rel_len];
            match kind {
                ModelKind::DistMult => block.iter_mut().for_each(|x| *x = unif.sample(&mut rng)),
                ModelKind::MuRE => {
                    let (diag, vec) = block.split_at_mut(d_e);
                    diag.iter_mut().for_each(|x| *x = unif.sample(&mut rng));
                    vec.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
                }
                _ => block.iter_mut().for_each(|x| *x = normal.sample(&mut rng)),
            }
        }
        if kind == ModelKind::TuckER {
            for x in &mut m.params[l.core..l.bias_s] {
                *x = unif.sample(&mut rng);
            }
        }
        Ok(m)
    }

    /// Fills every parameter with `U(-scale, scale)`; used by tests.
    pub fn randomize(&mut self, scale: f64, rng: &mut impl Rng) {
        for x in &mut self.params {
            *x = rng.random_range(-scale..=scale);
        }
    }

    /// Entity embedding row.
    pub fn entity(&self, e: usize) -> &[f64] {
        &self.params[e * self.d_e..(e + 1) * self.d_e]
    }

    /// Mutable entity embedding row.
    pub fn entity_mut(&mut self, e: usize) -> &mut [f64] {
        let d = self.d_e;
        &mut self.params[e * d..(e + 1) * d]
    }

    /// Relation parameter block.
    pub fn relation(&self, r: usize) -> &[f64] {
        let l = &self.layout;
        &self.params[l.rel + r * l.rel_len..l.rel + (r + 1) * l.rel_len]
    }

    /// Mutable relation parameter block.
    pub fn relation_mut(&mut self, r: usize) -> &mut [f64] {
        let l = self.layout;
        &mut self.params[l.rel + r * l.rel_len..l.rel + (r + 1) * l.rel_len]
    }

    /// TuckER core tensor, indexed `a * d_r * d_e + b * d_e + c`; empty for other kinds.
    pub fn core(&self) -> &[f64] {
        &self.params[self.layout.core..self.layout.bias_s]
    }

    /// Mutable TuckER core tensor.
    pub fn core_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        &mut self.params[l.core..l.bias_s]
    }

    fn biases(&self, s: usize, o: usize) -> f64 {
        if self.kind.has_bias() {
            self.params[self.layout.bias_s + s] + self.params[self.layout.bias_o + o]
        } else {
            0.0
        }
    }

    /// Translation vector `r` for kinds that have one.
    pub fn translation(&self, r: usize) -> Option<&[f64]> {
        match self.kind {
            ModelKind::TransE | ModelKind::MuReI => Some(self.relation(r)),
            ModelKind::MuRE => Some(&self.relation(r)[self.d_e..]),
            _ => None,
        }
    }

    /// Relation matrix `R` (`d_e x d_e`) for kinds with a bilinear or diagonal map:
    /// DistMult and MuRE give `diag(r)`, RESCAL its full matrix, TuckER `W x2 r`.
    pub fn relation_matrix(&self, r: usize) -> Option<DMatrix<f64>> {
        let d = self.d_e;
        let rel = self.relation(r);
        match self.kind {
            ModelKind::DistMult => Some(DMatrix::from_diagonal(&DVector::from_column_slice(rel))),
            ModelKind::MuRE => Some(DMatrix::from_diagonal(&DVector::from_column_slice(&rel[..d]))),
            ModelKind::Rescal => Some(DMatrix::from_row_slice(d, d, rel)),
            ModelKind::TuckER => Some(self.tucker_matrix(r)),
            _ => None,
        }
    }

    /// `M_r[a, c] = sum_b W[a, b, c] r_b`.
    pub fn tucker_matrix(&self, r: usize) -> DMatrix<f64> {
        let (d, dr) = (self.d_e, self.d_r);
        let w = self.core();
        let rv = self.relation(r);
        let mut m = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..dr {
                let rb = rv[b];
                if rb == 0.0 {
                    continue;
                }
                let base = a * dr * d + b * d;
                for c in 0..d {
                    m[(a, c)] += w[base + c] * rb;
                }
            }
        }
        m
    }

    /// Score `phi(s, r, o)`.
    pub fn score(&self, s: usize, r: usize, o: usize) -> f64 {
        let d = self.d_e;
        let (es, eo, rel) = (self.entity(s), self.entity(o), self.relation(r));
        match self.kind {
            ModelKind::TransE => -(0..d).map(|k| sq(es[k] + rel[k] - eo[k])).sum::<f64>(),
            ModelKind::DistMult => (0..d).map(|k| es[k] * eo[k] * rel[k]).sum(),
            ModelKind::Rescal => {
                let mut t = 0.0;
                for a in 0..d {
                    let row = &rel[a * d..(a + 1) * d];
                    t += es[a] * row.iter().zip(eo).map(|(x, y)| x * y).sum::<f64>();
                }
                t
            }
            ModelKind::ComplEx => {
                let h = d / 2;
                (0..h)
                    .map(|k| {
                        let (sr, si, rr, ri, or, oi) = (es[k], es[h + k], rel[k], rel[h + k], eo[k], eo[h + k]);
                        sr * rr * or + si * rr * oi + sr * ri * oi - si * ri * or
                    })
                    .sum()
            }
            ModelKind::TuckER => {
                let (dr, w) = (self.d_r, self.core());
                let mut t = 0.0;
                for a in 0..d {
                    for b in 0..dr {
                        let base = a * dr * d + b * d;
                        let inner: f64 = (0..d).map(|c| w[base + c] * eo[c]).sum();
                        t += es[a] * rel[b] * inner;
                    }
                }
                t
            }
            ModelKind::MuRE => {
                let (diag, tr) = rel.split_at(d);
                -(0..d).map(|k| sq(diag[k] * es[k] + tr[k] - eo[k])).sum::<f64>() + self.biases(s, o)
            }
            ModelKind::MuReI => -(0..d).map(|k| sq(es[k] + rel[k] - eo[k])).sum::<f64>() + self.biases(s, o),
        }
    }

    /// Adds `scale * d(phi)/d(theta)` for every parameter touched by `(s, r, o)` into `grad`
    /// (same layout as `params`).
    pub fn accumulate_gradient(&self, s: usize, r: usize, o: usize, scale: f64, grad: &mut [f64]) {
        let d = self.d_e;
        let l = self.layout;
        let (es, eo, rel) = (self.entity(s), self.entity(o), self.relation(r));
        let (gs, go, gr) = (s * d, o * d, l.rel + r * l.rel_len);
        match self.kind {
            ModelKind::TransE | ModelKind::MuReI => {
                for k in 0..d {
                    let x = 2.0 * scale * (es[k] + rel[k] - eo[k]);
                    grad[gs + k] -= x;
                    grad[gr + k] -= x;
                    grad[go + k] += x;
                }
            }
            ModelKind::MuRE => {
                let (diag, tr) = rel.split_at(d);
                for k in 0..d {
                    let x = 2.0 * scale * (diag[k] * es[k] + tr[k] - eo[k]);
                    grad[gs + k] -= x * diag[k];
                    grad[gr + k] -= x * es[k];
                    grad[gr + d + k] -= x;
                    grad[go + k] += x;
                }
            }
            ModelKind::DistMult => {
                for k in 0..d {
                    grad[gs + k] += scale * rel[k] * eo[k];
                    grad[gr + k] += scale * es[k] * eo[k];
                    grad[go + k] += scale * es[k] * rel[k];
                }
            }
            ModelKind::Rescal => {
                for a in 0..d {
                    let row = &rel[a * d..(a + 1) * d];
                    grad[gs + a] += scale * row.iter().zip(eo).map(|(x, y)| x * y).sum::<f64>();
                    for b in 0..d {
                        grad[go + b] += scale * es[a] * row[b];
                        grad[gr + a * d + b] += scale * es[a] * eo[b];
                    }
                }
            }
            ModelKind::ComplEx => {
                let h = d / 2;
                for k in 0..h {
                    let (sr, si, rr, ri, or, oi) = (es[k], es[h + k], rel[k], rel[h + k], eo[k], eo[h + k]);
                    grad[gs + k] += scale * (rr * or + ri * oi);
                    grad[gs + h + k] += scale * (rr * oi - ri * or);
                    grad[gr + k] += scale * (sr * or + si * oi);
                    grad[gr + h + k] += scale * (sr * oi - si * or);
                    grad[go + k] += scale * (sr * rr - si * ri);
                    grad[go + h + k] += scale * (si * rr + sr * ri);
                }
            }
            ModelKind::TuckER => {
                let (dr, w) = (self.d_r, self.core());
                for a in 0..d {
                    for b in 0..dr {
                        let base = a * dr * d + b * d;
                        let mut inner = 0.0;
                        for c in 0..d {
                            let wv = w[base + c];
                            inner += wv * eo[c];
                            grad[go + c] += scale * wv * es[a] * rel[b];
                            grad[l.core + base + c] += scale * es[a] * rel[b] * eo[c];
                        }
                        grad[gs + a] += scale * rel[b] * inner;
                        grad[gr + b] += scale * es[a] * inner;
                    }
                }
            }
        }
        if self.kind.has_bias() {
            grad[l.bias_s + s] += scale;
            grad[l.bias_o + o] += scale;
        }
    }

    /// Checks that every parameter is finite.
    pub fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::Numerical(format!("non-finite parameter at index {i}"))),
            None => Ok(()),
        }
    }

    /// Writes `model.json` (shape metadata) and `params.bin` (little-endian f64) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join("model.json");
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(&meta, json).map_err(|e| Error::io(&meta, e))?;
        let bin = dir.join("params.bin");
        let bytes: Vec<u8> = self.params.iter().flat_map(|x| x.to_le_bytes()).collect();
        std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
    }

    /// Reads a model written by [`KgModel::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta = dir.join("model.json");
        let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let mut m: KgModel = serde_json::from_str(&text).map_err(|e| Error::parse(&meta, e.line(), e.to_string()))?;
        let expect = Layout::new(m.kind, m.n_e, m.n_r, m.d_e, m.d_r);
        if expect != m.layout {
            return Err(Error::parse(&meta, 0, "layout does not match the declared shape"));
        }
        let bin = dir.join("params.bin");
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != m.layout.len * 8 {
            return Err(Error::parse(&bin, 0, format!("expected {} bytes, found {}", m.layout.len * 8, bytes.len())));
        }
        m.params = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        m.check_finite()?;
        Ok(m)
    }
}

/// All-entity scoring with per-relation precomputation (TuckER relation matrices).
pub struct Scorer<'a> {
    model: &'a KgModel,
    tucker: Vec<DMatrix<f64>>,
}

impl<'a> Scorer<'a> {
    /// Prepares a scorer; TuckER relation matrices are materialised once.
    pub fn new(model: &'a KgModel) -> Self {
        let tucker = if model.kind == ModelKind::TuckER {
            (0..model.n_r).map(|r| model.tucker_matrix(r)).collect()
        } else {
            Vec::new()
        };
        Scorer { model, tucker }
    }

    /// The wrapped model.
    pub fn model(&self) -> &KgModel {
        self.model
    }

    fn dot_all(&self, q: &[f64]) -> Vec<f64> {
        (0..self.model.n_e).map(|e| self.model.entity(e).iter().zip(q).map(|(a, b)| a * b).sum()).collect()
    }

    fn dist_all(&self, q: &[f64], diag: Option<&[f64]>) -> Vec<f64> {
        (0..self.model.n_e)
            .map(|e| {
                let x = self.model.entity(e);
                match diag {
                    Some(dg) => -x.iter().zip(dg).zip(q).map(|((a, g), b)| sq(a * g - b)).sum::<f64>(),
                    None => -x.iter().zip(q).map(|(a, b)| sq(a - b)).sum::<f64>(),
                }
            })
            .collect()
    }

    /// `phi(s, r, x)` for every entity `x`.
    pub fn objects(&self, s: usize, r: usize) -> Vec<f64> {
        let m = self.model;
        let d = m.d_e;
        let (es, rel) = (m.entity(s), m.relation(r));
        let mut out = match m.kind {
            ModelKind::TransE | ModelKind::MuReI => {
                let q: Vec<f64> = (0..d).map(|k| es[k] + rel[k]).collect();
                self.dist_all(&q, None)
            }
            ModelKind::MuRE => {
                let q: Vec<f64> = (0..d).map(|k| rel[k] * es[k] + rel[d + k]).collect();
                self.dist_all(&q, None)
            }
            ModelKind::DistMult => {
                let q: Vec<f64> = (0..d).map(|k| es[k] * rel[k]).collect();
                self.dot_all(&q)
            }
            ModelKind::Rescal => {
                let mut q = vec![0.0; d];
                for a in 0..d {
                    for b in 0..d {
                        q[b] += es[a] * rel[a * d + b];
                    }
                }
                self.dot_all(&q)
            }
            ModelKind::ComplEx => {
                let h = d / 2;
                let mut q = vec![0.0; d];
                for k in 0..h {
                    let (sr, si, rr, ri) = (es[k], es[h + k], rel[k], rel[h + k]);
                    q[k] = sr * rr - si * ri;
                    q[h + k] = si * rr + sr * ri;
                }
                self.dot_all(&q)
            }
            ModelKind::TuckER => {
                let q = self.tucker[r].tr_mul(&DVector::from_column_slice(es));
                self.dot_all(q.as_slice())
            }
        };
        if m.kind.has_bias() {
            for (x, v) in out.iter_mut().enumerate() {
                *v += m.biases(s, x);
            }
        }
        out
    }

    /// `phi(x, r, o)` for every entity `x`.
    pub fn subjects(&self, r: usize, o: usize) -> Vec<f64> {
        let m = self.model;
        let d = m.d_e;
        let (eo, rel) = (m.entity(o), m.relation(r));
        let mut out = match m.kind {
            ModelKind::TransE | ModelKind::MuReI => {
                let q: Vec<f64> = (0..d).map(|k| eo[k] - rel[k]).collect();
                self.dist_all(&q, None)
            }
            ModelKind::MuRE => {
                let q: Vec<f64> = (0..d).map(|k| eo[k] - rel[d + k]).collect();
                self.dist_all(&q, Some(&rel[..d]))
            }
            ModelKind::DistMult => {
                let q: Vec<f64> = (0..d).map(|k| eo[k] * rel[k]).collect();
                self.dot_all(&q)
            }
            ModelKind::Rescal => {
                let q: Vec<f64> =
                    (0..d).map(|a| rel[a * d..(a + 1) * d].iter().zip(eo).map(|(x, y)| x * y).sum()).collect();
                self.dot_all(&q)
            }
            ModelKind::ComplEx => {
                let h = d / 2;
                let mut q = vec![0.0; d];
                for k in 0..h {
                    let (rr, ri, or, oi) = (rel[k], rel[h + k], eo[k], eo[h + k]);
                    q[k] = rr * or + ri * oi;
                    q[h + k] = rr * oi - ri * or;
                }
                self.dot_all(&q)
            }
            ModelKind::TuckER => {
                let q = &self.tucker[r] * DVector::from_column_slice(eo);
                self.dot_all(q.as_slice())
            }
        };
        if m.kind.has_bias() {
            for (x, v) in out.iter_mut().enumerate() {
                *v += m.biases(x, o);
            }
        }
        out
    }
}
