//! Geometry of the PMI surface: points `s = log(q/p)` induced by probability
//! vectors `q` over a fixed base distribution `p`, and checks of its
//! properties.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability-vector normalization.
const NORM_TOL: f64 = 1e-12;

/// A point on the surface together with the distributions inducing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub s: DVector<f64>,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

fn check_probability(name: &str, v: &DVector<f64>) -> Result<()> {
    if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::invalid(format!("{name}[{i}] = {} is not strictly positive", v[i])));
    }
    let total = v.sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// `s = log(q/p)` elementwise.
pub fn surface_point(q: &DVector<f64>, p: &DVector<f64>) -> Result<SurfacePoint> {
    if q.len() != p.len() || q.is_empty() {
        return Err(Error::Mismatch(format!("q has {} entries, p has {}", q.len(), p.len())));
    }
    check_probability("q", q)?;
    check_probability("p", p)?;
    let s = q.zip_map(p, |a, b| (a / b).ln());
    Ok(SurfacePoint {
        s,
        q: q.clone(),
        p: p.clone(),
    })
}

/// Recover `q = p ∘ exp(s)`.
pub fn invert(s: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    s.zip_map(p, |x, b| b * x.exp())
}

/// `Σ p exp(s) − 1`: zero exactly when `s` lies on the surface over `p`.
pub fn membership_residual(s: &DVector<f64>, p: &DVector<f64>) -> f64 {
    invert(s, p).sum() - 1.0
}

/// Jacobian of `s` with respect to the free parameters `q_1..q_{n−1}`
/// (`q_n = 1 − Σ_{j<n} q_j`).
pub fn jacobian(q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let mut j = DMatrix::zeros(n, n.saturating_sub(1));
    for i in 0..n - 1 {
        j[(i, i)] = 1.0 / q[i];
        j[(n - 1, i)] = -1.0 / q[n - 1];
    }
    j
}

/// `max |qᵀJ|`: how far `q` is from normal to the tangent plane at the point.
pub fn tangent_normal_residual(point: &SurfacePoint) -> f64 {
    let j = jacobian(&point.q);
    (point.q.transpose() * j).amax()
}

/// Sign pattern of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orthant {
    MixedSign,
    AllPositive,
    AllNegative,
    Zero,
}

/// Classify the signs of `s`, treating `|s_i| <= tol` as zero.
pub fn orthant_check(s: &DVector<f64>, tol: f64) -> Orthant {
    let pos = s.iter().any(|&x| x > tol);
    let neg = s.iter().any(|&x| x < -tol);
    match (pos, neg) {
        (true, true) => Orthant::MixedSign,
        (true, false) => Orthant::AllPositive,
        (false, true) => Orthant::AllNegative,
        (false, false) => Orthant::Zero,
    }
}

/// `(q_a/p − 1)ᵀ q_b`; zero exactly when `a.s + b.s` lies on the surface.
pub fn sum_closure_residual(a: &SurfacePoint, b: &SurfacePoint) -> Result<f64> {
    if a.p.len() != b.p.len() || (&a.p - &b.p).amax() > NORM_TOL {
        return Err(Error::Mismatch("surface points have different base distributions".into()));
    }
    Ok(a.q
        .iter()
        .zip(a.p.iter())
        .zip(b.q.iter())
        .map(|((qa, p), qb)| (qa / p - 1.0) * qb)
        .sum())
}

/// Draw a Dirichlet(`alpha`) probability vector of length `n`.
pub fn dirichlet<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> DVector<f64> {
    let g = Gamma::new(alpha, 1.0).expect("alpha must be positive");
    let mut v = DVector::from_fn(n, |_, _| g.sample(rng) + 1e-12);
    let t = v.sum();
    v /= t;
    v
}

/// Results of [`check_properties`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub samples: usize,
    pub dimension: usize,
    /// Largest `|s|` entry of `log(p/p)`.
    pub origin_residual: f64,
    /// Largest tangent-normal residual.
    pub max_normal_residual: f64,
    /// Sampled points with `q ≠ p` whose sign pattern is not mixed.
    pub orthant_failures: usize,
    /// Sampled midpoints that fall off the surface.
    pub midpoints_off_surface: usize,
    /// Largest disagreement between the two directions of the closure test.
    pub closure_asymmetry_failures: usize,
    /// `|residual|` for the pair most nearly closed under addition.
    pub min_closure_residual: f64,
}

/// Sample random points over a random base `p` and evaluate the surface
/// properties: origin, tangent normality, sign patterns, non-linearity, and
/// the symmetry of additive closure.
pub fn check_properties<R: Rng + ?Sized>(n: usize, samples: usize, rng: &mut R) -> Result<SurfaceReport> {
    if n < 2 {
        return Err(Error::invalid("surface checks need at least 2 dimensions"));
    }
    let p = dirichlet(n, 1.0, rng);
    check_properties_over(&p, samples, rng)
}

/// [`check_properties`] over a given base distribution `p`.
pub fn check_properties_over<R: Rng + ?Sized>(p: &DVector<f64>, samples: usize, rng: &mut R) -> Result<SurfaceReport> {
    let n = p.len();
    if n < 2 {
        return Err(Error::invalid("surface checks need at least 2 dimensions"));
    }
    let p = p.clone();
    let origin = surface_point(&p, &p)?;
    let mut report = SurfaceReport {
        samples,
        dimension: n,
        origin_residual: origin.s.amax(),
        max_normal_residual: 0.0,
        orthant_failures: 0,
        midpoints_off_surface: 0,
        closure_asymmetry_failures: 0,
        min_closure_residual: f64::INFINITY,
    };
    for _ in 0..samples {
        let a = surface_point(&dirichlet(n, 1.0, rng), &p)?;
        let b = surface_point(&dirichlet(n, 1.0, rng), &p)?;
        for pt in [&a, &b] {
            report.max_normal_residual = report.max_normal_residual.max(tangent_normal_residual(pt));
            if orthant_check(&pt.s, 0.0) != Orthant::MixedSign {
                report.orthant_failures += 1;
            }
        }
        let mid = (&a.s + &b.s) / 2.0;
        if membership_residual(&mid, &p).abs() > 1e-10 {
            report.midpoints_off_surface += 1;
        }
        let ab = sum_closure_residual(&a, &b)?;
        let ba = sum_closure_residual(&b, &a)?;
        if (ab.abs() < 1e-10) != (ba.abs() < 1e-10) {
            report.closure_asymmetry_failures += 1;
        }
        report.min_closure_residual = report.min_closure_residual.min(ab.abs());
    }
    Ok(report)
}
