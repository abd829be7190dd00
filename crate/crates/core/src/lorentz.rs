//! Hyperboloid model of hyperbolic space with curvature `-c`.
//!
//! Points are `(n+1)`-vectors on the upper sheet
//! `{x : <x,x>_η = -1/c, x_0 > 0}` with the Minkowski form
//! `<x,y>_η = -x_0 y_0 + Σ x_i y_i`. The time coordinate is stored first.
//!
//! Every map runs in `f64`. Results are repaired with
//! [`project_to_hyperboloid`] / [`project_to_tangent`] so the manifold
//! invariants hold to rounding.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::special::acosh1p;
use crate::{Error, Result};

/// Relative tolerance used when validating that a point lies on the hyperboloid.
pub const MANIFOLD_TOL: f64 = 1e-7;
/// Relative tolerance used when validating tangency.
pub const TANGENT_TOL: f64 = 1e-8;
/// Distances below this are treated as zero by [`log_map`].
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Magnitude of the (negative) sectional curvature. Always `> 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(Error::InvalidCurvature(c))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }
}

impl TryFrom<f64> for Curvature {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

impl From<Curvature> for f64 {
    fn from(c: Curvature) -> f64 {
        c.0
    }
}

/// A point on the curvature-`c` hyperboloid.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    coords: Array1<f64>,
}

impl LorentzPoint {
    /// Validates `coords` against the hyperboloid of curvature `c`.
    pub fn new(coords: Array1<f64>, c: Curvature) -> Result<Self> {
        check_len(coords.len())?;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LorentzPoint::new"));
        }
        let residual = inner_unchecked(coords.view(), coords.view()) + 1.0 / c.value();
        let scale = 1.0 / c.value() + coords.iter().skip(1).map(|v| v * v).sum::<f64>();
        if coords[0] <= 0.0 || residual.abs() > MANIFOLD_TOL * scale {
            return Err(Error::OffManifold { residual });
        }
        Ok(Self { coords })
    }

    /// Lifts spatial coordinates onto the hyperboloid.
    pub fn from_spatial(spatial: ArrayView1<f64>, c: Curvature) -> Result<Self> {
        let mut coords = Array1::zeros(spatial.len() + 1);
        coords.slice_mut(ndarray::s![1..]).assign(&spatial);
        project_to_hyperboloid(coords.view(), c)
    }

    pub fn coords(&self) -> ArrayView1<'_, f64> {
        self.coords.view()
    }

    pub fn spatial(&self) -> ArrayView1<'_, f64> {
        self.coords.slice(ndarray::s![1..])
    }

    /// Intrinsic dimension `n` (the ambient length is `n + 1`).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.coords
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    coords: Array1<f64>,
    base: LorentzPoint,
}

impl TangentVector {
    pub fn new(base: LorentzPoint, coords: Array1<f64>) -> Result<Self> {
        check_same(base.coords.len(), coords.len())?;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("TangentVector::new"));
        }
        let residual = inner_unchecked(base.coords(), coords.view());
        let scale = 1.0 + euclid_norm(base.coords()) * euclid_norm(coords.view());
        if residual.abs() > TANGENT_TOL * scale {
            return Err(Error::NotTangent { residual });
        }
        Ok(Self { coords, base })
    }

    pub fn zero(base: LorentzPoint) -> Self {
        let coords = Array1::zeros(base.coords.len());
        Self { coords, base }
    }

    /// Builds `(0, spatial)` in the tangent space at the origin.
    pub fn at_origin(spatial: ArrayView1<f64>, c: Curvature) -> Self {
        let mut coords = Array1::zeros(spatial.len() + 1);
        coords.slice_mut(ndarray::s![1..]).assign(&spatial);
        Self {
            coords,
            base: origin(spatial.len(), c),
        }
    }

    pub fn coords(&self) -> ArrayView1<'_, f64> {
        self.coords.view()
    }

    pub fn spatial(&self) -> ArrayView1<'_, f64> {
        self.coords.slice(ndarray::s![1..])
    }

    pub fn base(&self) -> &LorentzPoint {
        &self.base
    }

    /// Minkowski norm, radicand clamped at zero.
    pub fn norm(&self) -> f64 {
        inner_unchecked(self.coords(), self.coords()).max(0.0).sqrt()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.coords
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: len,
        });
    }
    Ok(())
}

fn check_same(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    check_len(got)
}

fn euclid_norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

pub(crate) fn inner_unchecked(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let space: f64 = x
        .iter()
        .zip(y.iter())
        .skip(1)
        .map(|(a, b)| a * b)
        .sum();
    space - x[0] * y[0]
}

/// `<x,y>_η = -x_0 y_0 + Σ_{i≥1} x_i y_i`.
pub fn minkowski_inner(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    check_same(x.len(), y.len())?;
    Ok(inner_unchecked(x, y))
}

/// `(1/√c, 0, …, 0)`.
pub fn origin(n: usize, c: Curvature) -> LorentzPoint {
    let mut coords = Array1::zeros(n + 1);
    coords[0] = 1.0 / c.sqrt();
    LorentzPoint { coords }
}

/// Recomputes the time coordinate from the spatial part:
/// `x_0 = √(1/c + Σ x_i²)`.
pub fn project_to_hyperboloid(x: ArrayView1<f64>, c: Curvature) -> Result<LorentzPoint> {
    check_len(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("project_to_hyperboloid"));
    }
    let mut coords = x.to_owned();
    let space: f64 = coords.iter().skip(1).map(|v| v * v).sum();
    coords[0] = (1.0 / c.value() + space).sqrt();
    Ok(LorentzPoint { coords })
}

/// Minkowski-orthogonal projection onto `T_p`: `x + c<x,p>_η p`.
pub fn project_to_tangent(p: &LorentzPoint, x: ArrayView1<f64>, c: Curvature) -> Result<TangentVector> {
    check_same(p.coords.len(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("project_to_tangent"));
    }
    let k = c.value() * inner_unchecked(x, p.coords());
    let coords = &x + &(&p.coords * k);
    Ok(TangentVector {
        coords,
        base: p.clone(),
    })
}

/// Geodesic distance `(1/√c)·acosh(-c<p,q>_η)`.
///
/// The acosh argument is formed as `1 + (c/2)<p-q,p-q>_η`, which equals
/// `-c<p,q>_η` on the hyperboloid but keeps its precision when `p ≈ q`.
/// It is clamped below at 1.
pub fn distance(p: &LorentzPoint, q: &LorentzPoint, c: Curvature) -> Result<f64> {
    check_same(p.coords.len(), q.coords.len())?;
    let diff = &p.coords - &q.coords;
    let delta = 0.5 * c.value() * inner_unchecked(diff.view(), diff.view());
    Ok(acosh1p(delta) / c.sqrt())
}

/// `exp_p(v) = cosh(√c‖v‖) p + sinh(√c‖v‖) v / (√c‖v‖)`, then projected.
pub fn exp_map(p: &LorentzPoint, v: &TangentVector, c: Curvature) -> Result<LorentzPoint> {
    check_same(p.coords.len(), v.coords.len())?;
    let residual = inner_unchecked(p.coords(), v.coords());
    let scale = 1.0 + euclid_norm(p.coords()) * euclid_norm(v.coords());
    if residual.abs() > TANGENT_TOL * scale {
        return Err(Error::NotTangent { residual });
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(p.clone());
    }
    let theta = c.sqrt() * norm;
    let x = &p.coords * theta.cosh() + &v.coords * (theta.sinh() / theta);
    project_to_hyperboloid(x.view(), c)
}

/// Inverse of [`exp_map`]. Returns the zero vector when `d(p,q) < 1e-12`.
pub fn log_map(p: &LorentzPoint, q: &LorentzPoint, c: Curvature) -> Result<TangentVector> {
    let d = distance(p, q, c)?;
    if d < ZERO_DISTANCE {
        return Ok(TangentVector::zero(p.clone()));
    }
    let theta = c.sqrt() * d;
    let half = (0.5 * theta).sinh();
    // q - cosh(θ) p == (q - p) - (cosh θ - 1) p
    let dir = (&q.coords - &p.coords) - &(&p.coords * (2.0 * half * half));
    let v = dir * (theta / theta.sinh());
    project_to_tangent(p, v.view(), c)
}

/// Parallel transport of `v ∈ T_p` along the geodesic to `q`:
/// `v + c<q,v>_η / (1 - c<p,q>_η) · (p + q)`, then projected onto `T_q`.
pub fn parallel_transport(
    p: &LorentzPoint,
    q: &LorentzPoint,
    v: &TangentVector,
    c: Curvature,
) -> Result<TangentVector> {
    check_same(p.coords.len(), q.coords.len())?;
    check_same(p.coords.len(), v.coords.len())?;
    if p.coords == q.coords {
        return Ok(TangentVector {
            coords: v.coords.clone(),
            base: q.clone(),
        });
    }
    let k = c.value();
    let denom = 1.0 - k * inner_unchecked(p.coords(), q.coords());
    if !denom.is_finite() || denom.abs() < 1e-12 {
        return Err(Error::Degenerate {
            op: "parallel_transport",
            detail: format!("1 - c<p,q> = {denom:e}"),
        });
    }
    let coef = k * inner_unchecked(q.coords(), v.coords()) / denom;
    let out = &v.coords + &((&p.coords + &q.coords) * coef);
    project_to_tangent(q, out.view(), c)
}
