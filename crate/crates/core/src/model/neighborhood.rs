//! Single-node attention and aggregation on explicit points.

use ndarray::Array1;

use crate::lorentz::{distance, minkowski_inner, project_to_hyperboloid, Curvature, LorentzPoint};
use crate::{Error, Result};

/// Softmax over the neighbors of `-d(x_i, x_j)²`.
pub fn attention_weights(center: &LorentzPoint, neighbors: &[&LorentzPoint], c: Curvature) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::Degenerate {
            op: "attention_weights",
            detail: "empty neighborhood".into(),
        });
    }
    let scores = neighbors
        .iter()
        .map(|q| distance(center, q, c).map(|d| -d * d))
        .collect::<Result<Vec<f64>>>()?;
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = ex.iter().sum();
    Ok(ex.into_iter().map(|e| e / z).collect())
}

/// Cardinality-scaled centroid `√c·s / ((1+|N|)·‖s‖_L)` with `s = Σ α_j x_j`,
/// projected back onto the hyperboloid.
pub fn lorentz_centroid(neighbors: &[&LorentzPoint], alphas: &[f64], c: Curvature) -> Result<LorentzPoint> {
    if neighbors.is_empty() || neighbors.len() != alphas.len() {
        return Err(Error::DimensionMismatch {
            expected: neighbors.len().max(1),
            got: alphas.len(),
        });
    }
    let mut s = Array1::zeros(neighbors[0].coords().len());
    for (x, &a) in neighbors.iter().zip(alphas) {
        s.scaled_add(a, &x.coords());
    }
    let ss = minkowski_inner(s.view(), s.view())?;
    if ss.abs() < 1e-12 {
        return Err(Error::Degenerate {
            op: "lorentz_centroid",
            detail: format!("weighted sum has Lorentzian norm {ss:e}"),
        });
    }
    let norm = (-ss).max(0.0).sqrt();
    let raw = s * (c.sqrt() / ((1.0 + neighbors.len() as f64) * norm));
    project_to_hyperboloid(raw.view(), c)
}
