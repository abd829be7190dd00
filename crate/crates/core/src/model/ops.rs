//! Row-batched origin maps on the tape. Point matrices carry the time
//! coordinate in column 0; tangent matrices at the origin carry only the
//! spatial part.

use crate::autodiff::{Tape, Unary, Var};
use crate::Result;

pub(crate) fn col(t: &mut Tape, s: Var, rows: usize) -> Result<Var> {
    t.broadcast(s, rows, 1)
}

/// `N×D → N×1` squared Euclidean norms.
pub(crate) fn sq_rows(t: &mut Tape, x: Var) -> Result<Var> {
    let sq = t.mul(x, x)?;
    t.row_sum(sq)
}

/// `c·|x|²` per row.
fn scaled_sq(t: &mut Tape, x: Var, c: Var) -> Result<Var> {
    let n = t.shape(x).0;
    let sq = sq_rows(t, x)?;
    let cc = col(t, c, n)?;
    t.mul(sq, cc)
}

/// Spatial part of `exp_o((0, u))`.
pub(crate) fn exp0(t: &mut Tape, u: Var, c: Var) -> Result<Var> {
    let w = scaled_sq(t, u, c)?;
    let k = t.unary(w, Unary::SinhcSqrt)?;
    t.mul_bcast(u, k)
}

/// Smooth radial bound `v ↦ r·tanh(|v|/r)·v/|v|`.
pub(crate) fn bound(t: &mut Tape, v: Var, r: f64) -> Result<Var> {
    let sq = sq_rows(t, v)?;
    let w = t.scale(sq, 1.0 / (r * r))?;
    let k = t.unary(w, Unary::TanhcSqrt)?;
    t.mul_bcast(v, k)
}

/// Spatial part of `log_o(x)` from the spatial part of `x`.
pub(crate) fn log0(t: &mut Tape, xs: Var, c: Var) -> Result<Var> {
    let w = scaled_sq(t, xs, c)?;
    let k = t.unary(w, Unary::AsinhcSqrt)?;
    t.mul_bcast(xs, k)
}

/// Prepends the time coordinate that puts each row on the hyperboloid.
pub(crate) fn with_time(t: &mut Tape, xs: Var, c: Var) -> Result<Var> {
    let n = t.shape(xs).0;
    let inv = t.recip(c)?;
    let inv = col(t, inv, n)?;
    let sq = sq_rows(t, xs)?;
    let r = t.add(inv, sq)?;
    let x0 = t.sqrt(r)?;
    t.concat_cols(&[x0, xs])
}

pub(crate) fn spatial(t: &mut Tape, x: Var) -> Result<Var> {
    let d = t.shape(x).1;
    t.slice_cols(x, 1, d)
}

/// `cosh(√c·d(p,q)) − 1 = (c/2)⟨p−q, p−q⟩`, clamped at zero.
pub(crate) fn half_chord(t: &mut Tape, p: Var, q: Var, c: Var) -> Result<Var> {
    let n = t.shape(p).0;
    let diff = t.sub(p, q)?;
    let m = t.minkowski_inner(diff, diff)?;
    let cc = col(t, c, n)?;
    let m = t.mul(m, cc)?;
    let m = t.scale(m, 0.5)?;
    t.unary(m, Unary::Relu)
}
