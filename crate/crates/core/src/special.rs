//! Scalar special functions shared by the geometry and the tape.
//!
//! The hyperboloid maps at the origin reduce to functions of the squared
//! spatial norm `w = c·|u|²`. Written that way they are entire in `w`, so the
//! derivatives stay finite at `w = 0` where the textbook forms divide 0 by 0.

/// Below this argument the derivative helpers switch to a truncated series.
const SERIES_CUTOFF: f64 = 1e-3;

/// `acosh(1 + δ)` for `δ ≥ 0`, accurate for small `δ`.
pub fn acosh1p(delta: f64) -> f64 {
    let d = delta.max(0.0);
    (d + (d * (2.0 + d)).sqrt()).ln_1p()
}

/// `acosh(1 + δ)²`.
pub fn acosh1p_sq(delta: f64) -> f64 {
    let a = acosh1p(delta);
    a * a
}

/// Derivative of [`acosh1p_sq`] with respect to `δ`. Zero below the clamp.
pub fn acosh1p_sq_deriv(delta: f64) -> f64 {
    if delta < 0.0 {
        return 0.0;
    }
    if delta < 1e-8 {
        // 2 - 2δ/3 + 4δ²/15
        return 2.0 - 2.0 * delta / 3.0 + 4.0 * delta * delta / 15.0;
    }
    2.0 * acosh1p(delta) / (delta * (2.0 + delta)).sqrt()
}

/// `ψ(w) = sinh(√w)/√w`, with `ψ(0) = 1`.
pub fn sinhc_sqrt(w: f64) -> f64 {
    let w = w.max(0.0);
    if w < SERIES_CUTOFF {
        1.0 + w / 6.0 * (1.0 + w / 20.0 * (1.0 + w / 42.0))
    } else {
        let s = w.sqrt();
        s.sinh() / s
    }
}

/// `ψ'(w)`.
pub fn sinhc_sqrt_deriv(w: f64) -> f64 {
    if w < 0.0 {
        return 0.0;
    }
    if w < SERIES_CUTOFF {
        // sum_k k w^(k-1) / (2k+1)!
        1.0 / 6.0 + w / 60.0 + w * w / 1680.0 + w * w * w / 90720.0
    } else {
        let s = w.sqrt();
        (s * s.cosh() - s.sinh()) / (2.0 * s * s * s)
    }
}

/// `χ(w) = asinh(√w)/√w`, with `χ(0) = 1`.
pub fn asinhc_sqrt(w: f64) -> f64 {
    let w = w.max(0.0);
    if w < SERIES_CUTOFF {
        1.0 - w / 6.0 + 3.0 * w * w / 40.0 - 15.0 * w * w * w / 336.0
    } else {
        let s = w.sqrt();
        s.asinh() / s
    }
}

/// `χ'(w)`.
pub fn asinhc_sqrt_deriv(w: f64) -> f64 {
    if w < 0.0 {
        return 0.0;
    }
    if w < SERIES_CUTOFF {
        -1.0 / 6.0 + 3.0 * w / 20.0 - 45.0 * w * w / 336.0 + 420.0 * w * w * w / 3456.0
    } else {
        let s = w.sqrt();
        (s / (1.0 + w).sqrt() - s.asinh()) / (2.0 * s * s * s)
    }
}

/// `τ(w) = tanh(√w)/√w`, with `τ(0) = 1`.
pub fn tanhc_sqrt(w: f64) -> f64 {
    let w = w.max(0.0);
    if w < SERIES_CUTOFF {
        1.0 - w / 3.0 + 2.0 * w * w / 15.0 - 17.0 * w * w * w / 315.0
    } else {
        let s = w.sqrt();
        s.tanh() / s
    }
}

/// `τ'(w)`.
pub fn tanhc_sqrt_deriv(w: f64) -> f64 {
    if w < 0.0 {
        return 0.0;
    }
    if w < SERIES_CUTOFF {
        -1.0 / 3.0 + 4.0 * w / 15.0 - 51.0 * w * w / 315.0 + 248.0 * w * w * w / 2835.0
    } else {
        let s = w.sqrt();
        let sech = 1.0 / s.cosh();
        (s * sech * sech - s.tanh()) / (2.0 * s * s * s)
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
