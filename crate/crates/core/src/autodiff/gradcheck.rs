use ndarray::Array2;

use super::{Tape, Var};
use crate::Result;

/// Worst disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares reverse-mode gradients of `f` with central differences.
///
/// `f` receives a fresh tape and one leaf per input and must return a `1×1`
/// node. Relative error uses `max(|analytic|, |numeric|, floor)` as the
/// denominator so that vanishing gradients are compared absolutely.
pub fn check_gradients<F>(inputs: &[Array2<f64>], h: f64, floor: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Array2<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let vars = xs
            .iter()
            .map(|x| t.constant(x.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut t, &vars)?;
        Ok(t.scalar(out))
    };

    let mut t = Tape::new();
    let vars = inputs
        .iter()
        .map(|x| t.variable(x.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut t, &vars)?;
    let grads = t.backward(out)?;

    let mut worst = GradCheck {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
    };
    let mut xs = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let zero = Array2::zeros(inputs[k].dim());
        let analytic = grads.wrt(v).unwrap_or(&zero).clone();
        for idx in 0..inputs[k].len() {
            let (r, c) = (idx / inputs[k].ncols(), idx % inputs[k].ncols());
            let x0 = xs[k][[r, c]];
            xs[k][[r, c]] = x0 + h;
            let up = eval(&xs)?;
            xs[k][[r, c]] = x0 - h;
            let down = eval(&xs)?;
            xs[k][[r, c]] = x0;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[[r, c]];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(floor);
            worst.max_abs_err = worst.max_abs_err.max(abs);
            worst.max_rel_err = worst.max_rel_err.max(rel);
        }
    }
    Ok(worst)
}
