#![allow(dead_code)]

use std::path::PathBuf;
use std::rc::Rc;

use lgin::autodiff::{check_gradients, Tape, Unary, Var};
use lgin::data::load_tu_dataset;
use lgin::lorentz::{exp_map, log_map, minkowski_inner, origin, parallel_transport, project_to_tangent};
use lgin::model::{column_rank, CurvatureMode, ForwardCtx, UpdateMode};
use lgin::{Curvature, Graph, GraphBatch, GraphDataset, LorentzPoint, Model, ModelConfig, Result, TangentVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn mutag() -> GraphDataset {
    load_tu_dataset(&data_root().join("MUTAG"), "MUTAG").expect("bundled MUTAG")
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// Entries in `±[lo, hi)` with random signs.
pub fn signed(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let m = rng.random_range(lo..hi);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// `Σ out ∘ R` with a fixed, dense, shape-dependent weight pattern `R`.
pub fn weighted_sum(t: &mut Tape, out: Var) -> Result<Var> {
    let (r, c) = t.shape(out);
    let w = Array2::from_shape_fn((r, c), |(i, j)| (1.3 * i as f64 + 0.7 * j as f64 + 0.4).sin());
    let w = t.constant(w)?;
    let p = t.mul(out, w)?;
    t.sum(p)
}

type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<Array2<f64>>>;
type Body = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

pub struct OpCase {
    pub name: &'static str,
    sample: Sampler,
    body: Body,
}

fn case(
    name: &'static str,
    sample: impl Fn(&mut ChaCha8Rng) -> Vec<Array2<f64>> + 'static,
    body: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
) -> OpCase {
    OpCase {
        name,
        sample: Box::new(sample),
        body: Box::new(body),
    }
}

fn unary_case(name: &'static str, f: Unary, lo: f64, hi: f64, sign: bool) -> OpCase {
    case(
        name,
        move |r| vec![if sign { signed(r, 3, 4, lo, hi) } else { uniform(r, 3, 4, lo, hi) }],
        move |t, v| t.unary(v[0], f),
    )
}

/// One case per tape operation, each with inputs kept away from kinks and
/// domain edges.
pub fn op_cases() -> Vec<OpCase> {
    let any = |r: &mut ChaCha8Rng, a: usize, b: usize| uniform(r, a, b, -2.0, 2.0);
    vec![
        case("matmul", move |r| vec![any(r, 3, 4), any(r, 4, 2)], |t, v| t.matmul(v[0], v[1])),
        case("matmul_t", move |r| vec![any(r, 3, 4), any(r, 2, 4)], |t, v| t.matmul_t(v[0], v[1])),
        case("add", move |r| vec![any(r, 3, 4), any(r, 3, 4)], |t, v| t.add(v[0], v[1])),
        case("sub", move |r| vec![any(r, 3, 4), any(r, 3, 4)], |t, v| t.sub(v[0], v[1])),
        case("mul", move |r| vec![any(r, 3, 4), any(r, 3, 4)], |t, v| t.mul(v[0], v[1])),
        case(
            "div",
            move |r| vec![any(r, 3, 4), signed(r, 3, 4, 0.5, 2.0)],
            |t, v| t.div(v[0], v[1]),
        ),
        case("scale", move |r| vec![any(r, 3, 4)], |t, v| t.scale(v[0], -1.7)),
        case("offset", move |r| vec![any(r, 3, 4)], |t, v| t.offset(v[0], 0.3)),
        case("broadcast_scalar", move |r| vec![any(r, 1, 1)], |t, v| t.broadcast(v[0], 3, 4)),
        case("broadcast_col", move |r| vec![any(r, 3, 1)], |t, v| t.broadcast(v[0], 3, 4)),
        case("broadcast_row", move |r| vec![any(r, 1, 4)], |t, v| t.broadcast(v[0], 3, 4)),
        case("mul_bcast", move |r| vec![any(r, 3, 4), any(r, 3, 1)], |t, v| t.mul_bcast(v[0], v[1])),
        case("add_bcast", move |r| vec![any(r, 3, 4), any(r, 1, 4)], |t, v| t.add_bcast(v[0], v[1])),
        unary_case("neg", Unary::Neg, -2.0, 2.0, false),
        unary_case("relu", Unary::Relu, 0.1, 2.0, true),
        unary_case("tanh", Unary::Tanh, -2.0, 2.0, false),
        unary_case("sigmoid", Unary::Sigmoid, -3.0, 3.0, false),
        unary_case("cosh", Unary::Cosh, -3.0, 3.0, false),
        unary_case("sinh", Unary::Sinh, -3.0, 3.0, false),
        unary_case("acosh", Unary::Acosh, 1.2, 4.0, false),
        unary_case("sqrt", Unary::Sqrt, 0.2, 4.0, false),
        unary_case("exp", Unary::Exp, -3.0, 3.0, false),
        unary_case("ln", Unary::Ln, 0.2, 4.0, false),
        unary_case("recip", Unary::Recip, 0.3, 3.0, true),
        unary_case("softplus", Unary::Softplus, -5.0, 5.0, false),
        unary_case("sinhc_sqrt", Unary::SinhcSqrt, 2e-5, 6.0, false),
        unary_case("asinhc_sqrt", Unary::AsinhcSqrt, 2e-5, 6.0, false),
        unary_case("tanhc_sqrt", Unary::TanhcSqrt, 2e-5, 6.0, false),
        unary_case("acosh1p_sq", Unary::Acosh1pSq, 2e-5, 5.0, false),
        case("tanh_method", move |r| vec![any(r, 3, 4)], |t, v| t.tanh(v[0])),
        case("sigmoid_method", move |r| vec![any(r, 3, 4)], |t, v| t.sigmoid(v[0])),
        case("sqrt_method", |r| vec![uniform(r, 3, 4, 0.2, 4.0)], |t, v| t.sqrt(v[0])),
        case("recip_method", |r| vec![signed(r, 3, 4, 0.3, 3.0)], |t, v| t.recip(v[0])),
        case("softmax", move |r| vec![any(r, 3, 4)], |t, v| t.softmax(v[0])),
        case(
            "segment_softmax",
            move |r| vec![any(r, 6, 1)],
            |t, v| t.segment_softmax(v[0], Rc::new(vec![0, 0, 1, 1, 1, 2]), 3),
        ),
        case(
            "gather_rows",
            move |r| vec![any(r, 4, 3)],
            |t, v| t.gather_rows(v[0], Rc::new(vec![2, 0, 2, 3])),
        ),
        case(
            "scatter_add_rows",
            move |r| vec![any(r, 5, 3)],
            |t, v| t.scatter_add_rows(v[0], Rc::new(vec![1, 0, 1, 2, 2]), 3),
        ),
        case(
            "concat_cols",
            move |r| vec![any(r, 3, 2), any(r, 3, 3)],
            |t, v| t.concat_cols(&[v[0], v[1]]),
        ),
        case("slice_cols", move |r| vec![any(r, 3, 5)], |t, v| t.slice_cols(v[0], 1, 4)),
        case("row_sum", move |r| vec![any(r, 3, 4)], |t, v| t.row_sum(v[0])),
        case("sum", move |r| vec![any(r, 3, 4)], |t, v| t.sum(v[0])),
        case(
            "minkowski_inner",
            move |r| vec![any(r, 3, 4), any(r, 3, 4)],
            |t, v| t.minkowski_inner(v[0], v[1]),
        ),
        case(
            "softmax_cross_entropy",
            move |r| vec![any(r, 4, 3)],
            |t, v| t.softmax_cross_entropy(v[0], Rc::new(vec![0, 2, 1, 2])),
        ),
    ]
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-3;

/// Worst relative VJP error of `op` over `trials` random inputs.
pub fn op_error(op: &OpCase, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let inputs = (op.sample)(&mut rng);
        let r = check_gradients(&inputs, FD_STEP, FD_FLOOR, |t, v| {
            let out = (op.body)(t, v)?;
            weighted_sum(t, out)
        })?;
        worst = worst.max(r.max_rel_err);
    }
    Ok(worst)
}

/// Four-cycle with a chord plus an isolated node.
pub fn five_node_graph(dim: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = uniform(&mut rng, 5, dim, -1.0, 1.0);
    Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)], f, 1).unwrap()
}

pub fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        layer_dims: vec![3, 4, 5, 6],
        num_classes: 3,
        seed,
        ..ModelConfig::default()
    }
}

/// Model with a random classifier so every parameter influences the loss.
pub fn model_with_classifier(cfg: ModelConfig) -> Model {
    let seed = cfg.seed;
    let mut m = Model::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a55);
    let w = m.params.value(m.classifier_w).dim();
    m.params.get_mut(m.classifier_w).value = uniform(&mut rng, w.0, w.1, -0.5, 0.5);
    m
}

/// Worst relative error between backprop and central differences over every
/// parameter entry of the full loss on one five-node graph.
pub fn lgin_loss_gradcheck(cfg: ModelConfig) -> Result<f64> {
    let graph = five_node_graph(cfg.layer_dims[0], cfg.seed);
    let batch = GraphBatch::new(&[&graph])?;
    let mut model = model_with_classifier(cfg);
    model.loss_and_grad(&batch, ForwardCtx::eval())?;
    let ids: Vec<_> = model.params.iter().map(|(id, _)| id).collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let grad = model.params.get(id).grad.clone();
        let (rows, cols) = grad.dim();
        for r in 0..rows {
            for c in 0..cols {
                let x0 = model.params.value(id)[[r, c]];
                model.params.get_mut(id).value[[r, c]] = x0 + FD_STEP;
                let up = model.evaluate(&batch)?.loss;
                model.params.get_mut(id).value[[r, c]] = x0 - FD_STEP;
                let down = model.evaluate(&batch)?.loss;
                model.params.get_mut(id).value[[r, c]] = x0;
                let numeric = (up - down) / (2.0 * FD_STEP);
                let a = grad[[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

/// The configurations the end-to-end check covers.
pub fn gradcheck_configs() -> Vec<(&'static str, ModelConfig)> {
    vec![
        (
            "with_pt/variable/bounded",
            ModelConfig {
                curvature_mode: CurvatureMode::Variable,
                tangent_radius: Some(2.0),
                ..small_config(7)
            },
        ),
        (
            "no_pt/fixed",
            ModelConfig {
                update_mode: UpdateMode::NoPt,
                ..small_config(8)
            },
        ),
        (
            "with_pt/fixed/uniform",
            ModelConfig {
                use_attention: false,
                ..small_config(9)
            },
        ),
    ]
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ManifoldStats {
    pub max_residual: f64,
    /// Largest residual in units of `EPS·x0²`, the rounding floor of the constraint.
    pub max_residual_ulps: f64,
    /// Samples whose absolute residual is at least `1e-9`.
    pub residual_over: usize,
    pub max_roundtrip: f64,
    pub max_transport: f64,
    /// Largest transport error in units of `EPS·Σ|aᵢbᵢ|` over the transported
    /// pair, the conditioning floor of the inner product.
    pub max_transport_ulps: f64,
    /// Samples whose transport error is at least `1e-8`.
    pub transport_over: usize,
    pub identity_exact: bool,
}

fn norm(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// Random base points with spatial coordinates in `[-1, 1]`, tangent vectors
/// of Minkowski norm up to 5, exp/log roundtrips and transports along the
/// resulting geodesics.
pub fn manifold_suite(c: f64, samples: usize, dim: usize, seed: u64) -> Result<ManifoldStats> {
    let cv = Curvature::new(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ManifoldStats {
        identity_exact: true,
        ..Default::default()
    };
    let tangent = |rng: &mut ChaCha8Rng, p: &LorentzPoint, len: f64| -> Result<TangentVector> {
        loop {
            let raw = Array1::from_shape_fn(dim + 1, |_| rng.random_range(-1.0..1.0));
            let v = project_to_tangent(p, raw.view(), cv)?;
            let n = v.norm();
            if n > 1e-3 {
                return TangentVector::new(p.clone(), v.into_inner() * (len / n));
            }
        }
    };
    let mut done = 0;
    while done < samples {
        let xs = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
        let p = LorentzPoint::from_spatial(xs.view(), cv)?;
        let len = 5.0 * rng.random::<f64>();
        if len == 0.0 {
            continue;
        }
        let v = tangent(&mut rng, &p, len)?;
        let q = exp_map(&p, &v, cv)?;
        let r = (minkowski_inner(q.coords(), q.coords())? + 1.0 / c).abs();
        let x0 = q.coords()[0];
        s.max_residual = s.max_residual.max(r);
        s.max_residual_ulps = s.max_residual_ulps.max(r / (f64::EPSILON * x0 * x0));
        s.residual_over += usize::from(r >= 1e-9);
        let back = log_map(&p, &q, cv)?.into_inner();
        let target = v.coords().to_owned();
        s.max_roundtrip = s.max_roundtrip.max(norm(&(&back - &target)) / norm(&target));

        let wlen = 5.0 * rng.random::<f64>();
        let w = tangent(&mut rng, &p, wlen)?;
        let tv = parallel_transport(&p, &q, &v, cv)?;
        let tw = parallel_transport(&p, &q, &w, cv)?;
        let before = minkowski_inner(v.coords(), w.coords())?;
        let after = minkowski_inner(tv.coords(), tw.coords())?;
        let err = (before - after).abs() / before.abs().max(1.0);
        let floor = tv.coords().iter().zip(tw.coords()).map(|(a, b)| (a * b).abs()).sum::<f64>() * f64::EPSILON;
        s.max_transport = s.max_transport.max(err);
        s.max_transport_ulps = s.max_transport_ulps.max((before - after).abs() / floor);
        s.transport_over += usize::from(err >= 1e-8);
        s.identity_exact &= parallel_transport(&p, &p, &v, cv)?.coords() == v.coords();
        done += 1;
    }
    Ok(s)
}

pub fn cv(c: f64) -> Curvature {
    Curvature::new(c).unwrap()
}

pub fn point(xs: &[f64], c: f64) -> LorentzPoint {
    LorentzPoint::from_spatial(Array1::from(xs.to_vec()).view(), cv(c)).unwrap()
}

pub fn exp_o(u: &Array1<f64>, c: f64) -> LorentzPoint {
    let v = TangentVector::at_origin(u.view(), cv(c));
    exp_map(&origin(u.len(), cv(c)), &v, cv(c)).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, c: f64) -> Vec<LorentzPoint> {
    (0..n)
        .map(|_| {
            let xs: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect();
            point(&xs, c)
        })
        .collect()
}

/// `W1` with mean-centred rows has `(1, …, 1)` in its kernel.
pub fn rank_deficient_model(n: usize, seed: u64) -> (Model, Array1<f64>) {
    let mut m = Model::new(ModelConfig {
        layer_dims: vec![n, n + 2],
        use_bias: false,
        tangent_radius: None,
        seed,
        ..ModelConfig::default()
    })
    .unwrap();
    let l = m.layers[0].clone();
    let mut w1 = m.params.value(l.w1).clone();
    for mut row in w1.rows_mut() {
        let mean = row.sum() / n as f64;
        row.mapv_inplace(|x| x - mean);
    }
    assert!(column_rank(&w1) < n);
    m.params.get_mut(l.w1).value = w1;
    (m, Array1::ones(n))
}

