//! The network: hyperboloid message passing with an injective two-layer
//! transform per step and a layer-concatenated tangent sum-pool readout.

mod batch;
mod checkpoint;
mod neighborhood;
pub(crate) mod ops;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use batch::GraphBatch;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use neighborhood::{attention_weights, lorentz_centroid};

use crate::autodiff::{ParamId, ParamStore, Tape, Unary, Var};
use crate::data::Graph;
use crate::lorentz::{exp_map, log_map, origin, Curvature, LorentzPoint, TangentVector};
use crate::special::{softplus, softplus_inv};
use crate::{Error, Result};

/// Floor added to a softplus-parameterised curvature.
pub const CURVATURE_FLOOR: f64 = 1e-3;
const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMode {
    Fixed,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// Only meant for roundtrip tests.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// The node's own tangent vector is parallel transported around
    /// o → x → T → o before being combined with the aggregate.
    WithPt,
    NoPt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Input width followed by the output width of every layer.
    pub layer_dims: Vec<usize>,
    /// Hidden width of each layer's transform; defaults to its output width.
    pub hidden_dims: Option<Vec<usize>>,
    pub num_classes: usize,
    pub curvature_mode: CurvatureMode,
    pub init_curvature: f64,
    /// Curvature of the hyperboloid the raw features are embedded on.
    pub input_curvature: f64,
    pub epsilon_init: f64,
    pub use_attention: bool,
    pub use_bias: bool,
    pub update_mode: UpdateMode,
    pub dropout: f64,
    /// Multiplies the He-uniform bound of every transform weight.
    pub init_gain: f64,
    /// When set, tangent vectors are passed through `r·tanh(|v|/r)·v/|v|`
    /// before every exponential map, keeping coordinates bounded. `None`
    /// applies the maps unmodified.
    pub tangent_radius: Option<f64>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![7, 128, 256, 512],
            hidden_dims: None,
            num_classes: 2,
            curvature_mode: CurvatureMode::Fixed,
            init_curvature: 4.0,
            input_curvature: 4.0,
            epsilon_init: 0.1,
            use_attention: true,
            use_bias: true,
            update_mode: UpdateMode::WithPt,
            dropout: 0.0,
            init_gain: 1.0,
            tangent_radius: Some(4.0),
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    fn hidden(&self, k: usize) -> usize {
        match &self.hidden_dims {
            Some(h) => h[k],
            None => self.layer_dims[k + 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return bad(format!("layer_dims {:?} needs an input and at least one positive layer width", self.layer_dims));
        }
        if let Some(h) = &self.hidden_dims {
            if h.len() != self.num_layers() {
                return bad(format!("{} hidden widths for {} layers", h.len(), self.num_layers()));
            }
        }
        for k in 0..self.num_layers() {
            let (n_in, n_out, h) = (self.layer_dims[k], self.layer_dims[k + 1], self.hidden(k));
            if n_out < n_in {
                return bad(format!("layer {}: output width {n_out} below input width {n_in}", k + 1));
            }
            if h < n_in || n_out < h {
                return bad(format!("layer {}: widths {n_in} -> {h} -> {n_out} are not monotone", k + 1));
            }
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes {} < 2", self.num_classes));
        }
        for (what, c) in [("init_curvature", self.init_curvature), ("input_curvature", self.input_curvature)] {
            if !(c.is_finite() && c > CURVATURE_FLOOR) {
                return bad(format!("{what} {c} must exceed {CURVATURE_FLOOR}"));
            }
        }
        if !(0.0..=0.2).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 0.2]", self.dropout));
        }
        if let Some(r) = self.tangent_radius {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("tangent_radius {r} must be positive"));
            }
        }
        if !(self.init_gain.is_finite() && self.init_gain > 0.0) {
            return bad(format!("init_gain {} must be positive", self.init_gain));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CurvatureParam {
    Fixed(f64),
    /// `c = softplus(raw) + floor`.
    Raw(ParamId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub n_in: usize,
    pub hidden: usize,
    pub n_out: usize,
    /// `hidden × n_in`
    pub w1: ParamId,
    pub b1: Option<ParamId>,
    /// `n_out × hidden`
    pub w2: ParamId,
    pub b2: Option<ParamId>,
    pub epsilon: ParamId,
    pub curvature: CurvatureParam,
    pub dropout: f64,
}

/// Whether a forward pass trains (dropout active) and at which step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForwardCtx {
    pub training: bool,
    pub step: u64,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        Self::default()
    }

    pub fn train(step: u64) -> Self {
        Self { training: true, step }
    }
}

/// Tape handles produced by [`Model::forward`].
#[derive(Debug, Clone)]
pub struct ForwardOut {
    /// Full point matrices, layer 0 (embedded input) through K.
    pub states: Vec<Var>,
    /// `num_graphs × Σ widths`
    pub pooled: Var,
    pub logits: Var,
    pub loss: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub layers: Vec<LayerParams>,
    pub classifier_w: ParamId,
    pub classifier_b: ParamId,
}

fn he_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, gain: f64) -> Array2<f64> {
    let bound = gain * (6.0 / cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Numerical column rank via singular values relative to the largest.
pub fn column_rank(m: &Array2<f64>) -> usize {
    let (r, c) = m.dim();
    let dm = DMatrix::from_fn(r, c, |i, j| m[[i, j]]);
    let sv = dm.svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

impl Model {
    /// Builds and initialises a model, checking every weight for full column rank.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let mut model = Self::init_unchecked(config)?;
        for (k, l) in model.layers.iter().enumerate() {
            for (name, id, cols) in [("W1", l.w1, l.n_in), ("W2", l.w2, l.hidden)] {
                let rank = column_rank(model.params.value(id));
                if rank < cols {
                    return Err(Error::Config(format!(
                        "layer {}: {name} has column rank {rank} < {cols} at init",
                        k + 1
                    )));
                }
            }
        }
        model.params.zero_grad();
        Ok(model)
    }

    fn init_unchecked(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let mut layers = Vec::new();
        for k in 0..config.num_layers() {
            let (n_in, n_out, hidden) = (config.layer_dims[k], config.layer_dims[k + 1], config.hidden(k));
            let tag = k + 1;
            let w1 = params.add(format!("layer{tag}.w1"), he_uniform(&mut rng, hidden, n_in, config.init_gain));
            let b1 = config
                .use_bias
                .then(|| params.add(format!("layer{tag}.b1"), Array2::zeros((1, hidden))));
            let w2 = params.add(format!("layer{tag}.w2"), he_uniform(&mut rng, n_out, hidden, config.init_gain));
            let b2 = config
                .use_bias
                .then(|| params.add(format!("layer{tag}.b2"), Array2::zeros((1, n_out))));
            let epsilon = params.add(format!("layer{tag}.epsilon"), Array2::from_elem((1, 1), config.epsilon_init));
            let curvature = match config.curvature_mode {
                CurvatureMode::Fixed => CurvatureParam::Fixed(config.init_curvature),
                CurvatureMode::Variable => CurvatureParam::Raw(params.add(
                    format!("layer{tag}.curvature_raw"),
                    Array2::from_elem((1, 1), softplus_inv(config.init_curvature - CURVATURE_FLOOR)),
                )),
            };
            layers.push(LayerParams {
                n_in,
                hidden,
                n_out,
                w1,
                b1,
                w2,
                b2,
                epsilon,
                curvature,
                dropout: config.dropout,
            });
        }
        let width: usize = config.layer_dims.iter().sum();
        let classifier_w = params.add("classifier.w", Array2::zeros((config.num_classes, width)));
        let classifier_b = params.add("classifier.b", Array2::zeros((1, config.num_classes)));
        Ok(Self {
            config,
            params,
            layers,
            classifier_w,
            classifier_b,
        })
    }

    /// Sets the classifier bias to the log class frequencies, so the
    /// untrained model predicts the majority class.
    pub fn set_class_prior(&mut self, labels: &[usize]) {
        let k = self.config.num_classes;
        let mut counts = vec![0.0; k];
        for &l in labels {
            counts[l] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let b = self.params.get_mut(self.classifier_b);
        for (j, &n) in counts.iter().enumerate() {
            b.value[[0, j]] = ((n + 1.0) / (total + k as f64)).ln();
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Curvature of state `k` (0 is the input embedding).
    pub fn curvature(&self, k: usize) -> f64 {
        if k == 0 {
            return self.config.input_curvature;
        }
        match self.layers[k - 1].curvature {
            CurvatureParam::Fixed(c) => c,
            CurvatureParam::Raw(id) => softplus(self.params.value(id)[[0, 0]]) + CURVATURE_FLOOR,
        }
    }

    fn curvature_var(&self, t: &mut Tape, k: usize) -> Result<Var> {
        if k == 0 {
            return t.scalar_const(self.config.input_curvature);
        }
        match self.layers[k - 1].curvature {
            CurvatureParam::Fixed(c) => t.scalar_const(c),
            CurvatureParam::Raw(id) => {
                let raw = t.param(&self.params, id)?;
                let sp = t.unary(raw, Unary::Softplus)?;
                t.offset(sp, CURVATURE_FLOOR)
            }
        }
    }

    /// `exp_o` after the optional radial bound.
    fn exp0(&self, t: &mut Tape, u: Var, c: Var) -> Result<Var> {
        let u = match self.config.tangent_radius {
            Some(r) => ops::bound(t, u, r)?,
            None => u,
        };
        ops::exp0(t, u, c)
    }

    fn activate(&self, t: &mut Tape, x: Var) -> Result<Var> {
        match self.config.activation {
            Activation::Tanh => t.tanh(x),
            Activation::Identity => Ok(x),
        }
    }

    /// `W2·σ(W1·u + b1) + b2` on row-stacked tangent features.
    fn mlp(&self, t: &mut Tape, layer: &LayerParams, u: Var) -> Result<Var> {
        let w1 = t.param(&self.params, layer.w1)?;
        let mut h = t.matmul_t(u, w1)?;
        if let Some(b1) = layer.b1 {
            let b = t.param(&self.params, b1)?;
            h = t.add_bcast(h, b)?;
        }
        let h = self.activate(t, h)?;
        let w2 = t.param(&self.params, layer.w2)?;
        let mut y = t.matmul_t(h, w2)?;
        if let Some(b2) = layer.b2 {
            let b = t.param(&self.params, b2)?;
            y = t.add_bcast(y, b)?;
        }
        Ok(y)
    }

    /// Transform of one point of state `k−1` to state `k`, evaluated directly
    /// with the geometry primitives.
    pub fn lorentz_transform(&self, k: usize, x: &LorentzPoint) -> Result<LorentzPoint> {
        let layer = &self.layers[k - 1];
        let (a, b) = (Curvature::new(self.curvature(k - 1))?, Curvature::new(self.curvature(k))?);
        if x.dim() != layer.n_in {
            return Err(Error::DimensionMismatch {
                expected: layer.n_in,
                got: x.dim(),
            });
        }
        let u = log_map(&origin(layer.n_in, a), x, a)?;
        let u = Array2::from_shape_vec((1, layer.n_in), u.spatial().to_vec()).expect("row vector");
        let mut t = Tape::new();
        let uv = t.constant(u)?;
        let mut y = self.mlp(&mut t, layer, uv)?;
        if let Some(r) = self.config.tangent_radius {
            y = ops::bound(&mut t, y, r)?;
        }
        let y: Array1<f64> = t.value(y).row(0).to_owned();
        let v = TangentVector::at_origin(y.view(), b);
        exp_map(&origin(layer.n_out, b), &v, b)
    }

    /// One message-passing step on full point matrices of curvature `a`.
    /// Returns the full output points and their tangent features.
    #[allow(clippy::too_many_arguments)]
    fn layer_forward(
        &self,
        t: &mut Tape,
        batch: &GraphBatch,
        k: usize,
        x: Var,
        a: Var,
        b: Var,
        mode: UpdateMode,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var)> {
        let layer = &self.layers[k - 1];
        let n = batch.num_nodes();
        let xs = ops::spatial(t, x)?;

        t.set_scope(format!("layer {k}/attention"));
        let alpha = if batch.num_edges() == 0 {
            None
        } else if self.config.use_attention {
            let xi = t.gather_rows(x, batch.edge_node.clone())?;
            let xj = t.gather_rows(x, batch.edge_nbr.clone())?;
            let delta = ops::half_chord(t, xi, xj, a)?;
            let d2 = t.unary(delta, Unary::Acosh1pSq)?;
            let inv_a = t.recip(a)?;
            let d2 = t.mul_bcast(d2, inv_a)?;
            let score = t.scale(d2, -1.0)?;
            Some(t.segment_softmax(score, batch.edge_node.clone(), n)?)
        } else {
            Some(t.constant(batch.uniform_weights())?)
        };

        t.set_scope(format!("layer {k}/aggregate"));
        let iso = t.constant(batch.isolated_mask())?;
        let own = t.mul_bcast(xs, iso)?;
        let ts = match alpha {
            None => own,
            Some(alpha) => {
                let xj = t.gather_rows(x, batch.edge_nbr.clone())?;
                let weighted = t.mul_bcast(xj, alpha)?;
                let s = t.scatter_add_rows(weighted, batch.edge_node.clone(), n)?;
                let s_s = ops::spatial(t, s)?;
                // -c⟨s,s⟩ = Σ_jk α_j α_k (1 + δ_jk) ≥ (Σα)², free of cancellation
                let p1 = t.gather_rows(x, batch.pair_nbr1.clone())?;
                let p2 = t.gather_rows(x, batch.pair_nbr2.clone())?;
                let dpair = ops::half_chord(t, p1, p2, a)?;
                let dpair = t.offset(dpair, 1.0)?;
                let a1 = t.gather_rows(alpha, batch.pair_e1.clone())?;
                let a2 = t.gather_rows(alpha, batch.pair_e2.clone())?;
                let aa = t.mul(a1, a2)?;
                let term = t.mul(aa, dpair)?;
                let m = t.scatter_add_rows(term, batch.pair_node.clone(), n)?;
                let m = t.add(m, iso)?;
                let root = t.sqrt(m)?;
                let scale = t.constant(batch.cardinality_scale())?;
                let coef = t.div(scale, root)?;
                let coef = t.mul_bcast(coef, a)?;
                let agg = t.mul_bcast(s_s, coef)?;
                t.add(agg, own)?
            }
        };
        let tfull = ops::with_time(t, ts, a)?;

        t.set_scope(format!("layer {k}/update"));
        let u_self = ops::log0(t, xs, a)?;
        let u_self = match mode {
            UpdateMode::NoPt => u_self,
            UpdateMode::WithPt => transport_via(t, x, tfull, u_self, a)?,
        };
        let eps = t.param(&self.params, layer.epsilon)?;
        let one_eps = t.offset(eps, 1.0)?;
        let scaled = t.mul_bcast(u_self, one_eps)?;
        let u_agg = ops::log0(t, ts, a)?;
        let v = t.add(scaled, u_agg)?;

        t.set_scope(format!("layer {k}/transform"));
        let z = self.exp0(t, v, a)?;
        let mut u = ops::log0(t, z, a)?;
        if let Some(rng) = dropout {
            if layer.dropout > 0.0 {
                let keep = 1.0 - layer.dropout;
                let mask = Array2::from_shape_fn((n, layer.n_in), |_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                let mask = t.constant(mask)?;
                u = t.mul(u, mask)?;
            }
        }
        let y = self.mlp(t, layer, u)?;
        let out_s = self.exp0(t, y, b)?;
        let feat = ops::log0(t, out_s, b)?;
        let out = ops::with_time(t, out_s, b)?;
        Ok((out, feat))
    }

    /// Forward pass over a batch with the configured update mode.
    pub fn forward(&self, t: &mut Tape, batch: &GraphBatch, ctx: ForwardCtx) -> Result<ForwardOut> {
        self.forward_with(t, batch, ctx, self.config.update_mode)
    }

    pub fn forward_with(&self, t: &mut Tape, batch: &GraphBatch, ctx: ForwardCtx, mode: UpdateMode) -> Result<ForwardOut> {
        if batch.features.ncols() != self.config.layer_dims[0] {
            return Err(Error::DimensionMismatch {
                expected: self.config.layer_dims[0],
                got: batch.features.ncols(),
            });
        }
        let mut rng = ctx.training.then(|| {
            let mut r = ChaCha8Rng::seed_from_u64(self.config.seed);
            r.set_stream(ctx.step);
            r
        });

        t.set_scope("input embedding");
        let c0 = self.curvature_var(t, 0)?;
        let f = t.constant(batch.features.clone())?;
        let xs = self.exp0(t, f, c0)?;
        let mut x = ops::with_time(t, xs, c0)?;
        let mut feats = vec![ops::log0(t, xs, c0)?];
        let mut states = vec![x];
        let mut a = c0;
        for k in 1..=self.num_layers() {
            let b = self.curvature_var(t, k)?;
            let (out, feat) = self.layer_forward(t, batch, k, x, a, b, mode, rng.as_mut())?;
            states.push(out);
            feats.push(feat);
            x = out;
            a = b;
        }

        t.set_scope("readout");
        let pools = feats
            .into_iter()
            .map(|f| t.scatter_add_rows(f, batch.graph_of.clone(), batch.num_graphs))
            .collect::<Result<Vec<_>>>()?;
        let pooled = t.concat_cols(&pools)?;
        let w = t.param(&self.params, self.classifier_w)?;
        let bias = t.param(&self.params, self.classifier_b)?;
        let logits = t.matmul_t(pooled, w)?;
        let logits = t.add_bcast(logits, bias)?;
        t.set_scope("loss");
        let loss = t.softmax_cross_entropy(logits, batch.labels.clone())?;
        t.set_scope("");
        Ok(ForwardOut {
            states,
            pooled,
            logits,
            loss,
        })
    }

    /// One update step on explicit full point matrices of state `k−1`
    /// (evaluation mode). Neighbor lists may contain repeats.
    pub fn update_rule(&self, k: usize, states: &Array2<f64>, neighbors: &[Vec<usize>], mode: UpdateMode) -> Result<Array2<f64>> {
        let n = states.nrows();
        let batch = GraphBatch::from_parts(
            Array2::zeros((n, 0)),
            neighbors,
            vec![0; n],
            vec![0],
            1,
        )?;
        let mut t = Tape::new();
        let x = t.constant(states.clone())?;
        let a = self.curvature_var(&mut t, k - 1)?;
        let b = self.curvature_var(&mut t, k)?;
        let (out, _) = self.layer_forward(&mut t, &batch, k, x, a, b, mode, None)?;
        Ok(t.value(out).clone())
    }

    /// Loss, logits and parameter gradients (accumulated into `self.params`).
    pub fn loss_and_grad(&mut self, batch: &GraphBatch, ctx: ForwardCtx) -> Result<(f64, Array2<f64>)> {
        let mut t = Tape::new();
        let out = self.forward(&mut t, batch, ctx)?;
        let grads = t.backward(out.loss)?;
        self.params.zero_grad();
        grads.accumulate_into(&mut self.params);
        Ok((t.scalar(out.loss), t.value(out.logits).clone()))
    }

    /// Evaluation-mode outputs.
    pub fn evaluate(&self, batch: &GraphBatch) -> Result<Evaluation> {
        let mut t = Tape::new();
        let out = self.forward(&mut t, batch, ForwardCtx::eval())?;
        Ok(Evaluation {
            loss: t.scalar(out.loss),
            logits: t.value(out.logits).clone(),
            pooled: t.value(out.pooled).clone(),
            states: out.states.iter().map(|&s| t.value(s).clone()).collect(),
        })
    }

    /// Readout vector of a single graph.
    pub fn embed(&self, graph: &Graph) -> Result<Array1<f64>> {
        let batch = GraphBatch::new(&[graph])?;
        Ok(self.evaluate(&batch)?.pooled.row(0).to_owned())
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub logits: Array2<f64>,
    pub pooled: Array2<f64>,
    pub states: Vec<Array2<f64>>,
}

impl Evaluation {
    pub fn predictions(&self) -> Vec<usize> {
        self.logits
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Carries an origin tangent vector `u` along o → x → T → o by parallel
/// transport and returns the spatial part of the result.
fn transport_via(t: &mut Tape, x: Var, tp: Var, u: Var, c: Var) -> Result<Var> {
    let n = t.shape(x).0;
    let (x0, xs) = (t.slice_cols(x, 0, 1)?, ops::spatial(t, x)?);
    let (t0, ts) = (t.slice_cols(tp, 0, 1)?, ops::spatial(t, tp)?);
    let sc = t.sqrt(c)?;
    let cc = ops::col(t, c, n)?;
    let scc = ops::col(t, sc, n)?;
    let inv_sc = t.recip(sc)?;
    let inv_sc = ops::col(t, inv_sc, n)?;

    // o → x
    let xu = t.mul(xs, u)?;
    let dot = t.row_sum(xu)?;
    let num = t.mul(cc, dot)?;
    let sx0 = t.mul(scc, x0)?;
    let den = t.offset(sx0, 1.0)?;
    let k1 = t.div(num, den)?;
    let ox = t.add(inv_sc, x0)?;
    let w0 = t.mul(k1, ox)?;
    let shift = t.mul_bcast(xs, k1)?;
    let ws = t.add(u, shift)?;

    // x → T
    let tw_s = t.mul(ts, ws)?;
    let tw_s = t.row_sum(tw_s)?;
    let tw_0 = t.mul(t0, w0)?;
    let tw = t.sub(tw_s, tw_0)?;
    let num = t.mul(cc, tw)?;
    let dxt = ops::half_chord(t, x, tp, c)?;
    let den = t.offset(dxt, 2.0)?;
    let k2 = t.div(num, den)?;
    let sum0 = t.add(x0, t0)?;
    let inc0 = t.mul(k2, sum0)?;
    let w0 = t.add(w0, inc0)?;
    let sums = t.add(xs, ts)?;
    let incs = t.mul_bcast(sums, k2)?;
    let ws = t.add(ws, incs)?;

    // T → o
    let num = t.mul(scc, w0)?;
    let st0 = t.mul(scc, t0)?;
    let den = t.offset(st0, 1.0)?;
    let k3 = t.div(num, den)?;
    let back = t.mul_bcast(ts, k3)?;
    t.sub(ws, back)
}
