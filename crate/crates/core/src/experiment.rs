//! Cross-validated training runs, ablations and result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{init_features, load_jsonl_dataset, load_tu_dataset, make_folds, FeatureMode, GraphDataset};
use crate::model::{CurvatureMode, ForwardCtx, GraphBatch, Model, ModelConfig, UpdateMode};
use crate::optim::{lr_at, AdamConfig, OptimState};
use crate::stats::{mean, std_dev};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub data_root: PathBuf,
    /// Read a JSON-lines dataset instead of the TU directory.
    pub jsonl: Option<PathBuf>,
    pub feature_mode: FeatureMode,
    pub curvature_mode: CurvatureMode,
    pub use_parallel_transport: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub folds: usize,
    /// Widths of the message-passing layers (the input width comes from the data).
    pub hidden_widths: Vec<usize>,
    pub use_attention: bool,
    pub use_bias: bool,
    pub dropout: f64,
    pub epsilon_init: f64,
    pub init_curvature: f64,
    pub input_curvature: f64,
    pub init_gain: f64,
    pub tangent_radius: Option<f64>,
    pub optimizer: AdamConfig,
    /// Train on at most this many graphs of each training split.
    pub max_train_graphs: Option<usize>,
    pub deterministic: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "MUTAG".into(),
            data_root: PathBuf::from("data"),
            jsonl: None,
            feature_mode: FeatureMode::NodeLabels,
            curvature_mode: CurvatureMode::Fixed,
            use_parallel_transport: true,
            epochs: 70,
            batch_size: 8,
            seed: 0,
            folds: 10,
            hidden_widths: vec![128, 256, 512],
            use_attention: true,
            use_bias: true,
            dropout: 0.0,
            epsilon_init: 0.1,
            init_curvature: 4.0,
            input_curvature: 4.0,
            init_gain: 1.0,
            tangent_radius: Some(4.0),
            optimizer: AdamConfig::default(),
            max_train_graphs: None,
            deterministic: true,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("need at least 2 folds".into()));
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<GraphDataset> {
        let mut ds = match &self.jsonl {
            Some(p) => load_jsonl_dataset(p)?,
            None => load_tu_dataset(&self.data_root.join(&self.dataset), &self.dataset)?,
        };
        if self.jsonl.is_none() {
            init_features(&mut ds, self.feature_mode);
        }
        Ok(ds)
    }

    pub fn model_config(&self, input_dim: usize, num_classes: usize, seed: u64) -> ModelConfig {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(&self.hidden_widths);
        ModelConfig {
            layer_dims,
            hidden_dims: None,
            num_classes,
            curvature_mode: self.curvature_mode,
            init_curvature: self.init_curvature,
            input_curvature: self.input_curvature,
            epsilon_init: self.epsilon_init,
            use_attention: self.use_attention,
            use_bias: self.use_bias,
            update_mode: if self.use_parallel_transport {
                UpdateMode::WithPt
            } else {
                UpdateMode::NoPt
            },
            dropout: self.dropout,
            init_gain: self.init_gain,
            tangent_radius: self.tangent_radius,
            activation: crate::model::Activation::Tanh,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    /// Mean training loss of every epoch.
    pub loss_curve: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub num_graphs: usize,
    pub feature_dim: usize,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub mean_train_acc: f64,
    pub std_train_acc: f64,
    pub majority_baseline: f64,
    pub wall_time_s: f64,
    pub folds: Vec<FoldResult>,
}

impl RunSummary {
    pub fn from_folds(ds: &GraphDataset, folds: Vec<FoldResult>, wall_time_s: f64) -> Self {
        let test: Vec<f64> = folds.iter().map(|f| f.test_acc).collect();
        let train: Vec<f64> = folds.iter().map(|f| f.train_acc).collect();
        Self {
            dataset: ds.name.clone(),
            num_graphs: ds.len(),
            feature_dim: ds.feature_dim,
            mean_test_acc: mean(&test),
            std_test_acc: std_dev(&test),
            mean_train_acc: mean(&train),
            std_train_acc: std_dev(&train),
            majority_baseline: ds.majority_fraction(),
            wall_time_s,
            folds,
        }
    }

    pub fn test_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.test_acc).collect()
    }
}

/// Accuracy and mean loss of `model` on `idx`, batched.
pub fn evaluate(model: &Model, ds: &GraphDataset, idx: &[usize], batch_size: usize) -> Result<(f64, f64)> {
    let (mut correct, mut loss) = (0usize, 0.0);
    for chunk in idx.chunks(batch_size.max(1)) {
        let graphs: Vec<_> = chunk.iter().map(|&i| &ds.graphs[i]).collect();
        let batch = GraphBatch::new(&graphs)?;
        let ev = model.evaluate(&batch)?;
        loss += ev.loss * chunk.len() as f64;
        correct += ev
            .predictions()
            .iter()
            .zip(batch.labels.iter())
            .filter(|(p, l)| p == l)
            .count();
    }
    let n = idx.len().max(1) as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Trains a fresh model on `train` and returns it with its loss curve.
pub fn train_model(cfg: &ExperimentConfig, ds: &GraphDataset, train: &[usize], seed: u64) -> Result<(Model, Vec<f64>)> {
    let mc = cfg.model_config(ds.feature_dim, ds.num_classes, seed);
    let mut model = Model::new(mc)?;
    let labels: Vec<usize> = train.iter().map(|&i| ds.graphs[i].label).collect();
    model.set_class_prior(&labels);
    let mut opt = OptimState::new(&model.params, cfg.optimizer);
    let mut order = train.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_f01d);
    let batches_per_epoch = order.len().div_ceil(cfg.batch_size).max(1);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let graphs: Vec<_> = chunk.iter().map(|&i| &ds.graphs[i]).collect();
            let batch = GraphBatch::new(&graphs)?;
            let (loss, _) = model.loss_and_grad(&batch, ForwardCtx::train(step))?;
            let frac = epoch as f64 + b as f64 / batches_per_epoch as f64;
            let lr = lr_at(frac, cfg.optimizer.lr, &cfg.optimizer.schedule);
            opt.step(&mut model.params, lr)?;
            total += loss * chunk.len() as f64;
            step += 1;
        }
        let avg = total / order.len() as f64;
        log::debug!("epoch {epoch}: train loss {avg:.5}");
        curve.push(avg);
    }
    Ok((model, curve))
}

fn run_fold(cfg: &ExperimentConfig, ds: &GraphDataset, fold: usize, train: &[usize], test: &[usize]) -> Result<FoldResult> {
    let start = Instant::now();
    let train: Vec<usize> = match cfg.max_train_graphs {
        Some(m) => train.iter().copied().take(m).collect(),
        None => train.to_vec(),
    };
    let seed = cfg.seed.wrapping_add(fold as u64);
    let (model, loss_curve) = train_model(cfg, ds, &train, seed)?;
    let (train_acc, train_loss) = evaluate(&model, ds, &train, cfg.batch_size)?;
    let (test_acc, test_loss) = evaluate(&model, ds, test, cfg.batch_size)?;
    log::info!("{} fold {fold}: train {train_acc:.4} test {test_acc:.4}", ds.name);
    Ok(FoldResult {
        fold,
        train_acc,
        test_acc,
        train_loss,
        test_loss,
        loss_curve,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// k-fold cross-validation on a loaded dataset; one fresh model per fold.
pub fn run_cv_on(cfg: &ExperimentConfig, ds: &GraphDataset) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let plan = make_folds(&ds.labels(), cfg.folds, cfg.seed)?;
    let wrap = |fold: usize, e: Error| Error::Fold {
        fold,
        source: Box::new(e),
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results: Vec<FoldResult> = if cfg.deterministic || threads == 1 {
        (0..cfg.folds)
            .map(|f| run_fold(cfg, ds, f, &plan.train(f), &plan.test[f]).map_err(|e| wrap(f, e)))
            .collect::<Result<_>>()?
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.folds)
                .map(|f| {
                    let plan = &plan;
                    s.spawn(move || run_fold(cfg, ds, f, &plan.train(f), &plan.test[f]).map_err(|e| wrap(f, e)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold thread panicked"))
                .collect::<Result<_>>()
        })?
    };
    Ok(RunSummary::from_folds(ds, results, start.elapsed().as_secs_f64()))
}

pub fn run_cv(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let ds = cfg.load_dataset()?;
    run_cv_on(cfg, &ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub update_mode: UpdateMode,
    pub curvature_mode: CurvatureMode,
    pub summary: RunSummary,
}

/// The 2×2 grid {with PT, without PT} × {fixed, variable curvature}.
pub fn run_ablation_on(cfg: &ExperimentConfig, ds: &GraphDataset) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(4);
    for mode in [UpdateMode::WithPt, UpdateMode::NoPt] {
        for curvature in [CurvatureMode::Fixed, CurvatureMode::Variable] {
            let mut c = cfg.clone();
            c.use_parallel_transport = mode == UpdateMode::WithPt;
            c.curvature_mode = curvature;
            rows.push(AblationRow {
                update_mode: mode,
                curvature_mode: curvature,
                summary: run_cv_on(&c, ds)?,
            });
        }
    }
    Ok(rows)
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let ds = cfg.load_dataset()?;
    run_ablation_on(cfg, &ds)
}

fn mode_name(m: UpdateMode) -> &'static str {
    match m {
        UpdateMode::WithPt => "with_pt",
        UpdateMode::NoPt => "no_pt",
    }
}

fn curvature_name(c: CurvatureMode) -> &'static str {
    match c {
        CurvatureMode::Fixed => "fixed",
        CurvatureMode::Variable => "variable",
    }
}

/// Creates `<root>/<dataset>/<timestamp>`, suffixing on collision.
pub fn create_run_dir(root: &Path, dataset: &str) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S").to_string();
    let base = root.join(dataset);
    fs::create_dir_all(&base)?;
    let mut dir = base.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{k}"));
        k += 1;
    }
    fs::create_dir(&dir)?;
    Ok(dir)
}

pub fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

/// Per-fold metrics. Wall time is left out so identical runs give identical files.
pub fn write_folds_csv(path: &Path, folds: &[FoldResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fold", "train_acc", "test_acc", "train_loss", "test_loss"])?;
    for f in folds {
        w.write_record([
            f.fold.to_string(),
            f.train_acc.to_string(),
            f.test_acc.to_string(),
            f.train_loss.to_string(),
            f.test_loss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `test_acc` column of a folds CSV.
pub fn read_fold_accuracies(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "test_acc")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "no test_acc column".into(),
        })?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec.get(col).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: "test_acc is not a number".into(),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_summary(path: &Path, s: &RunSummary) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(s)?)?;
    Ok(())
}

/// One row per grid cell with the per-fold test accuracies appended.
pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let k = rows.first().map_or(0, |r| r.summary.folds.len());
    let mut header = vec![
        "update_mode".to_string(),
        "curvature_mode".into(),
        "mean_test_acc".into(),
        "std_test_acc".into(),
        "mean_train_acc".into(),
    ];
    header.extend((0..k).map(|f| format!("fold{f}_test_acc")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            mode_name(r.update_mode).to_string(),
            curvature_name(r.curvature_mode).to_string(),
            r.summary.mean_test_acc.to_string(),
            r.summary.std_test_acc.to_string(),
            r.summary.mean_train_acc.to_string(),
        ];
        rec.extend(r.summary.folds.iter().map(|f| f.test_acc.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs CV and writes `config.json`, `folds.csv` and `summary.json` into a
/// fresh run directory, which is returned.
pub fn run_and_record(cfg: &ExperimentConfig) -> Result<(PathBuf, RunSummary)> {
    let ds = cfg.load_dataset()?;
    let dir = create_run_dir(&cfg.output_dir, &ds.name)?;
    write_config(&dir, cfg)?;
    let summary = run_cv_on(cfg, &ds)?;
    write_folds_csv(&dir.join("folds.csv"), &summary.folds)?;
    write_summary(&dir.join("summary.json"), &summary)?;
    Ok((dir, summary))
}

/// Runs the ablation grid and writes `config.json` and `ablation.csv`.
pub fn ablate_and_record(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<AblationRow>)> {
    let ds = cfg.load_dataset()?;
    let dir = create_run_dir(&cfg.output_dir, &ds.name)?;
    write_config(&dir, cfg)?;
    let rows = run_ablation_on(cfg, &ds)?;
    write_ablation_csv(&dir.join("ablation.csv"), &rows)?;
    Ok((dir, rows))
}
