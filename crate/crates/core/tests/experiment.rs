mod common;

use lgin::experiment::{
    read_fold_accuracies, run_ablation_on, run_and_record, run_cv_on, write_folds_csv, ExperimentConfig,
};
use lgin::stats::{mean, std_dev};
use lgin::{Error, GraphDataset};

fn small_dataset() -> GraphDataset {
    let ds = common::mutag();
    let idx: Vec<usize> = (0..ds.len()).step_by(6).collect();
    ds.subset(&idx)
}

fn quick_config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        data_root: common::data_root(),
        epochs: 2,
        batch_size: 8,
        folds: 3,
        hidden_widths: vec![8, 8, 8],
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn zero_epochs_predicts_training_majority() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset();
    let cfg = ExperimentConfig { epochs: 0, ..quick_config(dir.path()) };
    let s = run_cv_on(&cfg, &ds).unwrap();
    let plan = lgin::data::make_folds(&ds.labels(), cfg.folds, cfg.seed).unwrap();
    for (f, r) in s.folds.iter().enumerate() {
        let train = plan.train(f);
        let ones = train.iter().filter(|&&i| ds.graphs[i].label == 1).count();
        let majority = usize::from(2 * ones > train.len());
        let hits = plan.test[f].iter().filter(|&&i| ds.graphs[i].label == majority).count();
        assert_eq!(r.test_acc, hits as f64 / plan.test[f].len() as f64);
        assert!(r.loss_curve.is_empty());
    }
}

#[test]
fn identical_runs_write_identical_folds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        max_train_graphs: Some(24),
        ..quick_config(dir.path())
    };
    let (a, sa) = run_and_record(&cfg).unwrap();
    let (b, sb) = run_and_record(&cfg).unwrap();
    assert_ne!(a, b);
    let fa = std::fs::read(a.join("folds.csv")).unwrap();
    let fb = std::fs::read(b.join("folds.csv")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(sa.folds.iter().map(|f| &f.loss_curve).collect::<Vec<_>>(), sb.folds.iter().map(|f| &f.loss_curve).collect::<Vec<_>>());
    assert!(a.join("config.json").exists() && a.join("summary.json").exists());

    // the summary is recomputable from the written folds
    let acc = read_fold_accuracies(&a.join("folds.csv")).unwrap();
    assert_eq!(acc.len(), 3);
    assert!((mean(&acc) - sa.mean_test_acc).abs() < 1e-12);
    assert!((std_dev(&acc) - sa.std_test_acc).abs() < 1e-12);
    let cfg_back = ExperimentConfig::from_json_file(&a.join("config.json")).unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn folds_csv_round_trips_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset();
    let s = run_cv_on(&quick_config(dir.path()), &ds).unwrap();
    let path = dir.path().join("folds.csv");
    write_folds_csv(&path, &s.folds).unwrap();
    assert_eq!(read_fold_accuracies(&path).unwrap(), s.test_accuracies());
    assert_eq!(s.num_graphs, ds.len());
    assert_eq!(s.majority_baseline, ds.majority_fraction());
}

#[test]
fn ablation_has_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset();
    let cfg = ExperimentConfig {
        epochs: 1,
        folds: 2,
        ..quick_config(dir.path())
    };
    let rows = run_ablation_on(&cfg, &ds).unwrap();
    assert_eq!(rows.len(), 4);
    let losses = |r: &lgin::experiment::AblationRow| r.summary.folds.iter().map(|f| f.test_loss).collect::<Vec<_>>();
    assert_ne!(losses(&rows[0]), losses(&rows[2]));
    assert_ne!(losses(&rows[0]), losses(&rows[1]));
}

#[test]
fn configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset();
    let bad = ExperimentConfig { batch_size: 0, ..quick_config(dir.path()) };
    assert!(matches!(run_cv_on(&bad, &ds), Err(Error::Config(_))));
    let bad = ExperimentConfig { folds: 1, ..quick_config(dir.path()) };
    assert!(matches!(run_cv_on(&bad, &ds), Err(Error::Config(_))));
    let missing = ExperimentConfig {
        dataset: "NOPE".into(),
        ..quick_config(dir.path())
    };
    assert!(matches!(missing.load_dataset(), Err(Error::MissingFile(_))));
}

#[test]
fn partial_config_files_take_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"epochs": 5, "curvature_mode": "variable", "optimizer": {"lr": 0.01}}"#).unwrap();
    let cfg = ExperimentConfig::from_json_file(&path).unwrap();
    assert_eq!(cfg.epochs, 5);
    assert_eq!(cfg.curvature_mode, lgin::model::CurvatureMode::Variable);
    assert_eq!(cfg.optimizer.lr, 0.01);
    assert_eq!(cfg.optimizer.beta2, 0.999);
    assert_eq!(cfg.hidden_widths, vec![128, 256, 512]);
}
